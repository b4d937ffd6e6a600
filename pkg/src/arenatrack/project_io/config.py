"""Configuration grammar: section headers + "code value" lines.

Sections are ALL_CAPS_WITH_UNDERSCORES header lines; each following line
is a parameter code and its value(s), whitespace separated. Scientific
notation is accepted ("1.E-06"). Unknown sections or codes, non-numeric
values and out-of-range values are rejected with their line number.
Absent codes take their defaults, so an empty file is a valid (default)
configuration. ``out.imgf`` is an extension code selecting PNG (0,
default) or JPEG (1) image output.

The same grammar parses the graphics file (ColorIni.txt); its color
triples are stored blue-green-red in the file and converted to RGB on
load.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from ..analytics import AnalyticsParams
from ..arena import RoiParams
from ..background import GmmParams
from ..detection import DetectionParams
from ..identity import IdentityParams
from ..render import RenderStyle
from ..tracking import TrackerParams


class ConfigError(ValueError):
    """Malformed configuration input (message carries the line number)."""


@dataclass(frozen=True)
class ParamSpec:
    code: str
    section: str
    kind: type          # int, float or str
    default: Any
    minimum: float | None = None
    maximum: float | None = None


def _spec_table() -> list[ParamSpec]:
    i, f, s = int, float, str
    rows = [
        ("exe.thre", "GENERAL_PARAMETERS", i, 16, 0, 1024),
        ("cal.size", "CALIBRATION_PARAMETERS", f, 20.0, 0, None),
        ("cal.cols", "CALIBRATION_PARAMETERS", i, 10, 2, None),
        ("cal.rows", "CALIBRATION_PARAMETERS", i, 8, 2, None),
        ("cal.dist", "CALIBRATION_PARAMETERS", i, 1, 0, 3),
        ("roi.mode", "ARENA_DEFINITION_PARAMETERS", i, 0, 0, 1),
        ("roi.thre", "ARENA_DEFINITION_PARAMETERS", i, 150, 0, 255),
        ("roi.poly", "ARENA_DEFINITION_PARAMETERS", f, 1.0, 0, None),
        ("roi.elms", "ARENA_DEFINITION_PARAMETERS", i, 7, 0, None),
        ("roi.dilt", "ARENA_DEFINITION_PARAMETERS", i, 1, 0, None),
        ("roi.erot", "ARENA_DEFINITION_PARAMETERS", i, 4, 0, None),
        ("roi.mins", "ARENA_DEFINITION_PARAMETERS", i, 100_000, 0, None),
        ("roi.fite", "ARENA_DEFINITION_PARAMETERS", i, 0, 0, 1),
        ("roi.redr", "ARENA_DEFINITION_PARAMETERS", f, 1.0, 0, None),
        ("bgs.mode", "BACKGROUND_PARAMETERS", i, 0, 0, 1),
        ("bgs.num", "BACKGROUND_PARAMETERS", i, 500, 1, None),
        ("bgs.thre", "BACKGROUND_PARAMETERS", f, 25.0, 0, None),
        ("bgs.shad", "BACKGROUND_PARAMETERS", i, 0, 0, 1),
        ("bgs.numg", "BACKGROUND_PARAMETERS", i, 5, 1, None),
        ("bgs.ratb", "BACKGROUND_PARAMETERS", f, 0.99, None, 1),
        ("bgs.lstp", "BACKGROUND_PARAMETERS", f, 1e-6, None, 1),
        ("pre.gfil", "PREPROCESSING_PARAMETERS", i, 5, 0, None),
        ("pre.norm", "PREPROCESSING_PARAMETERS", i, 0, 0, 1),
        ("det.type", "DETECTION_PARAMETERS", i, 0, None, None),
        ("det.thre", "DETECTION_PARAMETERS", i, 90, 0, 255),
        ("det.opcl", "DETECTION_OPENING_CLOSING", i, 0, 0, 1),
        ("det.elms", "DETECTION_OPENING_CLOSING", i, 3, 0, None),
        ("det.dilt", "DETECTION_OPENING_CLOSING", i, 2, 0, None),
        ("det.erot", "DETECTION_OPENING_CLOSING", i, 2, 0, None),
        ("det.erdi", "DETECTION_DILATION_EROSION", i, 0, 0, 1),
        ("det.elss", "DETECTION_DILATION_EROSION", i, 0, 0, None),
        ("det.ertt", "DETECTION_DILATION_EROSION", i, 0, 0, None),
        ("det.filt", "DETECTION_FILTER", i, 1, 0, 1),
        ("det.maxs", "DETECTION_FILTER", i, 1500, 0, None),
        ("det.mins", "DETECTION_FILTER", i, 150, 0, None),
        ("det.maxr", "DETECTION_FILTER", f, 0.0, 0, None),
        ("det.minr", "DETECTION_FILTER", f, 0.0, 0, None),
        ("det.mash", "DETECTION_FILTER", f, 0.0, 0, None),
        ("det.mish", "DETECTION_FILTER", f, 0.0, 0, None),
        ("det.minf", "DETECTION_FILTER", f, 0.0, 0, 1),
        ("kal.mode", "KALMAN_FILTER_TYPE", i, 2, None, None),
        ("kal.time", "KALMAN_FILTER_PARAMS", f, 0.25, 0, None),
        ("kal.pron", "KALMAN_FILTER_PARAMS", f, 0.1, 0, None),
        ("kal.mean", "KALMAN_FILTER_PARAMS", f, 1e-5, 0, None),
        ("kal.errc", "KALMAN_FILTER_PARAMS", f, 0.1, 0, None),
        ("kal.disf", "KALMAN_FILTER_ACCEPTANCE", f, 50.0, 0, None),
        ("kal.sich", "KALMAN_FILTER_ACCEPTANCE", f, 0.4, 0, None),
        ("kal.dund", "KALMAN_FILTER_DELETE1", i, 1, 0, None),
        ("kal.dage", "KALMAN_FILTER_DELETE2", i, 10, 0, None),
        ("kal.dmax", "KALMAN_FILTER_DELETE2", i, 8, 0, None),
        ("kal.ntra", "KALMAN_FILTER_NUMBEROFTRACKS", i, 1, 1, None),
        ("kal.idal", "KALMAN_MULTITRACKING_IDENTITY_ALGORITHM", i, 0, 0, 2),
        ("kal.fdis", "KALMAN_MULTITRACKING_IDENTITY_ALGORITHM", f, 0.0, 0, None),
        ("kal.cmsc", "KALMAN_MULTITRACKING_COMPARISON", f, 0.2, 0, None),
        ("kal.corH", "KALMAN_MULTITRACKING_COMPARISON", i, 1, 0, 1),
        ("kal.cmhc", "KALMAN_MULTITRACKING_COMPARISON", f, 0.7, -1, 1),
        ("kal.corN", "KALMAN_MULTITRACKING_COMPARISON", i, 100, 1, None),
        ("kal.shaC", "KALMAN_MULTITRACKING_COMPARISON", f, 10.0, 0, None),
        ("kal.shaN", "KALMAN_MULTITRACKING_COMPARISON", i, 500, 1, None),
        ("kal.mcmp", "KALMAN_MULTITRACKING_EVALUATION", i, 500, 1, None),
        ("kal.mAvg", "KALMAN_MULTITRACKING_EVALUATION", i, 1, 0, 1),
        ("kal.gStd", "KALMAN_MULTITRACKING_EVALUATION", f, 0.05, 0, None),
        ("kal.rGrp", "KALMAN_MULTITRACKING_SELECTION", i, 2, 0, 2),
        ("kal.hOrd", "KALMAN_MULTITRACKING_SELECTION", i, 1, 0, 1),
        ("kal.hiss", "KALMAN_MULTITRACKING_FEATURE_PARAMETERS", i, 20, 1, 256),
        ("kal.tcmr", "KALMAN_MULTITRACKING_FEATURE_PARAMETERS", i, 25, 1, None),
        ("kal.tcnd", "KALMAN_MULTITRACKING_FEATURE_PARAMETERS", i, 0, 0, 2),
        ("kal.hist", "KALMAN_MULTITRACKING_FEATURE_PARAMETERS", i, 500, 1, None),
        ("kal.advr", "KALMAN_MULTITRACKING_COLLISION_PARAMETERS", f, 0.8, 0, 1),
        ("kal.advm", "KALMAN_MULTITRACKING_COLLISION_PARAMETERS", f, 10.0, 0, None),
        ("kal.cnft", "KALMAN_MULTITRACKING_COLLISION_PARAMETERS", i, 20, 0, None),
        ("kal.tfmi", "KALMAN_MULTITRACKING_FUSSION_PARAMETERS", i, 5, 0, None),
        ("kal.tfma", "KALMAN_MULTITRACKING_FUSSION_PARAMETERS", i, 10, 0, None),
        ("kal.tdma", "KALMAN_MULTITRACKING_FUSSION_PARAMETERS", i, 10, 0, None),
        ("kal.acor", "KALMAN_MULTITRACKING_FUSSION_PARAMETERS", f, 0.6, -1, 1),
        ("kal.bcor", "KALMAN_MULTITRACKING_FUSSION_PARAMETERS", f, 0.5, -1, 1),
        ("kal.mins", "KALMAN_MULTITRACKING_TRACK_PARAMETERS", i, 50, 1, None),
        ("kal.idgb", "KALMAN_MULTITRACKING_CORRELATION_PARAMETERS", f, 0.0, 0, 1),
        ("kal.idla", "KALMAN_MULTITRACKING_CORRELATION_PARAMETERS", f, 0.0, 0, 1),
        ("kal.idlb", "KALMAN_MULTITRACKING_CORRELATION_PARAMETERS", f, 0.0, 0, 1),
        ("kal.idsa", "KALMAN_MULTITRACKING_CORRELATION_PARAMETERS", f, 0.0, 0, 1),
        ("kal.idsb", "KALMAN_MULTITRACKING_CORRELATION_PARAMETERS", f, 0.0, 0, 1),
        ("kal.idff", "KALMAN_MULTITRACKING_OTHER_PARAMETERS", i, 500, 1, None),
        ("out.step", "OUTPUT_PARAMETERS", i, 10, 1, None),
        ("out.wind", "OUTPUT_PARAMETERS", i, 0, 0, 2),
        ("out.ftxt", "OUTPUT_PARAMETERS", i, 1, 0, 2),
        ("out.fjpg", "OUTPUT_PARAMETERS", i, 1, 0, 4),
        ("out.pnam", "OUTPUT_PARAMETERS", s, "TestProject", None, None),
        ("out.imgf", "OUTPUT_PARAMETERS", i, 0, 0, 1),
        ("ana.norm", "DATA_ANALYSIS_ARENA", i, 0, 0, 1),
        ("ana.aror", "DATA_ANALYSIS_ARENA", i, 3, 0, 3),
        ("ana.nzon", "DATA_ANALYSIS_ZONE", i, 30, 1, None),
        ("ana.zsizq", "DATA_ANALYSIS_ZONE", f, 50.0, 0, None),
        ("ana.spsa", "DATA_ANALYSIS_SPEED", i, 2, 1, None),
        ("ana.mobs", "DATA_ANALYSIS_SPEED", f, 1.0, 0, None),
        ("ana.fmmt", "DATA_ANALYSIS_FROZEN", f, 5.0, 0, None),
        ("ana.ftim", "DATA_ANALYSIS_FROZEN", f, 3.0, 0, None),
        ("ana.ttim", "DATA_ANALYSIS_TRANSITIONS", f, 7.0, 0, None),
        ("ana.inte", "DATA_ANALYSIS_POSTPROCESS", i, 0, 0, 1),
        ("ana.intf", "DATA_ANALYSIS_POSTPROCESS", i, 25, 0, None),
        ("ana.smoo", "DATA_ANALYSIS_POSTPROCESS", i, 0, 0, 1),
        ("ana.rvis", "DATA_ANALYSIS_OTHER", f, 0.05, 0, 1),
        ("oth.mini", "MAIN_VIDEO_PARAMETERS", f, 0.0, 0, None),
        ("oth.mend", "MAIN_VIDEO_PARAMETERS", f, 1e10, 0, None),
        ("oth.atyp", "MAIN_VIDEO_PARAMETERS", i, 8, None, None),
        ("oth.frat", "MAIN_VIDEO_PARAMETERS", f, 25.0, 0, None),
        ("oth.rees", "MAIN_VIDEO_PARAMETERS", f, 1.0, 0, None),
    ]
    return [ParamSpec(*row) for row in rows]


PARAM_SPECS: dict[str, ParamSpec] = {p.code: p for p in _spec_table()}
SECTIONS: list[str] = list(dict.fromkeys(p.section for p in _spec_table()))


def _parse_value(spec: ParamSpec, raw: str, lineno: int):
    if spec.kind is str:
        return raw
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: {spec.code}: not a number: {raw!r}")
    if spec.kind is int:
        if value != int(value):
            raise ConfigError(
                f"line {lineno}: {spec.code}: expected an integer, got {raw!r}")
        value = int(value)
    if spec.minimum is not None and value < spec.minimum:
        raise ConfigError(
            f"line {lineno}: {spec.code}: {value} below minimum {spec.minimum}")
    if spec.maximum is not None and value > spec.maximum:
        raise ConfigError(
            f"line {lineno}: {spec.code}: {value} above maximum {spec.maximum}")
    return value


@dataclass
class ProjectConfig:
    values: dict[str, Any] = field(
        default_factory=lambda: {c: p.default for c, p in PARAM_SPECS.items()})

    def __getitem__(self, code: str):
        return self.values[code]

    def __setitem__(self, code: str, value) -> None:
        if code not in PARAM_SPECS:
            raise ConfigError(f"unknown parameter code {code!r}")
        self.values[code] = _parse_value(PARAM_SPECS[code], str(value), 0)

    # ------------------------------------------------------ module views

    def validate(self) -> None:
        gfil = self["pre.gfil"]
        if gfil != 0 and (gfil < 3 or gfil % 2 == 0):
            raise ConfigError("pre.gfil must be 0 or an odd size >= 3")
        if self["oth.mini"] > self["oth.mend"]:
            raise ConfigError("oth.mini must not exceed oth.mend")
        if not (0.0 < self["bgs.ratb"] <= 1.0):
            raise ConfigError("bgs.ratb must be in (0, 1]")
        self.detection_params()
        self.tracker_params()

    def roi_params(self, rects=(), names=()) -> RoiParams:
        return RoiParams(
            thre=self["roi.thre"], poly=self["roi.poly"],
            elms=self["roi.elms"], dilt=self["roi.dilt"],
            erot=self["roi.erot"], mins=self["roi.mins"],
            fite=bool(self["roi.fite"]), redr=self["roi.redr"],
            mode=self["roi.mode"], rects=tuple(rects), names=tuple(names))

    def gmm_params(self) -> GmmParams:
        return GmmParams(
            enabled=bool(self["bgs.mode"]), history=self["bgs.num"],
            mahal_threshold=self["bgs.thre"], num_gaussians=self["bgs.numg"],
            background_ratio=self["bgs.ratb"], learning_rate=self["bgs.lstp"])

    def detection_params(self) -> DetectionParams:
        return DetectionParams(
            thre=self["det.thre"], opcl=self["det.opcl"],
            elms=self["det.elms"], dilt=self["det.dilt"],
            erot=self["det.erot"], erdi=self["det.erdi"],
            elss=self["det.elss"], ertt=self["det.ertt"],
            filt=bool(self["det.filt"]), mins=self["det.mins"],
            maxs=self["det.maxs"], minr=self["det.minr"],
            maxr=self["det.maxr"], mish=self["det.mish"],
            mash=self["det.mash"], minf=self["det.minf"])

    def tracker_params(self) -> TrackerParams:
        return TrackerParams(
            time_step=self["kal.time"], process_noise=self["kal.pron"],
            measurement_noise=self["kal.mean"],
            initial_covariance=self["kal.errc"],
            max_displacement=self["kal.disf"],
            max_size_change=self["kal.sich"],
            max_unassigned=self["kal.dund"],
            min_survival_length=self["kal.dmax"],
            min_output_length=self["kal.dage"],
            animals_per_arena=self["kal.ntra"],
            collision_ratio=self["kal.advr"],
            collision_margin=self["kal.advm"],
            conflicted_retention=self["kal.cnft"],
            fuse_min_age=self["kal.tfmi"], fuse_max_age=self["kal.tfma"],
            fuse_max_gap=self["kal.tdma"], fuse_mean_corr=self["kal.acor"],
            fuse_best_corr=self["kal.bcor"],
            long_track_length=self["kal.mins"],
            feature_capacity=self["kal.hist"],
            flush_track_count=self["kal.idff"])

    def identity_params(self) -> IdentityParams:
        return IdentityParams(
            algorithm=self["kal.idal"], hist_bins=self["kal.hiss"],
            tcm_radius=self["kal.tcmr"], tcm_dtype=self["kal.tcnd"],
            feature_capacity=self["kal.hist"],
            min_size_similarity=self["kal.cmsc"],
            min_hist_correlation=self["kal.cmhc"],
            max_comparisons=self["kal.mcmp"],
            use_mean=bool(self["kal.mAvg"]), gaussian_std=self["kal.gStd"],
            high_order=bool(self["kal.hOrd"]), group_mode=self["kal.rGrp"],
            frame_distance=self["kal.fdis"],
            displacement_per_frame=self["kal.disf"],
            long_track_length=self["kal.mins"],
            group_bound=self["kal.idgb"],
            long_mean_bound=self["kal.idla"],
            long_best_bound=self["kal.idlb"],
            short_mean_bound=self["kal.idsa"],
            short_best_bound=self["kal.idsb"],
            flush_track_count=self["kal.idff"])

    def analytics_params(self) -> AnalyticsParams:
        return AnalyticsParams(
            normalize=bool(self["ana.norm"]),
            arena_orientation=self["ana.aror"], zone_count=self["ana.nzon"],
            zone_size=self["ana.zsizq"], speed_sampling=self["ana.spsa"],
            mobility_speed=self["ana.mobs"], frozen_distance=self["ana.fmmt"],
            frozen_time=self["ana.ftim"], transition_time=self["ana.ttim"],
            interpolate=bool(self["ana.inte"]), max_gap=self["ana.intf"],
            smooth=bool(self["ana.smoo"]), min_visibility=self["ana.rvis"])


_SECTION_RE = re.compile(r"[A-Z][A-Z0-9_]*$")


def parse_configuration(text: str) -> ProjectConfig:
    config = ProjectConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if _SECTION_RE.fullmatch(stripped):
            if stripped not in SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section {stripped!r}")
            continue
        parts = stripped.split(None, 1)
        if len(parts) != 2:
            raise ConfigError(f"line {lineno}: expected 'code value'")
        code, raw = parts
        if code not in PARAM_SPECS:
            raise ConfigError(f"line {lineno}: unknown parameter code {code!r}")
        config.values[code] = _parse_value(PARAM_SPECS[code], raw.strip(),
                                           lineno)
    config.validate()
    return config


def _format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    return f"{value:.10g}"


def write_configuration(config: ProjectConfig) -> str:
    lines = []
    for section in SECTIONS:
        lines.append(section)
        for spec in PARAM_SPECS.values():
            if spec.section == section:
                lines.append(f"{spec.code} "
                             f"{_format_value(config.values[spec.code])}")
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------- ColorIni.txt

GRAPHIC_DEFAULTS = {
    "traj.long": 25, "roiL.widt": 2, "traL.widt": 1, "staL.widt": 1,
    "labl.size": 2, "font.size": 2,
    # Color triples are file-ordered BGR.
    "rea.bgnd": (255, 255, 255), "staL.colr": (0, 0, 0),
    "roiU.colr": (255, 0, 0), "roiS.colr": (0, 255, 0),
    "roNU.colr": (255, 0, 0), "roNS.colr": (0, 255, 0),
    "roiM.colr": (0, 0, 255),
}

GRAPHIC_SECTIONS = ("GENERAL_PARAMETERS", "COLOR_PARAMETERS")


def parse_colorini(text: str) -> dict:
    values = dict(GRAPHIC_DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped in GRAPHIC_SECTIONS:
            continue
        parts = stripped.split()
        code = parts[0]
        if code not in values:
            raise ConfigError(f"line {lineno}: unknown graphic code {code!r}")
        try:
            numbers = [int(float(p)) for p in parts[1:]]
        except ValueError:
            raise ConfigError(f"line {lineno}: {code}: non-numeric value")
        if isinstance(GRAPHIC_DEFAULTS[code], tuple):
            if len(numbers) != 3:
                raise ConfigError(f"line {lineno}: {code}: expected 3 values")
            values[code] = tuple(numbers)
        else:
            if len(numbers) != 1:
                raise ConfigError(f"line {lineno}: {code}: expected 1 value")
            values[code] = numbers[0]
    return values


def render_style_from_graphics(values: dict) -> RenderStyle:
    def bgr_to_rgb(c):
        return (c[2], c[1], c[0])

    return RenderStyle(
        zone_line_width=values["staL.widt"],
        zone_line_color=bgr_to_rgb(values["staL.colr"]),
        trajectory_width=values["traL.widt"],
        population_background=bgr_to_rgb(values["rea.bgnd"]))
