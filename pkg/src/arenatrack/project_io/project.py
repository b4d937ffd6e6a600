"""Project bundle: the .tox entry file and the video-input list.

<pname>.tox (key-value lines):
    name <project name>
    root <directory holding the project files, relative to the .tox>

The project directory contains <pname>_Configuration.txt,
<pname>_Input.txt, optionally <pname>_Calibrator.txt (manual 1:1 scale
when absent) and, for manual arena mode, <pname>_Arena.txt /
<pname>_ArenaNames.txt.

<pname>_Input.txt:
    line 1: sequence count S
    S lines: one frame source each (PGM directory or .y8 file),
             relative paths resolved against the project directory
    optional final line: "ref <sequence index> <frame index>" choosing
    the arena-definition reference frame (default: sequence 0, frame 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..calibration import CameraModel, load_calibrator
from .config import ConfigError, ProjectConfig, parse_configuration
from .frames import FrameSource, open_source


class ProjectError(ValueError):
    """Broken project bundle."""


@dataclass
class Project:
    name: str
    root: Path
    config: ProjectConfig
    camera: CameraModel
    source_paths: list[Path] = field(default_factory=list)
    reference: tuple[int, int] = (0, 0)   # (sequence, frame)

    @property
    def output_dir(self) -> Path:
        return self.root / self.name

    def open_sources(self) -> list[FrameSource]:
        fps = self.config["oth.frat"]
        return [open_source(p, fps) for p in self.source_paths]


def load_project(tox_path) -> Project:
    tox_path = Path(tox_path)
    if not tox_path.is_file():
        raise ProjectError(f"{tox_path}: project file not found")
    name = tox_path.stem
    root = tox_path.parent
    for line in tox_path.read_text(encoding="utf-8").splitlines():
        parts = line.strip().split(None, 1)
        if len(parts) != 2:
            continue
        key, value = parts
        if key == "name":
            name = value.strip()
        elif key == "root":
            root = (tox_path.parent / value.strip()).resolve()

    config_path = root / f"{name}_Configuration.txt"
    if config_path.is_file():
        try:
            config = parse_configuration(
                config_path.read_text(encoding="utf-8"))
        except ConfigError as exc:
            raise ConfigError(f"{config_path}: {exc}") from exc
    else:
        config = ProjectConfig()
    config.values["out.pnam"] = name

    calib_path = root / f"{name}_Calibrator.txt"
    if calib_path.is_file():
        camera = load_calibrator(calib_path)
    else:
        camera = CameraModel.manual_scale(1.0, 1.0)

    input_path = root / f"{name}_Input.txt"
    if not input_path.is_file():
        raise ProjectError(f"{input_path}: input file not found")
    lines = [ln.strip() for ln in
             input_path.read_text(encoding="utf-8").splitlines()
             if ln.strip()]
    try:
        count = int(lines[0])
    except (IndexError, ValueError):
        raise ProjectError(f"{input_path}:1: expected sequence count")
    if len(lines) < count + 1:
        raise ProjectError(
            f"{input_path}: lists {count} sequences but has "
            f"{len(lines) - 1} entries")
    sources = [(root / lines[i + 1]).resolve() if not Path(lines[i + 1]).is_absolute()
               else Path(lines[i + 1]) for i in range(count)]
    for p in sources:
        if not p.exists():
            raise ProjectError(f"{input_path}: source not found: {p}")
    reference = (0, 0)
    for extra in lines[count + 1:]:
        parts = extra.split()
        if parts and parts[0] == "ref" and len(parts) == 3:
            reference = (int(parts[1]), int(parts[2]))
    return Project(name=name, root=root, config=config, camera=camera,
                   source_paths=sources, reference=reference)


def save_project(project: Project, tox_path=None) -> Path:
    tox_path = Path(tox_path) if tox_path else \
        project.root / f"{project.name}.tox"
    tox_path.write_text(
        f"name {project.name}\nroot {project.root}\n", encoding="utf-8")
    input_path = project.root / f"{project.name}_Input.txt"
    lines = [str(len(project.source_paths))]
    lines += [str(p) for p in project.source_paths]
    lines.append(f"ref {project.reference[0]} {project.reference[1]}")
    input_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return tox_path
