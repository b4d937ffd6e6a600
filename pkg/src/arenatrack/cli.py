"""Batch command line.

    arenatrack run PROJECT.tox [--start-min M] [--end-min M] [--threads N]
                               [--no-identity] [--out-level {0,1,2}]
    arenatrack synth SCENE.txt OUTDIR [--project]
    arenatrack check [CONFIG.txt]
    arenatrack render PROJECT.tox
    arenatrack bench [--frames N] [--size WxH] [--threads N]
    arenatrack serve PROJECT.tox [--host H] [--port P]

Exit codes: 0 success (a run with zero tracks is a valid outcome and
warns), 2 configuration errors, 3 input/output errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .arena import ArenaDefinitionError
from .calibration import CalibrationError
from .pipeline import RunOptions, RunStopped, run_project
from .project_io.config import ConfigError, ProjectConfig, \
    parse_configuration, write_configuration
from .project_io.frames import FrameSourceError, write_y8
from .project_io.project import ProjectError, load_project
from .synth import SceneError, SceneRenderer, parse_scene_spec, scene_truth

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


class _Progress:
    """One line per stage per sequence, updated at coarse steps."""

    def __init__(self):
        self.last: dict[tuple[str, int], int] = {}

    def __call__(self, stage: str, sequence: int, pct: float) -> None:
        bucket = int(pct // 25) * 25
        key = (stage, sequence)
        if self.last.get(key) == bucket and pct < 100.0:
            return
        self.last[key] = bucket
        print(f"[seq {sequence + 1}] {stage}: {pct:3.0f}%", flush=True)


def cmd_run(args) -> int:
    try:
        project = load_project(args.project)
    except (ProjectError, FrameSourceError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    options = RunOptions(
        threads=args.threads, no_identity=args.no_identity,
        out_level=args.out_level, start_min=args.start_min,
        end_min=args.end_min, progress=_Progress())
    try:
        results, outdir, written = run_project(project, options)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FrameSourceError, ProjectError, ArenaDefinitionError,
            PermissionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RunStopped as exc:
        print(f"stopped: {exc}", file=sys.stderr)
        return EXIT_OK
    total_tracks = sum(len(res.tracks) for seq in results.sequences
                       for res in seq.arenas)
    if total_tracks == 0:
        print("warning: analysis produced zero tracks", file=sys.stderr)
    print(f"wrote {len(written)} files under {outdir}")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = parse_scene_spec(Path(args.scene).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    renderer = SceneRenderer(spec)
    frames = [renderer.frame(i) for i in range(spec.frames)]
    write_y8(outdir / "scene.y8", frames, spec.fps)
    truth = scene_truth(spec)
    with open(outdir / "truth.txt", "w", encoding="utf-8") as fh:
        for p in truth:
            fh.write(f"{p.time_s:.6g}\t{p.arena}\t{p.track}\t{p.x:.6g}\t"
                     f"{p.y:.6g}\t{p.label}\n")
    if args.project:
        name = args.name
        config = ProjectConfig()
        config.values["out.pnam"] = name
        config.values["roi.mins"] = 5000
        config.values["oth.frat"] = spec.fps
        (outdir / f"{name}_Configuration.txt").write_text(
            write_configuration(config), encoding="utf-8")
        (outdir / f"{name}_Input.txt").write_text(
            "1\nscene.y8\nref 0 0\n", encoding="utf-8")
        (outdir / f"{name}.tox").write_text(
            f"name {name}\nroot .\n", encoding="utf-8")
    print(f"wrote {spec.frames} frames to {outdir / 'scene.y8'}")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        if args.config:
            config = parse_configuration(
                Path(args.config).read_text(encoding="utf-8"))
        else:
            config = ProjectConfig()
            config.validate()
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(write_configuration(config))
    return EXIT_OK


def cmd_render(args) -> int:
    from .rerender import reanalyze_project
    try:
        project = load_project(args.project)
        written = reanalyze_project(project)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProjectError, FrameSourceError, ArenaDefinitionError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"re-rendered {len(written)} files")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import run_benchmark
    try:
        width, height = (int(v) for v in args.size.split("x"))
    except ValueError:
        print("error: --size must look like 1280x720", file=sys.stderr)
        return EXIT_CONFIG
    report = run_benchmark(frames=args.frames, width=width, height=height,
                           threads=args.threads)
    print(report)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    try:
        project = load_project(args.project)
    except (ProjectError, ConfigError, FrameSourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    app = create_app(project)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arenatrack",
        description="Multi-arena organism tracking and behavior analytics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a project end to end")
    p_run.add_argument("project")
    p_run.add_argument("--start-min", type=float, default=None)
    p_run.add_argument("--end-min", type=float, default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--no-identity", action="store_true")
    p_run.add_argument("--out-level", type=int, choices=(0, 1, 2),
                       default=None)
    p_run.set_defaults(func=cmd_run)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene")
    p_synth.add_argument("scene")
    p_synth.add_argument("outdir")
    p_synth.add_argument("--project", action="store_true",
                         help="also write a ready-to-run project bundle")
    p_synth.add_argument("--name", default="SynthProject")
    p_synth.set_defaults(func=cmd_synth)

    p_check = sub.add_parser("check",
                             help="validate a config and print effective values")
    p_check.add_argument("config", nargs="?")
    p_check.set_defaults(func=cmd_check)

    p_render = sub.add_parser(
        "render", help="recompute analytics/images from stored tracking")
    p_render.add_argument("project")
    p_render.set_defaults(func=cmd_render)

    p_bench = sub.add_parser("bench", help="throughput report (frames/s)")
    p_bench.add_argument("--frames", type=int, default=200)
    p_bench.add_argument("--size", default="1280x720")
    p_bench.add_argument("--threads", type=int, default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_serve = sub.add_parser("serve", help="local HTTP service for the tuner UI")
    p_serve.add_argument("project")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8970)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
