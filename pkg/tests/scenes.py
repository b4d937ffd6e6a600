"""Shared synthetic scenes for the acceptance suite and golden files."""

from pathlib import Path

from arenatrack.project_io.config import ProjectConfig, write_configuration
from arenatrack.project_io.frames import write_y8
from arenatrack.project_io.project import Project
from arenatrack.synth import ArenaSpec, BlobSpec, SceneRenderer, SceneSpec
from arenatrack.calibration import CameraModel


def four_arena_scene(frames=1500) -> SceneSpec:
    """One textured blob per arena, mild noise; detection-rate fixture."""
    rects = [(40, 40, 340, 340), (460, 40, 760, 340),
             (40, 460, 340, 760), (460, 460, 760, 760)]
    textures = [
        dict(texture="uniform", intensity=40, contrast=0),
        dict(texture="stripes", intensity=30, contrast=32, period=5),
        dict(texture="checker", intensity=30, contrast=32, period=4),
        dict(texture="gradient", intensity=25, contrast=45),
    ]
    speeds = [(2.3, 1.7), (-2.1, 2.6), (2.8, -1.9), (-2.4, -2.2)]
    blobs = []
    for i, (rect, tex, v) in enumerate(zip(rects, textures, speeds)):
        cx = (rect[0] + rect[2]) / 2 + 20 * (i - 1.5)
        cy = (rect[1] + rect[3]) / 2 - 15 * (i - 1.5)
        blobs.append(BlobSpec(arena=i + 1, radius=10, path="linear",
                              params=(cx, cy, v[0], v[1]), **tex))
    return SceneSpec(width=800, height=800, fps=25, frames=frames, seed=42,
                     noise_sigma=2.0,
                     arenas=tuple(ArenaSpec(r) for r in rects),
                     blobs=tuple(blobs))


def crossing_scene(frames=2500) -> SceneSpec:
    """Five distinct textures in one arena, dozens of crossings."""
    blobs = (
        BlobSpec(arena=1, radius=10, texture="uniform", intensity=35,
                 path="linear", params=(80, 80, 3.7, 2.9)),
        BlobSpec(arena=1, radius=10, texture="stripes", intensity=28,
                 contrast=34, period=5, path="linear",
                 params=(330, 90, -3.2, 3.6)),
        BlobSpec(arena=1, radius=10, texture="checker", intensity=28,
                 contrast=34, period=4, path="linear",
                 params=(90, 340, 4.1, -3.4)),
        BlobSpec(arena=1, radius=10, texture="gradient", intensity=22,
                 contrast=48, path="linear", params=(340, 330, -3.9, -2.7)),
        BlobSpec(arena=1, radius=10, texture="uniform", intensity=68,
                 path="linear", params=(210, 210, 2.6, -4.0)),
    )
    return SceneSpec(width=460, height=460, fps=25, frames=frames, seed=2,
                     noise_sigma=2.0, arenas=(ArenaSpec((30, 30, 430, 430)),),
                     blobs=blobs)


def golden_scene() -> SceneSpec:
    """Small fixed-seed two-arena scene for byte-exact golden outputs."""
    blobs = (
        BlobSpec(arena=1, radius=9, texture="stripes", intensity=35,
                 contrast=30, period=5, path="linear",
                 params=(100, 90, 2.1, 1.4)),
        BlobSpec(arena=2, radius=9, texture="checker", intensity=35,
                 contrast=30, period=4, path="circular",
                 params=(480, 130, 45.0, 0.08, 0.0)),
    )
    return SceneSpec(width=640, height=260, fps=25, frames=300, seed=0,
                     noise_sigma=2.0,
                     arenas=(ArenaSpec((30, 30, 310, 230)),
                             ArenaSpec((350, 30, 610, 230))),
                     blobs=blobs)


GOLDEN_CONFIG = {
    "roi.mins": 5000, "roi.dilt": 4, "roi.erot": 4,
    "out.ftxt": 2, "out.fjpg": 1,
    "kal.idal": 2, "kal.ntra": 1,
    "ana.inte": 1, "ana.zsizq": 20.0,
    "oth.frat": 25.0,
}


class MemorySourceProject(Project):
    """Project whose frames come from an in-memory scene renderer."""

    def __init__(self, name, root, config, camera, source):
        super().__init__(name=name, root=Path(root), config=config,
                         camera=camera)
        self._source = source

    def open_sources(self):
        return [self._source]


def scene_project(spec: SceneSpec, root, name="Golden",
                  config_overrides=None, camera=None,
                  on_disk=False) -> Project:
    from arenatrack.project_io.frames import GeneratorSource

    config = ProjectConfig()
    config.values.update(GOLDEN_CONFIG)
    if config_overrides:
        config.values.update(config_overrides)
    config.values["out.pnam"] = name
    camera = camera or CameraModel.manual_scale(1.0, 1.0)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    renderer = SceneRenderer(spec)
    if on_disk:
        write_y8(root / "scene.y8",
                 [renderer.frame(i) for i in range(spec.frames)], spec.fps)
        (root / f"{name}_Configuration.txt").write_text(
            write_configuration(config))
        (root / f"{name}_Input.txt").write_text("1\nscene.y8\nref 0 0\n")
        (root / f"{name}.tox").write_text(f"name {name}\nroot .\n")
        from arenatrack.project_io.project import load_project
        return load_project(root / f"{name}.tox")
    source = GeneratorSource(renderer.frame, spec.frames, spec.width,
                             spec.height, spec.fps)
    return MemorySourceProject(name, root, config, camera, source)
