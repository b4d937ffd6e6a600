"""Project files, configuration grammar, frame ingestion, output writers."""

from .config import (ConfigError, PARAM_SPECS, ProjectConfig, SECTIONS,
                     parse_colorini, parse_configuration,
                     render_style_from_graphics, write_configuration)
from .frames import (ArraySource, Frame, FrameSource, FrameSourceError,
                     GeneratorSource, PgmDirectorySource, RawY8Source,
                     open_source, read_pgm, window_frames, write_pgm,
                     write_y8)
from .outputs import (ArenaResult, PopulationResult, RunResults,
                      SequenceResult, write_outputs)
from .project import Project, ProjectError, load_project, save_project

__all__ = [
    "ArenaResult", "ArraySource", "ConfigError", "Frame", "FrameSource",
    "FrameSourceError", "GeneratorSource", "PARAM_SPECS",
    "PgmDirectorySource", "PopulationResult", "Project", "ProjectConfig",
    "ProjectError", "RawY8Source", "RunResults", "SECTIONS",
    "SequenceResult", "load_project", "open_source", "parse_colorini",
    "parse_configuration", "read_pgm", "render_style_from_graphics",
    "save_project", "window_frames", "write_configuration", "write_outputs",
    "write_pgm", "write_y8",
]
