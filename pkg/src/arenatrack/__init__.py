"""arenatrack: multi-arena organism tracking and behavioral analytics.

Pipeline stages: frame ingestion -> undistortion -> arena definition ->
background subtraction -> detection -> Kalman multi-tracking -> fragment
identity -> analytics -> rendered outputs. Each stage lives in its own
module and is usable on its own; ``pipeline.run_project`` wires them
together for batch runs, ``cli`` and ``service`` expose them to the
command line and the tuning UI.
"""

__version__ = "0.1.0"
