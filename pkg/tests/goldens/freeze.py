"""Freeze the golden output tree for the format acceptance test.

Runs the fixed-seed golden scene, stores the sha256 of every output file
in hashes.json and keeps byte-exact copies of the representative text
files under files/. Run from the repository root:

    python3 tests/goldens/freeze.py
"""

import hashlib
import json
import shutil
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from arenatrack.pipeline import RunOptions, run_project  # noqa: E402
from scenes import golden_scene, scene_project  # noqa: E402

SAMPLES = [
    "Seq1/Tracking_0.txt",
    "Seq1/Tracking_1.txt",
    "Seq1/Tracking_RealSpace_1.txt",
    "Seq1/Instant_Speed_1.txt",
    "Seq1/Instant_Accel_1.txt",
    "Seq1/Dist_Edges_1.txt",
    "Seq1/Exploration_1.txt",
    "Seq1/Dist_MeanPos_1.txt",
    "Seq1/Dist_CenterPos_1.txt",
    "Seq1/Transitions_1.txt",
    "Seq1/FrozenEvents_1.txt",
    "Seq1/Stats_1.txt",
    "Tracking.txt",
    "Tracking_RealSpace.txt",
    "Stats.txt",
]


def main() -> None:
    golden_dir = Path(__file__).resolve().parent
    with tempfile.TemporaryDirectory() as tmp:
        project = scene_project(golden_scene(), Path(tmp), name="Golden")
        _, outdir, _ = run_project(project, RunOptions())
        hashes = {}
        for path in sorted(outdir.rglob("*")):
            if path.is_file():
                rel = str(path.relative_to(outdir))
                hashes[rel] = hashlib.sha256(path.read_bytes()).hexdigest()
        (golden_dir / "hashes.json").write_text(
            json.dumps(hashes, indent=1, sort_keys=True) + "\n")
        files_dir = golden_dir / "files"
        if files_dir.exists():
            shutil.rmtree(files_dir)
        for rel in SAMPLES:
            src = outdir / rel
            dst = files_dir / rel
            dst.parent.mkdir(parents=True, exist_ok=True)
            shutil.copy2(src, dst)
    print(f"froze {len(hashes)} hashes and {len(SAMPLES)} sample files")


if __name__ == "__main__":
    main()
