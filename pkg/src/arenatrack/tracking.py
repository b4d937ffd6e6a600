"""Per-arena multi-target Kalman tracker.

Per frame: predict every active track, assign detections with the
Hungarian algorithm on predicted-position distance, gate each proposed
pair on position jump and size change, correct accepted tracks, detect
collisions (two tracks contending for one nearest detection), advance
track lifecycle, attempt fusing young tracks back onto recently
conflicted ones, and spawn new tracks from leftover detections.

State per track is (x, y, vx, vy) with the constant-velocity transition

    A = [[1, 0, t, 0],
         [0, 1, 0, t],
         [0, 0, 1, 0],
         [0, 0, 0, 1]]

process noise a * [[t^4/4, 0, t^3/2, 0], ...] (discrete white
acceleration), measurement noise m * I2 and initial covariance c * I4.

Track lifecycle: active -> conflicted (collision) -> inactive, or
active -> inactive (unassigned too long); inactive tracks shorter than
the survival length are deleted outright. Track rows carry a label:
1 = confirmed detection, 0 = coasted prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detection import DetectionRecord
from .identity import histogram_correlation, thin_feature_store

LABEL_PREDICTED = 0
LABEL_CONFIRMED = 1

ACTIVE = "active"
CONFLICTED = "conflicted"
INACTIVE = "inactive"
DELETED = "deleted"


@dataclass(frozen=True)
class TrackerParams:
    time_step: float = 0.25        # kal.time
    process_noise: float = 0.1     # kal.pron
    measurement_noise: float = 1e-5  # kal.mean
    initial_covariance: float = 0.1  # kal.errc
    max_displacement: float = 50.0   # kal.disf, px per frame gap
    max_size_change: float = 0.4     # kal.sich
    max_unassigned: int = 1          # kal.dund
    min_survival_length: int = 8     # kal.dmax
    min_output_length: int = 10      # kal.dage
    animals_per_arena: int = 1       # kal.ntra
    collision_ratio: float = 0.8     # kal.advr
    collision_margin: float = 10.0   # kal.advm
    conflicted_retention: int = 20   # kal.cnft
    fuse_min_age: int = 5            # kal.tfmi
    fuse_max_age: int = 10           # kal.tfma
    fuse_max_gap: int = 10           # kal.tdma
    fuse_mean_corr: float = 0.6      # kal.acor
    fuse_best_corr: float = 0.5      # kal.bcor
    long_track_length: int = 50      # kal.mins
    feature_capacity: int = 500      # kal.hist
    flush_track_count: int = 500     # kal.idff

    def __post_init__(self):
        if self.max_size_change <= 0:
            raise ValueError("size-change bound must be positive")


class KalmanMatrices:
    """A, H, Q, R shared by every track of one tracker run."""

    def __init__(self, params: TrackerParams):
        t = params.time_step
        self.A = np.array([[1.0, 0.0, t, 0.0],
                           [0.0, 1.0, 0.0, t],
                           [0.0, 0.0, 1.0, 0.0],
                           [0.0, 0.0, 0.0, 1.0]])
        self.H = np.array([[1.0, 0.0, 0.0, 0.0],
                           [0.0, 1.0, 0.0, 0.0]])
        self.Q = params.process_noise * np.array([
            [t ** 4 / 4, 0.0, t ** 3 / 2, 0.0],
            [0.0, t ** 4 / 4, 0.0, t ** 3 / 2],
            [t ** 3 / 2, 0.0, t ** 2, 0.0],
            [0.0, t ** 3 / 2, 0.0, t ** 2]])
        self.R = params.measurement_noise * np.eye(2)
        self.P0 = params.initial_covariance * np.eye(4)


class KalmanState:
    def __init__(self, matrices: KalmanMatrices, cx: float, cy: float):
        self.m = matrices
        self.x = np.array([cx, cy, 0.0, 0.0])
        self.P = matrices.P0.copy()

    def predict(self) -> tuple[float, float]:
        m = self.m
        self.x = m.A @ self.x
        self.P = m.A @ self.P @ m.A.T + m.Q
        return float(self.x[0]), float(self.x[1])

    def correct(self, zx: float, zy: float) -> float:
        """Returns the innovation norm for diagnostics."""
        m = self.m
        z = np.array([zx, zy])
        innovation = z - m.H @ self.x
        s = m.H @ self.P @ m.H.T + m.R
        try:
            gain = self.P @ m.H.T @ np.linalg.inv(s)
        except np.linalg.LinAlgError as exc:
            raise ArithmeticError(
                f"singular innovation covariance {s.tolist()}") from exc
        self.x = self.x + gain @ innovation
        self.P = (np.eye(4) - gain @ m.H) @ self.P
        self.P = (self.P + self.P.T) / 2.0
        return float(np.linalg.norm(innovation))

    @property
    def position(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[1])


@dataclass
class TrackRow:
    frame: int
    x: float
    y: float
    label: int


@dataclass
class Track:
    id: int
    kalman: KalmanState
    detections: list[DetectionRecord] = field(default_factory=list)
    rows: list[TrackRow] = field(default_factory=list)
    status: str = ACTIVE
    unassigned_streak: int = 0
    features: list = field(default_factory=list)
    conflicted_at: int | None = None
    individual: int | None = None   # filled by fragment identification

    @property
    def length(self) -> int:
        return len(self.detections)

    @property
    def start_frame(self) -> int:
        return self.detections[0].frame

    @property
    def end_frame(self) -> int:
        return self.detections[-1].frame

    def is_short(self, params: TrackerParams) -> bool:
        return self.length < params.long_track_length

    def overlaps(self, other: "Track") -> bool:
        return not (self.end_frame < other.start_frame
                    or other.end_frame < self.start_frame)

    def add_detection(self, det: DetectionRecord, capacity: int) -> None:
        self.detections.append(det)
        if det.features is not None:
            self.features.append(det.features)
            if len(self.features) > capacity:
                self.features = thin_feature_store(self.features)
        self.unassigned_streak = 0


def hungarian_assign(cost: np.ndarray) -> dict[int, int]:
    """Minimum-cost row->column assignment; rows/columns used at most
    once. Rectangular matrices are fine."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0:
        return {}
    if not np.isfinite(cost).all() or (cost < 0).any():
        raise ValueError("costs must be finite and nonnegative")
    rows, cols = linear_sum_assignment(cost)
    return dict(zip(rows.tolist(), cols.tolist()))


def acceptance_check(track: Track, det: DetectionRecord,
                     params: TrackerParams,
                     predicted: tuple[float, float]) -> bool:
    """Gate a proposed assignment on displacement and size change.

    The displacement bound scales with the frame gap since the track's
    last detection; the size-change ratio compares against the last
    stored detection symmetrically.
    """
    c1 = float(np.hypot(predicted[0] - det.centroid[0],
                        predicted[1] - det.centroid[1]))
    last = track.detections[-1]
    c2 = max((det.size - last.size) / last.size,
             (last.size - det.size) / det.size)
    gap = max(1, det.frame - last.frame)
    return c2 < params.max_size_change and \
        c1 < params.max_displacement * gap


def collision_check(predictions: dict[int, tuple[float, float]],
                    detections: list[DetectionRecord],
                    params: TrackerParams) -> set[int]:
    """Track ids contending for the same detection.

    Two tracks conflict when their nearest detection coincides and
    neither has a clear distance advantage (margin below
    max(disf * advr, advm) pixels), or when one detection sits inside
    the claim radius (disf) of both tracks -- the merged-blob case.
    """
    if len(predictions) < 2 or not detections:
        return set()
    pts = np.array([d.centroid for d in detections])
    nearest: dict[int, tuple[int, float]] = {}
    dists: dict[int, np.ndarray] = {}
    for tid, (px, py) in predictions.items():
        d = np.hypot(pts[:, 0] - px, pts[:, 1] - py)
        dists[tid] = d
        j = int(np.argmin(d))
        nearest[tid] = (j, float(d[j]))
    threshold = max(params.max_displacement * params.collision_ratio,
                    params.collision_margin)
    conflicted: set[int] = set()
    ids = sorted(nearest)
    for i, ti in enumerate(ids):
        for tk in ids[i + 1:]:
            ji, di = nearest[ti]
            jk, dk = nearest[tk]
            if ji == jk and abs(di - dk) < threshold:
                conflicted.add(ti)
                conflicted.add(tk)
    for j in range(len(detections)):
        claimants = [tid for tid in ids
                     if dists[tid][j] < params.max_displacement]
        if len(claimants) >= 2:
            conflicted.update(claimants)
    return conflicted


def _store_correlations(a: list, b: list) -> tuple[float, float]:
    """Mean and best histogram correlation across two feature stores."""
    if not a or not b:
        return 0.0, 0.0
    corrs = [histogram_correlation(fa.hist, fb.hist) for fa in a for fb in b]
    return float(np.mean(corrs)), float(max(corrs))


def try_fuse(active: Track, candidate: Track, params: TrackerParams) -> bool:
    """Fuse a young active track onto a recently conflicted one.

    On success the candidate resumes as the live track (keeping its id)
    with the active track's detections and filter state appended.
    """
    age = active.length
    if not (params.fuse_min_age <= age <= params.fuse_max_age):
        return False
    gap = active.start_frame - candidate.end_frame
    if gap < 0 or gap > params.fuse_max_gap:
        return False
    mean_corr, best_corr = _store_correlations(candidate.features,
                                               active.features)
    if mean_corr < params.fuse_mean_corr or best_corr < params.fuse_best_corr:
        return False
    candidate.detections.extend(active.detections)
    candidate.rows.extend(active.rows)
    candidate.features.extend(active.features)
    while len(candidate.features) > params.feature_capacity:
        candidate.features = thin_feature_store(candidate.features)
    candidate.kalman = active.kalman
    candidate.status = ACTIVE
    candidate.conflicted_at = None
    candidate.unassigned_streak = active.unassigned_streak
    return True


class MultiTracker:
    """Tracker for one arena. Feed detections frame by frame via
    :meth:`step`; finished tracks accumulate in ``closed``."""

    def __init__(self, params: TrackerParams, arena_id: int = 0):
        self.params = params
        self.arena_id = arena_id
        self.matrices = KalmanMatrices(params)
        self.active: list[Track] = []
        self.conflicted: list[Track] = []
        self.closed: list[Track] = []
        self.deleted_count = 0
        self.over_capacity_frames = 0  # frames with more tracks than animals
        self._next_id = 1

    # ------------------------------------------------------------- step

    def step(self, frame_index: int,
             detections: list[DetectionRecord]) -> None:
        params = self.params
        predictions: dict[int, tuple[float, float]] = {
            t.id: t.kalman.predict() for t in self.active}
        by_id = {t.id: t for t in self.active}

        assigned_tracks: dict[int, int] = {}
        if self.active and detections:
            cost = np.zeros((len(self.active), len(detections)))
            for i, t in enumerate(self.active):
                px, py = predictions[t.id]
                for j, d in enumerate(detections):
                    cost[i, j] = np.hypot(px - d.centroid[0],
                                          py - d.centroid[1])
            matches = hungarian_assign(cost)
            for i, j in matches.items():
                track = self.active[i]
                det = detections[j]
                if acceptance_check(track, det, params, predictions[track.id]):
                    assigned_tracks[track.id] = j

        used_detections = set(assigned_tracks.values())

        # Corrections for accepted pairs.
        for tid, j in assigned_tracks.items():
            track = by_id[tid]
            det = detections[j]
            track.kalman.correct(*det.centroid)
            track.add_detection(det, params.feature_capacity)
            track.rows.append(TrackRow(frame_index, det.centroid[0],
                                       det.centroid[1], LABEL_CONFIRMED))

        # Collision: contested nearest detections close down both tracks.
        for tid in collision_check(predictions, detections, params):
            track = by_id[tid]
            track.status = CONFLICTED
            track.conflicted_at = frame_index
            self.active.remove(track)
            self.conflicted.append(track)

        # Lifecycle for unassigned survivors.
        still_active: list[Track] = []
        for track in self.active:
            if track.id in assigned_tracks:
                still_active.append(track)
                continue
            track.unassigned_streak += 1
            if track.unassigned_streak > params.max_unassigned:
                track.status = INACTIVE
                self._close(track)
            else:
                px, py = predictions[track.id]
                track.rows.append(TrackRow(frame_index, px, py,
                                           LABEL_PREDICTED))
                still_active.append(track)
        self.active = still_active

        # Conflicted tracks expire into inactive after the retention
        # window; until then they are fusion candidates.
        keep: list[Track] = []
        for track in self.conflicted:
            if frame_index - track.conflicted_at > params.conflicted_retention:
                track.status = INACTIVE
                self._close(track)
            else:
                keep.append(track)
        self.conflicted = keep

        # Fusion of young re-spawned tracks onto conflicted ancestors.
        for track in list(self.active):
            candidates = [c for c in self.conflicted
                          if 0 <= track.start_frame - c.end_frame
                          <= params.fuse_max_gap]
            best = None
            for cand in sorted(candidates, key=lambda c: c.id):
                mean_corr, _ = _store_correlations(cand.features,
                                                   track.features)
                if best is None or mean_corr > best[0]:
                    best = (mean_corr, cand)
            if best is not None and try_fuse(track, best[1], params):
                self.active.remove(track)
                self.conflicted.remove(best[1])
                self.active.append(best[1])

        # Leftover detections spawn new tracks -- except detections still
        # inside a live track's claim radius: those are contested, and
        # spawning a double would shadow the surviving track.
        for j, det in enumerate(detections):
            if j in used_detections:
                continue
            contested = False
            for track in self.active:
                px, py = track.kalman.position
                if np.hypot(px - det.centroid[0],
                            py - det.centroid[1]) < params.max_displacement:
                    contested = True
                    break
            if contested:
                continue
            state = KalmanState(self.matrices, *det.centroid)
            track = Track(self._next_id, state)
            self._next_id += 1
            track.add_detection(det, params.feature_capacity)
            track.rows.append(TrackRow(frame_index, det.centroid[0],
                                       det.centroid[1], LABEL_CONFIRMED))
            self.active.append(track)

        if len(self.active) > params.animals_per_arena:
            self.over_capacity_frames += 1

    def _close(self, track: Track) -> None:
        if track.length < self.params.min_survival_length:
            track.status = DELETED
            self.deleted_count += 1
        else:
            self.closed.append(track)

    # -------------------------------------------------------- lifecycle

    def finish(self) -> None:
        """Close every live track at end of input."""
        for track in self.active + self.conflicted:
            track.status = INACTIVE
            self._close(track)
        self.active = []
        self.conflicted = []

    def emitted_tracks(self) -> list[Track]:
        """Closed tracks long enough to reach identity and analytics."""
        return [t for t in self.closed
                if t.length >= self.params.min_output_length]

    @property
    def live_track_count(self) -> int:
        return len(self.active) + len(self.conflicted) + len(self.closed)

    def needs_flush(self) -> bool:
        return self.live_track_count >= self.params.flush_track_count
