"""Body-feature extraction and post-hoc fragment identification.

Features per detected body: an intensity histogram plus two texture
center maps binned over (rounded distance to the body centroid) x
(a pixel-pair intensity statistic): the intensity map uses f_p + f_c,
the contrast map |f_p - f_c|, where f_c is the intensity at the pixel
nearest the centroid. Pixels beyond the map radius still count in the
histogram.

Fragment identification assigns trajectory fragments to individuals:

1. seed: at the earliest instant where ``ntra`` long tracks coexist,
   those tracks become individuals 1..ntra; without such an instant the
   run reports "seeding failed" and leaves everything unidentified;
2. group phase (only when the group-restriction setting allows more
   than the first group): further full coexistence groups of long
   tracks are Hungarian-assigned to individuals, rejecting similarities
   below the group bound;
3. iterative phase: repeatedly accept the best remaining
   (track, individual) similarity -- long tracks first, then short --
   subject to per-class mean/best bounds, temporal exclusivity and a
   displacement-feasibility prune; accepted evidence merges into the
   individual and similarities against it are refreshed when high-order
   correlation is enabled.

Similarity between two feature stores samples at most ``max_comparisons``
pairs (uniform stride), keeps pairs that are close in size and histogram
correlation, scores each pair by the mean normalized cross-correlation
of the two texture maps weighted by a Gaussian in the histogram
correlation deficit, and aggregates by mean (or max).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

TCM_DTYPES = {0: np.uint8, 1: np.uint16, 2: np.uint32}


@dataclass(frozen=True)
class IdentityParams:
    algorithm: int = 0            # kal.idal: 0 off, 2 full (1 is a no-op beta)
    hist_bins: int = 20           # kal.hiss
    tcm_radius: int = 25          # kal.tcmr
    tcm_dtype: int = 0            # kal.tcnd
    feature_capacity: int = 500   # kal.hist
    min_size_similarity: float = 0.2   # kal.cmsc
    min_hist_correlation: float = 0.7  # kal.cmhc
    max_comparisons: int = 500    # kal.mcmp
    use_mean: bool = True         # kal.mAvg
    gaussian_std: float = 0.05    # kal.gStd
    high_order: bool = True       # kal.hOrd
    group_mode: int = 2           # kal.rGrp: 0/1 all, 2 first group only
    frame_distance: float = 0.0   # kal.fdis, 0 = automatic
    displacement_per_frame: float = 50.0  # kal.disf (for the automatic bound)
    long_track_length: int = 50   # kal.mins
    group_bound: float = 0.0      # kal.idgb
    long_mean_bound: float = 0.0  # kal.idla
    long_best_bound: float = 0.0  # kal.idlb
    short_mean_bound: float = 0.0  # kal.idsa
    short_best_bound: float = 0.0  # kal.idsb
    flush_track_count: int = 500  # kal.idff

    @property
    def enabled(self) -> bool:
        return self.algorithm >= 2


@dataclass
class BodyFeatures:
    hist: np.ndarray
    icm: np.ndarray
    ccm: np.ndarray
    size: int
    frame: int


def _bin_indices(values: np.ndarray, vmax: int, bins: int) -> np.ndarray:
    idx = (values.astype(np.int64) * bins) // (vmax + 0)
    return np.minimum(idx, bins - 1)


def extract_features(blob, crop: np.ndarray, frame_index: int,
                     params: IdentityParams) -> BodyFeatures:
    """Histogram + texture center maps for one blob of an arena crop."""
    xs, ys = blob.xs, blob.ys
    values = crop[ys, xs].astype(np.int64)
    bins = params.hist_bins
    hist = np.bincount(_bin_indices(values, 255, bins), minlength=bins)

    cx, cy = blob.centroid
    fcx = min(max(int(round(cx)), 0), crop.shape[1] - 1)
    fcy = min(max(int(round(cy)), 0), crop.shape[0] - 1)
    f_c = int(crop[fcy, fcx])

    dist = np.rint(np.hypot(xs - cx, ys - cy)).astype(np.int64)
    radius = params.tcm_radius
    inside = dist < radius
    dtype = TCM_DTYPES[params.tcm_dtype]
    icm = np.zeros((radius, bins), dtype=np.int64)
    ccm = np.zeros((radius, bins), dtype=np.int64)
    if inside.any():
        d_in = dist[inside]
        v_in = values[inside]
        icol = _bin_indices(v_in + f_c, 510, bins)
        ccol = _bin_indices(np.abs(v_in - f_c), 255, bins)
        np.add.at(icm, (d_in, icol), 1)
        np.add.at(ccm, (d_in, ccol), 1)
    limit = np.iinfo(dtype).max
    icm = np.minimum(icm, limit).astype(dtype)
    ccm = np.minimum(ccm, limit).astype(dtype)
    return BodyFeatures(hist=hist, icm=icm, ccm=ccm,
                        size=int(len(xs)), frame=frame_index)


def thin_feature_store(store: list) -> list:
    """Halve an over-capacity store keeping every 2nd sample, which
    preserves the temporal spread."""
    return store[::2]


def histogram_correlation(h1: np.ndarray, h2: np.ndarray) -> float:
    """Pearson correlation of two histograms; identical zero-variance
    inputs correlate 1, differing ones 0."""
    a = np.asarray(h1, dtype=np.float64)
    b = np.asarray(h2, dtype=np.float64)
    da = a - a.mean()
    db = b - b.mean()
    denom = float(np.linalg.norm(da) * np.linalg.norm(db))
    if denom == 0.0:
        return 1.0 if np.array_equal(a, b) else 0.0
    return float((da @ db) / denom)


def _ncc(a: np.ndarray, b: np.ndarray) -> float:
    return histogram_correlation(a.ravel(), b.ravel())


def _pair_score(fa: BodyFeatures, fb: BodyFeatures,
                params: IdentityParams) -> float | None:
    """Score one sample pair, or None when the pair is ineligible."""
    size_change = max((fa.size - fb.size) / fb.size,
                      (fb.size - fa.size) / fa.size)
    if size_change > params.min_size_similarity:
        return None
    hcorr = histogram_correlation(fa.hist, fb.hist)
    if hcorr < params.min_hist_correlation:
        return None
    score = 0.5 * (max(_ncc(fa.icm, fb.icm), 0.0)
                   + max(_ncc(fa.ccm, fb.ccm), 0.0))
    if params.gaussian_std > 0:
        deficit = max(1.0 - hcorr, 0.0)
        score *= math.exp(-0.5 * (deficit / params.gaussian_std) ** 2)
    return min(max(score, 0.0), 1.0)


@dataclass(frozen=True)
class StoreSimilarity:
    value: float      # the aggregate used for ranking (mean or max)
    mean: float
    best: float
    pairs: int

    @classmethod
    def zero(cls) -> "StoreSimilarity":
        return cls(0.0, 0.0, 0.0, 0)


def store_similarity(a: list, b: list,
                     params: IdentityParams) -> StoreSimilarity:
    if not a or not b:
        return StoreSimilarity.zero()
    n_pairs = len(a) * len(b)
    stride = max(1, math.ceil(n_pairs / params.max_comparisons))
    scores = []
    for flat in range(0, n_pairs, stride):
        fa = a[flat // len(b)]
        fb = b[flat % len(b)]
        s = _pair_score(fa, fb, params)
        if s is not None:
            scores.append(s)
    if not scores:
        return StoreSimilarity.zero()
    mean = float(np.mean(scores))
    best = float(max(scores))
    value = mean if params.use_mean else best
    return StoreSimilarity(value, mean, best, len(scores))


def pair_similarity(a: list, b: list, params: IdentityParams) -> float:
    """Aggregate similarity of two track feature stores, in [0, 1]."""
    return store_similarity(a, b, params).value


def build_similarity_matrix(tracks: list,
                            params: IdentityParams) -> np.ndarray:
    """Symmetric track-by-track similarity with unit diagonal;
    temporally overlapping pairs are incompatible and score 0."""
    n = len(tracks)
    sim = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            if tracks[i].overlaps(tracks[j]):
                value = 0.0
            else:
                value = store_similarity(tracks[i].features,
                                         tracks[j].features, params).value
            sim[i, j] = sim[j, i] = value
    return sim


# --------------------------------------------------------- identification

@dataclass
class IndividualEvidence:
    id: int
    store: list = field(default_factory=list)
    member_ids: list = field(default_factory=list)
    intervals: list = field(default_factory=list)  # (start, end) frames
    endpoints: list = field(default_factory=list)  # (frame, x, y) both ends

    def add(self, track, capacity: int) -> None:
        self.member_ids.append(track.id)
        self.intervals.append((track.start_frame, track.end_frame))
        first = track.detections[0]
        last = track.detections[-1]
        self.endpoints.append((first.frame, *first.centroid))
        self.endpoints.append((last.frame, *last.centroid))
        self.store = self.store + list(track.features)
        while len(self.store) > capacity:
            self.store = thin_feature_store(self.store)

    def overlaps(self, track) -> bool:
        s, e = track.start_frame, track.end_frame
        return any(not (e < ms or me < s) for ms, me in self.intervals)


@dataclass
class FragmentAssignment:
    assignments: dict[int, int | None]
    seeded: bool
    reason: str | None = None

    def individual_of(self, track_id: int):
        return self.assignments.get(track_id)


def _median_endpoint_gap(tracks: list) -> float:
    gaps = []
    for i, a in enumerate(tracks):
        for b in tracks[i + 1:]:
            if a.end_frame < b.start_frame:
                gaps.append(b.start_frame - a.end_frame)
            elif b.end_frame < a.start_frame:
                gaps.append(a.start_frame - b.end_frame)
    return float(np.median(gaps)) if gaps else 1.0


class FragmentIdentifier:
    """Carries individual evidence across memory flushes."""

    def __init__(self, params: IdentityParams, ntra: int):
        self.params = params
        self.ntra = ntra
        self.individuals: list[IndividualEvidence] | None = None
        self.assignments: dict[int, int | None] = {}
        self.seed_failed_reason: str | None = None

    # ------------------------------------------------------------ seeds

    def _try_seed(self, tracks: list) -> bool:
        long_tracks = [t for t in tracks
                       if t.length >= self.params.long_track_length]
        if self.ntra == 1:
            if not long_tracks:
                return False
            seed = min(long_tracks, key=lambda t: (t.start_frame, t.id))
            self.individuals = [IndividualEvidence(1)]
            self.individuals[0].add(seed, self.params.feature_capacity)
            self.assignments[seed.id] = 1
            return True
        events = sorted(long_tracks, key=lambda t: t.start_frame)
        for t in events:
            instant = t.start_frame
            alive = [u for u in long_tracks
                     if u.start_frame <= instant <= u.end_frame]
            if len(alive) >= self.ntra:
                alive.sort(key=lambda u: (-u.length, u.id))
                seeds = sorted(alive[:self.ntra], key=lambda u: u.id)
                self.individuals = []
                for k, seed in enumerate(seeds, start=1):
                    ind = IndividualEvidence(k)
                    ind.add(seed, self.params.feature_capacity)
                    self.individuals.append(ind)
                    self.assignments[seed.id] = k
                return True
        return False

    # ----------------------------------------------------- compatibility

    def _compatible(self, track, ind: IndividualEvidence,
                    auto_bound: float) -> bool:
        """Temporal exclusivity plus a displacement-feasibility prune:
        the spatial jump to the individual's temporally nearest endpoint
        must fit within the per-frame displacement allowance."""
        if ind.overlaps(track):
            return False
        first = track.detections[0]
        last = track.detections[-1]
        best_gap = None
        for (ef, ex, ey) in ind.endpoints:
            for (tf, tx, ty) in ((first.frame, *first.centroid),
                                 (last.frame, *last.centroid)):
                frame_gap = abs(tf - ef)
                if frame_gap == 0:
                    continue
                dist = math.hypot(tx - ex, ty - ey)
                if best_gap is None or frame_gap < best_gap[0]:
                    best_gap = (frame_gap, dist)
        if best_gap is None:
            return True
        frame_gap, dist = best_gap
        if self.params.frame_distance > 0:
            return dist <= self.params.frame_distance * frame_gap
        return dist <= auto_bound * max(1, frame_gap)

    # ------------------------------------------------------------ phases

    def _group_phase(self, pending: list, auto_bound: float) -> None:
        long_pending = [t for t in pending
                        if t.length >= self.params.long_track_length
                        and self.assignments.get(t.id) is None]
        long_pending.sort(key=lambda t: t.start_frame)
        used: set[int] = set()
        for t in long_pending:
            if t.id in used:
                continue
            instant = t.start_frame
            group = [u for u in long_pending if u.id not in used
                     and u.start_frame <= instant <= u.end_frame]
            if len(group) != self.ntra:
                continue
            cost = np.zeros((self.ntra, self.ntra))
            sims = {}
            for i, tr in enumerate(group):
                for j, ind in enumerate(self.individuals):
                    s = store_similarity(tr.features, ind.store, self.params)
                    ok = self._compatible(tr, ind, auto_bound)
                    sims[i, j] = (s, ok)
                    cost[i, j] = -s.value if ok else 1.0
            rows, cols = linear_sum_assignment(cost)
            for i, j in zip(rows, cols):
                s, ok = sims[i, j]
                if not ok or s.value < self.params.group_bound:
                    continue
                self._accept(group[i], self.individuals[j])
                used.add(group[i].id)

    def _accept(self, track, ind: IndividualEvidence) -> None:
        self.assignments[track.id] = ind.id
        ind.add(track, self.params.feature_capacity)

    def _iterative_phase(self, pending: list, long_pass: bool,
                         auto_bound: float) -> None:
        p = self.params
        mean_bound = p.long_mean_bound if long_pass else p.short_mean_bound
        best_bound = p.long_best_bound if long_pass else p.short_best_bound
        remaining = [
            t for t in pending
            if self.assignments.get(t.id) is None
            and (t.length >= p.long_track_length) == long_pass]
        cache: dict[tuple[int, int], StoreSimilarity] = {}
        while remaining:
            candidates = []
            for t in remaining:
                for ind in self.individuals:
                    if not self._compatible(t, ind, auto_bound):
                        continue
                    key = (t.id, ind.id)
                    if key not in cache:
                        cache[key] = store_similarity(t.features, ind.store, p)
                    s = cache[key]
                    if s.mean < mean_bound or s.best < best_bound:
                        continue
                    candidates.append((s.value, t, ind))
            if not candidates:
                break
            candidates.sort(key=lambda c: (-c[0], c[1].id, c[2].id))
            _, track, ind = candidates[0]
            self._accept(track, ind)
            remaining = [t for t in remaining if t.id != track.id]
            if p.high_order:
                for key in [k for k in cache if k[1] == ind.id]:
                    del cache[key]

    # -------------------------------------------------------------- runs

    def identify(self, tracks: list) -> None:
        """Assign every not-yet-assigned track an individual (or None)."""
        pending = [t for t in tracks if t.id not in self.assignments]
        for t in pending:
            self.assignments[t.id] = None
        if self.individuals is None:
            if not self._try_seed(pending):
                self.seed_failed_reason = (
                    f"seeding failed: no instant with {self.ntra} "
                    f"coexisting long tracks")
                return
            self.seed_failed_reason = None
        auto_bound = self.params.displacement_per_frame * \
            _median_endpoint_gap(tracks)
        pending = [t for t in pending if self.assignments.get(t.id) is None]
        if self.params.group_mode <= 1 and self.ntra > 1:
            self._group_phase(pending, auto_bound)
        self._iterative_phase(pending, long_pass=True, auto_bound=auto_bound)
        self._iterative_phase(pending, long_pass=False, auto_bound=auto_bound)

    def flush(self, tracks: list) -> None:
        """Mid-run identification to release feature memory."""
        self.identify(tracks)
        for t in tracks:
            t.features = []

    def result(self) -> FragmentAssignment:
        return FragmentAssignment(dict(self.assignments),
                                  seeded=self.individuals is not None,
                                  reason=self.seed_failed_reason)


def identify_fragments(tracks: list, ntra: int,
                       params: IdentityParams) -> FragmentAssignment:
    """One-shot identification over a finished track set."""
    ident = FragmentIdentifier(params, ntra)
    ident.identify(list(tracks))
    return ident.result()
