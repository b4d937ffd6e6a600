"""Per-frame, per-arena segmentation of animal bodies.

Candidate pixels are those darker than the detection threshold, inside
the tracking area and flagged foreground by the background model. Two
morphology passes clean the candidate mask, connected components are
extracted, and geometric filters prune non-animals. Survivors are
ordered by descending pixel count so downstream tie-breaks are
deterministic.

Centroids are reported in full-frame undistorted pixel coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import imaging
from .arena import Arena

MORPH_OPENING = 0
MORPH_CLOSING = 1


@dataclass(frozen=True)
class DetectionParams:
    thre: int = 90                # 0 selects Otsu on the arena crop
    opcl: int = MORPH_OPENING
    elms: int = 3
    dilt: int = 2
    erot: int = 2
    erdi: int = 0                 # second pass: 0 dilation, 1 erosion
    elss: int = 0                 # 0 disables the second pass
    ertt: int = 0
    filt: bool = True
    mins: int = 150
    maxs: int = 1500
    minr: float = 0.0             # enclosing-circle radius limits, 0 = off
    maxr: float = 0.0
    mish: float = 0.0             # ellipse axis-ratio limits, 0 = off
    mash: float = 0.0
    minf: float = 0.0             # minimum fill rate, 0 = off

    def __post_init__(self):
        if self.filt and self.maxs and self.mins > self.maxs:
            raise ValueError("det.mins must not exceed det.maxs")
        if self.minr and self.maxr and self.minr > self.maxr:
            raise ValueError("det.minr must not exceed det.maxr")
        if self.mish and self.mash and self.mish > self.mash:
            raise ValueError("det.mish must not exceed det.mash")


@dataclass
class DetectionRecord:
    """One detected body: where, how big, when."""

    centroid: tuple[float, float]   # full-frame pixels, sub-pixel
    size: int
    frame: int
    blob: imaging.Blob = field(repr=False)
    features: object = None         # BodyFeatures, filled when identity is on


def passes_filters(blob: imaging.Blob, params: DetectionParams) -> bool:
    """Pure predicates, order-independent by construction."""
    if not params.filt:
        return True
    if blob.area_px < params.mins or blob.area_px > params.maxs:
        return False
    if params.minr or params.maxr:
        radius = blob.enclosing_circle.radius
        if params.minr and radius < params.minr:
            return False
        if params.maxr and radius > params.maxr:
            return False
    if params.mish or params.mash:
        ratio = blob.fitted_ellipse.axis_ratio
        if params.mish and ratio < params.mish:
            return False
        if params.mash and ratio > params.mash:
            return False
    if params.minf and blob.fill_rate < params.minf:
        return False
    return True


def candidate_mask(crop: np.ndarray, area_mask: np.ndarray,
                   fg_mask: np.ndarray | None,
                   params: DetectionParams) -> np.ndarray:
    """Thresholded dark pixels restricted to the valid/foreground area,
    after both morphology passes."""
    dark = imaging.threshold_below(crop, params.thre)
    mask = dark & area_mask
    if fg_mask is not None:
        mask &= fg_mask
    kind = "closing" if params.opcl == MORPH_CLOSING else "opening"
    mask = imaging.morphology(mask, kind, params.elms, params.dilt, params.erot)
    if params.elss and params.ertt:
        second = "erosion" if params.erdi == 1 else "dilation"
        mask = imaging.morphology(mask, second, params.elss,
                                  params.ertt, params.ertt)
    return mask


def detect(frame: np.ndarray, frame_index: int, arena: Arena,
           fg_mask: np.ndarray | None,
           params: DetectionParams) -> list[DetectionRecord]:
    """Detect bodies inside one arena of an undistorted frame.

    ``fg_mask`` is the background model's foreground for the arena crop
    (None when background subtraction is disabled). An empty list is a
    valid outcome.
    """
    crop = arena.crop(frame)
    mask = candidate_mask(crop, arena.area.mask, fg_mask, params)
    blobs = imaging.connected_components(mask)
    survivors = [b for b in blobs if passes_filters(b, params)]
    survivors.sort(key=lambda b: -b.area_px)
    records = []
    for blob in survivors:
        cx = blob.centroid[0] + arena.rect.x0
        cy = blob.centroid[1] + arena.rect.y0
        records.append(DetectionRecord(
            centroid=(cx, cy), size=blob.area_px,
            frame=frame_index, blob=blob))
    return records
