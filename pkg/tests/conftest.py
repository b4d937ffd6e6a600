import numpy as np
import pytest

from arenatrack.detection import DetectionRecord
from arenatrack.identity import BodyFeatures


def make_detection(x, y, frame, size=200, features=None):
    return DetectionRecord(centroid=(float(x), float(y)), size=size,
                           frame=frame, blob=None, features=features)


def make_features(hist, size=200, frame=0, icm=None, ccm=None, bins=None):
    hist = np.asarray(hist, dtype=np.int64)
    bins = bins or len(hist)
    if icm is None:
        icm = np.outer(np.arange(1, 26), hist[:bins] + 1).astype(np.uint16)
    if ccm is None:
        ccm = np.outer(np.arange(25, 0, -1), hist[:bins] + 1).astype(np.uint16)
    return BodyFeatures(hist=hist, icm=icm, ccm=ccm, size=size, frame=frame)


@pytest.fixture
def detection_factory():
    return make_detection


@pytest.fixture
def features_factory():
    return make_features
