"""Adaptive Gaussian-mixture background subtraction (per-pixel, grayscale).

Each pixel carries up to M weighted Gaussians (weight, mean, variance),
kept sorted by descending weight. Per frame and pixel:

1. classify against the current model: the pixel is background when its
   best matching component (squared normalized distance < threshold,
   largest weight first) lies within the first B components, where B is
   the smallest prefix whose weights sum above the background ratio;
2. update: the matched component owns the sample (weights decay by
   (1 - alpha), the owner gains alpha; mean/variance blend with
   p = alpha * o / weight using the updated weight); if nothing matches,
   the lowest-weight component is replaced by a fresh one (weight alpha,
   mean = sample, variance 15^2) and weights are rescaled so their sum
   is unchanged. The very first component of an empty model starts with
   weight 1.

Learning-rate special values: negative -> 1/history, 0 -> frozen model,
1 -> the owner replaces its mean outright.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INITIAL_VARIANCE = 15.0 ** 2
VARIANCE_FLOOR = 1e-2


@dataclass(frozen=True)
class GmmParams:
    enabled: bool = False
    history: int = 500            # frames that shape the adaptation rate
    mahal_threshold: float = 25.0  # on squared normalized distance
    num_gaussians: int = 5
    background_ratio: float = 0.99
    learning_rate: float = 1e-6

    def __post_init__(self):
        if not (0.0 < self.background_ratio <= 1.0):
            raise ValueError("background ratio must be in (0, 1]")
        if self.num_gaussians < 1:
            raise ValueError("need at least one Gaussian")
        if self.history < 1:
            raise ValueError("history must be >= 1")

    @property
    def alpha(self) -> float:
        if self.learning_rate < 0:
            return 1.0 / self.history
        return float(min(self.learning_rate, 1.0))


def full_foreground(shape) -> np.ndarray:
    """Pass-through mask when background subtraction is disabled."""
    return np.ones(shape, dtype=bool)


class BackgroundModel:
    """One mixture model per pixel of a fixed-size image region."""

    def __init__(self, shape: tuple[int, int], params: GmmParams):
        self.params = params
        self.shape = shape
        n = shape[0] * shape[1]
        m = params.num_gaussians
        self.weights = np.zeros((m, n), dtype=np.float64)
        self.means = np.zeros((m, n), dtype=np.float64)
        self.variances = np.full((m, n), INITIAL_VARIANCE, dtype=np.float64)
        self.ncomp = np.zeros(n, dtype=np.int32)

    def update_and_classify(self, image: np.ndarray) -> np.ndarray:
        """Classify the frame against the current model, then absorb it.

        Returns the foreground mask (True = not background).
        """
        if image.shape != self.shape:
            raise ValueError(
                f"frame shape {image.shape} does not match model {self.shape}")
        p = self.params
        alpha = p.alpha
        x = image.reshape(-1).astype(np.float64)
        w, mu, var = self.weights, self.means, self.variances
        m, n = w.shape

        valid = np.arange(m)[:, None] < self.ncomp[None, :]
        d2 = np.where(valid, (x[None, :] - mu) ** 2 / var, np.inf)
        close = d2 < p.mahal_threshold
        has_match = close.any(axis=0)
        # Components are sorted by descending weight, so the first close
        # one is the close component with the largest weight.
        owner = np.where(has_match, close.argmax(axis=0), 0)

        # ---- classification against the pre-update model (Eq-style
        # prefix rule: background = matched within the first B weights).
        cumw = np.cumsum(w, axis=0)
        bg_depth = (cumw <= p.background_ratio).sum(axis=0)  # index of B-th
        is_bg = has_match & (owner <= bg_depth)
        foreground = ~is_bg

        if alpha > 0.0:
            cols = np.arange(n)
            matched_cols = cols[has_match]
            if matched_cols.size:
                w[:, matched_cols] *= (1.0 - alpha)
                own_idx = owner[matched_cols]
                w[own_idx, matched_cols] += alpha
                p_own = alpha / w[own_idx, matched_cols]
                np.clip(p_own, 0.0, 1.0, out=p_own)
                xm = x[matched_cols]
                mu_sel = mu[own_idx, matched_cols]
                mu_new = (1.0 - p_own) * mu_sel + p_own * xm
                mu[own_idx, matched_cols] = mu_new
                var_sel = var[own_idx, matched_cols]
                # Floor keeps alpha=1 ("always replace") from collapsing
                # the variance to zero and poisoning the distance test.
                var[own_idx, matched_cols] = np.maximum(
                    (1.0 - p_own) * var_sel + p_own * (xm - mu_new) ** 2,
                    VARIANCE_FLOOR)

            unmatched_cols = cols[~has_match]
            if unmatched_cols.size:
                sub_w = w[:, unmatched_cols] * (1.0 - alpha)
                sub_mu = mu[:, unmatched_cols]
                sub_var = var[:, unmatched_cols]
                nc = self.ncomp[unmatched_cols]
                ar = np.arange(len(unmatched_cols))
                fresh = nc == 0
                slot = np.where(nc < m, nc, m - 1)
                total_before = sub_w.sum(axis=0)
                displaced = np.where(nc < m, 0.0, sub_w[slot, ar])
                sub_w[slot, ar] = alpha
                sub_mu[slot, ar] = x[unmatched_cols]
                sub_var[slot, ar] = INITIAL_VARIANCE
                # Rescale so replacement leaves the weight sum unchanged;
                # an empty model bootstraps its first component at 1.
                total_after = total_before - displaced + alpha
                scale = np.where((total_after > 0) & ~fresh,
                                 total_before / total_after, 1.0)
                sub_w *= scale[None, :]
                sub_w[slot, ar] = np.where(fresh, 1.0, sub_w[slot, ar])
                w[:, unmatched_cols] = sub_w
                mu[:, unmatched_cols] = sub_mu
                var[:, unmatched_cols] = sub_var
                self.ncomp[unmatched_cols] = np.minimum(nc + 1, m)

            # Keep components sorted by descending weight.
            order = np.argsort(-w, axis=0, kind="stable")
            self.weights = np.take_along_axis(w, order, axis=0)
            self.means = np.take_along_axis(mu, order, axis=0)
            self.variances = np.take_along_axis(var, order, axis=0)

        return foreground.reshape(self.shape)

    def weight_sums(self) -> np.ndarray:
        return self.weights.sum(axis=0)
