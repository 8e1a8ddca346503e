"""Front-depth extraction, masks, and the masked L1 training loss.

The front depth map assigns each (elevation, azimuth) ray its
first-return range.  Extraction assumes the score distribution along
range is unimodal for every (theta, phi) column; with two equal peaks
soft-argmax returns their midpoint, which is exactly why that
assumption is load-bearing.  (The distribution along *elevation* for a
fixed image pixel may be multimodal - that ambiguity is the reason for
regressing depth rather than elevation.)
"""

from __future__ import annotations

import numpy as np

from .errors import DataConsistencyError
from .simulator import FrontDepthMap


def bin_center_depths(n_bins, intrinsics):
    """Metric depth of each score-volume range bin: r_min + (i + 0.5) * span / n."""
    k = intrinsics
    return k.r_min + (np.arange(n_bins) + 0.5) * (k.r_max - k.r_min) / n_bins


def soft_argmax_depth(score, intrinsics):
    """Softmax-expected depth per (elevation, azimuth) column.

    Scores are shifted by their column maximum before exponentiation
    (softmax is invariant to the shift), keeping the computation stable
    for any score scale.
    """
    v = score.values
    d = bin_center_depths(v.shape[0], intrinsics)
    shifted = v - v.max(axis=0, keepdims=True)
    w = np.exp(shifted)
    depth = np.einsum("d,dew->ew", d, w) / w.sum(axis=0)
    return FrontDepthMap(depth, intrinsics)


def hard_argmax_depth(score, intrinsics):
    """Winner-take-all depth; ties break toward the nearer range
    (front depth is a first-return quantity)."""
    v = score.values
    d = bin_center_depths(v.shape[0], intrinsics)
    return FrontDepthMap(d[np.argmax(v, axis=0)], intrinsics)


def clamp_gt(gt, intrinsics=None):
    """Clamp ground-truth depths into [r_min, r_max]."""
    k = intrinsics if intrinsics is not None else gt.intrinsics
    return FrontDepthMap(np.clip(gt.depths, k.r_min, k.r_max), gt.intrinsics)


def make_mask(gt, intrinsics=None):
    """Binary mask: 0 where depth <= r_min or >= r_max (non-informative), else 1."""
    k = intrinsics if intrinsics is not None else gt.intrinsics
    d = gt.depths
    return (d > k.r_min) & (d < k.r_max)


def masked_l1_loss(est, gt, lam=3.0):
    """Mean of lam * M * |est - gt| + (1 - M) * |est - gt| over all cells.

    The mask M is derived from the (clamped) ground truth via
    :func:`make_mask`; lam weights the informative region.
    """
    if est.depths.shape != gt.depths.shape:
        raise DataConsistencyError("depth map shapes do not match")
    m = make_mask(gt).astype(float)
    diff = np.abs(est.depths - gt.depths)
    return float(np.mean(lam * m * diff + (1.0 - m) * diff))
