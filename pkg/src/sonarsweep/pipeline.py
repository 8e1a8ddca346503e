"""End-to-end reconstruction: images + relative poses -> front depth map.

Chains extract_features -> build_volume (reference + sources) ->
aggregate_variance -> smooth -> score -> upsample -> soft_argmax_depth.
Two pragmatic policies sit on top of the chain (both configurable):

* a signal floor marks cells where no view carries feature energy as
  unmeasured, so empty space cannot win the soft-argmax by trivially
  agreeing with itself;
* columns with no measured cell at all are assigned depth r_max,
  matching the simulator's miss convention so downstream masking
  removes them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .frontdepth import soft_argmax_depth
from .geometry import Pose
from .planesweep import aggregate_variance, build_volume, extract_features
from .regularize import score_volume, smooth_volume, upsample_volume
from .simulator import FrontDepthMap


@dataclass(frozen=True)
class ReconstructionParams:
    feature_mode: str = "patch-stats"
    downsample_factor: int = 1
    sigma: tuple = (2.0, 1.0, 1.0)
    tau: float | None = None
    upsample: tuple = (1, 1, 1)
    warp: bool = True  # False reproduces the "summed unwarped volumes" ablation
    signal_floor_frac: float | None = 0.05
    fill_unsupported: bool = True
    max_views: int | None = None

    def as_table(self):
        return {
            "feature_mode": self.feature_mode,
            "downsample_factor": self.downsample_factor,
            "sigma": list(self.sigma),
            "tau": -1.0 if self.tau is None else float(self.tau),
            "upsample": list(self.upsample),
            "warp": self.warp,
            "signal_floor_frac": -1.0 if self.signal_floor_frac is None else self.signal_floor_frac,
            "fill_unsupported": self.fill_unsupported,
        }


@dataclass(frozen=True)
class ReconstructionResult:
    depth: FrontDepthMap
    cost: object
    score: object
    support: np.ndarray  # (E, W) columns with at least one measured cell
    elapsed: float


def reconstruct(ref_image, source_images, rel_poses, intrinsics, params=None):
    """Estimate the reference frame's front depth from K >= 2 views.

    ``rel_poses[j]`` maps reference-frame points into source frame j.
    """
    t0 = time.perf_counter()
    p = params or ReconstructionParams()
    sources = list(source_images)
    poses = list(rel_poses)
    if p.max_views is not None:
        sources = sources[: max(p.max_views - 1, 1)]
        poses = poses[: max(p.max_views - 1, 1)]

    ref_feat = extract_features(ref_image, p.feature_mode, p.downsample_factor)
    volumes = [build_volume(ref_feat, Pose.identity(), intrinsics)]
    for img, pose in zip(sources, poses):
        feat = extract_features(img, p.feature_mode, p.downsample_factor)
        volumes.append(build_volume(feat, pose if p.warp else Pose.identity(), intrinsics))

    floor = None
    if p.signal_floor_frac is not None:
        floor = p.signal_floor_frac * float(np.abs(ref_feat.values[0]).max())
    cost = aggregate_variance(volumes, signal_floor=floor)
    support = cost.measured.any(axis=0)  # (E, W)

    score = score_volume(smooth_volume(cost, p.sigma, respect_measured=True), p.tau)
    score = upsample_volume(score, p.upsample)
    depth = soft_argmax_depth(score, intrinsics)

    if p.fill_unsupported:
        sup = support.astype(float)
        for axis, f in enumerate(p.upsample[1:]):
            sup = _expand_mask(sup, int(f), axis)
        d = depth.depths.copy()
        d[sup <= 0.0] = intrinsics.r_max
        depth = FrontDepthMap(d, intrinsics)
    return ReconstructionResult(depth, cost, score, support, time.perf_counter() - t0)


def _expand_mask(mask, factor, axis):
    """Upsample a support mask: a new cell is supported when any original
    cell it interpolates from is supported."""
    if factor == 1 or mask.shape[axis] == 1:
        return mask
    n = mask.shape[axis]
    idx = np.arange((n - 1) * factor + 1)
    base = np.minimum(idx // factor, n - 2)
    shape = [1] * mask.ndim
    shape[axis] = idx.size
    w = ((idx - base * factor) / factor).reshape(shape)
    lo = np.take(mask, base, axis=axis)
    hi = np.take(mask, base + 1, axis=axis)
    return np.maximum(lo * (1.0 - w), hi * w)
