"""Elevation plane sweeping.

Source-frame features are warped onto N virtual constant-elevation
planes in the reference frame.  For a grid cell (r_i, theta_c) on
plane phi_j the 3D point (r_i, theta_c, phi_j) is converted to
Cartesian coordinates, transformed by the reference-to-source pose,
converted back to polar coordinates, projected to (r, theta) (the
image is elevation-blind), and bilinearly sampled from the source
raster.  Samples that leave the source raster or scope are zero-filled
and tracked in a validity mask rather than edge-clamped, so border
cells can never fake photometric agreement.

Stacking the N warped slices gives a feature volume; the per-cell
variance across the reference and source volumes (channel-averaged) is
the cost volume, indexed (range, elevation, azimuth).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import ConfigError, DataConsistencyError
from .geometry import Pose, SonarIntrinsics, spherical_to_euclidean

FEATURE_MODES = ("intensity", "patch-stats", "gradient")


@dataclass(frozen=True)
class FeatureImage:
    """Channels x range x azimuth feature raster derived from one image."""

    values: np.ndarray
    downsample_factor: int = 1

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 3 or v.shape[0] < 1:
            raise ConfigError("feature values must be (C, H', W') with C >= 1")
        if not np.all(np.isfinite(v)):
            raise ConfigError("feature values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def channels(self):
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape[1:]


@dataclass(frozen=True)
class FeatureVolume:
    """Per-frame warped stack: values (C, N, H', W'), validity (N, H', W')."""

    values: np.ndarray
    validity: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        m = np.array(self.validity, dtype=bool)
        if v.ndim != 4 or m.shape != v.shape[1:]:
            raise ConfigError("volume must be (C, N, H', W') with matching validity")
        v.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "validity", m)


@dataclass(frozen=True)
class CostVolume:
    """Aggregated inter-view disagreement, indexed (range, elevation, azimuth).

    ``counts`` holds how many input volumes were valid per cell;
    ``measured`` is False where the value was filled by the pessimistic
    invalid-cell policy instead of computed from Eq.-style variance.
    """

    values: np.ndarray
    counts: np.ndarray
    measured: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        c = np.array(self.counts, dtype=np.int16)
        m = np.array(self.measured, dtype=bool)
        if v.ndim != 3 or c.shape != v.shape or m.shape != v.shape:
            raise ConfigError("cost volume arrays must share a (D, E, W) shape")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ConfigError("costs must be finite and non-negative")
        for arr in (v, c, m):
            arr.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "measured", m)

    @property
    def shape(self):
        return self.values.shape


def extract_features(image, mode="patch-stats", downsample_factor=1):
    """Classical feature stand-in for the learned 2D extractor.

    intensity: 1 channel, box-downsampled copy.
    patch-stats: 2 channels, local 3x3 mean and standard deviation.
    gradient: 2 channels, central differences along range and azimuth.
    """
    if mode not in FEATURE_MODES:
        raise ConfigError(f"unknown feature mode {mode!r}; expected one of {FEATURE_MODES}")
    f = int(downsample_factor)
    img = image.intensities
    h, w = img.shape
    if f < 1 or h % f or w % f:
        raise ConfigError("downsample_factor must divide both image dimensions")
    base = img.reshape(h // f, f, w // f, f).mean(axis=(1, 3))
    if mode == "intensity":
        channels = [base]
    elif mode == "patch-stats":
        mean = uniform_filter(base, size=3, mode="reflect")
        sq = uniform_filter(base * base, size=3, mode="reflect")
        std = np.sqrt(np.maximum(sq - mean * mean, 0.0))
        channels = [mean, std]
    else:
        channels = [np.gradient(base, axis=0), np.gradient(base, axis=1)]
    return FeatureImage(np.stack(channels, axis=0), downsample_factor=f)


def elevation_plane_angles(intrinsics):
    """The N sweep angles phi_j = phi_min + j (phi_max - phi_min)/(N-1)."""
    if intrinsics.elevation_planes < 2:
        raise ConfigError("need at least two elevation planes")
    return intrinsics.elevation_angles()


def plane_sample_positions(pose, phi_j, intrinsics, shape):
    """Source-frame (r, theta) sampled by plane phi_j for an (H', W') grid.

    The grid holds the reference bin centers; the returned coordinates
    are where each cell lands in the source image after the rigid
    transform.  Useful on its own for validity reasoning and demos.
    """
    h, w = shape
    r = intrinsics.range_centers(h)
    theta = intrinsics.azimuth_centers(w)
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    pts = spherical_to_euclidean(rr, tt, phi_j)
    q = pose.apply(pts)
    x, y, z = q[..., 0], q[..., 1], q[..., 2]
    r_s = np.sqrt(x * x + y * y + z * z)
    theta_s = np.arctan2(y, x)
    return r_s, theta_s


def in_image_bounds(r_s, theta_s, intrinsics, shape):
    """True where (r, theta) falls on the raster / inside the scope rectangle."""
    h, w = shape
    k = intrinsics
    row = (r_s - k.r_min) / (k.r_max - k.r_min) * (h - 1)
    col = (theta_s - k.theta_min) / (k.theta_max - k.theta_min) * (w - 1)
    return (row >= 0) & (row <= h - 1) & (col >= 0) & (col <= w - 1)


def warp_to_plane(src, pose, phi_j, intrinsics):
    """Warp source features onto one elevation plane.

    Returns (slice, valid): slice is (C, H', W') with zeros outside the
    source raster/scope, valid the matching boolean mask.  An exactly
    identity pose short-circuits to a lossless copy (the projection of
    (r_i, theta_c, phi_j) is (r_i, theta_c) for every phi_j).
    """
    vals = src.values
    c, h, w = vals.shape
    if pose.is_identity():
        return vals.copy(), np.ones((h, w), dtype=bool)
    k = intrinsics
    r_s, theta_s = plane_sample_positions(pose, phi_j, k, (h, w))
    rows = (r_s - k.r_min) / (k.r_max - k.r_min) * (h - 1)
    cols = (theta_s - k.theta_min) / (k.theta_max - k.theta_min) * (w - 1)
    valid = (rows >= 0) & (rows <= h - 1) & (cols >= 0) & (cols <= w - 1) & (r_s > 0)

    i0 = np.clip(np.floor(np.where(valid, rows, 0.0)).astype(int), 0, h - 2)
    j0 = np.clip(np.floor(np.where(valid, cols, 0.0)).astype(int), 0, w - 2)
    fr = np.where(valid, rows, 0.0) - i0
    fc = np.where(valid, cols, 0.0) - j0
    out = (
        vals[:, i0, j0] * (1 - fr) * (1 - fc)
        + vals[:, i0 + 1, j0] * fr * (1 - fc)
        + vals[:, i0, j0 + 1] * (1 - fr) * fc
        + vals[:, i0 + 1, j0 + 1] * fr * fc
    )
    out = np.where(valid, out, 0.0)
    return out, valid


def build_volume(frame, pose, intrinsics):
    """Stack warp_to_plane over every sweep angle into a FeatureVolume.

    Called with the identity pose this yields the reference volume
    (each plane an exact copy of the frame's features).
    """
    slices = []
    masks = []
    for phi_j in elevation_plane_angles(intrinsics):
        s, v = warp_to_plane(frame, pose, phi_j, intrinsics)
        slices.append(s)
        masks.append(v)
    return FeatureVolume(np.stack(slices, axis=1), np.stack(masks, axis=0))


def aggregate_variance(volumes, signal_floor=None):
    """Fuse K >= 2 feature volumes into a cost volume.

    Per cell the cost is the channel-mean of (1/K') sum_k (V_k - Vbar)^2
    over the K' valid volumes at that cell.  Cells with fewer than two
    valid volumes carry no photometric evidence; they are marked
    unmeasured and filled with the maximum observed valid cost so they
    can never win a soft-argmax.  When ``signal_floor`` is given, cells
    where no valid volume reaches the floor in any channel (no signal
    in any view) are treated the same way.
    """
    if len(volumes) < 2:
        raise ConfigError("aggregation needs at least two volumes")
    shape = volumes[0].values.shape
    for vol in volumes[1:]:
        if vol.values.shape != shape:
            raise DataConsistencyError("feature volumes must share a common shape")
    vals = np.stack([v.values for v in volumes], axis=0)  # (K, C, N, H, W)
    valid = np.stack([v.validity for v in volumes], axis=0)  # (K, N, H, W)

    counts = valid.sum(axis=0).astype(np.int16)
    n = np.maximum(counts, 1).astype(float)
    w = valid[:, None].astype(float)
    mean = (vals * w).sum(axis=0) / n
    var = (w * (vals - mean) ** 2).sum(axis=0) / n
    cost = var.mean(axis=0)  # (N, H, W)

    measured = counts >= 2
    if signal_floor is not None:
        informative = (valid & (np.abs(vals).max(axis=1) > signal_floor)).any(axis=0)
        measured = measured & informative
    if measured.any():
        fill = float(cost[measured].max())
    else:
        fill = 0.0
    cost = np.where(measured, cost, fill)

    to_dew = lambda a: np.ascontiguousarray(np.transpose(a, (1, 0, 2)))
    return CostVolume(to_dew(cost), to_dew(counts), to_dew(measured))
