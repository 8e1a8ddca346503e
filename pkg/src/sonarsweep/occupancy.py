"""Occupancy-mapping baseline.

Deterministic two-frame carving with an inverse sensor model: every
above-threshold image return adds occupancy evidence along its whole
elevation arc (a 2D image cannot localize elevation), and cells in
front of a column's first return collect free-space evidence.  With
only a couple of views at a small roll offset the arcs barely
disambiguate - the failure mode the plane-sweep pipeline is measured
against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataConsistencyError
from .metrics import PointCloud

LOG_ODDS_CLAMP = 10.0


@dataclass(frozen=True)
class InverseSensorModel:
    """Log-odds increments and the intensity gate for a single view.

    ``intensity_threshold=None`` gates at half the view's maximum
    intensity.  The values are stated defaults, not a reproduction of
    any particular prior system.
    """

    l_occ: float = 0.85
    l_free: float = -0.4
    intensity_threshold: float | None = None


@dataclass
class OccupancyGrid:
    """Axis-aligned log-odds grid in the reference sensor frame."""

    origin: np.ndarray
    cell_size: float
    log_odds: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        self.log_odds = np.asarray(self.log_odds, dtype=float)
        if self.log_odds.ndim != 3:
            raise ConfigError("log_odds must be a 3D array")
        if self.cell_size <= 0:
            raise ConfigError("cell_size must be positive")

    @classmethod
    def for_scope(cls, intrinsics, cell_size=None):
        """Grid covering the sonar scope's bounding box (default cell:
        (r_max - r_min)/256)."""
        k = intrinsics
        if cell_size is None:
            cell_size = (k.r_max - k.r_min) / 256.0
        x_lo = k.r_min * np.cos(max(abs(k.theta_min), abs(k.theta_max))) * np.cos(
            max(abs(k.phi_min), abs(k.phi_max))
        )
        bounds_lo = np.array([x_lo, k.r_max * np.sin(k.theta_min), k.r_max * np.sin(k.phi_min)])
        bounds_hi = np.array([k.r_max, k.r_max * np.sin(k.theta_max), k.r_max * np.sin(k.phi_max)])
        span = bounds_hi - bounds_lo
        dims = np.maximum(np.ceil(span / cell_size).astype(int) + 1, 1)
        return cls(origin=bounds_lo, cell_size=float(cell_size), log_odds=np.zeros(dims))

    def axis_centers(self, axis):
        n = self.log_odds.shape[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.cell_size


def integrate_view(grid, image, pose_ref_to_frame, intrinsics, model=None):
    """Fold one acoustic image into the grid; returns an updated copy.

    Cells outside the view's scope are untouched; cells whose (r, theta)
    image bin exceeds the intensity gate gain ``l_occ`` (the return may
    come from any elevation); cells nearer than the column's first gated
    return gain ``l_free``.  Log-odds clamp at +/-10.
    """
    if image.intrinsics is not intrinsics and image.intrinsics != intrinsics:
        raise DataConsistencyError("image intrinsics do not match")
    model = model or InverseSensorModel()
    k = intrinsics
    img = image.intensities
    thresh = model.intensity_threshold
    if thresh is None:
        thresh = 0.5 * float(img.max())
    gated = img > thresh
    first_row = np.where(gated.any(axis=0), np.argmax(gated, axis=0), img.shape[0])
    bin_w = (k.r_max - k.r_min) / (k.range_bins - 1)
    first_range = k.r_min + first_row * bin_w  # rows beyond the raster mean "no return"

    out = grid.log_odds.copy()
    xs = grid.axis_centers(0)
    ys = grid.axis_centers(1)
    zs = grid.axis_centers(2)
    ny, nz = ys.size, zs.size
    yy, zz = np.meshgrid(ys, zs, indexing="ij")
    for ix, x in enumerate(xs):  # slab at a time to bound memory
        pts = np.stack([np.full_like(yy, x), yy, zz], axis=-1)
        q = pose_ref_to_frame.apply(pts.reshape(-1, 3))
        r = np.linalg.norm(q, axis=-1)
        theta = np.arctan2(q[:, 1], q[:, 0])
        with np.errstate(invalid="ignore"):
            phi = np.arcsin(np.clip(np.where(r > 0, q[:, 2] / np.where(r > 0, r, 1.0), 0.0), -1, 1))
        inside = (
            (r >= k.r_min)
            & (r <= k.r_max)
            & (theta >= k.theta_min)
            & (theta <= k.theta_max)
            & (phi >= k.phi_min)
            & (phi <= k.phi_max)
        )
        rows = np.clip(np.rint((r - k.r_min) / bin_w).astype(int), 0, k.range_bins - 1)
        cols = np.clip(
            np.rint(
                (theta - k.theta_min) / (k.theta_max - k.theta_min) * (k.azimuth_bins - 1)
            ).astype(int),
            0,
            k.azimuth_bins - 1,
        )
        occ = inside & gated[rows, cols]
        free = inside & ~occ & (r < first_range[cols])
        delta = model.l_occ * occ + model.l_free * free
        out[ix] += delta.reshape(ny, nz)
    np.clip(out, -LOG_ODDS_CLAMP, LOG_ODDS_CLAMP, out=out)
    return OccupancyGrid(grid.origin, grid.cell_size, out)


def extract_surface(grid, threshold):
    """Centers of cells whose log-odds exceed the threshold."""
    ix, iy, iz = np.nonzero(grid.log_odds > threshold)
    pts = np.stack(
        [
            grid.origin[0] + (ix + 0.5) * grid.cell_size,
            grid.origin[1] + (iy + 0.5) * grid.cell_size,
            grid.origin[2] + (iz + 0.5) * grid.cell_size,
        ],
        axis=-1,
    )
    return PointCloud(pts.reshape(-1, 3), frame="sensor")
