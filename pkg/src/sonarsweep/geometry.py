"""Sonar viewing geometry.

Coordinate conventions used throughout the package:

* Body frame: x along the acoustic axis, y toward positive azimuth,
  z toward positive elevation.  Roll is a rotation about x.
* Polar coordinates: range r (m), azimuth theta (rad, 0 on-axis,
  positive toward +y), elevation phi (rad, positive toward +z).
* A 2D sonar image is a range x azimuth raster.  Bin centers sit at
  integer indices, with the scope extents mapped onto [0, n-1] along
  each axis (``image_to_grid``).

All functions broadcast over numpy arrays and are pure; they are safe
to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegeneratePointError

POSE_TOL = 1e-9


def spherical_to_euclidean(r, theta, phi):
    """Convert polar sonar coordinates to body-frame Cartesian points.

    Returns an array of shape ``broadcast(r, theta, phi).shape + (3,)``
    with components (r cos phi cos theta, r cos phi sin theta, r sin phi).
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    cp = np.cos(phi)
    return np.stack(
        np.broadcast_arrays(r * cp * np.cos(theta), r * cp * np.sin(theta), r * np.sin(phi)),
        axis=-1,
    )


def euclidean_to_spherical(points, return_degenerate=False):
    """Convert body-frame Cartesian points to polar sonar coordinates.

    Points on the z-axis have no defined azimuth; they are reported with
    theta = 0 and flagged when ``return_degenerate`` is set, so raycast
    bookkeeping stays total.  A zero-length point raises
    :class:`DegeneratePointError`.

    Returns ``(r, theta, phi)`` (plus a boolean degeneracy array when
    requested), each shaped like ``points.shape[:-1]``.
    """
    p = np.asarray(points, dtype=float)
    if p.shape[-1] != 3:
        raise ValueError("expected points with a trailing dimension of 3")
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    r = np.sqrt(x * x + y * y + z * z)
    if np.any(r == 0.0):
        raise DegeneratePointError("zero-length point has no spherical representation")
    theta = np.arctan2(y, x)
    phi = np.arcsin(np.clip(z / r, -1.0, 1.0))
    if return_degenerate:
        return r, theta, phi, (x == 0.0) & (y == 0.0)
    return r, theta, phi


def project(r, theta, phi):
    """Project a 3D polar point onto the sonar image plane.

    Imaging integrates over elevation, so the projection simply drops
    phi: the image coordinates are (r, theta) regardless of elevation.
    """
    del phi
    return np.asarray(r, dtype=float), np.asarray(theta, dtype=float)


def image_to_grid(r, theta, intrinsics):
    """Map continuous image coordinates to fractional raster indices.

    Bin centers are at integer indices; (r_min, theta_min) maps to
    (0, 0) and (r_max, theta_max) to (H-1, W-1).  Out-of-scope inputs
    yield out-of-range fractional indices; callers decide how to treat
    them.
    """
    k = intrinsics
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    row = (r - k.r_min) / (k.r_max - k.r_min) * (k.range_bins - 1)
    col = (theta - k.theta_min) / (k.theta_max - k.theta_min) * (k.azimuth_bins - 1)
    return row, col


def in_scope(r, theta, phi, intrinsics):
    """True where (r, theta, phi) lies inside the closed sonar scope."""
    k = intrinsics
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return (
        (r >= k.r_min)
        & (r <= k.r_max)
        & (theta >= k.theta_min)
        & (theta <= k.theta_max)
        & (phi >= k.phi_min)
        & (phi <= k.phi_max)
    )


def _rotation_about(axis_index, angle):
    c, s = np.cos(angle), np.sin(angle)
    m = np.eye(3)
    i, j = [(1, 2), (2, 0), (0, 1)][axis_index]
    m[i, i] = c
    m[j, j] = c
    m[i, j] = -s
    m[j, i] = s
    return m


@dataclass(frozen=True)
class Pose:
    """Rigid transform p -> rotation @ p + translation.

    The rotation must be orthonormal with determinant +1 (checked to
    1e-9 at construction).  Poses compose like matrices:
    ``(a.compose(b)).apply(p) == a.apply(b.apply(p))``.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float)
        tr = np.array(self.translation, dtype=float).reshape(3)
        if rot.shape != (3, 3):
            raise ConfigError("rotation must be a 3x3 matrix")
        if not np.all(np.isfinite(rot)) or not np.all(np.isfinite(tr)):
            raise ConfigError("pose entries must be finite")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > POSE_TOL:
            raise ConfigError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(rot) - 1.0) > POSE_TOL:
            raise ConfigError("rotation determinant is not +1 within 1e-9")
        rot.setflags(write=False)
        tr.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @staticmethod
    def identity():
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def roll(angle):
        """Rotation by ``angle`` about the body x-axis (the acoustic axis)."""
        return Pose(_rotation_about(0, angle), np.zeros(3))

    @staticmethod
    def pitch(angle):
        """Rotation about the body y-axis; positive pitches the axis downward."""
        return Pose(_rotation_about(1, angle), np.zeros(3))

    @staticmethod
    def yaw(angle):
        """Rotation about the body z-axis."""
        return Pose(_rotation_about(2, angle), np.zeros(3))

    @staticmethod
    def from_axis_angle(axis, angle, translation=(0.0, 0.0, 0.0)):
        axis = np.asarray(axis, dtype=float)
        n = np.linalg.norm(axis)
        if n == 0:
            raise ConfigError("rotation axis must be nonzero")
        ux, uy, uz = axis / n
        kmat = np.array([[0.0, -uz, uy], [uz, 0.0, -ux], [-uy, ux, 0.0]])
        rot = np.eye(3) + np.sin(angle) * kmat + (1.0 - np.cos(angle)) * (kmat @ kmat)
        return Pose(rot, translation)

    @staticmethod
    def from_quaternion(q, translation=(0.0, 0.0, 0.0)):
        """Build from a (w, x, y, z) quaternion; normalizes the input."""
        q = np.asarray(q, dtype=float).reshape(4)
        n = np.linalg.norm(q)
        if n == 0:
            raise ConfigError("zero quaternion")
        w, x, y, z = q / n
        rot = np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )
        return Pose(rot, translation)

    def to_quaternion(self):
        """Return a unit (w, x, y, z) quaternion with w >= 0."""
        m = self.rotation
        t = np.trace(m)
        if t > 0:
            s = np.sqrt(t + 1.0) * 2
            q = np.array(
                [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
            )
        else:
            i = int(np.argmax(np.diag(m)))
            j, l = (i + 1) % 3, (i + 2) % 3
            s = np.sqrt(max(1.0 + m[i, i] - m[j, j] - m[l, l], 0.0)) * 2
            q = np.empty(4)
            q[0] = (m[l, j] - m[j, l]) / s
            q[1 + i] = 0.25 * s
            q[1 + j] = (m[j, i] + m[i, j]) / s
            q[1 + l] = (m[l, i] + m[i, l]) / s
        q /= np.linalg.norm(q)
        return q if q[0] >= 0 else -q

    def compose(self, other):
        """self after other: ``(self.compose(other)).apply == self.apply(other.apply(.))``."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self):
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def apply(self, points):
        """Transform points shaped (..., 3)."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def is_identity(self):
        """Exact identity check (used for the lossless warp fast path)."""
        return bool(np.array_equal(self.rotation, np.eye(3)) and not self.translation.any())


def transform_point(pose, points):
    """Apply a rigid transform: rotation @ p + translation."""
    return pose.apply(points)


@dataclass(frozen=True)
class SonarIntrinsics:
    """Sensor scope and discretization.

    range_bins (H) and azimuth_bins (W) fix the image raster;
    elevation_planes (N) fixes the virtual plane sweep and the
    ground-truth depth-map rows.
    """

    r_min: float
    r_max: float
    theta_min: float
    theta_max: float
    phi_min: float
    phi_max: float
    range_bins: int
    azimuth_bins: int
    elevation_planes: int

    def __post_init__(self):
        if not (self.r_min < self.r_max):
            raise ConfigError("require r_min < r_max")
        if not (self.theta_min < self.theta_max):
            raise ConfigError("require theta_min < theta_max")
        if not (self.phi_min < self.phi_max):
            raise ConfigError("require phi_min < phi_max")
        if self.range_bins < 2 or self.azimuth_bins < 2:
            raise ConfigError("range_bins and azimuth_bins must be >= 2")
        if self.elevation_planes < 2:
            raise ConfigError("elevation_planes must be >= 2")

    @staticmethod
    def default():
        """Desk-scale defaults: 512x128 raster, 28 deg x 14 deg fan, 0.5-2.5 m, 32 planes."""
        return SonarIntrinsics(
            r_min=0.5,
            r_max=2.5,
            theta_min=-np.deg2rad(14.0),
            theta_max=np.deg2rad(14.0),
            phi_min=-np.deg2rad(7.0),
            phi_max=np.deg2rad(7.0),
            range_bins=512,
            azimuth_bins=128,
            elevation_planes=32,
        )

    def range_centers(self, n=None):
        return np.linspace(self.r_min, self.r_max, n if n is not None else self.range_bins)

    def azimuth_centers(self, n=None):
        return np.linspace(self.theta_min, self.theta_max, n if n is not None else self.azimuth_bins)

    def elevation_angles(self, n=None):
        """Angles phi_j = phi_min + j (phi_max - phi_min)/(n - 1), j = 0..n-1."""
        return np.linspace(self.phi_min, self.phi_max, n if n is not None else self.elevation_planes)
