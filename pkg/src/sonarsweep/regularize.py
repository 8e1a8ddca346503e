"""Cost-volume regularization: classical stand-in for the learned 3D refiner.

Smooth the cost volume with a separable Gaussian, negate/scale it into
an occupancy-like score, and optionally upsample with aligned-corner
trilinear interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import ConfigError
from .planesweep import CostVolume


@dataclass(frozen=True)
class ScoreVolume:
    """(range, elevation, azimuth) scores; higher = more likely occupied."""

    values: np.ndarray
    upsample_factors: tuple = (1, 1, 1)
    measured: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 3:
            raise ConfigError("score volume must be (D, E, W)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.measured is not None:
            m = np.array(self.measured, dtype=bool)
            if m.shape != v.shape:
                raise ConfigError("measured mask must match the score shape")
            m.setflags(write=False)
            object.__setattr__(self, "measured", m)

    @property
    def shape(self):
        return self.values.shape


def smooth_volume(cost, sigma=(2.0, 1.0, 1.0), respect_measured=False):
    """Separable Gaussian blur (kernels truncated at 3 sigma, renormalized,
    reflected boundaries); sigma, per (range, elevation, azimuth) axis,
    may be zero to skip an axis.

    With ``respect_measured`` the blur is a normalized masked convolution
    over measured cells only, so pessimistic fill values cannot bleed
    into real costs; unmeasured cells keep their fill value.
    """
    if len(sigma) != 3 or any(s < 0 for s in sigma):
        raise ConfigError("sigma must be three non-negative values")

    def blur(a):
        for axis, s in enumerate(sigma):
            if s > 0:
                a = gaussian_filter1d(a, sigma=s, axis=axis, mode="reflect", truncate=3.0)
        return a

    if respect_measured and not cost.measured.all():
        m = cost.measured.astype(float)
        den = blur(m)
        num = blur(cost.values * m)
        out = np.where((den > 1e-12) & cost.measured, num / np.maximum(den, 1e-12), cost.values)
    else:
        out = blur(cost.values)
    out = np.maximum(out, 0.0)
    return CostVolume(out, cost.counts, cost.measured)


def default_temperature(cost):
    """Mean positive cost over measured cells; 1.0 when there are none."""
    vals = cost.values[cost.measured]
    pos = vals[vals > 0]
    return float(pos.mean()) if pos.size else 1.0


def score_volume(cost, tau=None):
    """Negate and scale the cost: score = -cost / tau.

    Zero-cost (perfect agreement) cells take the maximum score 0; the
    per-range argmax of the score equals the argmin of the cost for any
    temperature.  ``tau=None`` uses :func:`default_temperature`.
    """
    if tau is None:
        tau = default_temperature(cost)
    if tau <= 0:
        raise ConfigError("temperature must be positive")
    return ScoreVolume(-cost.values / float(tau), (1, 1, 1), cost.measured)


def _upsample_axis(arr, factor, axis):
    n = arr.shape[axis]
    if factor == 1 or n == 1:
        return arr
    out_n = (n - 1) * factor + 1
    idx = np.arange(out_n)
    base = np.minimum(idx // factor, n - 2)
    wshape = [1] * arr.ndim
    wshape[axis] = out_n
    w = ((idx - base * factor) / factor).reshape(wshape)
    lo = np.take(arr, base, axis=axis)
    hi = np.take(arr, base + 1, axis=axis)
    return lo * (1.0 - w) + hi * w


def upsample_volume(score, factors=(1, 1, 1)):
    """Aligned-corner linear upsampling by integer factors per axis.

    Axis length n becomes (n-1)*factor + 1, so original bin centers map
    onto output bins exactly and affine data stays affine.
    """
    if len(factors) != 3 or any(int(f) != f or f < 1 for f in factors):
        raise ConfigError("factors must be three integers >= 1")
    factors = tuple(int(f) for f in factors)
    out = score.values
    meas = None if score.measured is None else score.measured.astype(float)
    for axis, f in enumerate(factors):
        out = _upsample_axis(out, f, axis)
        if meas is not None:
            meas = _upsample_axis(meas, f, axis)
    combined = tuple(a * b for a, b in zip(score.upsample_factors, factors))
    return ScoreVolume(out, combined, None if meas is None else meas > 0.0)
