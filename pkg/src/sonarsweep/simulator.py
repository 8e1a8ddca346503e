"""Raycasting acoustic-image simulator.

Renders range x azimuth intensity rasters and ground-truth front depth
maps from parametric scenes.  The imaging model: for every azimuth bin
a dense fan of elevation rays is cast from the sensor origin; each
first hit deposits a Lambertian backscatter intensity
``reflectivity * max(0, -dir . normal)`` into the range raster
(sub-bin linear splat between the two nearest bins) and contributions
from all elevations in a column accumulate by summation.  There is no
1/r^2 spreading loss by default (imaging sonars are gain-compensated);
pass ``spreading_loss=True`` to enable it.

Ground truth is a per-(elevation, azimuth) first-return range map: one
ray per elevation row at the row's bin-center angle, clamped to
[r_min, r_max]; misses record r_max.

The image elevation fan spans [phi_min, phi_max] with
``rays_per_elevation`` equally spaced samples (endpoints included);
this sampling is part of the renderer's contract so that external
energy audits can reproduce the exact ray set.

All generation is a pure function of (scene, pose, intrinsics, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvalidSceneError
from .geometry import Pose, SonarIntrinsics, spherical_to_euclidean

_T_MIN = 1e-9


# ---------------------------------------------------------------------------
# scenes


def _check_reflectivity(value):
    if not (0.0 < value <= 1.0):
        raise ConfigError("reflectivity must lie in (0, 1]")


@dataclass(frozen=True)
class EmptyScene:
    """A scene with no geometry: every ray misses."""

    reflectivity: float = 1.0

    def __post_init__(self):
        _check_reflectivity(self.reflectivity)


@dataclass(frozen=True)
class SphereScene:
    center: np.ndarray
    radius: float
    reflectivity: float = 1.0

    def __post_init__(self):
        center = np.array(self.center, dtype=float).reshape(3)
        if self.radius <= 0:
            raise InvalidSceneError("sphere radius must be positive")
        _check_reflectivity(self.reflectivity)
        center.setflags(write=False)
        object.__setattr__(self, "center", center)


@dataclass(frozen=True)
class HeightfieldScene:
    """Bilinear surface z = h(x, y) over a regular grid.

    ``heights[i, j]`` is the height at (origin_x + i*cell_size,
    origin_y + j*cell_size).
    """

    origin: np.ndarray
    cell_size: float
    heights: np.ndarray
    reflectivity: float = 1.0

    def __post_init__(self):
        origin = np.array(self.origin, dtype=float).reshape(2)
        heights = np.array(self.heights, dtype=float)
        if heights.ndim != 2 or heights.shape[0] < 2 or heights.shape[1] < 2:
            raise InvalidSceneError("heightfield grid must be at least 2x2")
        if self.cell_size <= 0:
            raise InvalidSceneError("cell_size must be positive")
        if not np.all(np.isfinite(heights)):
            raise InvalidSceneError("heights must be finite")
        _check_reflectivity(self.reflectivity)
        origin.setflags(write=False)
        heights.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "heights", heights)


@dataclass(frozen=True)
class MeshScene:
    """Triangle soup; face normals follow the winding (counter-clockwise
    seen from the side the normal points to)."""

    vertices: np.ndarray
    faces: np.ndarray
    reflectivity: float = 1.0

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        faces = np.array(self.faces, dtype=int)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise InvalidSceneError("vertices must be (V, 3)")
        if faces.ndim != 2 or faces.shape[1] != 3 or faces.shape[0] == 0:
            raise InvalidSceneError("faces must be a non-empty (F, 3) index array")
        if faces.min() < 0 or faces.max() >= verts.shape[0]:
            raise InvalidSceneError("face indices out of range")
        e1 = verts[faces[:, 1]] - verts[faces[:, 0]]
        e2 = verts[faces[:, 2]] - verts[faces[:, 0]]
        areas = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
        if np.any(areas <= 0.0):
            raise InvalidSceneError("mesh contains zero-area faces")
        _check_reflectivity(self.reflectivity)
        verts.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)


Scene = EmptyScene | SphereScene | HeightfieldScene | MeshScene


# ---------------------------------------------------------------------------
# rasters


@dataclass(frozen=True)
class AcousticImage:
    """Range x azimuth intensity raster (row 0 = nearest range bin)."""

    intensities: np.ndarray
    intrinsics: SonarIntrinsics

    def __post_init__(self):
        img = np.array(self.intensities, dtype=float)
        k = self.intrinsics
        if img.shape != (k.range_bins, k.azimuth_bins):
            raise ConfigError(
                f"image shape {img.shape} does not match intrinsics "
                f"({k.range_bins}, {k.azimuth_bins})"
            )
        if not np.all(np.isfinite(img)) or np.any(img < 0):
            raise ConfigError("intensities must be finite and non-negative")
        img.setflags(write=False)
        object.__setattr__(self, "intensities", img)

    @property
    def shape(self):
        return self.intensities.shape


@dataclass(frozen=True)
class FrontDepthMap:
    """Elevation x azimuth raster of first-return ranges in meters.

    Row e corresponds to elevation angle
    phi_min + e*(phi_max - phi_min)/(E - 1); columns follow the image
    azimuth bins.
    """

    depths: np.ndarray
    intrinsics: SonarIntrinsics

    def __post_init__(self):
        d = np.array(self.depths, dtype=float)
        if d.ndim != 2 or d.shape[1] != self.intrinsics.azimuth_bins or d.shape[0] < 2:
            raise ConfigError("depth map must be (E >= 2, azimuth_bins)")
        if not np.all(np.isfinite(d)):
            raise ConfigError("depths must be finite")
        d.setflags(write=False)
        object.__setattr__(self, "depths", d)

    @property
    def elevation_bins(self):
        return self.depths.shape[0]

    def elevation_row_angles(self):
        return self.intrinsics.elevation_angles(self.depths.shape[0])


@dataclass(frozen=True)
class NoiseParams:
    """Multiplicative speckle plus additive Gaussian noise, seeded."""

    speckle_scale: float = 0.0
    additive_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.speckle_scale < 0 or self.additive_sigma < 0:
            raise ConfigError("noise scales must be non-negative")


# ---------------------------------------------------------------------------
# intersections


def ray_sphere_intersect(origin, dirs, center, radius):
    """Smallest positive hit range along each unit ray; inf on miss."""
    origin = np.asarray(origin, dtype=float)
    d = np.asarray(dirs, dtype=float)
    single = d.ndim == 1
    d = np.atleast_2d(d)
    oc = np.asarray(center, dtype=float) - origin
    t_ca = d @ oc
    d2 = oc @ oc - t_ca * t_ca
    disc = radius * radius - d2
    t = np.full(d.shape[0], np.inf)
    hit = disc >= 0.0
    if np.any(hit):
        sq = np.sqrt(disc[hit])
        near = t_ca[hit] - sq
        far = t_ca[hit] + sq
        best = np.where(near > _T_MIN, near, np.where(far > _T_MIN, far, np.inf))
        t[hit] = best
    return t[0] if single else t


def _sphere_normals(origin, dirs, t, scene):
    pts = origin + dirs * t[:, None]
    return (pts - scene.center) / scene.radius


def ray_mesh_intersect(origin, dirs, vertices, faces, chunk=1024):
    """First-hit ranges against a triangle soup (Moller-Trumbore); inf on miss.

    Returns (t, face_index); face_index is -1 on miss.
    """
    origin = np.asarray(origin, dtype=float)
    d = np.asarray(dirs, dtype=float)
    single = d.ndim == 1
    d = np.atleast_2d(d)
    v0 = vertices[faces[:, 0]]
    e1 = vertices[faces[:, 1]] - v0
    e2 = vertices[faces[:, 2]] - v0
    s = origin - v0  # (F, 3)
    t_out = np.full(d.shape[0], np.inf)
    f_out = np.full(d.shape[0], -1, dtype=int)
    for lo in range(0, d.shape[0], chunk):
        dc = d[lo : lo + chunk]  # (M, 3)
        h = np.einsum("mi,fij->mfj", dc, _levi(e2))  # cross(d, e2): (M, F, 3)
        a = np.einsum("fj,mfj->mf", e1, h)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = 1.0 / a
            u = f * np.einsum("fj,mfj->mf", s, h)
            q = np.cross(s, e1)  # (F, 3)
            v = f * np.einsum("mj,fj->mf", dc, q)
            t = f * np.einsum("fj,fj->f", e2, q)[None, :]
        ok = (
            (np.abs(a) > 1e-12)
            & (u >= -1e-12)
            & (v >= -1e-12)
            & (u + v <= 1.0 + 1e-12)
            & (t > _T_MIN)
        )
        t = np.where(ok, t, np.inf)
        best = np.argmin(t, axis=1)
        rows = np.arange(t.shape[0])
        tbest = t[rows, best]
        t_out[lo : lo + chunk] = tbest
        f_out[lo : lo + chunk] = np.where(np.isfinite(tbest), best, -1)
    if single:
        return t_out[0], f_out[0]
    return t_out, f_out


def _levi(e2):
    # Rows of the cross-product operator for each face edge e2, so that
    # cross(d, e2_f) = d @ _levi(e2)[f].
    f = e2.shape[0]
    m = np.zeros((f, 3, 3))
    m[:, 0, 1] = e2[:, 2]
    m[:, 0, 2] = -e2[:, 1]
    m[:, 1, 0] = -e2[:, 2]
    m[:, 1, 2] = e2[:, 0]
    m[:, 2, 0] = e2[:, 1]
    m[:, 2, 1] = -e2[:, 0]
    return -m  # cross(d, e2) = -cross(e2, d)


def ray_heightfield_intersect(origin, dirs, field, t_cap=np.inf):
    """First crossing of the bilinear surface; inf on miss.

    Walks the 2D cell grid (Amanatides-Woo) and solves the exact
    per-cell quadratic ``z(t) = h(x(t), y(t))``, so planar fields match
    the analytic ray-plane solution to floating-point accuracy.
    """
    t, _ = _heightfield_hits(origin, np.atleast_2d(np.asarray(dirs, dtype=float)), field, t_cap)
    return t[0] if np.asarray(dirs).ndim == 1 else t


def _heightfield_hits(origin, d, field, t_cap):
    origin = np.asarray(origin, dtype=float)
    h = field.heights
    nx, ny = h.shape
    cs = field.cell_size
    x0, y0 = field.origin
    x1 = x0 + (nx - 1) * cs
    y1 = y0 + (ny - 1) * cs
    m = d.shape[0]

    t_lo = np.zeros(m)
    t_hi = np.full(m, min(t_cap, 1e30))

    # Clip to the grid's xy footprint and to the z band of the surface.
    for axis, (lo, hi) in ((0, (x0, x1)), (1, (y0, y1))):
        o, dd = origin[axis], d[:, axis]
        with np.errstate(divide="ignore"):
            ta = (lo - o) / dd
            tb = (hi - o) / dd
        par = dd == 0.0
        inside = (o >= lo) & (o <= hi)
        tmin = np.where(par, np.where(inside, 0.0, np.inf), np.minimum(ta, tb))
        tmax = np.where(par, np.where(inside, 1e30, -np.inf), np.maximum(ta, tb))
        t_lo = np.maximum(t_lo, tmin)
        t_hi = np.minimum(t_hi, tmax)
    hmin, hmax = h.min(), h.max()
    oz, dz = origin[2], d[:, 2]
    with np.errstate(divide="ignore"):
        up = dz > 0
        down = dz < 0
        t_hi = np.where(up, np.minimum(t_hi, (hmax - oz) / np.where(up, dz, 1.0)), t_hi)
        t_hi = np.where(down, np.minimum(t_hi, (hmin - oz) / np.where(down, dz, 1.0)), t_hi)
        level = (dz == 0.0) & ((oz < hmin) | (oz > hmax))
        t_hi = np.where(level, -np.inf, t_hi)

    t_hit = np.full(m, np.inf)
    n_hit = np.zeros((m, 3))
    active = t_hi > t_lo
    if not np.any(active):
        return t_hit, n_hit

    t_cur = np.maximum(t_lo, 0.0)
    # Next crossings of vertical/horizontal lattice lines.
    t_next_line = np.empty((m, 2))
    t_delta = np.empty((m, 2))
    for axis, g0 in ((0, x0), (1, y0)):
        o, dd = origin[axis], d[:, axis]
        pos = o + np.where(active, t_cur, 0.0) * dd
        idx = np.floor((pos - g0) / cs)
        with np.errstate(divide="ignore", invalid="ignore"):
            step_to = np.where(dd > 0, (g0 + (idx + 1) * cs - o) / dd, (g0 + idx * cs - o) / dd)
            t_delta[:, axis] = np.abs(cs / dd)
        step_to = np.where(dd == 0.0, np.inf, step_to)
        # Guard against landing exactly on a line: push to the next one.
        step_to = np.where(step_to <= t_cur, step_to + t_delta[:, axis], step_to)
        t_next_line[:, axis] = np.where(dd == 0.0, np.inf, step_to)
    t_delta[~np.isfinite(t_delta)] = np.inf

    max_steps = 2 * (nx + ny) + 8
    for _ in range(max_steps):
        idxs = np.nonzero(active)[0]
        if idxs.size == 0:
            break
        seg_end = np.minimum(np.min(t_next_line[idxs], axis=1), t_hi[idxs])
        seg_start = t_cur[idxs]
        mid = 0.5 * (seg_start + seg_end)
        px = origin[0] + mid * d[idxs, 0]
        py = origin[1] + mid * d[idxs, 1]
        ix = np.clip(np.floor((px - x0) / cs).astype(int), 0, nx - 2)
        iy = np.clip(np.floor((py - y0) / cs).astype(int), 0, ny - 2)

        h00 = h[ix, iy]
        c1 = h[ix + 1, iy] - h00
        c2 = h[ix, iy + 1] - h00
        c3 = h[ix + 1, iy + 1] - h[ix + 1, iy] - h[ix, iy + 1] + h00
        ax_ = (origin[0] - (x0 + ix * cs)) / cs
        bx = d[idxs, 0] / cs
        ay = (origin[1] - (y0 + iy * cs)) / cs
        by = d[idxs, 1] / cs
        # f(t) = oz + t dz - h(u(t), v(t)) with u = ax + t bx, v = ay + t by
        qa = -c3 * bx * by
        qb = d[idxs, 2] - c1 * bx - c2 * by - c3 * (ax_ * by + ay * bx)
        qc = origin[2] - h00 - c1 * ax_ - c2 * ay - c3 * ax_ * ay

        root = np.full(idxs.size, np.inf)
        lin = np.abs(qa) < 1e-14
        with np.errstate(divide="ignore", invalid="ignore"):
            r_lin = -qc / qb
        ok_lin = lin & (np.abs(qb) > 0.0)
        root = np.where(ok_lin, r_lin, root)
        quad = ~lin
        disc = qb * qb - 4.0 * qa * qc
        okq = quad & (disc >= 0.0)
        if np.any(okq):
            sq = np.sqrt(np.where(okq, disc, 0.0))
            qh = -0.5 * (qb + np.where(qb >= 0, sq, -sq))
            with np.errstate(divide="ignore", invalid="ignore"):
                r1 = np.where(okq, qh / qa, np.inf)
                r2 = np.where(okq & (qh != 0.0), qc / qh, np.inf)
            tol = 1e-9 * (1.0 + np.abs(seg_end))
            for r in (r1, r2):
                good = okq & (r >= seg_start - tol) & (r <= seg_end + tol) & (r > _T_MIN)
                root = np.where(good & (r < root), r, root)
        tol = 1e-9 * (1.0 + np.abs(seg_end))
        ok = (root >= seg_start - tol) & (root <= seg_end + tol) & (root > _T_MIN)
        if np.any(ok):
            hit_rows = idxs[ok]
            tr = root[ok]
            t_hit[hit_rows] = tr
            u = ax_[ok] + tr * bx[ok]
            v = ay[ok] + tr * by[ok]
            dhx = (c1[ok] + c3[ok] * v) / cs
            dhy = (c2[ok] + c3[ok] * u) / cs
            n = np.stack([-dhx, -dhy, np.ones_like(dhx)], axis=-1)
            n /= np.linalg.norm(n, axis=-1, keepdims=True)
            n_hit[hit_rows] = n
            active[hit_rows] = False

        # Advance surviving rays to the next cell.
        idxs = np.nonzero(active)[0]
        if idxs.size == 0:
            break
        seg_end = np.minimum(np.min(t_next_line[idxs], axis=1), t_hi[idxs])
        t_cur[idxs] = seg_end
        for axis in (0, 1):
            bump = t_next_line[idxs, axis] <= seg_end
            t_next_line[idxs[bump], axis] += t_delta[idxs[bump], axis]
        done = t_cur[idxs] >= t_hi[idxs]
        active[idxs[done]] = False
    return t_hit, n_hit


def _intersect_scene(scene, origin, dirs, t_cap):
    """First-hit ranges and normals for all supported scene variants."""
    if isinstance(scene, EmptyScene):
        return np.full(dirs.shape[0], np.inf), np.zeros_like(dirs)
    if isinstance(scene, SphereScene):
        t = ray_sphere_intersect(origin, dirs, scene.center, scene.radius)
        n = np.zeros_like(dirs)
        hit = np.isfinite(t)
        if np.any(hit):
            n[hit] = _sphere_normals(origin, dirs[hit], t[hit], scene)
        return t, n
    if isinstance(scene, HeightfieldScene):
        return _heightfield_hits(origin, dirs, scene, t_cap)
    if isinstance(scene, MeshScene):
        t, fi = ray_mesh_intersect(origin, dirs, scene.vertices, scene.faces)
        n = np.zeros_like(dirs)
        hit = np.isfinite(t)
        if np.any(hit):
            v0 = scene.vertices[scene.faces[fi[hit], 0]]
            e1 = scene.vertices[scene.faces[fi[hit], 1]] - v0
            e2 = scene.vertices[scene.faces[fi[hit], 2]] - v0
            fn = np.cross(e1, e2)
            fn /= np.linalg.norm(fn, axis=-1, keepdims=True)
            n[hit] = fn
        return t, n
    raise ConfigError(f"unsupported scene type {type(scene).__name__}")


# ---------------------------------------------------------------------------
# rendering


def _fan_directions(phis, thetas):
    """Unit directions for every (phi, theta) pair, shaped (len(phis)*len(thetas), 3)."""
    ph, th = np.meshgrid(phis, thetas, indexing="ij")
    return spherical_to_euclidean(1.0, th, ph).reshape(-1, 3)


def raycast(scene, sensor_pose, intrinsics, rays_per_elevation=None, spreading_loss=False):
    """Render one view: (AcousticImage, FrontDepthMap for the same pose).

    ``rays_per_elevation`` is the number of elevation samples per
    azimuth column used for the intensity integral (default
    4 * elevation_planes; must be at least elevation_planes).
    """
    k = intrinsics
    n_el = k.elevation_planes
    s = 4 * n_el if rays_per_elevation is None else int(rays_per_elevation)
    if s < n_el:
        raise ConfigError("rays_per_elevation must be at least the elevation plane count")

    thetas = k.azimuth_centers()
    img_dirs = _fan_directions(np.linspace(k.phi_min, k.phi_max, s), thetas)
    depth_dirs = _fan_directions(k.elevation_angles(), thetas)
    dirs = np.concatenate([img_dirs, depth_dirs], axis=0)

    world_dirs = dirs @ sensor_pose.rotation.T
    origin = sensor_pose.translation
    bin_w = (k.r_max - k.r_min) / (k.range_bins - 1)
    t, normals = _intersect_scene(scene, origin, world_dirs, t_cap=k.r_max + 2 * bin_w)

    n_img = img_dirs.shape[0]
    t_img = t[:n_img]
    hit = np.isfinite(t_img)
    cos_inc = np.maximum(0.0, -np.einsum("ij,ij->i", world_dirs[:n_img], normals[:n_img]))
    intensity = scene.reflectivity * cos_inc
    if spreading_loss:
        with np.errstate(divide="ignore"):
            intensity = intensity / np.maximum(t_img, _T_MIN) ** 2
    intensity = np.where(hit, intensity, 0.0)

    cols = np.tile(np.arange(k.azimuth_bins), s)
    rows = (t_img - k.r_min) / (k.r_max - k.r_min) * (k.range_bins - 1)
    img = np.zeros((k.range_bins, k.azimuth_bins))
    i0 = np.floor(np.where(hit, rows, -2.0)).astype(int)
    frac = np.where(hit, rows - i0, 0.0)
    flat = img.ravel()
    for idx, w in ((i0, 1.0 - frac), (i0 + 1, frac)):
        ok = hit & (idx >= 0) & (idx < k.range_bins)
        np.add.at(flat, idx[ok] * k.azimuth_bins + cols[ok], intensity[ok] * w[ok])

    depth = np.where(np.isfinite(t[n_img:]), t[n_img:], k.r_max)
    depth = np.clip(depth, k.r_min, k.r_max).reshape(n_el, k.azimuth_bins)
    return AcousticImage(img, k), FrontDepthMap(depth, k)


def add_noise(image, params):
    """Apply seeded speckle + additive noise; clamps at zero.

    Draw order (speckle field first, then additive field) is part of
    the determinism contract.
    """
    rng = np.random.default_rng(np.random.SeedSequence(params.seed & (2**63 - 1)))
    img = image.intensities
    g1 = rng.standard_normal(img.shape)
    g2 = rng.standard_normal(img.shape)
    out = img * (1.0 + params.speckle_scale * g1) + params.additive_sigma * g2
    return AcousticImage(np.maximum(out, 0.0), image.intrinsics)


# ---------------------------------------------------------------------------
# procedural scenes


def _rng_from(*keys):
    return np.random.default_rng(np.random.SeedSequence([int(k) & (2**63 - 1) for k in keys]))


def _smoothstep(t):
    return t * t * (3.0 - 2.0 * t)


def _value_noise(rng, cells, resolution):
    """One octave of smoothstep-interpolated lattice noise on [0, 1]^2."""
    lattice = rng.uniform(-1.0, 1.0, size=(cells + 1, cells + 1))
    u = np.linspace(0.0, cells, resolution)
    iu = np.minimum(u.astype(int), cells - 1)
    fu = _smoothstep(u - iu)
    a = lattice[iu][:, iu]
    b = lattice[iu + 1][:, iu]
    c = lattice[iu][:, iu + 1]
    d = lattice[iu + 1][:, iu + 1]
    wx = fu[:, None]
    wy = fu[None, :]
    return (a * (1 - wx) + b * wx) * (1 - wy) + (c * (1 - wx) + d * wx) * wy


def make_terrain(
    seed,
    octaves=4,
    amplitude=0.25,
    extent=8.0,
    resolution=97,
    base_cells=4,
    reflectivity=0.95,
    ridged=False,
):
    """Fractal value-noise heightfield (lacunarity 2, gain 0.5), centered on the origin.

    Heights scale linearly with ``amplitude``; the result is a pure
    function of the arguments.  ``ridged`` folds each octave into a
    crease pattern (1 - 2|n|), imitating the sharper relief of
    multifractal seabed generators.
    """
    if octaves < 1:
        raise ConfigError("octaves must be >= 1")
    if extent <= 0 or resolution < 2:
        raise ConfigError("extent must be positive and resolution >= 2")
    total = np.zeros((resolution, resolution))
    norm = 0.0
    for o in range(octaves):
        gain = 0.5**o
        layer = _value_noise(_rng_from(seed, o), base_cells * 2**o, resolution)
        if ridged:
            layer = 1.0 - 2.0 * np.abs(layer)
        total += gain * layer
        norm += gain
    heights = amplitude * total / norm
    cell = extent / (resolution - 1)
    return HeightfieldScene(
        origin=(-extent / 2.0, -extent / 2.0),
        cell_size=cell,
        heights=heights,
        reflectivity=reflectivity,
    )


def make_sphere_scene(seed, intrinsics, radius_range=(0.08, 0.2), reflectivity=1.0):
    """Sphere at a uniform random scope position, margin one radius from every bound."""
    k = intrinsics
    lo, hi = radius_range
    if not (0 < lo <= hi):
        raise ConfigError("radius_range must be positive and ordered")
    rng = _rng_from(seed)
    radius = rng.uniform(lo, hi)
    # The angular margin asin(radius/r) must fit inside both fans, which
    # bounds the range draw from below.
    half_fan = min((k.theta_max - k.theta_min) / 2.0, (k.phi_max - k.phi_min) / 2.0)
    r_lo = max(k.r_min + radius, radius / np.sin(0.999 * half_fan))
    r_hi = k.r_max - radius
    if r_lo >= r_hi:
        raise ConfigError("sonar scope is too small for the requested sphere radius")
    r_c = rng.uniform(r_lo, r_hi)
    ang = np.arcsin(min(radius / r_c, 1.0))
    th_lo, th_hi = k.theta_min + ang, k.theta_max - ang
    ph_lo, ph_hi = k.phi_min + ang, k.phi_max - ang
    if th_lo >= th_hi or ph_lo >= ph_hi:
        raise ConfigError("sonar scope is too small for the requested sphere radius")
    theta = rng.uniform(th_lo, th_hi)
    phi = rng.uniform(ph_lo, ph_hi)
    center = spherical_to_euclidean(r_c, theta, phi)
    return SphereScene(center=center, radius=radius, reflectivity=reflectivity)


# ---------------------------------------------------------------------------
# view generation


def child_seed(seed, index):
    """Derived 64-bit stream seed; stable across platforms."""
    ss = np.random.SeedSequence([int(seed) & (2**63 - 1), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def generate_views(scene, base_pose, roll_deltas, intrinsics, noise=None, rays_per_elevation=None):
    """Render a reference view plus one source view per roll offset.

    Source j is rendered at ``base_pose`` composed with a roll of
    ``roll_deltas[j]`` about the sensor x-axis.  Returns
    (ref_image, source_images, gt_depth_for_ref, relative_poses) where
    ``relative_poses[j]`` maps reference-frame points into source-frame
    coordinates.
    """
    ref, gt = raycast(scene, base_pose, intrinsics, rays_per_elevation)
    sources = []
    rel_poses = []
    for j, delta in enumerate(roll_deltas):
        pose_j = base_pose.compose(Pose.roll(delta))
        img_j, _ = raycast(scene, pose_j, intrinsics, rays_per_elevation)
        if noise is not None:
            img_j = add_noise(img_j, NoiseParams(noise.speckle_scale, noise.additive_sigma, child_seed(noise.seed, j + 1)))
        sources.append(img_j)
        rel_poses.append(pose_j.inverse().compose(base_pose))
    if noise is not None:
        ref = add_noise(ref, NoiseParams(noise.speckle_scale, noise.additive_sigma, child_seed(noise.seed, 0)))
    return ref, sources, gt, rel_poses


def generate_pair(scene, base_pose, roll_delta, intrinsics, noise=None, rays_per_elevation=None):
    """Two-view convenience wrapper: (ref, src, gt, T_ref_to_src)."""
    ref, srcs, gt, poses = generate_views(
        scene, base_pose, [roll_delta], intrinsics, noise, rays_per_elevation
    )
    return ref, srcs[0], gt, poses[0]
