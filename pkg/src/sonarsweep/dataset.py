"""Dataset generation and the on-disk manifest/config/scene formats.

A dataset is a directory of TensorFiles plus a TOML manifest: per
sample a reference image, one or more source images with their
reference-to-source poses (unit quaternion + translation), the
ground-truth front depth of the reference view, and its binary mask.
Everything is a deterministic function of the config, so regenerating
a dataset reproduces it byte for byte.

Scene families:

* ``terrain``  - one fractal heightfield per dataset (seeded from the
  config), viewed from per-sample random positions pitched down at the
  seabed.
* ``sphere``   - a fresh random sphere per sample inside the scope,
  sensor at the origin.
* ``mesh``     - a random plate (two triangles) per sample, oriented
  toward the sensor.

Sources are rendered at roll offsets about the sensor x-axis: one
source at +roll_delta, a second (if requested) at -roll_delta, then
alternating multiples.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ConfigError, DataConsistencyError
from .formats import load_toml, read_tensor, write_tensor, write_toml
from .frontdepth import make_mask
from .geometry import Pose, SonarIntrinsics, spherical_to_euclidean
from .simulator import (
    EmptyScene,
    HeightfieldScene,
    MeshScene,
    NoiseParams,
    SphereScene,
    child_seed,
    generate_views,
    make_sphere_scene,
    make_terrain,
    _rng_from,
)

FAMILIES = ("terrain", "sphere", "mesh")
MANIFEST_NAME = "manifest.toml"


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class DatasetConfig:
    family: str
    count: int
    seed: int
    intrinsics: SonarIntrinsics
    roll_delta: float = np.deg2rad(7.0)
    n_sources: int = 1
    noise: NoiseParams = field(default_factory=NoiseParams)
    rays_per_elevation: int | None = None
    terrain: dict = field(default_factory=dict)
    sphere: dict = field(default_factory=dict)
    mesh: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown scene family {self.family!r}; expected one of {FAMILIES}")
        if self.count < 0:
            raise ConfigError("count must be non-negative")
        if self.n_sources < 1:
            raise ConfigError("n_sources must be >= 1")
        if self.roll_delta == 0.0:
            raise ConfigError("roll_delta must be nonzero for stereo datasets")


def intrinsics_from_table(tbl):
    base = SonarIntrinsics.default()
    def ang(key, default):
        if key in tbl:
            return float(tbl[key])
        if key + "_deg" in tbl:
            return float(np.deg2rad(tbl[key + "_deg"]))
        return default
    return SonarIntrinsics(
        r_min=float(tbl.get("r_min", base.r_min)),
        r_max=float(tbl.get("r_max", base.r_max)),
        theta_min=ang("theta_min", base.theta_min),
        theta_max=ang("theta_max", base.theta_max),
        phi_min=ang("phi_min", base.phi_min),
        phi_max=ang("phi_max", base.phi_max),
        range_bins=int(tbl.get("range_bins", base.range_bins)),
        azimuth_bins=int(tbl.get("azimuth_bins", base.azimuth_bins)),
        elevation_planes=int(tbl.get("elevation_planes", base.elevation_planes)),
    )


def intrinsics_to_table(k):
    return {
        "r_min": k.r_min,
        "r_max": k.r_max,
        "theta_min": k.theta_min,
        "theta_max": k.theta_max,
        "phi_min": k.phi_min,
        "phi_max": k.phi_max,
        "range_bins": k.range_bins,
        "azimuth_bins": k.azimuth_bins,
        "elevation_planes": k.elevation_planes,
    }


def config_from_table(tbl):
    try:
        family = tbl["family"]
        count = int(tbl["count"])
        seed = int(tbl["seed"])
    except KeyError as exc:
        raise ConfigError(f"config is missing required key {exc}") from exc
    if "roll_delta_deg" in tbl:
        roll = float(np.deg2rad(tbl["roll_delta_deg"]))
    else:
        roll = float(tbl.get("roll_delta", np.deg2rad(7.0)))
    noise_tbl = tbl.get("noise", {})
    noise = NoiseParams(
        speckle_scale=float(noise_tbl.get("speckle_scale", 0.0)),
        additive_sigma=float(noise_tbl.get("additive_sigma", 0.0)),
        seed=int(noise_tbl.get("seed", seed)),
    )
    return DatasetConfig(
        family=family,
        count=count,
        seed=seed,
        intrinsics=intrinsics_from_table(tbl.get("intrinsics", {})),
        roll_delta=roll,
        n_sources=int(tbl.get("n_sources", 1)),
        noise=noise,
        rays_per_elevation=(int(tbl["rays_per_elevation"]) if "rays_per_elevation" in tbl else None),
        terrain=dict(tbl.get("terrain", {})),
        sphere=dict(tbl.get("sphere", {})),
        mesh=dict(tbl.get("mesh", {})),
    )


def load_config(path):
    return config_from_table(load_toml(path))


# ---------------------------------------------------------------------------
# scene description files


def scene_to_table(scene):
    if isinstance(scene, SphereScene):
        return {
            "variant": "sphere",
            "reflectivity": scene.reflectivity,
            "sphere": {"center": list(scene.center), "radius": scene.radius},
        }
    if isinstance(scene, HeightfieldScene):
        return {
            "variant": "heightfield",
            "reflectivity": scene.reflectivity,
            "heightfield": {
                "origin": list(scene.origin),
                "cell_size": scene.cell_size,
                "heights": [list(row) for row in scene.heights],
            },
        }
    if isinstance(scene, MeshScene):
        return {
            "variant": "mesh",
            "reflectivity": scene.reflectivity,
            "mesh": {
                "vertices": [list(v) for v in scene.vertices],
                "faces": [list(int(i) for i in f) for f in scene.faces],
            },
        }
    if isinstance(scene, EmptyScene):
        return {"variant": "empty", "reflectivity": scene.reflectivity}
    raise ConfigError(f"cannot serialize scene type {type(scene).__name__}")


def scene_from_table(tbl):
    """Build a scene from a description table.

    Explicit variants carry their geometry; ``variant = "terrain"``
    carries generator parameters (seed, octaves, amplitude, extent) and
    is regenerated deterministically.
    """
    try:
        variant = tbl["variant"]
    except KeyError as exc:
        raise ConfigError("scene description is missing 'variant'") from exc
    refl = float(tbl.get("reflectivity", 1.0))
    if variant == "empty":
        return EmptyScene(reflectivity=refl)
    if variant == "sphere":
        sub = tbl.get("sphere", {})
        return SphereScene(center=sub["center"], radius=float(sub["radius"]), reflectivity=refl)
    if variant == "heightfield":
        sub = tbl.get("heightfield", {})
        return HeightfieldScene(
            origin=sub["origin"],
            cell_size=float(sub["cell_size"]),
            heights=np.asarray(sub["heights"], dtype=float),
            reflectivity=refl,
        )
    if variant == "mesh":
        sub = tbl.get("mesh", {})
        return MeshScene(vertices=sub["vertices"], faces=sub["faces"], reflectivity=refl)
    if variant == "terrain":
        sub = tbl.get("terrain", {})
        return make_terrain(
            seed=int(sub.get("seed", 0)),
            octaves=int(sub.get("octaves", 4)),
            amplitude=float(sub.get("amplitude", 0.25)),
            extent=float(sub.get("extent", 8.0)),
            resolution=int(sub.get("resolution", 97)),
            base_cells=int(sub.get("base_cells", 4)),
            reflectivity=refl,
            ridged=bool(sub.get("ridged", False)),
        )
    raise ConfigError(f"unknown scene variant {variant!r}")


def save_scene(path, scene):
    write_toml(path, scene_to_table(scene))


def load_scene(path):
    return scene_from_table(load_toml(path))


# ---------------------------------------------------------------------------
# per-family sampling


def _terrain_scene(config):
    t = config.terrain
    return make_terrain(
        seed=int(t.get("seed", config.seed)),
        octaves=int(t.get("octaves", 4)),
        amplitude=float(t.get("amplitude", 0.25)),
        extent=float(t.get("extent", 8.0)),
        resolution=int(t.get("resolution", 97)),
        base_cells=int(t.get("base_cells", 4)),
        reflectivity=float(t.get("reflectivity", 0.95)),
        ridged=bool(t.get("ridged", False)),
    )


def _heightfield_height_at(scene, x, y):
    h = scene.heights
    cs = scene.cell_size
    ix = int(np.clip((x - scene.origin[0]) / cs, 0, h.shape[0] - 2))
    iy = int(np.clip((y - scene.origin[1]) / cs, 0, h.shape[1] - 2))
    return float(h[ix : ix + 2, iy : iy + 2].mean())


def _terrain_pose(scene, config, rng):
    """Random viewpoint above the terrain, pitched down at the seabed."""
    t = config.terrain
    extent = float(t.get("extent", 8.0))
    margin = float(t.get("pose_margin", 2.6))
    half = max(extent / 2.0 - margin, 0.2)
    x = rng.uniform(-half, half)
    y = rng.uniform(-half, half)
    yaw = rng.uniform(0.0, 2.0 * np.pi)
    pitch = rng.uniform(
        np.deg2rad(float(t.get("pitch_min_deg", 45.0))),
        np.deg2rad(float(t.get("pitch_max_deg", 60.0))),
    )
    r_center = rng.uniform(float(t.get("r_center_min", 1.25)), float(t.get("r_center_max", 1.85)))
    z = _heightfield_height_at(scene, x, y) + r_center * np.sin(pitch)
    rot = Pose.yaw(yaw).compose(Pose.pitch(pitch)).rotation
    return Pose(rot, (x, y, z))


def _sphere_sample(config, sample_seed):
    s = config.sphere
    radius_range = (float(s.get("radius_min", 0.08)), float(s.get("radius_max", 0.2)))
    scene = make_sphere_scene(
        sample_seed, config.intrinsics, radius_range, reflectivity=float(s.get("reflectivity", 1.0))
    )
    return scene, Pose.identity()


def _mesh_sample(config, sample_seed):
    """Random rectangular plate inside the scope, facing the sensor."""
    k = config.intrinsics
    m = config.mesh
    rng = _rng_from(sample_seed)
    half = 0.5 * rng.uniform(float(m.get("size_min", 0.4)), float(m.get("size_max", 0.9)))
    r_c = rng.uniform(k.r_min + 0.3, k.r_max - 0.3)
    theta = rng.uniform(0.6 * k.theta_min, 0.6 * k.theta_max)
    phi = rng.uniform(0.6 * k.phi_min, 0.6 * k.phi_max)
    center = spherical_to_euclidean(r_c, theta, phi)
    tilt = rng.uniform(-0.35, 0.35, size=2)
    normal = -center / np.linalg.norm(center)
    normal = Pose.yaw(tilt[0]).compose(Pose.pitch(tilt[1])).apply(normal)
    u = np.cross(normal, [0.0, 0.0, 1.0])
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    verts = np.array(
        [center - half * u - half * v, center + half * u - half * v,
         center + half * u + half * v, center - half * u + half * v]
    )
    # wind both faces so the normal points back at the sensor
    faces = [[0, 1, 2], [0, 2, 3]]
    if np.dot(np.cross(verts[1] - verts[0], verts[2] - verts[0]), center) > 0:
        faces = [[0, 2, 1], [0, 3, 2]]
    return MeshScene(verts, faces, reflectivity=float(m.get("reflectivity", 0.95))), Pose.identity()


def sample_scene_and_pose(config, index, terrain_scene=None):
    """Deterministic (scene, base_pose) for sample ``index``."""
    sample_seed = child_seed(config.seed, index)
    if config.family == "terrain":
        scene = terrain_scene if terrain_scene is not None else _terrain_scene(config)
        return scene, _terrain_pose(scene, config, _rng_from(sample_seed)), sample_seed
    if config.family == "sphere":
        scene, pose = _sphere_sample(config, sample_seed)
        return scene, pose, sample_seed
    scene, pose = _mesh_sample(config, sample_seed)
    return scene, pose, sample_seed


def roll_offsets(roll_delta, n_sources):
    """Source roll offsets: +d, -d, +2d, -2d, ..."""
    out = []
    for j in range(n_sources):
        k = j // 2 + 1
        out.append(roll_delta * k if j % 2 == 0 else -roll_delta * k)
    return out


# ---------------------------------------------------------------------------
# generation and manifest


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    ref_path: str
    gt_path: str
    mask_path: str
    source_paths: tuple
    rel_poses: tuple  # Pose per source, reference -> source
    seed: int


@dataclass(frozen=True)
class Manifest:
    generator: str
    family: str
    seed: int
    intrinsics: SonarIntrinsics
    noise: NoiseParams
    roll_delta: float
    samples: tuple
    root: str = "."

    def sample_file(self, rel):
        return os.path.join(self.root, rel)


def generate_dataset(config, out_dir):
    """Render the dataset into ``out_dir`` and return its manifest."""
    os.makedirs(out_dir, exist_ok=True)
    k = config.intrinsics
    terrain_scene = _terrain_scene(config) if config.family == "terrain" else None
    offsets = roll_offsets(config.roll_delta, config.n_sources)
    records = []
    for i in range(config.count):
        scene, base_pose, sample_seed = sample_scene_and_pose(config, i, terrain_scene)
        noise = NoiseParams(
            config.noise.speckle_scale,
            config.noise.additive_sigma,
            child_seed(config.noise.seed, i),
        )
        ref, sources, gt, rel_poses = generate_views(
            scene, base_pose, offsets, k, noise, config.rays_per_elevation
        )
        sid = f"{i:06d}"
        names = {
            "ref": f"{sid}_ref.snr",
            "gt": f"{sid}_gt.snr",
            "mask": f"{sid}_mask.snr",
        }
        write_tensor(os.path.join(out_dir, names["ref"]), ref.intensities, ("range", "azimuth"))
        write_tensor(os.path.join(out_dir, names["gt"]), gt.depths, ("elevation", "azimuth"))
        mask = make_mask(gt)
        write_tensor(os.path.join(out_dir, names["mask"]), mask.astype(np.float32), ("elevation", "azimuth"))
        src_names = []
        for j, img in enumerate(sources):
            name = f"{sid}_src{j}.snr"
            write_tensor(os.path.join(out_dir, name), img.intensities, ("range", "azimuth"))
            src_names.append(name)
        records.append(
            SampleRecord(
                sample_id=sid,
                ref_path=names["ref"],
                gt_path=names["gt"],
                mask_path=names["mask"],
                source_paths=tuple(src_names),
                rel_poses=tuple(rel_poses),
                seed=sample_seed,
            )
        )
    manifest = Manifest(
        generator=f"sonarsweep {__version__}",
        family=config.family,
        seed=config.seed,
        intrinsics=k,
        noise=config.noise,
        roll_delta=config.roll_delta,
        samples=tuple(records),
        root=out_dir,
    )
    write_manifest(os.path.join(out_dir, MANIFEST_NAME), manifest)
    return manifest


def write_manifest(path, manifest):
    samples = []
    for rec in manifest.samples:
        sources = []
        for p, pose in zip(rec.source_paths, rec.rel_poses):
            q = pose.to_quaternion()
            sources.append(
                {
                    "path": p,
                    "quaternion": [float(v) for v in q],
                    "translation": [float(v) for v in pose.translation],
                }
            )
        samples.append(
            {
                "id": rec.sample_id,
                "ref": rec.ref_path,
                "gt": rec.gt_path,
                "mask": rec.mask_path,
                "seed": rec.seed,
                "sources": sources,
            }
        )
    table = {
        "generator": manifest.generator,
        "family": manifest.family,
        "seed": manifest.seed,
        "roll_delta": manifest.roll_delta,
        "intrinsics": intrinsics_to_table(manifest.intrinsics),
        "noise": {
            "speckle_scale": manifest.noise.speckle_scale,
            "additive_sigma": manifest.noise.additive_sigma,
            "seed": manifest.noise.seed,
        },
        "samples": samples,
    }
    write_toml(path, table)


def load_manifest(path):
    tbl = load_toml(path)
    root = os.path.dirname(os.fspath(path)) or "."
    k = intrinsics_from_table(tbl.get("intrinsics", {}))
    noise_tbl = tbl.get("noise", {})
    records = []
    for s in tbl.get("samples", []):
        poses = tuple(
            Pose.from_quaternion(src["quaternion"], src["translation"]) for src in s["sources"]
        )
        q_norms = [np.linalg.norm(src["quaternion"]) for src in s["sources"]]
        if any(abs(n - 1.0) > 1e-9 for n in q_norms):
            raise DataConsistencyError(f"{path}: non-unit quaternion in sample {s['id']}")
        records.append(
            SampleRecord(
                sample_id=s["id"],
                ref_path=s["ref"],
                gt_path=s["gt"],
                mask_path=s["mask"],
                source_paths=tuple(src["path"] for src in s["sources"]),
                rel_poses=poses,
                seed=int(s.get("seed", 0)),
            )
        )
    manifest = Manifest(
        generator=tbl.get("generator", "unknown"),
        family=tbl.get("family", "unknown"),
        seed=int(tbl.get("seed", 0)),
        intrinsics=k,
        noise=NoiseParams(
            speckle_scale=float(noise_tbl.get("speckle_scale", 0.0)),
            additive_sigma=float(noise_tbl.get("additive_sigma", 0.0)),
            seed=int(noise_tbl.get("seed", 0)),
        ),
        roll_delta=float(tbl.get("roll_delta", 0.0)),
        samples=tuple(records),
        root=root,
    )
    for rec in manifest.samples:
        for rel in (rec.ref_path, rec.gt_path, rec.mask_path, *rec.source_paths):
            if not os.path.exists(manifest.sample_file(rel)):
                raise DataConsistencyError(f"{path}: missing referenced file {rel}")
    return manifest


def load_sample(manifest, record):
    """Load (ref_image, source_images, gt_depth, mask) arrays for one sample."""
    from .simulator import AcousticImage, FrontDepthMap

    k = manifest.intrinsics
    ref, _ = read_tensor(manifest.sample_file(record.ref_path))
    gt, _ = read_tensor(manifest.sample_file(record.gt_path))
    mask, _ = read_tensor(manifest.sample_file(record.mask_path))
    sources = []
    for p in record.source_paths:
        arr, _ = read_tensor(manifest.sample_file(p))
        sources.append(AcousticImage(arr.astype(float), k))
    return (
        AcousticImage(ref.astype(float), k),
        sources,
        FrontDepthMap(gt.astype(float), k),
        mask.astype(bool),
    )
