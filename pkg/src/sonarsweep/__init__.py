"""sonarsweep: dense 3D front-depth reconstruction from 2D forward-looking
sonar images via elevation plane sweeping, plus a synthetic acoustic-image
simulator for end-to-end validation."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataConsistencyError,
    DegeneratePointError,
    FileFormatError,
    InvalidSceneError,
    SonarSweepError,
)
from .geometry import (
    Pose,
    SonarIntrinsics,
    euclidean_to_spherical,
    image_to_grid,
    in_scope,
    project,
    spherical_to_euclidean,
    transform_point,
)
from .simulator import (
    AcousticImage,
    EmptyScene,
    FrontDepthMap,
    HeightfieldScene,
    MeshScene,
    NoiseParams,
    SphereScene,
    add_noise,
    generate_pair,
    generate_views,
    make_sphere_scene,
    make_terrain,
    ray_heightfield_intersect,
    ray_mesh_intersect,
    ray_sphere_intersect,
    raycast,
)
from .planesweep import (
    CostVolume,
    FeatureImage,
    FeatureVolume,
    aggregate_variance,
    build_volume,
    elevation_plane_angles,
    extract_features,
    warp_to_plane,
)
from .regularize import ScoreVolume, score_volume, smooth_volume, upsample_volume
from .frontdepth import (
    bin_center_depths,
    clamp_gt,
    hard_argmax_depth,
    make_mask,
    masked_l1_loss,
    soft_argmax_depth,
)
from .metrics import (
    PointCloud,
    chamfer_bruteforce,
    chamfer_fast,
    depth_map_to_point_cloud,
    mae,
)
from .occupancy import InverseSensorModel, OccupancyGrid, extract_surface, integrate_view
from .pipeline import ReconstructionParams, ReconstructionResult, reconstruct
