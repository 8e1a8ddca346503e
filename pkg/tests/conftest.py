import numpy as np
import pytest

from sonarsweep import SonarIntrinsics


@pytest.fixture
def k_small():
    """Tiny intrinsics with odd azimuth/elevation counts so the axes have
    exact center bins."""
    return SonarIntrinsics(
        r_min=0.5,
        r_max=3.0,
        theta_min=-np.deg2rad(14.0),
        theta_max=np.deg2rad(14.0),
        phi_min=-np.deg2rad(7.0),
        phi_max=np.deg2rad(7.0),
        range_bins=64,
        azimuth_bins=9,
        elevation_planes=5,
    )


@pytest.fixture
def k_default():
    return SonarIntrinsics.default()
