import math

import pytest

from hrsim import SimConfig


@pytest.fixture
def small_config():
    """Cheap configuration for unit tests: tiny clouds, short cycles."""
    return SimConfig(
        n_a=16, n_b=16, mu_a=0.0, mu_b=0.0, t_min_steps=10,
        lattice_spacing=1.0, spatial_extent=40.0,
        detector_1_pos=(-4.0, 0.0, 0.0), detector_2_pos=(4.0, 0.0, 0.0),
        coincidence_radius=2.0, randers_drift=(0.0, 0.0, 0.0),
        tau_ticks=1, seed=1234, trials=500,
    )


@pytest.fixture
def epr_config(small_config):
    """Source-at-origin configuration for correlation experiments."""
    return small_config.with_(n_a=32, n_b=32, t_min_steps=16,
                              coincidence_radius=4.0, trials=4000)


CHSH_ANGLES = (0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)
