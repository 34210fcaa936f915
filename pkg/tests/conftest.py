import numpy as np
import pytest

from ris_pricing.channels import ChannelSet
from ris_pricing.scenario import Scenario
from ris_pricing.util import complex_normal


def make_scenario(**overrides) -> Scenario:
    """Small valid scenario with direct keyword overrides (linear units)."""
    defaults = dict(
        num_antennas=2,
        num_users=2,
        num_ris=2,
        elements_per_ris=(2, 2),
        power_budget_w=1.0,
        noise_power_w=1.0,
        cost_weight=1.0,
        bs_position=(0.0, 0.0),
        ris_positions=((10.0, 5.0), (10.0, -5.0)),
        user_cluster_center=(20.0, 0.0),
        user_cluster_radius=5.0,
        price_cap=0.1,
    )
    defaults.update(overrides)
    if "ris_positions" not in overrides and "num_ris" in overrides:
        s = overrides["num_ris"]
        defaults["ris_positions"] = tuple((10.0, float(3 * i)) for i in range(s))
    if "elements_per_ris" not in overrides and "num_ris" in overrides:
        defaults["elements_per_ris"] = (2,) * overrides["num_ris"]
    return Scenario(**defaults)


def make_channels(scenario: Scenario, seed: int, scale: float = 1.0) -> ChannelSet:
    """Unstructured random channels (no path loss) for unit tests."""
    rng = np.random.default_rng(seed)
    m, k, l = scenario.num_antennas, scenario.num_users, scenario.total_elements
    return ChannelSet(
        h_direct=scale * complex_normal(rng, k, m),
        bs_ris=scale * complex_normal(rng, l, m),
        ris_user=scale * complex_normal(rng, k, l),
    )


@pytest.fixture
def tiny_scenario() -> Scenario:
    return make_scenario()
