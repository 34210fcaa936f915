import json

import numpy as np
import pytest

from ris_pricing.scenario import (ConfigError, Scenario, ValidationError,
                                  apply_overrides, build_geometry, load_scenario,
                                  place_diamond, sample_users, serialize_scenario)
from ris_pricing.util import substream, DOMAIN_USERS


def test_dbm_conversion():
    scn = load_scenario('{"power_budget_dbm": 10}')
    assert scn.power_budget_w == pytest.approx(0.01, rel=1e-12)


def test_defaults_applied():
    scn = load_scenario("{}")
    assert scn.cost_weight == 1.0
    assert scn.noise_power_w == pytest.approx(1e-11, rel=1e-9)  # -80 dBm
    assert scn.elements_per_ris == (20,) * 5
    assert scn.log_base == "natural"
    assert scn.ris_positions[4] == (50.0, 0.0)


def test_zero_users_rejected():
    with pytest.raises(ValidationError):
        load_scenario('{"num_users": 0}')


def test_unknown_field_rejected():
    with pytest.raises(ConfigError, match="not_a_field"):
        load_scenario('{"not_a_field": 3}')


def test_bad_schema_version():
    with pytest.raises(ConfigError, match="schema_version"):
        load_scenario('{"schema_version": 99}')


def test_elements_length_mismatch():
    with pytest.raises(ValidationError):
        load_scenario('{"num_ris": 5, "elements_per_ris": [4, 4]}')


def test_non_json_config():
    with pytest.raises(ConfigError):
        load_scenario("power = 10")


def test_place_diamond_positions():
    pos = place_diamond((50.0, 0.0))
    assert pos[4] == (50.0, 0.0)  # center RIS at the intersection
    assert pos[0] == (50.0, 25.0)  # top
    assert place_diamond((12.5, 0.0))[3] == (25.0, 0.0)  # right vertex


def test_place_diamond_diagonals():
    pos = np.array(place_diamond((7.0, -3.0)))
    assert np.linalg.norm(pos[0] - pos[2]) == pytest.approx(50.0)  # vertical
    assert np.linalg.norm(pos[1] - pos[3]) == pytest.approx(25.0)  # horizontal


def test_roundtrip_identity():
    scn = load_scenario(json.dumps({
        "power_budget_dbm": 17.0,
        "num_users": 3,
        "cost_weight": 0.5,
        "diamond_center": [80, 0],
        "log_base": "base2",
        "rng_seed": 42,
    }))
    again = load_scenario(serialize_scenario(scn))
    assert again == scn


def test_apply_overrides():
    text = apply_overrides("{}", ["power_budget_dbm=15", "log_base=base2"])
    scn = load_scenario(text)
    assert scn.power_budget_w == pytest.approx(10 ** (-1.5), rel=1e-12)
    assert scn.log_base == "base2"
    with pytest.raises(ConfigError):
        apply_overrides("{}", ["no_equals_sign"])


def test_sample_users_deterministic():
    scn = load_scenario('{"rng_seed": 7}')
    a = sample_users(scn)
    b = sample_users(scn)
    assert np.array_equal(a, b)
    c = sample_users(load_scenario('{"rng_seed": 8}'))
    assert not np.array_equal(a, c)


def test_sample_users_degenerate_radius():
    scn = load_scenario('{"user_cluster_radius": 0}')
    pos = sample_users(scn)
    assert np.allclose(pos, np.array(scn.user_cluster_center))


def test_sample_users_inside_disk():
    scn = load_scenario('{"num_users": 200, "elements_per_ris": 2}')
    pos = sample_users(scn)
    dist = np.linalg.norm(pos - np.array(scn.user_cluster_center), axis=1)
    assert (dist <= scn.user_cluster_radius + 1e-12).all()


def test_sample_users_area_uniform_mean_radius():
    # E[r] = 2R/3 for an area-uniform disk; 1e5 samples, tolerance 0.05 m.
    scn = load_scenario('{"num_users": 100000, "elements_per_ris": 2}')
    pos = sample_users(scn, rng=substream(123, DOMAIN_USERS))
    dist = np.linalg.norm(pos - np.array(scn.user_cluster_center), axis=1)
    assert dist.mean() == pytest.approx(20.0 / 3.0, abs=0.05)


def test_build_geometry_shapes():
    scn = load_scenario('{"num_users": 4}')
    geo = build_geometry(scn)
    assert geo.ris_positions.shape == (5, 2)
    assert geo.user_positions.shape == (4, 2)


def test_replace_validates():
    scn = load_scenario("{}")
    with pytest.raises(ValidationError):
        scn.replace(num_users=0)
