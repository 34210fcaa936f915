import numpy as np
import pytest

from conftest import make_channels, make_scenario
from ris_pricing.channels import ChannelSet
from ris_pricing.metrics import (PhaseConfig, PriceVector, all_effective_channels,
                                 bs_utility, effective_channel, purchase_cost,
                                 ris_utility, sinr, sinr_all, validate_beamformers)


def scalar_channels(h_d, g, h):
    return ChannelSet(h_direct=np.array([[h_d]], dtype=complex),
                      bs_ris=np.array([[h]], dtype=complex),
                      ris_user=np.array([[g]], dtype=complex))


def test_all_idle_reduces_to_direct():
    scn = make_scenario()
    ch = make_channels(scn, seed=0)
    idle = PhaseConfig.idle(scn)
    for k in range(scn.num_users):
        assert np.array_equal(effective_channel(ch, idle, k, scn),
                              np.conj(ch.h_direct[k]))


def test_scalar_conjugation_convention():
    # M = L = 1, h_d = 0, g = 1, H = 1: h_eff = conj(g) * phi * H = e^{+j theta}.
    scn = make_scenario(num_antennas=1, num_users=1, num_ris=1,
                        elements_per_ris=(1,), ris_positions=((10.0, 0.0),))
    theta = 0.7
    ch = scalar_channels(0.0, 1.0, 1.0)
    cfg = PhaseConfig(np.array([1]), np.array([np.exp(1j * theta)]))
    h_eff = effective_channel(ch, cfg, 0, scn)
    assert h_eff[0] == pytest.approx(np.exp(1j * theta))
    # and the conjugation really lands on g:
    ch2 = scalar_channels(0.0, np.exp(1j * 0.2), 1.0)
    h2 = effective_channel(ch2, cfg, 0, scn)
    assert h2[0] == pytest.approx(np.exp(1j * (theta - 0.2)))


def test_cascade_linear_in_reflection():
    scn = make_scenario()
    ch = make_channels(scn, seed=1)
    psi = np.array([1, 1])
    phases = np.exp(1j * np.linspace(0.1, 1.9, scn.total_elements))
    one = PhaseConfig(psi, phases)
    two = PhaseConfig(psi, 2.0 * phases)  # hypothetical doubling
    idle = PhaseConfig.idle(scn)
    for k in range(scn.num_users):
        base = effective_channel(ch, idle, k, scn)
        cascade_one = effective_channel(ch, one, k, scn) - base
        cascade_two = effective_channel(ch, two, k, scn) - base
        assert np.allclose(cascade_two, 2.0 * cascade_one)


def test_sinr_single_user():
    scn = make_scenario(num_users=1, num_antennas=2, noise_power_w=0.5)
    ch = make_channels(scn, seed=2)
    cfg = PhaseConfig.all_ones(scn)
    w = np.array([[0.3 + 0.1j], [0.2 - 0.4j]])
    h_eff = effective_channel(ch, cfg, 0, scn)
    expected = abs(h_eff @ w[:, 0]) ** 2 / 0.5
    assert sinr(ch, cfg, w, 0, scn) == pytest.approx(expected)


def test_sinr_zero_beamformers():
    scn = make_scenario()
    ch = make_channels(scn, seed=3)
    cfg = PhaseConfig.all_ones(scn)
    w = np.zeros((scn.num_antennas, scn.num_users), dtype=complex)
    assert np.all(sinr_all(ch, cfg, w, scn) == 0.0)


def test_sinr_half():
    # M=1, K=2, equal unit channels, equal powers, sigma^2 = p: gamma = 1/2.
    p = 0.4
    scn = make_scenario(num_antennas=1, num_users=2, num_ris=1,
                        elements_per_ris=(1,), ris_positions=((10.0, 0.0),),
                        noise_power_w=p, power_budget_w=1.0)
    ch = ChannelSet(h_direct=np.ones((2, 1), dtype=complex),
                    bs_ris=np.zeros((1, 1), dtype=complex),
                    ris_user=np.zeros((2, 1), dtype=complex))
    cfg = PhaseConfig.idle(scn)
    w = np.full((1, 2), np.sqrt(p), dtype=complex)
    gammas = sinr_all(ch, cfg, w, scn)
    assert gammas == pytest.approx([0.5, 0.5])


def test_sinr_invariant_to_common_phase_rotation():
    scn = make_scenario()
    ch = make_channels(scn, seed=4)
    cfg = PhaseConfig.all_ones(scn)
    rng = np.random.default_rng(5)
    w = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) * 0.3
    rotated = w * np.exp(1j * np.array([0.9, -2.1]))[None, :]
    assert np.allclose(sinr_all(ch, cfg, w, scn),
                       sinr_all(ch, cfg, rotated, scn))


def test_bs_utility_zero_case():
    scn = make_scenario()
    ch = make_channels(scn, seed=6)
    cfg = PhaseConfig.idle(scn)
    w = np.zeros((2, 2), dtype=complex)
    prices = PriceVector(np.array([0.05, 0.02]))
    assert bs_utility(ch, cfg, w, prices, scn) == 0.0


def test_bs_utility_pinned_value():
    # Orthogonal channels give gammas [1, 3] with no cross terms; one bought
    # RIS with q=0.05, L=20, delta=1: U = ln 2 + ln 4 - 1 = 1.07944...
    scn = make_scenario(num_users=2, num_antennas=2, num_ris=1,
                        elements_per_ris=(20,), ris_positions=((10.0, 0.0),),
                        noise_power_w=1.0, power_budget_w=100.0)
    ch = ChannelSet(h_direct=np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex),
                    bs_ris=np.zeros((20, 2), dtype=complex),
                    ris_user=np.zeros((2, 20), dtype=complex))
    w = np.diag([1.0, np.sqrt(3.0)]).astype(complex)
    cfg = PhaseConfig(np.array([1]), np.ones(20, dtype=complex))
    prices = PriceVector(np.array([0.05]))
    value = bs_utility(ch, cfg, w, prices, scn)
    assert value == pytest.approx(np.log(2) + np.log(4) - 1.0, rel=1e-12)


def test_bs_utility_log_base2():
    scn = make_scenario(num_users=2, num_antennas=2, num_ris=1,
                        elements_per_ris=(20,), ris_positions=((10.0, 0.0),),
                        noise_power_w=1.0, power_budget_w=100.0,
                        log_base="base2")
    ch = ChannelSet(h_direct=np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex),
                    bs_ris=np.zeros((20, 2), dtype=complex),
                    ris_user=np.zeros((2, 20), dtype=complex))
    w = np.diag([1.0, np.sqrt(3.0)]).astype(complex)
    cfg = PhaseConfig(np.array([1]), np.ones(20, dtype=complex))
    prices = PriceVector(np.array([0.0]))
    assert bs_utility(ch, cfg, w, prices, scn) == pytest.approx(1.0 + 2.0, rel=1e-12)


def test_bs_utility_linear_in_price():
    # dU/dq_s = -delta * L_s for a bought RIS, exactly.
    scn = make_scenario(cost_weight=1.7)
    ch = make_channels(scn, seed=7)
    cfg = PhaseConfig.all_ones(scn)
    rng = np.random.default_rng(8)
    w = 0.1 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    u0 = bs_utility(ch, cfg, w, PriceVector(np.array([0.02, 0.05])), scn)
    u1 = bs_utility(ch, cfg, w, PriceVector(np.array([0.03, 0.05])), scn)
    assert u1 - u0 == pytest.approx(-1.7 * 0.01 * 2, rel=1e-9)


def test_cost_only_for_purchased():
    scn = make_scenario()
    prices = PriceVector(np.array([0.1, 0.1]))
    bought = PhaseConfig(np.array([1, 0]), np.ones(4, dtype=complex))
    assert purchase_cost(bought, prices, scn) == pytest.approx(0.1 * 2)


def test_ris_utility():
    scn = make_scenario(num_ris=2, elements_per_ris=(10, 20), price_cap=3.0)
    sold = PhaseConfig(np.array([1, 1]), np.ones(30, dtype=complex))
    unsold = PhaseConfig(np.array([0, 1]), np.ones(30, dtype=complex))
    assert ris_utility(PriceVector(np.array([2.0, 0.0])), sold, 0, scn) == 20.0
    assert ris_utility(PriceVector(np.array([2.0, 0.0])), unsold, 0, scn) == 0.0
    assert ris_utility(PriceVector(np.array([0.0, 1.5])), sold, 1, scn) == 30.0


def test_phase_config_validation():
    scn = make_scenario()
    bad = PhaseConfig(np.array([1, 0]), np.full(4, 0.5 + 0j))
    with pytest.raises(ValueError):
        bad.validate(scn)
    ok = PhaseConfig(np.array([0, 0]), np.full(4, 0.5 + 0j))
    ok.validate(scn)  # idle elements may hold anything


def test_beamformer_validation():
    scn = make_scenario(power_budget_w=1.0)
    w = np.ones((2, 2), dtype=complex)  # power 4 > 1
    with pytest.raises(ValueError):
        validate_beamformers(w, scn)
    validate_beamformers(0.4 * w, scn)


def test_price_vector_validation():
    scn = make_scenario(price_cap=0.1)
    with pytest.raises(ValueError):
        PriceVector(np.array([0.2, 0.0])).validate(scn)
    with pytest.raises(ValueError):
        PriceVector(np.array([0.05, 0.01]), scheme="uniform").validate(scn)
    PriceVector(np.array([0.05, 0.05]), scheme="uniform").validate(scn)
