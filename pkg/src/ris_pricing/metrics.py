"""Effective channels, SINRs, and both sides' utilities.

Conventions fixed here and used everywhere else:
  - the effective channel of user k is the 1xM row
        h_eff,k = h_direct[k]^H + ris_user[k]^H @ Phi @ bs_ris
    with Phi diagonal; elements of unsold RISs reflect nothing (zero entry);
  - beamformers are the columns of an (M, K) matrix W;
  - the BS pays (and an RIS earns) only for RISs it actually bought.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet
from .scenario import Scenario


@dataclass
class PriceVector:
    """Per-element use prices, one entry per RIS."""

    values: np.ndarray
    scheme: str = "non-uniform"  # "uniform" | "non-uniform"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def validate(self, scenario: Scenario) -> None:
        if self.values.shape != (scenario.num_ris,):
            raise ValueError(f"price vector needs {scenario.num_ris} entries")
        if (self.values < 0).any() or (self.values > scenario.price_cap + 1e-12).any():
            raise ValueError("prices must lie in [0, price_cap]")
        if self.scheme == "uniform" and not np.all(self.values == self.values[0]):
            raise ValueError("uniform scheme requires identical prices")
        if self.scheme not in ("uniform", "non-uniform"):
            raise ValueError(f"unknown pricing scheme {self.scheme!r}")

    @staticmethod
    def uniform(price: float, scenario: Scenario) -> "PriceVector":
        return PriceVector(np.full(scenario.num_ris, float(price)), scheme="uniform")


@dataclass
class PhaseConfig:
    """Purchase indicators plus per-element reflection coefficients.

    `phases` always holds all L entries; entries of unsold RISs are inert and
    only the sold blocks must be unit-modulus.
    """

    psi: np.ndarray  # (S,) 0/1
    phases: np.ndarray  # (L,) complex

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=np.int8)
        self.phases = np.asarray(self.phases, dtype=complex)

    @staticmethod
    def idle(scenario: Scenario) -> "PhaseConfig":
        return PhaseConfig(np.zeros(scenario.num_ris, dtype=np.int8),
                           np.ones(scenario.total_elements, dtype=complex))

    @staticmethod
    def all_ones(scenario: Scenario, psi=None) -> "PhaseConfig":
        if psi is None:
            psi = np.ones(scenario.num_ris, dtype=np.int8)
        return PhaseConfig(np.asarray(psi, dtype=np.int8),
                           np.ones(scenario.total_elements, dtype=complex))

    def element_mask(self, scenario: Scenario) -> np.ndarray:
        """Per-element bought/idle mask of length L."""
        return np.repeat(self.psi.astype(bool), scenario.elements_per_ris)

    def reflection(self, scenario: Scenario) -> np.ndarray:
        """Diagonal of Phi: phases on sold elements, zeros on idle ones."""
        return np.where(self.element_mask(scenario), self.phases, 0.0)

    def validate(self, scenario: Scenario) -> None:
        if self.psi.shape != (scenario.num_ris,):
            raise ValueError(f"psi needs {scenario.num_ris} entries")
        if not np.isin(self.psi, (0, 1)).all():
            raise ValueError("psi entries must be 0 or 1")
        if self.phases.shape != (scenario.total_elements,):
            raise ValueError(f"phases needs {scenario.total_elements} entries")
        mask = self.element_mask(scenario)
        if mask.any() and not np.allclose(np.abs(self.phases[mask]), 1.0, atol=1e-9):
            raise ValueError("sold elements must have unit-modulus phases")


def validate_beamformers(beamformers: np.ndarray, scenario: Scenario,
                         tol: float = 1e-9) -> None:
    w = np.asarray(beamformers)
    if w.shape != (scenario.num_antennas, scenario.num_users):
        raise ValueError(
            f"beamformers shape {w.shape} != "
            f"{(scenario.num_antennas, scenario.num_users)}")
    power = float(np.sum(np.abs(w) ** 2))
    if power > scenario.power_budget_w * (1.0 + tol):
        raise ValueError(f"beamformer power {power} exceeds budget")


def effective_channel(channels: ChannelSet, phase_config: PhaseConfig,
                      k: int, scenario: Scenario) -> np.ndarray:
    """Row vector h_eff,k of length M."""
    refl = phase_config.reflection(scenario)
    if channels.ris_user.shape[1] != refl.shape[0]:
        raise ValueError("phase config does not match channel element count")
    return (np.conj(channels.h_direct[k])
            + (np.conj(channels.ris_user[k]) * refl) @ channels.bs_ris)


def all_effective_channels(channels: ChannelSet, phase_config: PhaseConfig,
                           scenario: Scenario) -> np.ndarray:
    """(K, M) matrix whose rows are the users' effective channels."""
    refl = phase_config.reflection(scenario)
    return np.conj(channels.h_direct) + (np.conj(channels.ris_user) * refl) @ channels.bs_ris


def sinr_all(channels: ChannelSet, phase_config: PhaseConfig,
             beamformers: np.ndarray, scenario: Scenario) -> np.ndarray:
    """All K SINRs at once."""
    h_eff = all_effective_channels(channels, phase_config, scenario)
    gains = np.abs(h_eff @ beamformers) ** 2  # [k, i] = |h_k w_i|^2
    signal = np.diag(gains)
    interference = gains.sum(axis=1) - signal
    return signal / (interference + scenario.noise_power_w)


def sinr(channels: ChannelSet, phase_config: PhaseConfig, beamformers: np.ndarray,
         k: int, scenario: Scenario) -> float:
    return float(sinr_all(channels, phase_config, beamformers, scenario)[k])


def purchase_cost(phase_config: PhaseConfig, prices: PriceVector,
                  scenario: Scenario) -> float:
    """Weighted spend on sold RISs: delta * sum_s psi_s q_s L_s."""
    sizes = np.asarray(scenario.elements_per_ris, dtype=float)
    return scenario.cost_weight * float(np.sum(phase_config.psi * prices.values * sizes))


def sum_rate(channels: ChannelSet, phase_config: PhaseConfig,
             beamformers: np.ndarray, scenario: Scenario) -> float:
    """Sum of log(1 + SINR_k) in the configured log base."""
    gammas = sinr_all(channels, phase_config, beamformers, scenario)
    return float(np.sum(np.log1p(gammas))) / scenario.log_scale


def bs_utility(channels: ChannelSet, phase_config: PhaseConfig,
               beamformers: np.ndarray, prices: PriceVector,
               scenario: Scenario) -> float:
    """Follower payoff: sum rate minus weighted purchase cost."""
    return (sum_rate(channels, phase_config, beamformers, scenario)
            - purchase_cost(phase_config, prices, scenario))


def ris_utility(prices: PriceVector, phase_config: PhaseConfig, s: int,
                scenario: Scenario) -> float:
    """Leader payoff: revenue q_s L_s if sold, zero if idle."""
    return float(phase_config.psi[s]) * float(prices.values[s]) * scenario.elements_per_ris[s]
