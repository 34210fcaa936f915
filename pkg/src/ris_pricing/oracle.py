"""Brute-force validators, deliberately independent of the main solver.

The follower oracle enumerates every purchase set and runs multi-start
projected gradient ascent directly on the true utility with finite-difference
gradients, sharing none of the fractional-programming machinery it certifies.
It is restricted to tiny instances and allowed to be slow.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet
from .follower import FollowerSolver
from .metrics import PriceVector, purchase_cost, PhaseConfig
from .scenario import Scenario
from .util import DOMAIN_ORACLE, substream

MAX_ANTENNAS = 2
MAX_USERS = 2
MAX_ELEMENTS = 4
MAX_SUBSET_RIS = 12


class OracleSizeError(ValueError):
    """Instance exceeds the oracle's size limits."""


@dataclass(frozen=True)
class OracleBudget:
    """Effort knobs for the brute-force searches."""

    restarts: int = 8
    max_iters: int = 300
    grid_points: int = 512
    fd_step: float = 1e-6
    tol: float = 1e-11
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("restarts", "max_iters", "grid_points"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


def _check_size(scenario: Scenario) -> None:
    if (scenario.num_antennas > MAX_ANTENNAS or scenario.num_users > MAX_USERS
            or scenario.total_elements > MAX_ELEMENTS
            or scenario.num_ris > MAX_SUBSET_RIS):
        raise OracleSizeError(
            f"oracle accepts M<={MAX_ANTENNAS}, K<={MAX_USERS}, "
            f"L<={MAX_ELEMENTS}, S<={MAX_SUBSET_RIS}; got "
            f"M={scenario.num_antennas}, K={scenario.num_users}, "
            f"L={scenario.total_elements}, S={scenario.num_ris}")


def _rate_fn(channels: ChannelSet, psi, scenario: Scenario):
    """Sum rate as a plain function of (W real-vec, phase angles)."""
    mask = np.repeat(np.asarray(psi, dtype=bool), scenario.elements_per_ris)
    hd = np.conj(channels.h_direct)
    cascade = (np.conj(channels.ris_user[:, mask])[:, :, None]
               * channels.bs_ris[mask][None, :, :])  # (K, La, M)
    sigma2 = scenario.noise_power_w
    scale = scenario.log_scale
    m, k = scenario.num_antennas, scenario.num_users
    n_w = 2 * m * k
    la = int(mask.sum())

    def rate(x: np.ndarray) -> float:
        w = x[:n_w:2].reshape(m, k) + 1j * x[1:n_w:2].reshape(m, k)
        h = hd if la == 0 else hd + np.einsum(
            "l,klm->km", np.exp(1j * x[n_w:]), cascade)
        g2 = np.abs(h @ w) ** 2
        sig = np.diag(g2)
        gammas = sig / (g2.sum(axis=1) - sig + sigma2)
        return float(np.sum(np.log1p(gammas))) / scale

    return rate, n_w, la


def _project_power(x: np.ndarray, n_w: int, pmax: float) -> np.ndarray:
    power = float(np.sum(x[:n_w] ** 2))
    if power > pmax and power > 0:
        x = x.copy()
        x[:n_w] *= np.sqrt(pmax / power)
    return x


def _ascend(rate, x0: np.ndarray, n_w: int, pmax: float,
            budget: OracleBudget) -> float:
    """Projected gradient ascent with central differences and backtracking."""
    x = _project_power(x0, n_w, pmax)
    value = rate(x)
    h = budget.fd_step
    for _ in range(budget.max_iters):
        grad = np.empty_like(x)
        for i in range(x.size):
            xp = x.copy(); xp[i] += h
            xm = x.copy(); xm[i] -= h
            grad[i] = (rate(_project_power(xp, n_w, pmax))
                       - rate(_project_power(xm, n_w, pmax))) / (2 * h)
        gnorm2 = float(np.dot(grad, grad))
        if gnorm2 == 0.0:
            break
        step = 1.0
        improved = False
        for _ in range(40):
            trial = _project_power(x + step * grad, n_w, pmax)
            trial_value = rate(trial)
            if trial_value >= value + 1e-4 * step * gnorm2:
                x, improved = trial, True
                gain, value = trial_value - value, trial_value
                break
            step *= 0.5
        if not improved or gain < budget.tol:
            break
    return value


def oracle_follower(channels: ChannelSet, prices: PriceVector, scenario: Scenario,
                    budget: OracleBudget | None = None) -> float:
    """Best follower utility found by exhaustive psi x multi-start ascent."""
    _check_size(scenario)
    if budget is None:
        budget = OracleBudget()
    pmax = scenario.power_budget_w
    best = -np.inf
    for subset_idx, psi in enumerate(
            itertools.product((0, 1), repeat=scenario.num_ris)):
        rate, n_w, la = _rate_fn(channels, psi, scenario)
        cost = purchase_cost(
            PhaseConfig(np.array(psi), np.ones(scenario.total_elements)),
            prices, scenario)
        for restart in range(budget.restarts):
            rng = substream(budget.rng_seed, DOMAIN_ORACLE, subset_idx, restart)
            x0 = np.concatenate([
                rng.normal(size=n_w) * np.sqrt(pmax / max(n_w, 1)),
                rng.uniform(0.0, 2 * np.pi, size=la),
            ])
            if restart == 0:  # one deterministic start: scaled ones, zero angles
                x0 = np.concatenate([np.full(n_w, np.sqrt(pmax / max(n_w, 1))),
                                     np.zeros(la)])
            best = max(best, _ascend(rate, x0, n_w, pmax, budget) - cost)
    return best


def oracle_leader_grid(channels: ChannelSet, scenario: Scenario,
                       grid: np.ndarray | None = None,
                       solver: FollowerSolver | None = None) -> tuple[float, float]:
    """Dense uniform-price scan with a full follower re-solve at each price.

    Returns (best_price, best_total_revenue); ties go to the lower price.
    """
    if grid is None:
        grid = np.linspace(0.0, scenario.price_cap, 512)
    if solver is None:
        solver = FollowerSolver(channels, scenario)
    sizes = np.asarray(scenario.elements_per_ris, dtype=float)
    best_q, best_rev = float(grid[0]), -np.inf
    for q in np.sort(np.asarray(grid, dtype=float)):
        prices = PriceVector.uniform(q, scenario)
        psi = np.array(solver.best_psi(prices), dtype=float)
        revenue = float(np.sum(psi * q * sizes))
        if revenue > best_rev:
            best_q, best_rev = float(q), revenue
    return best_q, best_rev
