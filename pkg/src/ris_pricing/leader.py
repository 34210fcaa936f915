"""Outer pricing game: leader best responses, equilibrium search, verification.

Leaders (RIS holders) pick per-element prices against the follower's best
response. The follower's reaction to a price vector is discontinuous (the
purchase set flips at thresholds), so each leader best response is computed
derivative-free: an exhaustive scan of a geometric-plus-linear price grid
followed by one golden-section refinement of the best bracket.

Non-uniform pricing runs round-robin sequential best responses until prices
stop moving; uniform pricing optimizes one shared price against total
revenue. Equilibria are reported best-effort with an explicit deviation scan
(verify_se) instead of a uniqueness claim.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet
from .follower import FollowerSolver, FollowerState
from .metrics import PhaseConfig, PriceVector, bs_utility, ris_utility
from .scenario import Scenario
from .util import DOMAIN_PRICES, substream

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

SCHEME_STACKELBERG_NONUNIFORM = "stackelberg-nonuniform"
SCHEME_STACKELBERG_UNIFORM = "stackelberg-uniform"
SCHEME_RANDOM_NONUNIFORM = "random-nonuniform"
SCHEME_RANDOM_UNIFORM = "random-uniform"
ALL_SCHEMES = (SCHEME_STACKELBERG_UNIFORM, SCHEME_STACKELBERG_NONUNIFORM,
               SCHEME_RANDOM_UNIFORM, SCHEME_RANDOM_NONUNIFORM)


@dataclass
class EquilibriumReport:
    """Converged prices, follower response, payoffs, and diagnostics."""

    scheme: str
    prices: PriceVector
    follower: FollowerState
    bs_utility: float
    ris_utilities: np.ndarray  # (S,)
    rounds: int
    converged: bool
    price_trace: list = field(default_factory=list)  # per-round price vectors
    se_deviations: np.ndarray | None = None  # max V_s improvement per leader
    se_grid_size: int = 0

    def to_dict(self) -> dict:
        f = self.follower
        return {
            "report_version": 1,
            "scheme": self.scheme,
            "prices": self.prices.values.tolist(),
            "pricing_scheme": self.prices.scheme,
            "bs_utility": self.bs_utility,
            "ris_utilities": self.ris_utilities.tolist(),
            "rounds": self.rounds,
            "converged": self.converged,
            "price_trace": [list(p) for p in self.price_trace],
            "se_deviations": None if self.se_deviations is None
            else self.se_deviations.tolist(),
            "se_grid_size": self.se_grid_size,
            "follower": {
                "psi": f.phase.psi.tolist(),
                "phases_re": f.phase.phases.real.tolist(),
                "phases_im": f.phase.phases.imag.tolist(),
                "beamformers_re": f.beamformers.real.tolist(),
                "beamformers_im": f.beamformers.imag.tolist(),
                "alpha": f.alpha.tolist(),
                "iterations": f.iterations,
                "converged": f.converged,
            },
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def follower_strategy_from_dict(doc: dict) -> tuple[PhaseConfig, np.ndarray]:
    """Rebuild (phase config, beamformers) from a serialized report."""
    f = doc["follower"]
    phases = np.array(f["phases_re"]) + 1j * np.array(f["phases_im"])
    w = np.array(f["beamformers_re"]) + 1j * np.array(f["beamformers_im"])
    return PhaseConfig(np.array(f["psi"]), phases), w


def price_grid(scenario: Scenario, num_points: int = 64) -> np.ndarray:
    """Candidate prices on [0, q_max]: linear half plus geometric half.

    The geometric points resolve the small-price region where purchase
    thresholds usually live; the linear points cover the rest. Includes 0 and
    q_max, sorted ascending.
    """
    cap = scenario.price_cap
    n_lin = num_points // 2
    n_geo = num_points - n_lin + 1  # dedup of the shared cap point
    linear = np.linspace(0.0, cap, n_lin)
    geometric = cap * np.logspace(-4.0, 0.0, n_geo)
    return np.unique(np.concatenate([linear, geometric]))


def _revenue(solver: FollowerSolver, prices: PriceVector, s: int,
             scenario: Scenario) -> float:
    psi = solver.best_psi(prices)
    return psi[s] * prices.values[s] * scenario.elements_per_ris[s]


def _total_revenue(solver: FollowerSolver, prices: PriceVector,
                   scenario: Scenario) -> float:
    psi = np.array(solver.best_psi(prices), dtype=float)
    sizes = np.asarray(scenario.elements_per_ris, dtype=float)
    return float(np.sum(psi * prices.values * sizes))


def _golden_section_max(fn, lo: float, hi: float, iters: int = 40):
    """Golden-section scan returning the best evaluated (x, fn(x))."""
    best_x, best_v = lo, fn(lo)
    for x in (hi,):
        v = fn(x)
        if v > best_v:
            best_x, best_v = x, v
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        for x, v in ((c, fc), (d, fd)):
            if v > best_v or (v == best_v and x < best_x):
                best_x, best_v = x, v
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return best_x, best_v


def price_best_response(s: int, current_prices: PriceVector, channels: ChannelSet,
                        scenario: Scenario, solver: FollowerSolver | None = None,
                        grid: np.ndarray | None = None) -> float:
    """Holder s's revenue-maximizing price against the follower best response.

    Ties break toward the lower price. The holder's current price is always a
    candidate, so an accepted move can never lower its own revenue.
    """
    if solver is None:
        solver = FollowerSolver(channels, scenario)
    if grid is None:
        grid = price_grid(scenario)

    def value(q: float) -> float:
        trial = current_prices.values.copy()
        trial[s] = q
        return _revenue(solver, PriceVector(trial), s, scenario)

    candidates = np.unique(np.append(grid, current_prices.values[s]))
    values = [value(q) for q in candidates]
    best_idx = int(np.argmax(values))  # argmax keeps the first=lowest tie
    best_q, best_v = float(candidates[best_idx]), values[best_idx]

    lo = candidates[best_idx - 1] if best_idx > 0 else candidates[0]
    hi = candidates[best_idx + 1] if best_idx + 1 < len(candidates) else candidates[-1]
    if hi > lo:
        ref_q, ref_v = _golden_section_max(value, float(lo), float(hi))
        if ref_v > best_v or (ref_v == best_v and ref_q < best_q):
            best_q = ref_q
    return best_q


def verify_se(report: EquilibriumReport, channels: ChannelSet, scenario: Scenario,
              deviation_grid_size: int = 65,
              solver: FollowerSolver | None = None) -> np.ndarray:
    """Largest revenue improvement each leader can reach by deviating alone.

    Scans each holder's price over a uniform grid with the others held at the
    reported equilibrium, re-solving the follower every time.
    """
    if solver is None:
        solver = FollowerSolver(channels, scenario)
    grid = np.linspace(0.0, scenario.price_cap, deviation_grid_size)
    improvements = np.empty(scenario.num_ris)
    for s in range(scenario.num_ris):
        current = report.ris_utilities[s]
        best = -np.inf
        for q in grid:
            trial = report.prices.values.copy()
            trial[s] = q
            best = max(best, _revenue(solver, PriceVector(trial), s, scenario))
        improvements[s] = best - current
    return improvements


def _assemble_report(scheme: str, prices: PriceVector, solver: FollowerSolver,
                     channels: ChannelSet, scenario: Scenario, rounds: int,
                     converged: bool, price_trace: list,
                     verify_grid_size: int = 65) -> EquilibriumReport:
    follower = solver.purchase_decision(prices)
    utility = bs_utility(channels, follower.phase, follower.beamformers,
                         prices, scenario)
    ris_utils = np.array([ris_utility(prices, follower.phase, s, scenario)
                          for s in range(scenario.num_ris)])
    report = EquilibriumReport(
        scheme=scheme, prices=prices, follower=follower, bs_utility=utility,
        ris_utilities=ris_utils, rounds=rounds, converged=converged,
        price_trace=price_trace)
    if verify_grid_size:
        report.se_deviations = verify_se(report, channels, scenario,
                                         verify_grid_size, solver=solver)
        report.se_grid_size = verify_grid_size
    return report


def stackelberg_solve(channels: ChannelSet, scenario: Scenario,
                      scheme: str = "non-uniform",
                      solver: FollowerSolver | None = None,
                      verify_grid_size: int = 65) -> EquilibriumReport:
    """Backward-induction equilibrium search for one channel realization.

    scheme "non-uniform": round-robin sequential best response per holder
    until the largest per-round price change drops below eps_outer * q_max.
    scheme "uniform": one shared price maximizing total revenue.
    Non-convergence is reported in the flags, not raised.
    """
    if solver is None:
        solver = FollowerSolver(channels, scenario)
    if scheme in (SCHEME_STACKELBERG_UNIFORM, SCHEME_STACKELBERG_NONUNIFORM):
        scheme = "uniform" if scheme == SCHEME_STACKELBERG_UNIFORM else "non-uniform"
    if scheme not in ("uniform", "non-uniform"):
        raise ValueError(f"unknown scheme {scheme!r}")
    grid = price_grid(scenario)

    if scheme == "uniform":
        def total(q: float) -> float:
            return _total_revenue(solver, PriceVector.uniform(q, scenario), scenario)

        values = [total(q) for q in grid]
        best_idx = int(np.argmax(values))
        best_q, best_v = float(grid[best_idx]), values[best_idx]
        lo = grid[max(best_idx - 1, 0)]
        hi = grid[min(best_idx + 1, len(grid) - 1)]
        if hi > lo:
            ref_q, ref_v = _golden_section_max(total, float(lo), float(hi))
            if ref_v > best_v or (ref_v == best_v and ref_q < best_q):
                best_q = ref_q
        prices = PriceVector.uniform(best_q, scenario)
        label = SCHEME_STACKELBERG_UNIFORM
        return _assemble_report(label, prices, solver, channels, scenario,
                                rounds=1, converged=True,
                                price_trace=[prices.values.copy()],
                                verify_grid_size=verify_grid_size)

    q = np.zeros(scenario.num_ris)
    price_trace = [q.copy()]
    converged = False
    rounds = 0
    for rounds in range(1, scenario.max_outer_iters + 1):
        previous = q.copy()
        for s in range(scenario.num_ris):
            q[s] = price_best_response(s, PriceVector(q), channels, scenario,
                                       solver=solver, grid=grid)
        price_trace.append(q.copy())
        if np.max(np.abs(q - previous)) < scenario.eps_outer * scenario.price_cap:
            converged = True
            break
    return _assemble_report(SCHEME_STACKELBERG_NONUNIFORM, PriceVector(q), solver,
                            channels, scenario, rounds=rounds, converged=converged,
                            price_trace=price_trace,
                            verify_grid_size=verify_grid_size)


def random_pricing(channels: ChannelSet, scenario: Scenario,
                   rng: np.random.Generator | None = None,
                   uniform: bool = False,
                   solver: FollowerSolver | None = None,
                   verify_grid_size: int = 65) -> EquilibriumReport:
    """Baseline: prices drawn uniformly on [0, q_max], follower responds once."""
    if rng is None:
        rng = substream(scenario.rng_seed, DOMAIN_PRICES)
    if solver is None:
        solver = FollowerSolver(channels, scenario)
    if uniform:
        prices = PriceVector.uniform(rng.uniform(0.0, scenario.price_cap), scenario)
        label = SCHEME_RANDOM_UNIFORM
    else:
        prices = PriceVector(rng.uniform(0.0, scenario.price_cap,
                                         size=scenario.num_ris))
        label = SCHEME_RANDOM_NONUNIFORM
    return _assemble_report(label, prices, solver, channels, scenario,
                            rounds=1, converged=True,
                            price_trace=[prices.values.copy()],
                            verify_grid_size=verify_grid_size)
