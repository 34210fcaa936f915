"""Follower best response: joint beamforming, phase shifts, and purchases.

Given prices, the BS maximizes its utility over beamformers W (total power
budget), unit-modulus phase shifts of the bought RISs, and the purchase set
itself. For a fixed purchase set the continuous problem is solved by
alternating optimization on a fractional-programming surrogate:

  1. the log-utility is replaced by its dual-transform surrogate, tight at
     the auxiliary SINR variables alpha_k = gamma_k;
  2. at fixed alpha, the remaining sum of ratios is handled with the
     quadratic transform: auxiliaries beta_k give a concave quadratic in W
     (closed form with a bisected power multiplier lambda_0), auxiliaries
     theta_k give a quadratic in the phase vector (closed-form unconstrained
     maximizer projected to unit modulus, with a majorize-maximize fallback
     that keeps the surrogate non-decreasing).

Every accepted step can only increase the surrogate, so the recorded trace
is monotone and, at the fixed point, alpha equals the true SINRs and the
surrogate equals the true utility.

The purchase set is chosen by exhaustive enumeration for small S (greedy
backward elimination beyond `exhaustive_cap`). The inner solution for a
fixed purchase set does not depend on prices (cost is an additive constant),
which FollowerSolver exploits to cache one solve per purchase set and reuse
it across arbitrarily many trial prices.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .channels import ChannelSet
from .metrics import PhaseConfig, PriceVector, purchase_cost
from .scenario import Scenario

MONOTONE_SLACK = 1e-8  # accepted-iterate surrogate may dip at most this much


class SolverError(RuntimeError):
    """Inner solver failed in a way that invalidates the state (with diagnostics)."""


@dataclass
class FollowerState:
    """Full follower strategy plus the solver's auxiliary variables."""

    beamformers: np.ndarray  # (M, K)
    phase: PhaseConfig
    alpha: np.ndarray  # (K,) SINR surrogates
    beta: np.ndarray  # (K,) quadratic-transform vars, beamformer subproblem
    theta: np.ndarray  # (K,) quadratic-transform vars, phase subproblem
    lambda_power: float = 0.0  # power-budget multiplier
    reflect_duals: np.ndarray | None = None  # (S,) kept for diagnostics only
    iterations: int = 0
    converged: bool = False
    trace: list | None = None  # surrogate value after each accepted step

    def copy(self) -> "FollowerState":
        return FollowerState(
            beamformers=self.beamformers.copy(),
            phase=PhaseConfig(self.phase.psi.copy(), self.phase.phases.copy()),
            alpha=self.alpha.copy(),
            beta=self.beta.copy(),
            theta=self.theta.copy(),
            lambda_power=self.lambda_power,
            reflect_duals=None if self.reflect_duals is None else self.reflect_duals.copy(),
            iterations=self.iterations,
            converged=self.converged,
            trace=None if self.trace is None else list(self.trace),
        )


class _Workspace:
    """Precomputed per-(channels, purchase set) tensors for the AO updates."""

    def __init__(self, channels: ChannelSet, psi, scenario: Scenario):
        self.scenario = scenario
        self.sigma2 = scenario.noise_power_w
        self.pmax = scenario.power_budget_w
        self.psi = np.asarray(psi, dtype=np.int8)
        self.hd_conj = np.conj(channels.h_direct)  # (K, M)
        mask = np.repeat(self.psi.astype(bool), scenario.elements_per_ris)
        self.active = np.flatnonzero(mask)
        # cascade[k, l, m]: contribution of active element l to h_eff,k per antenna m
        self.cascade = (np.conj(channels.ris_user[:, self.active])[:, :, None]
                        * channels.bs_ris[self.active][None, :, :])

    def h_eff(self, phi_active: np.ndarray) -> np.ndarray:
        if self.active.size == 0:
            return self.hd_conj
        return self.hd_conj + np.einsum("l,klm->km", phi_active, self.cascade)

    def gains(self, beamformers: np.ndarray, phi_active: np.ndarray) -> np.ndarray:
        """x[k, i] = h_eff,k @ w_i."""
        return self.h_eff(phi_active) @ beamformers

    def gamma(self, beamformers: np.ndarray, phi_active: np.ndarray) -> np.ndarray:
        x2 = np.abs(self.gains(beamformers, phi_active)) ** 2
        signal = np.diag(x2).copy()
        return signal / (x2.sum(axis=1) - signal + self.sigma2)


def _rate_surrogate_nats(alpha: np.ndarray, gamma: np.ndarray) -> float:
    abar = 1.0 + alpha
    return float(np.sum(np.log1p(alpha) - alpha + abar * gamma / (1.0 + gamma)))


def _mf_init(ws: _Workspace) -> np.ndarray:
    """Matched filters to the all-ones-phase effective channels, equal power split."""
    k = ws.hd_conj.shape[0]
    h = ws.h_eff(np.ones(ws.active.size, dtype=complex))
    w = np.conj(h).T.astype(complex)
    norms = np.linalg.norm(w, axis=0)
    scale = np.sqrt(ws.pmax / k)
    nonzero = norms > 0
    w[:, nonzero] = w[:, nonzero] / norms[nonzero] * scale
    w[:, ~nonzero] = 0.0
    return w


def _beamformer_step(ws: _Workspace, beamformers, phi_active, alpha):
    """Quadratic-transform beta update plus closed-form W under the power budget."""
    if ws.pmax <= 0.0:
        k = ws.hd_conj.shape[0]
        return np.zeros_like(beamformers), np.zeros(k, dtype=complex), 0.0

    abar = 1.0 + alpha
    h_eff = ws.h_eff(phi_active)
    x = h_eff @ beamformers
    denom = np.sum(np.abs(x) ** 2, axis=1) + ws.sigma2
    beta = np.sqrt(abar) * np.diag(x) / denom

    weights = np.abs(beta) ** 2
    quad = (h_eff.conj().T * weights) @ h_eff  # (M, M) Hermitian PSD
    targets = h_eff.conj().T * (np.sqrt(abar) * beta)  # (M, K), column i = c_i

    vals, vecs = np.linalg.eigh(quad)
    vals = np.clip(vals.real, 0.0, None)
    proj = vecs.conj().T @ targets  # (M, K)
    # Each target is a beta-weighted conjugate channel row, so it lies in the
    # range of `quad`; null-space components are eigh noise and get dropped
    # before they can soak up transmit power during the bisection.
    proj[vals <= vals.max() * 1e-10] = 0.0
    proj2 = np.abs(proj) ** 2

    def power(lam: float) -> float:
        shift2 = (vals + lam)[:, None] ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = proj2 / shift2
        # 0/0 components carry no power; nonzero/0 means the budget must bind.
        return float(np.sum(np.where(np.isnan(ratio), 0.0, ratio)))

    if power(0.0) <= ws.pmax:
        lam = 0.0
    else:
        norm_c = np.sqrt(proj2.sum())
        lo, hi = 0.0, float(norm_c / np.sqrt(ws.pmax))
        if not power(hi) <= ws.pmax:
            raise SolverError(
                f"power bisection bracket failed: P({hi}) = {power(hi)} > {ws.pmax}")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if power(mid) > ws.pmax:
                lo = mid
            else:
                hi = mid
        lam = hi  # feasible side of the bracket

    shift = (vals + lam)[:, None]
    safe = np.where(shift > 0, shift, 1.0)
    w_new = vecs @ np.where(shift > 0, proj / safe, 0.0)
    return w_new, beta, lam


def _phase_step(ws: _Workspace, beamformers, phi_active, alpha):
    """Quadratic-transform theta update plus unit-modulus phase update.

    The candidate is the unconstrained maximizer projected elementwise to the
    unit circle; if that candidate does not improve the quadratic objective, a
    majorize-maximize step (which provably cannot decrease it) is used, and as
    a last resort the phases are left unchanged.
    """
    k = ws.hd_conj.shape[0]
    abar = 1.0 + alpha

    if ws.active.size == 0:
        x = ws.gains(beamformers, phi_active)
        denom = np.sum(np.abs(x) ** 2, axis=1) + ws.sigma2
        theta = np.sqrt(abar) * np.diag(x) / denom
        return phi_active, theta

    t = np.einsum("klm,mi->kli", ws.cascade, beamformers)  # (K, L_active, K)
    d = ws.hd_conj @ beamformers  # (K, K)
    x = d + np.einsum("l,kli->ki", phi_active, t)
    denom = np.sum(np.abs(x) ** 2, axis=1) + ws.sigma2
    theta = np.sqrt(abar) * np.diag(x) / denom

    weights = np.abs(theta) ** 2  # (K,)
    rmat = np.einsum("k,kli,kni->ln", weights, t, np.conj(t))
    b = (np.einsum("k,klk->l", np.sqrt(abar) * np.conj(theta), t)
         - np.einsum("k,ki,kli->l", weights, np.conj(d), t))

    u0 = np.conj(phi_active)

    def quad_value(u: np.ndarray) -> float:
        return float(2.0 * np.real(np.vdot(u, b)) - np.real(np.vdot(u, rmat @ u)))

    base = quad_value(u0)
    trace_r = float(np.trace(rmat).real)
    if trace_r <= 0.0 and not np.any(b):
        return phi_active, theta  # phases have no effect (e.g. zero cascade)

    ridge = max(trace_r, 1e-300) / ws.active.size * 1e-12
    try:
        u_cand = np.linalg.solve(rmat + ridge * np.eye(ws.active.size), b)
    except np.linalg.LinAlgError:
        u_cand = None
    if u_cand is not None:
        mags = np.abs(u_cand)
        u_cand = np.where(mags > 0, u_cand / np.where(mags > 0, mags, 1.0), u0)
        if quad_value(u_cand) >= base:
            return np.conj(u_cand), theta

    # Majorize-maximize fallback: guaranteed not to decrease the quadratic.
    lam = float(np.max(np.sum(np.abs(rmat), axis=1)))  # Gershgorin bound on lmax
    v = b + (lam * u0 - rmat @ u0)
    mags = np.abs(v)
    u_mm = np.where(mags > 0, v / np.where(mags > 0, mags, 1.0), u0)
    if quad_value(u_mm) >= base:
        return np.conj(u_mm), theta
    return phi_active, theta


def _phi_active(state: FollowerState, ws: _Workspace) -> np.ndarray:
    return state.phase.phases[ws.active]


def _with_phi(state: FollowerState, ws: _Workspace, phi_active) -> PhaseConfig:
    phases = state.phase.phases.copy()
    phases[ws.active] = phi_active
    return PhaseConfig(state.phase.psi.copy(), phases)


def surrogate_objective(state: FollowerState, channels: ChannelSet,
                        prices: PriceVector, scenario: Scenario) -> float:
    """Dual-transform surrogate of the BS utility at the state's alpha.

    Equals the true utility whenever alpha matches the current SINRs.
    """
    ws = _Workspace(channels, state.phase.psi, scenario)
    gamma = ws.gamma(state.beamformers, _phi_active(state, ws))
    rate = _rate_surrogate_nats(state.alpha, gamma) / scenario.log_scale
    return rate - purchase_cost(state.phase, prices, scenario)


def update_alpha(state: FollowerState, channels: ChannelSet,
                 scenario: Scenario) -> FollowerState:
    """Move the SINR surrogates to their stationary point alpha_k = gamma_k."""
    ws = _Workspace(channels, state.phase.psi, scenario)
    gamma = ws.gamma(state.beamformers, _phi_active(state, ws))
    return replace(state, alpha=gamma)


def update_beamformers(state: FollowerState, channels: ChannelSet,
                       scenario: Scenario) -> FollowerState:
    """One beamformer subproblem pass: beta update plus closed-form W."""
    ws = _Workspace(channels, state.phase.psi, scenario)
    w_new, beta, lam = _beamformer_step(
        ws, state.beamformers, _phi_active(state, ws), state.alpha)
    return replace(state, beamformers=w_new, beta=beta, lambda_power=lam)


def update_phases(state: FollowerState, channels: ChannelSet,
                  scenario: Scenario) -> FollowerState:
    """One phase subproblem pass: theta update plus projected phase maximizer."""
    ws = _Workspace(channels, state.phase.psi, scenario)
    phi_new, theta = _phase_step(
        ws, state.beamformers, _phi_active(state, ws), state.alpha)
    return replace(state, phase=_with_phi(state, ws, phi_new), theta=theta)


def _solve_core(channels: ChannelSet, psi, scenario: Scenario,
                init_state: FollowerState | None = None):
    """AO loop for a fixed purchase set.

    Returns (state, rate_trace, rate) where rate and the trace are the
    price-free part of the surrogate (log-base units); callers subtract the
    purchase cost. The iterate path never depends on prices.
    """
    ws = _Workspace(channels, psi, scenario)
    k = scenario.num_users
    scale = scenario.log_scale

    if init_state is not None:
        w = init_state.beamformers.copy()
        phases = init_state.phase.phases.copy()
    else:
        w = _mf_init(ws)
        phases = np.ones(scenario.total_elements, dtype=complex)
    phi = phases[ws.active].copy()

    alpha = ws.gamma(w, phi)
    beta = np.zeros(k, dtype=complex)
    theta = np.zeros(k, dtype=complex)
    lam = 0.0

    rate_prev = _rate_surrogate_nats(alpha, alpha) / scale
    rate_trace = [rate_prev]
    converged = False
    iterations = 0

    for iterations in range(1, scenario.max_inner_iters + 1):
        alpha = ws.gamma(w, phi)
        rate_trace.append(_rate_surrogate_nats(alpha, alpha) / scale)

        w, beta, lam = _beamformer_step(ws, w, phi, alpha)
        rate_trace.append(_rate_surrogate_nats(alpha, ws.gamma(w, phi)) / scale)

        phi, theta = _phase_step(ws, w, phi, alpha)
        rate = _rate_surrogate_nats(alpha, ws.gamma(w, phi)) / scale
        rate_trace.append(rate)

        if abs(rate - rate_prev) <= scenario.eps_inner * max(1.0, abs(rate)):
            converged = True
            break
        rate_prev = rate

    alpha = ws.gamma(w, phi)  # final sync: surrogate becomes the true utility
    rate = _rate_surrogate_nats(alpha, alpha) / scale
    rate_trace.append(rate)

    phases[ws.active] = phi
    state = FollowerState(
        beamformers=w,
        phase=PhaseConfig(np.asarray(psi, dtype=np.int8), phases),
        alpha=alpha,
        beta=beta,
        theta=theta,
        lambda_power=lam,
        reflect_duals=np.zeros(scenario.num_ris),
        iterations=iterations,
        converged=converged,
        trace=None,
    )
    return state, rate_trace, rate


def solve_p1(channels: ChannelSet, prices: PriceVector, psi, scenario: Scenario,
             init_state: FollowerState | None = None) -> FollowerState:
    """Solve the follower problem for a fixed purchase set psi."""
    state, rate_trace, _ = _solve_core(channels, psi, scenario, init_state)
    cost = purchase_cost(state.phase, prices, scenario)
    state.trace = [r - cost for r in rate_trace]
    return state


class FollowerSolver:
    """Follower best responses for one channel realization, with caching.

    The AO solution for a purchase set is price-independent (prices only shift
    the utility by a constant), so each purchase set is solved once and reused
    for every trial price the leaders evaluate.
    """

    def __init__(self, channels: ChannelSet, scenario: Scenario,
                 exhaustive_cap: int = 5):
        self.channels = channels
        self.scenario = scenario
        self.exhaustive_cap = exhaustive_cap
        self._cache: dict[tuple, tuple] = {}

    def _solve_psi(self, psi: tuple) -> tuple:
        entry = self._cache.get(psi)
        if entry is None:
            entry = _solve_core(self.channels, np.array(psi), self.scenario)
            self._cache[psi] = entry
        return entry

    def rate(self, psi: tuple) -> float:
        """Optimized sum rate for a purchase set (log-base units)."""
        return self._solve_psi(psi)[2]

    def utility(self, psi: tuple, prices: PriceVector) -> float:
        state, _, rate = self._solve_psi(psi)
        return rate - purchase_cost(state.phase, prices, self.scenario)

    def state_for(self, psi: tuple, prices: PriceVector) -> FollowerState:
        state, rate_trace, _ = self._solve_psi(psi)
        cost = purchase_cost(state.phase, prices, self.scenario)
        out = state.copy()
        out.trace = [r - cost for r in rate_trace]
        return out

    def best_psi(self, prices: PriceVector) -> tuple:
        """Purchase set maximizing the follower utility at the given prices."""
        s = self.scenario.num_ris
        if s <= self.exhaustive_cap:
            best_psi, best_u = None, -np.inf
            for bits in itertools.product((0, 1), repeat=s):
                u = self.utility(bits, prices)
                if u > best_u or (u == best_u and bits > best_psi):
                    best_psi, best_u = bits, u
            return best_psi
        # Greedy backward elimination; ties keep the RIS (favor purchase).
        psi = [1] * s
        current = self.utility(tuple(psi), prices)
        while True:
            best_drop, best_u = None, current
            for idx in range(s):
                if not psi[idx]:
                    continue
                trial = list(psi)
                trial[idx] = 0
                u = self.utility(tuple(trial), prices)
                if u > best_u:
                    best_drop, best_u = idx, u
            if best_drop is None:
                return tuple(psi)
            psi[best_drop] = 0
            current = best_u

    def purchase_decision(self, prices: PriceVector) -> FollowerState:
        return self.state_for(self.best_psi(prices), prices)


def purchase_decision(channels: ChannelSet, prices: PriceVector,
                      scenario: Scenario, exhaustive_cap: int = 5) -> FollowerState:
    """Follower best response including the purchase-set choice."""
    solver = FollowerSolver(channels, scenario, exhaustive_cap=exhaustive_cap)
    return solver.purchase_decision(prices)
