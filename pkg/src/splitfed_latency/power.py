"""Power control for a fixed subchannel assignment, split point and rank.

With the rate substitution ``theta = B log2(1 + p g)`` the problem is
convex, and it separates into a main-server part (minimise T1, the
FP-plus-upload barrier) and a federated-server part (minimise T3). For a
candidate barrier ``T`` each client needs a total rate
``bits / (T - base_k)``. Spreading a required rate over one client's
subchannels costs least at equal spectral efficiency (the per-client gain
is shared by all of its subchannels), so the minimum power has a closed
form and feasibility of ``T`` reduces to checking the per-client and
aggregate budgets. The smallest feasible ``T`` is found by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import psd_for_rate  # noqa: F401  (re-exported)
from .decision import Assignment
from .delay import WorkloadSummary
from .scenario import NetworkScenario


_FEAS = 1e-12


class InfeasibleError(RuntimeError):
    """Raised when positive data must cross a link that cannot carry any rate."""


@dataclass(frozen=True, eq=False)
class RateVars:
    theta_main: np.ndarray   # bit/s per main subchannel
    theta_fed: np.ndarray    # bit/s per fed subchannel
    T1: float
    T2: float
    T3: float


@dataclass(frozen=True, eq=False)
class PowerSolution:
    rates: RateVars
    psd_main: np.ndarray
    psd_fed: np.ndarray
    objective: float
    trace: list = field(default_factory=list)


@dataclass(frozen=True)
class _Side:
    name: str
    base: np.ndarray        # delay already incurred before the transfer (s)
    bits: float             # payload per client (bits)
    owner: np.ndarray       # subchannel -> client
    bw: np.ndarray
    snr: np.ndarray         # per client, 1/(W/Hz)
    pmax: np.ndarray
    p_total: float

    @property
    def K(self) -> int:
        return self.base.size


def _client_bandwidth(side: _Side) -> np.ndarray:
    return np.bincount(side.owner, weights=side.bw, minlength=side.K)


def _min_powers(side: _Side, W: np.ndarray, T: float) -> np.ndarray:
    """Least per-client power meeting barrier ``T`` (``inf`` where impossible)."""
    slack = T - side.base
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        eff = np.where(slack > 0, side.bits / np.where(slack > 0, slack, 1.0) / W, np.inf)
        p = W * np.expm1(eff * math.log(2.0)) / side.snr
    return np.where(np.isfinite(p), p, np.inf)


def _margin(side: _Side, W: np.ndarray, T: float) -> float:
    p = _min_powers(side, W, T)
    if not np.all(np.isfinite(p)):
        return math.inf
    return max(float(np.max((p - side.pmax) / side.pmax)), (float(p.sum()) - side.p_total) / side.p_total)


def _solve_side(side: _Side, tol_t: float, trace: list | None):
    """Return (T*, per-subchannel theta, per-subchannel psd)."""
    M = side.owner.size
    if side.bits == 0:
        return float(np.max(side.base)), np.zeros(M), np.zeros(M)
    W = _client_bandwidth(side)
    if np.any(W <= 0) or np.any(side.snr <= 0) or np.any(side.pmax <= 0) or side.p_total <= 0:
        raise InfeasibleError(f"{side.name}: a client must send {side.bits:g} bits over a link "
                              "with no bandwidth, gain or power budget")
    q = np.minimum(side.pmax, side.p_total / side.K)
    rate_hi = W * np.log2(1.0 + q / W * side.snr)
    if np.any(rate_hi <= 0):
        raise InfeasibleError(f"{side.name}: zero achievable rate at full power")
    # lo is infeasible (needs infinite rate); hi is feasible by construction
    lo = float(np.max(side.base))
    hi = float(np.max(side.base + side.bits / rate_hi))
    for _ in range(200):
        if hi - lo <= tol_t:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        m = _margin(side, W, mid)
        if trace is not None:
            trace.append((side.name, mid, m))
        if m <= _FEAS:
            hi = mid
        else:
            lo = mid
    eff = side.bits / (hi - side.base) / W
    theta = eff[side.owner] * side.bw
    psd = np.expm1(eff * math.log(2.0))[side.owner] / side.snr[side.owner]
    return hi, theta, psd


def _sides(s: NetworkScenario, a: Assignment, w: WorkloadSummary):
    b = s.model.batch_size
    c = s.client_arrays
    t_fp = b * c["cycles_per_flop"] * (w.client_fp + w.client_fp_lora) / c["compute_rate"]
    t_bp = b * c["cycles_per_flop"] * (w.client_bp + w.client_bp_lora) / c["compute_rate"]
    main = _Side("main", t_fp, b * w.activation_bits, a.main_owner(), s.bw_main, s.snr_main,
                 c["max_power"], s.server.power_cap_main)
    fed = _Side("fed", np.zeros(s.K), w.client_lora_bits, a.fed_owner(), s.bw_fed, s.snr_fed,
                c["max_power"], s.server.power_cap_fed)
    server_scale = s.K * b * s.server.cycles_per_flop / s.server.compute_rate
    t_sfp = server_scale * (w.server_fp + w.server_fp_lora)
    t_sbp = server_scale * (w.server_bp + w.server_bp_lora)
    return main, fed, t_bp, t_sfp, t_sbp


def p2_objective(E: int, I: int, T1: float, T_sfp: float, T_sbp: float, T2: float, T3: float) -> float:
    return E * (I * (T1 + T_sfp + T_sbp + T2) + T3)


def solve_power(s: NetworkScenario, a: Assignment, w: WorkloadSummary, E: int, I: int,
                tol: float = 1e-6, trace: list | None = None) -> PowerSolution:
    """Optimal PSDs for a fixed assignment; objective within ``tol * (1 + obj)``.

    Pass a list as ``trace`` to collect ``(side, T, margin)`` evaluations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    main, fed, t_bp, t_sfp, t_sbp = _sides(s, a, w)
    T2 = float(np.max(t_bp))
    # the objective is at least its value with both barriers at their floors
    floor = p2_objective(E, I, float(np.max(main.base)), t_sfp, t_sbp, T2, 0.0)
    budget = tol * (1.0 + floor)
    T1, th_m, psd_m = _solve_side(main, budget / (2.0 * E * I), trace)
    T3, th_f, psd_f = _solve_side(fed, budget / (2.0 * E), trace)
    obj = p2_objective(E, I, T1, t_sfp, t_sbp, T2, T3)
    return PowerSolution(RateVars(th_m, th_f, T1, T2, T3), psd_m, psd_f, obj,
                         trace if trace is not None else [])


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

def _pareto(power: np.ndarray, delay: np.ndarray):
    """Points not dominated in (power, delay), sorted by power."""
    ok = np.isfinite(delay)
    power, delay = power[ok], delay[ok]
    order = np.lexsort((delay, power))
    power, delay = power[order], delay[order]
    keep = np.ones(power.size, bool)
    if power.size:
        prev_best = np.minimum.accumulate(delay)
        keep[1:] = delay[1:] < prev_best[:-1]
    return power[keep], delay[keep]


def _grid_side(side: _Side, grid_points: int) -> float:
    fronts = []
    for k in range(side.K):
        chans = np.flatnonzero(side.owner == k)
        cap = min(side.pmax[k], side.p_total)
        axes = [np.linspace(0.0, cap / side.bw[i], grid_points) for i in chans]
        if not axes:
            fronts.append((np.zeros(1), np.array([side.base[k] if side.bits == 0 else np.inf])))
            continue
        mesh = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])
        bw = side.bw[chans][:, None]
        power = np.sum(mesh * bw, axis=0)
        rate = np.sum(bw * np.log2(1.0 + mesh * side.snr[k]), axis=0)
        with np.errstate(divide="ignore"):
            delay = side.base[k] + np.where(side.bits == 0, 0.0, side.bits / rate)
        feasible = power <= side.pmax[k] * (1 + 1e-12)
        fronts.append(_pareto(power[feasible], delay[feasible]))
    P, T = fronts[0]
    for Pk, Tk in fronts[1:]:
        P, T = _pareto(np.add.outer(P, Pk).ravel(), np.maximum.outer(T, Tk).ravel())
    ok = P <= side.p_total * (1 + 1e-12)
    return float(np.min(T[ok])) if ok.any() else math.inf


def oracle_grid_solve(s: NetworkScenario, a: Assignment, w: WorkloadSummary, E: int, I: int,
                      grid_points: int = 200) -> float:
    """Brute-force P2 objective over a per-subchannel PSD grid (tiny instances only)."""
    if s.M > 4 or s.N > 4:
        raise ValueError("grid oracle is limited to at most 4 subchannels per server")
    main, fed, t_bp, t_sfp, t_sbp = _sides(s, a, w)
    T1 = _grid_side(main, grid_points)
    T3 = _grid_side(fed, grid_points)
    if not (math.isfinite(T1) and math.isfinite(T3)):
        raise InfeasibleError("no grid point delivers the required data")
    return p2_objective(E, I, T1, t_sfp, t_sbp, float(np.max(t_bp)), T3)


def random_feasible_objective(s: NetworkScenario, a: Assignment, w: WorkloadSummary, E: int, I: int,
                              rng: np.random.Generator, n: int = 1000) -> np.ndarray:
    """Objectives of ``n`` random PSD vectors scaled into the budgets (spot checks)."""
    main, fed, t_bp, t_sfp, t_sbp = _sides(s, a, w)
    T2 = float(np.max(t_bp))

    def barrier(side: _Side, psd: np.ndarray) -> np.ndarray:
        power = np.zeros((n, side.K))
        rate = np.zeros((n, side.K))
        for i in range(side.owner.size):
            k = side.owner[i]
            power[:, k] += psd[:, i] * side.bw[i]
            rate[:, k] += side.bw[i] * np.log2(1.0 + psd[:, i] * side.snr[k])
        with np.errstate(divide="ignore"):
            t = side.base + (0.0 if side.bits == 0 else side.bits / rate)
        return np.max(t, axis=1)

    out = []
    for side in (main, fed):
        psd = rng.uniform(0.0, 1.0, (n, side.owner.size))
        power = np.zeros((n, side.K))
        for i in range(side.owner.size):
            power[:, side.owner[i]] += psd[:, i] * side.bw[i]
        scale = np.minimum(np.min(side.pmax / np.maximum(power, 1e-300), axis=1),
                           side.p_total / power.sum(axis=1))
        out.append(barrier(side, psd * scale[:, None]))
    return E * (I * (out[0] + t_sfp + t_sbp + T2) + out[1])


__all__ = ["InfeasibleError", "RateVars", "PowerSolution", "solve_power", "oracle_grid_solve",
           "psd_for_rate", "random_feasible_objective", "p2_objective"]
