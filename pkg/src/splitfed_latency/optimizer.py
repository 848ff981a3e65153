"""Block coordinate descent over assignment, power, split and rank, plus baselines.

Each outer iteration runs the greedy subchannel assignment, the convex
power step, the split search and the rank search in turn. A block's
result replaces the incumbent only if the total delay does not go up, so
the objective trace is non-increasing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .decision import Assignment, Decision
from .delay import objective, workloads
from .power import InfeasibleError, solve_power
from .scenario import NetworkScenario
from .split_rank import search_rank, search_split
from .subchannel import allocate_greedy

log = logging.getLogger(__name__)

REL_TOL = 1e-9
BASELINES = ("a", "b", "c", "d")


# ---------------------------------------------------------------------------
# constraints
# ---------------------------------------------------------------------------

def side_powers(s: NetworkScenario, d: Decision) -> tuple[np.ndarray, np.ndarray]:
    """Per-client transmit power (W) towards the main and federated servers."""
    a = d.assignment
    return a.main @ (d.psd_main * s.bw_main), a.fed @ (d.psd_fed * s.bw_fed)


def check_constraints(s: NetworkScenario, d: Decision) -> list[str]:
    """Violations of C1-C7 (relative tolerance 1e-9); empty means feasible."""
    out = []
    a = d.assignment
    for side, mat, n in (("main", a.main, s.M), ("fed", a.fed, s.N)):
        mat = np.asarray(mat)
        if mat.shape != (s.K, n):
            out.append(f"C1: {side} assignment has shape {mat.shape}, expected {(s.K, n)}")
            continue
        if not np.isin(mat, (0, 1)).all():
            out.append(f"C1: {side} assignment is not binary")
        for i in np.flatnonzero(mat.sum(axis=0) != 1):
            out.append(f"C2: {side} subchannel {i} has {int(mat[:, i].sum())} owners")
    L = s.model.num_layers
    if not (isinstance(d.split, (int, np.integer)) and 1 <= d.split <= L - 1):
        out.append(f"C3: split point {d.split!r} outside [1, {L - 1}]")
    shapes_ok = d.psd_main.shape == (s.M,) and d.psd_fed.shape == (s.N,)
    if not shapes_ok:
        out.append("C6: PSD vectors need one entry per subchannel")
    else:
        for side, psd in (("main", d.psd_main), ("fed", d.psd_fed)):
            for i in np.flatnonzero(~(psd >= 0)):
                out.append(f"C6: {side} subchannel {i} has PSD {psd[i]!r}")
    if shapes_ok and not any(v.startswith(("C1", "C2")) for v in out):
        p_main, p_fed = side_powers(s, d)
        pmax = s.client_arrays["max_power"]
        for side, p in (("main", p_main), ("fed", p_fed)):
            for k in np.flatnonzero(p > pmax * (1 + REL_TOL)):
                out.append(f"C4: client {k} {side}-link power {p[k]:.6g} W exceeds {pmax[k]:.6g} W")
        for side, p, cap in (("main", p_main, s.server.power_cap_main),
                             ("fed", p_fed, s.server.power_cap_fed)):
            if p.sum() > cap * (1 + REL_TOL):
                out.append(f"C5: total {side}-link power {p.sum():.6g} W exceeds {cap:.6g} W")
    if not (isinstance(d.rank, (int, np.integer)) and d.rank >= 1):
        out.append(f"C7: rank {d.rank!r} is not a positive integer")
    elif d.rank not in s.ranks.rounds:
        out.append(f"rank {d.rank} has no E(r) entry")
    return out


def fit_to_budget(s: NetworkScenario, a: Assignment, psd_main, psd_fed,
                  saturate: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Scale PSDs into the C4/C5 budgets.

    With ``saturate`` each side is multiplied by one common factor chosen so
    the tightest budget binds; otherwise only offending clients are scaled
    down and then the whole side if the aggregate cap is exceeded.
    """
    pmax = s.client_arrays["max_power"]
    out = []
    for mat, psd, bw, cap in ((a.main, psd_main, s.bw_main, s.server.power_cap_main),
                              (a.fed, psd_fed, s.bw_fed, s.server.power_cap_fed)):
        psd = np.asarray(psd, dtype=float).copy()
        per_client = mat @ (psd * bw)
        if saturate:
            with np.errstate(divide="ignore"):
                ratios = np.where(per_client > 0, pmax / per_client, np.inf)
            total = per_client.sum()
            factor = min(np.min(ratios), cap / total if total > 0 else np.inf)
            if math.isfinite(factor):
                psd *= factor
        else:
            scale = np.where(per_client > pmax, pmax / np.maximum(per_client, 1e-300), 1.0)
            psd *= scale[np.argmax(mat, axis=0)]
            total = float(mat.sum(axis=0) @ (psd * bw))
            if total > cap:
                psd *= cap / total
        out.append(psd)
    return out[0], out[1]


# ---------------------------------------------------------------------------
# BCD
# ---------------------------------------------------------------------------

@dataclass
class BcdTrace:
    """Objective after initialisation (index 0) and after every outer iteration."""

    objectives: list[float] = field(default_factory=list)
    decisions: list[Decision] = field(default_factory=list)
    reason: str = ""
    warnings: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.objectives) - 1


def initial_decision(s: NetworkScenario, split: int | None = None, rank: int | None = None,
                     warnings: list[str] | None = None) -> Decision:
    """Smallest rank, middle split, uniform PSD filling the aggregate caps, greedy channels.

    The uniform PSD is lowered when the clients' own caps add up to less
    than the aggregate cap, so that an even share of the band is feasible
    for every client and the greedy pass can still hand out channels.
    """
    L = s.model.num_layers
    split = min(max(math.ceil(L / 2), 1), L - 1) if split is None else split
    rank = s.ranks.candidates[0] if rank is None else rank
    client_total = float(s.client_arrays["max_power"].sum())
    psd_main = np.full(s.M, min(s.server.power_cap_main, client_total) / s.bw_main.sum())
    psd_fed = np.full(s.N, min(s.server.power_cap_fed, client_total) / s.bw_fed.sum())
    a = allocate_greedy(s, split, rank, psd_main, psd_fed, warnings)
    psd_main, psd_fed = fit_to_budget(s, a, psd_main, psd_fed)
    return Decision(a, psd_main, psd_fed, split, rank)


def _power_step(s: NetworkScenario, a: Assignment, d: Decision, tol: float) -> Decision:
    w = workloads(s.model, d.split, d.rank)
    sol = solve_power(s, a, w, s.ranks.E(d.rank), s.ranks.local_steps, tol)
    return Decision(a, sol.psd_main, sol.psd_fed, d.split, d.rank)


def optimize_bcd(s: NetworkScenario, eps: float = 1e-3, max_iter: int = 50, *,
                 init: Decision | None = None, fixed_split: int | None = None,
                 fixed_rank: int | None = None, tol: float = 1e-6) -> tuple[Decision, BcdTrace]:
    """Minimise total training delay by block coordinate descent.

    ``fixed_split``/``fixed_rank`` freeze the corresponding block (used by
    the baselines). ``init`` warm-starts from a feasible decision.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    trace = BcdTrace()
    cur = init if init is not None else initial_decision(s, fixed_split, fixed_rank, trace.warnings)
    if fixed_split is not None:
        cur = cur.replace(split=fixed_split)
    if fixed_rank is not None:
        cur = cur.replace(rank=fixed_rank)
    best = objective(s, cur)
    trace.objectives.append(best)
    trace.decisions.append(cur)
    trace.reason = "max-iterations"

    def offer(cand: Decision) -> None:
        nonlocal cur, best
        val = objective(s, cand)
        if val <= best:
            cur, best = cand, val

    for tau in range(1, max_iter + 1):
        prev = best
        # P1: greedy channels, judged together with their optimal powers
        a_new = allocate_greedy(s, cur.split, cur.rank, cur.psd_main, cur.psd_fed, trace.warnings)
        try:
            offer(_power_step(s, a_new, cur, tol))
        except InfeasibleError as exc:
            log.debug("greedy assignment rejected: %s", exc)
        # P2: power on the incumbent assignment
        offer(_power_step(s, cur.assignment, cur, tol))
        # P3 / P4 at fixed rates
        if fixed_split is None:
            offer(cur.replace(split=search_split(s, cur)))
        if fixed_rank is None:
            offer(cur.replace(rank=search_rank(s, cur)))
        trace.objectives.append(best)
        trace.decisions.append(cur)
        if abs(best - prev) <= eps:
            trace.reason = "tolerance"
            break
    return cur, trace


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def random_assignment(s: NetworkScenario, rng: np.random.Generator) -> Assignment:
    """Uniform random owners, with one guaranteed subchannel per client and server."""
    owners = []
    for n in (s.M, s.N):
        owner = rng.integers(0, s.K, n)
        guaranteed = rng.permutation(n)[:s.K]
        owner[guaranteed] = rng.permutation(s.K)
        owners.append(owner)
    return Assignment.from_owners(owners[0], owners[1], s.K)


def random_decision(s: NetworkScenario, rng: np.random.Generator) -> Decision:
    a = random_assignment(s, rng)
    psd_main, psd_fed = fit_to_budget(s, a, rng.uniform(0.0, 1.0, s.M), rng.uniform(0.0, 1.0, s.N),
                                      saturate=True)
    split = int(rng.integers(1, s.model.num_layers))
    rank = int(rng.choice(s.ranks.candidates))
    return Decision(a, psd_main, psd_fed, split, rank)


def run_baseline(s: NetworkScenario, which: str, seed: int = 0, eps: float = 1e-3,
                 max_iter: int = 50) -> tuple[Decision, float, int]:
    """Like :func:`evaluate_baseline` but also returns the BCD iteration count (0 for a, b)."""
    if which not in BASELINES:
        raise ValueError(f"unknown baseline {which!r}; expected one of {BASELINES}")
    rng = np.random.default_rng([seed, ord(which)])
    d = random_decision(s, rng)
    iterations = 0
    if which == "b":
        d = d.replace(split=search_split(s, d))
        d = d.replace(rank=search_rank(s, d))
    elif which == "c":
        d, tr = optimize_bcd(s, eps, max_iter, fixed_split=d.split)
        iterations = tr.iterations
    elif which == "d":
        d, tr = optimize_bcd(s, eps, max_iter, fixed_rank=d.rank)
        iterations = tr.iterations
    return d, objective(s, d), iterations


def evaluate_baseline(s: NetworkScenario, which: str, seed: int = 0,
                      eps: float = 1e-3, max_iter: int = 50) -> tuple[Decision, float]:
    """Decision and total delay of baseline ``which``, deterministic per seed.

    a: random channels, PSDs, split and rank.
    b: random channels and PSDs; split and rank searched.
    c: random split; channels, power and rank optimised.
    d: random rank; channels, power and split optimised.
    """
    d, value, _ = run_baseline(s, which, seed, eps, max_iter)
    return d, value
