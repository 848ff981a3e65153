import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splitfed_latency.channel import dbm_to_watts
from splitfed_latency.decision import Assignment, Decision
from splitfed_latency.delay import objective, workloads
from splitfed_latency.optimizer import check_constraints
from splitfed_latency.power import (InfeasibleError, oracle_grid_solve, random_feasible_objective,
                                    solve_power)
from splitfed_latency.scenario import LayerProfile, ServerProfile
from conftest import make_scenario


def tiny(seed, per_client=1, K=2):
    rng = np.random.default_rng(seed)
    n = K * per_client
    s = make_scenario(f=tuple(rng.uniform(1e9, 1.6e9, K)),
                      dist_main=tuple(rng.uniform(0.08, 0.12, K)),
                      dist_fed=tuple(rng.uniform(0.001, 0.02, K)),
                      bw_main=tuple(rng.uniform(10e3, 40e3, n)),
                      bw_fed=tuple(rng.uniform(10e3, 40e3, n)),
                      pmax=dbm_to_watts(rng.uniform(10.0, 41.76)))
    owner = np.repeat(np.arange(K), per_client)
    return s, Assignment.from_owners(owner, owner, K)


def solve(s, a, split=2, rank=1):
    w = workloads(s.model, split, rank)
    return solve_power(s, a, w, s.ranks.E(rank), s.ranks.local_steps), w


class TestSolvePower:
    def test_symmetric_clients(self):
        s = make_scenario(server=ServerProfile(power_cap_main=0.3, power_cap_fed=0.3), pmax=1.0)
        a = Assignment.from_owners([0, 1], [0, 1], 2)
        sol, _ = solve(s, a)
        assert sol.psd_main[0] == pytest.approx(sol.psd_main[1], rel=1e-9)
        assert sol.rates.theta_main[0] == pytest.approx(sol.rates.theta_main[1], rel=1e-9)

    def test_no_data(self):
        layers = tuple(LayerProfile(1e9, 2e9) for _ in range(3))
        s = make_scenario(layers=layers)
        a = Assignment.from_owners([0, 1], [0, 1], 2)
        sol, w = solve(s, a)
        assert np.all(sol.psd_main == 0) and np.all(sol.psd_fed == 0)
        assert sol.rates.T3 == 0.0
        d = Decision(a, sol.psd_main, sol.psd_fed, 2, 1)
        assert sol.rates.T1 == pytest.approx(float(np.max(
            s.model.batch_size * (w.client_fp + w.client_fp_lora) / 1024 / s.client_arrays["compute_rate"])))
        assert objective(s, d) == pytest.approx(sol.objective)

    def test_zero_budget(self):
        a = Assignment.from_owners([0, 1], [0, 1], 2)
        s0 = make_scenario(server=ServerProfile(power_cap_main=0.0, power_cap_fed=0.0))
        with pytest.raises(InfeasibleError):
            solve(s0, a)
        with pytest.raises(InfeasibleError):
            oracle_grid_solve(s0, a, workloads(s0.model, 2, 1), 30, 1)

    def test_solution_is_feasible_and_consistent(self):
        for seed in range(10):
            s, a = tiny(seed, per_client=2)
            sol, _ = solve(s, a)
            d = Decision(a, sol.psd_main, sol.psd_fed, 2, 1)
            assert check_constraints(s, d) == []
            assert objective(s, d) == pytest.approx(sol.objective, rel=1e-9)

    def test_bandwidth_proportional_rates(self):
        s = make_scenario(f=(1e9,), dist_main=(0.1,), dist_fed=(0.01,),
                          bw_main=(10e3, 30e3), bw_fed=(20e3, 20e3))
        a = Assignment.from_owners([0, 0], [0, 0], 1)
        sol, _ = solve(s, a)
        assert sol.rates.theta_main[1] / sol.rates.theta_main[0] == pytest.approx(3.0, rel=1e-9)
        assert sol.psd_main[0] == pytest.approx(sol.psd_main[1], rel=1e-9)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_grid_oracle(self, seed):
        s, a = tiny(seed)
        sol, w = solve(s, a)
        oracle = oracle_grid_solve(s, a, w, s.ranks.E(1), 1, grid_points=200)
        assert sol.objective <= oracle * 1.005
        assert sol.objective >= oracle * (1 - 0.005)

    def test_beats_random_points(self):
        rng = np.random.default_rng(5)
        for seed in range(5):
            s, a = tiny(seed, per_client=2)
            sol, w = solve(s, a)
            vals = random_feasible_objective(s, a, w, s.ranks.E(1), 1, rng, n=500)
            assert sol.objective <= vals.min() * (1 + 1e-9)

    def test_more_power_never_hurts(self):
        a = Assignment.from_owners([0, 1], [0, 1], 2)
        objs = [solve(make_scenario(pmax=p), a)[0].objective for p in (0.01, 0.1, 1.0, 10.0)]
        assert all(x >= y * (1 - 1e-9) for x, y in zip(objs, objs[1:]))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_within_tolerance_contract(self, seed):
        s, a = tiny(seed)
        w = workloads(s.model, 2, 1)
        coarse = solve_power(s, a, w, 30, 1, tol=1e-3).objective
        fine = solve_power(s, a, w, 30, 1, tol=1e-10).objective
        assert fine <= coarse <= fine + 1e-3 * (1 + fine)


class TestOracle:
    def test_symmetric_oracle(self):
        s = make_scenario(server=ServerProfile(power_cap_main=0.3, power_cap_fed=0.3), pmax=1.0)
        a = Assignment.from_owners([0, 1], [0, 1], 2)
        w = workloads(s.model, 2, 1)
        sol = solve_power(s, a, w, 30, 1)
        assert oracle_grid_solve(s, a, w, 30, 1) == pytest.approx(sol.objective, rel=0.005)

    def test_size_guard(self):
        s = make_scenario(bw_main=(1e3,) * 5)
        a = Assignment.from_owners([0, 1, 0, 1, 0], [0, 1], 2)
        with pytest.raises(ValueError):
            oracle_grid_solve(s, a, workloads(s.model, 2, 1), 30, 1)
