import numpy as np
import pytest

from splitfed_latency.decision import Assignment, Decision
from splitfed_latency.delay import delays_from_rates, link_rates
from splitfed_latency.optimizer import optimize_bcd
from splitfed_latency.scenario import LayerProfile, RankProfile, ServerProfile, default_scenario
from splitfed_latency.split_rank import rank_objectives, search_rank, search_split
from conftest import make_scenario

BIG = np.array([1e30, 1e30])


def decision(s, split=1, rank=1):
    a = Assignment.from_owners(np.arange(s.M) % s.K, np.arange(s.N) % s.K, s.K)
    return Decision(a, np.full(s.M, 1e-9), np.full(s.N, 1e-9), split, rank)


class TestSplit:
    def test_slow_clients_keep_one_layer(self):
        s = make_scenario(f=(1e6, 1e6), server=ServerProfile(compute_rate=1e12))
        assert search_split(s, decision(s, 2), (BIG, BIG)) == 1

    def test_tie_goes_to_smallest(self):
        layers = tuple(LayerProfile(1.0, 1.0, activation_bits=8e6) for _ in range(4))
        s = make_scenario(f=(1e30, 1e30), layers=layers, server=ServerProfile(compute_rate=1e30))
        assert search_split(s, decision(s, 3), (np.full(2, 1e6), np.full(2, 1e6))) == 1

    def test_cheapest_boundary(self):
        layers = (LayerProfile(1.0, 1.0, activation_bits=8e6), LayerProfile(1.0, 1.0, activation_bits=1e6),
                  LayerProfile(1.0, 1.0, activation_bits=8e6))
        s = make_scenario(layers=layers)
        rates = (np.full(2, 1e5), np.full(2, 1e5))
        assert search_split(s, decision(s, 1), rates) == 2
        t1 = delays_from_rates(s, 1, 1, *rates).total
        t2 = delays_from_rates(s, 2, 1, *rates).total
        assert t2 < t1


class TestRank:
    def test_constant_rounds_pick_smallest(self):
        s = make_scenario(ranks=RankProfile((1, 2, 4), {1: 10, 2: 10, 4: 10}))
        assert search_rank(s, decision(s)) == 1

    def test_inverse_rounds_pick_largest(self):
        s = make_scenario(ranks=RankProfile((1, 2, 4), {1: 400, 2: 200, 4: 100}))
        assert search_rank(s, decision(s)) == 4

    def test_calibrated_table_argmin(self):
        s = default_scenario(0)
        d, _ = optimize_bcd(s)
        totals = [delays_from_rates(s, d.split, r, *link_rates(s, d)).total for r in s.ranks.candidates]
        assert search_rank(s, d) == s.ranks.candidates[int(np.argmin(totals))]
        np.testing.assert_array_equal(rank_objectives(s, d), totals)

