"""Exhaustive search over split point and LoRA rank at fixed link rates."""

from __future__ import annotations

import numpy as np

from .decision import Decision
from .delay import delays_from_rates, link_rates
from .scenario import NetworkScenario


def split_objectives(s: NetworkScenario, d: Decision, rates=None) -> np.ndarray:
    """Total delay for every split point 1..L-1 (index 0 is split 1)."""
    r_main, r_fed = link_rates(s, d) if rates is None else rates
    L = s.model.num_layers
    return np.array([delays_from_rates(s, sp, d.rank, r_main, r_fed).total for sp in range(1, L)])


def rank_objectives(s: NetworkScenario, d: Decision, rates=None) -> np.ndarray:
    """Total delay for every candidate rank, in candidate order."""
    r_main, r_fed = link_rates(s, d) if rates is None else rates
    return np.array([delays_from_rates(s, d.split, r, r_main, r_fed).total
                     for r in s.ranks.candidates])


def search_split(s: NetworkScenario, d: Decision, rates=None) -> int:
    """Best split point with everything else fixed; ties go to the smaller split."""
    return int(np.argmin(split_objectives(s, d, rates))) + 1


def search_rank(s: NetworkScenario, d: Decision, rates=None) -> int:
    """Best candidate rank with everything else fixed; ties go to the smaller rank."""
    return s.ranks.candidates[int(np.argmin(rank_objectives(s, d, rates)))]
