"""Decision variables shared by the allocation, power and search blocks."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Assignment:
    """Binary subchannel assignment: ``main`` is K x M, ``fed`` is K x N."""

    main: np.ndarray
    fed: np.ndarray

    @classmethod
    def from_owners(cls, main_owner, fed_owner, K: int) -> Assignment:
        main_owner = np.asarray(main_owner, dtype=int)
        fed_owner = np.asarray(fed_owner, dtype=int)
        main = np.zeros((K, main_owner.size), dtype=int)
        fed = np.zeros((K, fed_owner.size), dtype=int)
        main[main_owner, np.arange(main_owner.size)] = 1
        fed[fed_owner, np.arange(fed_owner.size)] = 1
        return cls(main, fed)

    @classmethod
    def from_index_lists(cls, main_lists, fed_lists, M: int, N: int) -> Assignment:
        K = len(main_lists)
        main = np.zeros((K, M), dtype=int)
        fed = np.zeros((K, N), dtype=int)
        for k, idx in enumerate(main_lists):
            main[k, list(idx)] = 1
        for k, idx in enumerate(fed_lists):
            fed[k, list(idx)] = 1
        return cls(main, fed)

    @property
    def K(self) -> int:
        return self.main.shape[0]

    def main_owner(self) -> np.ndarray:
        return np.argmax(self.main, axis=0)

    def fed_owner(self) -> np.ndarray:
        return np.argmax(self.fed, axis=0)

    def index_lists(self) -> dict[str, list[list[int]]]:
        return {"main": [np.flatnonzero(row).tolist() for row in self.main],
                "fed": [np.flatnonzero(row).tolist() for row in self.fed]}

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return np.array_equal(self.main, other.main) and np.array_equal(self.fed, other.fed)


@dataclass(frozen=True, eq=False)
class Decision:
    """One candidate solution: assignment, per-subchannel PSDs, split point, rank.

    ``split`` is the number of leading layers kept on the client
    (``mu_j = 1`` iff ``j <= split``).
    """

    assignment: Assignment
    psd_main: np.ndarray
    psd_fed: np.ndarray
    split: int
    rank: int

    def replace(self, **changes) -> Decision:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        lists = self.assignment.index_lists()
        return {"main_subchannels": lists["main"], "fed_subchannels": lists["fed"],
                "psd_main": [float(p) for p in self.psd_main],
                "psd_fed": [float(p) for p in self.psd_fed],
                "split": int(self.split), "rank": int(self.rank)}

    @classmethod
    def from_dict(cls, d: dict) -> Decision:
        psd_main = np.array(d["psd_main"], dtype=float)
        psd_fed = np.array(d["psd_fed"], dtype=float)
        a = Assignment.from_index_lists(d["main_subchannels"], d["fed_subchannels"],
                                        psd_main.size, psd_fed.size)
        return cls(a, psd_main, psd_fed, int(d["split"]), int(d["rank"]))

    def __eq__(self, other):
        if not isinstance(other, Decision):
            return NotImplemented
        return (self.assignment == other.assignment and self.split == other.split
                and self.rank == other.rank and np.array_equal(self.psd_main, other.psd_main)
                and np.array_equal(self.psd_fed, other.psd_fed))
