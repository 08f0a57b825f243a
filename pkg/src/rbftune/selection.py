"""Choosing a single hyperparameter pair from a search's tie set.

A search returns every probed point that achieved the maximal
cross-validated accuracy. The rules here reduce that set to one point:
corner rules pick extremes in a fixed coordinate order, meanCg averages
in log2 space (possibly landing between members), and randCg draws
uniformly with a seed after a canonical sort, so the outcome never
depends on set-iteration order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import HyperPoint

RULES = ("minCg", "mingC", "meanCg", "randCg", "maxCg", "maxgC")


@dataclass(frozen=True)
class TieSet:
    """Non-empty collection of equally good hyperparameter pairs."""

    pairs: tuple[HyperPoint, ...]

    def __post_init__(self):
        if len(self.pairs) == 0:
            raise ValueError("empty tie set")

    @classmethod
    def from_points(cls, points) -> "TieSet":
        """Build from an iterable, dropping duplicates (first seen wins)."""
        seen = set()
        unique = []
        for p in points:
            if p.key() not in seen:
                seen.add(p.key())
                unique.append(p)
        return cls(tuple(unique))

    def __len__(self) -> int:
        return len(self.pairs)

    def sorted_pairs(self) -> list[HyperPoint]:
        return sorted(self.pairs, key=lambda p: (p.log2c, p.log2gamma))


def select(tie_set: TieSet, rule: str, seed: int = 0) -> HyperPoint:
    """Apply a selection rule to a tie set.

    minCg: smallest log2C, then smallest log2gamma among those.
    mingC: smallest log2gamma, then smallest log2C.
    maxCg / maxgC: the corresponding maxima.
    meanCg: component-wise mean in log2 space (may not be a member).
    randCg: seeded uniform draw from the canonically sorted members.
    """
    pairs = tie_set.pairs
    if rule == "minCg":
        return min(pairs, key=lambda p: (p.log2c, p.log2gamma))
    if rule == "mingC":
        return min(pairs, key=lambda p: (p.log2gamma, p.log2c))
    if rule == "maxCg":
        return max(pairs, key=lambda p: (p.log2c, p.log2gamma))
    if rule == "maxgC":
        return max(pairs, key=lambda p: (p.log2gamma, p.log2c))
    if rule == "meanCg":
        return HyperPoint(
            float(np.mean([p.log2c for p in pairs])),
            float(np.mean([p.log2gamma for p in pairs])))
    if rule == "randCg":
        ordered = tie_set.sorted_pairs()
        rng = np.random.default_rng(seed)
        return ordered[int(rng.integers(0, len(ordered)))]
    raise ValueError(f"unknown selection rule {rule!r}; expected one of {RULES}")
