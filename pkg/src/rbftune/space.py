"""Hyperparameter search space for the RBF SVM: (log2 C, log2 gamma) pairs.

All search code works in log2 coordinates. The box below is the only
region any searcher is allowed to probe; points proposed outside it are
clamped to the nearest boundary before evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

LOG2C_MIN = -5.0
LOG2C_MAX = 15.0
LOG2GAMMA_MIN = -15.0
LOG2GAMMA_MAX = 3.0

# Cache keys quantize log2 coordinates to this absolute resolution.
QUANTUM = 1e-9


@dataclass(frozen=True)
class HyperPoint:
    """One (log2 C, log2 gamma) candidate."""

    log2c: float
    log2gamma: float

    @property
    def c(self) -> float:
        return 2.0 ** self.log2c

    @property
    def gamma(self) -> float:
        return 2.0 ** self.log2gamma

    def key(self) -> tuple[int, int]:
        """Quantized identity used for caching and tie-set membership."""
        return (round(self.log2c / QUANTUM), round(self.log2gamma / QUANTUM))

    def to_json_dict(self) -> dict:
        return {"log2C": self.log2c, "log2gamma": self.log2gamma}

    @staticmethod
    def from_json_dict(d: dict) -> "HyperPoint":
        return HyperPoint(float(d["log2C"]), float(d["log2gamma"]))


@dataclass(frozen=True)
class SearchBox:
    """Axis-aligned box of admissible log2 coordinates."""

    c_lo: float = LOG2C_MIN
    c_hi: float = LOG2C_MAX
    g_lo: float = LOG2GAMMA_MIN
    g_hi: float = LOG2GAMMA_MAX

    @property
    def c_span(self) -> float:
        return self.c_hi - self.c_lo

    @property
    def g_span(self) -> float:
        return self.g_hi - self.g_lo

    @property
    def center(self) -> HyperPoint:
        return HyperPoint((self.c_lo + self.c_hi) / 2.0, (self.g_lo + self.g_hi) / 2.0)

    def contains(self, p: HyperPoint) -> bool:
        return self.c_lo <= p.log2c <= self.c_hi and self.g_lo <= p.log2gamma <= self.g_hi

    def clip(self, p: HyperPoint) -> HyperPoint:
        c = min(max(p.log2c, self.c_lo), self.c_hi)
        g = min(max(p.log2gamma, self.g_lo), self.g_hi)
        if c == p.log2c and g == p.log2gamma:
            return p
        return HyperPoint(c, g)

    def from_unit(self, u: float, v: float) -> HyperPoint:
        """Map a point of the unit square into the box."""
        return HyperPoint(self.c_lo + u * self.c_span, self.g_lo + v * self.g_span)


DEFAULT_BOX = SearchBox()
