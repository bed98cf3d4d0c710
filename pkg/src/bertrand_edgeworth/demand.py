"""Discrete per-period demand distributions.

A ``DemandModel`` holds ``pmf[i] = P(demand == i)`` for ``i = 0..M``. Sums
that formally run to infinity are cut at ``M``; the residual tail probability
is folded into ``pmf[M]`` so the stored pmf always sums to one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import InvalidParameterError

DEFAULT_TRUNC_TOL = 1e-12
EXPLICIT_SUM_TOL = 1e-9


class DemandKind(str, enum.Enum):
    BERNOULLI = "bernoulli"
    EXPLICIT = "explicit"
    POISSON = "poisson"


@dataclass(frozen=True)
class DemandModel:
    pmf: tuple[float, ...]
    tail_mass: float = 0.0
    kind: DemandKind = DemandKind.EXPLICIT
    # construction parameter kept for display and config round-trips
    parameter: float | None = None

    def __post_init__(self):
        if not self.pmf:
            raise InvalidParameterError("pmf must have at least one entry")
        if any(not (0.0 <= x <= 1.0) for x in self.pmf):
            raise InvalidParameterError(f"pmf entries must lie in [0, 1]: {self.pmf}")
        if abs(math.fsum(self.pmf) - 1.0) > 1e-12:
            raise InvalidParameterError(f"pmf must sum to 1, got {math.fsum(self.pmf)!r}")
        if self.kind is DemandKind.BERNOULLI and len(self.pmf) != 2:
            raise InvalidParameterError("Bernoulli demand needs exactly two pmf entries")

    @property
    def max_demand(self) -> int:
        return len(self.pmf) - 1

    @property
    def is_binary(self) -> bool:
        return self.kind is DemandKind.BERNOULLI

    def prob(self, i: int) -> float:
        """``P(demand == i)``; zero beyond the truncation point."""
        if i < 0 or i > self.max_demand:
            return 0.0
        return self.pmf[i]

    def tail(self, k: int) -> float:
        """``P(demand >= k)``, summed directly to avoid cancellation."""
        if k <= 0:
            return 1.0
        return math.fsum(self.pmf[k:])

    def cumulative(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.pmf, dtype=float))

    def describe(self) -> str:
        if self.kind is DemandKind.BERNOULLI:
            return f"bernoulli(q={self.pmf[0]!r})"
        if self.kind is DemandKind.POISSON:
            return f"poisson(mean={self.parameter!r})"
        return "explicit(" + ";".join(repr(x) for x in self.pmf) + ")"


def make_bernoulli(q: float) -> DemandModel:
    """Binary demand: no buyer with probability ``q``, one buyer otherwise."""
    q = float(q)
    if not (0.0 < q < 1.0):
        raise InvalidParameterError(f"Bernoulli q must lie in (0, 1), got {q!r}")
    return DemandModel(pmf=(q, 1.0 - q), kind=DemandKind.BERNOULLI, parameter=q)


def make_explicit(probs: Sequence[float]) -> DemandModel:
    """Demand from an explicit pmf, rescaled if it is within 1e-9 of summing to one."""
    probs = [float(x) for x in probs]
    if not probs:
        raise InvalidParameterError("explicit pmf is empty")
    if any(x < 0.0 or math.isnan(x) for x in probs):
        raise InvalidParameterError(f"explicit pmf has a negative entry: {probs}")
    total = math.fsum(probs)
    if abs(total - 1.0) > EXPLICIT_SUM_TOL:
        raise InvalidParameterError(f"explicit pmf sums to {total!r}, not 1")
    pmf = tuple(x / total for x in probs)
    # one final fsum-based touch-up keeps the stored total within an ulp of one
    drift = 1.0 - math.fsum(pmf)
    if drift:
        j = max(range(len(pmf)), key=lambda i: pmf[i])
        pmf = pmf[:j] + (pmf[j] + drift,) + pmf[j + 1:]
    return DemandModel(pmf=pmf, kind=DemandKind.EXPLICIT)


def make_poisson(mean: float, trunc_tol: float = DEFAULT_TRUNC_TOL) -> DemandModel:
    """Poisson demand truncated at the first ``M`` with ``P(D > M) <= trunc_tol``.

    The discarded tail is added to ``pmf[M]`` and recorded in ``tail_mass``.
    """
    mean = float(mean)
    if not (mean > 0.0) or math.isinf(mean):
        raise InvalidParameterError(f"Poisson mean must be positive and finite, got {mean!r}")
    if not (0.0 < trunc_tol <= 1e-6):
        raise InvalidParameterError(f"trunc_tol must lie in (0, 1e-6], got {trunc_tol!r}")
    dist = stats.poisson(mean)
    m = 0
    while dist.sf(m) > trunc_tol:
        m += 1
    pmf = [float(x) for x in dist.pmf(np.arange(m + 1))]
    tail = float(dist.sf(m))
    pmf[-1] += tail
    # pmf() and sf() round independently; absorb the leftover into the largest entry
    drift = 1.0 - math.fsum(pmf)
    j = int(np.argmax(pmf))
    pmf[j] += drift
    return DemandModel(pmf=tuple(pmf), tail_mass=tail, kind=DemandKind.POISSON, parameter=mean)
