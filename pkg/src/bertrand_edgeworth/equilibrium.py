"""Equilibrium pricing strategies for the one-period subgame at ``(n, t)``.

Four variants are covered:

* binary demand, two sellers: both post the reservation price (a pure strategy);
* binary demand, three or more sellers: a canonical candidate with two sellers at
  the reservation price and the rest at ``pbar`` (verify before relying on it);
* general demand, two sellers: the closed-form mixed strategy ``W_t``;
* general demand, ``n`` sellers: the symmetric mixed strategy ``G^{-1}``.

Every strategy is a ``MixedStrategyCdf``; pure strategies are a single atom.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ConditionsViolatedError,
    InternalConsistencyError,
    InvalidParameterError,
    WrongVariantError,
)
from .valuation import MarketParams, infinite_horizon, value_table

DEFAULT_CDF_GRID = 512


def _as_output(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


class MixedStrategyCdf:
    """A price distribution on ``[support_lo, support_hi]``.

    Subclasses implement ``_cdf``, ``_cdf_left`` and ``_quantile`` on float arrays;
    the public methods accept scalars or arrays.
    """

    support_lo: float
    support_hi: float
    atoms: tuple[tuple[float, float], ...] = ()

    @property
    def is_pure(self) -> bool:
        return len(self.atoms) == 1 and self.atoms[0][1] == 1.0

    def cdf(self, p):
        """``P(price <= p)``."""
        arr = np.asarray(p, dtype=float)
        return _as_output(self._cdf(np.atleast_1d(arr)).reshape(arr.shape), arr.ndim == 0)

    def cdf_left(self, p):
        """``P(price < p)``, the left limit of the cdf."""
        arr = np.asarray(p, dtype=float)
        return _as_output(self._cdf_left(np.atleast_1d(arr)).reshape(arr.shape), arr.ndim == 0)

    def quantile(self, u):
        """Generalized inverse ``inf{p : cdf(p) >= u}`` for ``u`` in ``[0, 1)``."""
        arr = np.asarray(u, dtype=float)
        flat = np.atleast_1d(arr)
        if np.any((flat < 0.0) | (flat > 1.0)):
            raise InvalidParameterError("quantile level must lie in [0, 1]")
        return _as_output(self._quantile(flat).reshape(arr.shape), arr.ndim == 0)

    def _cdf_left(self, p):
        return self._cdf(p)


class AtomStrategy(MixedStrategyCdf):
    """Pure strategy: post ``price`` with probability one."""

    def __init__(self, price: float):
        self.price = float(price)
        self.support_lo = self.support_hi = self.price
        self.atoms = ((self.price, 1.0),)

    def _cdf(self, p):
        return (p >= self.price).astype(float)

    def _cdf_left(self, p):
        return (p > self.price).astype(float)

    def _quantile(self, u):
        return np.full(u.shape, self.price)

    def __repr__(self):
        return f"AtomStrategy({self.price!r})"


class DuopolyMixedCdf(MixedStrategyCdf):
    """``W(p) = (a - b p) / (q1 (c - p))`` on ``(lo, hi)``.

    Here ``a = V(2,t) - q0 delta V(2,t-1)``, ``b = 1 - q0`` and ``c = delta V(1,t-1)``.
    """

    def __init__(self, a: float, b: float, q1: float, c: float, lo: float, hi: float):
        self.a, self.b, self.q1, self.c = a, b, q1, c
        self.support_lo, self.support_hi = lo, hi

    def _cdf(self, p):
        out = np.where(p >= self.support_hi, 1.0, 0.0)
        inside = (p > self.support_lo) & (p < self.support_hi)
        x = p[inside]
        out[inside] = np.clip((self.a - self.b * x) / (self.q1 * (self.c - x)), 0.0, 1.0)
        return out

    def _quantile(self, u):
        # b - u q1 >= P(D >= 2) > 0, so the denominator never vanishes
        p = (self.a - u * self.q1 * self.c) / (self.b - u * self.q1)
        return np.clip(p, self.support_lo, self.support_hi)

    def __repr__(self):
        return f"DuopolyMixedCdf(lo={self.support_lo!r}, hi={self.support_hi!r})"


class GFunction:
    """Price at which a seller is indifferent when each opponent undercuts w.p. ``x``.

    ``G(x) = (tail * pbar + sum_i q_i Z_{i-1,n}(x) c_i) / (tail + sum_i q_i Z_{i-1,n}(x))``
    for ``i = 1..n-1``, with ``c_i`` the discounted continuation value after ``i`` rivals sell
    and ``tail = P(D >= n)``.
    """

    def __init__(self, n: int, weights: Sequence[float], continuation: Sequence[float],
                 tail: float, pbar: float):
        self.n = n
        self.weights = np.asarray(weights, dtype=float)
        self.continuation = np.asarray(continuation, dtype=float)
        self.tail = float(tail)
        self.pbar = float(pbar)

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        flat = np.atleast_1d(arr)
        z = z_table(self.n, flat)  # shape (n-1, m): row k holds Z_{k,n}
        wz = self.weights[:, None] * z
        num = self.tail * self.pbar + (wz * self.continuation[:, None]).sum(axis=0)
        den = self.tail + wz.sum(axis=0)
        if np.any(den <= 0.0):
            raise ConditionsViolatedError(
                "G is 0/0: P(D >= n) = 0 and every opponent undercuts (x = 1)"
            )
        return _as_output((num / den).reshape(arr.shape), arr.ndim == 0)


class SymmetricMixedCdf(MixedStrategyCdf):
    """``cdf = G^{-1}`` on ``(lo, hi)``, inverted by bisection; ``quantile = G``."""

    def __init__(self, g: GFunction, lo: float, hi: float, inv_tol: float):
        self.g = g
        self.support_lo, self.support_hi = lo, hi
        self.inv_tol = inv_tol

    def _cdf(self, p):
        out = np.where(p >= self.support_hi, 1.0, 0.0)
        inside = (p > self.support_lo) & (p < self.support_hi)
        if np.any(inside):
            out[inside] = self._invert(p[inside])
        return out

    def _invert(self, target):
        g0, g1 = self.g(0.0), self.g(1.0)
        if np.any(g0 - target > self.inv_tol) or np.any(target - g1 > self.inv_tol):
            raise InternalConsistencyError(
                f"G does not bracket the price: G(0)={g0!r}, G(1)={g1!r}"
            )
        lo = np.zeros_like(target)
        hi = np.ones_like(target)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            moving = (mid > lo) & (mid < hi)
            if not moving.any():
                break
            up = self.g(mid) >= target
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
        resid = np.abs(self.g(hi) - target)
        if np.any(resid > self.inv_tol):
            raise InternalConsistencyError(f"bisection residual {resid.max()!r} exceeds {self.inv_tol!r}")
        return hi

    def _quantile(self, u):
        return np.clip(self.g(u), self.support_lo, self.support_hi)

    def __repr__(self):
        return f"SymmetricMixedCdf(n={self.g.n}, lo={self.support_lo!r}, hi={self.support_hi!r})"


@dataclass(frozen=True)
class StrategyProfile:
    strategies: tuple[MixedStrategyCdf, ...]
    symmetric: bool = False
    # True for constructions that are not proven equilibria; check before use
    candidate: bool = False

    @property
    def n_sellers(self) -> int:
        return len(self.strategies)

    def __len__(self):
        return len(self.strategies)

    def __getitem__(self, i):
        return self.strategies[i]

    @classmethod
    def symmetric_of(cls, strategy: MixedStrategyCdf, n: int, candidate: bool = False):
        return cls(tuple([strategy] * n), symmetric=True, candidate=candidate)


def z_function(k: int, n: int, x):
    """Probability that at most ``k`` of ``n - 1`` opponents undercut, each w.p. ``x``."""
    if not (0 <= k <= n - 1):
        raise InvalidParameterError(f"need 0 <= k <= n-1, got k={k}, n={n}")
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)) or np.any(np.isnan(arr)):
        raise InvalidParameterError("x must lie in [0, 1]")
    flat = np.atleast_1d(arr)
    i = np.arange(k + 1)[:, None]
    coef = np.array([math.comb(n - 1, j) for j in range(k + 1)], dtype=float)[:, None]
    terms = coef * (1.0 - flat) ** (n - 1 - i) * flat**i
    return _as_output(terms.sum(axis=0).reshape(arr.shape), arr.ndim == 0)


def z_table(n: int, x: np.ndarray) -> np.ndarray:
    """Rows ``Z_{k,n}(x)`` for ``k = 0..n-2``."""
    i = np.arange(n - 1)[:, None]
    coef = np.array([math.comb(n - 1, j) for j in range(n - 1)], dtype=float)[:, None]
    return np.cumsum(coef * (1.0 - x) ** (n - 1 - i) * x**i, axis=0)


def _require_general(params: MarketParams, what: str):
    if params.demand.is_binary:
        raise WrongVariantError(f"{what} needs general (non-Bernoulli) demand")


def monopolist_strategy(params: MarketParams) -> AtomStrategy:
    return AtomStrategy(params.reserve_price)


def duopoly_binary_equilibrium(t: int, params: MarketParams) -> StrategyProfile:
    """Both sellers post ``P*(2, t) = delta V(1, t-1)``; at ``t = 1`` that is 0."""
    if not params.demand.is_binary:
        raise WrongVariantError("duopoly binary equilibrium needs Bernoulli demand")
    if t < 1:
        raise InvalidParameterError(f"horizon must be >= 1, got {t}")
    table = value_table(params.with_size(2, t))
    price = min(max(table.reservation_price(2, t), 0.0), params.reserve_price)
    return StrategyProfile.symmetric_of(AtomStrategy(price), 2)


def oligopoly_binary_candidate(t: int, params: MarketParams) -> StrategyProfile:
    """Sellers 1 and 2 post ``P*(n, t)``, the others post ``pbar``.

    When ``t < n`` every value is zero and ``P*(n, t) = 0``; all sellers then post 0.
    """
    n = params.n_sellers
    if not params.demand.is_binary:
        raise WrongVariantError("oligopoly binary candidate needs Bernoulli demand")
    if n < 3:
        raise WrongVariantError(f"oligopoly binary candidate needs n >= 3, got {n}")
    if t < 1:
        raise InvalidParameterError(f"horizon must be >= 1, got {t}")
    table = value_table(params.with_size(n, t))
    pstar = min(max(table.reservation_price(n, t), 0.0), params.reserve_price)
    if t < n:
        return StrategyProfile.symmetric_of(AtomStrategy(pstar), n, candidate=True)
    low = AtomStrategy(pstar)
    high = AtomStrategy(params.reserve_price)
    return StrategyProfile((low, low) + (high,) * (n - 2), symmetric=False, candidate=True)


def duopoly_general_cdf(t: int, params: MarketParams) -> DuopolyMixedCdf:
    demand = params.demand
    _require_general(params, "duopoly mixed equilibrium")
    if t < 1:
        raise InvalidParameterError(f"horizon must be >= 1, got {t}")
    q0, q1, tail2 = demand.prob(0), demand.prob(1), demand.tail(2)
    if q1 <= 0.0:
        raise ConditionsViolatedError("duopoly mixed equilibrium needs q_1 > 0")
    if tail2 <= 0.0:
        raise ConditionsViolatedError("duopoly mixed equilibrium needs P(D >= 2) > 0")
    table = value_table(params.with_size(2, t))
    delta = params.discount
    a = table.value(2, t) - q0 * delta * table.value(2, t - 1)
    c = delta * table.value(1, t - 1)
    lo = table.reservation_price(2, t)
    return DuopolyMixedCdf(a, 1.0 - q0, q1, c, lo, params.reserve_price)


def _g_function(n: int, t: int, params: MarketParams) -> GFunction:
    demand, delta = params.demand, params.discount
    table = value_table(params.with_size(n, t))
    weights = [demand.prob(i) for i in range(1, n)]
    cont = [delta * table.value(n - i, t - 1) for i in range(1, n)]
    return GFunction(n, weights, cont, demand.tail(n), params.reserve_price)


def _check_general_conditions(n: int, t: int, params: MarketParams):
    _require_general(params, "symmetric mixed equilibrium")
    if n < 2:
        raise InvalidParameterError(f"need n >= 2, got {n}")
    if t < 1:
        raise InvalidParameterError(f"horizon must be >= 1, got {t}")
    if params.demand.tail(2) <= 0.0:
        raise ConditionsViolatedError("symmetric mixed equilibrium needs P(D >= 2) > 0")


def oligopoly_G(x, n: int, t: int, params: MarketParams):
    _check_general_conditions(n, t, params)
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise InvalidParameterError("x must lie in [0, 1]")
    return _g_function(n, t, params)(x)


def oligopoly_general_cdf(n: int, t: int, params: MarketParams,
                          inv_tol: float | None = None) -> SymmetricMixedCdf:
    _check_general_conditions(n, t, params)
    if params.demand.tail(n) <= 0.0:
        raise ConditionsViolatedError(
            f"symmetric mixed equilibrium on [P*, pbar] needs P(D >= {n}) > 0"
        )
    pbar = params.reserve_price
    inv_tol = 1e-10 * pbar if inv_tol is None else inv_tol
    lo = value_table(params.with_size(n, t)).reservation_price(n, t)
    return SymmetricMixedCdf(_g_function(n, t, params), lo, pbar, inv_tol)


def stationary_general_cdf(n: int, params: MarketParams) -> SymmetricMixedCdf:
    """Horizon-free analogue of ``oligopoly_general_cdf`` built from the fixed-point values."""
    _check_general_conditions(n, 1, params)
    demand, delta, pbar = params.demand, params.discount, params.reserve_price
    if demand.tail(n) <= 0.0:
        raise ConditionsViolatedError(f"needs P(D >= {n}) > 0")
    ih = infinite_horizon(params, n_max=n)
    weights = [demand.prob(i) for i in range(1, n)]
    cont = [delta * ih.value(n - i) for i in range(1, n)]
    g = GFunction(n, weights, cont, demand.tail(n), pbar)
    return SymmetricMixedCdf(g, ih.reservation_price(n), pbar, 1e-10 * pbar)


def sample_price(strategy: MixedStrategyCdf, u):
    """Inverse-transform draw for a uniform variate ``u`` in ``[0, 1)``."""
    return strategy.quantile(u)


def equilibrium_profile(n: int, t: int, params: MarketParams) -> StrategyProfile:
    """The shipped profile for the subgame with ``n`` sellers and ``t`` periods left."""
    if n < 1 or t < 1:
        raise InvalidParameterError(f"need n >= 1 and t >= 1, got n={n}, t={t}")
    if n == 1:
        return StrategyProfile((monopolist_strategy(params),), symmetric=True)
    if params.demand.is_binary:
        if n == 2:
            return duopoly_binary_equilibrium(t, params)
        return oligopoly_binary_candidate(t, dataclasses.replace(params, n_sellers=n))
    if n == 2:
        return StrategyProfile.symmetric_of(duopoly_general_cdf(t, params), 2)
    return StrategyProfile.symmetric_of(oligopoly_general_cdf(n, t, params), n)


def all_at_reserve_profile(n: int, params: MarketParams) -> StrategyProfile:
    """Every seller posts ``pbar``; used as a planted non-equilibrium."""
    return StrategyProfile.symmetric_of(AtomStrategy(params.reserve_price), n, candidate=True)


def cdf_grid(strategy: MixedStrategyCdf, points: int = DEFAULT_CDF_GRID, full_range: bool = False):
    """CDF sampled at ``points`` prices.

    By default the grid spans the support. With ``full_range`` it is
    ``k * pbar / points`` for ``k = 1..points``, which puts round prices such as
    ``pbar / 2`` on the grid and is what the CLI writes.
    """
    if points < 2:
        raise InvalidParameterError(f"need at least 2 grid points, got {points}")
    if full_range:
        grid = strategy.support_hi * np.arange(1, points + 1) / points
    else:
        grid = np.linspace(strategy.support_lo, strategy.support_hi, points)
    return grid, strategy.cdf(grid)


def cdf_to_csv(strategy: MixedStrategyCdf, points: int = DEFAULT_CDF_GRID,
               header: str | None = None, fmt=repr, full_range: bool = False) -> str:
    grid, values = cdf_grid(strategy, points, full_range)
    buf = io.StringIO()
    if header:
        buf.write(header.rstrip("\n") + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["p", "cdf"])
    for p, f in zip(grid, values):
        writer.writerow([fmt(float(p)), fmt(float(f))])
    return buf.getvalue()


def describe_params(n: int, t: int, params: MarketParams) -> str:
    """One-line comment identifying the game a CDF belongs to."""
    return (f"# n={n} t={t} discount={params.discount!r} reserve_price={params.reserve_price!r} "
            f"demand={params.demand.describe()}")
