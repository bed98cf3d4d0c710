"""Option values and reservation prices by backward induction.

``V(n, t)`` is a seller's option value with ``n`` sellers holding one unit each
and ``t`` periods left::

    V(n, 0) = 0
    V(n, t) = sum_{i<n} q_i * delta * V(n - i, t - 1) + P(D >= n) * pbar

and the reservation price ``P*(n, t)`` is the price that makes selling now
and deferring payoff-equivalent::

    (1 - q_0) * P*(n, t) = sum_{1<=i<n} q_i * delta * V(n - i, t - 1) + P(D >= n) * pbar

Under binary demand the second line reduces to ``P*(n, t) = delta * V(n-1, t-1)``.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import io
import math
from dataclasses import dataclass

import numpy as np

from .demand import DemandModel
from .errors import DegenerateDemandError, InvalidParameterError, NoFixedPointError

FIXED_POINT_TOL = 1e-12


@dataclass(frozen=True)
class MarketParams:
    n_sellers: int
    horizon: int
    reserve_price: float
    discount: float
    demand: DemandModel

    def __post_init__(self):
        if int(self.n_sellers) != self.n_sellers or self.n_sellers < 1:
            raise InvalidParameterError(f"n_sellers must be a positive integer, got {self.n_sellers!r}")
        if int(self.horizon) != self.horizon or self.horizon < 0:
            raise InvalidParameterError(f"horizon must be a nonnegative integer, got {self.horizon!r}")
        if not (self.reserve_price > 0.0) or math.isinf(self.reserve_price):
            raise InvalidParameterError(f"reserve_price must be positive, got {self.reserve_price!r}")
        if not (0.0 < self.discount <= 1.0):
            raise InvalidParameterError(f"discount must lie in (0, 1], got {self.discount!r}")

    def with_size(self, n: int, t: int) -> "MarketParams":
        """Copy enlarged so the table covers at least ``n`` sellers and ``t`` periods."""
        n, t = max(n, self.n_sellers), max(t, self.horizon)
        if (n, t) == (self.n_sellers, self.horizon):
            return self
        return dataclasses.replace(self, n_sellers=n, horizon=t)


class ValueTable:
    """Memoized ``V(n, t)`` and ``P*(n, t)`` over ``1 <= n <= N``, ``0 <= t <= T``.

    Arrays are indexed ``[n, t]`` directly; row ``n = 0`` is unused.
    Reservation prices are NaN where undefined (``n = 1`` or ``t = 0``).
    """

    def __init__(self, params: MarketParams):
        self.params = params
        n_max, t_max = params.n_sellers, params.horizon
        demand, delta, pbar = params.demand, params.discount, params.reserve_price

        q = np.array([demand.prob(i) for i in range(n_max + 1)])
        tails = np.array([demand.tail(k) for k in range(n_max + 1)])
        values = np.zeros((n_max + 1, t_max + 1))
        for t in range(1, t_max + 1):
            prev = values[:, t - 1]
            for n in range(1, n_max + 1):
                # prev[n - i] for i = 0..n-1 is prev[n:0:-1]
                values[n, t] = delta * float(np.dot(q[:n], prev[n:0:-1])) + tails[n] * pbar

        reservation = np.full((n_max + 1, t_max + 1), np.nan)
        if q[0] < 1.0:
            for t in range(1, t_max + 1):
                prev = values[:, t - 1]
                for n in range(2, n_max + 1):
                    if demand.is_binary:
                        reservation[n, t] = delta * prev[n - 1]
                    else:
                        num = delta * float(np.dot(q[1:n], prev[n - 1:0:-1])) + tails[n] * pbar
                        reservation[n, t] = num / (1.0 - q[0])

        values.setflags(write=False)
        reservation.setflags(write=False)
        self.values = values
        self.reservation_prices = reservation

    def value(self, n: int, t: int) -> float:
        self._check(n, t)
        return float(self.values[n, t])

    def reservation_price(self, n: int, t: int) -> float:
        self._check(n, t)
        if n < 2 or t < 1:
            raise InvalidParameterError(f"reservation price needs n >= 2 and t >= 1, got n={n}, t={t}")
        if self.params.demand.prob(0) >= 1.0:
            raise DegenerateDemandError("demand is zero with probability one; 1 - q_0 = 0")
        return float(self.reservation_prices[n, t])

    def _check(self, n: int, t: int) -> None:
        if not (1 <= n <= self.params.n_sellers and 0 <= t <= self.params.horizon):
            raise InvalidParameterError(
                f"(n={n}, t={t}) outside table range n<={self.params.n_sellers}, t<={self.params.horizon}"
            )

    def rows(self):
        """Yield ``(n, t, value, reservation_price_or_None)`` in n-major order."""
        for n in range(1, self.params.n_sellers + 1):
            for t in range(self.params.horizon + 1):
                r = self.reservation_prices[n, t]
                yield n, t, float(self.values[n, t]), (None if math.isnan(r) else float(r))

    def to_csv(self, header: str | None = None, fmt=repr) -> str:
        buf = io.StringIO()
        if header:
            buf.write(header.rstrip("\n") + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "t", "value", "reservation_price"])
        for n, t, v, r in self.rows():
            writer.writerow([n, t, fmt(v), "" if r is None else fmt(r)])
        return buf.getvalue()


@functools.lru_cache(maxsize=64)
def value_table(params: MarketParams) -> ValueTable:
    """Cached table for ``params``; tables are immutable so sharing is safe."""
    return ValueTable(params)


def monopolist_value(t: int, params: MarketParams) -> float:
    """Closed form ``(1 - q_0) pbar (1 - (q_0 delta)^t) / (1 - q_0 delta)``."""
    if t < 0:
        raise InvalidParameterError(f"horizon must be nonnegative, got {t}")
    q0 = params.demand.prob(0)
    r = q0 * params.discount
    if r == 1.0:
        return 0.0
    return (1.0 - q0) * params.reserve_price * (1.0 - r**t) / (1.0 - r)


def option_value(n: int, t: int, params: MarketParams) -> float:
    if n < 1 or t < 0:
        raise InvalidParameterError(f"option value needs n >= 1 and t >= 0, got n={n}, t={t}")
    return value_table(params.with_size(n, t)).value(n, t)


def reservation_price(n: int, t: int, params: MarketParams) -> float:
    if n < 2 or t < 1:
        raise InvalidParameterError(f"reservation price needs n >= 2 and t >= 1, got n={n}, t={t}")
    if params.demand.prob(0) >= 1.0:
        raise DegenerateDemandError("demand is zero with probability one; 1 - q_0 = 0")
    return value_table(params.with_size(n, t)).reservation_price(n, t)


@dataclass(frozen=True)
class InfiniteHorizon:
    """Stationary values ``V_inf(n)`` and reservation prices ``P*_inf(n)`` for ``n = 1..N``.

    Both sequences are indexed from ``n = 1``; ``reservation_prices[0]`` is None.
    """

    values: tuple[float, ...]
    reservation_prices: tuple[float | None, ...]

    def value(self, n: int) -> float:
        return self.values[n - 1]

    def reservation_price(self, n: int) -> float:
        r = self.reservation_prices[n - 1]
        if r is None:
            raise InvalidParameterError("reservation price is undefined for a single seller")
        return r


def _stationary_reservation(values, demand: DemandModel, delta: float, pbar: float):
    q0 = demand.prob(0)
    out: list[float | None] = [None]
    for n in range(2, len(values) + 1):
        if q0 >= 1.0:
            raise DegenerateDemandError("demand is zero with probability one; 1 - q_0 = 0")
        if demand.is_binary:
            out.append(delta * values[n - 2])
        else:
            num = math.fsum(demand.prob(i) * delta * values[n - i - 1] for i in range(1, n))
            out.append((num + demand.tail(n) * pbar) / (1.0 - q0))
    return tuple(out)


def value_iteration(n_max: int, params: MarketParams, tol: float = FIXED_POINT_TOL,
                    max_iter: int = 100_000) -> np.ndarray:
    """Iterate the horizon-free recursion until successive iterates differ by at most
    ``tol * (1 - delta) / delta``, which bounds the distance to the fixed point by ``tol``."""
    delta = params.discount
    if delta >= 1.0:
        raise NoFixedPointError("discount must be < 1 for an infinite-horizon fixed point")
    demand, pbar = params.demand, params.reserve_price
    q = np.array([demand.prob(i) for i in range(n_max + 1)])
    tails = np.array([demand.tail(k) for k in range(n_max + 1)])
    v = np.zeros(n_max + 1)
    stop = tol * (1.0 - delta) / delta
    for _ in range(max_iter):
        new = np.zeros_like(v)
        for n in range(1, n_max + 1):
            new[n] = delta * float(np.dot(q[:n], v[n:0:-1])) + tails[n] * pbar
        step = float(np.max(np.abs(new - v)))
        v = new
        if step <= stop:
            return v[1:]
    raise NoFixedPointError(f"value iteration did not reach tolerance {tol} in {max_iter} sweeps")


def infinite_horizon(params: MarketParams, n_max: int | None = None) -> InfiniteHorizon:
    """Fixed point of the value recursion with the horizon index dropped.

    Bernoulli demand uses the closed form
    ``V(1) = (1-q) pbar / (1 - q delta)``, ``V(n) = (1-q) delta V(n-1) / (1 - q delta)``;
    other demand uses value iteration.
    """
    n_max = params.n_sellers if n_max is None else n_max
    delta, pbar, demand = params.discount, params.reserve_price, params.demand
    if delta >= 1.0:
        raise NoFixedPointError("discount must be < 1 for an infinite-horizon fixed point")
    if demand.is_binary:
        q = demand.prob(0)
        vals = [(1.0 - q) * pbar / (1.0 - q * delta)]
        for _ in range(2, n_max + 1):
            vals.append((1.0 - q) * delta * vals[-1] / (1.0 - q * delta))
    else:
        vals = [float(x) for x in value_iteration(n_max, params)]
    vals = tuple(vals)
    return InfiniteHorizon(vals, _stationary_reservation(vals, demand, delta, pbar))


def infinite_horizon_value(n: int, params: MarketParams) -> tuple[float, float | None]:
    """``(V_inf(n), P*_inf(n))``; the reservation price is None for ``n = 1``."""
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    ih = infinite_horizon(params, n_max=n)
    return ih.values[-1], ih.reservation_prices[-1]
