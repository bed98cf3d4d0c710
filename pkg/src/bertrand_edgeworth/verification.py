"""Exact deviation payoffs and epsilon-equilibrium certification.

The oracle does not use any equilibrium formula. For a seller posting ``p``
against independent opponents it conditions on the demand ``d`` and on the
numbers ``L`` of opponents strictly below ``p`` and ``E`` exactly at ``p``:

* ``d >= n``: everyone sells, the seller earns ``p``;
* otherwise buyers take the cheapest offers; ``r = d - L`` units remain for the
  ``E + 1`` sellers at ``p``, so the seller sells with probability
  ``clip(r, 0, E + 1) / (E + 1)``;
* a seller who does not sell sees exactly ``d`` rivals leave and continues with
  ``delta * V(n - d, t - 1)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .equilibrium import StrategyProfile
from .errors import InvalidParameterError
from .valuation import MarketParams, ValueTable, value_table


def _table_for(params: MarketParams, n: int, t: int, table: ValueTable | None) -> ValueTable:
    if table is not None and table.params.n_sellers >= n and table.params.horizon >= t:
        return table
    return value_table(params.with_size(n, t))


def _opponent_counts(profile: StrategyProfile, i: int, prices: np.ndarray) -> np.ndarray:
    """``dist[L, E, k]``: probability that ``L`` rivals are below and ``E`` at ``prices[k]``."""
    n = len(profile)
    dist = np.zeros((n, n, prices.size))
    dist[0, 0] = 1.0
    for j, strat in enumerate(profile.strategies):
        if j == i:
            continue
        at_or_below = np.asarray(strat.cdf(prices), dtype=float)
        below = np.asarray(strat.cdf_left(prices), dtype=float)
        at = at_or_below - below
        above = 1.0 - at_or_below
        new = dist * above
        new[1:, :] += dist[:-1, :] * below
        new[:, 1:] += dist[:, :-1] * at
        dist = new
    return dist


def deviation_payoffs(i: int, prices, profile: StrategyProfile, n: int, t: int,
                      params: MarketParams, table: ValueTable | None = None) -> np.ndarray:
    """Vectorized ``deviation_payoff`` over an array of prices."""
    prices = np.atleast_1d(np.asarray(prices, dtype=float))
    if len(profile) != n:
        raise InvalidParameterError(f"profile has {len(profile)} sellers, expected {n}")
    if not (0 <= i < n):
        raise InvalidParameterError(f"seller index {i} out of range for {n} sellers")
    if t < 1:
        raise InvalidParameterError(f"horizon must be >= 1, got {t}")
    pbar = params.reserve_price
    if np.any(prices < 0.0) or np.any(prices > pbar) or np.any(np.isnan(prices)):
        raise InvalidParameterError(f"deviation prices must lie in [0, {pbar}]")

    table = _table_for(params, n, t, table)
    demand, delta = params.demand, params.discount
    cont = {k: delta * table.value(k, t - 1) for k in range(1, n + 1)}
    dist = _opponent_counts(profile, i, prices)

    L = np.arange(n)[:, None]
    E = np.arange(n)[None, :]
    payoff = demand.prob(0) * cont[n] + demand.tail(n) * prices
    for d in range(1, n):
        qd = demand.prob(d)
        if qd == 0.0:
            continue
        sell = np.clip(d - L, 0, E + 1) / (E + 1)  # (n, n)
        p_sell = np.einsum("le,lek->k", sell, dist)
        payoff = payoff + qd * (p_sell * prices + (1.0 - p_sell) * cont[n - d])
    return payoff


def deviation_payoff(i: int, p: float, profile: StrategyProfile, n: int, t: int,
                     params: MarketParams, table: ValueTable | None = None) -> float:
    """Expected discounted payoff to seller ``i`` (0-based) posting ``p`` while rivals follow ``profile``."""
    return float(deviation_payoffs(i, [p], profile, n, t, params, table)[0])


@dataclass(frozen=True)
class DeviationReport:
    seller_index: int
    prices: np.ndarray
    payoffs: np.ndarray
    in_support: np.ndarray
    equilibrium_value: float
    max_gap_on_support: float
    best_deviation_gain: float

    @property
    def grid(self) -> list[tuple[float, float]]:
        return list(zip(self.prices.tolist(), self.payoffs.tolist()))

    def passes(self, eps: float) -> bool:
        return self.best_deviation_gain <= eps and self.max_gap_on_support <= eps

    def summary(self) -> str:
        return (f"seller {self.seller_index + 1}: V={self.equilibrium_value:.10g} "
                f"max_gap_on_support={self.max_gap_on_support:.3e} "
                f"best_deviation_gain={self.best_deviation_gain:.3e}")


@dataclass(frozen=True)
class EpsilonCheck:
    reports: tuple[DeviationReport, ...]
    eps: float
    certified: bool

    def __iter__(self):
        return iter(self.reports)

    def __len__(self):
        return len(self.reports)

    def to_csv(self, header: str | None = None, fmt=repr) -> str:
        buf = io.StringIO()
        if header:
            buf.write(header.rstrip("\n") + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["seller", "price", "payoff"])
        for rep in self.reports:
            for p, v in zip(rep.prices, rep.payoffs):
                writer.writerow([rep.seller_index + 1, fmt(float(p)), fmt(float(v))])
        return buf.getvalue()

    def summary(self) -> str:
        status = "CERTIFIED" if self.certified else "NOT CERTIFIED"
        lines = [rep.summary() for rep in self.reports]
        lines.append(f"{status} at eps={self.eps:.3e}")
        return "\n".join(lines)


def deviation_grid(profile: StrategyProfile, pbar: float, grid_size: int) -> np.ndarray:
    """Uniform grid on ``[0, pbar]`` plus atoms, support endpoints, points just
    below each atom and midpoints between consecutive special points."""
    special = {0.0, pbar}
    for strat in profile.strategies:
        special.update([strat.support_lo, strat.support_hi])
        for price, _ in strat.atoms:
            special.add(price)
            special.add(price - 1e-6 * pbar)
    special = np.array(sorted(x for x in special if 0.0 <= x <= pbar))
    mids = 0.5 * (special[1:] + special[:-1])
    return np.unique(np.concatenate([np.linspace(0.0, pbar, grid_size), special, mids]))


def _support_mask(strat, prices: np.ndarray, pbar: float) -> np.ndarray:
    tol = 1e-12 * pbar
    if strat.atoms:
        mask = np.zeros(prices.shape, dtype=bool)
        for price, _ in strat.atoms:
            mask |= np.abs(prices - price) <= tol
        return mask
    return (prices >= strat.support_lo - tol) & (prices <= strat.support_hi + tol)


def check_epsilon_equilibrium(profile: StrategyProfile, n: int, t: int, params: MarketParams,
                              grid_size: int = 200, eps: float | None = None,
                              table: ValueTable | None = None) -> EpsilonCheck:
    """Certify ``profile`` iff no seller gains more than ``eps`` by deviating and every
    price in a seller's own support earns ``V(n, t)`` within ``eps``."""
    if grid_size < 100:
        raise InvalidParameterError(f"grid_size must be >= 100, got {grid_size}")
    pbar = params.reserve_price
    eps = 1e-8 * pbar if eps is None else float(eps)
    table = _table_for(params, n, t, table)
    v_eq = table.value(n, t)
    prices = deviation_grid(profile, pbar, grid_size)

    reports = []
    for i in range(n):
        payoffs = deviation_payoffs(i, prices, profile, n, t, params, table)
        support = _support_mask(profile[i], prices, pbar)
        gap = float(np.max(np.abs(payoffs[support] - v_eq))) if support.any() else 0.0
        gain = max(0.0, float(np.max(payoffs - v_eq)))
        reports.append(DeviationReport(i, prices, payoffs, support, v_eq, gap, gain))
    certified = all(rep.passes(eps) for rep in reports)
    return EpsilonCheck(tuple(reports), eps, certified)
