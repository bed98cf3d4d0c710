"""Seeded Monte Carlo simulation of the multi-period market.

Each period the remaining sellers draw prices by inverse transform, demand ``D``
is drawn, and the ``D`` cheapest offers at or below ``pbar`` sell (ties broken
uniformly at random). Sellers leave on sale; a sale ``e`` periods after the
start earns ``delta**e * price``.

Random numbers come from counter-based Philox streams. The stream for
``(period t, seller slot j, purpose)`` is seeded by
``SeedSequence(seed, spawn_key=(t, j, purpose))`` and its ``k``-th draw
belongs to trial ``k``, so a trial's draws do not depend on how many trials run.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .equilibrium import StrategyProfile, equilibrium_profile, monopolist_strategy
from .errors import InternalConsistencyError, InvalidParameterError
from .valuation import MarketParams
from .verification import check_epsilon_equilibrium

PRICE_STREAM, TIE_STREAM, DEMAND_STREAM = 0, 1, 2
Z_95 = statistics.NormalDist().inv_cdf(0.975)
DEFAULT_BINS = 40


def substream(seed: int, period: int, slot: int, purpose: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(period, slot, purpose))
    return np.random.Generator(np.random.Philox(ss))


def equilibrium_profiles(params: MarketParams, verify: bool = True,
                         eps: float | None = None) -> dict[tuple[int, int], StrategyProfile]:
    """Shipped profiles for every subgame ``(n, t)`` with ``n <= N`` and ``t <= T``.

    Candidate profiles are certified with the deviation oracle first when ``verify`` is set.
    """
    profiles = {}
    for t in range(1, params.horizon + 1):
        for n in range(1, params.n_sellers + 1):
            prof = equilibrium_profile(n, t, params)
            if verify and prof.candidate:
                check = check_epsilon_equilibrium(prof, n, t, params, eps=eps)
                if not check.certified:
                    raise InternalConsistencyError(f"candidate profile at n={n}, t={t} failed certification")
            profiles[(n, t)] = prof
    return profiles


@dataclass(frozen=True)
class TransactedStats:
    count: int
    mean: float
    std: float


@dataclass(frozen=True)
class SimulationReport:
    per_seller_mean_profit: tuple[float, ...]
    per_seller_ci_halfwidth: tuple[float, ...]
    trials: int
    seed: int
    horizon: int
    bin_edges: np.ndarray
    # keyed by (periods left t, sellers present n)
    posted_histogram: dict
    transacted_histogram: dict
    transacted_stats: dict
    trace: dict | None = field(default=None, compare=False)

    def to_csv(self, header: str | None = None, fmt=repr) -> str:
        buf = io.StringIO()
        if header:
            buf.write(header.rstrip("\n") + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["seller", "mean", "ci", "trials", "seed"])
        for i, (m, ci) in enumerate(zip(self.per_seller_mean_profit, self.per_seller_ci_halfwidth)):
            writer.writerow([i + 1, fmt(m), fmt(ci), self.trials, self.seed])
        return buf.getvalue()

    def summary(self, reference: float | None = None) -> str:
        lines = []
        for i, (m, ci) in enumerate(zip(self.per_seller_mean_profit, self.per_seller_ci_halfwidth)):
            line = f"seller {i + 1}: mean={m:.6f} +/- {ci:.6f}"
            if reference is not None:
                line += f"  V={reference:.6f}  |diff|/ci={abs(m - reference) / ci:.2f}" if ci > 0 else f"  V={reference:.6f}"
            lines.append(line)
        lines.append(f"trials={self.trials} seed={self.seed}")
        return "\n".join(lines)


def _normalize_profiles(profiles: Mapping, params: MarketParams) -> dict:
    out = {}
    for key, prof in profiles.items():
        if isinstance(key, tuple):
            n, t = key
        else:
            n, t = len(prof), int(key)
        if len(prof) != n:
            raise InvalidParameterError(f"profile for (n={n}, t={t}) has {len(prof)} sellers")
        out[(n, t)] = prof
    lone = StrategyProfile((monopolist_strategy(params),), symmetric=True)
    for t in range(1, params.horizon + 1):
        out.setdefault((1, t), lone)
    return out


def _stratum_stats(x: np.ndarray) -> TransactedStats:
    # shift by the first observation so a constant sample has exactly zero spread
    y = x - x[0]
    return TransactedStats(int(x.size), float(x[0] + y.mean()), float(y.std()))


def simulate_market(profiles_by_period: Mapping, params: MarketParams, trials: int, seed: int,
                    bins: int = DEFAULT_BINS, trace: bool = False) -> SimulationReport:
    """Simulate ``trials`` independent markets from ``(N, T)`` to the horizon.

    ``profiles_by_period`` maps ``(n, t)`` to the profile played when ``n`` sellers
    remain with ``t`` periods left; an integer key ``t`` is read as
    ``(len(profile), t)``. The ``k``-th remaining seller (in original index
    order) plays ``profile[k]``. Missing single-seller states default to
    posting ``pbar``.
    """
    if int(trials) != trials or trials < 1:
        raise InvalidParameterError(f"trials must be a positive integer, got {trials!r}")
    if int(seed) != seed or not (0 <= seed < 2**64):
        raise InvalidParameterError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    trials, seed = int(trials), int(seed)
    profiles = _normalize_profiles(profiles_by_period, params)

    N, T = params.n_sellers, params.horizon
    pbar, delta, demand = params.reserve_price, params.discount, params.demand
    cum = demand.cumulative()
    edges = np.linspace(0.0, pbar, bins + 1)

    alive = np.ones((trials, N), dtype=bool)
    profit = np.zeros((trials, N))
    posted_hist, sold_hist, sold_stats = {}, {}, {}
    trace_rows = {} if trace else None
    slots = np.broadcast_to(np.arange(N), (trials, N))

    for elapsed, t in enumerate(range(T, 0, -1)):
        u_price = np.column_stack([substream(seed, t, j, PRICE_STREAM).random(trials) for j in range(N)])
        u_tie = np.column_stack([substream(seed, t, j, TIE_STREAM).random(trials) for j in range(N)])
        u_dem = substream(seed, t, 0, DEMAND_STREAM).random(trials)

        count = alive.sum(axis=1)
        rank = np.cumsum(alive, axis=1) - 1
        prices = np.full((trials, N), np.inf)
        present = [int(n) for n in np.unique(count) if n > 0]
        for n in present:
            prof = profiles.get((n, t))
            if prof is None:
                raise InvalidParameterError(f"no profile supplied for n={n} sellers at t={t}")
            rows = (count == n)[:, None] & alive
            for k in range(n):
                sel = rows & (rank == k)
                if sel.any():
                    prices[sel] = prof[k].quantile(u_price[sel])

        d = np.minimum(np.searchsorted(cum, u_dem, side="right"), demand.max_demand)
        eligible = alive & (prices <= pbar)
        order = np.lexsort((u_tie, np.where(eligible, prices, np.inf)), axis=1)
        pos = np.empty_like(order)
        np.put_along_axis(pos, order, slots, axis=1)
        sold = eligible & (pos < d[:, None])
        profit += np.where(sold, prices, 0.0) * delta**elapsed

        for n in present:
            rows = (count == n)[:, None]
            posted = prices[rows & alive]
            posted_hist[(t, n)] = np.histogram(posted, bins=edges)[0]
            txn = prices[rows & sold]
            sold_hist[(t, n)] = np.histogram(txn, bins=edges)[0]
            if txn.size:
                sold_stats[(t, n)] = _stratum_stats(txn)
        if trace:
            trace_rows[t] = {"demand": d.copy(), "remaining": count.copy(), "sales": sold.sum(axis=1)}
        alive &= ~sold

    means = tuple(float(x) for x in profit.mean(axis=0))
    if trials > 1:
        sds = profit.std(axis=0, ddof=1)
        cis = tuple(float(Z_95 * s / math.sqrt(trials)) for s in sds)
    else:
        cis = tuple(math.nan for _ in range(N))
    return SimulationReport(means, cis, trials, seed, T, edges, posted_hist, sold_hist, sold_stats,
                            trace_rows)


def effective_price_dispersion(report: SimulationReport) -> dict[tuple[int, int], float | None]:
    """Standard deviation of transacted prices per ``(t, n)`` stratum.

    None marks a stratum that was reached but saw no transaction.
    """
    out = {}
    for key in sorted(report.posted_histogram, key=lambda k: (-k[0], k[1])):
        stats = report.transacted_stats.get(key)
        out[key] = None if stats is None else stats.std
    return out
