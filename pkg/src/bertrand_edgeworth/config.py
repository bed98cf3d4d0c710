"""Run configuration: a flat ``key = value`` file with one dotted ``demand.*`` block.

Grammar (one entry per line; blank lines and ``#`` comments ignored)::

    n_sellers = 2
    horizon = 3
    reserve_price = 40
    discount = 0.9
    demand.kind = bernoulli        # bernoulli | explicit | poisson
    demand.q = 0.5                 # bernoulli
    demand.probs = 0.6,0.3,0.1     # explicit
    demand.mean = 0.5              # poisson
    demand.trunc_tol = 1e-12       # poisson, optional

Command options (``grid``, ``trials``, ``seed``, ``eps``, ``tmax``, ``profile``, ``bins``)
may also appear. A CSV written by the CLI starts with a ``# bertrand-edgeworth:``
line holding the same keys space-separated; such a file is itself a valid config.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .demand import DEFAULT_TRUNC_TOL, DemandModel, make_bernoulli, make_explicit, make_poisson
from .errors import InvalidParameterError
from .valuation import MarketParams

HEADER_PREFIX = "# bertrand-edgeworth:"
PROFILES = ("equilibrium", "all-at-reserve")


class ConfigError(InvalidParameterError):
    """Malformed or incomplete run configuration."""


@dataclass(frozen=True)
class RunConfig:
    demand_kind: str | None = None
    demand_q: float | None = None
    demand_probs: tuple[float, ...] | None = None
    demand_mean: float | None = None
    demand_trunc_tol: float | None = None
    n_sellers: int = 2
    horizon: int | None = None
    reserve_price: float = 40.0
    discount: float = 0.9
    grid: int | None = None
    trials: int | None = None
    seed: int | None = None
    eps: float | None = None
    tmax: int | None = None
    profile: str | None = None
    bins: int | None = None

    def demand(self) -> DemandModel:
        kind = self.demand_kind
        if kind == "bernoulli":
            if self.demand_q is None:
                raise ConfigError("demand.kind = bernoulli needs demand.q")
            return make_bernoulli(self.demand_q)
        if kind == "explicit":
            if self.demand_probs is None:
                raise ConfigError("demand.kind = explicit needs demand.probs")
            return make_explicit(self.demand_probs)
        if kind == "poisson":
            if self.demand_mean is None:
                raise ConfigError("demand.kind = poisson needs demand.mean")
            tol = DEFAULT_TRUNC_TOL if self.demand_trunc_tol is None else self.demand_trunc_tol
            return make_poisson(self.demand_mean, tol)
        raise ConfigError(f"demand.kind must be bernoulli, explicit or poisson, got {kind!r}")

    def market(self, horizon: int | None = None) -> MarketParams:
        horizon = self.horizon if horizon is None else horizon
        if horizon is None:
            raise ConfigError("horizon is required")
        return MarketParams(self.n_sellers, horizon, self.reserve_price, self.discount, self.demand())

    def replace(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)

    def header(self, command: str) -> str:
        """Comment line carrying every setting that affects the output."""
        parts = [f"command={command}"]
        for key, attr in _KEYS.items():
            value = getattr(self, attr)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(repr(x) for x in value)
            elif isinstance(value, float):
                value = repr(value)
            parts.append(f"{key}={value}")
        return HEADER_PREFIX + " " + " ".join(parts)


def _int(raw: str) -> int:
    value = int(raw)
    return value


def _probs(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.split(",") if x.strip())


_KEYS = {
    "n_sellers": "n_sellers",
    "horizon": "horizon",
    "reserve_price": "reserve_price",
    "discount": "discount",
    "demand.kind": "demand_kind",
    "demand.q": "demand_q",
    "demand.probs": "demand_probs",
    "demand.mean": "demand_mean",
    "demand.trunc_tol": "demand_trunc_tol",
    "grid": "grid",
    "trials": "trials",
    "seed": "seed",
    "eps": "eps",
    "tmax": "tmax",
    "profile": "profile",
    "bins": "bins",
}

_PARSERS = {
    "n_sellers": _int, "horizon": _int, "grid": _int, "trials": _int, "seed": _int,
    "tmax": _int, "bins": _int,
    "reserve_price": float, "discount": float, "demand_q": float, "demand_mean": float,
    "demand_trunc_tol": float, "eps": float,
    "demand_probs": _probs,
    "demand_kind": lambda s: s.strip().lower(),
    "profile": str.strip,
}


def parse_pairs(pairs) -> RunConfig:
    values = {}
    for key, raw in pairs:
        key = key.strip()
        if key == "command":
            continue
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        attr = _KEYS[key]
        try:
            values[attr] = _PARSERS[attr](raw.strip())
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw.strip()!r}") from exc
    cfg = RunConfig(**values)
    if cfg.profile is not None and cfg.profile not in PROFILES:
        raise ConfigError(f"profile must be one of {PROFILES}, got {cfg.profile!r}")
    return cfg


def parse_text(text: str) -> RunConfig:
    lines = text.splitlines()
    if lines and lines[0].startswith(HEADER_PREFIX):
        tokens = lines[0][len(HEADER_PREFIX):].split()
        pairs = []
        for tok in tokens:
            if "=" not in tok:
                raise ConfigError(f"malformed header token {tok!r}")
            pairs.append(tuple(tok.split("=", 1)))
        return parse_pairs(pairs)
    pairs = []
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        pairs.append(tuple(line.split("=", 1)))
    return parse_pairs(pairs)


def load(path: str | Path) -> RunConfig:
    return parse_text(Path(path).read_text(encoding="utf-8"))
