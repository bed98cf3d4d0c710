"""Command-line front end.

Every subcommand writes a UTF-8 CSV whose first line is a ``# bertrand-edgeworth:``
comment holding the full effective configuration, so ``--config`` pointed at an
output file reruns it exactly. Without ``--out`` the CSV goes to standard output
and the summary to standard error.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 model precondition
violated, 4 certification failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig
from .equilibrium import (
    DEFAULT_CDF_GRID,
    all_at_reserve_profile,
    cdf_to_csv,
    duopoly_general_cdf,
    equilibrium_profile,
    oligopoly_general_cdf,
    stationary_general_cdf,
)
from .errors import InvalidParameterError, ModelPreconditionError
from .simulation import equilibrium_profiles, simulate_market
from .valuation import infinite_horizon, value_table
from .verification import check_epsilon_equilibrium

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_MODEL, EXIT_UNCERTIFIED = 0, 1, 2, 3, 4

DEFAULT_VERIFY_GRID = 200
DEFAULT_TRIALS = 100_000
DEFAULT_TMAX = 1000
CONVERGE_QUANTILES = (0.25, 0.5, 0.75)


def fmt(x: float) -> str:
    return repr(round(float(x), 12))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file, or a CSV written by this tool")
    common.add_argument("--out", help="output CSV path (default: standard output)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key; may be repeated")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--grid", type=int)
    common.add_argument("--eps", type=float)
    common.add_argument("--tmax", type=int)

    parser = _Parser(prog="bertrand-edgeworth",
                     description="Option values, equilibria and simulation for perishable-good price competition.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("values", parents=[common], help="option value and reservation price table")
    sub.add_parser("equilibrium", parents=[common], help="equilibrium prices or CDF grid")
    verify = sub.add_parser("verify", parents=[common], help="epsilon-equilibrium certification")
    verify.add_argument("--profile", choices=cfgmod.PROFILES)
    sub.add_parser("simulate", parents=[common], help="Monte Carlo market simulation")
    conv = sub.add_parser("converge", parents=[common], help="finite versus infinite horizon")
    conv.add_argument("--sweep-q", help="comma-separated Bernoulli q values; one file per value")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = cfgmod.load(args.config) if args.config else RunConfig()
    if args.set:
        pairs = []
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            pairs.append(tuple(item.split("=", 1)))
        override = cfgmod.parse_pairs(pairs)
        explicit = {cfgmod._KEYS[k.strip()] for k, _ in pairs if k.strip() != "command"}
        cfg = cfg.replace(**{a: getattr(override, a) for a in explicit})
    return cfg.replace(seed=args.seed, trials=args.trials, grid=args.grid, eps=args.eps,
                       tmax=args.tmax, profile=getattr(args, "profile", None))


class _Output:
    def __init__(self, path: str | None):
        self.path = path

    def write(self, text: str) -> None:
        if self.path is None:
            sys.stdout.write(text)
            return
        with open(self.path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    def say(self, text: str) -> None:
        stream = sys.stdout if self.path else sys.stderr
        print(text, file=stream)


def cmd_values(cfg: RunConfig, out: _Output) -> int:
    params = cfg.market()
    table = value_table(params)
    out.write(table.to_csv(cfg.header("values"), fmt=fmt))
    n, t = params.n_sellers, params.horizon
    line = f"V({n},{t}) = {fmt(table.value(n, t))}"
    if n >= 2 and t >= 1:
        line += f"  P*({n},{t}) = {fmt(table.reservation_price(n, t))}"
    out.say(line)
    return EXIT_OK


def cmd_equilibrium(cfg: RunConfig, out: _Output) -> int:
    params = cfg.market()
    n, t = params.n_sellers, params.horizon
    points = DEFAULT_CDF_GRID if cfg.grid is None else cfg.grid
    cfg = cfg.replace(grid=points)
    profile = equilibrium_profile(n, t, params)
    header = cfg.header("equilibrium")
    if all(s.is_pure for s in profile.strategies):
        lines = [header, "seller,price"]
        lines += [f"{i + 1},{fmt(s.atoms[0][0])}" for i, s in enumerate(profile.strategies)]
        out.write("\n".join(lines) + "\n")
        note = " (candidate, certify with verify)" if profile.candidate else ""
        out.say(f"pure profile{note}: " + ", ".join(fmt(s.atoms[0][0]) for s in profile.strategies))
    else:
        strat = profile[0]
        out.write(cdf_to_csv(strat, points, header, fmt=fmt, full_range=True))
        out.say(f"symmetric mixed strategy on [{fmt(strat.support_lo)}, {fmt(strat.support_hi)}], "
                f"V({n},{t}) = {fmt(value_table(params).value(n, t))}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: _Output) -> int:
    params = cfg.market()
    n, t = params.n_sellers, params.horizon
    cfg = cfg.replace(grid=DEFAULT_VERIFY_GRID if cfg.grid is None else cfg.grid,
                      eps=1e-8 * params.reserve_price if cfg.eps is None else cfg.eps,
                      profile=cfg.profile or "equilibrium")
    if cfg.profile == "all-at-reserve":
        profile = all_at_reserve_profile(n, params)
    else:
        profile = equilibrium_profile(n, t, params)
    check = check_epsilon_equilibrium(profile, n, t, params, grid_size=cfg.grid, eps=cfg.eps)
    out.write(check.to_csv(cfg.header("verify"), fmt=fmt))
    out.say(check.summary())
    return EXIT_OK if check.certified else EXIT_UNCERTIFIED


def cmd_simulate(cfg: RunConfig, out: _Output) -> int:
    params = cfg.market()
    cfg = cfg.replace(trials=DEFAULT_TRIALS if cfg.trials is None else cfg.trials,
                      seed=0 if cfg.seed is None else cfg.seed)
    if cfg.trials < 1:
        raise ConfigError(f"trials must be >= 1, got {cfg.trials}")
    profiles = equilibrium_profiles(params, eps=cfg.eps)
    kwargs = {} if cfg.bins is None else {"bins": cfg.bins}
    report = simulate_market(profiles, params, cfg.trials, cfg.seed, **kwargs)
    out.write(report.to_csv(cfg.header("simulate"), fmt=fmt))
    out.say(report.summary(value_table(params).value(params.n_sellers, params.horizon)))
    return EXIT_OK


def _converge_rows(cfg: RunConfig):
    tmax = cfg.tmax
    params = cfg.market(horizon=tmax)
    n = params.n_sellers
    if n < 2:
        raise ConfigError("converge needs n_sellers >= 2")
    ih = infinite_horizon(params)
    table = value_table(params)
    if params.demand.is_binary:
        limit = ih.reservation_price(n)
        cols = ["T", "pstar", "pstar_inf", "gap"]
        rows = []
        for T in range(2, tmax + 1):
            p = table.reservation_price(n, T)
            rows.append([str(T), fmt(p), fmt(limit), fmt(abs(p - limit))])
        return cols, rows, f"P*({n},{tmax}) = {rows[-1][1]}, P*({n},inf) = {fmt(limit)}"
    v_inf = ih.value(n)
    stationary = stationary_general_cdf(n, params)
    prices = np.array([float(stationary.quantile(u)) for u in CONVERGE_QUANTILES])
    cols = ["T", "value", "value_inf", "gap", "pstar", "pstar_inf"]
    cols += [f"cdf_at_{fmt(p)}" for p in prices]
    rows = []
    for T in range(2, tmax + 1):
        strat = duopoly_general_cdf(T, params) if n == 2 else oligopoly_general_cdf(n, T, params)
        v = table.value(n, T)
        row = [str(T), fmt(v), fmt(v_inf), fmt(abs(v - v_inf)),
               fmt(table.reservation_price(n, T)), fmt(ih.reservation_price(n))]
        row += [fmt(f) for f in np.atleast_1d(strat.cdf(prices))]
        rows.append(row)
    return cols, rows, f"V({n},{tmax}) = {rows[-1][1]}, V({n},inf) = {fmt(v_inf)}"


def _write_converge(cfg: RunConfig, out: _Output) -> None:
    cols, rows, summary = _converge_rows(cfg)
    lines = [cfg.header("converge"), ",".join(cols)] + [",".join(r) for r in rows]
    out.write("\n".join(lines) + "\n")
    out.say(f"{summary}, final gap = {rows[-1][3]}")


def cmd_converge(cfg: RunConfig, out: _Output, sweep_q: str | None = None) -> int:
    cfg = cfg.replace(tmax=DEFAULT_TMAX if cfg.tmax is None else cfg.tmax)
    if cfg.tmax < 2:
        raise ConfigError(f"tmax must be >= 2, got {cfg.tmax}")
    if not sweep_q:
        _write_converge(cfg, out)
        return EXIT_OK
    if cfg.demand_kind != "bernoulli":
        raise ConfigError("--sweep-q needs demand.kind = bernoulli")
    if out.path is None:
        raise ConfigError("--sweep-q needs --out; one file is written per q")
    try:
        qs = [float(x) for x in sweep_q.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --sweep-q value {sweep_q!r}") from exc
    base = Path(out.path)
    for q in qs:
        path = base.with_name(f"{base.stem}_q{q!r}{base.suffix}")
        _write_converge(cfg.replace(demand_q=q), _Output(str(path)))
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = _Output(args.out)
    try:
        cfg = _resolve_config(args)
        if args.command == "values":
            return cmd_values(cfg, out)
        if args.command == "equilibrium":
            return cmd_equilibrium(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        return cmd_converge(cfg, out, args.sweep_q)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelPreconditionError as exc:
        print(f"model precondition violated ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
