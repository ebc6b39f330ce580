"""Command line interface: ``cireuler {models,converge,price,calibrate-bm}``."""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .convergence import (
    ERROR_FIELDS,
    RATE_FIELDS,
    calibration_report,
    estimate_errors_many,
    fit_rate,
    write_error_csv,
    write_plot_csv,
    write_rate_csv,
)
from .model import BUILTIN_IDS, InvalidModelError, ModelParams, builtin_model, feller_index, model_from_mapping
from .payoffs import BIAS_FIELDS, DEFAULT_MEMORY_CAP, MemoryCapError, Payoff, bias_curve, write_bias_csv
from .reference import BM_GAP_CONSTANT, bm_max_mean_exact
from .rng import DEFAULT_SEED
from .schemes import SCHEME_NAMES, resolve_scheme

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

PROFILES = {
    "desk": {"paths": 10_000, "n_min": 2, "n_max": 2**12, "fit_min": 2**6, "fit_max": 2**12},
    # M=1e5, N up to 2^15: hours on a single machine
    "paper": {"paths": 100_000, "n_min": 2, "n_max": 2**15, "fit_min": 2**6, "fit_max": 2**15},
}

DEFAULTS = {
    "converge": {"models": [str(i) for i in BUILTIN_IDS], "schemes": list(SCHEME_NAMES)},
    "price": {"models": ["1"], "schemes": ["FTE"], "n_max": 2**10},
    "calibrate-bm": {"models": [], "schemes": [], "n_min": 2**4, "n_max": 2**10, "paths": 100_000},
    "models": {"models": [], "schemes": []},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    models: list[str] = field(default_factory=list)
    schemes: list[str] = field(default_factory=list)
    n_min: int = 2
    n_max: int = 2**12
    paths: int = 10_000
    seed: int = DEFAULT_SEED
    fit_min: int = 2**6
    fit_max: int = 2**12
    out: str = "results"
    profile: str = "desk"
    threads: int = 1
    payoff: str = "lookback"
    strike: float = 110.0
    memory_cap: int = DEFAULT_MEMORY_CAP
    config: str | None = None
    inline_models: dict = field(default_factory=dict)

    @property
    def N_list(self) -> list[int]:
        out, n = [], self.n_min
        while n <= self.n_max:
            out.append(n)
            n *= 2
        return out

    def resolved_models(self) -> list[tuple[str, ModelParams]]:
        out = []
        for name in self.models:
            if name in self.inline_models:
                out.append((name, self.inline_models[name]))
            else:
                out.append((name, builtin_model(name)))
        return out

    def to_json(self) -> str:
        d = asdict(self)
        d["inline_models"] = {k: v.as_dict() for k, v in self.inline_models.items()}
        d["N_list"] = self.N_list
        return json.dumps(d, indent=2, sort_keys=True)


def _pow2(text) -> int:
    n = int(text)
    if n < 1 or n & (n - 1):
        raise ValueError(f"{text} is not a power of two")
    return n


_CONVERTERS = {
    "n_min": _pow2,
    "n_max": _pow2,
    "fit_min": int,
    "fit_max": int,
    "paths": int,
    "seed": int,
    "threads": int,
    "strike": float,
    "memory_cap": int,
    "out": str,
    "profile": str,
    "payoff": str,
}


def _split(text: str) -> list[str]:
    return [t for t in text.replace(";", " ").split() if t]


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge profile preset, command defaults, config file and flags (in
    increasing priority) and check every value before anything runs."""
    file_run: dict = {}
    inline: dict = {}
    if args.config:
        parser = configparser.ConfigParser()
        try:
            with open(args.config, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        for section in parser.sections():
            if section == "run":
                file_run = dict(parser["run"])
            else:
                try:
                    inline[section] = model_from_mapping(parser[section], label=section)
                except InvalidModelError as exc:
                    raise UsageError(str(exc)) from None

    profile = args.profile or file_run.get("profile", "desk")
    if profile not in PROFILES:
        raise UsageError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")
    values: dict = {"profile": profile}
    values.update(PROFILES[profile])
    values.update(DEFAULTS[args.command])
    for key, raw in file_run.items():
        if key in ("model", "models"):
            values["models"] = _split(raw.replace(",", " "))
        elif key in ("scheme", "schemes"):
            values["schemes"] = _split(raw)
        elif key in _CONVERTERS:
            try:
                values[key] = _CONVERTERS[key](raw)
            except ValueError as exc:
                raise UsageError(f"config [run] {key}: {exc}") from None
        else:
            raise UsageError(f"config [run]: unknown key {key!r}")
    for key in _CONVERTERS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    values.setdefault("threads", os.cpu_count() or 1)
    if getattr(args, "model", None):
        values["models"] = [str(m) for m in args.model]
    if getattr(args, "scheme", None):
        values["schemes"] = list(args.scheme)

    cfg = RunConfig(command=args.command, config=args.config, inline_models=inline, **values)
    if cfg.threads < 1:
        cfg.threads = 1
    _check(cfg)
    return cfg


def _check(cfg: RunConfig) -> None:
    if cfg.n_min > cfg.n_max:
        raise UsageError(f"--n-min {cfg.n_min} exceeds --n-max {cfg.n_max}")
    if cfg.paths < 2:
        raise UsageError("--paths must be at least 2")
    for name in cfg.models:
        if name not in cfg.inline_models:
            try:
                builtin_model(name)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
    for s in cfg.schemes:
        try:
            resolve_scheme(s)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if cfg.command in ("converge", "price"):
        if not cfg.schemes:
            raise UsageError("at least one --scheme is required")
        if not cfg.models:
            raise UsageError("at least one --model is required")
    if cfg.command == "price":
        try:
            Payoff(cfg.payoff, cfg.strike)
        except ValueError as exc:
            raise UsageError(str(exc)) from None


# -- commands ------------------------------------------------------------------


def cmd_models(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    head = f"{'model':>5} {'v0':>9} {'kappa':>6} {'theta':>7} {'sigma':>6} {'rho':>7} {'mu':>7} {'nu':>8}"
    print(head, file=stream)
    for i in BUILTIN_IDS:
        p = builtin_model(i)
        print(
            f"{i:>5} {p.v0:>9g} {p.kappa:>6g} {p.theta:>7g} {p.sigma:>6g} {p.rho:>7g} {p.mu:>7g} {feller_index(p):>8.4f}",
            file=stream,
        )
    print("T = 1, s0 = 100 for every model", file=stream)
    return EXIT_OK


def cmd_converge(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    schemes = [resolve_scheme(s) for s in cfg.schemes]
    models = cfg.resolved_models()
    by_key: dict = {}
    t0 = time.perf_counter()
    for N in cfg.N_list:
        for rec in estimate_errors_many(schemes, models, N, cfg.paths, cfg.seed, threads=cfg.threads):
            by_key.setdefault((rec.model, rec.scheme), []).append(rec)
    records, rates = [], []
    for label, _ in models:
        for s in schemes:
            table = by_key[(label, s.label)]
            records.extend(table)
            for target in ("v", "x"):
                try:
                    rates.append(fit_rate(table, cfg.fit_min, cfg.fit_max, target))
                except ValueError as exc:
                    print(f"warning: no {target} fit for {s.label}/{label}: {exc}", file=sys.stderr)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_error_csv(out / "errors.csv", records)
    write_rate_csv(out / "rates.csv", rates)
    write_plot_csv(out / "errors_log2.csv", records)

    lookup = {(r.model, r.scheme, r.target): r.slope for r in rates}
    for label, p in models:
        print(f"\nEstimated convergence rates, model {label} (nu = {feller_index(p):.4g})", file=stream)
        print(f"{'scheme':<8} {'rate CIR':>9} {'rate Heston':>12}", file=stream)
        for s in schemes:
            cir = lookup.get((label, s.label, "v"), float("nan"))
            hes = lookup.get((label, s.label, "x"), float("nan"))
            print(f"{s.label:<8} {cir:>9.4f} {hes:>12.4f}", file=stream)
    print(f"\nfit range N in [{cfg.fit_min}, {cfg.fit_max}], M = {cfg.paths}, seed = {cfg.seed}", file=stream)
    print(f"wrote {out / 'errors.csv'} and {out / 'rates.csv'} ({time.perf_counter() - t0:.1f} s)", file=stream)
    return EXIT_OK


def cmd_price(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    pay = Payoff(cfg.payoff, cfg.strike)
    rows = []
    for label, p in cfg.resolved_models():
        for name in cfg.schemes:
            s = resolve_scheme(name)
            curve = bias_curve(
                s, p, pay, cfg.N_list, cfg.paths, cfg.seed,
                threads=cfg.threads, memory_cap=cfg.memory_cap, model_label=label,
            )
            print(f"\n{pay.label}, scheme {s.label}, model {label} (reference N = {2 * cfg.n_max})", file=stream)
            print(f"{'N':>7} {'bias':>12} {'se':>11}", file=stream)
            for pt in curve:
                print(f"{pt.N:>7} {pt.bias:>12.3e} {pt.se:>11.2e}", file=stream)
                rows.append({"payoff": pay.label, "scheme": s.label, "model": label,
                             "N": pt.N, "bias": pt.bias, "se": pt.se, "seed": cfg.seed})
    out = Path(cfg.out)
    write_bias_csv(out / "bias.csv", rows)
    print(f"\nwrote {out / 'bias.csv'}", file=stream)
    return EXIT_OK


def cmd_calibrate_bm(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    exact = bm_max_mean_exact(1.0)
    rows = calibration_report(cfg.N_list, cfg.paths, cfg.seed, threads=cfg.threads)
    print(f"E[max W on [0,1]] = sqrt(2/pi) = {exact:.10f}", file=stream)
    print(f"gap asymptotic: sqrt(1/(2 pi)) |zeta(1/2)| N^-1/2 = {BM_GAP_CONSTANT:.5f} N^-1/2", file=stream)
    print(f"{'N':>7} {'E[max_k W]':>12} {'se':>9} {'gap':>10} {'asymptotic':>11} {'ratio':>7}", file=stream)
    for r in rows:
        print(
            f"{r['N']:>7} {r['estimate']:>12.6f} {r['se']:>9.2e} {r['gap']:>10.5f} {r['asymptotic']:>11.5f} {r['ratio']:>7.3f}",
            file=stream,
        )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bm_calibration.csv", "w", encoding="utf-8") as fh:
        keys = ("N", "estimate", "se", "gap", "asymptotic", "ratio")
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join(repr(r[k]) if isinstance(r[k], float) else str(r[k]) for k in keys) + "\n")
    return EXIT_OK


COMMANDS = {
    "models": cmd_models,
    "converge": cmd_converge,
    "price": cmd_price,
    "calibrate-bm": cmd_calibrate_bm,
}

_CSV_HELP = f"""\
CSV outputs (written below --out):
  errors.csv       {",".join(ERROR_FIELDS)}
  rates.csv        {",".join(RATE_FIELDS)}
  errors_log2.csv  scheme,model,log2_N,log2_err_v,log2_err_x
  bias.csv         {",".join(BIAS_FIELDS)}
  bm_calibration.csv N,estimate,se,gap,asymptotic,ratio

Config file (INI, UTF-8): a [run] section with keys named like the flags
(model, scheme, n_min, n_max, paths, seed, fit_min, fit_max, out, profile,
threads, payoff, strike, memory_cap); every other section defines a model
(v0, kappa, theta, sigma, rho, mu, s0, T) selectable by section name.
Flags override the config file, which overrides the profile defaults.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("run options")
    g.add_argument("--config", help="INI config file")
    g.add_argument("--model", action="append", help="builtin id 1-5 or config section; repeatable")
    g.add_argument("--scheme", action="append",
                   help=f"one of {', '.join(SCHEME_NAMES)} or a triple like id,abs,abs; repeatable")
    g.add_argument("--n-min", dest="n_min", type=_pow2, help="smallest N (power of two)")
    g.add_argument("--n-max", dest="n_max", type=_pow2, help="largest N (power of two)")
    g.add_argument("--paths", type=int, help="Monte Carlo paths M")
    g.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
    g.add_argument("--fit-min", dest="fit_min", type=int, help="smallest N in the rate fit")
    g.add_argument("--fit-max", dest="fit_max", type=int, help="largest N in the rate fit")
    g.add_argument("--out", help="output directory (default: results)")
    g.add_argument("--profile", choices=sorted(PROFILES), help="desk (default) or paper (long running)")
    g.add_argument("--threads", type=int, help="worker threads; results do not depend on it")
    g.add_argument("--payoff", help="price: lookback, asian or terminal")
    g.add_argument("--strike", type=float, help="price: strike of the put (default 110)")
    g.add_argument("--memory-cap", dest="memory_cap", type=int, help="price: cap on max(N) * paths")
    g.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")

    parser = _Parser(
        prog="cireuler",
        description="Euler schemes for the CIR / log-Heston SDE and their strong convergence.",
        epilog=_CSV_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)
    helps = {
        "models": "list the builtin parameter sets",
        "converge": "coupled error tables and fitted rates",
        "price": "bias of path-dependent payoffs versus N",
        "calibrate-bm": "discrete Brownian maximum versus the zeta(1/2) asymptotic",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text,
                       epilog=_CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except UsageError as exc:
        print(f"cireuler: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.print_config:
        print(cfg.to_json())
        return EXIT_OK
    try:
        return COMMANDS[cfg.command](cfg)
    except (MemoryCapError, ValueError, RuntimeError, OSError) as exc:
        print(f"cireuler: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
