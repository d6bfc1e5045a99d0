"""Command-line front end: structures, characteristics, operators, checks and sweeps.

Standard output carries JSON (or CSV with ``--csv``); progress goes to standard
error.  Exit codes: 0 success, 1 hard check failure, 2 usage error, 3 config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from .config import ConfigError, RunConfig
from .dyadic import build_forest, defect, radius, structure_constants, tent_measure
from .operators import berezin, toeplitz
from .quadrature import TentIndex, build_grid, parse_function
from .symbols import parse_symbol
from .verify import CHECKS, Lab, hard_failures, run_check, verify_all
from .weights import (RH, UB1, B1Dyadic, BInfinity, BpDyadic, Regularity, UBp, characteristic, parse_weight,
                      power, predicted_constants)

log = logging.getLogger("toeplab")

KINDS = {
    "bp": lambda a: BpDyadic(a.p),
    "b1": lambda a: B1Dyadic(),
    "ubp": lambda a: UBp(parse_symbol(a.symbol), a.p),
    "ub1": lambda a: UB1(parse_symbol(a.symbol)),
    "rh": lambda a: RH(a.r),
    "binf": lambda a: BInfinity(),
    "reg": lambda a: Regularity(),
}


class UsageError(Exception):
    pass


def _parse_points(text: str):
    try:
        return np.array([complex(p.replace(" ", "")) for p in text.split(";") if p.strip()])
    except ValueError as exc:
        raise UsageError(f"bad point list {text!r}; use e.g. '0.5;0.3+0.2j'") from exc


def _complex_pair(z):
    return [float(np.real(z)), float(np.imag(z))]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--csv", action="store_true", help="emit a flat CSV table")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--seed", type=int)
    common.add_argument("--G", type=int, help="dyadic truncation depth")
    common.add_argument("--grid-G", type=int, dest="grid_G", help="quadrature depth G_q")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="toeplab", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True)

    dyadic = groups.add_parser("dyadic").add_subparsers(dest="action", required=True)
    stats = dyadic.add_parser("stats", parents=[common])
    stats.add_argument("--theta0", default="default")

    weights = groups.add_parser("weights").add_subparsers(dest="action", required=True)
    char = weights.add_parser("char", parents=[common])
    char.add_argument("--kind", choices=sorted(KINDS), required=True)
    char.add_argument("--weight", default="one")
    char.add_argument("--p", type=float, default=2.0)
    char.add_argument("--r", type=float, default=1.5)
    char.add_argument("--symbol", default="one")

    op = groups.add_parser("op").add_subparsers(dest="action", required=True)
    apply = op.add_parser("apply", parents=[common])
    apply.add_argument("--symbol", default="one")
    apply.add_argument("--function", default="monomial:1")
    apply.add_argument("--points", default="0;0.5;0.5j")
    apply.add_argument("--adjoint", action="store_true")
    ber = op.add_parser("berezin", parents=[common])
    ber.add_argument("--symbol", default="power:e=2")
    ber.add_argument("--points", default="0;0.5;0.9")
    ber.add_argument("--route", choices=["invariance", "kernel"], default="invariance")

    ver = groups.add_parser("verify", parents=[common])
    ver.add_argument("check", choices=["all", *CHECKS])

    report = groups.add_parser("report").add_subparsers(dest="action", required=True)
    report.add_parser("sweep", parents=[common])
    return parser


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.G is not None:
        updates["G"] = args.G
    if args.grid_G is not None:
        updates["grid"] = {**cfg.grid, "G_q": args.grid_G}
    if getattr(args, "theta0", "default") != "default":
        updates["theta0"] = float(args.theta0)
    if args.out:
        updates["out"] = args.out
    try:
        return replace(cfg, **updates) if updates else cfg
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def make_lab(cfg: RunConfig) -> Lab:
    log.info("building forest G=%d M=%d and grid %s", cfg.G, cfg.M, cfg.grid)
    return Lab.build(cfg.G, cfg.M, cfg.grid_spec(), theta0=cfg.theta0, seed=cfg.seed)


# subcommands --------------------------------------------------------------------

def cmd_dyadic_stats(cfg, args):
    forest = build_forest(cfg.params(), cfg.M)
    sc = structure_constants(forest, cfg.G)
    k = np.arange(cfg.G + 1)
    m = forest.m
    rows = [{"generation": int(g), "radius": float(radius(g, m)), "defect": float(defect(g, m)),
             "tent_measure": float(tent_measure(g, m))} for g in k]
    summary = {**sc.as_dict(), "m": m, "M": forest.M, "theta0": cfg.theta0}
    return summary, rows, True


def cmd_weights_char(cfg, args):
    try:
        kind = KINDS[args.kind](args)
        sigma = parse_weight(args.weight)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    forest = build_forest(cfg.params(), cfg.M)
    index = None
    if not sigma.is_power:
        grid = build_grid(cfg.grid_spec())
        index = TentIndex(forest, grid, cfg.G)
    result = characteristic(kind, sigma, forest, cfg.G, index)
    row = {"weight": sigma.name, **result.as_row(),
           "per_generation": [float(v) for v in result.per_generation]}
    return row, [row], True


def cmd_op_apply(cfg, args):
    grid = build_grid(cfg.grid_spec())
    try:
        u = parse_symbol(args.symbol)
        f = parse_function(args.function, grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    z = _parse_points(args.points)
    values = np.atleast_1d(toeplitz(u, f.values, grid, z, adjoint=args.adjoint))
    rows = [{"z": _complex_pair(zi), "re": float(v.real), "im": float(v.imag), "abs": float(abs(v))}
            for zi, v in zip(z, values)]
    return {"symbol": u.name, "function": f.provenance, "adjoint": args.adjoint, "values": rows}, rows, True


def cmd_op_berezin(cfg, args):
    grid = build_grid(cfg.grid_spec())
    try:
        u = parse_symbol(args.symbol)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    z = _parse_points(args.points)
    try:
        values = np.atleast_1d(berezin(u, z, grid, route=args.route))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = [{"z": _complex_pair(zi), "re": float(v.real), "im": float(v.imag)} for zi, v in zip(z, values)]
    return {"symbol": u.name, "route": args.route, "values": rows}, rows, True


def cmd_verify(cfg, args):
    lab = make_lab(cfg)
    names = CHECKS if args.check == "all" else (args.check,)
    if len(names) == 1:
        log.info("running %s", names[0])
        reports = sorted(run_check(names[0], lab), key=lambda rep: rep.name)
    else:
        log.info("running %d checks with %d workers", len(names), args.workers)
        reports = verify_all(lab, names, workers=args.workers)
    for rep in reports:
        log.info("%s%s", rep.line(), "" if rep.hard else " (stability)")
    rows = [rep.to_dict() for rep in reports]
    return rows, rows, not hard_failures(reports)


def cmd_report_sweep(cfg, args):
    """Characteristics and predicted bounds against ``b`` for radial weights."""
    forest = build_forest(cfg.params(), cfg.M)
    rows = []
    for symbol_text in cfg.symbols:
        u = parse_symbol(symbol_text)
        for b in cfg.b_values:
            log.info("sweep %s b=%g", u.name, b)
            sigma = power(b)
            pc = predicted_constants(sigma, u, forest, cfg.G)
            row = {"symbol": u.name, "b": b,
                   "B1": characteristic(B1Dyadic(), sigma, forest, cfg.G).value,
                   "B_infinity": pc.b_infinity, "c_sigma": pc.c_sigma, "r": pc.r,
                   "RH_r": characteristic(RH(pc.r), sigma, forest, cfg.G).value,
                   "rh_bound": pc.rh_bound, "uB1": pc.ub1, "weak_bound": pc.weak_bound}
            for p in cfg.p_values:
                row[f"B_{p:g}"] = characteristic(BpDyadic(p), sigma, forest, cfg.G).value
                row[f"uB_{p:g}"] = characteristic(UBp(u, p), sigma, forest, cfg.G).value
            rows.append(row)
    return rows, rows, True


COMMANDS = {
    ("dyadic", "stats"): cmd_dyadic_stats,
    ("weights", "char"): cmd_weights_char,
    ("op", "apply"): cmd_op_apply,
    ("op", "berezin"): cmd_op_berezin,
    ("verify", None): cmd_verify,
    ("report", "sweep"): cmd_report_sweep,
}


# output ------------------------------------------------------------------------

def _plain(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, (np.floating, np.integer)):
        return _plain(value.item())
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def render(payload, rows, cfg: RunConfig, as_csv: bool) -> str:
    prov = cfg.provenance()
    if as_csv:
        flat = [{**prov, **{k: json.dumps(_plain(v)) if isinstance(v, (dict, list)) else v
                            for k, v in row.items()}} for row in rows]
        columns = list(dict.fromkeys(key for row in flat for key in row))
        buf = io.StringIO()
        writer = csv.DictWriter(buf, columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(flat)
        return buf.getvalue()
    if isinstance(payload, list):
        doc = [{**prov, **row} for row in payload]
    else:
        doc = {**prov, **payload}
    return json.dumps(_plain(doc), indent=2, sort_keys=False) + "\n"


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"toeplab: config error: {exc}", file=sys.stderr)
        return 3
    command = COMMANDS[(args.group, getattr(args, "action", None))]
    try:
        payload, rows, ok = command(cfg, args)
    except UsageError as exc:
        print(f"toeplab: {exc}", file=sys.stderr)
        return 2
    text = render(payload, rows, cfg, args.csv)
    if cfg.csv:
        with open(cfg.csv, "w") as fh:
            fh.write(render(payload, rows, cfg, True))
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
