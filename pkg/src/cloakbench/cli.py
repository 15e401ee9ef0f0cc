"""Command-line entry point: ``cloakbench <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace

from . import harness, media, shellnorm, verify
from . import mie_solver as ms

log = logging.getLogger("cloakbench")

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--delta-list", type=_floats, help="comma-separated loss values")
    common.add_argument("--ratio", type=_floats, help="r3/r2 (a comma list for ratio-scan)")
    common.add_argument("--nmax", type=int, help="mode truncation (default: automatic)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="stdout format")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cloakbench", description="Complementary-media cloaking benchmark")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve one cloaked problem and dump per-mode JSON")
    sub.add_parser("sweep", parents=[common], help="delta sweep with exponent fit")
    sub.add_parser("ratio-scan", parents=[common], help="fitted exponent against r3/r2")
    sub.add_parser("resonance", parents=[common], help="region norms against delta")
    sub.add_parser("three-sphere", parents=[common], help="three-sphere inequality laboratory")
    v = sub.add_parser("verify", parents=[common], help="run self-check suites")
    v.add_argument("suite", choices=sorted(verify.SUITES) + ["all"])
    return p


def load_config(args) -> harness.ExperimentConfig:
    cfg = harness.ExperimentConfig.from_json(args.config) if args.config else harness.ExperimentConfig()
    changes = {}
    if args.delta_list:
        changes["deltas"] = tuple(sorted(args.delta_list, reverse=True))
    if args.ratio and args.command != "ratio-scan":
        if len(args.ratio) != 1:
            raise UsageError("--ratio takes a single value here")
        changes["ratio"] = args.ratio[0]
        changes["shell"] = None
    if args.nmax is not None:
        changes["nmax"] = args.nmax
    if args.seed is not None:
        changes["seed"] = args.seed
    return replace(cfg, **changes) if changes else cfg


def _emit(rows, header, fmt, stream=None):
    stream = stream if stream is not None else sys.stdout
    if fmt == "json":
        json.dump([dict(zip(header, r)) for r in rows], stream, indent=2)
        stream.write("\n")
    else:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_solve(cfg, args):
    delta = cfg.deltas[-1]
    inc = harness.make_incident(cfg)
    layout = harness.make_layout(cfg, delta)
    sols = ms.solve_all(layout, inc)
    os.makedirs(args.out, exist_ok=True)
    grid = [cfg.r3 * i / 200 for i in range(1, 401)]
    with open(os.path.join(args.out, "modes.json"), "w") as fh:
        json.dump({"delta": delta, "layout": media.layout_record(layout),
                   "modes": [s.record(grid) for s in sols]}, fh)
    rows = [(s.mode.n, s.mode.m, s.mode.pol, "%.17g" % abs(s.radial.s), "%.3g" % s.radial.cond) for s in sols]
    _emit(rows, ("n", "m", "pol", "abs_s", "cond"), args.format)
    return EXIT_OK


def cmd_sweep(cfg, args):
    res = harness.run_sweep(cfg)
    res.write(args.out)
    if args.format == "json":
        json.dump(res.fit.to_dict(), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        with open(os.path.join(args.out, "sweep.csv")) as fh:
            sys.stdout.write(fh.read())
    return EXIT_OK


def cmd_ratio_scan(cfg, args):
    ratios = args.ratio or [10.0, 20.0, 40.0]
    rows = []
    for ell, fit in harness.ratio_scan(cfg, ratios):
        rows.append((ell, fit.gamma_hat, fit.r_squared, fit.jump_slope, fit.status))
    header = ("ratio", "gamma_hat", "r_squared", "jump_slope", "status")
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "ratio_scan.csv"), "w") as fh:
        _emit(rows, header, "csv", fh)
    _emit(rows, header, args.format)
    return EXIT_OK


def cmd_resonance(cfg, args):
    rows, growth = harness.resonance_table(cfg)
    header = ("delta",) + harness.REGIONS
    table = [(d,) + tuple(p[name] for name in harness.REGIONS) for d, p in rows]
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "resonance.csv"), "w") as fh:
        _emit(table, header, "csv", fh)
    with open(os.path.join(args.out, "resonance_growth.json"), "w") as fh:
        json.dump(growth, fh, indent=2, sort_keys=True)
    _emit(table, header, args.format)
    return EXIT_OK


def cmd_three_sphere(cfg, args):
    seed = cfg.seed
    results = []
    for n in (1, 5, 10, 20, 40):
        coef = shellnorm.HelmholtzCoefficients.single(n, "a", 3)
        results.append(shellnorm.three_sphere_check_3d(coef, cfg.k, *verify.THREE_SPHERE_RADII))
    os.makedirs(args.out, exist_ok=True)
    shellnorm.write_report_csv(os.path.join(args.out, "three_sphere_single.csv"), results)
    rows = []
    for dim in (2, 3):
        top, first, second = verify.monte_carlo_trend(dim, seed=seed, k=cfg.k)
        rows.append((dim, top, first, second))
    header = ("dim", "max_ratio", "max_first_half", "max_second_half")
    with open(os.path.join(args.out, "three_sphere_mc.csv"), "w") as fh:
        _emit(rows, header, "csv", fh)
    _emit(rows, header, args.format)
    return EXIT_OK


def cmd_verify(cfg, args):
    checks = verify.run_suite(args.suite, seed=cfg.seed)
    header = ("suite", "check", "value", "threshold", "result")
    if args.suite == "specfun":
        with open(os.path.join(args.out, "wronskian.csv"), "w") as fh:
            _emit(verify.wronskian_table(), ("n", "r", "spherical_residual", "cylindrical_residual"), "csv", fh)
    _emit([c.row() for c in checks], header, args.format)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERIC


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "ratio-scan": cmd_ratio_scan,
    "resonance": cmd_resonance,
    "three-sphere": cmd_three_sphere,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        if args.command == "verify":
            os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, harness.ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"cloakbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (harness.SweepError, ms.ResonanceError, ms.IntegrationError, FloatingPointError) as exc:
        print(f"cloakbench: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
