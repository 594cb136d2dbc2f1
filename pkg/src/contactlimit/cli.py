"""Command-line front end and report writers."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
import warnings
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .analytics import BoundViolation, run_battery
from .config import ConfigError, RunConfig, apply_overrides, config_dict, load_config
from .limit import ConvergenceRecord, LimitError, RateFit, fit_rate, run_sweep
from .operators import OperatorError, lowest_eigenpairs, potential_grid
from .potential import PotentialError, check_assumptions, instantiate
from .scattering import ResonanceError, scattering_length_bs, scattering_length_ode
from .tuner import TuningError, build_sweep

log = logging.getLogger(__name__)

FIT_FIELDS = ("D_norm", "Q_norm", "Q_solve_norm", "inv_proj_norm", "I_defect", "II_norm",
              "rank1_defect_a", "rank1_defect_b", "cor4_m1", "cor4_m2", "cor4_m3", "cor4_m4",
              "eigfn_dist", "hw_bound")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


def fmt_num(x: float) -> str:
    return "%.17g" % x


def _json_value(v, indent: str) -> str:
    if isinstance(v, bool) or v is None:
        return {True: "true", False: "false", None: "null"}[v]
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_num(float(v)) if math.isfinite(v) else "null"
    if isinstance(v, str):
        import json

        return json.dumps(v)
    if isinstance(v, dict):
        inner = indent + "  "
        body = ",\n".join(f"{inner}{_json_value(str(k), inner)}: {_json_value(x, inner)}" for k, x in v.items())
        return "{\n" + body + "\n" + indent + "}" if v else "{}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_json_value(x, indent) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def to_json(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _json_value(obj, "") + "\n"


def json_path(csv_path: str) -> str:
    root, _ = os.path.splitext(csv_path)
    return root + ".json"


def emit_reports(
    records: Sequence[ConvergenceRecord],
    fits: dict[str, RateFit],
    path: str,
    extra: dict | None = None,
) -> tuple[str, str]:
    """Write the record CSV to ``path`` and the fit summary next to it as JSON."""
    if not records:
        raise ValueError("emit_reports: records must be nonempty")
    cols = ConvergenceRecord.columns()
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([fmt_num(getattr(r, c)) for c in cols])
    summary = dict(extra or {})
    summary["fits"] = {
        name: {"exponent": f.exponent, "intercept": f.intercept, "r_squared": f.r_squared,
               "points": f.points, "dropped_first": f.dropped_first}
        for name, f in fits.items()
    }
    jpath = json_path(path)
    with open(jpath, "w", encoding="utf-8") as fh:
        fh.write(to_json(summary))
    return path, jpath


def compute_fits(records: Sequence[ConvergenceRecord], fields: Sequence[str] = FIT_FIELDS) -> dict[str, RateFit]:
    fits = {}
    for name in fields:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                fits[name] = fit_rate(records, name)
            except LimitError as exc:
                log.info("no fit for %s: %s", name, exc)
    return fits


# ---------------------------------------------------------------------------
# subcommands


def cmd_scatter(cfg: RunConfig) -> int:
    V = instantiate(cfg.family(), cfg.ell)
    grid = potential_grid(V, cfg.points_per_segment, cfg.order)
    bs = scattering_length_bs(V, grid)
    ode = scattering_length_ode(V)
    print(f"a_bs = {fmt_num(bs.a)}")
    print(f"a_ode = {fmt_num(ode.a)}")
    print(f"refinement_error = {bs.refinement_error:.3e}")
    print(f"|a_bs - a_ode| = {abs(bs.a - ode.a):.3e}")
    return EXIT_OK


def cmd_tune(cfg: RunConfig) -> int:
    sweep = build_sweep(cfg.family(), cfg.ells, cfg.target(), cfg.points_per_segment, cfg.order)
    print(f"target {cfg.target().describe()}")
    print("ell,lambda_star,e_ell,a")
    for e in sweep.entries:
        print(f"{fmt_num(e.ell)},{fmt_num(e.lambda_star)},{fmt_num(e.spectral.e_ell)},{fmt_num(e.a)}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    sweep = build_sweep(cfg.family(), cfg.ells, cfg.target(), cfg.points_per_segment, cfg.order)
    a_star = cfg.target_value if cfg.target_kind == "a" else sweep.entries[-1].a
    records = run_sweep(sweep, cfg.k, a_star, cfg.jobs)
    fits = compute_fits(records)
    # worker count and output path do not affect results
    conf = {k: v for k, v in config_dict(cfg).items() if k not in ("sweep.jobs", "output.out")}
    extra = {"config": conf, "a_star": a_star,
             "lambda_star": [e.lambda_star for e in sweep.entries]}
    csv_path, jpath = emit_reports(records, fits, cfg.out, extra)
    print(f"wrote {csv_path} ({len(records)} rows) and {jpath}")
    for name, f in fits.items():
        print(f"{name}: exponent {f.exponent:.4f} (r2 {f.r_squared:.4f})")
    return EXIT_OK


def cmd_check(cfg: RunConfig) -> int:
    sweep = build_sweep(cfg.family(), cfg.ells, cfg.target(), cfg.points_per_segment, cfg.order)
    report = check_assumptions(sweep.family, sweep.ells, [e.spectral for e in sweep.entries],
                               [e.a for e in sweep.entries], potentials=[e.potential for e in sweep.entries])
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_spectrum(cfg: RunConfig) -> int:
    V = instantiate(cfg.family(), cfg.ell)
    spec = lowest_eigenpairs(V, potential_grid(V, cfg.points_per_segment, cfg.order))
    print(f"e_ell = {fmt_num(spec.e_ell)}")
    print(f"e_ell_minus = {fmt_num(spec.e_ell_minus)}")
    print(f"gap = {fmt_num(spec.gap)}")
    print("lowest eigenvalues of 1 + J X: " + ", ".join(fmt_num(x) for x in spec.spectrum[:5]))
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    report = run_battery(cfg.seed)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_VIOLATION


COMMANDS = {"scatter": cmd_scatter, "tune": cmd_tune, "sweep": cmd_sweep, "check": cmd_check,
            "spectrum": cmd_spectrum, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contactlimit",
                                description="Contact-interaction limits of short-range potentials.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="sectioned key/value config file")
    p.add_argument("--out", help="CSV output path (JSON summary goes next to it)")
    p.add_argument("--ells", help="comma-separated, strictly decreasing ell values")
    p.add_argument("--ell", help="single ell for scatter/spectrum")
    p.add_argument("--k", help="spectral parameter, e.g. 0+2i")
    tgt = p.add_mutually_exclusive_group()
    tgt.add_argument("--target-a", help="tune to a fixed scattering length")
    tgt.add_argument("--target-e", help="tune to e_ell = c * ell")
    p.add_argument("--seed", help="seed for randomized checks")
    p.add_argument("--jobs", help="worker processes for sweep rows")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    over: dict[str, str] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected SECTION.KEY=VALUE")
        key, value = item.split("=", 1)
        over[key.strip()] = value
    flag_keys = {"out": "output.out", "ells": "sweep.ells", "ell": "sweep.ell", "k": "sweep.k",
                 "seed": "run.seed", "jobs": "sweep.jobs", "target_a": "target.value", "target_e": "target.value"}
    for attr, key in flag_keys.items():
        val = getattr(args, attr)
        if val is not None:
            over[key] = val
    if args.target_a is not None:
        over["target.kind"] = "a"
    if args.target_e is not None:
        over["target.kind"] = "e"
    return apply_overrides(cfg, over).validate()


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with threadpool_limits(limits=1):
            return COMMANDS[args.command](cfg)
    except (PotentialError, TuningError, LimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ResonanceError, OperatorError, BoundViolation) as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except OSError as exc:
        print(f"output error: --out {cfg.out!r}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run_cli())
