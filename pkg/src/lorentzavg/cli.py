"""Command line entry point: ``lorentzavg {simulate,compare,scaling,check}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .averaging import AveragedConnectionField
from .checks import run_checks
from .config import load_config, make_config, parse_assignment
from .connections import TildeConnection
from .dynamics import integrate_autoparallel, integrate_lorentz
from .errors import LorentzAvgError
from .harness import _clean, build_setup, run_comparison, scaling_study, write_scaling
from .kinetics import moments

log = logging.getLogger("lorentzavg")


def _config(args) -> dict:
    overrides = dict(parse_assignment(s) for s in args.set or [])
    if args.config:
        return load_config(args.config, overrides)
    return make_config(overrides)


def _out_dir(cfg, args) -> Path:
    out = Path(args.out or cfg["run.output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = _config(args)
    setup = build_setup(cfg)
    T, tol = float(cfg["run.T"]), float(cfg["run.tol"])
    grid = np.linspace(0.0, T, int(cfg["run.n_out"]))
    y0 = setup.dist.center
    kind = cfg["run.connection"]
    if kind == "lorentz":
        traj = integrate_lorentz(setup.metric, setup.faraday, setup.x0, y0, T, tol, t_eval=grid)
    elif kind == "tilde":
        traj = integrate_autoparallel(TildeConnection(setup.metric, setup.faraday), setup.metric, setup.x0, y0, T,
                                      tol, t_eval=grid)
    elif kind == "averaged":
        field = AveragedConnectionField(setup.metric, setup.faraday, moments(setup.dist, setup.metric, setup.x0))
        traj = integrate_autoparallel(field, setup.metric, setup.x0, y0, T, tol, t_eval=grid)
    else:
        raise LorentzAvgError(f"run.connection must be lorentz, tilde or averaged, got {kind!r}")
    path = _out_dir(cfg, args) / "trajectory.csv"
    traj.to_csv(path, setup.metric)
    print(f"wrote {path} ({len(traj)} samples, {traj.steps} steps, {traj.rejected} rejected)")
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    report = run_comparison(cfg)
    paths = report.write(_out_dir(cfg, args))
    print(f"pass={report.passed} alpha={report.alpha:.4g} E={report.energy:.4g} "
          f"multiplier_x={report.multiplier('x')} -> {paths['report']}")
    return 0


def cmd_scaling(args) -> int:
    cfg = _config(args)
    result = scaling_study(cfg)
    paths = write_scaling(result, _out_dir(cfg, args))
    print(json.dumps(_clean(result["fits"]), sort_keys=True, indent=2))
    print(f"wrote {paths['table']} and {paths['fits']}")
    return 0


def cmd_check(args) -> int:
    results = run_checks(_config(args))
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lorentzavg", description="Averaged Lorentz-force dynamics harness")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, text in [
        ("simulate", cmd_simulate, "integrate one trajectory and write CSV"),
        ("compare", cmd_compare, "compare Lorentz and averaged dynamics (JSON + CSV)"),
        ("scaling", cmd_scaling, "sweep alpha and E and fit scaling exponents"),
        ("check", cmd_check, "run the invariant suite over the field presets"),
    ]:
        sp = sub.add_parser(name, help=text)
        sp.add_argument("-c", "--config", help="YAML or JSON config file")
        sp.add_argument("-s", "--set", action="append", metavar="KEY=VALUE", help="override a dotted config key")
        sp.add_argument("-o", "--out", help="output directory (default: run.output_dir)")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except LorentzAvgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
