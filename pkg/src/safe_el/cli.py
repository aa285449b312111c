"""Command-line entry point: ``safe-el {run,validate,certify-plant,qp-fuzz,schema,show}``.

Exit codes: 0 success, 1 safety or tracking violation, 2 configuration
error, 3 safety filter infeasible.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import qp, scenario as scn, sim
from .errors import ConfigurationError, Infeasible, SafeControlError
from .plant import ManipulatorModel, certify_bounds

log = logging.getLogger("safe_el")

DEFAULT_OUT = "out"


def _load(source: str, overrides, baseline: bool) -> scn.Scenario:
    sc = scn.load(source)
    if overrides:
        sc = scn.with_overrides(sc, overrides)
    if baseline:
        sc = scn.replace_field(sc, "sim", unfiltered_baseline=True)
    return sc


def _run_one(sc: scn.Scenario, out_dir: str) -> tuple[str, int, dict]:
    trajectory, summary = sim.run(sc)
    csv_path, json_path = sim.write_outputs(trajectory, summary, out_dir)
    return out_dir, summary.exit_code, summary.to_dict()


def _g(v) -> str:
    return "n/a" if v is None else f"{v:.6g}"


def _report(out_dir: str, code: int, summary: dict) -> None:
    print(f"{summary['scenario']}: {summary['status']} (t_final={summary['t_final']:g} s) -> {out_dir}")
    print(f"  min h: " + ", ".join(f"{k}={_g(v)}" for k, v in summary["min_h"].items()))
    print(f"  max ||e||: {_g(summary['max_e_norm'])} (L = {summary['e_bound']:g})")
    print(f"  rms tracking over [T/2, T]: {_g(summary['rms_tracking'])}; QP activations: {summary['qp_activations']}")
    if summary.get("first_violation"):
        v = summary["first_violation"]
        print(f"  first violation: {v['barrier']} h={v['h']:.6g} at t={v['t']:g}", file=sys.stderr)
    if summary.get("error"):
        print(f"  error: {summary['error'].get('message')}", file=sys.stderr)


def cmd_run(args) -> int:
    base = Path(args.out or os.environ.get("SAFE_EL_OUT") or DEFAULT_OUT)
    scenarios = [_load(s, args.set, args.unfiltered_baseline) for s in args.scenario]
    if len(scenarios) == 1:
        dirs = [str(base)]
    else:
        dirs = [str(base / f"{i:02d}_{sc.name}") for i, sc in enumerate(scenarios)]
    if args.jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, scenarios, dirs))
    else:
        results = [_run_one(sc, d) for sc, d in zip(scenarios, dirs)]
    worst = 0
    for out_dir, code, summary in results:
        _report(out_dir, code, summary)
        worst = max(worst, code)
    return worst


def cmd_validate(args) -> int:
    for source in args.scenario:
        sc = _load(source, args.set, False)
        loop = sim.assemble(sc)
        print(f"{sc.name}: ok ({sc.mode} mode, {len(loop.barriers)} barrier(s), initial conditions satisfied)")
        for w in loop.warnings:
            print(f"  warning: {w}")
    return 0


def cmd_certify(args) -> int:
    model = ManipulatorModel(args.m1, args.m2, args.l, args.g)
    bounds = certify_bounds(model, n_samples=args.samples, lambda2=args.lambda2, seed=args.seed)
    print(json.dumps(bounds, indent=2))
    return 0


def random_qp(rng: np.random.Generator, n: int = 2, max_m: int = 4) -> qp.QpProblem:
    m = int(rng.integers(1, max_m + 1))
    return qp.QpProblem(rng.normal(size=n) * 3.0, rng.normal(size=(m, n)), rng.normal(size=m) * 2.0)


def qp_fuzz(count: int, seed: int = 0, atol: float = 1e-8) -> list[str]:
    """Compare ``solve_min_norm`` with ``kkt_oracle`` on random problems; return mismatches."""
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(count):
        prob = random_qp(rng)
        try:
            got = qp.solve_min_norm(prob).u_star
        except Infeasible:
            got = None
        try:
            want = qp.kkt_oracle(prob).u_star
        except Infeasible:
            want = None
        if (got is None) != (want is None):
            failures.append(f"instance {i}: feasibility disagrees (solver={got is not None}, oracle={want is not None})")
        elif got is not None and np.abs(got - want).max() > atol:
            failures.append(f"instance {i}: |u - u_oracle| = {np.abs(got - want).max():.3e}")
    return failures


def cmd_qp_fuzz(args) -> int:
    failures = qp_fuzz(args.count, args.seed)
    for f in failures:
        print(f, file=sys.stderr)
    print(f"{args.count - len(failures)}/{args.count} instances agree with the KKT oracle")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="safe-el", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate scenarios and write trajectory.csv + summary.json")
    r.add_argument("--scenario", action="append", required=True,
                   help=f"preset name ({', '.join(sorted(scn.PRESETS))}) or JSON file; repeatable")
    r.add_argument("--out", help="output directory (default: $SAFE_EL_OUT or ./out)")
    r.add_argument("--unfiltered-baseline", action="store_true", help="bypass the safety filter")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a scenario field, e.g. blf.k1=0.5 or barriers.0.gamma=20")
    r.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check gains and initial conditions without simulating")
    v.add_argument("--scenario", action="append", required=True)
    v.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("certify-plant", help="sample the two-link model and report its bound constants")
    c.add_argument("--samples", type=int, default=10_000)
    c.add_argument("--lambda2", type=float, default=5.0)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--m1", type=float, default=1.0)
    c.add_argument("--m2", type=float, default=1.0)
    c.add_argument("--l", type=float, default=1.0)
    c.add_argument("--g", type=float, default=9.81)
    c.set_defaults(func=cmd_certify)

    f = sub.add_parser("qp-fuzz", help="cross-check the QP solver against brute-force KKT enumeration")
    f.add_argument("--count", type=int, default=1000)
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_qp_fuzz)

    d = sub.add_parser("schema", help="print the scenario JSON schema")
    d.set_defaults(func=lambda a: print(json.dumps(scn.SCENARIO_SCHEMA, indent=2)) or 0)

    s = sub.add_parser("show", help="print a preset as scenario JSON")
    s.add_argument("name")
    s.set_defaults(func=lambda a: print(scn.preset(a.name).to_json()) or 0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except SafeControlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:  # malformed values reaching dataclass validation
        print(f"error: {exc}", file=sys.stderr)
        return ConfigurationError.exit_code


if __name__ == "__main__":
    sys.exit(main())
