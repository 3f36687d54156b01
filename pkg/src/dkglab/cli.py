"""``dkglab`` command line.

Exit codes: 0 pass, 1 verification failure, 2 usage or configuration
error, 3 blow-up, 4 Picard non-contraction.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import reports, snapshot
from .algebra import DomainError, verify_algebra
from .config import ConfigError
from .fields import UsageError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BLOWUP, EXIT_NONCONTRACTION = 0, 1, 2, 3, 4

NULL_TOL = 1e-14
# rough count of full packed-state arrays alive during an ETDRK4 step
_STATE_COPIES = 24


class _Usage(Exception):
    pass


def _err(msg: str) -> None:
    print(f"dkglab: {msg}", file=sys.stderr)


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"expected KEY=VALUE, got {item!r}", "--set")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _resolved_config(args) -> dict:
    over = _overrides(args.set)
    if args.seed is not None:
        over["seed"] = args.seed
    return config_mod.load(args.config, over)


def _check_memory(cfg: dict, budget_mb: float) -> None:
    n = cfg["grid.n"]
    need = _STATE_COPIES * 10 * n**3 * 16 / 2**20
    if need > budget_mb:
        raise _Usage(f"grid n={n} needs about {need:.0f} MiB, over the --memory-budget of {budget_mb:g} MiB")


# ---------------------------------------------------------------------------
# subcommands


def run_verify_algebra(args) -> int:
    from .estimates import angle_bound_sweep, null_symbol_parallel_report

    samples = 10_000 if args.samples is None else args.samples
    tol = 1e-12 if args.tol is None else args.tol
    seed = 0 if args.seed is None else args.seed
    if samples < 1:
        raise _Usage("--samples must be >= 1")
    t0 = time.perf_counter()
    rep = verify_algebra(samples=samples, seed=seed, tol=tol)
    bound = angle_bound_sweep(samples, seed)
    null = null_symbol_parallel_report(samples, seed)
    for c in rep.checks:
        print(f"{'ok  ' if c.passed else 'FAIL'} {c.name}: max deviation {c.max_deviation:.3g}")
    print(f"{'ok  ' if bound['violations'] == 0 else 'FAIL'} angle bound: {bound['violations']} violations")
    null_ok = null["max_abs_overall"] <= NULL_TOL
    print(f"{'ok  ' if null_ok else 'FAIL'} null symbol on parallel configurations: max {null['max_abs_overall']:.3g}")
    passed = rep.passed and bound["violations"] == 0 and null_ok
    out = reports.output_dir(args.out)
    name = "verify-algebra.json"
    man = reports.manifest("verify-algebra", {"samples": samples, "tol": tol}, seed, outputs=[name])
    reports.write_report(out / name, {"passed": passed, "identities": rep.as_dict(), "angle_bound": bound,
                                      "null_symbol": null},
                         man, {"seconds": time.perf_counter() - t0})
    if not passed:
        failed = rep.failures + (["angle bound"] if bound["violations"] else []) + ([] if null_ok else ["null symbol"])
        _err("identity check failed: " + ", ".join(failed))
        return EXIT_FAIL
    return EXIT_OK


def run_solve(args) -> int:
    from .solver import BlowUpError, ConfigurationError, preset_data, solve

    cfg = _resolved_config(args)
    _check_memory(cfg, args.memory_budget)
    try:
        scfg = config_mod.solver_config(cfg)
        data = preset_data(cfg["data.preset"], scfg.grid, cfg["seed"], cfg["data.amplitude"])
    except ConfigurationError as exc:
        raise ConfigError(str(exc), args.config or "<defaults>") from None
    out = reports.output_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stride = max(1, min(cfg["output.stride"], scfg.n_steps))
    snap_stride = cfg["output.snapshot_stride"]
    snap_dir = out / "snapshots" if snap_stride > 0 else None
    if snap_dir is not None:
        snap_dir.mkdir(exist_ok=True)
    inputs = [args.config] if args.config else []
    t0 = time.perf_counter()
    try:
        traj = solve(scfg, data, stride=stride, keep_states=False, snapshot_dir=snap_dir,
                     snapshot_stride=snap_stride or None)
    except BlowUpError as exc:
        path = out / "last_healthy.dkg"
        snapshot.write(path, exc.last_state.psi, exc.last_state.scalar)
        man = reports.manifest("solve", cfg, cfg["seed"], inputs, ["last_healthy.dkg"])
        reports.write_report(out / "solve.json", {"status": "blow-up", "message": str(exc),
                                                  "last_healthy_time": exc.last_state.t},
                             man, {"seconds": time.perf_counter() - t0})
        _err(f"{exc}; last healthy snapshot: {path}")
        return EXIT_BLOWUP
    except ConfigurationError as exc:
        raise ConfigError(str(exc), args.config or "<defaults>") from None
    (out / "trajectory.csv").write_text(traj.to_csv())
    outputs = ["trajectory.csv"] + (sorted(f"snapshots/{p.name}" for p in snap_dir.iterdir()) if snap_dir else [])
    charge = traj.column("charge")
    summary = {
        "status": "ok",
        "steps": scfg.n_steps,
        "final_time": float(traj.column("t")[-1]),
        "charge_drift": traj.relative_drift("charge"),
        "hamiltonian_drift": traj.relative_drift("hamiltonian"),
        "energy_drift": traj.relative_drift("energy"),
    }
    if cfg["data.preset"] == "chadam_glassey":
        mean_charge = charge[0] / scfg.grid.volume
        worst = np.maximum(np.abs(traj.column("density_min")), np.abs(traj.column("density_max")))
        summary["density_relative_max"] = float(worst.max() / mean_charge) if mean_charge > 0 else 0.0
    man = reports.manifest("solve", cfg, cfg["seed"], inputs, outputs)
    reports.write_report(out / "solve.json", summary, man, {"seconds": time.perf_counter() - t0})
    line = f"final charge drift {summary['charge_drift']:.3e} over {scfg.n_steps} steps"
    if "density_relative_max" in summary:
        line += f"; density/charge max {summary['density_relative_max']:.3e}"
    print(line)
    return EXIT_OK


def run_diagnose(args) -> int:
    from .estimates import (AdmissibilityError, EstimateParams, angle_bound_sweep, growth,
                            lookup_estimate, null_symbol_parallel_report, probe, weight_sweep)

    seed = 0 if args.seed is None else args.seed
    out = reports.output_dir(args.out)
    name = f"diagnose-{args.test}.json"
    t0 = time.perf_counter()
    status = EXIT_OK
    settings = {"test": args.test}
    if args.test == "weights":
        samples = 1_000_000 if args.samples is None else args.samples
        if samples < 1:
            raise _Usage("--samples must be >= 1")
        settings["samples"] = samples
        rep = weight_sweep(samples, seed, tol=1e-9 if args.tol is None else args.tol).as_dict()
        print(f"weights: {rep['tuples']} tuples, {rep['total_violations']} violations")
        body = rep
        status = EXIT_FAIL if rep["total_violations"] else EXIT_OK
    elif args.test == "nullsymbol":
        samples = 1000 if args.samples is None else args.samples
        if samples < 1:
            raise _Usage("--samples must be >= 1")
        settings["samples"] = samples
        null = null_symbol_parallel_report(samples, seed)
        bound = angle_bound_sweep(samples, seed)
        body = {"parallel": null, "angle_bound": bound, "tol": NULL_TOL}
        print(f"null symbol on parallel configurations: max {null['max_abs_overall']:.3g}")
        if null["max_abs_overall"] > NULL_TOL or bound["violations"]:
            status = EXIT_FAIL
    else:
        samples = 100 if args.samples is None else args.samples
        if samples < 1:
            raise _Usage("--samples must be >= 1")
        sizes = args.n or [16]
        params = EstimateParams(eps=args.eps)
        if args.estimate:
            try:
                lookup_estimate(args.estimate)
            except AdmissibilityError as exc:
                raise _Usage(str(exc)) from None
        signs = tuple(args.signs)
        settings.update({"n": sizes, "samples": samples, "estimate": args.estimate, "signs": args.signs,
                         "floor": args.floor, "eps": args.eps, "jobs": args.jobs})
        per_n = {}
        for n in sizes:
            per_n[n] = probe(args.test, n, samples, seed, estimate=args.estimate, signs=signs,
                             floor=args.floor, jobs=args.jobs, params=params)
        results = [r.as_dict() for n in sizes for r in per_n[n]]
        growths = []
        for a, b in zip(sizes, sizes[1:]):
            for ra, rb in zip(per_n[a], per_n[b]):
                growths.append({"estimate_id": ra.estimate_id, "from_n": a, "to_n": b,
                                "growth": growth(ra, rb)})
        for r in results:
            label = r["estimate_id"] or r["test_id"]
            print(f"{r['test_id']} {label} n={r['grid']['n']}: max ratio {r['max_ratio']:.6g} "
                  f"(seed {r['argmax_seed']})")
        for gr in growths:
            print(f"growth {gr['estimate_id'] or args.test} n={gr['from_n']}->{gr['to_n']}: {100 * gr['growth']:+.1f}%")
        body = {"results": results, "growth": growths}
    man = reports.manifest("diagnose", settings, seed, outputs=[name])
    reports.write_report(out / name, body, man, {"seconds": time.perf_counter() - t0})
    return status


# the iterate distance is computed on grid functions over [0, T], not as an
# infimum over extensions, so it only approximates the restriction-space norm
PICARD_NORM = ("max over time nodes of |psi_+|_{H^eps} + |psi_-|_{H^eps} + |phi|_{H^(1/2+eps)}"
               " + |phi_t|_{H^(-1/2+eps)}; computable stand-in for the restriction-space norm")


def run_picard(args) -> int:
    from .solver import ConfigurationError, picard_iterate, preset_data

    cfg = _resolved_config(args)
    _check_memory(cfg, args.memory_budget)
    if cfg["time.T"] > 1:
        raise _Usage(f"picard requires time.T <= 1, got {cfg['time.T']:g}")
    try:
        scfg = config_mod.solver_config(cfg)
        data = preset_data(cfg["data.preset"], scfg.grid, cfg["seed"], cfg["data.amplitude"])
        t0 = time.perf_counter()
        res = picard_iterate(scfg, data, k_max=cfg["picard.k_max"])
    except ConfigurationError as exc:
        raise ConfigError(str(exc), args.config or "<defaults>") from None
    ratios = res.ratios()
    rows = []
    print(f"{'k':>3} {'diff':>12} {'ratio':>8}")
    for i, rec in enumerate(res.records):
        ratio = rec.diff_norm / res.records[i - 1].diff_norm if i and res.records[i - 1].diff_norm > 0 else None
        rows.append({"k": rec.k, "diff_norm": rec.diff_norm, "ratio": ratio, "norms": rec.norms})
        print(f"{rec.k:>3} {rec.diff_norm:12.4e} {'' if ratio is None else f'{ratio:8.4f}':>8}")
    monotone = res.contracting and all(r < 1 for r in ratios)
    out = reports.output_dir(args.out)
    man = reports.manifest("picard", cfg, cfg["seed"], [args.config] if args.config else [], ["picard.json"])
    body = {"status": res.status, "monotone": monotone, "floor": res.floor, "norm": PICARD_NORM,
            "iterations": rows, "ratios": ratios}
    reports.write_report(out / "picard.json", body,
                         man, {"seconds": time.perf_counter() - t0})
    if not monotone:
        _err("iterates do not contract; ratios: " + ", ".join(f"{r:.3g}" for r in ratios))
        return EXIT_NONCONTRACTION
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, run_config: bool = False) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides the config file)")
    p.add_argument("--out", default=None, help=f"output directory (default ${reports.OUT_ENV} or ./{reports.DEFAULT_OUT})")
    p.add_argument("--tol", type=float, default=None, help="tolerance for exact checks")
    p.add_argument("--samples", type=int, default=None, help="number of random samples")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sample sweeps")
    if run_config:
        p.add_argument("--config", default=None, help="key = value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
        p.add_argument("--memory-budget", type=float, default=4096, metavar="MIB",
                       help="refuse grids whose working set exceeds this many MiB")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dkglab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-algebra", help="check the Dirac matrix and projection identities")
    _common(p)
    p.set_defaults(func=run_verify_algebra)

    p = sub.add_parser("solve", help="evolve the coupled system from a configuration")
    _common(p, run_config=True)
    p.set_defaults(func=run_solve)

    p = sub.add_parser("diagnose", help="weight laws, null symbol and estimate ratio probes")
    _common(p)
    p.add_argument("--test", required=True,
                   choices=["strichartz", "keybilinear", "weights", "products", "nullsymbol"])
    p.add_argument("--estimate", default=None, help="estimate id for --test products, e.g. interp-1 or KM(0.5,0.5,0)")
    p.add_argument("--n", type=int, action="append", help="grid size; repeat to report growth across sizes")
    p.add_argument("--signs", default="++", choices=["++", "+-", "-+", "--"], help="half-wave signs for keybilinear")
    p.add_argument("--floor", type=float, default=None, help="cap scale of the inverse wave weight")
    p.add_argument("--eps", type=float, default=0.1, help="regularity offset of the interpolated estimates")
    p.set_defaults(func=run_diagnose)

    p = sub.add_parser("picard", help="run the iteration scheme and report contraction ratios")
    _common(p, run_config=True)
    p.set_defaults(func=run_picard)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, _Usage, UsageError, DomainError) as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
