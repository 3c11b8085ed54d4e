"""Command line entry point: ``ultrabrown <command> [flags]``.

Experiment commands exit with status 0 exactly when all their checks pass.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import brownian, localtime, potential, series
from .experiments import EXPERIMENTS, RunConfig, run
from .padic import PadicScalar
from .stats import ALPHA, SIGMAS


def _common(ap: argparse.ArgumentParser, **defaults) -> None:
    ap.add_argument("--p", type=int, default=defaults.get("p"))
    ap.add_argument("--N", type=int, default=defaults.get("N"))
    ap.add_argument("--d", type=int, default=defaults.get("d"))
    ap.add_argument("--depth", type=int, default=defaults.get("depth"))
    ap.add_argument("--reps", type=int, default=defaults.get("reps"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--alpha", type=float, default=ALPHA)
    ap.add_argument("--out", default=None)


def _levels(text: str | None):
    return None if text is None else tuple(int(x) for x in text.split(","))


def _emit(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _cmd_experiment(args) -> int:
    cfg = RunConfig(args.experiment, p=args.p, N=args.N, d=args.d, depth=args.depth,
                    levels=_levels(args.levels), reps=args.reps, seed=args.seed,
                    alpha=args.alpha, sigmas=args.sigmas, out=args.out)
    result = run(cfg)
    for c in result.checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {result.experiment}: {c['name']}")
    if args.out is None:
        print(json.dumps(result.to_json(), sort_keys=True, indent=2))
    return 0 if result.passed else 1


def _cmd_bm(args) -> int:
    depth = args.grid_level if args.depth is None else args.depth
    cfg = brownian.BrownianConfig(args.p, args.N, args.d, depth, args.seed,
                                  carry=not args.carry_free, path=args.path)
    g = brownian.grid(cfg, args.grid_level)
    if args.out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["index", "address"] + [f"A{j}" for j in range(cfg.d)])
        for i, (ball, row) in enumerate(g.rows()):
            w.writerow([i, str(ball)] + [PadicScalar.from_int(int(x), cfg.p, cfg.prec).compact()
                                         for x in row])
    else:
        g.write_csv(args.out)
    return 0


def _read_points(path: str) -> tuple[int, int, np.ndarray]:
    """JSON ``{"p": .., "prec": .., "points": [[..], ..]}``."""
    obj = json.loads(Path(path).read_text())
    pts = np.asarray(obj["points"], dtype=np.int64)
    if pts.ndim == 1:
        pts = pts[:, None]
    return int(obj["p"]), int(obj["prec"]), pts


def _cmd_capacity(args) -> int:
    p, prec, pts = _read_points(args.points)
    kp = potential.KernelParams(p, args.N, pts.shape[1])
    res = potential.equilibrium(kp, pts, prec)
    _emit({"masses": res.masses.tolist(), "energy": _num(res.energy),
           "capacity": _num(res.capacity), "converged": res.converged,
           "iterations": res.iterations, "polar": res.capacity == 0.0}, args.out)
    return 0


def _num(x):
    if x == potential.INF:
        return "inf"
    return float(x)


def _cmd_energy(args) -> int:
    mu = potential.AtomicMeasure.from_json(Path(args.measure).read_text())
    kp = potential.KernelParams(mu.p, args.N, mu.d)
    levels = range(0, mu.prec + 1)
    obj = {"energy": _num(potential.energy(kp, mu)),
           "smoothed": {str(n): _num(potential.smoothed_energy(kp, mu, n)) for n in levels},
           "total_mass": str(mu.total_mass)}
    _emit(obj, args.out)
    return 0


def _cmd_localtime(args) -> int:
    sp = localtime.solve_survival(args.p, args.N, args.d)
    cfg = brownian.BrownianConfig(args.p, args.N, args.d, args.depth, args.seed, path=args.path)
    field = localtime.local_time_field(cfg, args.level, args.r)
    obj = {"h": sp.h, "residual": sp.residual, "mean_offspring": str(sp.mean_offspring),
           "level": args.level, "r": args.r, "density": field.density.tolist(),
           "total": field.total()}
    if args.level + 1 <= args.depth:
        obj["candidates"] = len(localtime.candidates(cfg, args.level))
    _emit(obj, args.out)
    return 0


def _cmd_gw(args) -> int:
    sp = localtime.solve_survival(args.p, args.N, args.d)
    obj = {"h": sp.h, "residual": sp.residual, "iterations": sp.iterations,
           "offspring_law": {str(i): float(q) for i, q in sp.Q.items()}}
    if sp.Q:
        V = localtime.gw_simulate(sp, args.generations, args.reps, args.seed)
        est = localtime.gw_mean_check(sp, args.generations, args.reps, args.seed)
        obj["normalised_mean"] = est.to_json()
        obj["mean_sizes"] = V.mean(axis=0).tolist()
    _emit(obj, args.out)
    return 0


def _cmd_series(args) -> int:
    norms = [Fraction(x) for x in args.norms.split(",")]
    spec = series.SeriesSpec.from_norms(args.p, args.basis, norms, M=args.M, prec=args.prec,
                                        seed=args.seed)
    points = [int(x) for x in args.points.split(",")]
    vals = series.series_sample(spec, points, np.array([args.path]))[0]
    stationary = (series.stationary_mahler(spec) if spec.basis == series.MAHLER
                  else series.stationary_vdp(spec))
    obj = {"values": {str(t): PadicScalar.from_int(int(v), spec.p, spec.prec).compact()
                      for t, v in zip(points, vals)},
           "truncation_radius": str(spec.truncation_radius), "stationary": stationary}
    _emit(obj, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ultrabrown",
                                 description="Ultrametric Brownian sheets: sampling and checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    def experiment_parser(name: str, experiment: str | None = None):
        sp = sub.add_parser(name, help=f"run the {experiment or name} experiment"
                            if experiment else "run a named experiment")
        if experiment is None:
            sp.add_argument("experiment", choices=sorted(EXPERIMENTS))
        else:
            sp.set_defaults(experiment=experiment)
        _common(sp)
        sp.add_argument("--levels", default=None, help="comma-separated levels")
        sp.add_argument("--sigmas", type=float, default=SIGMAS)
        sp.set_defaults(func=_cmd_experiment)

    experiment_parser("run")
    for name in EXPERIMENTS:
        experiment_parser(name, name)

    bm = sub.add_parser("bm", help="tabulate one path on a grid level")
    _common(bm, p=2, N=1, d=1)
    bm.add_argument("--grid-level", type=int, required=True)
    bm.add_argument("--path", type=int, default=0)
    bm.add_argument("--carry-free", action="store_true")
    bm.set_defaults(func=_cmd_bm)

    cap = sub.add_parser("capacity", help="equilibrium measure on a finite point set")
    cap.add_argument("--points", required=True)
    cap.add_argument("--N", type=int, default=2)
    cap.add_argument("--out", default=None)
    cap.set_defaults(func=_cmd_capacity)

    en = sub.add_parser("energy", help="energy and smoothed energies of an atomic measure")
    en.add_argument("--measure", required=True)
    en.add_argument("--N", type=int, default=2)
    en.add_argument("--out", default=None)
    en.set_defaults(func=_cmd_energy)

    lt = sub.add_parser("localtime", help="occupation densities and survival for one path")
    _common(lt, p=2, N=2, d=1, depth=6)
    lt.add_argument("--level", type=int, default=5)
    lt.add_argument("--r", type=int, default=2)
    lt.add_argument("--path", type=int, default=0)
    lt.set_defaults(func=_cmd_localtime)

    gw = sub.add_parser("gw", help="survival probability and branching simulation")
    _common(gw, p=2, N=2, d=1, reps=10_000)
    gw.add_argument("--generations", type=int, default=3)
    gw.set_defaults(func=_cmd_gw)

    se = sub.add_parser("series", help="evaluate a random Mahler or van der Put series")
    se.add_argument("--p", type=int, default=2)
    se.add_argument("--basis", choices=[series.MAHLER, series.VDP], default=series.MAHLER)
    se.add_argument("--norms", required=True, help="comma-separated |a_n|, e.g. 1,1/2,1/4")
    se.add_argument("--M", type=int, default=None)
    se.add_argument("--prec", type=int, default=12)
    se.add_argument("--points", default="0,1,2,3")
    se.add_argument("--seed", type=int, default=0)
    se.add_argument("--path", type=int, default=0)
    se.add_argument("--out", default=None)
    se.set_defaults(func=_cmd_series)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"ultrabrown: error: {exc}", file=sys.stderr)
        return 2
