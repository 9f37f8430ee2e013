"""Command-line front end.

Subcommands: kernel, apply, heat-compare, solve, multistart, validate.
JSON for configs and results, CSV for fields and kernel tables; all files
are written atomically.  Exit codes: 0 success, 1 numerical failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from . import model as md
from . import nehari as nh
from . import semigroup as sg
from . import spectral as sp
from . import validation
from .lattice import (Field, LatticeGeometry, atomic_write_text, load_field,
                      save_field)


def _dump_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _sidecar(path) -> str:
    base, _ = os.path.splitext(str(path))
    return base + ".json"


def _write_kernel_csv(kernel: sp.Kernel, path):
    header = ",".join(f"x{i + 1}" for i in range(kernel.d)) + ",value"
    lines = [header]
    offsets = np.stack(np.meshgrid(*[np.arange(-kernel.R, kernel.R + 1)] * kernel.d,
                                   indexing="ij"), axis=-1).reshape(-1, kernel.d)
    for coords, value in zip(offsets, kernel.values.ravel(order="C")):
        lines.append(",".join(str(int(c)) for c in coords) + "," + repr(float(value)))
    atomic_write_text(path, "\n".join(lines) + "\n")
    _dump_json(_sidecar(path), {
        "alpha": kernel.alpha, "d": kernel.d, "R": kernel.R, "M": kernel.M,
        "tail_bound": kernel.tail_bound, "doubling_error": kernel.doubling_error,
    })


def cmd_kernel(args) -> int:
    cfg = sp.SpectralConfig(M=args.points)
    kernel = sp.kernel_table(args.alpha, args.dim, args.radius, cfg)
    _write_kernel_csv(kernel, args.out)
    print(f"wrote kernel table to {args.out} "
          f"(tail {kernel.tail_bound:.3e}, doubling {kernel.doubling_error:.3e})")
    return 0


def cmd_apply(args) -> int:
    u = load_field(args.field)
    if args.path == "fft":
        v = sp.apply_multiplier_fft(u, args.alpha)
    else:
        radius = args.radius
        if radius is None:
            radius = min(2 * u.geom.L, args.points // 4)
        if u.geom.is_periodic() and args.radius is None:
            kernel = sp.torus_kernel(args.alpha, u.geom)
        else:
            kernel = sp.kernel_table(args.alpha, u.geom.d, radius,
                                     sp.SpectralConfig(M=args.points), doubling_check=False)
        v = sp.apply_kernel(u, kernel)
    save_field(v, args.out)
    print(f"wrote field to {args.out}")
    return 0


def cmd_heat_compare(args) -> int:
    geom = LatticeGeometry(args.dim, args.radius)
    kernel = sp.kernel_table(args.alpha, args.dim, 2 * args.radius,
                             sp.SpectralConfig(M=args.points), doubling_check=False)
    scheme = sg.build_scheme(args.alpha)
    probes = [Field.delta(geom)]
    rng = np.random.default_rng(args.seed)
    for _ in range(args.fields):
        probes.append(Field(geom, rng.standard_normal(geom.shape)))
    worst = 0.0
    for u in probes:
        a = sp.apply_kernel(u, kernel)
        b = sg.fraclap_semigroup(u, args.alpha)
        worst = max(worst, float(np.max(np.abs(a.values - b.values)) / np.max(np.abs(u.values))))
    report = {
        "max_rel_err": worst,
        "scalar_identity_err": scheme.scalar_identity_err,
        "nodes": scheme.nodes,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.out:
        _dump_json(args.out, report)
    return 0


def _result_payload(res: nh.GroundStateResult, field_path: str) -> dict:
    return {
        "energy": res.energy,
        "grad_residual": res.grad_residual,
        "nehari_residual": res.nehari_residual,
        "iterations": res.iterations,
        "boundary_mass": res.boundary_mass,
        "field": field_path,
    }


def cmd_solve(args) -> int:
    model = md.load_model(args.config)
    if args.w0:
        w0 = load_field(args.w0)
    else:
        w0 = nh.gaussian_bump(model.geom, width=max(2.0, model.geom.L / 8.0))
    cfg = nh.SolverConfig(seed=args.seed, max_iter=args.max_iter)
    base, _ = os.path.splitext(args.out)
    field_path = base + "_field.csv"
    try:
        res = nh.minimize(model, w0, cfg)
    except nh.SolverError as exc:
        if exc.result is not None:
            save_field(exc.result.u, field_path)
            _dump_json(args.out, _result_payload(exc.result, field_path))
        print(f"solve failed: {exc}", file=sys.stderr)
        return 1
    save_field(res.u, field_path)
    _dump_json(args.out, _result_payload(res, field_path))
    print(f"energy {res.energy!r} in {res.iterations} iterations -> {args.out}")
    return 0


def cmd_multistart(args) -> int:
    model = md.load_model(args.config)
    cfg = nh.SolverConfig(seed=args.seed, max_iter=args.max_iter)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sset = nh.multistart(model, args.starts, cfg, dedupe_tol=args.dedupe_tol)
    base, _ = os.path.splitext(args.out)
    entries = []
    for i, orbit in enumerate(sset.orbits):
        rep_path = f"{base}_orbit{i}.csv"
        save_field(orbit.representative, rep_path)
        entries.append({
            "energy": orbit.energy,
            "orbit_representative": rep_path,
            "multiplicity": orbit.multiplicity,
        })
    _dump_json(args.out, entries)
    if sset.failures:
        for index, message in sset.failures:
            print(f"start {index} skipped: {message}", file=sys.stderr)
    print(f"{len(sset.orbits)} distinct orbit(s) from {args.starts} starts -> {args.out}")
    return 0 if not sset.failures or sset.orbits else 1


def cmd_validate(args) -> int:
    results = validation.run_checks(only=args.only, fault=args.fault)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    if args.json:
        _dump_json(args.json, [r.__dict__ for r in results])
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        for r in failed:
            print(f"failed: {r.module}/{r.name}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fraclat",
                                     description="Discrete fractional Laplacian toolkit")
    parser.add_argument("--version", action="version", version=f"fraclat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="tabulate the convolution kernel")
    k.add_argument("--alpha", type=float, required=True)
    k.add_argument("--dim", type=int, default=1)
    k.add_argument("--radius", type=int, required=True)
    k.add_argument("--points", type=int, default=8192)
    k.add_argument("--out", default="kernel.csv")
    k.set_defaults(func=cmd_kernel)

    a = sub.add_parser("apply", help="apply the operator to a field CSV")
    a.add_argument("--field", required=True)
    a.add_argument("--alpha", type=float, required=True)
    a.add_argument("--path", choices=["kernel", "fft"], default="kernel")
    a.add_argument("--points", type=int, default=8192)
    a.add_argument("--radius", type=int, default=None)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_apply)

    h = sub.add_parser("heat-compare", help="semigroup vs kernel definition check")
    h.add_argument("--alpha", type=float, required=True)
    h.add_argument("--dim", type=int, choices=[1], default=1)
    h.add_argument("--radius", type=int, default=12)
    h.add_argument("--points", type=int, default=8192)
    h.add_argument("--fields", type=int, default=10)
    h.add_argument("--seed", type=int, default=0)
    h.add_argument("--out", default=None)
    h.set_defaults(func=cmd_heat_compare)

    s = sub.add_parser("solve", help="ground-state solve from a model config")
    s.add_argument("--config", required=True)
    s.add_argument("--w0", default=None, help="initial field CSV (default: centered bump)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-iter", type=int, default=5000)
    s.add_argument("--out", default="result.json")
    s.set_defaults(func=cmd_solve)

    ms = sub.add_parser("multistart", help="multistart search for distinct orbits")
    ms.add_argument("--config", required=True)
    ms.add_argument("--starts", type=int, required=True)
    ms.add_argument("--seed", type=int, required=True)
    ms.add_argument("--max-iter", type=int, default=5000)
    ms.add_argument("--dedupe-tol", type=float, default=1e-4)
    ms.add_argument("--out", default="set.json")
    ms.set_defaults(func=cmd_multistart)

    v = sub.add_parser("validate", help="run the invariant suite")
    v.add_argument("--only", choices=list(validation.MODULES), default=None)
    v.add_argument("--json", default=None, help="write the machine-readable report here")
    v.add_argument("--fault", choices=["wrong-sign-kernel"], default=None,
                   help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, nh.SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
