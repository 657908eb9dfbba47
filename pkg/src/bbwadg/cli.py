"""Command-line driver: ``bbwadg <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
from pathlib import Path

import numpy as np

from .bernstein import num_basis
from .config import ConfigError, RunConfig, load_config
from .io import write_csv, write_vtk
from .mesh import read_gmsh, uniform_mesh
from .polyalg import (
    apply_projection_telescoping,
    build_projection_direct,
    mass_inverse_coeffs,
    projection_coeffs,
    projection_decomposition,
    roundoff_study,
)
from .quadrature import make_rule
from .solver import ElasticSolver, SolverDivergence, sample_on_rule
from .studies import (
    convergence_study,
    fit_rate,
    frequency_study,
    kernel_benchmark,
    monotone_in_k,
    parse_wavespeed,
    solve_manufactured,
)
from .wadg import ElasticWadg, WadgOperator, quadrature_operators


def parse_range(text: str) -> list[int]:
    """``"4"`` -> [4], ``"2..8"`` -> [2, ..., 8], ``"1,3,5"`` -> [1, 3, 5]."""
    text = str(text)
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(x) for x in text.split(",")]


def threads_limit():
    """Context capping BLAS threads at ``BBWADG_THREADS`` when set."""
    n = os.environ.get("BBWADG_THREADS")
    if not n:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return contextlib.nullcontext()
    return threadpool_limits(limits=int(n))


def make_mesh(text: str, dim: int):
    kind, _, arg = text.partition(":")
    if kind == "uniform":
        return uniform_mesh(dim, int(arg))
    return read_gmsh(arg, dim)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration; flags override it")
    p.add_argument("--system", choices=["acoustic", "elastic"])
    p.add_argument("--dim", type=int)
    p.add_argument("--N")
    p.add_argument("--M")
    p.add_argument("--mode", choices=["oracle", "fast"])
    p.add_argument("--mesh", help="uniform:n or gmsh:path")
    p.add_argument("--wavespeed", help="sine:k or const:v")
    p.add_argument("--T", type=float)
    p.add_argument("--cfl", type=float)
    p.add_argument("--tau-p", dest="tau_p", type=float)
    p.add_argument("--tau-u", dest="tau_u", type=float)
    p.add_argument("--tau-v", dest="tau_v", type=float)
    p.add_argument("--tau-sigma", dest="tau_sigma", type=float)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bbwadg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="run one simulation")
    _common(p)
    p.add_argument("--vtk", action="store_true", help="write a VTK snapshot at T")
    p = sub.add_parser("convergence", help="manufactured-solution mesh refinement")
    _common(p)
    p.add_argument("--levels", default="4,8,16,32", help="cells per direction")
    p = sub.add_parser("frequency", help="error against M for oscillatory wavespeeds")
    _common(p)
    p.add_argument("--k", default="1,4,8,12")
    p = sub.add_parser("bench", help="update-kernel timings and operation counts")
    _common(p)
    p.add_argument("--elements", type=int, default=1000)
    p.add_argument("--reps", type=int, default=100)
    p = sub.add_parser("coeffs", help="projection and mass-inverse scalars")
    _common(p)
    p = sub.add_parser("roundoff", help="decomposed vs direct mass-inverse residuals")
    _common(p)
    p = sub.add_parser("project-check", help="fast vs quadrature update on random weights")
    _common(p)
    return parser


def _config(args, **force) -> RunConfig:
    over = {k: getattr(args, k, None) for k in RunConfig.__dataclass_fields__}
    over.update(force)
    return load_config(args.config, over)


def _single(text, default):
    if text is None:
        return default
    vals = parse_range(text)
    if len(vals) != 1:
        raise ConfigError("N", "expected a single degree")
    return vals[0]


def cmd_solve(args) -> int:
    cfg = _config(args, N=_single(args.N, None), M=args.M, vtk=args.vtk or None)
    mesh = make_mesh(cfg.mesh, cfg.dim)
    out = Path(cfg.out)
    if cfg.system == "acoustic":
        c2 = parse_wavespeed(cfg.wavespeed)
        res = solve_manufactured(mesh, cfg.N, cfg.M, cfg.mode, c2, cfg.T, cfg.cfl,
                                 cfg.tau_p, cfg.tau_u)
        row = {"system": "acoustic", "dim": cfg.dim, "N": cfg.N, "M": _mlabel(cfg.M),
               "mode": cfg.mode, "K": mesh.K, "T": cfg.T, "steps": res["steps"],
               "dt": res["dt"], "error": res["error"]}
        fields = {"p": res["state"][0]}
        fields.update({f"u{i}": u for i, u in enumerate(res["state"][1:])})
    else:
        solver, state = _elastic_run(mesh, cfg)
        row = {"system": "elastic", "dim": 3, "N": cfg.N, "M": cfg.M, "mode": cfg.mode,
               "K": mesh.K, "T": cfg.T, "steps": solver.nsteps, "dt": solver.dt,
               "max_abs_v": float(max(np.abs(v).max() for v in state[:3]))}
        names = ["vx", "vy", "vz", "sxx", "syy", "szz", "syz", "sxz", "sxy"]
        fields = dict(zip(names, state))
    path = write_csv([row], out / "solve.csv")
    if cfg.vtk:
        write_vtk(mesh, fields, cfg.N, out / "solve.vtk")
    print(", ".join(f"{k}={v}" for k, v in row.items()))
    print(f"wrote {path}")
    return 0


def _elastic_run(mesh, cfg):
    c2 = parse_wavespeed(cfg.wavespeed)
    one = lambda x: np.ones(x.shape[:-1])  # noqa: E731
    solver = ElasticSolver(mesh, cfg.N, one, c2, c2, cfg.M if cfg.M is not None else cfg.N,
                           cfg.mode, cfg.tau_v, cfg.tau_sigma)
    rule = make_rule(3, 2 * cfg.N + 2)
    q = quadrature_operators(cfg.N, 3, rule)
    state = solver.zero_state()
    pulse = lambda x: np.exp(-25 * np.sum(x**2, axis=-1))  # noqa: E731
    state[0] = q.Pq @ sample_on_rule(mesh, rule, pulse)
    solver.run(state, cfg.T, cfg.cfl)
    return solver, state


def _mlabel(M):
    return "wadg" if M is None else M


def cmd_convergence(args) -> int:
    cfg = _config(args, N=_single(args.N, None), M=args.M)
    if cfg.system != "acoustic":
        raise ConfigError("system", "convergence study is acoustic only")
    levels = parse_range(args.levels)
    rows = convergence_study(cfg.dim, cfg.N, cfg.M, levels, cfg.mode, cfg.T, cfg.cfl,
                             parse_wavespeed(cfg.wavespeed))
    for r in rows:
        r.update({"dim": cfg.dim, "N": cfg.N, "M": _mlabel(cfg.M), "mode": cfg.mode})
        print(f"h={r['h']:.4g} error={r['error']:.4e} rate={r['rate']:.3f}")
    write_csv(rows, Path(cfg.out) / "convergence.csv")
    return 0


def cmd_frequency(args) -> int:
    N = _single(args.N, 7 if (args.dim or 2) == 2 else 6)
    Ms = parse_range(args.M) if args.M else list(range(N + 1))
    cfg = _config(args, N=N, M=0)
    n = int(cfg.mesh.partition(":")[2]) if cfg.mesh.startswith("uniform") else None
    if n is None:
        raise ConfigError("mesh", "frequency study uses uniform meshes")
    rows = frequency_study(cfg.dim, N, n, parse_range(args.k), Ms, cfg.T, cfg.cfl, cfg.mode)
    for r in rows:
        print(f"k={r['k']} M={r['M']} h={r['h']:.4g} error={r['error']:.4e}")
    mono = monotone_in_k(rows)
    print("monotone in k for every M>=1:", all(mono.values()))
    write_csv(rows, Path(cfg.out) / "frequency.csv")
    return 0


def cmd_bench(args) -> int:
    Ns = parse_range(args.N or "2..8")
    M = int(args.M or 1)
    d = args.dim or 3
    rows = kernel_benchmark(Ns, M, d, K=args.elements, reps=args.reps, seed=args.seed or 0)
    for r in rows:
        print(f"N={r['N']} fast_ops={r['fast_ops']} oracle_ops={r['oracle_ops']} "
              f"fast_time={r['fast_time']:.3e} oracle_time={r['oracle_time']:.3e}")
    N = [r["N"] for r in rows]
    if len(N) > 1:
        print("slope ops: fast=%.2f oracle=%.2f; slope time: fast=%.2f oracle=%.2f" % (
            fit_rate(N, [r["fast_ops"] for r in rows]), fit_rate(N, [r["oracle_ops"] for r in rows]),
            fit_rate(N, [r["fast_time"] for r in rows]), fit_rate(N, [r["oracle_time"] for r in rows])))
    write_csv(rows, Path(args.out or "out") / "bench.csv")
    return 0


def cmd_coeffs(args) -> int:
    d = args.dim or 3
    Ns = parse_range(args.N or "5")
    rows = []
    for N in Ns:
        if args.M is not None:
            M = int(args.M)
            c = projection_coeffs(N, M, d)
            print(f"N={N} M={M}: " + " ".join(f"{x:.4f}" for x in c)
                  + f"  (sum|c|={np.abs(c).sum():.4f})")
            rows.append({"N": N, "M": M, **{f"c{j}": x for j, x in enumerate(c)}})
        else:
            c, cond = mass_inverse_coeffs(N, d)
            print(f"N={N} mass inverse: " + " ".join(f"{x:.6g}" for x in c) + f"  (sum|c|={cond:.6g})")
            rows.append({"N": N, **{f"c{j}": x for j, x in enumerate(c)}, "condition": cond})
    if args.out:
        write_csv(rows, Path(args.out) / "coeffs.csv")
    return 0


def cmd_roundoff(args) -> int:
    rows = roundoff_study(parse_range(args.N or "1..9"), args.dim or 3)
    for r in rows:
        print(f"N={r['N']} decomposed={r['residual_decomposed']:.3e} "
              f"direct={r['residual_direct']:.3e} condition={r['condition']:.4g}")
    if args.out:
        write_csv(rows, Path(args.out) / "roundoff.csv")
    return 0


def cmd_project_check(args) -> int:
    rng = np.random.default_rng(args.seed or 0)
    d = args.dim or 3
    Ns = parse_range(args.N or "1..6")
    Ms = parse_range(args.M or "0..2")
    worst = 0.0
    for N in Ns:
        for M in Ms:
            w = 1.0 + rng.random((num_basis(M, d), 4))
            u = rng.standard_normal((num_basis(N, d), 4))
            fast = WadgOperator("fast", N, d, M, weight_coeffs=w)(u)
            ref = WadgOperator("oracle", N, d, M, weight_coeffs=w)(u)
            h = rng.standard_normal(num_basis(N + M, d))
            tel = apply_projection_telescoping(h, projection_decomposition(N, M, d))
            dense = build_projection_direct(N, M, d) @ h
            err = max(np.abs(fast - ref).max(), np.abs(tel - dense).max())
            line = f"N={N} M={M} d={d}: max |fast - oracle| = {err:.3e}"
            if d == 3:
                mats = [1.0 + rng.random((num_basis(M, 3), 4)) for _ in range(3)]
                rv = [rng.standard_normal((num_basis(N, 3), 4)) for _ in range(9)]
                a = ElasticWadg("fast", N, 3, M, *mats)
                b = ElasticWadg("oracle", N, 3, M, *mats)
                ea = a.velocity(rv[:3]) + a.stress(rv[3:])
                eb = b.velocity(rv[:3]) + b.stress(rv[3:])
                el = max(np.abs(x - y).max() for x, y in zip(ea, eb))
                line += f", elastic {el:.3e}"
                err = max(err, el)
            worst = max(worst, err)
            print(line)
    print(f"worst difference {worst:.3e}")
    return 0 if worst <= 1e-10 else 1


COMMANDS = {
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "frequency": cmd_frequency,
    "bench": cmd_bench,
    "coeffs": cmd_coeffs,
    "roundoff": cmd_roundoff,
    "project-check": cmd_project_check,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with threads_limit():
            return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverDivergence as exc:
        print(f"solver aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
