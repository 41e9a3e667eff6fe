"""Command line interface: run scenarios, self-verify, profile."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="shellfrac",
        description="Phase-field fracture of thin shells on LR NURBS meshes")
    sub = ap.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a scenario from a config file")
    runp.add_argument("config", type=Path)
    runp.add_argument("--out-dir", type=Path, default=Path("out"))
    runp.add_argument("--max-steps", type=int, default=10 ** 9)
    runp.add_argument("--t-end", type=float, default=None)
    runp.add_argument("--seed", type=int, default=0)
    runp.add_argument("--snapshot-every", type=int, default=0, metavar="N")
    runp.add_argument("--backend", choices=("python", "cython"), default=None)
    runp.add_argument("--quiet", action="store_true")

    ver = sub.add_parser("verify", help="run the built-in oracle/property checks")
    ver.add_argument("--seed", type=int, default=0)

    prof = sub.add_parser("profile", help="per-phase timing of a scenario")
    prof.add_argument("config", type=Path)
    prof.add_argument("--max-steps", type=int, default=20)
    prof.add_argument("--seed", type=int, default=0)

    args = ap.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "verify":
        return _cmd_verify(args)
    if args.command == "profile":
        return _cmd_profile(args)
    return 2


def _cmd_run(args) -> int:
    from .config import load_config
    from .runner import run_transient
    from .scenarios import build_scenario

    np.random.seed(args.seed)
    cfg = load_config(args.config)
    scenario = build_scenario(cfg)
    t_end = args.t_end if args.t_end is not None else cfg.get("t_end", 1e9)
    res = run_transient(scenario, t_end=t_end, max_steps=args.max_steps,
                        out_dir=args.out_dir, snapshot_every=args.snapshot_every,
                        verbose=not args.quiet, backend=args.backend)
    n_acc = sum(1 for r in res.log.records if r.get("event") == "accepted")
    print(f"accepted steps: {n_acc}, final t = {res.final_state.t:.6g}, "
          f"control points = {res.final_mesh.n_funcs}")
    if res.aborted:
        print(f"run aborted: {res.aborted}")
        return 1
    return 0


def _cmd_verify(args) -> int:
    """Quick self-contained correctness checks (a small subset of the test
    suite, runnable without pytest)."""
    from fractions import Fraction as F

    from .dynamics import adapt_dt, genalpha_params, TimeControl
    from .lrmesh.mesh import LRMesh, MeshLine, insert_mesh_line, refine_structured
    from .material import MaterialParams, degradation, smoothed_jump

    rng = np.random.default_rng(args.seed)
    failures = []

    def check(name, ok):
        print(f"  [{'PASS' if ok else 'FAIL'}] {name}")
        if not ok:
            failures.append(name)

    print("spline kernel:")
    gy, gx = np.meshgrid(np.linspace(0, 1, 8), np.linspace(0, 1, 8), indexing="ij")
    cps = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(64)])
    mesh = LRMesh.tensor_patch((2, 2), 6, 6, cps)
    res = refine_structured(mesh, [20, 27], 2)
    errs = []
    for _ in range(50):
        u, v = rng.random(2)
        e = res.mesh.find_element(u, v)
        _, N, dN, _ = res.mesh.evaluate_basis(e, (u, v))
        errs.append(abs(N.sum() - 1.0))
    check("partition of unity after refinement < 1e-12", max(errs) < 1e-12)

    vals = np.sin(3 * mesh.greville_points()[:, 0])
    from .lrmesh.mesh import transfer_field
    vals2 = transfer_field(res.transfer, vals)
    errs = []
    for _ in range(50):
        u, v = rng.random(2)
        e0 = mesh.find_element(u, v)
        ids0, N0, _, _ = mesh.evaluate_basis(e0, (u, v))
        e1 = res.mesh.find_element(u, v)
        ids1, N1, _, _ = res.mesh.evaluate_basis(e1, (u, v))
        errs.append(abs(N0 @ vals[ids0] - N1 @ vals2[ids1]))
    check("field transfer exactness < 1e-12", max(errs) < 1e-12)

    print("material:")
    g1, dg1, _ = degradation(1.0, 1e-4)
    g0, dg0, _ = degradation(0.0, 1e-4)
    check("g(1)=1, g(0)=0, g'(0)=0, g'(1)=s",
          abs(g1 - 1) < 1e-15 and g0 == 0 and dg0 == 0 and abs(dg1 - 1e-4) < 1e-12)
    check("smoothed jump midpoint", abs(smoothed_jump(1.0, 250.0) - 0.5) < 1e-15)

    print("time integration:")
    gp = genalpha_params(0.5)
    check("rho_inf=0.5 parameter tuple",
          np.allclose([gp.alpha_f, gp.alpha_m, gp.gamma, gp.beta],
                      [2 / 3, 1.0, 5 / 6, 4 / 9]))
    from .dynamics import oscillator_trace
    errs = []
    for dtv in (0.02, 0.01, 0.005):
        xT, _ = oscillator_trace(2.0, 1.0, 0.0, dtv, 2.0, 0.5)
        errs.append(abs(xT - np.cos(4.0)))
    order = np.log2(errs[0] / errs[1])
    check("oscillator convergence order ~ 2", 1.9 < order < 2.1)
    tc = TimeControl()
    check("dt rule cases",
          abs(adapt_dt(0.01, 3, False, tc) - 0.015) < 1e-15
          and abs(adapt_dt(0.01, 6, False, tc) - 0.005) < 1e-15
          and abs(adapt_dt(0.08, 2, False, tc) - 0.1) < 1e-15)

    print("tangents:")
    ok = _verify_tangent(rng)
    check("element tangents match finite differences < 1e-5", ok)

    if failures:
        print(f"{len(failures)} check(s) failed")
        return 1
    print("all checks passed")
    return 0


def _verify_tangent(rng) -> bool:
    from .assembly.backend import make_kernel
    from .assembly.cache import ElementQuadCache
    from .lrmesh.mesh import LRMesh
    from .material import MaterialParams

    params = MaterialParams(K=27.78, G=41.67, c=0.1, Gc=1e-3, l0=0.02,
                            T=0.0125, rho=1.0, p_chi=np.inf)
    gy, gx = np.meshgrid(np.linspace(0, 1, 4), np.linspace(0, 1, 4), indexing="ij")
    mesh = LRMesh.tensor_patch((2, 2), 2, 2,
                               np.column_stack([gx.ravel(), gy.ravel(), np.zeros(16)]))
    cache = ElementQuadCache(mesh, params)
    kern = make_kernel(cache)
    X = mesh.control_points()
    x = X * 1.05 + 0.02 * rng.standard_normal(X.shape)
    phi = np.clip(0.3 + 0.7 * rng.random(mesh.n_funcs), 0, 1)
    H0 = np.zeros((cache.nel, 9))
    out = kern(x, phi, H0, 0.0, (0.0, 0.0), True)
    h = 1e-6
    worst = 0.0
    for e in range(cache.nel):
        for m in range(int(cache.nf[e])):
            gi = cache.fidx[e, m]
            for c in range(3):
                xp = x.copy(); xp[gi, c] += h
                xm = x.copy(); xm[gi, c] -= h
                rp = kern(xp, phi, H0, 0.0, (0.0, 0.0), False)
                rm = kern(xm, phi, H0, 0.0, (0.0, 0.0), False)
                fd = (rp["fint"][e] - rm["fint"][e]) / (2 * h)
                worst = max(worst, np.abs(out["Kx"][e][:, 3 * m + c] - fd).max())
    return worst / np.abs(out["Kx"]).max() < 1e-5


def _cmd_profile(args) -> int:
    from .config import load_config
    from .runner import run_transient
    from .scenarios import build_scenario
    from .assembly.backend import BACKEND

    cfg = load_config(args.config)
    print(f"backend: {BACKEND}")
    t0 = time.perf_counter()
    scenario = build_scenario(cfg)
    t_build = time.perf_counter() - t0
    print(f"scenario build: {t_build:.2f} s "
          f"({scenario.mesh.n_funcs} control points, "
          f"{len(scenario.mesh.elements)} elements)")
    t0 = time.perf_counter()
    res = run_transient(scenario, t_end=1e9, max_steps=args.max_steps)
    t_run = time.perf_counter() - t0
    n_acc = sum(1 for r in res.log.records if r.get("event") == "accepted")
    print(f"{n_acc} steps: {t_run:.2f} s = {1000 * t_run / max(n_acc, 1):.0f} ms/step")
    return 0


if __name__ == "__main__":
    sys.exit(main())
