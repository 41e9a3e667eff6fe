"""Benchmark: compiled element kernel vs the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--nel-target N]
"""

import argparse
import time

import numpy as np

from shellfrac.assembly.backend import BACKEND, make_kernel
from shellfrac.assembly.cache import ElementQuadCache
from shellfrac.lrmesh import LRMesh, refine_structured
from shellfrac.material import MaterialParams


def build_mesh(n_el_target: int):
    n = max(4, int(np.sqrt(n_el_target) / 1.3))
    p = 2
    knots = np.concatenate([np.zeros(p), np.linspace(0, 1, n + 1), np.ones(p)])
    g = np.array([knots[i + 1:i + p + 1].mean() for i in range(n + p)])
    gy, gx = np.meshgrid(g, g, indexing="ij")
    mesh = LRMesh.tensor_patch((p, p), n, n,
                               np.column_stack([gx.ravel(), gy.ravel(),
                                                np.zeros((n + p) ** 2)]))
    picks = [mesh.n_funcs // 3, mesh.n_funcs // 2]
    return refine_structured(mesh, picks, 2).mesh


def bench(kernel, x, phi, H, want_tangent, reps):
    kernel(x, phi, H, 0.0, (0.0, 0.0), want_tangent)     # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        kernel(x, phi, H, 0.0, (0.0, 0.0), want_tangent)
    return (time.perf_counter() - t0) / reps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nel-target", type=int, default=800)
    args = ap.parse_args()

    params = MaterialParams(K=27.78, G=41.67, c=0.1, Gc=1e-3, l0=0.02,
                            T=0.0125, rho=1.0)
    mesh = build_mesh(args.nel_target)
    cache = ElementQuadCache(mesh, params)
    print(f"mesh: {cache.nel} elements, {mesh.n_funcs} control points, "
          f"max {cache.nmax} functions/element")
    print(f"default backend: {BACKEND}")

    rng = np.random.default_rng(0)
    X = mesh.control_points()
    states = {
        "flat (membrane fast path)": X * 1.03,
        "bent (full bending path)": X + np.column_stack(
            [np.zeros(len(X)), np.zeros(len(X)), 0.08 * np.sin(3 * X[:, 0])]),
    }
    phi = np.clip(0.3 + 0.7 * rng.random(mesh.n_funcs), 0, 1)
    H = 0.1 * rng.random((cache.nel, 9))

    backends = ["python"]
    if BACKEND == "cython":
        backends.append("cython")
    results = {}
    for name, x in states.items():
        for be in backends:
            kern = make_kernel(cache, be)
            for tang, label in ((True, "tangent"), (False, "residual")):
                reps = 3 if be == "python" else 20
                dt = bench(kern, x, phi, H, tang, reps)
                results[(name, be, label)] = dt
                print(f"{name:28s} {be:7s} {label:9s} {1000 * dt:9.2f} ms/call")
    if "cython" in backends:
        for name in states:
            sp = results[(name, "python", "tangent")] / results[(name, "cython", "tangent")]
            print(f"speedup ({name}, tangent): {sp:.1f}x")


if __name__ == "__main__":
    main()
