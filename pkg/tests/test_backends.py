"""Compiled kernel vs numpy fallback: identical blocks on identical inputs."""

import numpy as np
import pytest

from shellfrac.assembly.backend import BACKEND, make_kernel
from shellfrac.assembly.cache import ElementQuadCache
from shellfrac.lrmesh import LRMesh, refine_structured
from shellfrac.material import MaterialParams

needs_ext = pytest.mark.skipif(BACKEND != "cython",
                               reason="compiled extension not built")

RNG = np.random.default_rng(99)


def mixed_mesh():
    p = 2
    knots = np.concatenate([np.zeros(p), np.linspace(0, 1, 5), np.ones(p)])
    g = np.array([knots[i + 1:i + p + 1].mean() for i in range(4 + p)])
    gy, gx = np.meshgrid(g, g, indexing="ij")
    mesh = LRMesh.tensor_patch((p, p), 4, 4,
                               np.column_stack([gx.ravel(), gy.ravel(),
                                                np.zeros(36)]))
    return refine_structured(mesh, [14, 21], 2).mesh


@needs_ext
@pytest.mark.parametrize("p_chi", [250.0, np.inf])
@pytest.mark.parametrize("compress", [False, True])
def test_backend_parity(p_chi, compress):
    params = MaterialParams(K=27.78, G=41.67, c=0.1, Gc=1e-3, l0=0.02,
                            T=0.0125, rho=1.0, p_chi=p_chi)
    mesh = mixed_mesh()
    cache = ElementQuadCache(mesh, params)
    X = mesh.control_points()
    x = X * (0.93 if compress else 1.07) + 0.02 * RNG.standard_normal(X.shape)
    x[:, 2] += 0.05 * np.sin(3 * X[:, 0])      # out-of-plane: full code path
    phi = np.clip(0.1 + 0.9 * RNG.random(mesh.n_funcs), 0, 1)
    H0 = 0.5 * RNG.random((cache.nel, 9))
    kp = make_kernel(cache, "python")
    kc = make_kernel(cache, "cython")
    rp = kp(x, phi, H0, -0.12, (0.0, 0.0), True)
    rc = kc(x, phi, H0, -0.12, (0.0, 0.0), True)
    assert set(rp) == set(rc)
    for key in rp:
        scale = max(np.abs(rp[key]).max(), 1e-30)
        assert np.abs(rp[key] - rc[key]).max() / scale < 1e-10, key


@needs_ext
def test_backend_parity_residual_only():
    params = MaterialParams(K=10, G=5, c=0.1, Gc=1e-3, l0=0.02, T=0.0125, rho=1.0)
    mesh = mixed_mesh()
    cache = ElementQuadCache(mesh, params)
    x = mesh.control_points() * 1.02
    phi = np.ones(mesh.n_funcs)
    H0 = np.zeros((cache.nel, 9))
    rp = make_kernel(cache, "python")(x, phi, H0, 0.0, (0.0, 0.0), False)
    rc = make_kernel(cache, "cython")(x, phi, H0, 0.0, (0.0, 0.0), False)
    for key in ("fint", "fbar_el", "H", "psi_plus", "psi_minus", "J"):
        scale = max(np.abs(rp[key]).max(), 1e-30)
        assert np.abs(rp[key] - rc[key]).max() / scale < 1e-10, key


@needs_ext
def test_body_force_routes_to_python_fallback():
    """The compiled kernel does not implement the body-force term; the
    backend must route such calls to the numpy kernel and agree with it."""
    params = MaterialParams(K=10, G=5, c=0.1, Gc=1e-3, l0=0.02, T=0.0125, rho=1.0)
    mesh = mixed_mesh()
    cache = ElementQuadCache(mesh, params)
    x = mesh.control_points() * 1.01
    phi = np.ones(mesh.n_funcs)
    H0 = np.zeros((cache.nel, 9))
    out_c = make_kernel(cache, "cython")(x, phi, H0, 0.0, (0.2, -0.1), True)
    out_p = make_kernel(cache, "python")(x, phi, H0, 0.0, (0.2, -0.1), True)
    for key in ("fint", "Kx"):
        scale = max(np.abs(out_p[key]).max(), 1e-30)
        assert np.abs(out_p[key] - out_c[key]).max() / scale < 1e-12
