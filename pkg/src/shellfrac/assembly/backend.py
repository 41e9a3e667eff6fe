"""Kernel backend selection: compiled extension if available, numpy fallback.

Set SHELLFRAC_BACKEND=python or =cython to force a choice; by default the
compiled kernel is used when the extension imports.
"""

from __future__ import annotations

import os

import numpy as np

from . import pykernel
from .cache import ElementQuadCache

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_FORCED = os.environ.get("SHELLFRAC_BACKEND", "").strip().lower()
if _FORCED == "python":
    _compiled = None
elif _FORCED == "cython" and _compiled is None:
    raise ImportError("SHELLFRAC_BACKEND=cython but the extension is not built")

BACKEND = "cython" if _compiled is not None else "python"


def make_kernel(cache: ElementQuadCache, backend: str | None = None):
    """Bind a kernel callable (x, phi, H_old, pbar, fbody, want_tangent) -> dict."""
    use = backend or BACKEND
    if use == "python":
        def kernel(x, phi, H_old, pbar=0.0, fbody=(0.0, 0.0), want_tangent=True):
            return pykernel.element_kernel(cache, x, phi, H_old, pbar=pbar,
                                           fbody=fbody, want_tangent=want_tangent)
        return kernel
    if use != "cython" or _compiled is None:
        raise ValueError(f"unknown or unavailable backend {use!r}")

    p = cache.params
    xg_t, wg_t = p.thickness_rule()
    mat = np.array([p.K, p.G, p.c, p.Gc, p.l0, p.T, p.s,
                    p.p_chi if np.isfinite(p.p_chi) else -1.0])

    def kernel(x, phi, H_old, pbar=0.0, fbody=(0.0, 0.0), want_tangent=True):
        if fbody[0] != 0.0 or fbody[1] != 0.0:
            # the body-force term is not compiled; scenarios never use it
            return pykernel.element_kernel(cache, x, phi, H_old, pbar=pbar,
                                           fbody=fbody, want_tangent=want_tangent)
        nel, nmax, nd = cache.nel, cache.nmax, 3 * cache.nmax
        out = {
            "fint": np.zeros((nel, nd)),
            "fbar_el": np.zeros((nel, nmax)),
            "H": np.empty((nel, 9)),
            "psi_plus": np.empty((nel, 9)),
            "psi_minus": np.empty((nel, 9)),
            "J": np.empty((nel, 9)),
        }
        if want_tangent:
            out.update(Kx=np.zeros((nel, nd, nd)), Kphi=np.zeros((nel, nd, nmax)),
                       Kbx=np.zeros((nel, nmax, nd)), Kbphi=np.zeros((nel, nmax, nmax)))
        else:
            z3 = np.zeros((1, 1, 1))
            out.update(Kx=z3, Kphi=z3, Kbx=z3, Kbphi=z3)
        _compiled.element_kernel(
            np.ascontiguousarray(x), np.ascontiguousarray(phi),
            np.ascontiguousarray(H_old),
            cache.fidx, cache.nf, cache.N, cache.dN, cache.ddN,
            cache.dA, cache.wparam, cache.Ainv, cache.detA,
            cache.B_ab, cache.trBm, cache.detBm,
            mat, xg_t, wg_t, float(pbar),
            float(fbody[0]), float(fbody[1]),
            1 if want_tangent else 0,
            out["fint"], out["fbar_el"], out["H"],
            out["psi_plus"], out["psi_minus"], out["J"],
            out["Kx"], out["Kphi"], out["Kbx"], out["Kbphi"],
        )
        if not want_tangent:
            for k in ("Kx", "Kphi", "Kbx", "Kbphi"):
                del out[k]
        return out

    return kernel
