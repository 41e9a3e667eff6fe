"""Per-element views of the batched kernels.

The transient driver always evaluates whole-mesh batches; these wrappers
expose single-element force vectors and tangent blocks with the same
conventions (node-major displacement dofs, Voigt stresses), which keeps
element-level behavior directly testable.
"""

from __future__ import annotations

import numpy as np

from .backend import make_kernel
from .cache import ElementQuadCache


def mech_force_element(cache: ElementQuadCache, e: int, x: np.ndarray,
                       acc: np.ndarray, phi: np.ndarray, H_old: np.ndarray,
                       pbar: float = 0.0, fbody=(0.0, 0.0)) -> np.ndarray:
    """f^e = f_kin + f_int - f_ext for element e (length 3*n_e)."""
    out = make_kernel(cache)(x, phi, H_old, pbar, fbody, False)
    nf = int(cache.nf[e])
    f = out["fint"][e][:3 * nf].copy()
    acc_e = acc[cache.fidx[e, :nf]].reshape(-1)
    m = np.kron(cache.mass_e[e][:nf, :nf], np.eye(3))
    return f + m @ acc_e


def mech_tangent_blocks(cache: ElementQuadCache, e: int, x: np.ndarray,
                        phi: np.ndarray, H_old: np.ndarray,
                        alpha_f: float = 1.0, mass_coeff: float = 0.0,
                        pbar: float = 0.0, fbody=(0.0, 0.0)):
    """(K_x, K_phi) blocks of element e with generalized-alpha weights."""
    out = make_kernel(cache)(x, phi, H_old, pbar, fbody, True)
    nf = int(cache.nf[e])
    Kx = alpha_f * out["Kx"][e][:3 * nf, :3 * nf]
    if mass_coeff != 0.0:
        Kx = Kx + mass_coeff * np.kron(cache.mass_e[e][:nf, :nf], np.eye(3))
    return Kx, out["Kphi"][e][:3 * nf, :nf]


def phase_blocks_element(cache: ElementQuadCache, e: int, x: np.ndarray,
                         phi: np.ndarray, H_old: np.ndarray,
                         alpha_f: float = 1.0):
    """(fbar^e, Kbar_x^e, Kbar_phi^e) of the phase equation for element e.

    fbar includes the cached linear part kbar0 phi - fbar0; the cross block
    carries the active-branch factor and the alpha_f weight.
    """
    out = make_kernel(cache)(x, phi, H_old, 0.0, (0.0, 0.0), True)
    nf = int(cache.nf[e])
    phi_e = phi[cache.fidx[e, :nf]]
    fbar = (cache.kbar0_e[e][:nf, :nf] @ phi_e + out["fbar_el"][e][:nf]
            - cache.fbar0_e[e][:nf])
    Kbx = alpha_f * out["Kbx"][e][:nf, :3 * nf]
    Kbphi = cache.kbar0_e[e][:nf, :nf] + out["Kbphi"][e][:nf, :nf]
    return fbar, Kbx, Kbphi
