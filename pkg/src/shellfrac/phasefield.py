"""Fourth-order phase-field fracture operators on the reference surface.

The element operators work with the scalar basis row N, its parametric
gradients and the surface Laplacian row
Delta_S N = A^{ab} (N_{,ab} - Gamma^g_{ab} N_{,g}) built from reference
(undeformed) geometry.  The residual of the phase equation is

    fbar_e = kbar0_e phi_e + fbar_el(phi, H) - fbar_0,

with the stiffness-like part kbar0 independent of both phi and x, which the
assembly exploits by caching it per mesh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SurfaceState
from .material import MaterialParams, degradation


@dataclass
class PhaseFieldOperators:
    """Scalar-basis rows at one quadrature point of the reference surface."""

    N: np.ndarray          # (n,)
    dN: np.ndarray         # (2, n) parametric gradients
    lap: np.ndarray        # (n,) surface-Laplacian row

    @classmethod
    def from_reference(cls, N, dN, ddN, ref: SurfaceState) -> "PhaseFieldOperators":
        lap = laplacian_row(dN, ddN, ref.a_inv, ref.gamma)
        return cls(np.asarray(N), np.asarray(dN), lap)


def laplacian_row(dN: np.ndarray, ddN: np.ndarray, A_inv: np.ndarray,
                  gamma: np.ndarray) -> np.ndarray:
    """Surface-Laplacian row A^{ab} (N_{,ab} - Gamma^g_{ab} N_{,g})."""
    cov = np.array([
        ddN[0] - gamma[0, 0, 0] * dN[0] - gamma[1, 0, 0] * dN[1],
        ddN[1] - gamma[0, 0, 1] * dN[0] - gamma[1, 0, 1] * dN[1],
        ddN[2] - gamma[0, 1, 1] * dN[0] - gamma[1, 1, 1] * dN[1],
    ])
    return (A_inv[0, 0] * cov[0] + 2.0 * A_inv[0, 1] * cov[1]
            + A_inv[1, 1] * cov[2])


def fracture_energy_density(phi: float, grad_phi: np.ndarray, lap_phi: float,
                            A_inv: np.ndarray, params: MaterialParams) -> float:
    """Crack density  Gc/(4 l0) [(phi-1)^2 + 2 l0^2 |grad phi|^2 + l0^4 (lap phi)^2].

    `grad_phi` holds the parametric derivatives phi_{,a}; the squared surface
    gradient is phi_{,a} A^{ab} phi_{,b}.
    """
    g2 = float(grad_phi @ A_inv @ grad_phi)
    l0 = params.l0
    return params.Gc / (4.0 * l0) * ((phi - 1.0)**2 + 2.0 * l0**2 * g2
                                     + l0**4 * lap_phi**2)


def phase_stiffness_qp(ops: PhaseFieldOperators, A_inv: np.ndarray,
                       params: MaterialParams) -> np.ndarray:
    """One quadrature point's contribution to kbar0 (without the area weight)."""
    l0 = params.l0
    grad = ops.dN.T @ A_inv @ ops.dN
    return (np.outer(ops.N, ops.N) + 2.0 * l0**2 * grad
            + l0**4 * np.outer(ops.lap, ops.lap))


def phase_residual_element(ops_qp, weights, phi_e: np.ndarray, H_qp,
                           params: MaterialParams, A_inv_qp) -> np.ndarray:
    """Elemental residual fbar_e = kbar0 phi_e + fbar_el - fbar_0.

    ops_qp/weights/A_inv_qp are per-quadrature-point sequences; H_qp holds the
    (already updated) history values.
    """
    n = len(phi_e)
    r = np.zeros(n)
    scale = 2.0 * params.l0 / params.Gc
    for ops, w, H, A_inv in zip(ops_qp, weights, H_qp, A_inv_qp):
        k0 = phase_stiffness_qp(ops, A_inv, params)
        phi = float(ops.N @ phi_e)
        _, dg, _ = degradation(phi, params.s)
        r += w * (k0 @ phi_e + ops.N * (scale * dg * H) - ops.N)
    return r


def phase_tangent_element(ops_qp, weights, phi_e: np.ndarray, H_qp,
                          params: MaterialParams, A_inv_qp) -> np.ndarray:
    """Elemental phase tangent kbar0 + int N^T (2 l0/Gc) g''(phi) H N dA."""
    n = len(phi_e)
    K = np.zeros((n, n))
    scale = 2.0 * params.l0 / params.Gc
    for ops, w, H, A_inv in zip(ops_qp, weights, H_qp, A_inv_qp):
        k0 = phase_stiffness_qp(ops, A_inv, params)
        phi = float(ops.N @ phi_e)
        _, _, ddg = degradation(phi, params.s)
        K += w * (k0 + scale * ddg * H * np.outer(ops.N, ops.N))
    return K


def phase_cross_rows_qp(tau_plus_voigt: np.ndarray, M0_plus_voigt: np.ndarray,
                        cur: SurfaceState, dN: np.ndarray,
                        ddN: np.ndarray) -> np.ndarray:
    """Row vector d(psi_el+)/dx over the element's displacement dofs.

    d_x psi+ = tau+^{ab} a_a . N_{,b} + M0+^{ab} n . N_{;ab}; returns a
    (3 n,) array ordered node-major [x, y, z].
    """
    n = dN.shape[1]
    scov = np.array([
        ddN[0] - cur.gamma[0, 0, 0] * dN[0] - cur.gamma[1, 0, 0] * dN[1],
        ddN[1] - cur.gamma[0, 0, 1] * dN[0] - cur.gamma[1, 0, 1] * dN[1],
        ddN[2] - cur.gamma[0, 1, 1] * dN[0] - cur.gamma[1, 1, 1] * dN[1],
    ])
    t = tau_plus_voigt
    m = M0_plus_voigt
    row = np.zeros((n, 3))
    # membrane: tau^{ab} a_b (dN_a)  (tau symmetric)
    vec = (t[0] * np.outer(dN[0], cur.a_alpha[0])
           + t[1] * np.outer(dN[1], cur.a_alpha[1])
           + t[2] * (np.outer(dN[0], cur.a_alpha[1])
                     + np.outer(dN[1], cur.a_alpha[0])))
    row += vec
    # bending: M^{ab} n Scov_ab
    srow = m[0] * scov[0] + m[1] * scov[2] + 2.0 * m[2] * scov[1]
    row += np.outer(srow, cur.n)
    return row.reshape(-1)
