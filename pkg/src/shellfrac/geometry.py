"""Curvilinear surface geometry and kinematics on the shell mid-plane.

All quantities follow the convected-coordinate convention: covariant tangents
a_alpha, metric a_ab, contravariant metric, unit normal, curvature tensor
b_ab = a_{alpha,beta} . n, and Christoffel symbols of the second kind.  The
functions are pure and operate on one parametric point; batched versions used
by the assembly live in the kernel backends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularGeometryError, SingularLayerError


@dataclass
class SurfaceState:
    """Geometric state of the mid-plane at one parametric point."""

    a_alpha: np.ndarray      # (2, 3) covariant tangents
    a_ab: np.ndarray         # (2, 2) covariant metric
    a_inv: np.ndarray        # (2, 2) contravariant metric
    n: np.ndarray            # (3,) unit normal
    b_ab: np.ndarray         # (2, 2) curvature tensor components
    gamma: np.ndarray        # (2, 2, 2) Christoffel symbols, gamma[g, a, b]
    h_ab: np.ndarray         # (2, 2, 3) second parametric derivatives a_{alpha,beta}
    det_a: float             # det of the covariant metric

    @property
    def jacobian(self) -> float:
        """Area element sqrt(det a), per unit parametric area."""
        return float(np.sqrt(self.det_a))


@dataclass
class DeformationMeasures:
    """Invariants relating a current state to its reference state."""

    I1: float
    J: float
    K_rel: np.ndarray        # (2, 2) relative curvature b_ab - B_ab


def compute_surface_state(N_d1: np.ndarray, N_d2: np.ndarray,
                          control_xyz: np.ndarray,
                          element_id: int | None = None,
                          det_floor: float = 1e-14) -> SurfaceState:
    """Build the surface state from basis derivatives and control positions.

    Parameters
    ----------
    N_d1 : (2, n) first parametric derivatives of the basis
    N_d2 : (3, n) second derivatives, rows ordered [uu, uv, vv]
    control_xyz : (n, 3) control positions
    det_floor : threshold on det(a) relative to the squared tangent scale,
        below which the metric is declared degenerate.
    """
    a = N_d1 @ control_xyz                       # (2, 3)
    h = N_d2 @ control_xyz                       # (3, 3): uu, uv, vv
    a_ab = a @ a.T
    det = a_ab[0, 0] * a_ab[1, 1] - a_ab[0, 1] * a_ab[1, 0]
    scale = max(a_ab[0, 0] * a_ab[1, 1], 1e-300)
    if det <= det_floor * scale:
        raise SingularGeometryError(
            f"degenerate surface metric (det={det:.3e})", element_id)
    a_inv = np.array([[a_ab[1, 1], -a_ab[0, 1]], [-a_ab[1, 0], a_ab[0, 0]]]) / det
    cr = np.cross(a[0], a[1])
    n = cr / np.linalg.norm(cr)
    h_ab = np.array([[h[0], h[1]], [h[1], h[2]]])   # (2, 2, 3)
    b_ab = h_ab @ n
    a_up = a_inv @ a                                # contravariant tangents (2, 3)
    gamma = np.einsum("abk,gk->gab", h_ab, a_up)
    return SurfaceState(a, a_ab, a_inv, n, b_ab, gamma, h_ab, float(det))


def compute_deformation(ref: SurfaceState, cur: SurfaceState) -> DeformationMeasures:
    """Surface invariants I1, J and the relative curvature tensor."""
    I1 = float(np.einsum("ab,ab->", ref.a_inv, cur.a_ab))
    J = float(np.sqrt(cur.det_a / ref.det_a))
    return DeformationMeasures(I1, J, cur.b_ab - ref.b_ab)


def mixed_curvature(state: SurfaceState) -> np.ndarray:
    """Mixed components b^beta_alpha = a^{beta gamma} b_{gamma alpha}."""
    return state.a_inv @ state.b_ab


def compute_layer_stretch(ref: SurfaceState, cur: SurfaceState, xi: float,
                          thickness: float | None = None) -> float:
    """Area stretch of the shell layer offset xi from the mid-plane.

    Kirchhoff-Love layer tangents are a~_alpha = (delta - xi b)^beta_alpha
    a_beta, so the layer area element scales with det(I - xi [b_mixed]) and

        J~(xi) = J * det(I - xi b_mixed) / det(I - xi B_mixed).
    """
    if thickness is not None and abs(xi) > thickness / 2 + 1e-15:
        raise ValueError(f"|xi|={abs(xi)} outside the shell thickness")
    qc = _layer_det(mixed_curvature(cur), xi)
    qr = _layer_det(mixed_curvature(ref), xi)
    if qc <= 0.0 or qr <= 0.0:
        raise SingularLayerError(
            f"layer metric degenerate at xi={xi} (det factors {qc:.3e}, {qr:.3e})")
    J = np.sqrt(cur.det_a / ref.det_a)
    return float(J * qc / qr)


def _layer_det(b_mixed: np.ndarray, xi: float) -> float:
    tr = b_mixed[0, 0] + b_mixed[1, 1]
    det = b_mixed[0, 0] * b_mixed[1, 1] - b_mixed[0, 1] * b_mixed[1, 0]
    return 1.0 - xi * tr + xi * xi * det
