"""Constitutive laws with phase-field coupling.

Membrane response is a Neo-Hookean surface material (dilatational +
deviatoric), bending is a Koiter model quadratic in the relative curvature.
The crack-driving energy split branches on the surface stretch J for the
membrane part and on the layer stretch J~(xi) for the bending part; the
latter is integrated through the thickness with Gaussian quadrature and the
tension/compression jump smoothed by a sigmoid.

Stress/moment components are returned in the reference configuration
(tau = J sigma, M0 = J M); contravariant 2x2 tensors are stored in Voigt
order [11, 22, 12] as plain tensor samples (no engineering factors); the
doubled off-diagonal weight of symmetric contractions is applied by the
consumer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import DeformationMeasures, SurfaceState, compute_layer_stretch, mixed_curvature


@dataclass
class MaterialParams:
    """Material constants in normalized units (see scenarios)."""

    K: float                  # 2D bulk modulus
    G: float                  # 2D shear modulus
    c: float                  # bending modulus
    Gc: float                 # fracture toughness
    l0: float                 # phase-field length scale
    T: float                  # shell thickness
    rho: float                # surface density
    s: float = 1e-4           # degradation slope at phi = 1
    p_chi: float = 250.0      # jump regularization (inf = exact jump)
    n_thick: int = 4          # Gauss points through the thickness

    def __post_init__(self):
        if min(self.K, self.G, self.c, self.Gc, self.l0, self.T, self.rho) <= 0:
            raise ValueError("material constants must be positive")
        if not (0 < self.s < 1):
            raise ValueError("degradation slope s must lie in (0, 1)")
        if self.p_chi <= 0:
            raise ValueError("p_chi must be positive")
        if self.n_thick < 2:
            raise ValueError("need at least 2 thickness quadrature points")

    def thickness_rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Gauss points and weights on [-T/2, T/2]."""
        xg, wg = np.polynomial.legendre.leggauss(self.n_thick)
        return 0.5 * self.T * xg, 0.5 * self.T * wg

    @classmethod
    def from_engineering(cls, E: float, nu: float, **kw) -> "MaterialParams":
        """Build from stiffness E and Poisson ratio nu (K, G conversion)."""
        K = E * nu / ((1 + nu) * (1 - 2 * nu))
        G = E / (2 * (1 + nu))
        return cls(K=K, G=G, **kw)


@dataclass
class StressMomentState:
    """Split membrane stresses and bending moments at one quadrature point.

    Voigt components [11, 22, 12], reference configuration.
    """

    tau_plus: np.ndarray
    tau_minus: np.ndarray
    M0_plus: np.ndarray
    M0_minus: np.ndarray
    psi_el_plus: float
    psi_el_minus: float
    s_plus: float = 1.0      # thickness-integral tension fraction, in [0, 1]


def degradation(phi: float, s: float = 1e-4):
    """Cubic degradation g(phi) = (3-s) phi^2 - (2-s) phi^3 and derivatives."""
    g = (3.0 - s) * phi**2 - (2.0 - s) * phi**3
    dg = 2.0 * (3.0 - s) * phi - 3.0 * (2.0 - s) * phi**2
    ddg = 2.0 * (3.0 - s) - 6.0 * (2.0 - s) * phi
    return g, dg, ddg


def smoothed_jump(J_tilde, p_chi: float):
    """Sigmoid regularization of the tension indicator chi(J~ >= 1).

    p_chi = inf gives the exact jump (0 below 1, 1 above, 0.5 at 1).
    Exponent overflow saturates to {0, 1}.
    """
    J_tilde = np.asarray(J_tilde, dtype=float)
    if np.isinf(p_chi):
        out = np.where(J_tilde > 1.0, 1.0, np.where(J_tilde < 1.0, 0.0, 0.5))
        return out if out.ndim else float(out)
    z = np.clip(-p_chi * (J_tilde - 1.0), -700.0, 700.0)
    out = 1.0 / (1.0 + np.exp(z))
    return out if out.ndim else float(out)


def update_history(H_old, psi_el_plus):
    """Monotone history field update H = max(H_old, psi+)."""
    return np.maximum(H_old, psi_el_plus)


# ----------------------------------------------------------------------
# membrane
# ----------------------------------------------------------------------
def membrane_energies(meas: DeformationMeasures, params: MaterialParams):
    """(psi_dil, psi_dev) of the Neo-Hookean surface model."""
    J, I1 = meas.J, meas.I1
    psi_dil = params.K / 4.0 * (J * J - 1.0 - 2.0 * np.log(J))
    psi_dev = params.G / 2.0 * (I1 / J - 2.0)
    return psi_dil, psi_dev


def membrane_stress_split(meas: DeformationMeasures, ref: SurfaceState,
                          cur: SurfaceState, params: MaterialParams):
    """Dilatational/deviatoric stresses and their tension/compression split.

    Returns (tau_dil, tau_dev, tau_plus, tau_minus) in Voigt order, reference
    configuration.  The split branches on J: compression moves the
    dilatational part into the minus (non-cracking) stress.  The branch uses
    the same smoothed jump as the thickness split (exact at p_chi = inf;
    tau_dil vanishes at J = 1, so the smoothing changes stresses only at
    noise level while keeping the Newton tangent continuous across crack
    faces that oscillate about J = 1).
    """
    J, I1 = meas.J, meas.I1
    a_up = _voigt(cur.a_inv)
    A_up = _voigt(ref.a_inv)
    tau_dil = 0.5 * params.K * (J * J - 1.0) * a_up
    tau_dev = 0.5 * params.G / J * (2.0 * A_up - I1 * a_up)
    chi = smoothed_jump(J, params.p_chi)
    return tau_dil, tau_dev, tau_dev + chi * tau_dil, (1.0 - chi) * tau_dil


# ----------------------------------------------------------------------
# bending (thickness integration)
# ----------------------------------------------------------------------
def tension_fraction(ref: SurfaceState, cur: SurfaceState,
                     params: MaterialParams) -> float:
    """Thickness-quadrature tension weight S+ = (12/T^3) sum w xi^2 chi(J~).

    S+ is 1 when the whole thickness is in tension (J~ >= 1 everywhere) and 0
    in full compression; the xi^2-weighted rule integrates the quadratic
    moment kernel exactly for n_thick >= 2.
    """
    xg, wg = params.thickness_rule()
    Jt = np.array([compute_layer_stretch(ref, cur, x) for x in xg])
    chi = smoothed_jump(Jt, params.p_chi)
    return float(12.0 / params.T**3 * np.sum(wg * xg**2 * chi))


def bending_moment_split(ref: SurfaceState, cur: SurfaceState,
                         params: MaterialParams):
    """Split Koiter moments M0+- and bending energies via thickness quadrature.

    Returns (M0_plus, M0_minus, psi_bend_plus, psi_bend_minus) with moments in
    Voigt order.  The unsplit moment is c (b0^ab - B0^ab) with indices raised
    by the reference metric.
    """
    s_plus = tension_fraction(ref, cur, params)
    K_lo = cur.b_ab - ref.b_ab
    K_up = ref.a_inv @ K_lo @ ref.a_inv
    M_full = params.c * _voigt(K_up)
    trK2 = float(np.einsum("ab,ab->", K_lo, K_up))
    psi = 0.5 * params.c * trK2
    return M_full * s_plus, M_full * (1.0 - s_plus), psi * s_plus, psi * (1.0 - s_plus)


def elastic_energy_split(meas: DeformationMeasures, ref: SurfaceState,
                         cur: SurfaceState, params: MaterialParams):
    """Total split (psi_el_plus, psi_el_minus) = membrane + bending parts."""
    psi_dil, psi_dev = membrane_energies(meas, params)
    chi = smoothed_jump(meas.J, params.p_chi)
    mem_p = psi_dev + chi * psi_dil
    mem_m = (1.0 - chi) * psi_dil
    _, _, bend_p, bend_m = bending_moment_split(ref, cur, params)
    return mem_p + bend_p, mem_m + bend_m


def stress_moment_state(meas: DeformationMeasures, ref: SurfaceState,
                        cur: SurfaceState, params: MaterialParams) -> StressMomentState:
    """All split stresses, moments and energies at one quadrature point."""
    _, _, tau_p, tau_m = membrane_stress_split(meas, ref, cur, params)
    M_p, M_m, bend_p, bend_m = bending_moment_split(ref, cur, params)
    psi_dil, psi_dev = membrane_energies(meas, params)
    chi = smoothed_jump(meas.J, params.p_chi)
    mem_p = psi_dev + chi * psi_dil
    mem_m = (1.0 - chi) * psi_dil
    s_plus = tension_fraction(ref, cur, params)
    return StressMomentState(tau_p, tau_m, M_p, M_m,
                             mem_p + bend_p, mem_m + bend_m, s_plus)


# ----------------------------------------------------------------------
# tangents
# ----------------------------------------------------------------------
def material_tangents(meas: DeformationMeasures, ref: SurfaceState,
                      cur: SurfaceState, params: MaterialParams):
    """Material tangents c = 2 dtau/da and f = dM0/db, split into +- parts.

    Returned as Voigt 3x3 matrices (c_plus, c_minus, f_plus, f_minus); the
    out-of-plane coupling tangents vanish for this constitution.  The jump
    weight chi is held fixed under differentiation.
    """
    J, I1 = meas.J, meas.I1
    a_up = _voigt(cur.a_inv)
    A_up = _voigt(ref.a_inv)
    aa = np.outer(a_up, a_up)
    a4 = _metric_derivative(cur.a_inv)
    c_dil = params.K * (J * J * aa + (J * J - 1.0) * a4)
    c_dev = params.G / J * (0.5 * I1 * aa - I1 * a4
                            - np.outer(a_up, A_up) - np.outer(A_up, a_up))
    chi = smoothed_jump(J, params.p_chi)
    c_plus = c_dev + chi * c_dil
    c_minus = (1.0 - chi) * c_dil
    s_plus = tension_fraction(ref, cur, params)
    f_full = params.c * _raise_identity(ref.a_inv)
    return c_plus, c_minus, f_full * s_plus, f_full * (1.0 - s_plus)


def _voigt(t: np.ndarray) -> np.ndarray:
    return np.array([t[0, 0], t[1, 1], 0.5 * (t[0, 1] + t[1, 0])])


def _metric_derivative(a_inv: np.ndarray) -> np.ndarray:
    """Voigt samples of a^{abgd} = -1/2 (a^{ag} a^{bd} + a^{ad} a^{bg}).

    Plain tensor components at (11, 22, 12) x (11, 22, 12); off-diagonal
    contraction weights are the consumer's responsibility.
    """
    idx = ((0, 0), (1, 1), (0, 1))
    M = np.empty((3, 3))
    for I, (al, be) in enumerate(idx):
        for Jc, (ga, de) in enumerate(idx):
            M[I, Jc] = -0.5 * (a_inv[al, ga] * a_inv[be, de]
                               + a_inv[al, de] * a_inv[be, ga])
    return M


def _raise_identity(A_inv: np.ndarray) -> np.ndarray:
    """Voigt samples of sym(A^{ag} A^{bd}), the Koiter bending kernel."""
    idx = ((0, 0), (1, 1), (0, 1))
    M = np.empty((3, 3))
    for I, (al, be) in enumerate(idx):
        for Jc, (ga, de) in enumerate(idx):
            M[I, Jc] = 0.5 * (A_inv[al, ga] * A_inv[be, de]
                              + A_inv[al, de] * A_inv[be, ga])
    return M
