"""Constitution: degradation, splits, thickness integration, tangents, history."""

import copy

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shellfrac.geometry import compute_deformation, compute_surface_state
from shellfrac.lrmesh import LRMesh
from shellfrac.material import (MaterialParams, bending_moment_split,
                                degradation, elastic_energy_split,
                                material_tangents, membrane_energies,
                                membrane_stress_split, smoothed_jump,
                                stress_moment_state, update_history)

RNG = np.random.default_rng(19)


def params(p_chi=np.inf, **kw):
    d = dict(K=27.78, G=41.67, c=0.1, Gc=1e-3, l0=0.02, T=0.0125, rho=1.0,
             p_chi=p_chi)
    d.update(kw)
    return MaterialParams(**d)


def greville_1d(n_el, p=2):
    knots = np.concatenate([np.zeros(p), np.linspace(0, 1, n_el + 1), np.ones(p)])
    return np.array([knots[i + 1:i + p + 1].mean() for i in range(n_el + p)])


def flat_patch():
    gy, gx = np.meshgrid(greville_1d(2), greville_1d(2), indexing="ij")
    return LRMesh.tensor_patch((2, 2), 2, 2,
                               np.column_stack([gx.ravel(), gy.ravel(), np.zeros(16)]))


def arc_patch(R=1.0):
    w = 1 / np.sqrt(2)
    arc = np.array([[R, 0], [R, R], [0, R]])
    cps = np.array([[a, b, z] for z in np.linspace(0, 1, 3) for a, b in arc])
    return LRMesh.tensor_patch((2, 2), 1, 1, cps, np.tile([1, w, 1], 3))


def random_state(curved=False, factor=1.1, noise=0.03, rng=RNG, uv=(0.37, 0.41)):
    m = arc_patch() if curved else flat_patch()
    X = m.control_points()
    e = m.find_element(*uv)
    ids, N, dN, ddN = m.evaluate_basis(e, uv)
    ref = compute_surface_state(dN, ddN, X[ids])
    x = X * factor + noise * rng.standard_normal(X.shape)
    cur = compute_surface_state(dN, ddN, x[ids])
    return ref, cur, compute_deformation(ref, cur)


# ----------------------------------------------------------------------
# degradation
# ----------------------------------------------------------------------
def test_degradation_anchor_values():
    s = 1e-4
    g, dg, _ = degradation(1.0, s)
    assert g == pytest.approx(1.0, abs=1e-14)          # (3-s) - (2-s) = 1
    assert dg == pytest.approx(s, abs=1e-14)           # g'(1) = s
    g0, dg0, _ = degradation(0.0, s)
    assert g0 == 0.0 and dg0 == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_degradation_monotone_on_unit_interval(a, b):
    lo, hi = min(a, b), max(a, b)
    g_lo, _, _ = degradation(lo, 1e-4)
    g_hi, _, _ = degradation(hi, 1e-4)
    assert g_hi >= g_lo - 1e-12


def test_degradation_derivatives_fd():
    for phi in (-0.1, 0.2, 0.7, 1.05):
        g, dg, ddg = degradation(phi, 1e-4)
        h = 1e-6
        gp, _, _ = degradation(phi + h, 1e-4)
        gm, _, _ = degradation(phi - h, 1e-4)
        assert (gp - gm) / (2 * h) == pytest.approx(dg, abs=1e-8)
        assert (gp - 2 * g + gm) / h ** 2 == pytest.approx(ddg, abs=1e-3)


# ----------------------------------------------------------------------
# smoothed jump
# ----------------------------------------------------------------------
def test_smoothed_jump_values():
    assert smoothed_jump(1.0, 250.0) == pytest.approx(0.5)
    assert smoothed_jump(100.0, 250.0) == pytest.approx(1.0)
    assert smoothed_jump(1e-3, 250.0) == pytest.approx(0.0, abs=1e-30)
    assert smoothed_jump(1.05, 250.0) == pytest.approx(1.0, abs=1e-5)
    # exact-jump mode
    assert smoothed_jump(1.0001, np.inf) == 1.0
    assert smoothed_jump(0.9999, np.inf) == 0.0
    assert smoothed_jump(1.0, np.inf) == 0.5
    # no overflow even for extreme arguments
    assert np.isfinite(smoothed_jump(-1e6, 250.0))


# ----------------------------------------------------------------------
# membrane split
# ----------------------------------------------------------------------
def test_stress_free_reference():
    ref, _, _ = random_state(noise=0.0, factor=1.0)
    meas = compute_deformation(ref, ref)
    t_dil, t_dev, tp, tm = membrane_stress_split(meas, ref, ref, params())
    assert np.allclose(t_dil, 0, atol=1e-12)
    assert np.allclose(t_dev, 0, atol=1e-12)
    assert np.allclose(tp, 0, atol=1e-12) and np.allclose(tm, 0, atol=1e-12)


def test_tension_branch_equibiaxial():
    ref, cur, meas = random_state(noise=0.0, factor=1.1)
    t_dil, t_dev, tp, tm = membrane_stress_split(meas, ref, cur, params())
    assert meas.J > 1
    assert np.allclose(tm, 0.0)
    assert np.allclose(tp, t_dil + t_dev, atol=1e-14)


def test_compression_branch_equibiaxial():
    ref, cur, meas = random_state(noise=0.0, factor=0.9)
    t_dil, t_dev, tp, tm = membrane_stress_split(meas, ref, cur, params())
    assert meas.J < 1
    assert np.allclose(tm, t_dil)
    assert np.allclose(tp, t_dev)
    assert np.abs(t_dil).max() > 0


def test_pure_shear_has_no_negative_energy():
    m = flat_patch()
    X = m.control_points()
    gam = 0.1
    x = X.copy()
    x[:, 0] += gam * X[:, 1]     # simple shear: J = 1
    uv = (0.4, 0.55)
    e = m.find_element(*uv)
    ids, N, dN, ddN = m.evaluate_basis(e, uv)
    ref = compute_surface_state(dN, ddN, X[ids])
    cur = compute_surface_state(dN, ddN, x[ids])
    meas = compute_deformation(ref, cur)
    assert meas.J == pytest.approx(1.0, abs=1e-12)
    pp, pm = elastic_energy_split(meas, ref, cur, params())
    assert pm == pytest.approx(0.0, abs=1e-14)
    assert pp > 0


# ----------------------------------------------------------------------
# bending split / thickness integration
# ----------------------------------------------------------------------
def analytic_koiter(ref, cur, c):
    K_lo = cur.b_ab - ref.b_ab
    K_up = ref.a_inv @ K_lo @ ref.a_inv
    return 0.5 * c * float(np.einsum("ab,ab->", K_lo, K_up))


def test_full_tension_bending_equals_analytic():
    # stretched and curved: J~ >= 1 through the thickness (exact jump)
    ref, cur, meas = random_state(curved=True, factor=1.15, noise=0.0)
    p = params(p_chi=np.inf)
    Mp, Mm, bp, bm = bending_moment_split(ref, cur, p)
    assert np.allclose(Mm, 0.0, atol=1e-14)
    assert bm == pytest.approx(0.0, abs=1e-12)
    assert bp == pytest.approx(analytic_koiter(ref, cur, p.c), abs=1e-10)


def test_flat_undeformed_moments_zero():
    ref, _, _ = random_state(noise=0.0, factor=1.0)
    Mp, Mm, bp, bm = bending_moment_split(ref, ref, params())
    assert np.allclose(Mp, 0) and np.allclose(Mm, 0)
    assert bp == 0 and bm == 0


def test_pure_bending_energy_sum_matches_analytic():
    """Unstretched mid-plane: quadrature plus+minus equals the Koiter energy
    exactly (the xi^2 integrand is integrated exactly by >= 2 Gauss points)."""
    R = 3.0
    m = arc_patch(R)
    uv = (0.3, 0.6)
    e = m.find_element(*uv)
    ids, N, dN, ddN = m.evaluate_basis(e, uv)
    cur = compute_surface_state(dN, ddN, m.control_points()[ids])
    ref = copy.deepcopy(cur)
    ref.b_ab = np.zeros((2, 2))
    for p_chi in (np.inf, 250.0):
        p = params(p_chi=p_chi)
        _, _, bp, bm = bending_moment_split(ref, cur, p)
        assert bp + bm == pytest.approx(analytic_koiter(ref, cur, p.c), abs=1e-10)
        assert 0 < bp < bp + bm      # bent plate has both zones


def test_split_consistency_random_states():
    for k in range(40):
        ref, cur, meas = random_state(curved=k % 2 == 1,
                                      factor=0.92 if k % 3 == 0 else 1.08)
        p = params(p_chi=250.0)
        sm = stress_moment_state(meas, ref, cur, p)
        # tau_+ + tau_- equals the unsplit stress
        t_dil, t_dev, _, _ = membrane_stress_split(meas, ref, cur, p)
        assert np.allclose(sm.tau_plus + sm.tau_minus, t_dil + t_dev, atol=1e-12)
        # M+ + M- equals the unsplit Koiter moment
        K_lo = cur.b_ab - ref.b_ab
        K_up = ref.a_inv @ K_lo @ ref.a_inv
        M_un = p.c * np.array([K_up[0, 0], K_up[1, 1], K_up[0, 1]])
        assert np.allclose(sm.M0_plus + sm.M0_minus, M_un, atol=1e-10)
        # psi+ + psi- equals the unsplit energy
        pdil, pdev = membrane_energies(meas, p)
        psi_full = pdil + pdev + analytic_koiter(ref, cur, p.c)
        assert sm.psi_el_plus + sm.psi_el_minus == pytest.approx(psi_full, abs=1e-10)


def test_stress_energy_consistency_fd():
    """tau = 2 dPsi/da and M0 = dPsi/db by finite differences."""
    for k in range(6):
        ref, cur, meas = random_state(curved=k % 2 == 1,
                                      factor=0.93 if k % 3 == 0 else 1.07)
        p = params(p_chi=np.inf)
        sm = stress_moment_state(meas, ref, cur, p)
        tau = sm.tau_plus + sm.tau_minus
        M0 = sm.M0_plus + sm.M0_minus

        def psi_of(a_ab, b_ab):
            c2 = copy.deepcopy(cur)
            c2.a_ab = a_ab
            det = a_ab[0, 0] * a_ab[1, 1] - a_ab[0, 1] * a_ab[1, 0]
            c2.det_a = det
            c2.a_inv = np.array([[a_ab[1, 1], -a_ab[0, 1]],
                                 [-a_ab[1, 0], a_ab[0, 0]]]) / det
            c2.b_ab = b_ab
            m2 = compute_deformation(ref, c2)
            pp, pm = elastic_energy_split(m2, ref, c2, p)
            return pp + pm

        h = 1e-7
        idx = ((0, 0), (1, 1), (0, 1))
        for J, (g, d) in enumerate(idx):
            da = np.zeros((2, 2))
            da[g, d] = h
            da[d, g] = h
            fd = (psi_of(cur.a_ab + da, cur.b_ab)
                  - psi_of(cur.a_ab - da, cur.b_ab)) / (2 * h)
            # dPsi = 0.5 tau : da, so a symmetric off-diagonal bump of h
            # contributes tau_12 h and a diagonal bump 0.5 tau_gg h
            expect = tau[J] * (0.5 if g == d else 1.0)
            assert fd == pytest.approx(expect, rel=2e-6, abs=1e-8)
            fdb = (psi_of(cur.a_ab, cur.b_ab + da)
                   - psi_of(cur.a_ab, cur.b_ab - da)) / (2 * h)
            expectb = M0[J] * (2.0 if g != d else 1.0)
            assert fdb == pytest.approx(expectb, rel=2e-6, abs=1e-10)


# ----------------------------------------------------------------------
# tangents
# ----------------------------------------------------------------------
def test_material_tangents_match_fd():
    for k in range(20):
        ref, cur, meas = random_state(curved=k % 2 == 1,
                                      factor=0.93 if k % 3 == 0 else 1.08,
                                      noise=0.02)
        p = params(p_chi=np.inf)
        cp, cm, fp, fm = material_tangents(meas, ref, cur, p)
        c_full, f_full = cp + cm, fp + fm

        def tau_of(a_ab):
            c2 = copy.deepcopy(cur)
            c2.a_ab = a_ab
            det = a_ab[0, 0] * a_ab[1, 1] - a_ab[0, 1] * a_ab[1, 0]
            c2.det_a = det
            c2.a_inv = np.array([[a_ab[1, 1], -a_ab[0, 1]],
                                 [-a_ab[1, 0], a_ab[0, 0]]]) / det
            sm = stress_moment_state(compute_deformation(ref, c2), ref, c2, p)
            return sm.tau_plus + sm.tau_minus

        def M_of(b_ab):
            c2 = copy.deepcopy(cur)
            c2.b_ab = b_ab
            sm = stress_moment_state(compute_deformation(ref, c2), ref, c2, p)
            return sm.M0_plus + sm.M0_minus

        h = 1e-7
        idx = ((0, 0), (1, 1), (0, 1))
        scale_c = np.abs(c_full).max()
        scale_f = max(np.abs(f_full).max(), 1e-12)
        for J, (g, d) in enumerate(idx):
            da = np.zeros((2, 2))
            da[g, d] = h
            da[d, g] = h
            fd = (tau_of(cur.a_ab + da) - tau_of(cur.a_ab - da)) / (2 * h)
            expect = c_full[:, J] * (0.5 if g == d else 1.0)
            assert np.abs(fd - expect).max() / scale_c < 1e-6
            fdb = (M_of(cur.b_ab + da) - M_of(cur.b_ab - da)) / (2 * h)
            expectb = f_full[:, J] * (1.0 if g == d else 2.0)
            assert np.abs(fdb - expectb).max() / scale_f < 1e-6


def test_tangent_minor_symmetries_reference():
    ref, cur, meas = random_state(noise=0.0, factor=1.0)
    cp, cm, fp, fm = material_tangents(compute_deformation(ref, ref), ref, ref,
                                       params())
    assert np.allclose(cp + cm, (cp + cm).T, atol=1e-12)


def test_full_tension_bending_tangent_closed_form():
    ref, cur, meas = random_state(curved=True, factor=1.15, noise=0.0)
    p = params(p_chi=np.inf)
    _, _, fp, fm = material_tangents(meas, ref, cur, p)
    assert np.allclose(fm, 0.0, atol=1e-14)
    A = ref.a_inv
    idx = ((0, 0), (1, 1), (0, 1))
    expect = np.empty((3, 3))
    for I, (a, b) in enumerate(idx):
        for J, (g, d) in enumerate(idx):
            expect[I, J] = 0.5 * p.c * (A[a, g] * A[b, d] + A[a, d] * A[b, g])
    assert np.allclose(fp, expect, atol=1e-12)


# ----------------------------------------------------------------------
# history field
# ----------------------------------------------------------------------
def test_history_update_examples():
    assert update_history(5.0, 3.0) == 5.0
    assert update_history(0.0, 3.0) == 3.0


def test_history_is_running_max_over_load_cycle():
    rng = np.random.default_rng(0)
    trace = np.abs(np.cumsum(rng.standard_normal(200))) * 0.1
    H = 0.0
    for k, psi in enumerate(trace):
        H = update_history(H, psi)
        assert H == pytest.approx(trace[:k + 1].max())


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=30))
def test_history_monotone(trace):
    H = 0.0
    prev = 0.0
    for psi in trace:
        H = update_history(H, psi)
        assert H >= prev
        prev = H
