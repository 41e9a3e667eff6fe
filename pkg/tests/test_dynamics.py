"""Time integration: parameters, oscillator order, dt rule, Newton, solves."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from shellfrac.assembly.backend import make_kernel
from shellfrac.assembly.cache import ElementQuadCache
from shellfrac.assembly.system import Constraints, apply_constraints
from shellfrac.dynamics import (ReusableSolver, StepState, TimeControl,
                                adapt_dt, genalpha_params, linear_solve,
                                newton_step, oscillator_trace)
from shellfrac.errors import RunAborted, StepRejected
from shellfrac.lrmesh import LRMesh
from shellfrac.material import MaterialParams

RNG = np.random.default_rng(77)


def greville_1d(n_el, p=2):
    knots = np.concatenate([np.zeros(p), np.linspace(0, 1, n_el + 1), np.ones(p)])
    return np.array([knots[i + 1:i + p + 1].mean() for i in range(n_el + p)])


def flat_patch(nu=3, nv=3, L=1.0):
    p = 2
    gy, gx = np.meshgrid(L * greville_1d(nv), L * greville_1d(nu), indexing="ij")
    cps = np.column_stack([gx.ravel(), gy.ravel(), np.zeros((nu + p) * (nv + p))])
    return LRMesh.tensor_patch((p, p), nu, nv, cps)


# ----------------------------------------------------------------------
# generalized-alpha parameters
# ----------------------------------------------------------------------
def test_parameters_rho_half():
    gp = genalpha_params(0.5)
    assert gp.alpha_f == pytest.approx(2 / 3)
    assert gp.alpha_m == pytest.approx(1.0)
    assert gp.gamma == pytest.approx(5 / 6)
    assert gp.beta == pytest.approx(4 / 9)


def test_parameters_rho_one_and_zero():
    gp1 = genalpha_params(1.0)
    assert (gp1.alpha_f, gp1.alpha_m, gp1.gamma, gp1.beta) == \
        pytest.approx((0.5, 0.5, 0.5, 0.25))
    gp0 = genalpha_params(0.0)
    assert (gp0.alpha_f, gp0.alpha_m, gp0.gamma, gp0.beta) == \
        pytest.approx((1.0, 2.0, 1.5, 1.0))


def test_parameters_out_of_range():
    with pytest.raises(ValueError):
        genalpha_params(1.5)


# ----------------------------------------------------------------------
# oscillator convergence order
# ----------------------------------------------------------------------
@pytest.mark.parametrize("rho_inf", [0.5, 1.0])
def test_oscillator_second_order(rho_inf):
    omega, T = 2.0, 2.0
    errs = []
    dts = [0.02, 0.01, 0.005, 0.0025]
    for dt in dts:
        xT, _ = oscillator_trace(omega, 1.0, 0.0, dt, T, rho_inf)
        errs.append(abs(xT - np.cos(omega * T)))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    assert all(1.9 < o < 2.1 for o in orders)


# ----------------------------------------------------------------------
# adaptive dt rule
# ----------------------------------------------------------------------
def test_dt_rule_cases():
    tc = TimeControl()
    assert adapt_dt(0.01, 3, False, tc) == pytest.approx(0.015)
    assert adapt_dt(0.01, 4, False, tc) == pytest.approx(0.011)
    assert adapt_dt(0.01, 6, False, tc) == pytest.approx(0.005)
    assert adapt_dt(0.01, 2, True, tc) == pytest.approx(0.002)   # refinement wins
    assert adapt_dt(0.08, 2, False, tc) == pytest.approx(0.1)    # clamp at dt_max


def test_dt_underflow_aborts():
    tc = TimeControl()
    with pytest.raises(RunAborted):
        adapt_dt(1.5e-8, 6, False, tc)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 0.05), st.integers(0, 12), st.booleans())
def test_dt_rule_bounds(dt, n_nr, refined):
    tc = TimeControl()
    out = adapt_dt(dt, n_nr, refined, tc)
    assert tc.dt_min <= out <= tc.dt_max


# ----------------------------------------------------------------------
# linear solve
# ----------------------------------------------------------------------
def test_linear_solve_identity():
    rhs = RNG.standard_normal(20)
    I = sparse.identity(20, format="csc")
    assert np.allclose(linear_solve(I, rhs), rhs)


def test_linear_solve_spd_subblock_matches_dense():
    """The phase stiffness kbar0 solved alone against a dense oracle."""
    mesh = flat_patch(3, 3)
    params = MaterialParams(K=1, G=1, c=0.1, Gc=1e-3, l0=0.05, T=0.0125, rho=1)
    cache = ElementQuadCache(mesh, params)
    K = cache.Kbar0.tocsc()
    rhs = RNG.standard_normal(K.shape[0])
    u = linear_solve(K, rhs)
    assert np.allclose(u, np.linalg.solve(K.toarray(), rhs), atol=1e-10)


def test_linear_solve_random_sparse_matches_dense():
    n = 200
    A = sparse.random(n, n, density=0.05, random_state=3).tocsc()
    A = A + sparse.identity(n) * 10.0
    rhs = RNG.standard_normal(n)
    u = linear_solve(A, rhs)
    assert np.allclose(u, np.linalg.solve(A.toarray(), rhs), atol=1e-9)


def test_reusable_solver_reuses_and_refactors():
    n = 150
    A = (sparse.random(n, n, density=0.05, random_state=5)
         + sparse.identity(n) * 8.0).tocsc()
    rs = ReusableSolver()
    rhs = RNG.standard_normal(n)
    u1 = rs.solve(A, rhs)
    assert np.linalg.norm(A @ u1 - rhs) / np.linalg.norm(rhs) < 1e-10
    # perturbed matrix still solved through the stale factorization
    B = (A + sparse.random(n, n, density=0.01, random_state=6) * 1e-4).tocsc()
    u2 = rs.solve(B, rhs)
    assert np.linalg.norm(B @ u2 - rhs) / np.linalg.norm(rhs) < 1e-10


# ----------------------------------------------------------------------
# newton_step on the shell system
# ----------------------------------------------------------------------
def make_system(nu=3, nv=3, fix_bottom=True, plane=True):
    mesh = flat_patch(nu, nv)
    params = MaterialParams(K=27.78, G=41.67, c=0.1, Gc=1e-3, l0=0.02,
                            T=0.0125, rho=1.0)
    cache = ElementQuadCache(mesh, params)
    con = Constraints(mesh.n_funcs)
    X = mesh.control_points()
    G = mesh.greville_points()
    if fix_bottom:
        for i in np.where(G[:, 1] < 1e-9)[0]:
            for c in range(3):
                con.fix(con.xdof(i, c), X[i, c])
    if plane:
        for i in range(mesh.n_funcs):
            d = con.xdof(i, 2)
            if d not in con.fixed:
                con.fix(d, X[i, 2])
    system = apply_constraints(cache, con)
    kern = make_kernel(cache)
    return mesh, cache, con, system, kern, X


def test_zero_load_single_iteration_zero_update():
    mesh, cache, con, system, kern, X = make_system()
    st0 = StepState(0.0, X.copy(), np.zeros_like(X), np.zeros_like(X),
                    np.ones(mesh.n_funcs))
    new, H, diag = newton_step(st0, 0.02, system, kern, genalpha_params(0.5),
                               TimeControl())
    assert diag.n_nr == 1
    assert np.abs(new.x - X).max() < 1e-14
    assert np.abs(new.phi - 1).max() == 0.0


def test_intact_plate_small_load_phi_stays_one():
    mesh, cache, con, system, kern, X = make_system()
    G = mesh.greville_points()
    # prescribe a truly small shear so the phase perturbation ~ s * H stays tiny
    for i in np.where(G[:, 1] > 1 - 1e-9)[0]:
        con.prescribe(con.xdof(i, 0),
                      (lambda x0: lambda t: (x0 + 1e-6, 0.0, 0.0))(X[i, 0]))
        con.fix(con.xdof(i, 1), X[i, 1])
    system = apply_constraints(cache, con)
    st0 = StepState(0.0, X.copy(), np.zeros_like(X), np.zeros_like(X),
                    np.ones(mesh.n_funcs))
    new, H, diag = newton_step(st0, 0.02, system, kern, genalpha_params(0.5),
                               TimeControl())
    assert np.abs(new.phi - 1.0).max() < 1e-10


def test_newton_rejects_on_iteration_cap():
    mesh, cache, con, system, kern, X = make_system()
    G = mesh.greville_points()
    for i in np.where(G[:, 1] > 1 - 1e-9)[0]:
        con.prescribe(con.xdof(i, 0),
                      (lambda x0: lambda t: (x0 + 5.0, 0.0, 0.0))(X[i, 0]))
    system = apply_constraints(cache, con)
    st0 = StepState(0.0, X.copy(), np.zeros_like(X), np.zeros_like(X),
                    np.ones(mesh.n_funcs))
    tc = TimeControl(max_newton=3)
    with pytest.raises(StepRejected):
        newton_step(st0, 1e-4, system, kern, genalpha_params(0.5), tc)


def test_energy_conservation_rho_one():
    """Linear-elastic dynamics (fracture off): midpoint-like conservation,
    kinetic + elastic drift < 0.5% over 100 steps."""
    mesh, cache, con, system, kern, X = make_system(3, 3)
    params = cache.params
    # initial in-plane velocity field, fixed bottom edge
    v0 = np.zeros_like(X)
    v0[:, 0] = 0.2 * np.sin(np.pi * X[:, 1])
    st = StepState(0.0, X.copy(), v0, np.zeros_like(X), np.ones(mesh.n_funcs))
    gp = genalpha_params(1.0)
    tc = TimeControl(tol_dyn=1e-6)
    Mfull = cache.M

    def energy(s):
        kin = 0.5 * float(s.v.reshape(-1) @ (Mfull @ s.v.reshape(-1)))
        out = kern(s.x, s.phi, np.zeros((cache.nel, 9)), 0.0, (0.0, 0.0), False)
        el = float(np.sum(cache.dA * (out["psi_plus"] + out["psi_minus"])))
        return kin + el

    H = np.zeros((cache.nel, 9))
    e0 = energy(st)
    dt = 0.004
    solver = ReusableSolver()
    for _ in range(100):
        st, _, _ = newton_step(st, dt, system, kern, gp, tc, H_old=H,
                               phase_active=False, solver=solver)
    e1 = energy(st)
    assert abs(e1 - e0) / e0 < 0.005
