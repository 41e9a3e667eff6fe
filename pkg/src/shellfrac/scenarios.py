"""Benchmark scenarios, normalization, energies and derived output fields.

Three built-in problems: a sheared square membrane with an edge notch
(`shear2d`), a velocity-loaded rectangle with an off-center notch
(`branching`), and a pressurized closed cylinder with a symmetry plane
(`cylinder`).  All quantities are dimensionless; the Normalization helper
maps physical values into the reference system and back.

Geometry values not fixed by the problem statement (notch placement,
rectangle aspect, cylinder radius/length) are config keys with documented
defaults and should be treated as conventions of this implementation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adaptivity import RefinementPolicy, flag_functions
from .assembly.backend import make_kernel
from .assembly.cache import ElementQuadCache
from .assembly.system import Constraints, apply_constraints
from .dynamics import TimeControl, genalpha_params
from .errors import ShellFracError
from .lrmesh.mesh import LRMesh, refine_rounds, refine_structured
from .material import MaterialParams


@dataclass(frozen=True)
class Normalization:
    """Reference length, surface density and time; E0 = rho0 L0^2 / T0^2."""

    L0: float = 1.0
    rho0: float = 1.0
    T0: float = 1.0

    def __post_init__(self):
        if min(self.L0, self.rho0, self.T0) <= 0:
            raise ValueError("normalization scales must be positive")

    @property
    def E0(self) -> float:
        return self.rho0 * self.L0**2 / self.T0**2

    def to_dimensionless(self, *, length=None, time=None, density=None,
                         stiffness=None, pressure=None, toughness=None,
                         bending=None):
        out = {}
        if length is not None:
            out["length"] = length / self.L0
        if time is not None:
            out["time"] = time / self.T0
        if density is not None:
            out["density"] = density / self.rho0
        if stiffness is not None:
            out["stiffness"] = stiffness / self.E0
        if pressure is not None:
            out["pressure"] = pressure / (self.E0 / self.L0)
        if toughness is not None:
            out["toughness"] = toughness / (self.E0 * self.L0)
        if bending is not None:
            out["bending"] = bending / (self.E0 * self.L0)
        return out

    def to_physical(self, **kw):
        inv = Normalization(1.0 / self.L0, 1.0 / self.rho0, 1.0 / self.T0)
        return inv.to_dimensionless(**kw)


SCENARIO_DEFAULTS = {
    "shear2d": {
        "E": 100.0, "nu": 0.2, "c": 0.1, "Gc": 0.001, "l0": 0.0025,
        "T": 0.0125, "rho": 1.0, "p_chi": 250.0, "s": 1e-4, "n_thick": 4,
        "nu_el": 16, "nv_el": 16, "depth": 5, "phi_bound": 0.975,
        "du_bar": 2e-6, "crack_x0": 0.0, "crack_x1": 0.5, "crack_y": 0.5,
        "H0_amplitude": 1000.0,
        "dt0": 1.5e-5, "dt_max": 0.1, "dt_min": 1e-8, "rho_inf": 0.5,
        "plane": True,
    },
    "branching": {
        "E": 100.0, "nu": 0.3, "c": 0.1, "Gc": 0.001, "l0": 0.0025,
        "T": 0.0125, "rho": 1.0, "p_chi": 250.0, "s": 1e-4, "n_thick": 4,
        "nu_el": 64, "nv_el": 32, "depth": 3, "phi_bound": 0.975,
        "vbar": 1.25e-3, "width": 2.0, "height": 1.0,
        "crack_x0": 0.0, "crack_x1": 0.5, "crack_y_frac": 0.55,
        "H0_amplitude": 1000.0,
        "dt0": 1.5e-5, "dt_max": 1e-3, "dt_min": 1e-8, "rho_inf": 0.5,
        "plane": True,
    },
    "cylinder": {
        "E": 10.0, "nu": 0.3, "c": 0.1, "Gc": 0.00075, "l0": 0.01,
        "T": 0.0125, "rho": 1.0, "p_chi": 250.0, "s": 1e-4, "n_thick": 4,
        "nu_el": 64, "nv_el": 16, "depth": 3, "phi_bound": 0.975,
        "pbar": -0.2, "radius": 0.25, "length": 2.0,
        "crack_len": 0.25, "crack_theta": 0.5,   # fraction of a turn from seam
        "H0_amplitude": 1000.0,
        "dt0": 1.5e-5, "dt_max": 0.1, "dt_min": 1e-8, "rho_inf": 0.5,
        "plane": False,
    },
}


@dataclass
class ScenarioConfig:
    name: str
    values: dict

    @classmethod
    def from_dict(cls, cfg: dict) -> "ScenarioConfig":
        name = cfg.get("scenario")
        if name not in SCENARIO_DEFAULTS:
            raise ShellFracError(f"unknown scenario {name!r}; "
                                 f"choose from {sorted(SCENARIO_DEFAULTS)}")
        vals = dict(SCENARIO_DEFAULTS[name])
        for k, v in cfg.items():
            if k == "scenario":
                continue
            key = k.split(".", 1)[-1]
            vals[key] = v
        return cls(name, vals)

    def __getitem__(self, k):
        return self.values[k]

    def material(self) -> MaterialParams:
        v = self.values
        return MaterialParams.from_engineering(
            v["E"], v["nu"], c=v["c"], Gc=v["Gc"], l0=v["l0"], T=v["T"],
            rho=v["rho"], s=v["s"],
            p_chi=float("inf") if v["p_chi"] in ("inf", float("inf")) else v["p_chi"],
            n_thick=v["n_thick"])

    def time_control(self) -> TimeControl:
        v = self.values
        return TimeControl(dt0=v["dt0"], dt_max=v["dt_max"], dt_min=v["dt_min"])

    def policy(self) -> RefinementPolicy:
        return RefinementPolicy(phi_bound=self.values["phi_bound"],
                                max_depth=self.values["depth"])


@dataclass
class Scenario:
    """Fully initialized problem: mesh, cache, constraints, states, loads."""

    config: ScenarioConfig
    mesh: LRMesh
    cache: ElementQuadCache
    constraints: Constraints
    x0: np.ndarray
    phi0: np.ndarray
    H0: np.ndarray
    pbar: float = 0.0
    crack_segments: list = field(default_factory=list)
    _u_committed: float = 0.0

    def rebuild_constraints(self, mesh: LRMesh) -> Constraints:
        """Reconstruct the BC table for a refined mesh."""
        return _CONSTRAINT_BUILDERS[self.config.name](self.config, mesh)

    def begin_step(self):
        """Set the loading target for the step about to be computed.

        The shear scenario imposes a fixed displacement increment per time
        step; retries of a rejected or recomputed step keep the same target.
        """
        if self.config.name == "shear2d":
            st = self.config.values.setdefault("_ubar_state", {"u": 0.0})
            st["u"] = self._u_committed + self.config["du_bar"]

    def commit_step(self):
        if self.config.name == "shear2d":
            self._u_committed = self.config.values["_ubar_state"]["u"]

    @property
    def load_parameter(self) -> float:
        """Accumulated boundary displacement (shear) or elapsed-time proxy."""
        return self._u_committed


def _flat_grid_cps(nu, nv, p, Lx, Ly, y0=0.0):
    """Control net making the patch map an exact identity (times extent):
    Greville-placed control points reproduce linear functions."""
    gy, gx = np.meshgrid(y0 + Ly * _greville_1d(nv, p),
                         Lx * _greville_1d(nu, p), indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), np.zeros((nu + p) * (nv + p))])


def _segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    t = np.clip((pts - a) @ ab / (ab @ ab), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(pts - proj, axis=1)


def initial_history(cache: ElementQuadCache, segments: list,
                    params: MaterialParams, amplitude: float,
                    surface_points=None, width: float | None = None) -> np.ndarray:
    """Initial-crack history spike at the quadrature points.

    H0 = M (Gc / 4 l0) max(0, 1 - d(x, crack) / w) with half-width
    w = max(l0 / 2, width); passing the fine element size as `width`
    guarantees the spike is seen by at least one quadrature row even when
    the mesh does not resolve l0.
    """
    nel, nq = cache.nel, cache.nq
    if surface_points is None:
        X = cache.mesh.control_points()
        pts = np.einsum("eqm,emk->eqk", cache.N, X[cache.fidx]).reshape(-1, 3)
    else:
        pts = surface_points.reshape(-1, 3)
    d = np.full(len(pts), np.inf)
    for a, b in segments:
        d = np.minimum(d, _segment_distance(pts, np.asarray(a, float),
                                            np.asarray(b, float)))
    w = max(params.l0 / 2.0, width or 0.0)
    H = amplitude * params.Gc / (4 * params.l0) * np.maximum(0.0, 1.0 - d / w)
    return H.reshape(nel, nq)


def prerefine_crack(mesh: LRMesh, segments: list, band: float,
                    depth: int) -> LRMesh:
    """Refine functions near the crack to full depth, one level per round.

    Level-by-level flagging tightens the refined zone toward the crack band
    the same way the phase-driven refinement does during a run.
    """
    def flag_round(m, _current_value):
        out = []
        for f in m.funcs:
            if not f.alive:
                continue
            u0, u1, v0, v1 = f.bbox
            if any(_box_near_segment(u0, u1, v0, v1, a, b, band)
                   for a, b in segments):
                out.append(f)
        return out

    return refine_rounds(mesh, flag_round, depth).mesh


def _box_near_segment(u0, u1, v0, v1, a, b, band) -> bool:
    # sample the segment densely; cheap and robust for axis-aligned cracks
    ts = np.linspace(0.0, 1.0, 33)
    pa, pb = np.asarray(a, float), np.asarray(b, float)
    pts = pa[None, :2] + ts[:, None] * (pb[:2] - pa[:2])[None, :]
    du = np.maximum(np.maximum(u0 - pts[:, 0], pts[:, 0] - u1), 0.0)
    dv = np.maximum(np.maximum(v0 - pts[:, 1], pts[:, 1] - v1), 0.0)
    return bool(np.any(np.hypot(du, dv) <= band))


# ----------------------------------------------------------------------
# constraint builders (re-run after each refinement)
# ----------------------------------------------------------------------
def _shear_constraints(cfg: ScenarioConfig, mesh: LRMesh) -> Constraints:
    con = Constraints(mesh.n_funcs)
    G = mesh.greville_points()
    X = mesh.control_points()
    tol = 1e-9
    for i in range(mesh.n_funcs):
        if G[i, 1] < tol:                       # bottom edge: fixed
            for c in range(3):
                con.fix(con.xdof(i, c), X[i, c])
        elif G[i, 1] > 1 - tol:                 # top edge: driven horizontally
            con.prescribe(con.xdof(i, 0), _step_schedule(cfg, X[i, 0]))
            con.fix(con.xdof(i, 1), X[i, 1])
            con.fix(con.xdof(i, 2), X[i, 2])
        elif cfg["plane"]:
            con.fix(con.xdof(i, 2), X[i, 2])
    return con


def _step_schedule(cfg: ScenarioConfig, x_ref: float):
    """Shear loading: the driver advances `ubar` per accepted step; the
    schedule reads the current target from the mutable config state."""
    state = cfg.values.setdefault("_ubar_state", {"u": 0.0})

    def fn(t):
        return x_ref + state["u"], 0.0, 0.0
    return fn


def _branching_constraints(cfg: ScenarioConfig, mesh: LRMesh) -> Constraints:
    con = Constraints(mesh.n_funcs)
    G = mesh.greville_points()
    X = mesh.control_points()
    vbar = cfg["vbar"]
    H = cfg["height"]
    tol = 1e-9
    for i in range(mesh.n_funcs):
        yfrac = G[i, 1]
        if yfrac > 1 - tol:                     # top edge: +vbar
            con.prescribe(con.xdof(i, 1),
                          (lambda y0: lambda t: (y0 + vbar * t, vbar, 0.0))(X[i, 1]))
            con.fix(con.xdof(i, 2), X[i, 2])
        elif yfrac < tol:                       # bottom edge: -vbar
            con.prescribe(con.xdof(i, 1),
                          (lambda y0: lambda t: (y0 - vbar * t, -vbar, 0.0))(X[i, 1]))
            con.fix(con.xdof(i, 2), X[i, 2])
        elif cfg["plane"]:
            con.fix(con.xdof(i, 2), X[i, 2])
    return con


def _cylinder_constraints(cfg: ScenarioConfig, mesh: LRMesh) -> Constraints:
    con = Constraints(mesh.n_funcs)
    G = mesh.greville_points()
    X = mesh.control_points()
    p1, _ = mesh.degree
    tol = 1e-9
    nu_f = None
    # seam closure: functions at u=0 and u=1 coincide geometrically; pair them
    left = {}
    right = {}
    for f in mesh.funcs:
        gu, gv = f.greville()
        if gu < tol:
            left[round(gv, 12)] = f.idx
        elif gu > 1 - tol:
            right[round(gv, 12)] = f.idx
    for gv, s in right.items():
        m = left.get(gv)
        if m is not None:
            off = X[m] - X[s]
            con.identify_nodes(s, m, offsets=tuple(off), phase=True)
    paired = set(right.values())
    # symmetry plane at v=0: z fixed; first interior row tied to boundary in x, y
    rows = sorted({round(g, 12) for g in G[:, 1]})
    row0, row1 = rows[0], rows[1]
    bnd = {}
    for i in range(mesh.n_funcs):
        gv = round(G[i, 1], 12)
        if gv == row0:
            bnd[round(G[i, 0], 12)] = i
    for i in range(mesh.n_funcs):
        if i in paired:
            continue
        gv = round(G[i, 1], 12)
        if gv == row0:
            con.fix(con.xdof(i, 2), X[i, 2])
        elif gv == row1:
            m = bnd.get(round(G[i, 0], 12))
            if m is not None and m not in paired:
                for c in (0, 1):
                    con.identify(con.xdof(i, c), con.xdof(m, c), X[i, c] - X[m, c])
        elif gv == rows[-1]:                       # far ring: radially fixed
            con.fix(con.xdof(i, 0), X[i, 0])
            con.fix(con.xdof(i, 1), X[i, 1])
    return con


_CONSTRAINT_BUILDERS = {
    "shear2d": _shear_constraints,
    "branching": _branching_constraints,
    "cylinder": _cylinder_constraints,
}


# ----------------------------------------------------------------------
# scenario construction
# ----------------------------------------------------------------------
def build_scenario(cfg: ScenarioConfig | dict) -> Scenario:
    """Initialized mesh, states, constraints and initial history field."""
    if isinstance(cfg, dict):
        cfg = ScenarioConfig.from_dict(cfg)
    params = cfg.material()
    name = cfg.name
    v = cfg.values

    if name == "shear2d":
        nu_el, nv_el = v["nu_el"], v["nv_el"]
        cps = _flat_grid_cps(nu_el, nv_el, 2, 1.0, 1.0)
        mesh = LRMesh.tensor_patch((2, 2), nu_el, nv_el, cps)
        segments = [((v["crack_x0"], v["crack_y"], 0.0),
                     (v["crack_x1"], v["crack_y"], 0.0))]
        param_segments = [(s[0][:2], s[1][:2]) for s in segments]
    elif name == "branching":
        nu_el, nv_el = v["nu_el"], v["nv_el"]
        W, Hh = v["width"], v["height"]
        cps = _flat_grid_cps(nu_el, nv_el, 2, W, Hh)
        mesh = LRMesh.tensor_patch((2, 2), nu_el, nv_el, cps)
        yc = v["crack_y_frac"] * Hh
        segments = [((v["crack_x0"], yc, 0.0), (v["crack_x1"], yc, 0.0))]
        param_segments = [((v["crack_x0"] / W, v["crack_y_frac"]),
                           (v["crack_x1"] / W, v["crack_y_frac"]))]
    elif name == "cylinder":
        mesh, segments, param_segments = _cylinder_mesh(cfg)
    else:  # pragma: no cover
        raise ShellFracError(f"unknown scenario {name}")

    # pre-refine the crack region to full depth; parametric band covering the
    # initial-history support (half-width l0/2) plus a transition margin
    band = 1.5 * params.l0 / min(_domain_size(cfg))
    mesh = prerefine_crack(mesh, param_segments, band, v["depth"])

    cache = ElementQuadCache(mesh, params)
    constraints = _CONSTRAINT_BUILDERS[name](cfg, mesh)
    sizes = _domain_size(cfg)
    h_fine = max(sizes[0] / (v["nu_el"] * 2 ** v["depth"]),
                 sizes[1] / (v["nv_el"] * 2 ** v["depth"]))
    H0 = initial_history(cache, segments, params, v["H0_amplitude"],
                         width=h_fine)
    x0 = mesh.control_points()
    phi0 = _initial_phase_solve(cache, constraints, H0)
    return Scenario(cfg, mesh, cache, constraints, x0, phi0, H0,
                    pbar=v.get("pbar", 0.0), crack_segments=segments)


def _domain_size(cfg: ScenarioConfig):
    if cfg.name == "branching":
        return (cfg["width"], cfg["height"])
    if cfg.name == "cylinder":
        return (2 * np.pi * cfg["radius"], cfg["length"] / 2)
    return (1.0, 1.0)


def _cylinder_mesh(cfg: ScenarioConfig):
    """Closed cylinder (half length, symmetry at z=0), seam at theta=0.

    Circumferential direction uses a uniform C^1 control polygon fitted so
    the spline radius matches `radius` to O(h^2); the seam column is closed
    by control-point identification.
    """
    v = cfg.values
    R, L = v["radius"], v["length"]
    nu_el, nv_el = v["nu_el"], v["nv_el"]
    p = 2
    n_u = nu_el + p
    n_v = nv_el + p
    # greville abscissae of the circumferential functions -> target angles
    thetas = 2 * np.pi * _greville_1d(nu_el, p)
    # control radius correction: a uniform quadratic polygon on radius Rc
    # produces a spline of radius ~ Rc cos(dtheta/2) away from the seam
    dth = 2 * np.pi / nu_el
    Rc = R / np.cos(dth / 2)
    zs = _greville_1d(nv_el, p) * (L / 2)
    cps = np.empty((n_v * n_u, 3))
    for j, z in enumerate(zs):
        for i, th in enumerate(thetas):
            # seam columns interpolate the surface: place them on the circle
            r = R if i in (0, n_u - 1) else Rc
            cps[j * n_u + i] = (r * np.cos(th), -r * np.sin(th), z)
    mesh = LRMesh.tensor_patch((p, p), nu_el, nv_el, cps)
    th0 = 2 * np.pi * v["crack_theta"]
    ax = (R * np.cos(th0), -R * np.sin(th0))
    segments = [((ax[0], ax[1], 0.0), (ax[0], ax[1], v["crack_len"]))]
    param_segments = [((v["crack_theta"], 0.0),
                       (v["crack_theta"], v["crack_len"] / (L / 2)))]
    return mesh, segments, param_segments


def _greville_1d(n_el: int, p: int) -> np.ndarray:
    knots = np.concatenate([np.zeros(p), np.linspace(0, 1, n_el + 1), np.ones(p)])
    return np.array([knots[i + 1:i + p + 1].mean() for i in range(n_el + p)])


def _initial_phase_solve(cache: ElementQuadCache, constraints: Constraints,
                         H0: np.ndarray, tol: float = 1e-10,
                         max_iter: int = 40) -> np.ndarray:
    """Stationary phase solve at the reference configuration (mechanics off).

    The cubic degradation keeps phi = 1 metastable even under a strong
    history spike (g'(1) = s), so Newton from the intact state would fall
    into the spurious near-intact root.  A linear predictor with quadratic
    degradation (g' = 2 phi) lands on the cracked branch first; Newton on
    the true cubic equation then polishes it.
    """
    from scipy.sparse.linalg import splu

    mesh = cache.mesh
    system = apply_constraints(cache, constraints)
    kern = make_kernel(cache)
    x = mesh.control_points()
    p = cache.params
    ncp = mesh.n_funcs

    phi = np.ones(ncp)
    if H0.max() > 0.0:
        scale = 2.0 * p.l0 / p.Gc
        wH = cache.dA * scale * 2.0 * H0            # quadratic-degradation weight
        rows = np.repeat(cache.fidx, cache.nmax, axis=1).ravel()
        cols = np.tile(cache.fidx, (1, cache.nmax)).ravel()
        mass_H = np.einsum("eq,eqm,eqn->emn", wH, cache.N, cache.N)
        from scipy import sparse
        KH = sparse.coo_matrix((mass_H.ravel(), (rows, cols)),
                               shape=(ncp, ncp)).tocsr()
        phi = splu((cache.Kbar0 + KH).tocsc()).solve(cache.fbar0)

    for _ in range(max_iter):
        out = kern(x, phi, H0, 0.0, (0.0, 0.0), True)
        r = cache.Kbar0 @ phi + np.bincount(
            cache.fidx.ravel(), weights=out["fbar_el"].ravel(),
            minlength=ncp) - cache.fbar0
        if np.linalg.norm(r) < tol:
            break
        K = cache.Kbar0 + _scatter_phase_block(cache, out["Kbphi"])
        dphi = splu(K.tocsc()).solve(-r)
        phi += dphi
    system.sync_slaves(x.copy(), phi=phi)
    return phi


def _scatter_phase_block(cache: ElementQuadCache, Kbphi_e: np.ndarray):
    from scipy import sparse

    n = cache.n_cp
    rows = np.repeat(cache.fidx, cache.nmax, axis=1).ravel()
    cols = np.tile(cache.fidx, (1, cache.nmax)).ravel()
    return sparse.coo_matrix((Kbphi_e.ravel(), (rows, cols)), shape=(n, n)).tocsr()


# ----------------------------------------------------------------------
# energies and derived fields
# ----------------------------------------------------------------------
def compute_energies(cache: ElementQuadCache, x: np.ndarray, phi: np.ndarray,
                     H: np.ndarray, pbar: float = 0.0,
                     kernel=None) -> tuple[float, float]:
    """(Pi_el, Pi_frac) integrated over the current surface (da = J dA).

    Passing the run's bound kernel avoids falling back to the numpy path.
    """
    p = cache.params
    if kernel is None:
        kernel = make_kernel(cache)
    out = kernel(x, phi, H, pbar, (0.0, 0.0), False)
    phig = np.einsum("eqm,em->eq", cache.N, phi[cache.fidx])
    g = (3.0 - p.s) * phig**2 - (2.0 - p.s) * phig**3
    da = cache.dA * out["J"]
    pi_el = float(np.sum(da * (g * out["psi_plus"] + out["psi_minus"])))
    pi_frac = float(np.sum(da * fracture_density_qp(cache, phi)))
    return pi_el, pi_frac


def fracture_density_qp(cache: ElementQuadCache, phi: np.ndarray) -> np.ndarray:
    """Crack energy density at every quadrature point, (nel, 9)."""
    p = cache.params
    phig = phi[cache.fidx]
    phiq = np.einsum("eqm,em->eq", cache.N, phig)
    dphi = np.einsum("eqam,em->eqa", cache.dN, phig)
    lap = np.einsum("eqm,em->eq", cache.lapN, phig)
    A11, A22, A12 = (cache.Ainv[..., i] for i in range(3))
    g2 = (A11 * dphi[..., 0]**2 + A22 * dphi[..., 1]**2
          + 2 * A12 * dphi[..., 0] * dphi[..., 1])
    return p.Gc / (4 * p.l0) * ((phiq - 1.0)**2 + 2 * p.l0**2 * g2
                                + p.l0**4 * lap**2)


def compute_surface_tension(cache: ElementQuadCache, x: np.ndarray,
                            phi: np.ndarray, H: np.ndarray,
                            pbar: float = 0.0) -> np.ndarray:
    """Surface tension gamma = 1/2 N^a_a at the quadrature points (nel, 9)."""
    from .assembly.pykernel import qp_fields

    return qp_fields(cache, x, phi, H, pbar)["gamma"]
