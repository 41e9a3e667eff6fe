"""Transient driver: time loop with rejection handling and mesh adaptivity.

Loop body: assemble and solve one implicit step; on acceptance check the
refinement criterion (nucleation refines and recomputes the step from t_n,
propagation refines and continues); adapt the step size from the iteration
count (or the refinement event); emit trace rows and snapshots.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adaptivity import adapt_after_step, depth_warning, migrate_state
from .assembly.backend import make_kernel
from .assembly.cache import ElementQuadCache
from .assembly.system import apply_constraints
from .dynamics import (ReusableSolver, StepState, TimeControl, adapt_dt,
                       genalpha_params, newton_step)
from .errors import RunAborted, StepRejected
from .outputs import (EventLog, append_csv_row, write_csv_header,
                      write_mesh_dump, write_parametric_mesh_vtk,
                      write_vtk_snapshot)
from .scenarios import Scenario, compute_energies, compute_surface_tension


@dataclass
class RunResult:
    states: list
    log: EventLog
    scenario: Scenario
    cache: ElementQuadCache
    H: np.ndarray
    trace: list = field(default_factory=list)   # (t, dt, n_nr, pi_el, pi_frac, n_cp)
    aborted: str | None = None
    final_state: StepState | None = None
    final_mesh = None


def run_transient(scenario: Scenario, t_end: float, max_steps: int = 10 ** 9,
                  out_dir: str | Path | None = None, snapshot_every: int = 0,
                  keep_states: bool = False, verbose: bool = False,
                  backend: str | None = None, stop_when=None) -> RunResult:
    """Run the scenario to t_end (or max_steps accepted steps).

    `stop_when(mesh, state, H)` is an optional early-exit predicate checked
    after every accepted step (e.g. crack reached the far boundary).
    """
    cfg = scenario.config
    tc = cfg.time_control()
    gp = genalpha_params(cfg["rho_inf"])
    policy = cfg.policy()

    mesh = scenario.mesh
    cache = scenario.cache
    constraints = scenario.constraints
    system = apply_constraints(cache, constraints)
    kernel = make_kernel(cache, backend)
    pbar = scenario.pbar

    x0 = scenario.x0.copy()
    state = StepState(0.0, x0.copy(), np.zeros_like(x0), np.zeros_like(x0),
                      scenario.phi0.copy())
    H = scenario.H0.copy()
    # consistent initial acceleration from the unconstrained equation of motion
    state.a = _initial_acceleration(system, kernel, state, H, pbar)

    csv_path = None
    if out_dir:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "trace.csv"
        write_csv_header(csv_path)
        write_mesh_dump(out_dir / "mesh_initial.txt", mesh)
    log = EventLog(out_dir / "events.log" if out_dir else None)

    result = RunResult([], log, scenario, cache, H)
    solver = ReusableSolver()
    dt = tc.dt0
    step = 0
    accepted = 0
    consecutive_rejects = 0
    t_wall = time.perf_counter()

    pi_el, pi_frac = compute_energies(cache, state.x, state.phi, H, pbar,
                                      kernel=kernel)
    result.trace.append((state.t, 0.0, 0, pi_el, pi_frac, mesh.n_funcs))
    if csv_path:
        append_csv_row(csv_path, state.t, 0.0, 0, pi_el, pi_frac, mesh.n_funcs)

    while state.t < t_end - 1e-14 and accepted < max_steps:
        scenario.begin_step()
        try:
            new_state, H_new, diag = newton_step(
                state, dt, system, kernel, gp, tc, pbar=pbar, H_old=H,
                solver=solver)
        except StepRejected as exc:
            consecutive_rejects += 1
            log.emit(event="rejected", step=step, t=state.t, dt=dt,
                     reason=str(exc).replace(" ", "_"), dofs=system.n_free)
            if consecutive_rejects > tc.max_rejects:
                result.aborted = f"{tc.max_rejects} consecutive rejections"
                break
            dt_new = dt * tc.shrink
            if dt_new < tc.dt_min:
                result.aborted = "dt underflow on rejection"
                break
            dt = dt_new
            step += 1
            continue
        consecutive_rejects = 0

        # adaptivity: may refine and either continue or recompute
        action, ref = adapt_after_step(mesh, new_state.phi, state.phi, policy)
        refined = action != "none"
        if refined:
            old_cache = cache
            mesh = ref.mesh
            cache = ElementQuadCache(mesh, cfg.material())
            constraints = scenario.rebuild_constraints(mesh)
            system = apply_constraints(cache, constraints)
            kernel = make_kernel(cache, backend)
            solver.reset()
            if action == "refined_recompute":
                fields = {"x": state.x, "v": state.v, "a": state.a,
                          "phi": state.phi}
                newf, newH = migrate_state(ref.transfer, old_cache, cache,
                                           fields, {"H": H})
                state = StepState(state.t, newf["x"], newf["v"], newf["a"],
                                  newf["phi"])
                H = newH["H"]
                log.emit(event="refine_nucleation", step=step, t=state.t,
                         dt=dt, n_nr=diag.n_nr, n_cp=mesh.n_funcs,
                         n_el=len(mesh.elements), dofs=system.n_free)
                dt = adapt_dt(dt, diag.n_nr, True, tc)
                step += 1
                continue
            # propagation: migrate both time levels, keep the accepted step
            fields = {"x": new_state.x, "v": new_state.v, "a": new_state.a,
                      "phi": new_state.phi, "x_n": state.x, "v_n": state.v,
                      "a_n": state.a, "phi_n": state.phi}
            newf, newH = migrate_state(ref.transfer, old_cache, cache,
                                       fields, {"H": H_new})
            new_state = StepState(new_state.t, newf["x"], newf["v"],
                                  newf["a"], newf["phi"])
            H_new = newH["H"]
            log.emit(event="refine_propagation", step=step, t=new_state.t,
                     dt=dt, n_nr=diag.n_nr, n_cp=mesh.n_funcs,
                     n_el=len(mesh.elements), dofs=system.n_free)

        # accept
        state = new_state
        H = H_new
        scenario.commit_step()
        accepted += 1
        if depth_warning(mesh, state.phi, policy):
            log.emit(event="depth_warning", step=step, t=state.t)

        pi_el, pi_frac = compute_energies(cache, state.x, state.phi, H, pbar,
                                          kernel=kernel)
        log.emit(event="accepted", step=step, t=state.t, dt=dt,
                 n_nr=diag.n_nr, rnorm_u=diag.rnorm_u,
                 rnorm_phi=diag.rnorm_phi, dofs=system.n_free,
                 n_cp=mesh.n_funcs, refined=int(refined),
                 phi_min=diag.phi_min, load=scenario.load_parameter)
        result.trace.append((state.t, dt, diag.n_nr, pi_el, pi_frac,
                             mesh.n_funcs))
        if csv_path:
            append_csv_row(csv_path, state.t, dt, diag.n_nr, pi_el, pi_frac,
                           mesh.n_funcs)
        if keep_states:
            result.states.append((state.copy(), H.copy()))
        if out_dir and snapshot_every and accepted % snapshot_every == 0:
            gam = compute_surface_tension(cache, state.x, state.phi, H, pbar)
            write_vtk_snapshot(out_dir / f"snapshot_{accepted:06d}.vtk",
                               mesh, cache, state.x, state.phi, gam, H)
            write_parametric_mesh_vtk(
                out_dir / f"parametric_{accepted:06d}.vtk", mesh)

        if stop_when is not None and stop_when(mesh, state, H):
            log.emit(event="stopped", step=step, t=state.t, reason="stop_when")
            break
        dt = adapt_dt(dt, diag.n_nr, refined, tc)
        step += 1
        if verbose and accepted % 50 == 0:
            el = time.perf_counter() - t_wall
            print(f"  step {accepted}: t={state.t:.6g} dt={dt:.3g} "
                  f"n_cp={mesh.n_funcs} [{el:.1f}s]", flush=True)

    result.cache = cache
    result.H = H
    result.scenario = scenario
    result.final_state = state
    result.final_mesh = mesh
    if out_dir:
        gam = compute_surface_tension(cache, state.x, state.phi, H, pbar)
        write_vtk_snapshot(Path(out_dir) / "snapshot_final.vtk", mesh, cache,
                           state.x, state.phi, gam, H)
        write_mesh_dump(Path(out_dir) / "mesh_final.txt", mesh)
    return result


def _initial_acceleration(system, kernel, state: StepState, H, pbar):
    """Solve M a0 = -(f_int - f_ext) on the free dofs at t = 0."""
    from scipy.sparse.linalg import splu

    cache = system.cache
    ncp = cache.n_cp
    out = kernel(state.x, state.phi, H, pbar, (0.0, 0.0), False)
    fx = np.bincount(cache.xdofs().ravel(), weights=out["fint"].ravel(),
                     minlength=3 * ncp)
    r = np.concatenate([fx, np.zeros(ncp)])
    r_red = system.reduce(r)
    pmask = system.red_is_phase
    if np.linalg.norm(r_red[~pmask]) < 1e-12:
        return np.zeros_like(state.x)
    from scipy import sparse

    Mfull = sparse.bmat([[cache.M, None],
                         [None, sparse.eye(ncp)]], format="csr")
    M_red = (system.CT @ Mfull @ system.C).tocsc()
    a_red = splu(M_red).solve(-r_red)
    a = system.expand(a_red)[:3 * ncp].reshape(ncp, 3)
    return a


def replay_dt_sequence(records: list[dict], tc: TimeControl) -> list[tuple]:
    """Reconstruct the dt sequence from the logged (n_NR, event) history.

    Returns (logged_dt, predicted_dt) pairs for every step transition; a run
    satisfies the replay property when all pairs match exactly.
    """
    seq = []
    dt = None
    for rec in records:
        ev = rec.get("event")
        if ev not in ("accepted", "rejected", "refine_nucleation"):
            continue
        if dt is not None:
            seq.append((rec["dt"], dt))
        if ev == "accepted":
            dt = adapt_dt(rec["dt"], rec["n_nr"], bool(rec.get("refined", 0)), tc)
        elif ev == "refine_nucleation":
            dt = adapt_dt(rec["dt"], rec["n_nr"], True, tc)
        else:
            dt = rec["dt"] * tc.shrink
    return seq
