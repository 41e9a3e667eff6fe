"""Phase-field-driven mesh refinement and state migration.

Control points whose phase value drops to the threshold flag their basis
functions; flagged supports are refined to the prescribed depth with the
structured-mesh rule.  Spline control fields migrate exactly through the
knot-insertion transfer map; the quadrature history field migrates by
nearest-old-quadrature-point lookup, which is cheap and cannot smooth
damage away.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lrmesh.mesh import LRMesh, refine_rounds, transfer_field


@dataclass
class RefinementPolicy:
    phi_bound: float = 0.975
    max_depth: int = 3
    recompute_on_nucleation: bool = True

    def __post_init__(self):
        if not (0.0 < self.phi_bound < 1.0):
            raise ValueError("phi_bound must lie in (0, 1)")


def flag_functions(mesh: LRMesh, phi: np.ndarray, policy: RefinementPolicy) -> set[int]:
    """Functions with control value <= phi_bound whose support is not fully refined."""
    dmin = mesh.function_min_depths()
    low = np.where(phi <= policy.phi_bound)[0]
    return {int(i) for i in low if dmin[i] < policy.max_depth}


def migrate_state(transfer, old_cache, new_cache, fields: dict,
                  H_fields: dict) -> tuple[dict, dict]:
    """Map control fields (exact) and quadrature history fields (nearest point).

    fields: name -> (n_old,) or (n_old, k) control arrays.
    H_fields: name -> (nel_old, 9) quadrature arrays.
    """
    new_fields = {k: transfer_field(transfer, v) for k, v in fields.items()}
    new_H = {k: _migrate_quadrature(old_cache, new_cache, v)
             for k, v in H_fields.items()}
    return new_fields, new_H


def _migrate_quadrature(old_cache, new_cache, H_old: np.ndarray) -> np.ndarray:
    """Nearest-old-quadrature-point transfer of a per-qp field."""
    old_mesh = old_cache.mesh
    # bucket old elements by which initial cell their center falls in
    from collections import defaultdict
    buckets = defaultdict(list)
    w0u = float(old_mesh._w0u)
    w0v = float(old_mesh._w0v)

    def bucket_key(u, v):
        return (int(min(u / w0u, 1.0 / w0u - 1e-9)),
                int(min(v / w0v, 1.0 / w0v - 1e-9)))

    for e, el in enumerate(old_mesh.elements):
        u0, u1 = float(el.u0), float(el.u1)
        v0, v1 = float(el.v0), float(el.v1)
        i0, j0 = bucket_key(u0 + 1e-12, v0 + 1e-12)
        i1, j1 = bucket_key(u1 - 1e-12, v1 - 1e-12)
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                buckets[(i, j)].append(e)

    H_new = np.empty((new_cache.nel, new_cache.nq))
    uv_new = new_cache.qp_uv
    uv_old = old_cache.qp_uv
    rect = np.array([[float(el.u0), float(el.u1), float(el.v0), float(el.v1)]
                     for el in old_mesh.elements])
    for e in range(new_cache.nel):
        for q in range(new_cache.nq):
            u, v = uv_new[e, q]
            parent = -1
            for cand in buckets[bucket_key(u, v)]:
                r = rect[cand]
                if r[0] <= u <= r[1] and r[2] <= v <= r[3]:
                    parent = cand
                    break
            if parent < 0:
                raise RuntimeError(f"no parent element for qp ({u}, {v})")
            d2 = ((uv_old[parent, :, 0] - u) ** 2
                  + (uv_old[parent, :, 1] - v) ** 2)
            H_new[e, q] = H_old[parent, int(np.argmin(d2))]
    return H_new


def classify_refinement(mesh: LRMesh, flagged: set[int], phi_old: np.ndarray,
                        policy: RefinementPolicy) -> str:
    """Nucleation vs propagation: was any control point in the flagged
    supports already damaged (phi <= phi_bound) at the previous step?"""
    elems = set()
    for i in flagged:
        elems |= mesh.funcs[i].elems
    support_cps = set()
    for el in elems:
        support_cps |= {f.idx for f in el.funcs}
    had_damage = any(phi_old[i] <= policy.phi_bound for i in support_cps)
    return "propagation" if had_damage else "nucleation"


def adapt_after_step(mesh: LRMesh, phi_new: np.ndarray, phi_old: np.ndarray,
                     policy: RefinementPolicy):
    """Refinement decision after an accepted step.

    Returns (action, refinement_result|None): action is "none",
    "refined_continue" (propagation: migrate both states and go on) or
    "refined_recompute" (nucleation: restore t_n and redo the step).
    Refinement runs in one-level rounds, re-flagging on the exactly
    transferred phase field, so every control point at or below the
    threshold ends fully refined while the transition zone stays graded.
    """
    flagged = flag_functions(mesh, phi_new, policy)
    if not flagged:
        return "none", None
    kind = classify_refinement(mesh, flagged, phi_old, policy)

    def flag_round(m, current_value):
        value = current_value(phi_new)
        return [f for f in m.funcs if f.alive and value(f) <= policy.phi_bound]

    result = refine_rounds(mesh, flag_round, policy.max_depth)
    if kind == "nucleation" and policy.recompute_on_nucleation:
        return "refined_recompute", result
    return "refined_continue", result


def depth_warning(mesh: LRMesh, phi: np.ndarray, policy: RefinementPolicy) -> bool:
    """Diagnostic: damage sitting on elements more than one level too coarse."""
    dmin = mesh.function_min_depths()
    low = phi <= policy.phi_bound
    return bool(np.any(dmin[low] < policy.max_depth - 1))
