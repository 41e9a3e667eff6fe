"""File outputs: mesh snapshots, CSV traces, event log, LR mesh dumps.

Snapshot format is legacy ASCII VTK unstructured grids: each element is
tessellated into quads at a configurable sampling density per knot span,
with point fields (position, phi, gamma) and cell fields (depth, max H).
Fully cracked elements (phi below a threshold on all sample points) can be
dropped, reproducing the visualization convention of removing elements with
phi < 0.001.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .assembly.cache import ElementQuadCache
from .lrmesh.dump import dump_parametric_mesh, mesh_polylines
from .lrmesh.mesh import LRMesh

CSV_HEADER = "t,dt,n_nr,pi_el,pi_frac,n_cp"


def write_csv_header(path: str | Path):
    Path(path).write_text(CSV_HEADER + "\n")


def append_csv_row(path: str | Path, t, dt, n_nr, pi_el, pi_frac, n_cp):
    with open(path, "a") as fh:
        fh.write(f"{t:.12g},{dt:.12g},{n_nr},{pi_el:.12g},{pi_frac:.12g},{n_cp}\n")


class EventLog:
    """Machine-parseable run log: one key=value record per line."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.records: list[dict] = []
        if self.path is not None:
            self.path.write_text("")

    def emit(self, **kw):
        self.records.append(kw)
        if self.path is not None:
            line = " ".join(f"{k}={_fmt(v)}" for k, v in kw.items())
            with open(self.path, "a") as fh:
                fh.write(line + "\n")

    @staticmethod
    def parse(path: str | Path) -> list[dict]:
        records = []
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            rec = {}
            for tok in line.split():
                k, v = tok.split("=", 1)
                try:
                    rec[k] = int(v)
                except ValueError:
                    try:
                        rec[k] = float(v)
                    except ValueError:
                        rec[k] = v
            records.append(rec)
        return records


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def sample_fields(mesh: LRMesh, cache: ElementQuadCache, x: np.ndarray,
                  phi: np.ndarray, gamma_qp: np.ndarray | None,
                  density: int = 2):
    """Tessellate every element at (density+1)^2 points; returns per-element
    sample arrays (points, phi, gamma)."""
    s = density
    pts_out, phi_out, gam_out = [], [], []
    for e, el in enumerate(mesh.elements):
        us = np.linspace(float(el.u0), float(el.u1), s + 1)
        vs = np.linspace(float(el.v0), float(el.v1), s + 1)
        P = np.empty(((s + 1) * (s + 1), 3))
        F = np.empty((s + 1) * (s + 1))
        Gm = np.empty((s + 1) * (s + 1))
        for j, v in enumerate(vs):
            for i, u in enumerate(us):
                ids, N, dN, ddN = mesh.evaluate_basis(e, (u, v))
                k = j * (s + 1) + i
                P[k] = N @ x[ids]
                F[k] = N @ phi[ids]
        if gamma_qp is not None:
            # inverse-distance blend of the element's quadrature values
            quv = cache.qp_uv[e]
            for j, v in enumerate(vs):
                for i, u in enumerate(us):
                    k = j * (s + 1) + i
                    d2 = (quv[:, 0] - u) ** 2 + (quv[:, 1] - v) ** 2 + 1e-18
                    w = 1.0 / d2
                    Gm[k] = float((w * gamma_qp[e]).sum() / w.sum())
        else:
            Gm[:] = 0.0
        pts_out.append(P)
        phi_out.append(F)
        gam_out.append(Gm)
    return pts_out, phi_out, gam_out


def write_vtk_snapshot(path: str | Path, mesh: LRMesh, cache: ElementQuadCache,
                       x: np.ndarray, phi: np.ndarray,
                       gamma_qp: np.ndarray | None = None,
                       H_qp: np.ndarray | None = None,
                       density: int = 2, remove_cracked: bool = False,
                       crack_threshold: float = 1e-3):
    """Legacy ASCII VTK unstructured-grid snapshot of the current surface."""
    pts, phis, gams = sample_fields(mesh, cache, x, phi, gamma_qp, density)
    s = density
    keep = []
    for e in range(len(mesh.elements)):
        if remove_cracked and phis[e].max() < crack_threshold:
            continue
        keep.append(e)

    buf = io.StringIO()
    npts = len(keep) * (s + 1) ** 2
    ncell = len(keep) * s * s
    buf.write("# vtk DataFile Version 3.0\nshellfrac snapshot\nASCII\n")
    buf.write("DATASET UNSTRUCTURED_GRID\n")
    buf.write(f"POINTS {npts} double\n")
    for e in keep:
        for p in pts[e]:
            buf.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
    buf.write(f"\nCELLS {ncell} {5 * ncell}\n")
    for ke, e in enumerate(keep):
        base = ke * (s + 1) ** 2
        for j in range(s):
            for i in range(s):
                a = base + j * (s + 1) + i
                b, c, d = a + 1, a + s + 2, a + s + 1
                buf.write(f"4 {a} {b} {c} {d}\n")
    buf.write(f"\nCELL_TYPES {ncell}\n")
    buf.write("\n".join(["9"] * ncell) + "\n")
    buf.write(f"\nPOINT_DATA {npts}\n")
    buf.write("SCALARS phi double 1\nLOOKUP_TABLE default\n")
    for e in keep:
        for val in phis[e]:
            buf.write(f"{val:.9g}\n")
    buf.write("SCALARS gamma double 1\nLOOKUP_TABLE default\n")
    for e in keep:
        for val in gams[e]:
            buf.write(f"{val:.9g}\n")
    buf.write(f"\nCELL_DATA {ncell}\n")
    buf.write("SCALARS depth int 1\nLOOKUP_TABLE default\n")
    for e in keep:
        d = mesh.element_depth(mesh.elements[e])
        buf.write("\n".join([str(d)] * (s * s)) + "\n")
    buf.write("SCALARS H_max double 1\nLOOKUP_TABLE default\n")
    for e in keep:
        h = float(H_qp[e].max()) if H_qp is not None else 0.0
        buf.write("\n".join([f"{h:.9g}"] * (s * s)) + "\n")
    Path(path).write_text(buf.getvalue())


def write_parametric_mesh_vtk(path: str | Path, mesh: LRMesh):
    """Parametric LR mesh (lines + element depth) as VTK polylines."""
    polys = mesh_polylines(mesh)
    npts = sum(len(p) for p in polys)
    buf = io.StringIO()
    buf.write("# vtk DataFile Version 3.0\nshellfrac parametric mesh\nASCII\n")
    buf.write("DATASET POLYDATA\n")
    buf.write(f"POINTS {npts} double\n")
    for poly in polys:
        for (u, v) in poly:
            buf.write(f"{u:.9g} {v:.9g} 0\n")
    buf.write(f"\nLINES {len(polys)} {sum(len(p) + 1 for p in polys)}\n")
    k = 0
    for poly in polys:
        buf.write(str(len(poly)) + " " + " ".join(str(k + i) for i in range(len(poly))) + "\n")
        k += len(poly)
    Path(path).write_text(buf.getvalue())


def write_mesh_dump(path: str | Path, mesh: LRMesh):
    Path(path).write_text(dump_parametric_mesh(mesh))
