"""Debug dump of the parametric LR mesh (lines + element depths)."""

from __future__ import annotations

from .mesh import LRMesh


def dump_parametric_mesh(mesh: LRMesh) -> str:
    """Plain-text dump: one record per mesh line and per element."""
    out = [f"# lrmesh degree=({mesh.degree[0]},{mesh.degree[1]}) "
           f"functions={mesh.n_funcs} elements={len(mesh.elements)}"]
    for (orient, pos) in sorted(mesh.lines, key=lambda k: (k[0], k[1])):
        for a, b, m in mesh.lines[(orient, pos)]:
            out.append(f"line {orient} {float(pos):.12g} span {float(a):.12g} "
                       f"{float(b):.12g} mult {m}")
    for el in mesh.elements:
        out.append(f"elem {float(el.u0):.12g} {float(el.u1):.12g} "
                   f"{float(el.v0):.12g} {float(el.v1):.12g} "
                   f"depth {mesh.element_depth(el)} nfuncs {len(el.funcs)}")
    return "\n".join(out) + "\n"


def mesh_polylines(mesh: LRMesh) -> list[list[tuple[float, float]]]:
    """Mesh lines as 2D polylines, for the unstructured-mesh snapshot writer."""
    polys = []
    for (orient, pos), segs in mesh.lines.items():
        for a, b, _ in segs:
            if orient == "u":
                polys.append([(float(pos), float(a)), (float(pos), float(b))])
            else:
                polys.append([(float(a), float(pos)), (float(b), float(pos))])
    return polys
