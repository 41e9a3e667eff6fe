"""Locally refinable NURBS meshes.

The mesh is a collection of mesh lines in the unit parameter square, a set of
elements (maximal rectangles not crossed by any line), and a set of basis
functions, each owning a pair of local knot vectors plus a weight and a
control point.  Refinement works by mesh-line extension: every function whose
support is fully traversed by a line is split by single knot insertion, and
splitting cascades until no function is traversed.  Control data propagates
in projective (weighted) coordinates, so geometry and any control field are
reproduced exactly; the bookkeeping is returned as a sparse transfer map.

Line positions are exact rationals (`fractions.Fraction`), which makes line
identity and containment tests immune to floating-point drift: a refinement
position is always of the form k / (n * 2^d).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from ..errors import DomainError, MeshLineError, TransferShapeError
from .knots import local_bspline

Frac = Fraction


@dataclass(frozen=True)
class MeshLine:
    """A mesh line segment in parameter space.

    `orientation` is "u" for a u-constant (vertical) line and "v" for a
    v-constant (horizontal) line; `position` is the constant coordinate and
    (start, stop) the extent in the other coordinate.
    """

    orientation: str
    position: Fraction
    start: Fraction
    stop: Fraction
    multiplicity: int = 1

    def __post_init__(self):
        if self.orientation not in ("u", "v"):
            raise MeshLineError(f"bad orientation {self.orientation!r}")
        if not (self.start < self.stop):
            raise MeshLineError("empty mesh line span")
        if self.multiplicity < 1:
            raise MeshLineError("multiplicity must be >= 1")


class LRBasisFunction:
    """One LR NURBS basis function: local knot vectors, weight, control point."""

    __slots__ = ("ku", "kv", "w", "cpw", "elems", "alive", "children",
                 "pending", "idx", "proj", "bbox")

    def __init__(self, ku: tuple, kv: tuple, w: float, cpw: np.ndarray):
        self.ku = ku                  # tuple of Fraction, length p1+2
        self.kv = kv                  # tuple of Fraction, length p2+2
        self.w = w                    # accumulated NURBS weight
        self.cpw = cpw                # projective control point, w * P
        self.elems: set = set()
        self.alive = True
        self.children: list = []
        self.pending = -1             # target refinement depth, -1 = none
        self.idx = -1
        self.proj: dict | None = None  # old-index -> projective coefficient
        self.bbox = (float(ku[0]), float(ku[-1]), float(kv[0]), float(kv[-1]))

    @property
    def support(self):
        return (self.ku[0], self.ku[-1], self.kv[0], self.kv[-1])

    def supports(self, el: "LRElement") -> bool:
        return (self.ku[0] <= el.u0 and el.u1 <= self.ku[-1]
                and self.kv[0] <= el.v0 and el.v1 <= self.kv[-1])

    def greville(self) -> tuple[float, float]:
        p1 = len(self.ku) - 2
        p2 = len(self.kv) - 2
        gu = sum(self.ku[1:p1 + 1]) / p1
        gv = sum(self.kv[1:p2 + 1]) / p2
        return float(gu), float(gv)

    @property
    def control_point(self) -> np.ndarray:
        return self.cpw / self.w


class LRElement:
    """A parametric rectangle not crossed by any mesh line."""

    __slots__ = ("u0", "u1", "v0", "v1", "funcs", "idx",
                 "u0f", "u1f", "v0f", "v1f")

    def __init__(self, u0, u1, v0, v1):
        self.u0, self.u1, self.v0, self.v1 = u0, u1, v0, v1
        self.u0f, self.u1f = float(u0), float(u1)
        self.v0f, self.v1f = float(v0), float(v1)
        self.funcs: set[LRBasisFunction] = set()
        self.idx = -1

    @property
    def area(self) -> Fraction:
        return (self.u1 - self.u0) * (self.v1 - self.v0)

    def contains(self, u: float, v: float) -> bool:
        return (float(self.u0) <= u <= float(self.u1)
                and float(self.v0) <= v <= float(self.v1))

    def __repr__(self):
        return f"LRElement([{self.u0},{self.u1}]x[{self.v0},{self.v1}])"


@dataclass
class RefinementResult:
    """Mesh-producing operation result: new mesh, transfer map, change flag."""

    mesh: "LRMesh"
    transfer: sparse.csr_matrix
    changed: bool


def _merge_intervals(intervals: list, start, stop, mult: int) -> list:
    """Merge (start, stop, mult) into a sorted disjoint interval list,
    keeping the pointwise maximum multiplicity."""
    points = {start, stop}
    for a, b, _ in intervals:
        points.update((a, b))
    pts = sorted(points)
    out = []
    for a, b in zip(pts[:-1], pts[1:]):
        m = 0
        for ia, ib, im in intervals:
            if ia <= a and b <= ib:
                m = max(m, im)
        if start <= a and b <= stop:
            m = max(m, mult)
        if m > 0:
            out.append((a, b, m))
    # coalesce adjacent intervals with equal multiplicity
    merged = []
    for seg in out:
        if merged and merged[-1][1] == seg[0] and merged[-1][2] == seg[2]:
            merged[-1] = (merged[-1][0], seg[1], seg[2])
        else:
            merged.append(list(seg))
    return [tuple(s) for s in merged]


def _coverage(intervals: list, start, stop) -> int:
    """Minimum multiplicity of the line over [start, stop]; 0 if any gap."""
    if start >= stop:
        return 0
    cov = None
    pos = start
    for a, b, m in intervals:
        if b <= pos:
            continue
        if a > pos:
            return 0
        cov = m if cov is None else min(cov, m)
        pos = b
        if pos >= stop:
            return cov or 0
    return 0


class LRMesh:
    """LR NURBS mesh on the unit parameter square.

    Mutating operations are module-internal; the public ops
    (`insert_mesh_line`, `refine_structured`) clone the mesh and return a
    :class:`RefinementResult`, so meshes held by callers stay immutable.
    """

    def __init__(self, degree: tuple[int, int]):
        self.degree = degree
        self.lines: dict = {}          # (orient, Fraction pos) -> interval list
        self._positions = {"u": [], "v": []}   # sorted Fraction positions
        self.funcs: list[LRBasisFunction] = []
        self.elements: list[LRElement] = []
        self._bykey: dict = {}
        self._w0u: Fraction = Frac(1)  # initial element widths, for depth
        self._w0v: Fraction = Frac(1)
        self._depth_cache: dict = {}
        self._depths_arr = None
        self._fmin_depth = None

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------
    @classmethod
    def tensor_patch(cls, degree: tuple[int, int], nu: int, nv: int,
                     control_points: np.ndarray,
                     weights: np.ndarray | None = None) -> "LRMesh":
        """Build an open-knot tensor-product patch on [0,1]^2.

        `control_points` has shape ((nu+p1) * (nv+p2), 3) in row-major order
        with the u index running fastest.
        """
        p1, p2 = degree
        mesh = cls(degree)
        mesh._w0u = Frac(1, nu)
        mesh._w0v = Frac(1, nv)

        gu = [Frac(0)] * (p1 + 1) + [Frac(j, nu) for j in range(1, nu)] + [Frac(1)] * (p1 + 1)
        gv = [Frac(0)] * (p2 + 1) + [Frac(j, nv) for j in range(1, nv)] + [Frac(1)] * (p2 + 1)

        for j in range(nu + 1):
            mult = p1 + 1 if j in (0, nu) else 1
            mesh._add_line_raw("u", Frac(j, nu), Frac(0), Frac(1), mult)
        for j in range(nv + 1):
            mult = p2 + 1 if j in (0, nv) else 1
            mesh._add_line_raw("v", Frac(j, nv), Frac(0), Frac(1), mult)

        for j in range(nv):
            for i in range(nu):
                mesh.elements.append(LRElement(Frac(i, nu), Frac(i + 1, nu),
                                               Frac(j, nv), Frac(j + 1, nv)))

        n_u = nu + p1
        n_v = nv + p2
        cps = np.asarray(control_points, dtype=float).reshape(n_u * n_v, 3)
        if weights is None:
            weights = np.ones(n_u * n_v)
        weights = np.asarray(weights, dtype=float).ravel()

        for jv in range(n_v):
            kv = tuple(gv[jv:jv + p2 + 2])
            for ju in range(n_u):
                ku = tuple(gu[ju:ju + p1 + 2])
                k = jv * n_u + ju
                f = LRBasisFunction(ku, kv, float(weights[k]),
                                    weights[k] * cps[k].copy())
                mesh.funcs.append(f)
                mesh._bykey[(ku, kv)] = f

        for el in mesh.elements:
            for f in mesh.funcs:
                if f.supports(el):
                    f.elems.add(el)
                    el.funcs.add(f)
        mesh._finalize_indices()
        return mesh

    def _add_line_raw(self, orient, pos, start, stop, mult):
        key = (orient, pos)
        if key not in self.lines:
            self.lines[key] = []
            lst = self._positions[orient]
            lo, hi = 0, len(lst)
            while lo < hi:
                mid = (lo + hi) // 2
                if lst[mid] < pos:
                    lo = mid + 1
                else:
                    hi = mid
            lst.insert(lo, pos)
        self.lines[key] = _merge_intervals(self.lines[key], start, stop, mult)

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------
    @property
    def n_funcs(self) -> int:
        return len(self.funcs)

    def element_depth(self, el: LRElement) -> int:
        key = (el.u1 - el.u0, el.v1 - el.v0)
        d = self._depth_cache.get(key)
        if d is None:
            lu = _dyadic_level(self._w0u, key[0])
            lv = _dyadic_level(self._w0v, key[1])
            d = min(lu, lv)
            self._depth_cache[key] = d
        return d

    def element_depths(self) -> np.ndarray:
        """Depth of every element as an int array (cached; meshes are
        immutable once finalized)."""
        if getattr(self, "_depths_arr", None) is None:
            self._depths_arr = np.array([self.element_depth(el)
                                         for el in self.elements], dtype=int)
        return self._depths_arr

    def function_min_depths(self) -> np.ndarray:
        """Minimum element depth over each function's support (cached)."""
        if getattr(self, "_fmin_depth", None) is None:
            d = self.element_depths()
            self._fmin_depth = np.array(
                [min(d[el.idx] for el in f.elems) for f in self.funcs], dtype=int)
        return self._fmin_depth

    def control_points(self) -> np.ndarray:
        return np.array([f.cpw / f.w for f in self.funcs])

    def weights(self) -> np.ndarray:
        return np.array([f.w for f in self.funcs])

    def greville_points(self) -> np.ndarray:
        return np.array([f.greville() for f in self.funcs])

    def element_function_ids(self, e: int) -> list[int]:
        return sorted(f.idx for f in self.elements[e].funcs)

    def find_element(self, u: float, v: float) -> int:
        for el in self.elements:
            if el.contains(u, v):
                return el.idx
        raise DomainError(f"point ({u},{v}) outside the mesh")

    def _line_coverage(self, orient, pos, start, stop) -> int:
        iv = self.lines.get((orient, pos))
        return _coverage(iv, start, stop) if iv else 0

    # ------------------------------------------------------------------
    # evaluation
    # ------------------------------------------------------------------
    def evaluate_basis(self, element: int, point: Sequence[float]):
        """Rationalized basis values and parametric derivatives on an element.

        Returns (ids, N, dN, ddN) where N has shape (n_e,), dN (2, n_e) and
        ddN (3, n_e) ordered [uu, uv, vv], for the functions listed in `ids`.
        """
        el = self.elements[element]
        u, v = float(point[0]), float(point[1])
        if not el.contains(u, v):
            raise DomainError(
                f"point ({u},{v}) outside element [{el.u0},{el.u1}]x[{el.v0},{el.v1}]")
        funcs = sorted(el.funcs, key=lambda f: f.idx)
        ids = [f.idx for f in funcs]
        ku = np.array([[float(t) for t in f.ku] for f in funcs])
        kv = np.array([[float(t) for t in f.kv] for f in funcs])
        w = np.array([f.w for f in funcs])
        Bu, dBu, ddBu = (a[:, 0] for a in local_bspline(ku, np.array([u])))
        Bv, dBv, ddBv = (a[:, 0] for a in local_bspline(kv, np.array([v])))
        return ids, *rationalize(w, Bu, dBu, ddBu, Bv, dBv, ddBv)

    # ------------------------------------------------------------------
    # refinement (mutating internals)
    # ------------------------------------------------------------------
    def _clone(self) -> "LRMesh":
        m = LRMesh(self.degree)
        m._w0u, m._w0v = self._w0u, self._w0v
        m.lines = {k: list(v) for k, v in self.lines.items()}
        m._positions = {o: list(p) for o, p in self._positions.items()}
        fmap = {}
        for f in self.funcs:
            g = LRBasisFunction(f.ku, f.kv, f.w, f.cpw.copy())
            g.idx = f.idx
            fmap[f] = g
            m.funcs.append(g)
            m._bykey[(g.ku, g.kv)] = g
        for el in self.elements:
            e2 = LRElement(el.u0, el.u1, el.v0, el.v1)
            e2.idx = el.idx
            e2.funcs = {fmap[f] for f in el.funcs}
            for g in e2.funcs:
                g.elems.add(e2)
            m.elements.append(e2)
        return m

    def _snapshot_projective(self):
        for f in self.funcs:
            f.proj = {f.idx: f.w}

    def _finalize_indices(self):
        for i, f in enumerate(self.funcs):
            f.idx = i
        for i, el in enumerate(self.elements):
            el.idx = i
        self._depths_arr = None
        self._fmin_depth = None

    def _finalize(self, n_old: int) -> sparse.csr_matrix:
        self.funcs = [f for f in self.funcs if f.alive]
        self._bykey = {(f.ku, f.kv): f for f in self.funcs}
        self._finalize_indices()
        rows, cols, data = [], [], []
        for f in self.funcs:
            for i, c in f.proj.items():
                rows.append(f.idx)
                cols.append(i)
                data.append(c / f.w)
            f.proj = None
            f.pending = -1
            f.children = []
        T = sparse.csr_matrix((data, (rows, cols)), shape=(len(self.funcs), n_old))
        return T

    def _split_elements(self, orient, pos, start, stop):
        posf, startf, stopf = float(pos), float(start), float(stop)
        new = []
        for el in self.elements:
            # float prefilter, exact confirmation
            if orient == "u":
                if not (el.u0f - 1e-12 < posf < el.u1f + 1e-12
                        and startf - 1e-12 <= el.v0f and el.v1f <= stopf + 1e-12):
                    new.append(el)
                    continue
                hit = el.u0 < pos < el.u1 and start <= el.v0 and el.v1 <= stop
            else:
                if not (el.v0f - 1e-12 < posf < el.v1f + 1e-12
                        and startf - 1e-12 <= el.u0f and el.u1f <= stopf + 1e-12):
                    new.append(el)
                    continue
                hit = el.v0 < pos < el.v1 and start <= el.u0 and el.u1 <= stop
            if not hit:
                new.append(el)
                continue
            if orient == "u":
                e1 = LRElement(el.u0, pos, el.v0, el.v1)
                e2 = LRElement(pos, el.u1, el.v0, el.v1)
            else:
                e1 = LRElement(el.u0, el.u1, el.v0, pos)
                e2 = LRElement(el.u0, el.u1, pos, el.v1)
            e1.funcs = set(el.funcs)
            e2.funcs = set(el.funcs)
            for f in el.funcs:
                f.elems.discard(el)
                f.elems.add(e1)
                f.elems.add(e2)
            new.extend((e1, e2))
        self.elements = new

    def _split_function(self, f: LRBasisFunction, orient: str, pos: Fraction):
        """Single knot insertion of `pos` into f's local vector along `orient`."""
        knots = f.ku if orient == "u" else f.kv
        p = len(knots) - 2
        if pos >= knots[p]:
            c1 = 1.0
        else:
            c1 = float((pos - knots[0]) / (knots[p] - knots[0]))
        if pos <= knots[1]:
            c2 = 1.0
        else:
            c2 = float((knots[p + 1] - pos) / (knots[p + 1] - knots[1]))
        k1 = tuple(sorted(knots[:p + 1] + (pos,)))
        k2 = tuple(sorted(knots[1:] + (pos,)))

        children = []
        for kk, c in ((k1, c1), (k2, c2)):
            key = (kk, f.kv) if orient == "u" else (f.ku, kk)
            tgt = self._bykey.get(key)
            if tgt is None or not tgt.alive:
                tgt = LRBasisFunction(key[0], key[1], 0.0, np.zeros(3))
                tgt.proj = {}
                tgt.elems = {el for el in f.elems if tgt.supports(el)}
                for el in tgt.elems:
                    el.funcs.add(tgt)
                self.funcs.append(tgt)
                self._bykey[key] = tgt
            tgt.w += c * f.w
            tgt.cpw = tgt.cpw + c * f.cpw
            for i, q in f.proj.items():
                tgt.proj[i] = tgt.proj.get(i, 0.0) + c * q
            tgt.pending = max(tgt.pending, f.pending)
            children.append(tgt)

        f.alive = False
        f.children = children
        for el in f.elems:
            el.funcs.discard(f)
        f.elems = set()
        return children

    def _traversing_position(self, f: LRBasisFunction):
        """First mesh line that fully traverses f's support, or None."""
        from bisect import bisect_left, bisect_right

        u0, u1, v0, v1 = f.support
        pu = self._positions["u"]
        for k in range(bisect_right(pu, u0), bisect_left(pu, u1)):
            pos = pu[k]
            if self._line_coverage("u", pos, v0, v1) > f.ku.count(pos):
                return "u", pos
        pv = self._positions["v"]
        for k in range(bisect_right(pv, v0), bisect_left(pv, v1)):
            pos = pv[k]
            if self._line_coverage("v", pos, u0, u1) > f.kv.count(pos):
                return "v", pos
        return None

    def _settle(self, queue: list[LRBasisFunction]):
        """Split queued functions (and their offspring) until none is traversed."""
        changed = False
        while queue:
            f = queue.pop()
            if not f.alive:
                continue
            hit = self._traversing_position(f)
            if hit is None:
                continue
            children = self._split_function(f, *hit)
            changed = True
            queue.extend(children)
        return changed

    def _insert_line(self, line: MeshLine) -> bool:
        """Register a line, split crossed elements and traversed functions."""
        orient, pos = line.orientation, line.position
        perp = "v" if orient == "u" else "u"
        for end in (line.start, line.stop):
            if not any(a <= pos <= b
                       for a, b, _ in self.lines.get((perp, end), [])):
                raise MeshLineError(
                    f"line endpoint {end} not on an existing perpendicular mesh line")
        self._add_line_raw(orient, pos, line.start, line.stop, line.multiplicity)
        self._split_elements(orient, pos, line.start, line.stop)
        # every function whose support box meets the segment is a candidate
        posf, startf, stopf = float(pos), float(line.start), float(line.stop)
        queue = []
        for f in self.funcs:
            if not f.alive:
                continue
            u0f, u1f, v0f, v1f = f.bbox
            if orient == "u":
                if (u0f - 1e-12 < posf < u1f + 1e-12
                        and not (v1f <= startf - 1e-12 or v0f >= stopf + 1e-12)):
                    queue.append(f)
            else:
                if (v0f - 1e-12 < posf < v1f + 1e-12
                        and not (u1f <= startf - 1e-12 or u0f >= stopf + 1e-12)):
                    queue.append(f)
        return self._settle(queue)


def _dyadic_level(w0: Fraction, w: Fraction) -> int:
    ratio = w0 / w
    if ratio.denominator == 1 and (ratio.numerator & (ratio.numerator - 1)) == 0:
        return ratio.numerator.bit_length() - 1
    return int(np.floor(np.log2(float(ratio))))


def rationalize(w, Bu, dBu, ddBu, Bv, dBv, ddBv):
    """NURBS rationalization with first and second parametric derivatives.

    Inputs are per-function univariate values; returns (N, dN, ddN) with
    dN rows [u, v] and ddN rows [uu, uv, vv].
    """
    B = w * Bu * Bv
    Bu_ = w * dBu * Bv
    Bv_ = w * Bu * dBv
    Buu = w * ddBu * Bv
    Buv = w * dBu * dBv
    Bvv = w * Bu * ddBv
    W = B.sum()
    Wu, Wv = Bu_.sum(), Bv_.sum()
    Wuu, Wuv, Wvv = Buu.sum(), Buv.sum(), Bvv.sum()
    N = B / W
    Nu = Bu_ / W - B * Wu / W**2
    Nv = Bv_ / W - B * Wv / W**2
    Nuu = Buu / W - (2 * Bu_ * Wu + B * Wuu) / W**2 + 2 * B * Wu**2 / W**3
    Nvv = Bvv / W - (2 * Bv_ * Wv + B * Wvv) / W**2 + 2 * B * Wv**2 / W**3
    Nuv = (Buv / W - (Bu_ * Wv + Bv_ * Wu + B * Wuv) / W**2
           + 2 * B * Wu * Wv / W**3)
    return N, np.stack([Nu, Nv]), np.stack([Nuu, Nuv, Nvv])


# ----------------------------------------------------------------------
# public operations
# ----------------------------------------------------------------------
def insert_mesh_line(mesh: LRMesh, line: MeshLine) -> RefinementResult:
    """Insert a mesh line, splitting every fully traversed function.

    Returns a new mesh plus the transfer map expressing new control values
    as convex combinations of old ones.  If the line traverses no function
    the result is flagged unchanged (identity transfer).
    """
    m = mesh._clone()
    n_old = m.n_funcs
    m._snapshot_projective()
    changed = m._insert_line(line)
    T = m._finalize(n_old)
    return RefinementResult(m, T, changed)


def refine_structured(mesh: LRMesh, function_ids: Iterable[int],
                      target_depth: int) -> RefinementResult:
    """Structured-mesh refinement of the flagged functions.

    For each flagged function, mesh lines bisecting every knot span of its
    support are inserted in both directions (spanning the full support in
    the perpendicular direction); newly created functions are refined
    recursively until every element of the original supports has reached
    `target_depth`.  Idempotent once the depth is reached.
    """
    ids = list(function_ids)
    m = mesh._clone()
    n_old = m.n_funcs
    m._snapshot_projective()
    changed = False

    queue = []
    for i in ids:
        f = m.funcs[i]
        f.pending = max(f.pending, target_depth)
        queue.append(f)

    while queue:
        f = queue.pop()
        if not f.alive:
            queue.extend(c for c in f.children if c.pending >= 0)
            continue
        if f.pending < 0:
            continue
        lines = _bisection_lines(f, f.pending, m._w0u, m._w0v)
        if not lines:
            f.pending = -1
            continue
        for line in lines:
            changed |= m._insert_line(line)
        if f.alive:
            # all coarse spans bisected but the function survived the settle
            # pass: nothing further to insert for it
            f.pending = -1
            continue
        queue.extend(c for c in f.children if c.pending >= 0)

    T = m._finalize(n_old)
    return RefinementResult(m, T, changed)


def _bisection_lines(f: LRBasisFunction, depth: int,
                     w0u: Fraction, w0v: Fraction) -> list[MeshLine]:
    """Mid-span lines across f's support, for spans coarser than depth `depth`.

    Span widths are compared against the dyadic target width w0 / 2^depth, so
    refinement stops exactly at the prescribed depth and never subdivides
    spans that are already fine enough.
    """
    u0, u1, v0, v1 = f.support
    wu = w0u / 2**depth
    wv = w0v / 2**depth
    lines = []
    for a, b in zip(f.ku[:-1], f.ku[1:]):
        if b - a > wu:
            lines.append(MeshLine("u", (a + b) / 2, v0, v1))
    for a, b in zip(f.kv[:-1], f.kv[1:]):
        if b - a > wv:
            lines.append(MeshLine("v", (a + b) / 2, u0, u1))
    return lines


def refine_rounds(mesh: LRMesh, flag_round, max_depth: int) -> RefinementResult:
    """Iterative one-level refinement until the flagging callback is empty.

    `flag_round(m, current_value)` receives the working mesh and a callable
    mapping an alive function to its current control value of the driving
    field (evaluated through the in-flight projective coefficients, i.e. the
    exactly transferred value); it returns the functions to refine by one
    level.  A function at mixed element depths refines to (min depth + 1).
    Because each round re-evaluates the flags on the transferred field, the
    refined zone tightens level by level toward the flagged feature instead
    of refining whole coarse supports to full depth.
    """
    m = mesh._clone()
    n_old = m.n_funcs
    m._snapshot_projective()
    changed = False

    def current_value(field):
        def value(f):
            return sum(c * field[i] for i, c in f.proj.items()) / f.w
        return value

    while True:
        flags = flag_round(m, current_value)
        flags = [f for f in flags
                 if f.alive and any(m.element_depth(el) < max_depth
                                    for el in f.elems)]
        if not flags:
            break
        queue = []
        for f in flags:
            dmin = min(m.element_depth(el) for el in f.elems)
            f.pending = max(f.pending, min(dmin + 1, max_depth))
            queue.append(f)
        while queue:
            f = queue.pop()
            if not f.alive:
                queue.extend(c for c in f.children if c.pending >= 0)
                continue
            if f.pending < 0:
                continue
            lines = _bisection_lines(f, f.pending, m._w0u, m._w0v)
            if not lines:
                f.pending = -1
                continue
            for line in lines:
                changed |= m._insert_line(line)
            if f.alive:
                f.pending = -1
                continue
            queue.extend(c for c in f.children if c.pending >= 0)

    T = m._finalize(n_old)
    return RefinementResult(m, T, changed)


def transfer_field(transfer: sparse.csr_matrix, values: np.ndarray) -> np.ndarray:
    """Map old control values to the refined mesh (exact for spline fields)."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] != transfer.shape[1]:
        raise TransferShapeError(
            f"expected {transfer.shape[1]} control values, got {values.shape[0]}")
    return transfer @ values
