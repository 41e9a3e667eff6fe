"""Global sparse system: dof bookkeeping, constraints, assembly.

The coupled unknown vector is ordered [all displacement dofs; all phase
dofs]: dof 3i..3i+2 are the x/y/z position of control point i and dof
3*n_cp + i its phase value.  Constraints are handled by a reduction matrix
C so that u = C u_red + (values of fixed/prescribed dofs), supporting fixed
dofs, time-prescribed dofs, and identification pairs (slave follows master
with a constant offset, used for periodic seams, symmetry planes and
rotation clamping).

Tangent assembly uses a fixed sparsity pattern per mesh: element blocks are
flattened into one value stream and summed into the CSR data array with one
bincount, which keeps per-iteration assembly cost at a few tens of
milliseconds even for large meshes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ..errors import ConstraintConflictError
from .cache import ElementQuadCache


@dataclass
class Constraints:
    """Boundary-condition table over coupled dofs.

    fixed: dof -> constant value (absolute position / phase value)
    prescribed: dof -> callable t -> (value, velocity, acceleration)
    pairs: (slave_dof, master_dof, offset): slave = master + offset
    """

    n_cp: int
    fixed: dict = field(default_factory=dict)
    prescribed: dict = field(default_factory=dict)
    pairs: list = field(default_factory=list)

    def xdof(self, node: int, comp: int) -> int:
        return 3 * node + comp

    def pdof(self, node: int) -> int:
        return 3 * self.n_cp + node

    def fix(self, dof: int, value: float):
        if dof in self.prescribed:
            raise ConstraintConflictError(f"dof {dof} already prescribed", dof)
        old = self.fixed.get(dof)
        if old is not None and old != value:
            raise ConstraintConflictError(
                f"dof {dof} fixed to both {old} and {value}", dof)
        self.fixed[dof] = value

    def prescribe(self, dof: int, fn):
        if dof in self.fixed:
            raise ConstraintConflictError(f"dof {dof} already fixed", dof)
        if dof in self.prescribed:
            raise ConstraintConflictError(f"dof {dof} prescribed twice", dof)
        self.prescribed[dof] = fn

    def identify(self, slave: int, master: int, offset: float = 0.0):
        if slave in self.fixed or slave in self.prescribed:
            raise ConstraintConflictError(f"dof {slave} already constrained", slave)
        if any(s == slave for s, _, _ in self.pairs):
            raise ConstraintConflictError(f"dof {slave} slaved twice", slave)
        self.pairs.append((slave, master, offset))

    def identify_nodes(self, slave: int, master: int,
                       offsets=(0.0, 0.0, 0.0), phase: bool = True):
        """Identify all displacement dofs (and optionally phase) of two nodes."""
        for c in range(3):
            self.identify(self.xdof(slave, c), self.xdof(master, c), offsets[c])
        if phase:
            self.identify(self.pdof(slave), self.pdof(master), 0.0)


def apply_constraints(cache: ElementQuadCache, constraints: Constraints) -> "GlobalSystem":
    """Validate the constraint table and build the reduced-system operator."""
    return GlobalSystem(cache, constraints)


class GlobalSystem:
    """Reduction operator plus fixed-pattern assembly for one mesh."""

    def __init__(self, cache: ElementQuadCache, constraints: Constraints):
        self.cache = cache
        self.constraints = constraints
        n = cache.n_dof
        self.n_dof = n

        con = constraints
        slave_of = {}
        for s, m, off in con.pairs:
            if s in slave_of:
                raise ConstraintConflictError(f"dof {s} slaved twice", s)
            slave_of[s] = (m, off)
        # resolve chains slave -> ultimate master, accumulating offsets
        resolved = {}
        for s in slave_of:
            m, off = slave_of[s]
            seen = {s}
            while m in slave_of:
                if m in seen:
                    raise ConstraintConflictError(f"identification cycle at dof {m}", m)
                seen.add(m)
                m2, off2 = slave_of[m]
                m, off = m2, off + off2
            resolved[s] = (m, off)
        self.slave_of = resolved

        bound = set(con.fixed) | set(con.prescribed)
        for s, (m, off) in resolved.items():
            if s in bound:
                raise ConstraintConflictError(f"dof {s} both slaved and bound", s)

        free = []
        self.red_index = np.full(n, -1, dtype=np.int64)
        for d in range(n):
            if d in bound or d in resolved:
                continue
            self.red_index[d] = len(free)
            free.append(d)
        self.free = np.array(free, dtype=np.int64)
        self.n_free = len(free)

        rows, cols, vals = list(self.free), list(range(self.n_free)), [1.0] * self.n_free
        for s, (m, off) in resolved.items():
            if m in bound:
                # slave of a bound dof: effectively bound (handled via sync)
                continue
            rows.append(s)
            cols.append(int(self.red_index[m]))
            vals.append(1.0)
        self.C = sparse.csr_matrix((vals, (rows, cols)), shape=(n, self.n_free))
        self.CT = self.C.T.tocsr()
        # phase-dof mask on the reduced vector
        self.red_is_phase = self.free >= 3 * cache.n_cp

        self._pattern = None

    # -- state synchronisation -------------------------------------------
    def sync_slaves(self, x: np.ndarray, v: np.ndarray | None = None,
                    a: np.ndarray | None = None, phi: np.ndarray | None = None):
        """Copy master values (+offset) onto slave dofs of the full state."""
        ncp = self.cache.n_cp
        for s, (m, off) in self.slave_of.items():
            if s < 3 * ncp:
                x.reshape(-1)[s] = x.reshape(-1)[m] + off
                if v is not None:
                    v.reshape(-1)[s] = v.reshape(-1)[m]
                if a is not None:
                    a.reshape(-1)[s] = a.reshape(-1)[m]
            elif phi is not None:
                phi[s - 3 * ncp] = phi[m - 3 * ncp]

    def reduce(self, r: np.ndarray) -> np.ndarray:
        return self.CT @ r

    def expand(self, du_red: np.ndarray) -> np.ndarray:
        return self.C @ du_red

    # -- assembly ----------------------------------------------------------
    def _build_pattern(self):
        cache = self.cache
        n = self.n_dof
        ncp = cache.n_cp
        xd = cache.xdofs()                     # (nel, 3nmax)
        pd = cache.pdofs()                     # (nel, nmax)

        def block_rc(rd, cd):
            r = np.repeat(rd, cd.shape[1], axis=1).ravel()
            c = np.tile(cd, (1, rd.shape[1])).ravel()
            return r, c

        rxx, cxx = block_rc(xd, xd)
        rxp, cxp = block_rc(xd, pd)
        rpx, cpx = block_rc(pd, xd)
        rpp, cpp = block_rc(pd, pd)
        Mcoo = cache.M.tocoo()
        K0coo = cache.Kbar0.tocoo()
        rows = np.concatenate([rxx, rxp, rpx, rpp, Mcoo.row,
                               K0coo.row + 3 * ncp])
        cols = np.concatenate([cxx, cxp, cpx, cpp, Mcoo.col,
                               K0coo.col + 3 * ncp])
        pat = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)),
                                shape=(n, n)).tocsr()
        pat.sum_duplicates()
        pat.sort_indices()
        # locate every triplet in the csr data array via the global sorted key
        indptr, indices = pat.indptr, pat.indices
        row_of_entry = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
        csr_keys = row_of_entry * n + indices
        pos = np.searchsorted(csr_keys, rows.astype(np.int64) * n + cols)
        self._pattern = (pat.indptr, pat.indices, pat.nnz, pos,
                         Mcoo.data.copy(), K0coo.data.copy())

    def assemble_tangent(self, Kx_e, Kphi_e, Kbx_e, Kbphi_e,
                         alpha_f: float, mass_coeff: float) -> sparse.csr_matrix:
        """Scatter element blocks + mass + phase stiffness into the global CSR.

        Kx and Kbx blocks are weighted by alpha_f here; Kbphi_e receives the
        cached kbar0 contribution through the global Kbar0 triplets.
        """
        if self._pattern is None:
            self._build_pattern()
        indptr, indices, nnz, pos, Mdata, K0data = self._pattern
        vals = np.concatenate([
            (alpha_f * Kx_e).ravel(), Kphi_e.ravel(),
            (alpha_f * Kbx_e).ravel(), Kbphi_e.ravel(),
            mass_coeff * Mdata, K0data,
        ])
        data = np.bincount(pos, weights=vals, minlength=nnz)
        n = self.n_dof
        return sparse.csr_matrix((data, indices.copy(), indptr.copy()), shape=(n, n))

    def assemble_residual(self, fint_e: np.ndarray, fbar_el_e: np.ndarray,
                          acc_am: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Full residual [f; fbar] = [M a + fint - fext; kbar0 phi + fbar_el - fbar0]."""
        cache = self.cache
        ncp = cache.n_cp
        fx = cache.M @ acc_am.reshape(-1)
        fx += np.bincount(cache.xdofs().ravel(), weights=fint_e.ravel(),
                          minlength=3 * ncp)
        fp = cache.Kbar0 @ phi + np.bincount(
            cache.fidx.ravel(), weights=fbar_el_e.ravel(), minlength=ncp) - cache.fbar0
        return np.concatenate([fx, fp])


def assemble(system: GlobalSystem, kernel_out: dict, acc_am: np.ndarray,
             phi: np.ndarray, alpha_f: float, mass_coeff: float):
    """Convenience wrapper: (reduced residual, reduced tangent)."""
    r = system.assemble_residual(kernel_out["fint"], kernel_out["fbar_el"],
                                 acc_am, phi)
    K = system.assemble_tangent(kernel_out["Kx"], kernel_out["Kphi"],
                                kernel_out["Kbx"], kernel_out["Kbphi"],
                                alpha_f, mass_coeff)
    r_red = system.reduce(r)
    K_red = (system.CT @ K @ system.C).tocsc()
    return r_red, K_red
