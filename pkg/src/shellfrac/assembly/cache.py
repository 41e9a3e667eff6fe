"""Per-mesh quadrature cache.

Everything that depends only on the reference configuration is computed once
per mesh (and recomputed after refinement): rationalized basis rows at the
3x3 Gauss points of every element, reference metrics and curvatures, the
surface-Laplacian rows of the scalar basis, element mass and phase-stiffness
blocks, and their globally assembled sparse forms.  Elements are padded to a
common function count so the kernels see regular arrays.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from ..lrmesh.knots import local_bspline
from ..lrmesh.mesh import LRMesh
from ..material import MaterialParams

GAUSS_1D = np.polynomial.legendre.leggauss(3)


class ElementQuadCache:
    """Reference-configuration quadrature data for one mesh."""

    def __init__(self, mesh: LRMesh, params: MaterialParams):
        self.mesh = mesh
        self.params = params
        self.n_cp = mesh.n_funcs
        self._build()

    # -- construction --------------------------------------------------
    def _build(self):
        mesh = self.mesh
        nel = len(mesh.elements)
        nmax = max(len(el.funcs) for el in mesh.elements)
        nq = 9
        self.nel, self.nmax, self.nq = nel, nmax, nq

        fidx = np.zeros((nel, nmax), dtype=np.int64)
        nf = np.zeros(nel, dtype=np.int64)
        p1, p2 = mesh.degree
        ku = np.zeros((nel, nmax, p1 + 2))
        kv = np.zeros((nel, nmax, p2 + 2))
        wts = np.zeros((nel, nmax))
        rect = np.zeros((nel, 4))
        for e, el in enumerate(mesh.elements):
            funcs = sorted(el.funcs, key=lambda f: f.idx)
            nf[e] = len(funcs)
            for k, f in enumerate(funcs):
                fidx[e, k] = f.idx
                ku[e, k] = [float(t) for t in f.ku]
                kv[e, k] = [float(t) for t in f.kv]
                wts[e, k] = f.w
            rect[e] = (float(el.u0), float(el.u1), float(el.v0), float(el.v1))
        self.fidx, self.nf, self.rect = fidx, nf, rect

        xg, wg = GAUSS_1D
        umid = 0.5 * (rect[:, 0] + rect[:, 1])
        uhal = 0.5 * (rect[:, 1] - rect[:, 0])
        vmid = 0.5 * (rect[:, 2] + rect[:, 3])
        vhal = 0.5 * (rect[:, 3] - rect[:, 2])
        up = umid[:, None] + uhal[:, None] * xg[None, :]      # (nel, 3)
        vp = vmid[:, None] + vhal[:, None] * xg[None, :]

        # univariate values for each function at its element's 3 points
        def univariate(kn, pts):
            m = kn.reshape(nel * nmax, -1)
            x = np.repeat(pts, nmax, axis=0).reshape(nel * nmax, 3)
            B, d1, d2 = local_bspline(m, x)
            return (a.reshape(nel, nmax, 3) for a in (B, d1, d2))

        Bu, dBu, ddBu = univariate(ku, up)
        Bv, dBv, ddBv = univariate(kv, vp)

        # tensorize to the 9 quadrature points, q = iv * 3 + iu
        def tensor(fu, fv):
            t = np.einsum("enu,env->envu", fu, fv)            # (nel, nmax, 3v, 3u)
            return t.reshape(nel, nmax, 9).transpose(0, 2, 1)  # (nel, 9, nmax)

        W = wts[:, None, :]
        B = W * tensor(Bu, Bv)
        B_u = W * tensor(dBu, Bv)
        B_v = W * tensor(Bu, dBv)
        B_uu = W * tensor(ddBu, Bv)
        B_uv = W * tensor(dBu, dBv)
        B_vv = W * tensor(Bu, ddBv)

        Wt = B.sum(2)[..., None]
        Wu = B_u.sum(2)[..., None]
        Wv = B_v.sum(2)[..., None]
        Wuu = B_uu.sum(2)[..., None]
        Wuv = B_uv.sum(2)[..., None]
        Wvv = B_vv.sum(2)[..., None]
        N = B / Wt
        Nu = B_u / Wt - B * Wu / Wt**2
        Nv = B_v / Wt - B * Wv / Wt**2
        Nuu = B_uu / Wt - (2 * B_u * Wu + B * Wuu) / Wt**2 + 2 * B * Wu**2 / Wt**3
        Nvv = B_vv / Wt - (2 * B_v * Wv + B * Wvv) / Wt**2 + 2 * B * Wv**2 / Wt**3
        Nuv = (B_uv / Wt - (B_u * Wv + B_v * Wu + B * Wuv) / Wt**2
               + 2 * B * Wu * Wv / Wt**3)
        self.N = np.ascontiguousarray(N)
        self.dN = np.ascontiguousarray(np.stack([Nu, Nv], axis=2))       # (nel, 9, 2, nmax)
        self.ddN = np.ascontiguousarray(np.stack([Nuu, Nuv, Nvv], axis=2))

        gw = np.einsum("v,u->vu", wg, wg).ravel()                        # (9,)
        self.wparam = gw[None, :] * (uhal * vhal)[:, None]               # (nel, 9)
        qu = np.repeat(up[:, None, :], 3, axis=1).reshape(nel, 9)
        qv = np.repeat(vp[:, :, None], 3, axis=2).reshape(nel, 9)
        self.qp_uv = np.stack([qu, qv], axis=-1)                         # (nel, 9, 2)

        self._reference_geometry()
        self._element_blocks()
        self._global_matrices()

    def _reference_geometry(self):
        X = self.mesh.control_points()
        Xg = X[self.fidx]                                   # (nel, nmax, 3)
        a = np.einsum("eqam,emk->eqak", self.dN, Xg)        # (nel, 9, 2, 3)
        h = np.einsum("eqsm,emk->eqsk", self.ddN, Xg)       # (nel, 9, 3, 3)
        a11 = np.einsum("eqk,eqk->eq", a[:, :, 0], a[:, :, 0])
        a22 = np.einsum("eqk,eqk->eq", a[:, :, 1], a[:, :, 1])
        a12 = np.einsum("eqk,eqk->eq", a[:, :, 0], a[:, :, 1])
        det = a11 * a22 - a12 * a12
        if np.any(det <= 0):
            raise ValueError("degenerate reference geometry in cache build")
        self.detA = det
        self.Ainv = np.stack([a22 / det, a11 / det, -a12 / det], axis=-1)  # voigt
        cr = np.cross(a[:, :, 0], a[:, :, 1])
        lam = np.linalg.norm(cr, axis=-1)
        n = cr / lam[..., None]
        self.ref_normal = n
        B = np.einsum("eqsk,eqk->eqs", h, n)                # (nel, 9, 3) voigt [uu, uv, vv]
        self.B_ab = np.stack([B[..., 0], B[..., 2], B[..., 1]], axis=-1)   # voigt [11, 22, 12]
        Ai = self.Ainv
        b11, b22, b12 = self.B_ab[..., 0], self.B_ab[..., 1], self.B_ab[..., 2]
        A11, A22, A12 = Ai[..., 0], Ai[..., 1], Ai[..., 2]
        # raised reference curvature B0^{ab} = A^{ag} B_{gd} A^{db}
        B0_11 = A11 * (b11 * A11 + b12 * A12) + A12 * (b12 * A11 + b22 * A12)
        B0_22 = A12 * (b11 * A12 + b12 * A22) + A22 * (b12 * A12 + b22 * A22)
        B0_12 = A11 * (b11 * A12 + b12 * A22) + A12 * (b12 * A12 + b22 * A22)
        self.B0up = np.stack([B0_11, B0_22, B0_12], axis=-1)
        # mixed reference curvature invariants for the layer stretch
        Bm11 = A11 * b11 + A12 * b12
        Bm12 = A11 * b12 + A12 * b22
        Bm21 = A12 * b11 + A22 * b12
        Bm22 = A12 * b12 + A22 * b22
        self.trBm = Bm11 + Bm22
        self.detBm = Bm11 * Bm22 - Bm12 * Bm21
        self.dA = self.wparam * np.sqrt(det)
        # reference Christoffel symbols and scalar Laplacian rows
        a_up1 = A11[..., None] * a[:, :, 0] + A12[..., None] * a[:, :, 1]
        a_up2 = A12[..., None] * a[:, :, 0] + A22[..., None] * a[:, :, 1]
        g1 = np.einsum("eqsk,eqk->eqs", h, a_up1)           # Gamma^1_{s}
        g2 = np.einsum("eqsk,eqk->eqs", h, a_up2)
        cov = (self.ddN - np.einsum("eqs,eqm->eqsm", g1, self.dN[:, :, 0])
               - np.einsum("eqs,eqm->eqsm", g2, self.dN[:, :, 1]))
        self.lapN = (A11[..., None] * cov[:, :, 0] + 2 * A12[..., None] * cov[:, :, 1]
                     + A22[..., None] * cov[:, :, 2])
        self.ref_gamma = np.stack([g1, g2], axis=2)         # (nel, 9, 2, 3[s])

    def _element_blocks(self):
        p = self.params
        l0 = p.l0
        dA = self.dA
        self.mass_e = p.rho * np.einsum("eq,eqm,eqn->emn", dA, self.N, self.N)
        A11, A22, A12 = (self.Ainv[..., i] for i in range(3))
        du, dv = self.dN[:, :, 0], self.dN[:, :, 1]
        grad = (np.einsum("eq,eqm,eqn->emn", dA * A11, du, du)
                + np.einsum("eq,eqm,eqn->emn", dA * A22, dv, dv)
                + np.einsum("eq,eqm,eqn->emn", dA * A12, du, dv)
                + np.einsum("eq,eqm,eqn->emn", dA * A12, dv, du))
        self.kbar0_e = (np.einsum("eq,eqm,eqn->emn", dA, self.N, self.N)
                        + 2 * l0**2 * grad
                        + l0**4 * np.einsum("eq,eqm,eqn->emn", dA, self.lapN, self.lapN))
        self.fbar0_e = np.einsum("eq,eqm->em", dA, self.N)

    def _global_matrices(self):
        n = self.n_cp
        rows = np.repeat(self.fidx, self.nmax, axis=1).ravel()
        cols = np.tile(self.fidx, (1, self.nmax)).ravel()
        M = sparse.coo_matrix((self.mass_e.ravel(), (rows, cols)), shape=(n, n)).tocsr()
        M.sum_duplicates()
        self.M_scalar = M
        self.M = sparse.kron(M, sparse.eye(3), format="csr")
        K0 = sparse.coo_matrix((self.kbar0_e.ravel(), (rows, cols)), shape=(n, n)).tocsr()
        K0.sum_duplicates()
        self.Kbar0 = K0
        self.fbar0 = np.bincount(self.fidx.ravel(),
                                 weights=self.fbar0_e.ravel(), minlength=n)

    # -- dof layout -----------------------------------------------------
    @property
    def n_dof(self) -> int:
        """Total coupled dofs: 3 displacement + 1 phase per control point."""
        return 4 * self.n_cp

    def xdofs(self) -> np.ndarray:
        """(nel, 3*nmax) displacement dof indices, node-major [x y z]."""
        return (3 * self.fidx[:, :, None] + np.arange(3)).reshape(self.nel, -1)

    def pdofs(self) -> np.ndarray:
        """(nel, nmax) phase dof indices (offset past the displacement block)."""
        return 3 * self.n_cp + self.fidx
