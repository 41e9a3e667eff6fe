"""Pure-numpy element kernel: residual blocks and tangent blocks.

This is the fallback backend and the correctness reference for the compiled
kernel.  It loops over the 9 quadrature points with element-batched numpy
operations.  Conventions:

* symmetric 2x2 tensors in Voigt order [11, 22, 12], plain samples;
* element dofs node-major, [x0 y0 z0 x1 y1 z1 ...] then [phi0 phi1 ...];
* the returned spatial residual is f_int - f_ext (no inertia: the mass term
  is applied globally), the phase residual part is fbar_el (kbar0 phi and
  fbar0 are applied globally);
* tangents are plain derivatives d(residual)/d(state); the generalized-alpha
  alpha_f weight is applied by the caller.
"""

from __future__ import annotations

import numpy as np

from .cache import ElementQuadCache


def _cross_rows(v: np.ndarray) -> np.ndarray:
    """(..., 3, 3) matrix with rows e_c x v."""
    z = np.zeros(v.shape[:-1])
    return np.stack([
        np.stack([z, -v[..., 2], v[..., 1]], axis=-1),
        np.stack([v[..., 2], z, -v[..., 0]], axis=-1),
        np.stack([-v[..., 1], v[..., 0], z], axis=-1),
    ], axis=-2)


def _eps_rows(v: np.ndarray) -> np.ndarray:
    """(..., 3, 3) matrix T[c, d] = eps_{cdf} v_f."""
    z = np.zeros(v.shape[:-1])
    return np.stack([
        np.stack([z, v[..., 2], -v[..., 1]], axis=-1),
        np.stack([-v[..., 2], z, v[..., 0]], axis=-1),
        np.stack([v[..., 1], -v[..., 0], z], axis=-1),
    ], axis=-2)


def element_kernel(cache: ElementQuadCache, x: np.ndarray, phi: np.ndarray,
                   H_old: np.ndarray, pbar: float = 0.0,
                   fbody: tuple[float, float] = (0.0, 0.0),
                   want_tangent: bool = True):
    """Evaluate all element residual/tangent blocks at state (x, phi).

    Parameters
    ----------
    x : (n_cp, 3) current control positions (at the alpha_f point)
    phi : (n_cp,) phase control values (at t_{n+1})
    H_old : (nel, 9) committed history field
    pbar : follower pressure magnitude (scaled by phi in the load)
    fbody : constant in-plane body force components (f^1, f^2)

    Returns a dict with keys fint (nel, 3nmax), fbar_el (nel, nmax),
    H (nel, 9), psi_plus/psi_minus (nel, 9) and, if requested, Kx, Kphi,
    Kbx, Kbphi.
    """
    p = cache.params
    nel, nmax = cache.nel, cache.nmax
    nd = 3 * nmax
    Xg = x[cache.fidx]                       # (nel, nmax, 3)
    phig = phi[cache.fidx]                   # (nel, nmax)

    fint = np.zeros((nel, nd))
    fbar_el = np.zeros((nel, nmax))
    H_new = np.empty((nel, 9))
    psi_p = np.empty((nel, 9))
    psi_m = np.empty((nel, 9))
    J_out = np.empty((nel, 9))
    if want_tangent:
        Kx = np.zeros((nel, nd, nd))
        Kphi = np.zeros((nel, nd, nmax))
        Kbx = np.zeros((nel, nmax, nd))
        Kbphi = np.zeros((nel, nmax, nmax))

    xg_t, wg_t = p.thickness_rule()
    I3 = np.eye(3)
    scale_el = 2.0 * p.l0 / p.Gc

    for q in range(9):
        N = cache.N[:, q]                    # (nel, nmax)
        dN = cache.dN[:, q]                  # (nel, 2, nmax)
        ddN = cache.ddN[:, q]                # (nel, 3, nmax)
        dA = cache.dA[:, q]                  # (nel,)
        wp = cache.wparam[:, q]
        Ainv = cache.Ainv[:, q]              # (nel, 3) voigt
        detA = cache.detA[:, q]
        Bv = cache.B_ab[:, q]                # voigt covariant ref curvature
        B0up = cache.B0up[:, q]
        trBm, detBm = cache.trBm[:, q], cache.detBm[:, q]

        # -- current geometry -------------------------------------------
        a1 = np.einsum("em,emk->ek", dN[:, 0], Xg)
        a2 = np.einsum("em,emk->ek", dN[:, 1], Xg)
        h = np.einsum("esm,emk->esk", ddN, Xg)             # (nel, 3, 3)
        a11 = np.einsum("ek,ek->e", a1, a1)
        a22 = np.einsum("ek,ek->e", a2, a2)
        a12 = np.einsum("ek,ek->e", a1, a2)
        det = a11 * a22 - a12 * a12
        ainv = np.stack([a22 / det, a11 / det, -a12 / det], axis=-1)
        cvec = np.cross(a1, a2)
        lam = np.sqrt(det)
        n = cvec / lam[:, None]
        bv = np.einsum("esk,ek->es", h, n)                 # [uu, uv, vv]
        bv = np.stack([bv[:, 0], bv[:, 2], bv[:, 1]], axis=-1)   # voigt [11,22,12]
        J = np.sqrt(det / detA)
        I1 = Ainv[:, 0] * a11 + Ainv[:, 1] * a22 + 2 * Ainv[:, 2] * a12

        # mixed current curvature invariants
        bm11 = ainv[:, 0] * bv[:, 0] + ainv[:, 2] * bv[:, 2]
        bm12 = ainv[:, 0] * bv[:, 2] + ainv[:, 2] * bv[:, 1]
        bm21 = ainv[:, 2] * bv[:, 0] + ainv[:, 1] * bv[:, 2]
        bm22 = ainv[:, 2] * bv[:, 2] + ainv[:, 1] * bv[:, 1]
        trbm = bm11 + bm22
        detbm = bm11 * bm22 - bm12 * bm21

        # -- membrane constitution (J branch) ----------------------------
        A_up = Ainv
        tau_dil = 0.5 * p.K * (J * J - 1.0)[:, None] * ainv
        tau_dev = (0.5 * p.G / J)[:, None] * (2.0 * A_up - I1[:, None] * ainv)
        if np.isinf(p.p_chi):
            chiJ = np.where(J > 1.0, 1.0, np.where(J < 1.0, 0.0, 0.5))
        else:
            chiJ = 1.0 / (1.0 + np.exp(np.clip(-p.p_chi * (J - 1.0), -700, 700)))
        tau_p = tau_dev + chiJ[:, None] * tau_dil
        tau_m = (1.0 - chiJ)[:, None] * tau_dil
        psi_dil = 0.25 * p.K * (J * J - 1.0 - 2.0 * np.log(J))
        psi_dev = 0.5 * p.G * (I1 / J - 2.0)
        mem_p = psi_dev + chiJ * psi_dil
        mem_m = (1.0 - chiJ) * psi_dil

        # -- bending constitution (thickness split) ----------------------
        qc = (1.0 - xg_t[:, None] * trbm[None, :]
              + xg_t[:, None] ** 2 * detbm[None, :])       # (nt, nel)
        qr = (1.0 - xg_t[:, None] * trBm[None, :]
              + xg_t[:, None] ** 2 * detBm[None, :])
        Jt = J[None, :] * qc / qr
        if np.isinf(p.p_chi):
            chi = np.where(Jt > 1.0, 1.0, np.where(Jt < 1.0, 0.0, 0.5))
        else:
            chi = 1.0 / (1.0 + np.exp(np.clip(-p.p_chi * (Jt - 1.0), -700, 700)))
        s_plus = 12.0 / p.T**3 * np.einsum("t,t,te->e", wg_t, xg_t**2, chi)

        Kv = bv - Bv                                        # relative curvature, voigt
        # raised with the reference metric
        A11, A22, A12 = Ainv[:, 0], Ainv[:, 1], Ainv[:, 2]
        k11, k22, k12 = Kv[:, 0], Kv[:, 1], Kv[:, 2]
        Ku11 = A11 * (k11 * A11 + k12 * A12) + A12 * (k12 * A11 + k22 * A12)
        Ku22 = A12 * (k11 * A12 + k12 * A22) + A22 * (k12 * A12 + k22 * A22)
        Ku12 = A11 * (k11 * A12 + k12 * A22) + A12 * (k12 * A12 + k22 * A22)
        Kup = np.stack([Ku11, Ku22, Ku12], axis=-1)
        M_full = p.c * Kup
        trK2 = k11 * Ku11 + k22 * Ku22 + 2 * k12 * Ku12
        psi_bend = 0.5 * p.c * trK2
        M_p = M_full * s_plus[:, None]
        M_m = M_full * (1.0 - s_plus)[:, None]

        psi_plus_q = mem_p + psi_bend * s_plus
        psi_minus_q = mem_m + psi_bend * (1.0 - s_plus)
        Hq = np.maximum(H_old[:, q], psi_plus_q)
        active = psi_plus_q >= H_old[:, q]
        H_new[:, q] = Hq
        psi_p[:, q] = psi_plus_q
        psi_m[:, q] = psi_minus_q
        J_out[:, q] = J

        gphi = np.einsum("em,em->e", N, phig)
        g = (3.0 - p.s) * gphi**2 - (2.0 - p.s) * gphi**3
        dg = 2.0 * (3.0 - p.s) * gphi - 3.0 * (2.0 - p.s) * gphi**2
        ddg = 2.0 * (3.0 - p.s) - 6.0 * (2.0 - p.s) * gphi

        tau_hat = g[:, None] * tau_p + tau_m
        M_hat = g[:, None] * M_p + M_m

        # -- rows --------------------------------------------------------
        # membrane rows V_I[i=(m,c)] (voigt: V3 = V12 + V21)
        V1 = np.einsum("em,ek->emk", dN[:, 0], a1).reshape(nel, nd)
        V2 = np.einsum("em,ek->emk", dN[:, 1], a2).reshape(nel, nd)
        V3 = (np.einsum("em,ek->emk", dN[:, 0], a2)
              + np.einsum("em,ek->emk", dN[:, 1], a1)).reshape(nel, nd)
        V = np.stack([V1, V2, V3], axis=1)                 # (nel, 3, nd)

        # bending rows W_I from covariant second derivatives
        g1 = np.einsum("esk,ek->es", h, ainv[:, 0, None] * a1 + ainv[:, 2, None] * a2)
        g2 = np.einsum("esk,ek->es", h, ainv[:, 2, None] * a1 + ainv[:, 1, None] * a2)
        scov = (ddN - np.einsum("es,em->esm", g1, dN[:, 0])
                - np.einsum("es,em->esm", g2, dN[:, 1]))   # (nel, 3, nmax)
        beta = np.einsum("esm,ek->esmk", scov, n).reshape(nel, 3, nd)
        W1, W3h, W2 = beta[:, 0], beta[:, 1], beta[:, 2]
        W = np.stack([W1, W2, 2.0 * W3h], axis=1)          # voigt rows

        fint += dA[:, None] * (np.einsum("eI,eId->ed", tau_hat, V)
                               + np.einsum("eI,eId->ed", M_hat, W))

        if pbar != 0.0:
            pres = (wp * pbar)[:, None, None] * gphi[:, None, None] \
                * np.einsum("em,ek->emk", N, cvec)
            fint -= pres.reshape(nel, nd)
        if fbody[0] != 0.0 or fbody[1] != 0.0:
            bvec = fbody[0] * a1 + fbody[1] * a2
            fint += (wp * lam)[:, None] * np.einsum("em,ek->emk", N, bvec).reshape(nel, nd)

        fbar_el += (dA * scale_el * dg * Hq)[:, None] * N

        if not want_tangent:
            continue

        # -- material tangents (voigt 3x3, plain samples) -----------------
        def outer3(u, v):
            return np.einsum("eI,eJ->eIJ", u, v)

        a4 = _metric_derivative_batch(ainv)
        aa = outer3(ainv, ainv)
        c_dil = p.K * ((J * J)[:, None, None] * aa + (J * J - 1.0)[:, None, None] * a4)
        c_dev = (p.G / J)[:, None, None] * (0.5 * I1[:, None, None] * aa
                                            - I1[:, None, None] * a4
                                            - outer3(ainv, A_up) - outer3(A_up, ainv))
        c_p = c_dev + chiJ[:, None, None] * c_dil
        c_m = (1.0 - chiJ)[:, None, None] * c_dil
        c_hat = g[:, None, None] * c_p + c_m
        f_hat = (p.c * (g * s_plus + 1.0 - s_plus))[:, None, None] \
            * _raise_identity_batch(Ainv)

        Kq = np.einsum("eIJ,eId,eJf->edf", c_hat, V, V)
        Kq += np.einsum("eIJ,eId,eJf->edf", f_hat, W, W)

        # geometric membrane: tau_hat^{ab} dN_a . dN_b  (kron I3)
        Gm = (np.einsum("e,em,en->emn", tau_hat[:, 0], dN[:, 0], dN[:, 0])
              + np.einsum("e,em,en->emn", tau_hat[:, 1], dN[:, 1], dN[:, 1])
              + np.einsum("e,em,en->emn", tau_hat[:, 2], dN[:, 0], dN[:, 1])
              + np.einsum("e,em,en->emn", tau_hat[:, 2], dN[:, 1], dN[:, 0]))
        Kq += np.einsum("emn,cd->emcnd", Gm, I3).reshape(nel, nd, nd)

        # geometric bending
        m3 = (M_hat[:, 0, None] * h[:, 0] + M_hat[:, 1, None] * h[:, 2]
              + 2.0 * M_hat[:, 2, None] * h[:, 1])          # (nel, 3)
        CM1 = _cross_rows(a1)
        CM2 = _cross_rows(a2)
        dC = (np.einsum("em,ecj->emcj", dN[:, 0], CM2)
              - np.einsum("em,ecj->emcj", dN[:, 1], CM1)).reshape(nel, nd, 3)
        qv_ = dC @ n[:, :, None]
        qv = qv_[:, :, 0]                                   # (nel, nd)
        rv = (dC @ m3[:, :, None])[:, :, 0]
        mn = np.einsum("ek,ek->e", m3, n)
        P_ = np.einsum("em,en->emn", dN[:, 0], dN[:, 1])
        P_ = P_ - P_.transpose(0, 2, 1)
        M1 = np.einsum("emn,ecd->emcnd", P_, _eps_rows(m3)).reshape(nel, nd, nd)
        N2 = np.einsum("emn,ecd->emcnd", P_, _eps_rows(n)).reshape(nel, nd, nd)
        dCdC = np.einsum("eic,ejc->eij", dC, dC)
        qq = np.einsum("ei,ej->eij", qv, qv)
        rq = np.einsum("ei,ej->eij", rv, qv)
        lam1 = lam[:, None, None]
        T1 = (M1 / lam1 - (rq + rq.transpose(0, 2, 1)) / lam1**2
              + 3.0 * mn[:, None, None] * qq / lam1**2
              - mn[:, None, None] * dCdC / lam1**2
              - mn[:, None, None] * N2 / lam1)
        s_row = (M_hat[:, 0, None] * ddN[:, 0] + M_hat[:, 1, None] * ddN[:, 2]
                 + 2.0 * M_hat[:, 2, None] * ddN[:, 1])     # (nel, nmax)
        dNn = (dC - np.einsum("ei,ek->eik", qv, n)) / lam1  # delta n rows (nel, nd, 3)
        T2a = np.einsum("eid,en->eind", dNn, s_row).reshape(nel, nd, nd)
        Kq += T1 + T2a + T2a.transpose(0, 2, 1)

        Kx += dA[:, None, None] * Kq

        # pressure tangents
        if pbar != 0.0:
            Kp = np.einsum("em,ejc->emcj", N, dC).reshape(nel, nd, nd)
            Kx -= (wp * pbar * gphi)[:, None, None] * Kp
            Kphi -= (wp * pbar)[:, None, None] * np.einsum(
                "em,ek,en->emkn", N, cvec, N).reshape(nel, nd, nmax)
        if fbody[0] != 0.0 or fbody[1] != 0.0:
            bvec = fbody[0] * a1 + fbody[1] * a2
            drows = (fbody[0] * np.einsum("en,cd->encd", dN[:, 0], I3)
                     + fbody[1] * np.einsum("en,cd->encd", dN[:, 1], I3)).reshape(nel, nd, 3)
            t_b = (np.einsum("em,ejc->emcj", N, lam[:, None, None] * drows)
                   + np.einsum("em,ek,ej->emkj", N, bvec, qv))
            Kx += (wp)[:, None, None] * t_b.reshape(nel, nd, nd)

        # phase coupling blocks
        D = (np.einsum("eI,eId->ed", tau_p, V)
             + np.einsum("eI,eId->ed", M_p, W))             # (nel, nd)
        Kphi += (dA * dg)[:, None, None] * np.einsum("ed,en->edn", D, N)
        actf = active.astype(float)
        Kbx += (dA * scale_el * dg * actf)[:, None, None] * np.einsum(
            "em,ed->emd", N, D)
        Kbphi += (dA * scale_el * ddg * Hq)[:, None, None] * np.einsum(
            "em,en->emn", N, N)

    out = {"fint": fint, "fbar_el": fbar_el, "H": H_new,
           "psi_plus": psi_p, "psi_minus": psi_m, "J": J_out}
    if want_tangent:
        out.update(Kx=Kx, Kphi=Kphi, Kbx=Kbx, Kbphi=Kbphi)
    return out


def _metric_derivative_batch(ainv_voigt: np.ndarray) -> np.ndarray:
    a = np.stack([
        np.stack([ainv_voigt[:, 0], ainv_voigt[:, 2]], -1),
        np.stack([ainv_voigt[:, 2], ainv_voigt[:, 1]], -1),
    ], -2)
    idx = ((0, 0), (1, 1), (0, 1))
    M = np.empty(ainv_voigt.shape[:-1] + (3, 3))
    for I, (al, be) in enumerate(idx):
        for Jc, (ga, de) in enumerate(idx):
            M[..., I, Jc] = -0.5 * (a[..., al, ga] * a[..., be, de]
                                    + a[..., al, de] * a[..., be, ga])
    return M


def _raise_identity_batch(Ainv_voigt: np.ndarray) -> np.ndarray:
    a = np.stack([
        np.stack([Ainv_voigt[:, 0], Ainv_voigt[:, 2]], -1),
        np.stack([Ainv_voigt[:, 2], Ainv_voigt[:, 1]], -1),
    ], -2)
    idx = ((0, 0), (1, 1), (0, 1))
    M = np.empty(Ainv_voigt.shape[:-1] + (3, 3))
    for I, (al, be) in enumerate(idx):
        for Jc, (ga, de) in enumerate(idx):
            M[..., I, Jc] = 0.5 * (a[..., al, ga] * a[..., be, de]
                                   + a[..., al, de] * a[..., be, ga])
    return M


def qp_fields(cache: ElementQuadCache, x: np.ndarray, phi: np.ndarray,
              H_old: np.ndarray, pbar: float = 0.0):
    """Output-time quadrature fields: J, psi+-, fracture density, surface tension.

    Returns a dict of (nel, 9) arrays.  gamma is half the mixed trace of the
    physical (degraded, current-configuration) membrane stress including the
    moment coupling of the equation of motion.
    """
    p = cache.params
    res = element_kernel(cache, x, phi, H_old, pbar=pbar, want_tangent=False)
    nel, nmax = cache.nel, cache.nmax
    Xg = x[cache.fidx]
    phig = phi[cache.fidx]
    J = np.empty((nel, 9))
    gamma = np.empty((nel, 9))
    psifrac = np.empty((nel, 9))
    for q in range(9):
        N = cache.N[:, q]
        dN = cache.dN[:, q]
        ddN = cache.ddN[:, q]
        Ainv = cache.Ainv[:, q]
        a1 = np.einsum("em,emk->ek", dN[:, 0], Xg)
        a2 = np.einsum("em,emk->ek", dN[:, 1], Xg)
        h = np.einsum("esm,emk->esk", ddN, Xg)
        a11 = np.einsum("ek,ek->e", a1, a1)
        a22 = np.einsum("ek,ek->e", a2, a2)
        a12 = np.einsum("ek,ek->e", a1, a2)
        det = a11 * a22 - a12 * a12
        ainv = np.stack([a22 / det, a11 / det, -a12 / det], axis=-1)
        nvec = np.cross(a1, a2) / np.sqrt(det)[:, None]
        bvd = np.einsum("esk,ek->es", h, nvec)
        bv = np.stack([bvd[:, 0], bvd[:, 2], bvd[:, 1]], axis=-1)
        Jq = np.sqrt(det / cache.detA[:, q])
        J[:, q] = Jq

        I1 = Ainv[:, 0] * a11 + Ainv[:, 1] * a22 + 2 * Ainv[:, 2] * a12
        tau_dil = 0.5 * p.K * (Jq * Jq - 1.0)[:, None] * ainv
        tau_dev = (0.5 * p.G / Jq)[:, None] * (2.0 * Ainv - I1[:, None] * ainv)
        tension = Jq >= 1.0
        tau_p = tau_dev + np.where(tension[:, None], tau_dil, 0.0)
        tau_m = np.where(tension[:, None], 0.0, tau_dil)

        xg_t, wg_t = p.thickness_rule()
        bm11 = ainv[:, 0] * bv[:, 0] + ainv[:, 2] * bv[:, 2]
        bm12 = ainv[:, 0] * bv[:, 2] + ainv[:, 2] * bv[:, 1]
        bm21 = ainv[:, 2] * bv[:, 0] + ainv[:, 1] * bv[:, 2]
        bm22 = ainv[:, 2] * bv[:, 2] + ainv[:, 1] * bv[:, 1]
        qc = 1.0 - xg_t[:, None] * (bm11 + bm22)[None, :] \
            + xg_t[:, None]**2 * (bm11 * bm22 - bm12 * bm21)[None, :]
        qr = 1.0 - xg_t[:, None] * cache.trBm[:, q][None, :] \
            + xg_t[:, None]**2 * cache.detBm[:, q][None, :]
        Jt = Jq[None, :] * qc / qr
        if np.isinf(p.p_chi):
            chi = np.where(Jt > 1.0, 1.0, np.where(Jt < 1.0, 0.0, 0.5))
        else:
            chi = 1.0 / (1.0 + np.exp(np.clip(-p.p_chi * (Jt - 1.0), -700, 700)))
        s_plus = 12.0 / p.T**3 * np.einsum("t,t,te->e", wg_t, xg_t**2, chi)
        Kvr = bv - cache.B_ab[:, q]
        A11, A22, A12 = Ainv[:, 0], Ainv[:, 1], Ainv[:, 2]
        k11, k22, k12 = Kvr[:, 0], Kvr[:, 1], Kvr[:, 2]
        Ku11 = A11 * (k11 * A11 + k12 * A12) + A12 * (k12 * A11 + k22 * A12)
        Ku22 = A12 * (k11 * A12 + k12 * A22) + A22 * (k12 * A12 + k22 * A22)
        Ku12 = A11 * (k11 * A12 + k12 * A22) + A12 * (k12 * A12 + k22 * A22)
        M_full = p.c * np.stack([Ku11, Ku22, Ku12], axis=-1)
        M_hat_v = None  # degraded moment below

        gphi = np.einsum("em,em->e", N, phig)
        g = (3.0 - p.s) * gphi**2 - (2.0 - p.s) * gphi**3
        tau_hat = g[:, None] * tau_p + tau_m
        M_hat = (g * s_plus + 1.0 - s_plus)[:, None] * M_full

        # N^{ab} = sigma^{ab} + b^b_g M^{ga};  gamma = 1/2 N^{ab} a_{ab}
        sig = tau_hat / Jq[:, None]
        Mc = M_hat / Jq[:, None]
        sig_tr = sig[:, 0] * a11 + sig[:, 1] * a22 + 2 * sig[:, 2] * a12
        # b^b_g M^{ga} a_{ab} = tr([a][M][b_mixed^T])
        Mm = np.stack([np.stack([Mc[:, 0], Mc[:, 2]], -1),
                       np.stack([Mc[:, 2], Mc[:, 1]], -1)], -2)
        am = np.stack([np.stack([a11, a12], -1), np.stack([a12, a22], -1)], -2)
        bmix = np.stack([np.stack([bm11, bm12], -1), np.stack([bm21, bm22], -1)], -2)
        coup = np.einsum("eab,ega,ebg->e", am, Mm, bmix)
        gamma[:, q] = 0.5 * (sig_tr + coup)

        # fracture density from reference-surface operators
        phiq = gphi
        dphi = np.einsum("eam,em->ea", dN, phig)
        lap = np.einsum("em,em->e", cache.lapN[:, q], phig)
        g2 = (A11 * dphi[:, 0]**2 + A22 * dphi[:, 1]**2
              + 2 * A12 * dphi[:, 0] * dphi[:, 1])
        psifrac[:, q] = p.Gc / (4 * p.l0) * ((phiq - 1.0)**2 + 2 * p.l0**2 * g2
                                             + p.l0**4 * lap**2)

    return {"J": J, "psi_plus": res["psi_plus"], "psi_minus": res["psi_minus"],
            "psi_frac": psifrac, "gamma": gamma, "H": res["H"]}
