"""Univariate B-spline evaluation on local knot vectors.

A local knot vector of length p+2 defines exactly one B-spline of degree p.
Evaluation is vectorized over a batch of local vectors and a batch of points
so a whole element (or mesh) can be evaluated in a handful of numpy calls.
"""

from __future__ import annotations

import numpy as np


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Elementwise num/den with the B-spline convention 0/0 = 0."""
    out = np.zeros(np.broadcast_shapes(num.shape, den.shape))
    np.divide(num, den, out=out, where=den != 0.0)
    return out


def local_bspline(knots: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate single B-splines given by local knot vectors.

    Parameters
    ----------
    knots : (m, p+2) array
        One local knot vector per row, non-decreasing.
    x : (k,) or (m, k) array
        Evaluation points, shared across rows or one set per row.

    Returns
    -------
    (value, d1, d2) : three (m, k) arrays
        Function value and first/second derivatives with respect to the
        parametric coordinate.  At the right end of a local vector the
        limit from the left is used, so clamped-end functions evaluate
        to 1 at the patch boundary.
    """
    knots = np.asarray(knots, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m, n_knots = knots.shape
    p = n_knots - 2
    if p < 0:
        raise ValueError("local knot vector needs at least 2 knots")

    t = knots[:, None, :]          # (m, 1, p+2)
    if x.ndim == 1:
        xx = x[None, :, None]      # (1, k, 1)
    else:
        xx = x[:, :, None]         # (m, k, 1)

    # Degree-0 pieces on the p+1 spans, half-open [t_j, t_{j+1}).  The last
    # nonzero span is additionally closed on the right when the final knot
    # has full multiplicity p+1 (a clamped patch boundary, where the
    # function value does not vanish); at simple interior support ends the
    # half-open convention alone keeps values and derivatives consistent.
    lo = t[..., :-1]
    hi = t[..., 1:]
    ind = (xx >= lo) & (xx < hi)
    last = t[:, :, -1:]
    clamped = (t == last).sum(axis=-1, keepdims=True) >= p + 1   # (m, 1, 1)
    at_end = (xx == last) & (hi == last) & (lo < hi) & clamped
    # Close only the final nonzero span: mask out all but the last True.
    rev = at_end[..., ::-1]
    first_rev = np.cumsum(rev, axis=-1) == 1
    at_end = (rev & first_rev)[..., ::-1]
    N = (ind | at_end).astype(float)   # (m, k, p+1)

    levels = [N]
    for q in range(1, p + 1):
        prev = levels[-1]
        nfun = p + 1 - q
        w1 = _safe_div(xx - t[..., :nfun], t[..., q:q + nfun] - t[..., :nfun])
        w2 = _safe_div(t[..., q + 1:q + 1 + nfun] - xx,
                       t[..., q + 1:q + 1 + nfun] - t[..., 1:1 + nfun])
        levels.append(w1 * prev[..., :nfun] + w2 * prev[..., 1:nfun + 1])

    val = levels[p][..., 0]

    if p == 0:
        z = np.zeros_like(val)
        return val, z, z

    def deriv_coeffs(level: int) -> np.ndarray:
        """First derivatives of the degree-`level+1` pieces built on `levels[level]`."""
        q = level + 1
        nfun = p + 1 - q
        base = levels[level]
        den_l = t[..., q:q + nfun] - t[..., :nfun]
        den_r = t[..., q + 1:q + 1 + nfun] - t[..., 1:1 + nfun]
        return q * (_safe_div(base[..., :nfun], den_l)
                    - _safe_div(base[..., 1:nfun + 1], den_r))

    d1 = deriv_coeffs(p - 1)[..., 0]

    if p == 1:
        z = np.zeros_like(val)
        return val, d1, z

    # Second derivative: differentiate the degree-(p-1) pieces once more.
    dq = deriv_coeffs(p - 2)            # (m, k, 2): d/dx of the two degree-(p-1) pieces
    den_l = t[..., p:p + 1] - t[..., :1]
    den_r = t[..., p + 1:] - t[..., 1:2]
    d2 = p * (_safe_div(dq[..., :1], den_l) - _safe_div(dq[..., 1:2], den_r))[..., 0]

    return val, d1, d2
