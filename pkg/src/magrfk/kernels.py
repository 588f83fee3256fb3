"""Hot inner loops: P1 element matrices and exact level slicing of P1 fields.

Every kernel exists twice, a numba loop (``*_nb``) and a vectorised numpy
version (``*_np``). The public name dispatches on :data:`magrfk._accel.USE_NUMBA`.
Both paths must agree to rounding; ``tests/test_kernels.py`` checks this.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# geometry of P1 triangles

def triangle_geometry(vertices, triangles):
    """Signed areas and constant basis gradients of every triangle.

    Returns ``area`` with shape (nt,) and ``grad`` with shape (nt, 3, 2), where
    ``grad[e, i]`` is the gradient of the hat function of local vertex ``i``.
    """
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * det
    # gradient of lambda_i is rot90 of the opposite edge over 2|T|
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    grad = np.empty((len(triangles), 3, 2))
    for i, e in enumerate((e0, e1, e2)):
        grad[:, i, 0] = -e[:, 1] / det
        grad[:, i, 1] = e[:, 0] / det
    return area, grad


# ---------------------------------------------------------------------------
# magnetic element matrices

@njit
def _magnetic_local_nb(area, grad, A, beta):
    nt = area.shape[0]
    S = np.empty((nt, 3, 3), dtype=np.complex128)
    M = np.empty((nt, 3, 3))
    for e in range(nt):
        ar = area[e]
        a0 = A[e, 0]
        a1 = A[e, 1]
        aa = beta * beta * (a0 * a0 + a1 * a1)
        for k in range(3):
            for j in range(3):
                gg = grad[e, j, 0] * grad[e, k, 0] + grad[e, j, 1] * grad[e, k, 1]
                ad = a0 * (grad[e, j, 0] - grad[e, k, 0]) + a1 * (grad[e, j, 1] - grad[e, k, 1])
                m = ar / 12.0 if j != k else ar / 6.0
                S[e, k, j] = ar * gg + aa * m + 1j * (beta * ar / 3.0 * ad)
                M[e, k, j] = m
    return S, M


def _magnetic_local_np(area, grad, A, beta):
    gg = np.einsum("ejd,ekd->ekj", grad, grad)
    ag = np.einsum("ed,ejd->ej", A, grad)
    cross = ag[:, None, :] - ag[:, :, None]
    m = np.full((3, 3), 1.0 / 12.0) + np.eye(3) / 12.0
    M = area[:, None, None] * m[None]
    aa = beta * beta * np.einsum("ed,ed->e", A, A)
    S = area[:, None, None] * gg + aa[:, None, None] * M
    S = S + 1j * (beta / 3.0) * area[:, None, None] * cross
    return S, M


def magnetic_local(area, grad, A, beta):
    """Element matrices of ``int |grad u - i beta A u|^2`` and of the mass form.

    ``A`` is constant per triangle, so the 3-point mid-edge rule integrates
    every P1 product exactly; the closed forms are used directly.
    ``S[e, k, j]`` couples test function ``k`` with trial function ``j``.
    """
    area = np.ascontiguousarray(area, dtype=np.float64)
    grad = np.ascontiguousarray(grad, dtype=np.float64)
    A = np.ascontiguousarray(A, dtype=np.float64)
    if USE_NUMBA:
        return _magnetic_local_nb(area, grad, A, float(beta))
    return _magnetic_local_np(area, grad, A, float(beta))


# ---------------------------------------------------------------------------
# exact slicing of a P1 field by horizontal planes

@njit
def _slice_levels_nb(vals, pts, gnorm, area, thresholds):
    m = thresholds.shape[0]
    nt = vals.shape[0]
    mu = np.zeros(m)
    gamma = np.zeros(m)
    perim = np.zeros(m)
    flux = np.zeros(m)
    ncut = np.zeros(m, dtype=np.int64)
    nfull = np.zeros(m, dtype=np.int64)
    for j in range(m):
        t = thresholds[j]
        for e in range(nt):
            na = 0
            for i in range(3):
                if vals[e, i] > t:
                    na += 1
            if na == 0:
                continue
            if na == 3:
                mu[j] += area[e]
                nfull[j] += 1
                continue
            # the vertex alone on its side of the cut
            o = 0
            for i in range(3):
                up = vals[e, i] > t
                if (na == 1 and up) or (na == 2 and not up):
                    o = i
            p = (o + 1) % 3
            q = (o + 2) % 3
            vo = vals[e, o]
            sp = (t - vo) / (vals[e, p] - vo)
            sq = (t - vo) / (vals[e, q] - vo)
            small = area[e] * sp * sq
            if na == 1:
                mu[j] += small
            else:
                mu[j] += area[e] - small
            xpx = pts[e, o, 0] + sp * (pts[e, p, 0] - pts[e, o, 0])
            xpy = pts[e, o, 1] + sp * (pts[e, p, 1] - pts[e, o, 1])
            xqx = pts[e, o, 0] + sq * (pts[e, q, 0] - pts[e, o, 0])
            xqy = pts[e, o, 1] + sq * (pts[e, q, 1] - pts[e, o, 1])
            ln = np.sqrt((xpx - xqx) ** 2 + (xpy - xqy) ** 2)
            g = gnorm[e]
            perim[j] += ln
            flux[j] += ln * g
            if g > 0.0:
                gamma[j] += ln / g
            ncut[j] += 1
    return mu, gamma, perim, flux, ncut, nfull


def _slice_levels_np(vals, pts, gnorm, area, thresholds):
    m = len(thresholds)
    mu = np.zeros(m)
    gamma = np.zeros(m)
    perim = np.zeros(m)
    flux = np.zeros(m)
    ncut = np.zeros(m, dtype=np.int64)
    nfull = np.zeros(m, dtype=np.int64)
    idx = np.arange(len(vals))
    for j, t in enumerate(thresholds):
        up = vals > t
        na = up.sum(axis=1)
        mu[j] = area[na == 3].sum()
        nfull[j] = np.count_nonzero(na == 3)
        cut = (na == 1) | (na == 2)
        if not cut.any():
            continue
        e = idx[cut]
        o = np.where(na[cut] == 1, np.argmax(up[cut], axis=1), np.argmin(up[cut], axis=1))
        p = (o + 1) % 3
        q = (o + 2) % 3
        vo = vals[e, o]
        sp = (t - vo) / (vals[e, p] - vo)
        sq = (t - vo) / (vals[e, q] - vo)
        small = area[e] * sp * sq
        mu[j] += np.where(na[cut] == 1, small, area[e] - small).sum()
        po = pts[e, o]
        xp = po + sp[:, None] * (pts[e, p] - po)
        xq = po + sq[:, None] * (pts[e, q] - po)
        ln = np.hypot(*(xp - xq).T)
        g = gnorm[e]
        perim[j] = ln.sum()
        flux[j] = (ln * g).sum()
        pos = g > 0.0
        gamma[j] = (ln[pos] / g[pos]).sum()
        ncut[j] = len(e)
    return mu, gamma, perim, flux, ncut, nfull


def slice_levels(vals, pts, gnorm, area, thresholds):
    """Exact super-level areas and level-line integrals of a P1 field.

    Parameters
    ----------
    vals : (nt, 3) nodal values per triangle
    pts : (nt, 3, 2) vertex coordinates per triangle
    gnorm : (nt,) gradient norm per triangle
    area : (nt,) triangle areas
    thresholds : (m,) cut levels

    Returns
    -------
    mu, gamma, perimeter, flux, ncut, nfull
        ``mu[j] = |{u > t_j}|``; along the polyline ``{u = t_j}``: ``gamma`` is
        the integral of ``1/|grad u|``, ``perimeter`` its length, ``flux`` the
        integral of ``|grad u|``; ``ncut`` counts the cut triangles and
        ``nfull`` the triangles lying entirely above the level.
    """
    args = [np.ascontiguousarray(x, dtype=np.float64) for x in (vals, pts, gnorm, area, thresholds)]
    if USE_NUMBA:
        return _slice_levels_nb(*args)
    return _slice_levels_np(*args)
