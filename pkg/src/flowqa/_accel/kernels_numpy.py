"""Pure-numpy implementations of the hot kernels.

Every function here has a numba twin in ``kernels_numba``; the two must
agree to float rounding. The numpy versions vectorize over patches and
output pixels instead of looping.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_nchw(x, w, b, stride, pad):
    """Cross-correlate ``x`` (C,H,W) with ``w`` (K,C,kh,kw), zero padding."""
    c, h, wd = x.shape
    k, _, kh, kw = w.shape
    if pad > 0:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    ho, wo = win.shape[1], win.shape[2]
    cols = win.transpose(1, 2, 0, 3, 4).reshape(ho * wo, c * kh * kw)
    out = cols @ w.reshape(k, c * kh * kw).T
    out += b[None, :]
    return np.ascontiguousarray(out.reshape(ho, wo, k).transpose(2, 0, 1))


def maxpool2d(x, k, stride):
    """Windowed maximum over (C,H,W), no padding."""
    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    return win.max(axis=(3, 4))


def inverse_search(i1, i2, gx, gy, cy, cx, u0, v0, radius, iters, tol):
    """Translation-only inverse-compositional alignment of square patches.

    Template gradients come from ``i1``; each iteration samples ``i2`` at
    the displaced patch and solves the fixed 2x2 normal system. Patches
    freeze once their update falls below ``tol``. Returns per-patch
    displacement (u, v) and mean squared residual.
    """
    h, w = i1.shape
    n = cy.shape[0]
    offs = np.arange(-radius, radius + 1, dtype=np.int64)
    oy = np.repeat(offs, offs.size)
    ox = np.tile(offs, offs.size)

    py = cy[:, None] + oy[None, :]
    px = cx[:, None] + ox[None, :]
    t = i1[py, px]
    tgx = gx[py, px]
    tgy = gy[py, px]

    hxx = (tgx * tgx).sum(axis=1)
    hxy = (tgx * tgy).sum(axis=1)
    hyy = (tgy * tgy).sum(axis=1)
    det = hxx * hyy - hxy * hxy
    solvable = det > 1e-12
    det = np.where(solvable, det, 1.0)

    def _sample(u, v):
        sy = np.clip(py + v[:, None], 0.0, h - 1.0)
        sx = np.clip(px + u[:, None], 0.0, w - 1.0)
        y0 = np.minimum(sy.astype(np.int64), h - 2)
        x0 = np.minimum(sx.astype(np.int64), w - 2)
        fy = sy - y0
        fx = sx - x0
        return (i2[y0, x0] * (1 - fy) * (1 - fx) + i2[y0, x0 + 1] * (1 - fy) * fx
                + i2[y0 + 1, x0] * fy * (1 - fx) + i2[y0 + 1, x0 + 1] * fy * fx)

    u = u0.astype(np.float64).copy()
    v = v0.astype(np.float64).copy()
    active = solvable.copy()
    for _ in range(iters):
        if not active.any():
            break
        r = _sample(u, v) - t
        bx = (tgx * r).sum(axis=1)
        by = (tgy * r).sum(axis=1)
        du = (hyy * bx - hxy * by) / det
        dv = (hxx * by - hxy * bx) / det
        step = np.where(active, 1.0, 0.0)
        u -= step * du
        v -= step * dv
        active &= (du * du + dv * dv) >= tol
    r = _sample(u, v) - t
    res = (r * r).mean(axis=1)
    return u, v, res


def densify(cy, cx, u, v, err, radius, h, w):
    """Scatter patch displacements to a dense field, inverse-error weighted."""
    n = cy.shape[0]
    offs = np.arange(-radius, radius + 1, dtype=np.int64)
    oy = np.repeat(offs, offs.size)
    ox = np.tile(offs, offs.size)
    py = (cy[:, None] + oy[None, :]).ravel()
    px = (cx[:, None] + ox[None, :]).ravel()
    wgt = (1.0 / (1e-4 + err))[:, None].repeat(oy.size, axis=1).ravel()
    flat = py * w + px

    usum = np.zeros(h * w)
    vsum = np.zeros(h * w)
    wsum = np.zeros(h * w)
    np.add.at(usum, flat, wgt * u[:, None].repeat(oy.size, axis=1).ravel())
    np.add.at(vsum, flat, wgt * v[:, None].repeat(oy.size, axis=1).ravel())
    np.add.at(wsum, flat, wgt)
    covered = wsum > 0.0
    usum[covered] /= wsum[covered]
    vsum[covered] /= wsum[covered]
    return usum.reshape(h, w), vsum.reshape(h, w)


def _neighbor_mean(a):
    p = np.pad(a, 1, mode="edge")
    return 0.25 * (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:])


def smooth_flow(u, v, strength, sweeps):
    """Blend each flow component toward its 4-neighbor mean, ``sweeps`` times."""
    u = u.copy()
    v = v.copy()
    for _ in range(sweeps):
        u += strength * (_neighbor_mean(u) - u)
        v += strength * (_neighbor_mean(v) - v)
    return u, v
