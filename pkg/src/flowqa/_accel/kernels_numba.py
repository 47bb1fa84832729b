"""Numba-jitted twins of the kernels in ``kernels_numpy``."""

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def conv2d_nchw(x, w, b, stride, pad):
    c, h, wd = x.shape
    k, _, kh, kw = w.shape
    if pad > 0:
        xp = np.zeros((c, h + 2 * pad, wd + 2 * pad), dtype=x.dtype)
        xp[:, pad:pad + h, pad:pad + wd] = x
    else:
        xp = x
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    out = np.empty((k, ho, wo), dtype=x.dtype)
    for ko in prange(k):
        for oy in range(ho):
            iy = oy * stride
            for ox in range(wo):
                ix = ox * stride
                acc = float(b[ko])
                for ci in range(c):
                    for uu in range(kh):
                        for vv in range(kw):
                            acc += xp[ci, iy + uu, ix + vv] * w[ko, ci, uu, vv]
                out[ko, oy, ox] = acc
    return out


@njit(cache=True, parallel=True)
def maxpool2d(x, k, stride):
    c, h, w = x.shape
    ho = (h - k) // stride + 1
    wo = (w - k) // stride + 1
    out = np.empty((c, ho, wo), dtype=x.dtype)
    for ci in prange(c):
        for oy in range(ho):
            iy = oy * stride
            for ox in range(wo):
                ix = ox * stride
                m = x[ci, iy, ix]
                for uu in range(k):
                    for vv in range(k):
                        val = x[ci, iy + uu, ix + vv]
                        if val > m:
                            m = val
                out[ci, oy, ox] = m
    return out


@njit(cache=True, inline="always")
def _bilinear(img, y, x):
    h, w = img.shape
    if y < 0.0:
        y = 0.0
    elif y > h - 1.0:
        y = h - 1.0
    if x < 0.0:
        x = 0.0
    elif x > w - 1.0:
        x = w - 1.0
    y0 = int(y)
    x0 = int(x)
    if y0 > h - 2:
        y0 = h - 2
    if x0 > w - 2:
        x0 = w - 2
    fy = y - y0
    fx = x - x0
    return (img[y0, x0] * (1 - fy) * (1 - fx) + img[y0, x0 + 1] * (1 - fy) * fx
            + img[y0 + 1, x0] * fy * (1 - fx) + img[y0 + 1, x0 + 1] * fy * fx)


@njit(cache=True, parallel=True)
def inverse_search(i1, i2, gx, gy, cy, cx, u0, v0, radius, iters, tol):
    n = cy.shape[0]
    u = np.empty(n)
    v = np.empty(n)
    res = np.zeros(n)
    for i in prange(n):
        yc = cy[i]
        xc = cx[i]
        hxx = 0.0
        hxy = 0.0
        hyy = 0.0
        for dy in range(-radius, radius + 1):
            for dx in range(-radius, radius + 1):
                gxx = gx[yc + dy, xc + dx]
                gyy = gy[yc + dy, xc + dx]
                hxx += gxx * gxx
                hxy += gxx * gyy
                hyy += gyy * gyy
        det = hxx * hyy - hxy * hxy
        ui = float(u0[i])
        vi = float(v0[i])
        npx = (2 * radius + 1) * (2 * radius + 1)
        if det > 1e-12:
            for _ in range(iters):
                bx = 0.0
                by = 0.0
                for dy in range(-radius, radius + 1):
                    for dx in range(-radius, radius + 1):
                        r = (_bilinear(i2, yc + dy + vi, xc + dx + ui)
                             - i1[yc + dy, xc + dx])
                        bx += gx[yc + dy, xc + dx] * r
                        by += gy[yc + dy, xc + dx] * r
                du = (hyy * bx - hxy * by) / det
                dv = (hxx * by - hxy * bx) / det
                ui -= du
                vi -= dv
                if du * du + dv * dv < tol:
                    break
        rr = 0.0
        for dy in range(-radius, radius + 1):
            for dx in range(-radius, radius + 1):
                r = (_bilinear(i2, yc + dy + vi, xc + dx + ui)
                     - i1[yc + dy, xc + dx])
                rr += r * r
        u[i] = ui
        v[i] = vi
        res[i] = rr / npx
    return u, v, res


@njit(cache=True)
def densify(cy, cx, u, v, err, radius, h, w):
    usum = np.zeros((h, w))
    vsum = np.zeros((h, w))
    wsum = np.zeros((h, w))
    n = cy.shape[0]
    for i in range(n):
        wgt = 1.0 / (1e-4 + err[i])
        for dy in range(-radius, radius + 1):
            y = cy[i] + dy
            for dx in range(-radius, radius + 1):
                x = cx[i] + dx
                usum[y, x] += wgt * u[i]
                vsum[y, x] += wgt * v[i]
                wsum[y, x] += wgt
    for y in range(h):
        for x in range(w):
            s = wsum[y, x]
            if s > 0.0:
                usum[y, x] /= s
                vsum[y, x] /= s
    return usum, vsum


@njit(cache=True)
def _smooth_once(a, strength):
    h, w = a.shape
    out = np.empty_like(a)
    for y in range(h):
        ym = y - 1 if y > 0 else 0
        yp = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            xm = x - 1 if x > 0 else 0
            xp = x + 1 if x < w - 1 else w - 1
            nb = 0.25 * (a[ym, x] + a[yp, x] + a[y, xm] + a[y, xp])
            out[y, x] = a[y, x] + strength * (nb - a[y, x])
    return out


@njit(cache=True)
def smooth_flow(u, v, strength, sweeps):
    cu = u.copy()
    cv = v.copy()
    for _ in range(sweeps):
        cu = _smooth_once(cu, strength)
        cv = _smooth_once(cv, strength)
    return cu, cv
