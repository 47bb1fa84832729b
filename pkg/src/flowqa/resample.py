"""Bilinear resampling of single-channel maps."""

import numpy as np


def bilinear_resize(a, out_h, out_w):
    """Resize (H, W) array to (out_h, out_w), pixel centers aligned.

    Sample positions follow the half-pixel convention: destination pixel
    centers map to ``(i + 0.5) * scale - 0.5`` in the source, clamped at
    the borders. Resizing to the same shape is the identity.
    """
    a = np.asarray(a, dtype=np.float64)
    h, w = a.shape
    if (h, w) == (out_h, out_w):
        return a.copy()
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.minimum(ys.astype(np.int64), h - 2) if h > 1 else np.zeros(out_h, np.int64)
    x0 = np.minimum(xs.astype(np.int64), w - 2) if w > 1 else np.zeros(out_w, np.int64)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    top = a[np.ix_(y0, x0)] * (1 - fx) + a[np.ix_(y0, x1)] * fx
    bot = a[np.ix_(y1, x0)] * (1 - fx) + a[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy
