"""Dense optical flow and flow-derived pooling weight maps.

The built-in estimator is a classic coarse-to-fine method: per pyramid
level, square patches are aligned by inverse-search iterations seeded
from the coarser level, patch displacements are blended into a dense
field weighted by inverse matching error, and a few smoothing sweeps
regularize the result. Externally computed flows can be injected as
Middlebury .flo files instead.
"""

import struct
from dataclasses import dataclass

import numpy as np

from flowqa import _accel
from flowqa.errors import ParseError, ShapeError, TruncationError
from flowqa.media import Frame, luma
from flowqa.resample import bilinear_resize

_FLO_MAGIC = 202021.25
_SMOOTH_SWEEPS = 4
_STEP_TOL = 1e-8  # squared px; stop iterating a patch below this


@dataclass(frozen=True)
class FlowParams:
    """Built-in estimator configuration."""

    levels: int = 5
    patch_size: int = 9
    iterations: int = 12
    smoothing: float = 0.5

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.patch_size < 3 or self.patch_size % 2 == 0:
            raise ValueError("patch_size must be odd and >= 3")


@dataclass
class FlowField:
    """Dense 2-channel motion field in pixels/frame."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise ShapeError("u and v must be equal-shaped 2D arrays")

    @property
    def height(self):
        return self.u.shape[0]

    @property
    def width(self):
        return self.u.shape[1]

    @property
    def shape(self):
        return self.u.shape


@dataclass
class WeightMap:
    """Non-negative spatial pooling weights summing to one."""

    w: np.ndarray
    uniform_fallback: bool = False

    def __post_init__(self):
        if self.w.ndim != 2:
            raise ShapeError("weight map must be 2D")
        if not np.isfinite(self.w).all() or (self.w < 0).any():
            raise ValueError("weight map entries must be finite and >= 0")
        if not self.uniform_fallback:
            total = float(self.w.sum())
            if abs(total - 1.0) > 1e-6:
                raise ValueError(
                    f"weight map sums to {total!r}, expected 1")

    @property
    def height(self):
        return self.w.shape[0]

    @property
    def width(self):
        return self.w.shape[1]


def uniform_weight_map(height, width, fallback=True):
    w = np.full((height, width), 1.0 / (height * width))
    return WeightMap(w, uniform_fallback=fallback)


def _gradients(img):
    gx = np.empty_like(img)
    gy = np.empty_like(img)
    gx[:, 1:-1] = 0.5 * (img[:, 2:] - img[:, :-2])
    gx[:, 0] = img[:, 1] - img[:, 0]
    gx[:, -1] = img[:, -1] - img[:, -2]
    gy[1:-1, :] = 0.5 * (img[2:, :] - img[:-2, :])
    gy[0, :] = img[1, :] - img[0, :]
    gy[-1, :] = img[-1, :] - img[-2, :]
    return gx, gy


def _binomial_decimate(img):
    """5-tap [1,4,6,4,1]/16 blur then 2x subsample, reflect edges."""
    def blur_axis(a, axis):
        p = np.pad(a, [(2, 2) if ax == axis else (0, 0)
                       for ax in range(a.ndim)], mode="reflect")
        sl = [slice(None)] * a.ndim

        def shifted(k):
            sl[axis] = slice(k, k + a.shape[axis])
            return p[tuple(sl)]

        return (0.0625 * (shifted(0) + shifted(4))
                + 0.25 * (shifted(1) + shifted(3))
                + 0.375 * shifted(2))

    return blur_axis(blur_axis(img, 0), 1)[::2, ::2]


def _patch_centers(extent, radius, stride):
    lo, hi = radius, extent - 1 - radius
    centers = list(range(lo, hi + 1, stride))
    if centers[-1] != hi:
        centers.append(hi)
    return np.asarray(centers, dtype=np.int64)


def _level_flow(i1, i2, seed_u, seed_v, params):
    h, w = i1.shape
    radius = params.patch_size // 2
    stride = max(1, radius)
    cy = _patch_centers(h, radius, stride)
    cx = _patch_centers(w, radius, stride)
    gy_px, gx_px = np.meshgrid(cy, cx, indexing="ij")
    cyf = gy_px.ravel()
    cxf = gx_px.ravel()
    u0 = seed_u[cyf, cxf]
    v0 = seed_v[cyf, cxf]
    gx, gy = _gradients(i1)
    u, v, err = _accel.inverse_search(i1, i2, gx, gy, cyf, cxf, u0, v0,
                                      radius, params.iterations, _STEP_TOL)
    du, dv = _accel.densify(cyf, cxf, u, v, err, radius, h, w)
    return _accel.smooth_flow(du, dv, params.smoothing, _SMOOTH_SWEEPS)


def estimate_flow(prev, next_, params=FlowParams()):
    """Dense flow from ``prev`` to ``next_`` (Frames or 2D luma arrays)."""
    i1 = luma(prev) if isinstance(prev, Frame) else np.asarray(prev)
    i2 = luma(next_) if isinstance(next_, Frame) else np.asarray(next_)
    if i1.shape != i2.shape or i1.ndim != 2:
        raise ShapeError(
            f"frames must be equal-sized, got {i1.shape} vs {i2.shape}")
    i1 = np.ascontiguousarray(i1, dtype=np.float64)
    i2 = np.ascontiguousarray(i2, dtype=np.float64)

    pyramid = [(i1, i2)]
    while (len(pyramid) < params.levels
           and min(pyramid[-1][0].shape) // 2 >= params.patch_size):
        a, b = pyramid[-1]
        pyramid.append((_binomial_decimate(a), _binomial_decimate(b)))

    u = np.zeros_like(pyramid[-1][0])
    v = np.zeros_like(u)
    for level in range(len(pyramid) - 1, -1, -1):
        a, b = pyramid[level]
        if u.shape != a.shape:
            sy = a.shape[0] / u.shape[0]
            sx = a.shape[1] / u.shape[1]
            u = bilinear_resize(u, *a.shape) * sx
            v = bilinear_resize(v, *a.shape) * sy
        u, v = _level_flow(a, b, u, v, params)
    return FlowField(u, v)


def write_flo(field, path):
    """Write a flow field in the Middlebury .flo layout."""
    h, w = field.shape
    data = np.empty((h, w, 2), dtype="<f4")
    data[:, :, 0] = field.u
    data[:, :, 1] = field.v
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", _FLO_MAGIC, w, h))
        fh.write(data.tobytes())


def read_flo(path):
    """Read a Middlebury .flo file into a FlowField."""
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12:
            raise TruncationError(f"{path}: shorter than the 12-byte header")
        magic, w, h = struct.unpack("<fii", head)
        if magic != np.float32(_FLO_MAGIC):
            raise ParseError(f"{path}: bad magic {magic!r}, not a .flo file")
        if w <= 0 or h <= 0:
            raise ParseError(f"{path}: invalid dimensions {w}x{h}")
        payload = fh.read()
    need = w * h * 2 * 4
    if len(payload) != need:
        raise TruncationError(
            f"{path}: payload has {len(payload)} of {need} bytes")
    data = np.frombuffer(payload, "<f4").reshape(h, w, 2)
    return FlowField(data[:, :, 0].astype(np.float32),
                     data[:, :, 1].astype(np.float32))


def _normalized_map(mag):
    total = float(mag.sum())
    if total < 1e-8:
        return uniform_weight_map(*mag.shape)
    return WeightMap(mag / total)


def flow_diff_weight(f_ref, f_dis):
    """Pooling weights from per-pixel reference/distorted flow discrepancy.

    Falls back to a uniform map when the fields (nearly) agree, which
    makes the weighted metric degrade gracefully to the unweighted one.
    """
    if f_ref.shape != f_dis.shape:
        raise ShapeError(
            f"flow fields differ in size: {f_ref.shape} vs {f_dis.shape}")
    mag = np.hypot(np.asarray(f_ref.u, np.float64) - f_dis.u,
                   np.asarray(f_ref.v, np.float64) - f_dis.v)
    return _normalized_map(mag)


def flow_magnitude_weight(field):
    """Pooling weights from a single field's per-pixel magnitude."""
    mag = np.hypot(np.asarray(field.u, np.float64),
                   np.asarray(field.v, np.float64))
    return _normalized_map(mag)
