"""Pretrained convolutional feature trunk evaluated from a weight archive.

The trunk architecture is not hard-coded: the archive manifest lists the
op sequence (conv / relu / maxpool) and flags which activations are the
five feature taps, so alternative trunks load without code changes. All
arithmetic is float32.
"""

from dataclasses import dataclass

import numpy as np

from flowqa import _accel
from flowqa.container import read_container
from flowqa.errors import ShapeError, SizeError, ValidationError
from flowqa.media import RGB_FLOAT, Frame, rgb_array


@dataclass(frozen=True)
class LayerOp:
    """One trunk stage from the archive manifest."""

    op: str                      # conv | relu | maxpool
    weight: str = ""             # conv: archive entry names
    bias: str = ""
    kernel_shape: tuple = ()     # conv: (out_c, in_c, kh, kw)
    kernel: int = 0              # maxpool window
    stride: int = 1
    padding: int = 0
    tap: bool = False


@dataclass(frozen=True)
class WeightArchive:
    """Validated trunk parameters, linear weights and normalization."""

    entries: dict
    ops: tuple
    shift: np.ndarray            # input normalization, 3 values
    scale: np.ndarray
    linear_weights: tuple        # one non-negative vector per tap
    path: str = ""

    @property
    def tap_channels(self):
        return tuple(w.shape[0] for w in self.linear_weights)


def _manifest_ops(manifest, entries, path):
    ops = []
    channels = 3
    tap_channels = []
    for i, spec in enumerate(manifest["ops"]):
        kind = spec.get("op")
        if kind == "conv":
            shape = tuple(spec["kernel_shape"])
            for key in ("weight", "bias"):
                name = spec[key]
                if name not in entries:
                    raise ValidationError(
                        f"{path}: manifest references missing entry {name!r}")
            wshape = entries[spec["weight"]].shape
            if wshape != shape:
                raise ValidationError(
                    f"{path}: entry {spec['weight']!r} has shape "
                    f"{wshape}, manifest says {shape}")
            bshape = entries[spec["bias"]].shape
            if bshape != (shape[0],):
                raise ValidationError(
                    f"{path}: entry {spec['bias']!r} has shape {bshape}, "
                    f"expected ({shape[0]},)")
            if shape[1] != channels:
                raise ValidationError(
                    f"{path}: op {i} expects {shape[1]} input channels, "
                    f"pipeline carries {channels}")
            channels = shape[0]
            ops.append(LayerOp("conv", weight=spec["weight"],
                               bias=spec["bias"], kernel_shape=shape,
                               stride=int(spec.get("stride", 1)),
                               padding=int(spec.get("padding", 0)),
                               tap=bool(spec.get("tap", False))))
        elif kind == "relu":
            ops.append(LayerOp("relu", tap=bool(spec.get("tap", False))))
        elif kind == "maxpool":
            ops.append(LayerOp("maxpool", kernel=int(spec.get("kernel", 3)),
                               stride=int(spec.get("stride", 2)),
                               tap=bool(spec.get("tap", False))))
        else:
            raise ValidationError(f"{path}: unknown op kind {kind!r} at {i}")
        if ops[-1].tap:
            tap_channels.append(channels)
    return tuple(ops), tap_channels


def load_weight_archive(path):
    """Load and validate a trunk weight archive."""
    entries, manifest = read_container(path)
    for key in ("ops", "normalization", "linear_weights"):
        if key not in manifest:
            raise ValidationError(f"{path}: manifest missing {key!r}")
    for name, arr in entries.items():
        if not np.isfinite(arr).all():
            raise ValidationError(f"{path}: entry {name!r} has non-finite "
                                  "values")

    ops, tap_channels = _manifest_ops(manifest, entries, path)
    if sum(1 for op in ops if op.tap) != 5:
        raise ValidationError(
            f"{path}: expected exactly 5 tap-flagged ops, found "
            f"{sum(1 for op in ops if op.tap)}")

    norm = manifest["normalization"]
    vectors = []
    for key in ("shift", "scale"):
        name = norm.get(key, "")
        if name not in entries or entries[name].shape != (3,):
            raise ValidationError(
                f"{path}: normalization {key} entry {name!r} missing or "
                "not a 3-vector")
        vectors.append(entries[name])
    shift, scale = vectors

    lin_names = manifest["linear_weights"]
    if len(lin_names) != len(tap_channels):
        raise ValidationError(
            f"{path}: {len(lin_names)} linear weight vectors for "
            f"{len(tap_channels)} taps")
    lins = []
    for name, ch in zip(lin_names, tap_channels):
        if name not in entries:
            raise ValidationError(
                f"{path}: manifest references missing entry {name!r}")
        vec = entries[name]
        if vec.shape != (ch,):
            raise ValidationError(
                f"{path}: entry {name!r} has shape {vec.shape}, tap has "
                f"{ch} channels")
        if (vec < 0).any():
            raise ValidationError(
                f"{path}: entry {name!r} has negative linear weights")
        lins.append(vec)

    return WeightArchive(entries=entries, ops=ops, shift=shift, scale=scale,
                         linear_weights=tuple(lins), path=str(path))


def conv2d(x, kernel, bias, stride=1, padding=0):
    """Cross-correlation with zero padding over a (C, H, W) map."""
    x = np.asarray(x)
    kernel = np.asarray(kernel, dtype=x.dtype)
    bias = np.asarray(bias, dtype=x.dtype)
    if x.ndim != 3 or kernel.ndim != 4:
        raise ShapeError("conv2d expects (C,H,W) input and (K,C,kh,kw) kernel")
    if kernel.shape[1] != x.shape[0]:
        raise ShapeError(
            f"kernel expects {kernel.shape[1]} input channels, map has "
            f"{x.shape[0]}")
    if (x.shape[1] + 2 * padding < kernel.shape[2]
            or x.shape[2] + 2 * padding < kernel.shape[3]):
        raise SizeError("kernel larger than padded input")
    return _accel.conv2d_nchw(np.ascontiguousarray(x),
                              np.ascontiguousarray(kernel),
                              np.ascontiguousarray(bias),
                              int(stride), int(padding))


def relu(x):
    return np.maximum(x, 0)


def maxpool(x, kernel=3, stride=2):
    x = np.asarray(x)
    if x.shape[1] < kernel or x.shape[2] < kernel:
        raise SizeError(f"maxpool window {kernel} exceeds input "
                        f"{x.shape[1]}x{x.shape[2]}")
    return _accel.maxpool2d(np.ascontiguousarray(x), int(kernel), int(stride))


def _op_output_size(op, size):
    if op.op == "conv":
        k = op.kernel_shape[2]
        return (size + 2 * op.padding - k) // op.stride + 1
    if op.op == "maxpool":
        return (size - op.kernel) // op.stride + 1
    return size


def _sizes_ok(ops, size):
    for op in ops:
        size = _op_output_size(op, size)
        if size < 1:
            return False
    return True


def minimum_input_size(archive):
    """Smallest square input for which every trunk stage stays >= 1 px."""
    for n in range(1, 4097):
        if _sizes_ok(archive.ops, n):
            return n
    raise ValidationError(f"{archive.path}: trunk never produces output")


def extract_features(frame, archive):
    """Run the trunk on an RGB frame; return the 5 tap maps coarse-to-fine.

    The input is mapped to [-1, 1] and then shifted/scaled by the archive
    normalization vectors. Taps are the flagged post-activation outputs,
    ordered as they occur (spatial size never increases along the list).
    """
    if isinstance(frame, Frame):
        if frame.colorspace != RGB_FLOAT:
            raise ValueError("extract_features expects an RGB_FLOAT frame")
        x = rgb_array(frame)
    else:
        x = np.asarray(frame, dtype=np.float32)
        if x.ndim != 3 or x.shape[0] != 3:
            raise ShapeError(f"expected (3, H, W) input, got {x.shape}")
    h, w = x.shape[1], x.shape[2]
    if not (_sizes_ok(archive.ops, h) and _sizes_ok(archive.ops, w)):
        raise SizeError(
            f"input {w}x{h} too small for the trunk; minimum is "
            f"{minimum_input_size(archive)} pixels per side")

    x = (2.0 * x - 1.0 - archive.shift[:, None, None]) \
        / archive.scale[:, None, None]
    x = x.astype(np.float32)
    taps = []
    for op in archive.ops:
        if op.op == "conv":
            x = conv2d(x, archive.entries[op.weight],
                       archive.entries[op.bias], op.stride, op.padding)
        elif op.op == "relu":
            x = relu(x)
        else:
            x = maxpool(x, op.kernel, op.stride)
        if op.tap:
            taps.append(x)
    return taps
