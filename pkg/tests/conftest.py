import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from flowqa.container import write_container
from flowqa.media import Frame, VideoSequence, YUV420_8, frame_from_rgb

DATA_DIR = "data"


def textured(rng, height, width, coarse=6.0, fine=1.5):
    """Multi-scale smoothed noise in [0, 1]; good for flow estimation."""
    img = gaussian_filter(rng.standard_normal((height, width)), fine)
    img += 3.0 * gaussian_filter(rng.standard_normal((height, width)), coarse)
    lo, hi = img.min(), img.max()
    return ((img - lo) / (hi - lo)).astype(np.float64)


def textured_rgb_frame(rng, height, width):
    base = textured(rng, height, width)
    rgb = np.stack([np.clip(base + 0.05 * k, 0, 1) for k in range(3)], axis=2)
    return frame_from_rgb(rgb)


def yuv_frame(y, u=None, v=None):
    """Frame from a luma array; chroma defaults to neutral 128."""
    y = np.asarray(y, dtype=np.float32)
    h, w = y.shape
    ch, cw = -(-h // 2), -(-w // 2)
    if u is None:
        u = np.full((ch, cw), 128.0, np.float32)
    if v is None:
        v = np.full((ch, cw), 128.0, np.float32)
    return Frame(w, h, [y, np.asarray(u, np.float32),
                        np.asarray(v, np.float32)], YUV420_8)


def yuv_sequence(lumas, rate=None):
    from fractions import Fraction
    frames = [yuv_frame(y) for y in lumas]
    return VideoSequence(frames, rate or Fraction(30, 1))


def mini_trunk(rng, channels=(8, 12, 16, 16, 8)):
    """A small 5-tap trunk in the archive manifest layout.

    Same op pattern as the shipped trunk but with 3x3 kernels and few
    channels, so it runs on tiny inputs.
    """
    entries = {}
    ops = []
    in_c = 3
    specs = [
        ("conv1", channels[0], 2, 1),
        ("conv2", channels[1], 1, 1),
        ("conv3", channels[2], 1, 1),
        ("conv4", channels[3], 1, 1),
        ("conv5", channels[4], 1, 1),
    ]
    for i, (name, out_c, stride, pad) in enumerate(specs):
        k = rng.standard_normal((out_c, in_c, 3, 3)).astype(np.float32)
        k *= np.sqrt(2.0 / (in_c * 9))
        entries[f"{name}.weight"] = k
        entries[f"{name}.bias"] = 0.01 * rng.standard_normal(out_c).astype(
            np.float32)
        ops.append({"op": "conv", "weight": f"{name}.weight",
                    "bias": f"{name}.bias",
                    "kernel_shape": [out_c, in_c, 3, 3],
                    "stride": stride, "padding": pad, "tap": False})
        ops.append({"op": "relu", "tap": True})
        if i == 0:
            ops.append({"op": "maxpool", "kernel": 3, "stride": 2,
                        "tap": False})
        in_c = out_c
    lin_names = []
    for i, c in enumerate(channels, start=1):
        name = f"lin{i}.weight"
        entries[name] = np.abs(rng.standard_normal(c)).astype(np.float32)
        lin_names.append(name)
    entries["norm.shift"] = np.array([-0.030, -0.088, -0.188], np.float32)
    entries["norm.scale"] = np.array([0.458, 0.448, 0.450], np.float32)
    manifest = {
        "kind": "trunk",
        "normalization": {"shift": "norm.shift", "scale": "norm.scale"},
        "linear_weights": lin_names,
        "ops": ops,
    }
    return entries, manifest


@pytest.fixture
def mini_archive(tmp_path):
    from flowqa.trunk import load_weight_archive
    entries, manifest = mini_trunk(np.random.default_rng(7))
    path = tmp_path / "mini.flpw"
    write_container(path, entries, manifest)
    return load_weight_archive(path)


def toy_pyramid(rng, layers=((4, 6, 6), (6, 3, 3))):
    return [rng.standard_normal(shape) for shape in layers]


def toy_weights(rng, layers=((4, 6, 6), (6, 3, 3))):
    return [np.abs(rng.standard_normal(shape[0])) for shape in layers]
