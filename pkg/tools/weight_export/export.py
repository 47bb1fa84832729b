#!/usr/bin/env python3
"""Export the feature trunk and LPIPS linear weights to a portable archive.

Reads the five-stage convolutional trunk and the per-channel linear
weights from the torch ecosystem and writes them in the flat FLPW layout
the metric toolkit consumes, together with parity fixtures: synthetic
test images, their recorded tap activations, and reference perceptual
scores computed here with torch ops. The toolkit's test suite replays
those fixtures without needing torch.

Sources:
  pretrained  torchvision AlexNet (ImageNet) + the lpips package's
              learned linear weights; requires their download locations
              to be reachable.
  synthetic   seeded random weights with the same architecture; fully
              offline and deterministic.

Usage: export.py --out <dir> [--source pretrained|synthetic] [--seed N]
"""

import argparse
import json
import struct
import sys

import numpy as np
import torch
import torch.nn.functional as F

MAGIC = b"FLPW"
VERSION = 1

# (name, out_channels, kernel, stride, padding, maxpool after relu)
STAGES = [
    ("conv1", 64, 11, 4, 2, True),
    ("conv2", 192, 5, 1, 2, True),
    ("conv3", 384, 3, 1, 1, False),
    ("conv4", 256, 3, 1, 1, False),
    ("conv5", 256, 3, 1, 1, False),
]

# Input normalization of the reference perceptual-distance pipeline.
NORM_SHIFT = np.array([-0.030, -0.088, -0.188], dtype=np.float32)
NORM_SCALE = np.array([0.458, 0.448, 0.450], dtype=np.float32)


class FetchError(RuntimeError):
    pass


def write_container(path, entries, manifest):
    """Serialize named f32 arrays + JSON manifest in the FLPW layout."""
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(entries))
    for name, arr in entries.items():
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        encoded = name.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<BB", 0, arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += arr.astype("<f4").tobytes()
    text = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    blob += struct.pack("<I", len(text.encode()))
    blob += text.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def write_ppm(path, rgb_u8):
    h, w, _ = rgb_u8.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb_u8.astype(np.uint8).tobytes())


def load_pretrained():
    """Trunk from torchvision AlexNet + linear weights from lpips."""
    try:
        from torchvision.models import AlexNet_Weights, alexnet
        model = alexnet(weights=AlexNet_Weights.IMAGENET1K_V1)
    except Exception as exc:
        raise FetchError(
            f"could not fetch pretrained trunk weights: {exc}") from exc
    convs = [m for m in model.features if isinstance(m, torch.nn.Conv2d)]
    trunk = {}
    for (name, *_), conv in zip(STAGES, convs):
        trunk[name] = (conv.weight.detach().to(torch.float32),
                       conv.bias.detach().to(torch.float32))

    try:
        import importlib.resources as res

        import lpips  # noqa: F401  (provides the packaged weight file)
        weight_file = res.files(lpips) / "weights" / "v0.1" / "alex.pth"
        state = torch.load(str(weight_file), map_location="cpu")
    except Exception as exc:
        raise FetchError(
            f"could not load learned linear weights: {exc}") from exc
    lins = []
    for i in range(5):
        vec = state[f"lin{i}.model.1.weight"].detach().flatten()
        lins.append(torch.clamp(vec, min=0.0).sqrt().to(torch.float32))
    return trunk, lins


def load_synthetic(seed):
    """Seeded random weights with the reference architecture.

    Kaiming-scaled conv kernels keep activations O(1) through the five
    stages; linear weights are non-negative with mean ~1/sqrt(C).
    """
    gen = torch.Generator().manual_seed(seed)
    trunk = {}
    in_c = 3
    lins = []
    for name, out_c, k, _, _, _ in STAGES:
        fan_in = in_c * k * k
        w = torch.randn(out_c, in_c, k, k, generator=gen) * (2.0 / fan_in) ** 0.5
        b = 0.05 * torch.randn(out_c, generator=gen)
        trunk[name] = (w.to(torch.float32), b.to(torch.float32))
        lins.append((0.5 * torch.randn(out_c, generator=gen).abs())
                    .to(torch.float32))
        in_c = out_c
    return trunk, lins


def trunk_forward(trunk, rgb):
    """Reference forward pass; returns the five post-relu tap tensors."""
    x = torch.from_numpy(rgb).permute(2, 0, 1).unsqueeze(0).to(torch.float32)
    x = 2.0 * x - 1.0
    x = (x - torch.from_numpy(NORM_SHIFT).view(1, 3, 1, 1)) \
        / torch.from_numpy(NORM_SCALE).view(1, 3, 1, 1)
    taps = []
    for name, _, _, stride, pad, pool in STAGES:
        w, b = trunk[name]
        x = F.conv2d(x, w, b, stride=stride, padding=pad)
        x = F.relu(x)
        taps.append(x[0].detach().numpy().astype(np.float32))
        if pool:
            x = F.max_pool2d(x, kernel_size=3, stride=2)
    return taps


def reference_score(taps_a, taps_b, lins):
    """Perceptual distance from recorded taps, torch-free math."""
    total = 0.0
    for ta, tb, lin in zip(taps_a, taps_b, lins):
        w = lin.numpy() if isinstance(lin, torch.Tensor) else lin
        na = ta / (np.sqrt((ta ** 2).sum(axis=0, keepdims=True,
                                         dtype=np.float32)) + 1e-10)
        nb = tb / (np.sqrt((tb ** 2).sum(axis=0, keepdims=True,
                                         dtype=np.float32)) + 1e-10)
        d = ((w[:, None, None] * (na - nb)) ** 2).sum(axis=0,
                                                      dtype=np.float64)
        total += float(d.mean())
    return total


def build_archive_entries(trunk, lins):
    entries = {}
    ops = []
    lin_names = []
    in_c = 3
    for i, (name, out_c, k, stride, pad, pool) in enumerate(STAGES):
        w, b = trunk[name]
        entries[f"{name}.weight"] = w.numpy()
        entries[f"{name}.bias"] = b.numpy()
        ops.append({"op": "conv", "weight": f"{name}.weight",
                    "bias": f"{name}.bias",
                    "kernel_shape": [out_c, in_c, k, k],
                    "stride": stride, "padding": pad, "tap": False})
        ops.append({"op": "relu", "tap": True})
        if pool:
            ops.append({"op": "maxpool", "kernel": 3, "stride": 2,
                        "tap": False})
        lname = f"lin{i + 1}.weight"
        entries[lname] = (lins[i].numpy() if isinstance(lins[i], torch.Tensor)
                          else lins[i])
        lin_names.append(lname)
        in_c = out_c
    entries["norm.shift"] = NORM_SHIFT
    entries["norm.scale"] = NORM_SCALE
    manifest = {
        "kind": "trunk",
        "normalization": {"shift": "norm.shift", "scale": "norm.scale"},
        "linear_weights": lin_names,
        "ops": ops,
    }
    return entries, manifest


def _texture(rng, size, sigma):
    """Smoothed noise without scipy: separable box blurs approximate it."""
    img = rng.standard_normal((size, size))
    reps = max(1, int(sigma))
    for _ in range(3 * reps):
        img = (np.roll(img, 1, 0) + img + np.roll(img, -1, 0)) / 3.0
        img = (np.roll(img, 1, 1) + img + np.roll(img, -1, 1)) / 3.0
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


def make_fixture_images(seed, size=64):
    """Four image pairs: localized noise, blur, unrelated scenes, identical."""
    rng = np.random.default_rng(seed)

    def rgb(base, tint):
        arr = np.stack([np.clip(base * t, 0, 1) for t in tint], axis=2)
        return np.clip(np.rint(arr * 255), 0, 255).astype(np.uint8)

    pairs = []
    a = rgb(_texture(rng, size, 2), (1.0, 0.8, 0.6))
    b = a.copy()
    patch = rng.integers(-60, 61, (20, 20, 3))
    b[22:42, 22:42] = np.clip(b[22:42, 22:42].astype(int) + patch, 0, 255)
    pairs.append((a, b))

    a = rgb(_texture(rng, size, 1), (0.7, 0.9, 1.0))
    blurred = a.astype(np.float64)
    for _ in range(6):
        blurred = (np.roll(blurred, 1, 0) + blurred
                   + np.roll(blurred, -1, 0)) / 3.0
        blurred = (np.roll(blurred, 1, 1) + blurred
                   + np.roll(blurred, -1, 1)) / 3.0
    pairs.append((a, blurred.astype(np.uint8)))

    pairs.append((rgb(_texture(rng, size, 3), (0.9, 0.9, 0.5)),
                  rgb(_texture(rng, size, 1), (0.5, 0.6, 0.9))))

    a = rgb(_texture(rng, size, 2), (0.8, 0.8, 0.8))
    pairs.append((a, a.copy()))
    return pairs


def export(out_dir, source="synthetic", seed=20221206):
    import os

    torch.set_num_threads(1)
    if source == "pretrained":
        trunk, lins = load_pretrained()
    else:
        trunk, lins = load_synthetic(seed)

    os.makedirs(out_dir, exist_ok=True)
    fixture_dir = os.path.join(out_dir, "fixtures")
    os.makedirs(fixture_dir, exist_ok=True)

    entries, manifest = build_archive_entries(trunk, lins)
    archive_path = os.path.join(out_dir, "weights.flpw")
    write_container(archive_path, entries, manifest)

    pairs = make_fixture_images(seed)
    trace_entries = {}
    pair_names = []
    scores = []
    for i, (img_a, img_b) in enumerate(pairs):
        names = (f"pair{i}_a", f"pair{i}_b")
        pair_names.append(list(names))
        taps = []
        for name, img in zip(names, (img_a, img_b)):
            write_ppm(os.path.join(fixture_dir, f"{name}.ppm"), img)
            t = trunk_forward(trunk, img.astype(np.float32) / 255.0)
            taps.append(t)
            for l, tap in enumerate(t, start=1):
                trace_entries[f"{name}.tap{l}"] = tap
        scores.append(reference_score(taps[0], taps[1], lins))
    trace_entries["scores"] = np.array(scores, dtype=np.float32)
    trace_manifest = {
        "kind": "parity",
        "pairs": pair_names,
        "score_entry": "scores",
        "source": source,
        "tap_count": 5,
    }
    write_container(os.path.join(fixture_dir, "traces.flpw"),
                    trace_entries, trace_manifest)

    # frame0.ppm: the canonical single-frame parity input
    with open(os.path.join(fixture_dir, "pair0_a.ppm"), "rb") as fh:
        frame0 = fh.read()
    with open(os.path.join(fixture_dir, "frame0.ppm"), "wb") as fh:
        fh.write(frame0)

    return archive_path, fixture_dir, scores


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--source", choices=("pretrained", "synthetic"),
                        default="pretrained")
    parser.add_argument("--seed", type=int, default=20221206,
                        help="generator seed for --source synthetic")
    args = parser.parse_args(argv)
    try:
        archive, fixtures, scores = export(args.out, args.source, args.seed)
    except FetchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: --source synthetic exports an offline seeded trunk",
              file=sys.stderr)
        return 2
    print(f"archive   {archive}")
    print(f"fixtures  {fixtures}")
    for i, s in enumerate(scores):
        print(f"pair{i} score {s!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
