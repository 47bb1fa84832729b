"""Frame- and video-level quality metric drivers.

PSNR and SSIM operate on BT.709 luma code values (0-255). The perceptual
metrics run the feature trunk per frame; the flow-weighted variant pools
each frame-pair's feature differences with a weight map derived from the
flow fields of the pair, in one of three modes: the flow difference
(``diff``), or the magnitude of the reference (``ref``) or distorted
(``dis``) flow alone.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from flowqa.errors import ProviderError, ShapeError, SizeError
from flowqa.flow import (
    FlowParams,
    estimate_flow,
    flow_diff_weight,
    flow_magnitude_weight,
    read_flo,
)
from flowqa.lpips import lpips_pair, weighted_lpips_pair
from flowqa.media import YUV420_8, ensure_rgb, luma
from flowqa.trunk import extract_features

PSNR_MAX = 255.0
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03

WEIGHT_MODES = ("diff", "ref", "dis")
_MODE_IDS = {"diff": "flolpips", "ref": "flolpips_refw", "dis": "flolpips_disw"}


@dataclass
class MetricScore:
    """Per-frame scores plus their arithmetic mean."""

    metric_id: str
    per_frame: list
    video_score: float = field(init=False)

    def __post_init__(self):
        values = [s for _, s in self.per_frame]
        self.video_score = float(np.mean(values))


def _luma_codes(frame):
    if frame.colorspace == YUV420_8:
        return frame.channels[0].astype(np.float64)
    return luma(frame).astype(np.float64) * 255.0


def psnr(ref, dis):
    """Peak signal-to-noise ratio in dB on luma; +inf when identical."""
    if ref.size != dis.size:
        raise ShapeError(f"frame sizes differ: {ref.size} vs {dis.size}")
    a = _luma_codes(ref)
    b = _luma_codes(dis)
    mse = float(((a - b) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PSNR_MAX * PSNR_MAX / mse)


def _gaussian_window(n, sigma):
    x = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    """Separable correlation, valid region only (no padding)."""
    n = g.size
    wide = img.shape[1] - n + 1
    rows = np.zeros((img.shape[0], wide))
    for k in range(n):
        rows += g[k] * img[:, k:k + wide]
    tall = img.shape[0] - n + 1
    out = np.zeros((tall, wide))
    for k in range(n):
        out += g[k] * rows[k:k + tall, :]
    return out


def ssim(ref, dis):
    """Single-scale SSIM on luma, mean over the valid (unpadded) map."""
    if ref.size != dis.size:
        raise ShapeError(f"frame sizes differ: {ref.size} vs {dis.size}")
    if ref.width < _SSIM_WINDOW or ref.height < _SSIM_WINDOW:
        raise SizeError(
            f"frames must be at least {_SSIM_WINDOW}x{_SSIM_WINDOW} for SSIM")
    x = _luma_codes(ref)
    y = _luma_codes(dis)
    g = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    c1 = (_SSIM_K1 * PSNR_MAX) ** 2
    c2 = (_SSIM_K2 * PSNR_MAX) ** 2
    mu_x = _filter_valid(x, g)
    mu_y = _filter_valid(y, g)
    var_x = _filter_valid(x * x, g) - mu_x * mu_x
    var_y = _filter_valid(y * y, g) - mu_y * mu_y
    cov = _filter_valid(x * y, g) - mu_x * mu_y
    s = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)
         / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)))
    return float(s.mean())


class BuiltinFlowProvider:
    """Estimates both flows of a pair with the built-in method."""

    def __init__(self, params=FlowParams()):
        self.params = params

    def pair_flows(self, ref_prev, ref_next, dis_prev, dis_next, index):
        return (estimate_flow(ref_prev, ref_next, self.params),
                estimate_flow(dis_prev, dis_next, self.params))


class FloDirectoryProvider:
    """Serves precomputed flows from ``ref_%06d.flo`` / ``dis_%06d.flo``.

    Files are indexed by the second frame of each pair (0-based).
    """

    def __init__(self, directory):
        self.directory = str(directory)

    def pair_flows(self, ref_prev, ref_next, dis_prev, dis_next, index):
        fields = []
        for prefix in ("ref", "dis"):
            path = os.path.join(self.directory, f"{prefix}_{index:06d}.flo")
            if not os.path.exists(path):
                raise ProviderError(
                    f"missing flow file for pair index {index}: {path}")
            fields.append(read_flo(path))
        return tuple(fields)


def _check_sequences(ref_seq, dis_seq, minimum):
    if len(ref_seq) != len(dis_seq):
        raise ShapeError(
            f"sequence lengths differ: {len(ref_seq)} vs {len(dis_seq)}")
    if (ref_seq.width, ref_seq.height) != (dis_seq.width, dis_seq.height):
        raise ShapeError("sequence dimensions differ")
    if len(ref_seq) < minimum:
        raise SizeError(
            f"need at least {minimum} frames, got {len(ref_seq)}")


def _map_frames(func, items, workers):
    if workers == 0:
        workers = os.cpu_count() or 1
    if workers == 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def score_video_psnr(ref_seq, dis_seq, workers=1):
    _check_sequences(ref_seq, dis_seq, 1)
    scores = _map_frames(
        lambda t: psnr(ref_seq.frames[t], dis_seq.frames[t]),
        range(len(ref_seq)), workers)
    return MetricScore("psnr", list(enumerate(scores)))


def score_video_ssim(ref_seq, dis_seq, workers=1):
    _check_sequences(ref_seq, dis_seq, 1)
    scores = _map_frames(
        lambda t: ssim(ref_seq.frames[t], dis_seq.frames[t]),
        range(len(ref_seq)), workers)
    return MetricScore("ssim", list(enumerate(scores)))


def score_video_lpips(ref_seq, dis_seq, archive, workers=1):
    """Per-frame perceptual distance, averaged over all N frames."""
    _check_sequences(ref_seq, dis_seq, 1)
    refs = [ensure_rgb(f) for f in ref_seq.frames]
    diss = [ensure_rgb(f) for f in dis_seq.frames]

    def one(t):
        return lpips_pair(extract_features(refs[t], archive),
                          extract_features(diss[t], archive),
                          archive.linear_weights)

    scores = _map_frames(one, range(len(ref_seq)), workers)
    return MetricScore("lpips", list(enumerate(scores)))


def score_video_flolpips(ref_seq, dis_seq, archive, flow_provider=None,
                         mode="diff", workers=1):
    """Flow-weighted perceptual distance over all N-1 consecutive pairs.

    For the pair (t-1, t) the features come from frame t of each
    sequence; the previous frames contribute only through the flows.
    The video score averages the N-1 pair scores, so on short sequences
    it is not directly comparable to the N-frame LPIPS average.
    """
    if mode not in WEIGHT_MODES:
        raise ValueError(f"mode must be one of {WEIGHT_MODES}, got {mode!r}")
    _check_sequences(ref_seq, dis_seq, 2)
    if flow_provider is None:
        flow_provider = BuiltinFlowProvider()
    refs = [ensure_rgb(f) for f in ref_seq.frames]
    diss = [ensure_rgb(f) for f in dis_seq.frames]
    size = (ref_seq.height, ref_seq.width)

    def one(t):
        f_ref, f_dis = flow_provider.pair_flows(
            ref_seq.frames[t - 1], ref_seq.frames[t],
            dis_seq.frames[t - 1], dis_seq.frames[t], t)
        if f_ref.shape != size or f_dis.shape != size:
            raise ShapeError(
                f"pair {t}: provider flow shape {f_ref.shape} does not "
                f"match frame size {size}")
        if mode == "diff":
            wmap = flow_diff_weight(f_ref, f_dis)
        elif mode == "ref":
            wmap = flow_magnitude_weight(f_ref)
        else:
            wmap = flow_magnitude_weight(f_dis)
        return weighted_lpips_pair(extract_features(refs[t], archive),
                                   extract_features(diss[t], archive),
                                   archive.linear_weights, wmap)

    indices = range(1, len(ref_seq))
    scores = _map_frames(one, indices, workers)
    return MetricScore(_MODE_IDS[mode], list(zip(indices, scores)))
