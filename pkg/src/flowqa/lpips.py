"""Perceptual distance over feature pyramids.

``lpips_pair`` is the classic recipe: channel-normalize both pyramids,
weight the differences per channel, take the squared L2 norm across
channels, average spatially and sum over layers. ``weighted_lpips_pair``
replaces the spatial average with a weighted mean whose weights come
from a flow-discrepancy map.

The weighted form follows the weighted-mean convention: the resampled
map is renormalized to sum to one at each layer resolution and no extra
1/(H*W) factor is applied, so a uniform map reproduces ``lpips_pair``
exactly.
"""

import numpy as np

from flowqa.errors import NormalizationError, ShapeError
from flowqa.flow import WeightMap
from flowqa.resample import bilinear_resize

_NORM_EPS = 1e-10


def channel_normalize(fmap):
    """Scale each spatial location's channel vector to unit length."""
    norm = np.sqrt((fmap ** 2).sum(axis=0, keepdims=True, dtype=fmap.dtype))
    return fmap / (norm + _NORM_EPS)


def _check_pyramids(pyr_ref, pyr_dis, weights):
    if len(pyr_ref) != len(pyr_dis) or len(pyr_ref) != len(weights):
        raise ShapeError(
            f"pyramid/weight layer counts differ: {len(pyr_ref)}, "
            f"{len(pyr_dis)}, {len(weights)}")
    for i, (a, b, w) in enumerate(zip(pyr_ref, pyr_dis, weights)):
        if a.shape != b.shape:
            raise ShapeError(
                f"layer {i}: tap shapes differ, {a.shape} vs {b.shape}")
        if w.shape != (a.shape[0],):
            raise ShapeError(
                f"layer {i}: weight vector has shape {w.shape}, tap has "
                f"{a.shape[0]} channels")
        if (w < 0).any():
            raise ValueError(f"layer {i}: negative linear weights")


def _difference_map(a, b, w):
    """Per-location squared weighted feature difference (H, W)."""
    diff = (channel_normalize(a) - channel_normalize(b)) * w[:, None, None]
    return (diff.astype(np.float64) ** 2).sum(axis=0)


def lpips_pair(pyr_ref, pyr_dis, weights):
    """Perceptual distance between two feature pyramids (>= 0)."""
    _check_pyramids(pyr_ref, pyr_dis, weights)
    total = 0.0
    for a, b, w in zip(pyr_ref, pyr_dis, weights):
        total += float(_difference_map(a, b, w).mean())
    return total


def _layer_weights(weight_map, h, w):
    resized = bilinear_resize(weight_map.w, h, w)
    np.clip(resized, 0.0, None, out=resized)
    total = resized.sum()
    if total <= 0.0:
        return np.full((h, w), 1.0 / (h * w))
    return resized / total


def weighted_lpips_pair(pyr_ref, pyr_dis, weights, weight_map):
    """Perceptual distance with weighted spatial pooling.

    The map is resampled bilinearly to each layer's resolution and
    renormalized to sum to one there, then contracted against that
    layer's difference map.
    """
    _check_pyramids(pyr_ref, pyr_dis, weights)
    if not isinstance(weight_map, WeightMap):
        raise TypeError("weight_map must be a WeightMap")
    total = float(weight_map.w.sum())
    if not weight_map.uniform_fallback and abs(total - 1.0) > 1e-6:
        raise NormalizationError(
            f"weight map sums to {total!r}, expected 1 within 1e-6")
    score = 0.0
    for a, b, w in zip(pyr_ref, pyr_dis, weights):
        d = _difference_map(a, b, w)
        lw = _layer_weights(weight_map, *d.shape)
        score += float((lw * d).sum())
    return score
