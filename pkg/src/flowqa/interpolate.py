"""Trivial temporal upsamplers used to synthesize interpolation artifacts.

Frame repetition produces judder; pairwise averaging produces ghosting.
Both operate on decoded planes directly (YUV code values or RGB floats),
so outputs are byte-stable fixtures.
"""

import numpy as np

from flowqa.errors import SizeError
from flowqa.media import RGB_FLOAT, Frame, VideoSequence


def frame_repeat_upsample(seq, factor):
    """Emit every frame ``factor`` times; rate scales accordingly."""
    if factor < 2:
        raise ValueError(f"factor must be >= 2, got {factor}")
    frames = [f for f in seq.frames for _ in range(factor)]
    return VideoSequence(frames, seq.frame_rate * factor, seq.source_path)


def _average(a, b):
    hi = 1.0 if a.colorspace == RGB_FLOAT else 255.0
    planes = [np.clip((pa + pb) / 2.0, 0.0, hi).astype(np.float32)
              for pa, pb in zip(a.channels, b.channels)]
    return Frame(a.width, a.height, planes, a.colorspace)


def frame_average_upsample(seq, factor=2):
    """Insert the per-channel mean between consecutive frames (2x only)."""
    if factor != 2:
        raise ValueError("only 2x averaging is supported")
    if len(seq) < 2:
        raise SizeError("averaging needs at least 2 frames")
    frames = []
    for a, b in zip(seq.frames[:-1], seq.frames[1:]):
        frames.append(a)
        frames.append(_average(a, b))
    frames.append(seq.frames[-1])
    return VideoSequence(frames, seq.frame_rate * 2, seq.source_path)
