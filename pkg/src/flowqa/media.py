"""Video and image decoding into metric-ready frames.

Supported inputs: Y4M streams (8-bit 4:2:0 only), raw planar I420 files,
and directories of numbered PPM/PNG images. Decoded frames are immutable
in spirit: planes are float32 arrays that downstream code never mutates,
so frames are safe to share across worker threads.

YUV planes keep 0-255 code values (as floats); RGB planes are [0, 1].
Chroma is upsampled by nearest-neighbor duplication and converted with
the BT.709 matrix, limited range by default.
"""

import os
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from flowqa.errors import (
    ParseError,
    ShapeError,
    TruncationError,
    UnsupportedFormatError,
)

YUV420_8 = "yuv420_8"
RGB_FLOAT = "rgb_float"

_Y4M_MAGIC = b"YUV4MPEG2"
_SUPPORTED_CHROMA = {"420", "420jpeg", "420mpeg2", "420paldv"}

# BT.709: Kr=0.2126, Kb=0.0722
_KR, _KB = 0.2126, 0.0722
_KG = 1.0 - _KR - _KB


@dataclass
class Frame:
    """One decoded frame: a list of planes plus a colorspace tag."""

    width: int
    height: int
    channels: list
    colorspace: str

    def __post_init__(self):
        if self.colorspace == RGB_FLOAT:
            if len(self.channels) != 3:
                raise ShapeError("RGB frame needs 3 planes")
            for p in self.channels:
                if p.shape != (self.height, self.width):
                    raise ShapeError(
                        f"RGB plane shape {p.shape} != "
                        f"({self.height}, {self.width})")
        elif self.colorspace == YUV420_8:
            if len(self.channels) != 3:
                raise ShapeError("YUV frame needs 3 planes")
            ch = (-(-self.height // 2), -(-self.width // 2))
            if self.channels[0].shape != (self.height, self.width):
                raise ShapeError("luma plane shape mismatch")
            for p in self.channels[1:]:
                if p.shape != ch:
                    raise ShapeError(
                        f"chroma plane shape {p.shape} != {ch}")
        else:
            raise ValueError(f"unknown colorspace {self.colorspace!r}")

    @property
    def size(self):
        return self.width, self.height


@dataclass
class VideoSequence:
    """Ordered frames sharing dimensions, colorspace and frame rate."""

    frames: list
    frame_rate: Fraction = Fraction(30, 1)
    source_path: str = ""

    def __post_init__(self):
        if not self.frames:
            raise ValueError("sequence needs at least one frame")
        first = self.frames[0]
        for f in self.frames:
            if f.size != first.size or f.colorspace != first.colorspace:
                raise ShapeError("all frames must share size and colorspace")

    def __len__(self):
        return len(self.frames)

    @property
    def width(self):
        return self.frames[0].width

    @property
    def height(self):
        return self.frames[0].height

    @property
    def colorspace(self):
        return self.frames[0].colorspace


def _chroma_shape(width, height):
    return -(-height // 2), -(-width // 2)


def _split_yuv_payload(payload, width, height):
    ch, cw = _chroma_shape(width, height)
    ysize = width * height
    csize = ch * cw
    y = np.frombuffer(payload, np.uint8, ysize, 0)
    u = np.frombuffer(payload, np.uint8, csize, ysize)
    v = np.frombuffer(payload, np.uint8, csize, ysize + csize)
    return [
        y.reshape(height, width).astype(np.float32),
        u.reshape(ch, cw).astype(np.float32),
        v.reshape(ch, cw).astype(np.float32),
    ]


def yuv_frame_size(width, height):
    """Bytes per 8-bit 4:2:0 frame."""
    ch, cw = _chroma_shape(width, height)
    return width * height + 2 * ch * cw


def parse_y4m(stream):
    """Parse a Y4M byte stream (bytes or binary file object).

    Only 8-bit 4:2:0 chroma tags are accepted. Raises ParseError on
    malformed headers, TruncationError on short frame payloads and
    UnsupportedFormatError for other chroma samplings.
    """
    data = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
    data = bytes(data)
    if not data.startswith(_Y4M_MAGIC):
        raise ParseError("missing YUV4MPEG2 signature")
    nl = data.find(b"\n")
    if nl < 0:
        raise ParseError("unterminated stream header")
    try:
        header = data[:nl].decode("ascii")
    except UnicodeDecodeError as exc:
        raise ParseError("non-ASCII stream header") from exc

    width = height = None
    rate = None
    for token in header.split(" ")[1:]:
        if not token:
            continue
        key, val = token[0], token[1:]
        try:
            if key == "W":
                width = int(val)
            elif key == "H":
                height = int(val)
            elif key == "F":
                num, den = val.split(":")
                rate = Fraction(int(num), int(den))
            elif key == "C":
                if val not in _SUPPORTED_CHROMA:
                    raise UnsupportedFormatError(
                        f"unsupported chroma tag C{val} (8-bit 4:2:0 only)")
            elif key in ("I", "A", "X"):
                pass
            else:
                raise ParseError(f"unrecognized header token {token!r}")
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"malformed header token {token!r}") from exc
    if width is None or height is None:
        raise ParseError("header missing W or H token")
    if width <= 0 or height <= 0:
        raise ParseError(f"invalid dimensions {width}x{height}")
    if rate is None:
        rate = Fraction(30, 1)

    frame_bytes = yuv_frame_size(width, height)
    frames = []
    pos = nl + 1
    while pos < len(data):
        if not data.startswith(b"FRAME", pos):
            raise ParseError(f"expected FRAME marker at offset {pos}")
        fnl = data.find(b"\n", pos)
        if fnl < 0:
            raise ParseError(f"unterminated FRAME header at offset {pos}")
        payload = data[fnl + 1:fnl + 1 + frame_bytes]
        if len(payload) < frame_bytes:
            raise TruncationError(
                f"frame {len(frames)} truncated: got {len(payload)} of "
                f"{frame_bytes} bytes")
        frames.append(Frame(width, height,
                            _split_yuv_payload(payload, width, height),
                            YUV420_8))
        pos = fnl + 1 + frame_bytes
    if not frames:
        raise ParseError("stream contains no frames")
    return VideoSequence(frames, rate)


def serialize_y4m(seq):
    """Encode a YUV420_8 sequence as Y4M bytes (inverse of parse_y4m)."""
    if seq.colorspace != YUV420_8:
        raise ValueError("can only serialize YUV420_8 sequences")
    rate = seq.frame_rate
    parts = [
        f"YUV4MPEG2 W{seq.width} H{seq.height} "
        f"F{rate.numerator}:{rate.denominator} Ip A1:1 C420jpeg\n"
        .encode("ascii")
    ]
    for frame in seq.frames:
        parts.append(b"FRAME\n")
        for plane in frame.channels:
            parts.append(
                np.clip(np.rint(plane), 0, 255).astype(np.uint8).tobytes())
    return b"".join(parts)


def read_y4m(path):
    with open(path, "rb") as fh:
        seq = parse_y4m(fh.read())
    seq.source_path = str(path)
    return seq


def write_y4m(seq, path):
    with open(path, "wb") as fh:
        fh.write(serialize_y4m(seq))


def read_raw_yuv(path, width, height, frame_rate=Fraction(30, 1)):
    """Read a headerless planar I420 file; size must divide evenly."""
    with open(path, "rb") as fh:
        data = fh.read()
    frame_bytes = yuv_frame_size(width, height)
    count, remainder = divmod(len(data), frame_bytes)
    if remainder != 0 or count == 0:
        raise TruncationError(
            f"{path}: {len(data)} bytes is not a multiple of the "
            f"{width}x{height} frame size {frame_bytes} "
            f"(remainder {remainder})")
    frames = [
        Frame(width, height,
              _split_yuv_payload(
                  data[i * frame_bytes:(i + 1) * frame_bytes], width, height),
              YUV420_8)
        for i in range(count)
    ]
    return VideoSequence(frames, frame_rate, str(path))


def to_rgb(frame, full_range=False):
    """Convert a YUV420_8 frame to RGB_FLOAT via the BT.709 matrix.

    Chroma planes are duplicated to full resolution. Output clamped to
    [0, 1]. ``full_range`` selects the 0-255 luma mapping instead of
    the 16-235 limited-range default.
    """
    if frame.colorspace != YUV420_8:
        raise ValueError("to_rgb expects a YUV420_8 frame")
    y, u, v = frame.channels
    h, w = frame.height, frame.width
    up = np.repeat(np.repeat(u, 2, axis=0), 2, axis=1)[:h, :w]
    vp = np.repeat(np.repeat(v, 2, axis=0), 2, axis=1)[:h, :w]
    if full_range:
        c = y / 255.0
        d = (up - 128.0) / 255.0
        e = (vp - 128.0) / 255.0
    else:
        c = (y - 16.0) / 219.0
        d = (up - 128.0) / 224.0
        e = (vp - 128.0) / 224.0
    r = c + 2.0 * (1.0 - _KR) * e
    b = c + 2.0 * (1.0 - _KB) * d
    g = (c - (2.0 * (1.0 - _KB) * _KB / _KG) * d
         - (2.0 * (1.0 - _KR) * _KR / _KG) * e)
    planes = [np.clip(p, 0.0, 1.0).astype(np.float32) for p in (r, g, b)]
    return Frame(w, h, planes, RGB_FLOAT)


def ensure_rgb(frame, full_range=False):
    return frame if frame.colorspace == RGB_FLOAT else to_rgb(frame, full_range)


def luma(frame):
    """BT.709 luma in [0, 1] regardless of frame colorspace."""
    if frame.colorspace == YUV420_8:
        return (frame.channels[0] / 255.0).astype(np.float32)
    r, g, b = frame.channels
    return (_KR * r + _KG * g + _KB * b).astype(np.float32)


def frame_from_rgb(array):
    """Build an RGB_FLOAT frame from an (H, W, 3) array in [0, 1]."""
    arr = np.asarray(array, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"expected (H, W, 3) array, got {arr.shape}")
    h, w = arr.shape[:2]
    planes = [np.clip(np.ascontiguousarray(arr[:, :, i]), 0.0, 1.0)
              for i in range(3)]
    return Frame(w, h, planes, RGB_FLOAT)


def rgb_array(frame):
    """(3, H, W) float32 view of an RGB_FLOAT frame."""
    if frame.colorspace != RGB_FLOAT:
        raise ValueError("rgb_array expects an RGB_FLOAT frame")
    return np.stack(frame.channels)


def read_ppm(path):
    """Read a binary (P6) 8-bit PPM into an RGB_FLOAT frame."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P6"):
        raise ParseError(f"{path}: not a binary PPM (P6) file")
    # header: P6, width, height, maxval as whitespace-separated tokens,
    # comments (#...) allowed between them
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            pos = data.find(b"\n", pos)
            if pos < 0:
                raise ParseError(f"{path}: unterminated comment")
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"{path}: truncated PPM header")
        fields.append(data[start:pos])
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise ParseError(f"{path}: malformed PPM header") from exc
    if maxval != 255:
        raise UnsupportedFormatError(f"{path}: only maxval 255 supported")
    pos += 1  # single whitespace byte after maxval
    need = width * height * 3
    raw = np.frombuffer(data, np.uint8, -1, pos)
    if raw.size < need:
        raise TruncationError(
            f"{path}: pixel payload has {raw.size} of {need} bytes")
    rgb = raw[:need].reshape(height, width, 3).astype(np.float32) / 255.0
    return frame_from_rgb(rgb)


def write_ppm(frame, path):
    frame = ensure_rgb(frame)
    arr = np.stack(frame.channels, axis=2)
    data = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_image(path):
    """Read a single PPM or PNG image as an RGB_FLOAT frame."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".ppm":
        return read_ppm(path)
    try:
        from PIL import Image
    except ImportError as exc:
        raise UnsupportedFormatError(
            f"{path}: reading {ext} requires Pillow") from exc
    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return frame_from_rgb(rgb)


_NUM_RE = re.compile(r"(\d+)")


def read_image_sequence(directory, frame_rate=Fraction(30, 1)):
    """Read numbered .ppm/.png files from a directory, in numeric order."""
    names = [n for n in os.listdir(directory)
             if os.path.splitext(n)[1].lower() in (".ppm", ".png")]
    if not names:
        raise ParseError(f"{directory}: no .ppm or .png files found")

    def sort_key(name):
        m = _NUM_RE.findall(name)
        return (int(m[-1]) if m else 0, name)

    frames = [read_image(os.path.join(directory, n))
              for n in sorted(names, key=sort_key)]
    return VideoSequence(frames, frame_rate, str(directory))


def read_video(path, width=None, height=None, frame_rate=Fraction(30, 1)):
    """Open a video input by extension: .y4m, .yuv, or an image directory."""
    path = str(path)
    if os.path.isdir(path):
        return read_image_sequence(path, frame_rate)
    ext = os.path.splitext(path)[1].lower()
    if ext == ".y4m":
        return read_y4m(path)
    if ext == ".yuv":
        if width is None or height is None:
            raise ValueError("raw YUV input requires width and height")
        return read_raw_yuv(path, width, height, frame_rate)
    raise UnsupportedFormatError(f"cannot determine input format of {path}")
