"""Grayscale frame decoding (Y4M, PGM/PNG directories) and spatial pyramids."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy import ndimage

from .errors import (
    FrameTooSmall,
    InconsistentDimensions,
    UnreadableSource,
    UnsupportedFormat,
)

DEFAULT_SCALE_FACTOR = 1.0 / math.sqrt(2.0)
DEFAULT_MIN_SIDE = 32
SMOOTH_SIGMA = 0.8

IMAGE_SUFFIXES = (".pgm", ".ppm", ".png")

# Integer BT.601 luma weights; dividing by 1000 * maxval keeps pure white at exactly 1.0.
_LUMA = (299, 587, 114)


@dataclass(frozen=True)
class GrayFrame:
    """One decoded frame: ``data`` is (height, width) float64 in [0, 1]."""

    data: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"frame data must be 2-D, got shape {data.shape}")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValueError("frame intensities must lie in [0, 1]")
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class Pyramid:
    levels: list
    scale_factor: float = DEFAULT_SCALE_FACTOR
    scales: list = field(default=None)

    def __post_init__(self):
        if self.scales is None:
            base = self.levels[0]
            scales = [(base.width / lv.width, base.height / lv.height) for lv in self.levels]
            object.__setattr__(self, "scales", scales)

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, i):
        return self.levels[i]


# ---------------------------------------------------------------------------
# pyramids


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def pyramid_shapes(width, height, scale_factor=DEFAULT_SCALE_FACTOR, min_side=DEFAULT_MIN_SIDE):
    """List of (width, height) per pyramid level, level 0 first."""
    if not 0.0 < scale_factor < 1.0:
        raise ValueError("scale_factor must lie in (0, 1)")
    if min_side < 8:
        raise ValueError("min_side must be >= 8")
    if min(width, height) < min_side:
        raise FrameTooSmall(f"frame {width}x{height} is below min_side={min_side}")
    shapes = [(width, height)]
    while True:
        w, h = shapes[-1]
        nw, nh = _round_half_up(w * scale_factor), _round_half_up(h * scale_factor)
        if min(nw, nh) < min_side:
            break
        shapes.append((nw, nh))
    return shapes


def gaussian_kernel(sigma=SMOOTH_SIGMA, taps=5):
    r = taps // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def smooth(img, sigma=SMOOTH_SIGMA, taps=5):
    k = gaussian_kernel(sigma, taps)
    out = ndimage.correlate1d(img, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def resize_bilinear(img, width, height):
    """Bilinear resample with pixel-centre alignment and clamped borders."""
    h0, w0 = img.shape
    ys = (np.arange(height) + 0.5) * (h0 / height) - 0.5
    xs = (np.arange(width) + 0.5) * (w0 / width) - 0.5
    ys = np.clip(ys, 0, h0 - 1)
    xs = np.clip(xs, 0, w0 - 1)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return ndimage.map_coordinates(img, [yy, xx], order=1, mode="nearest")


def build_pyramid(frame: GrayFrame, scale_factor=DEFAULT_SCALE_FACTOR, min_side=DEFAULT_MIN_SIDE) -> Pyramid:
    """Gaussian-smooth then bilinearly shrink until the short side would drop below ``min_side``."""
    shapes = pyramid_shapes(frame.width, frame.height, scale_factor, min_side)
    levels = [frame]
    for w, h in shapes[1:]:
        prev = levels[-1].data
        data = np.clip(resize_bilinear(smooth(prev), w, h), 0.0, 1.0)
        levels.append(GrayFrame(data, frame.frame_index))
    return Pyramid(levels, scale_factor)


# ---------------------------------------------------------------------------
# Y4M


def _parse_y4m_header(line: bytes):
    tokens = line.decode("ascii", errors="replace").split()
    if not tokens or tokens[0] != "YUV4MPEG2":
        raise UnreadableSource("missing YUV4MPEG2 signature")
    info = {"C": "420jpeg"}
    for tok in tokens[1:]:
        info[tok[0]] = tok[1:]
    try:
        width, height = int(info["W"]), int(info["H"])
    except (KeyError, ValueError) as exc:
        raise UnreadableSource("Y4M header lacks valid W/H tags") from exc
    if width <= 0 or height <= 0:
        raise UnreadableSource("Y4M header has non-positive dimensions")
    cs = info["C"]
    cw, ch = (width + 1) // 2, (height + 1) // 2
    if cs.startswith("420") and not cs.startswith("420p"):
        chroma = 2 * cw * ch
    elif cs == "422":
        chroma = 2 * cw * height
    elif cs == "444":
        chroma = 2 * width * height
    elif cs == "mono":
        chroma = 0
    else:
        raise UnsupportedFormat(f"unsupported Y4M colorspace C{cs}")
    return width, height, chroma, info


def _iter_y4m(fh, width, height, chroma):
    luma = width * height
    index = 0
    try:
        while True:
            line = fh.readline()
            if not line:
                return
            if not line.startswith(b"FRAME"):
                raise UnreadableSource(f"corrupt Y4M: bad frame marker at frame {index}")
            buf = fh.read(luma + chroma)
            if len(buf) != luma + chroma:
                raise UnreadableSource(f"corrupt Y4M: truncated frame {index}")
            y = np.frombuffer(buf, dtype=np.uint8, count=luma).reshape(height, width)
            yield GrayFrame(y / 255.0, index)
            index += 1
    finally:
        fh.close()


def read_y4m(path) -> Iterator[GrayFrame]:
    """Stream the luma planes of a Y4M file as GrayFrames."""
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise UnreadableSource(str(exc)) from exc
    line = fh.readline(4096)
    if not line.endswith(b"\n"):
        fh.close()
        raise UnreadableSource(f"{path}: not a Y4M stream")
    try:
        width, height, chroma, _ = _parse_y4m_header(line)
    except Exception:
        fh.close()
        raise
    return _iter_y4m(fh, width, height, chroma)


def write_y4m(path, frames, fps=30):
    """Write a mono Y4M file from 2-D arrays (or GrayFrames) with values in [0, 1]."""
    frames = [f.data if isinstance(f, GrayFrame) else np.asarray(f) for f in frames]
    if not frames:
        raise ValueError("no frames to write")
    height, width = frames[0].shape
    with open(path, "wb") as fh:
        fh.write(f"YUV4MPEG2 W{width} H{height} F{fps}:1 Ip A1:1 Cmono\n".encode("ascii"))
        for f in frames:
            if f.shape != (height, width):
                raise InconsistentDimensions("all frames must share one size")
            fh.write(b"FRAME\n")
            fh.write(np.clip(np.rint(f * 255.0), 0, 255).astype(np.uint8).tobytes())


# ---------------------------------------------------------------------------
# PGM / PPM / PNG


def _pnm_tokens(raw: bytes, count: int):
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise UnreadableSource("truncated PNM header")
        tokens.append(int(raw[start:pos]))
    return tokens, pos + 1


def read_pnm(path) -> np.ndarray:
    """Decode a binary or ASCII PGM/PPM to intensities in [0, 1]."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UnreadableSource(str(exc)) from exc
    magic = raw[:2]
    if magic not in (b"P2", b"P5", b"P6"):
        raise UnreadableSource(f"{path}: not a PGM/PPM file")
    try:
        (width, height, maxval), offset = _pnm_tokens(raw, 3)
    except ValueError as exc:
        raise UnreadableSource(f"{path}: bad PNM header") from exc
    if not 0 < maxval < 65536:
        raise UnreadableSource(f"{path}: bad maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    n = width * height * channels
    if magic == b"P2":
        vals = np.array(raw[offset:].split(), dtype=np.int64)
        if vals.size < n:
            raise UnreadableSource(f"{path}: truncated pixel data")
        vals = vals[:n]
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        if len(raw) - offset < n * dtype.itemsize:
            raise UnreadableSource(f"{path}: truncated pixel data")
        vals = np.frombuffer(raw, dtype=dtype, count=n, offset=offset).astype(np.int64)
    if channels == 3:
        return _luma(vals.reshape(height, width, 3), maxval)
    return np.clip(vals.reshape(height, width) / maxval, 0.0, 1.0)


def _luma(rgb: np.ndarray, maxval) -> np.ndarray:
    rgb = rgb.astype(np.int64)
    num = _LUMA[0] * rgb[..., 0] + _LUMA[1] * rgb[..., 1] + _LUMA[2] * rgb[..., 2]
    return np.clip(num / (1000.0 * maxval), 0.0, 1.0)


def read_png(path) -> np.ndarray:
    from PIL import Image

    try:
        img = Image.open(path)
        img.load()
    except (OSError, SyntaxError) as exc:
        raise UnreadableSource(f"{path}: {exc}") from exc
    mode = img.mode
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img, dtype=np.int64)
        return np.clip(arr / 65535.0, 0.0, 1.0)
    if mode in ("L", "1"):
        return np.asarray(img.convert("L"), dtype=np.int64) / 255.0
    if mode == "LA":
        return np.asarray(img, dtype=np.int64)[..., 0] / 255.0
    return _luma(np.asarray(img.convert("RGB")), 255)


def read_image(path) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    if suffix in (".pgm", ".ppm"):
        return read_pnm(path)
    if suffix == ".png":
        return read_png(path)
    raise UnsupportedFormat(f"unsupported image type {suffix!r}")


def write_pgm(path, data):
    """Write an 8-bit binary PGM from intensities in [0, 1]."""
    data = np.asarray(data)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.clip(np.rint(data * 255.0), 0, 255).astype(np.uint8).tobytes())


def _iter_image_dir(files):
    shape = None
    for index, path in enumerate(files):
        data = read_image(path)
        if shape is None:
            shape = data.shape
        elif data.shape != shape:
            raise InconsistentDimensions(
                f"{path.name}: size {data.shape[::-1]} differs from first frame {shape[::-1]}"
            )
        yield GrayFrame(data, index)


def _iter_checked(frames):
    shape = None
    for f in frames:
        if shape is None:
            shape = f.data.shape
        elif f.data.shape != shape:
            raise InconsistentDimensions("frame size changed mid-stream")
        yield f


# ---------------------------------------------------------------------------


def detect_format(path) -> str:
    p = Path(path)
    if p.is_dir():
        return "image-dir"
    if p.suffix.lower() == ".y4m":
        return "y4m"
    if not p.exists():
        raise UnreadableSource(f"{path}: no such file or directory")
    raise UnsupportedFormat(f"{path}: unknown container (expected .y4m or an image directory)")


def open_source(path, format=None) -> Iterator[GrayFrame]:
    """Open a Y4M file or a directory of PGM/PNG frames as a frame stream.

    Missing files and bad headers raise immediately; corruption further into the
    stream raises while iterating.
    """
    path = Path(os.fspath(path))
    if not path.exists():
        raise UnreadableSource(f"{path}: no such file or directory")
    fmt = format or detect_format(path)
    if fmt == "y4m":
        if path.is_dir():
            raise UnreadableSource(f"{path}: is a directory")
        return _iter_checked(read_y4m(path))
    if fmt == "image-dir":
        if not path.is_dir():
            raise UnreadableSource(f"{path}: not a directory")
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise UnreadableSource(f"{path}: no PGM/PNG frames found")
        return _iter_image_dir(files)
    raise UnsupportedFormat(f"unknown source format {fmt!r}")


def read_frames(path, format=None) -> list:
    return list(open_source(path, format))
