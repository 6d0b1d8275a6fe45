"""Dense point sampling and L-frame trajectory tracking over a spatial pyramid."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BadFile
from .flow import FlowField, FlowParams, flow_from_prepared, median_filter_flow, prepare, sample_flow
from .frames import DEFAULT_MIN_SIDE, DEFAULT_SCALE_FACTOR, GrayFrame, build_pyramid


@dataclass(frozen=True)
class TrackerParams:
    L: int = 15
    sample_stride: int = 5
    quality_frac: float = 0.001
    static_thresh: float = math.sqrt(3.0)
    erratic_frac: float = 0.7
    max_disp: float = 20.0
    median_kernel: int = 3
    levels: str = "all"  # or "level0"

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if not 0.0 < self.erratic_frac < 1.0:
            raise ValueError("erratic_frac must lie in (0, 1)")
        if self.quality_frac < 0 or self.static_thresh < 0 or self.max_disp <= 0:
            raise ValueError("quality_frac, static_thresh must be >= 0 and max_disp > 0")
        if self.levels not in ("all", "level0"):
            raise ValueError("levels must be 'all' or 'level0'")


@dataclass(frozen=True)
class Trajectory:
    """``points`` is (L+1, 2) in level-0 (x, y); ``displacements[i] = points[i+1] - points[i]``."""

    start_frame: int
    level: int
    points: np.ndarray
    displacements: np.ndarray

    @property
    def L(self) -> int:
        return len(self.displacements)

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @classmethod
    def from_points(cls, points, start_frame=0, level=0):
        """Build with displacements taken as forward differences; points are re-chained
        from the first one so ``points[i] + displacements[i] == points[i + 1]`` holds bit-exactly."""
        pts = np.asarray(points, dtype=np.float64)
        disp = np.diff(pts, axis=0)
        chained = np.cumsum(np.vstack([pts[:1], disp]), axis=0)
        return cls(int(start_frame), int(level), chained, disp)


# ---------------------------------------------------------------------------
# sampling


def min_eigenvalue_map(img: np.ndarray) -> np.ndarray:
    """Smaller eigenvalue of the 3x3-summed structure tensor at each pixel."""
    gx = ndimage.sobel(img, axis=1, mode="nearest") / 8.0
    gy = ndimage.sobel(img, axis=0, mode="nearest") / 8.0
    sxx = ndimage.uniform_filter(gx * gx, 3, mode="nearest") * 9.0
    syy = ndimage.uniform_filter(gy * gy, 3, mode="nearest") * 9.0
    sxy = ndimage.uniform_filter(gx * gy, 3, mode="nearest") * 9.0
    half_tr = 0.5 * (sxx + syy)
    return half_tr - np.sqrt(0.25 * (sxx - syy) ** 2 + sxy**2)


def sample_points(frame, stride=5, quality_frac=0.001, occupied=None) -> np.ndarray:
    """Grid points (x, y) at multiples of ``stride`` with enough corner energy.

    A point is dropped when any ``occupied`` position lies within ``stride / 2``
    of it on both axes. Returns an (n, 2) float array, possibly empty.
    """
    img = frame.data if isinstance(frame, GrayFrame) else np.asarray(frame, dtype=np.float64)
    h, w = img.shape
    eig = min_eigenvalue_map(img)
    top = eig.max()
    gy, gx = np.arange(0, h, stride), np.arange(0, w, stride)
    if top <= 0.0 or gx.size == 0 or gy.size == 0:
        return np.empty((0, 2))
    keep = eig[np.ix_(gy, gx)] > quality_frac * top
    if occupied is not None and len(occupied):
        occ = np.asarray(occupied, dtype=np.float64).reshape(-1, 2)
        half = stride / 2.0
        taken = np.zeros_like(keep)
        for lo_x, lo_y in ((True, True), (True, False), (False, True), (False, False)):
            ix = np.ceil((occ[:, 0] - half) / stride) if lo_x else np.floor((occ[:, 0] + half) / stride)
            iy = np.ceil((occ[:, 1] - half) / stride) if lo_y else np.floor((occ[:, 1] + half) / stride)
            ok = (ix >= 0) & (ix < gx.size) & (iy >= 0) & (iy < gy.size)
            taken[iy[ok].astype(int), ix[ok].astype(int)] = True
        keep &= ~taken
    yy, xx = np.nonzero(keep)
    return np.stack([gx[xx], gy[yy]], axis=1).astype(np.float64)


# ---------------------------------------------------------------------------
# tracking


def in_confident_region(points, width, height, margin) -> np.ndarray:
    p = np.asarray(points).reshape(-1, 2)
    return (
        (p[:, 0] >= margin) & (p[:, 0] <= width - 1 - margin)
        & (p[:, 1] >= margin) & (p[:, 1] <= height - 1 - margin)
    )


def advance(points, flow: FlowField, max_disp=20.0, scale=(1.0, 1.0)):
    """Step points along the flow; returns (next_points, alive mask).

    A point dies when its next position leaves the confident region of the flow
    or when the step, measured in level-0 pixels, is longer than ``max_disp``.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    step = sample_flow(flow.vectors, pts)
    nxt = pts + step
    step_len = np.hypot(step[:, 0] * scale[0], step[:, 1] * scale[1])
    alive = in_confident_region(nxt, flow.width, flow.height, flow.margin) & (step_len <= max_disp)
    return nxt, alive


def to_level0(points, scale):
    """Map level pixel-centre coordinates to level 0."""
    s = np.asarray(scale, dtype=np.float64)
    return (np.asarray(points, dtype=np.float64) + 0.5) * s - 0.5


def finalize(points, params: TrackerParams = TrackerParams(), start_frame=0, level=0, scale=(1.0, 1.0)):
    """Prune a completed track; returns a level-0 Trajectory or None when rejected."""
    pts = to_level0(points, scale)
    if len(pts) != params.L + 1:
        raise ValueError(f"track has {len(pts)} points, expected {params.L + 1}")
    std = pts.std(axis=0)
    if std[0] < params.static_thresh and std[1] < params.static_thresh:
        return None
    lengths = np.hypot(*np.diff(pts, axis=0).T)
    total = lengths.sum()
    if total <= 0.0 or lengths.max() > params.erratic_frac * total:
        return None
    if lengths.max() > params.max_disp:
        return None
    return Trajectory.from_points(pts, start_frame, level)


def _track_level(level_frames, scale, level, params, flow_params):
    L = params.L
    n_frames = len(level_frames)
    h, w = level_frames[0].data.shape
    margin = flow_params.margin
    hist = np.empty((0, L + 1, 2))
    steps = np.empty(0, dtype=int)
    starts = np.empty(0, dtype=int)
    out = []
    prepared_next = None
    for t in range(n_frames - 1):
        cur = hist[np.arange(len(hist)), steps] if len(hist) else np.empty((0, 2))
        if t + L <= n_frames - 1:
            new = sample_points(level_frames[t], params.sample_stride, params.quality_frac, cur)
            new = new[in_confident_region(new, w, h, margin)]
            if len(new):
                block = np.zeros((len(new), L + 1, 2))
                block[:, 0] = new
                hist = np.concatenate([hist, block])
                steps = np.concatenate([steps, np.zeros(len(new), dtype=int)])
                starts = np.concatenate([starts, np.full(len(new), t)])
                cur = np.concatenate([cur, new])
        if len(hist) == 0:
            prepared_next = None
            continue
        p_t = prepared_next if prepared_next is not None else prepare(level_frames[t].data, flow_params)
        prepared_next = prepare(level_frames[t + 1].data, flow_params)
        field = FlowField(flow_from_prepared(p_t, prepared_next, flow_params), margin)
        field = median_filter_flow(field, params.median_kernel)
        nxt, alive = advance(cur, field, params.max_disp, scale)
        hist, steps, starts, nxt = hist[alive], steps[alive] + 1, starts[alive], nxt[alive]
        hist[np.arange(len(hist)), steps] = nxt
        done = steps == L
        for i in np.flatnonzero(done):
            traj = finalize(hist[i], params, starts[i], level, scale)
            if traj is not None:
                out.append(traj)
        hist, steps, starts = hist[~done], steps[~done], starts[~done]
    return out


def extract_trajectories(
    frames,
    params: TrackerParams = TrackerParams(),
    flow_params: FlowParams = FlowParams(),
    scale_factor=DEFAULT_SCALE_FACTOR,
    min_side=DEFAULT_MIN_SIDE,
):
    """Track densely sampled points through ``frames``; trajectories are in level-0 coordinates.

    Ordered by pyramid level, then by completion frame, then by sampling order.
    """
    frames = list(frames)
    if len(frames) < params.L + 1:
        return []
    pyramids = [build_pyramid(f, scale_factor, min_side) for f in frames]
    n_levels = 1 if params.levels == "level0" else len(pyramids[0])
    out = []
    for level in range(n_levels):
        level_frames = [p[level] for p in pyramids]
        out.extend(_track_level(level_frames, pyramids[0].scales[level], level, params, flow_params))
    return out


# ---------------------------------------------------------------------------
# TRJ1 dump

_TRJ_MAGIC = b"TRJ1"


def write_trajectories(path, trajectories, L):
    """Binary dump: magic, u32 L, u64 count, then per record u32 start, u32 level, (L+1)x2 f32."""
    rec = struct.Struct(f"<II{2 * (L + 1)}f")
    with open(path, "wb") as fh:
        fh.write(_TRJ_MAGIC + struct.pack("<IQ", L, len(trajectories)))
        for tr in trajectories:
            if tr.L != L:
                raise ValueError(f"trajectory length {tr.L} != {L}")
            fh.write(rec.pack(tr.start_frame, tr.level, *np.asarray(tr.points, dtype=np.float32).ravel()))


def read_trajectories(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _TRJ_MAGIC or len(raw) < 16:
        raise BadFile(f"{path}: not a TRJ1 file")
    L, count = struct.unpack_from("<IQ", raw, 4)
    dtype = np.dtype([("start", "<u4"), ("level", "<u4"), ("pts", "<f4", (L + 1, 2))])
    if len(raw) - 16 != count * dtype.itemsize:
        raise BadFile(f"{path}: truncated TRJ1 file")
    recs = np.frombuffer(raw, dtype=dtype, count=count, offset=16)
    return [Trajectory.from_points(r["pts"], int(r["start"]), int(r["level"])) for r in recs]
