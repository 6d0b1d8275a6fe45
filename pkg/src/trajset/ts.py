"""Trajectory-Set features.

The frame is tiled into M x M pixel cells; K x K cells form a block, and blocks
overlap with a stride of one cell. For every block and starting frame, each
cell contributes one representative trajectory (the mean of the trajectories
starting in it, or zeros when none do) and the K*K cell vectors are
concatenated in row-major cell order.
"""

from __future__ import annotations

import math
import struct
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import BadFile, OutOfFrame

VARIANTS = ("displacement", "local_coords", "displacement_skip2")


@dataclass(frozen=True)
class TsParams:
    M: int = 10
    K: int = 5
    L: int = 15
    variant: str = "displacement"

    def __post_init__(self):
        if self.M < 1 or self.K < 1 or self.L < 1:
            raise ValueError("M, K and L must all be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @property
    def cell_dim(self) -> int:
        if self.variant == "displacement":
            return 2 * self.L
        if self.variant == "local_coords":
            return 2 * (self.L + 1)
        return 2 * math.ceil(self.L / 2)

    @property
    def feature_dim(self) -> int:
        return self.cell_dim * self.K * self.K


def feature_dim(params: TsParams) -> int:
    return params.feature_dim


@dataclass(frozen=True)
class TSFeature:
    start_frame: int
    block_origin: tuple
    values: np.ndarray
    live_cells: int


def cell_grid(width, height, M):
    """Number of whole cells along x and y."""
    return width // M, height // M


def assign_to_cells(trajectories, M, width, height):
    """Group trajectories by the cell holding their start point.

    Start points on the right/bottom edge (or in a partial last cell) are
    clamped into the last whole cell.
    """
    gw, gh = cell_grid(width, height, M)
    cells = defaultdict(list)
    for tr in trajectories:
        x, y = float(tr.points[0][0]), float(tr.points[0][1])
        if not (0.0 <= x <= width and 0.0 <= y <= height):
            raise OutOfFrame(f"start point ({x:.2f}, {y:.2f}) outside {width}x{height} frame")
        cx = min(int(x // M), gw - 1)
        cy = min(int(y // M), gh - 1)
        if cx < 0 or cy < 0:
            raise OutOfFrame(f"frame {width}x{height} holds no whole {M}px cell")
        cells[cx, cy].append(tr)
    return dict(cells)


def skip2(displacements: np.ndarray) -> np.ndarray:
    """Sum successive displacement pairs; an odd tail is kept unpaired."""
    d = np.asarray(displacements, dtype=np.float64)
    n = len(d)
    out = d[0 : n - n % 2 : 2] + d[1 : n - n % 2 : 2]
    if n % 2:
        out = np.vstack([out, d[-1:]])
    return out


def representation(tr, params: TsParams) -> np.ndarray:
    """Flattened per-trajectory vector before averaging (global coordinates)."""
    if tr.L != params.L:
        raise ValueError(f"trajectory length {tr.L} does not match L={params.L}")
    if params.variant == "displacement":
        return np.asarray(tr.displacements, dtype=np.float64).ravel()
    if params.variant == "local_coords":
        return np.asarray(tr.points, dtype=np.float64).ravel()
    return skip2(tr.displacements).ravel()


def exact_mean(rows: np.ndarray) -> np.ndarray:
    """Column means from correctly rounded sums, so the result ignores row order."""
    if len(rows) == 1:
        return rows[0].copy()
    return np.array([math.fsum(col) for col in rows.T]) / len(rows)


def cell_vector(trajectories, params: TsParams, block_origin=(0.0, 0.0)) -> np.ndarray:
    """Representative vector for one cell; zeros when no trajectory starts there.

    For ``local_coords`` the mean point sequence is expressed relative to
    ``block_origin``.
    """
    if not trajectories:
        return np.zeros(params.cell_dim)
    vec = exact_mean(np.stack([representation(tr, params) for tr in trajectories]))
    if params.variant == "local_coords":
        vec = (vec.reshape(-1, 2) - np.asarray(block_origin, dtype=np.float64)).ravel()
    return vec


def encode_frame(cell_map, width, height, params: TsParams, start_frame=0):
    """TS features for every block with at least one live cell."""
    M, K = params.M, params.K
    gw, gh = cell_grid(width, height, M)
    if gw < K or gh < K or not cell_map:
        return []
    dim = params.cell_dim
    grid = np.zeros((gh, gw, dim))
    live = np.zeros((gh, gw), dtype=bool)
    for (cx, cy), trajs in cell_map.items():
        if trajs:
            grid[cy, cx] = cell_vector(trajs, params)
            live[cy, cx] = True
    local = params.variant == "local_coords"
    counts = np.zeros((gh - K + 1, gw - K + 1), dtype=int)
    for cy in range(K):
        for cx in range(K):
            counts += live[cy : cy + gh - K + 1, cx : cx + gw - K + 1]
    out = []
    for by, bx in zip(*np.nonzero(counts)):
        block = grid[by : by + K, bx : bx + K].copy()
        origin = (bx * M, by * M)
        if local:
            mask = live[by : by + K, bx : bx + K]
            pts = block[mask].reshape(-1, dim // 2, 2) - np.array(origin, dtype=np.float64)
            block[mask] = pts.reshape(-1, dim)
        out.append(TSFeature(int(start_frame), origin, block.reshape(-1), int(counts[by, bx])))
    return out


def encode_video(trajectories, width, height, params: TsParams = TsParams()):
    """TS features for all starting frames, ordered by (start_frame, block row, block column)."""
    by_start = defaultdict(list)
    for tr in trajectories:
        if tr.L == params.L:
            by_start[tr.start_frame].append(tr)
    out = []
    for t in sorted(by_start):
        cells = assign_to_cells(by_start[t], params.M, width, height)
        out.extend(encode_frame(cells, width, height, params, t))
    return out


def feature_matrix(features, dim=None) -> np.ndarray:
    if not features:
        return np.empty((0, dim or 0))
    return np.stack([f.values for f in features])


# ---------------------------------------------------------------------------
# TSF1 feature files

_TSF_MAGIC = b"TSF1"
_TSF_VERSION = 1
_TSF_HEADER = struct.Struct("<4sHIQ")


def write_features(path, matrix, dim=None):
    """Write rows as float32: magic, u16 version, u32 dim, u64 count, then the rows."""
    m = np.asarray(matrix, dtype="<f4")
    if m.ndim != 2:
        if m.size == 0 and dim is not None:
            m = m.reshape(0, dim)
        else:
            raise ValueError("feature matrix must be 2-D")
    if dim is not None and m.shape[1] != dim:
        raise ValueError(f"matrix has {m.shape[1]} columns, expected {dim}")
    with open(path, "wb") as fh:
        fh.write(_TSF_HEADER.pack(_TSF_MAGIC, _TSF_VERSION, m.shape[1], m.shape[0]))
        fh.write(np.ascontiguousarray(m).tobytes())


def read_features(path) -> np.ndarray:
    """Read a TSF1 file into a float64 (count, dim) array."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _TSF_HEADER.size:
        raise BadFile(f"{path}: truncated TSF1 header")
    magic, version, dim, count = _TSF_HEADER.unpack_from(raw)
    if magic != _TSF_MAGIC:
        raise BadFile(f"{path}: not a TSF1 file")
    if version != _TSF_VERSION:
        raise BadFile(f"{path}: unsupported TSF1 version {version}")
    if len(raw) - _TSF_HEADER.size != 4 * dim * count:
        raise BadFile(f"{path}: TSF1 payload size does not match header")
    data = np.frombuffer(raw, dtype="<f4", count=dim * count, offset=_TSF_HEADER.size)
    return data.reshape(count, dim).astype(np.float64)
