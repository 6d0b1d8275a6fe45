"""Dense optical flow by polynomial expansion (Farneback), plus median smoothing.

Each frame is locally approximated by a quadratic polynomial
``f(x) ~ x^T A x + b^T x + c`` fitted with a Gaussian applicability window.
For a pure translation ``d`` the linear coefficients satisfy
``b2 = b1 - 2 A d``, which gives a per-pixel linear system that is
averaged over a neighbourhood and refined iteratively, coarse to fine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BadKernel, DimensionMismatch
from .frames import GrayFrame, resize_bilinear

# The solver works on 8-bit-scaled intensities so the determinant regulariser
# keeps its conventional magnitude.
_INTENSITY_SCALE = 255.0
_DET_EPS = 1e-3
_MIN_INTERNAL_SIDE = 16


@dataclass(frozen=True)
class FlowParams:
    window: int = 15
    iterations: int = 3
    levels: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1
    pyr_scale: float = 0.5

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("flow window must be odd and >= 3")
        if self.iterations < 1 or self.levels < 1:
            raise ValueError("iterations and levels must be >= 1")
        if self.poly_n < 1 or self.poly_sigma <= 0:
            raise ValueError("poly_n must be >= 1 and poly_sigma > 0")
        if not 0.0 < self.pyr_scale < 1.0:
            raise ValueError("pyr_scale must lie in (0, 1)")

    @property
    def margin(self) -> int:
        """Pixels from each edge that count as low-confidence."""
        return self.window // 2


@dataclass(frozen=True)
class FlowField:
    """Per-pixel (dx, dy) displacement, shape (height, width, 2)."""

    vectors: np.ndarray
    margin: int = 0

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 3 or v.shape[2] != 2:
            raise ValueError(f"flow vectors must have shape (h, w, 2), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("flow contains non-finite components")
        object.__setattr__(self, "vectors", v)

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    def confident_mask(self) -> np.ndarray:
        mask = np.zeros((self.height, self.width), dtype=bool)
        m = self.margin
        mask[m : self.height - m, m : self.width - m] = True
        return mask


# ---------------------------------------------------------------------------
# polynomial expansion


def _expansion_filters(n, sigma):
    u = np.arange(-n, n + 1, dtype=np.float64)
    g = np.exp(-0.5 * (u / sigma) ** 2)
    g /= g.sum()
    uu, vv = np.meshgrid(u, u, indexing="xy")
    basis = np.stack([np.ones_like(uu), uu, vv, uu**2, vv**2, uu * vv]).reshape(6, -1)
    a = np.outer(g, g).ravel()
    gram = (basis * a) @ basis.T
    return g, u, np.linalg.inv(gram)


def poly_expand(img: np.ndarray, n=5, sigma=1.1) -> np.ndarray:
    """Quadratic fit per pixel: returns (h, w, 5) holding bx, by, axx, ayy, axy.

    The local model is ``x'Ax + b'x + c`` with symmetric ``A = [[axx, axy], [axy, ayy]]``.
    """
    g, u, ginv = _expansion_filters(n, sigma)
    kx = {0: g, 1: g * u, 2: g * u * u}

    def corr(img_, k, axis):
        return ndimage.correlate1d(img_, k, axis=axis, mode="nearest")

    rows = {p: corr(img, kx[p], 0) for p in (0, 1, 2)}
    r = np.empty((6,) + img.shape)
    r[0] = corr(rows[0], kx[0], 1)
    r[1] = corr(rows[0], kx[1], 1)
    r[2] = corr(rows[1], kx[0], 1)
    r[3] = corr(rows[0], kx[2], 1)
    r[4] = corr(rows[2], kx[0], 1)
    r[5] = corr(rows[1], kx[1], 1)
    coef = np.tensordot(ginv, r, axes=1)
    out = np.empty(img.shape + (5,))
    out[..., 0] = coef[1]
    out[..., 1] = coef[2]
    out[..., 2] = coef[3]
    out[..., 3] = coef[4]
    out[..., 4] = 0.5 * coef[5]
    return out


def _internal_shapes(h, w, params):
    shapes = [(h, w)]
    for k in range(1, params.levels):
        s = params.pyr_scale**k
        nh, nw = int(round(h * s)), int(round(w * s))
        if min(nh, nw) < _MIN_INTERNAL_SIDE:
            break
        shapes.append((nh, nw))
    return shapes


def prepare(img: np.ndarray, params: FlowParams) -> list:
    """Polynomial expansions of ``img`` at every internal pyramid level, finest first.

    Each entry is ``(coefficients, spline_coefficients)``; the second is the
    cubic-spline prefiltered copy used when the frame is the warped side.
    """
    img = np.asarray(img, dtype=np.float64) * _INTENSITY_SCALE
    h, w = img.shape
    out = []
    for k, (nh, nw) in enumerate(_internal_shapes(h, w, params)):
        if k == 0:
            level = img
        else:
            sigma = (1.0 / params.pyr_scale**k - 1.0) * 0.5
            level = resize_bilinear(ndimage.gaussian_filter(img, sigma, mode="nearest"), nw, nh)
        coef = poly_expand(level, params.poly_n, params.poly_sigma)
        spline = np.stack(
            [ndimage.spline_filter(coef[..., c], order=3, mode="nearest") for c in range(5)], axis=-1
        )
        out.append((coef, spline))
    return out


def _sample(spline, flow):
    """Cubic-spline sample every channel at pixel + flow (clamped).

    ``spline`` holds prefiltered coefficients; bilinear lookup here biases the
    fixed point of the iteration by a few hundredths of a pixel.
    """
    h, w = spline.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    coords = [np.clip(yy + flow[..., 1], 0, h - 1), np.clip(xx + flow[..., 0], 0, w - 1)]
    return np.stack(
        [
            ndimage.map_coordinates(spline[..., c], coords, order=3, mode="nearest", prefilter=False)
            for c in range(spline.shape[2])
        ],
        axis=-1,
    )


def _refine(r1, r2_spline, flow, window):
    r2w = _sample(r2_spline, flow)
    a = 0.5 * (r1[..., 2] + r2w[..., 2])
    e = 0.5 * (r1[..., 3] + r2w[..., 3])
    c = 0.5 * (r1[..., 4] + r2w[..., 4])
    dbx = -0.5 * (r2w[..., 0] - r1[..., 0]) + a * flow[..., 0] + c * flow[..., 1]
    dby = -0.5 * (r2w[..., 1] - r1[..., 1]) + c * flow[..., 0] + e * flow[..., 1]
    m = np.stack(
        [a * a + c * c, c * (a + e), e * e + c * c, a * dbx + c * dby, c * dbx + e * dby], axis=0
    )
    sigma = window / 5.0
    trunc = (window // 2) / sigma
    m = ndimage.gaussian_filter(m, (0.0, sigma, sigma), mode="nearest", truncate=trunc)
    g11, g12, g22, h1, h2 = m
    idet = 1.0 / (g11 * g22 - g12 * g12 + _DET_EPS)
    out = np.empty_like(flow)
    out[..., 0] = (g22 * h1 - g12 * h2) * idet
    out[..., 1] = (g11 * h2 - g12 * h1) * idet
    return out


def flow_from_prepared(p1: list, p2: list, params: FlowParams) -> np.ndarray:
    """Coarse-to-fine flow between two prepared frames; returns (h, w, 2)."""
    n = min(len(p1), len(p2))
    flow = None
    for k in range(n - 1, -1, -1):
        r1, r2_spline = p1[k][0], p2[k][1]
        h, w = r1.shape[:2]
        if flow is None:
            flow = np.zeros((h, w, 2))
        else:
            ph, pw = flow.shape[:2]
            up = np.empty((h, w, 2))
            up[..., 0] = resize_bilinear(flow[..., 0], w, h) * (w / pw)
            up[..., 1] = resize_bilinear(flow[..., 1], w, h) * (h / ph)
            flow = up
        for _ in range(params.iterations):
            flow = _refine(r1, r2_spline, flow, params.window)
    return flow


def estimate_flow(prev: GrayFrame, next: GrayFrame, params: FlowParams | None = None) -> FlowField:
    """Dense flow mapping ``prev`` onto ``next`` (pixels per frame step)."""
    params = params or FlowParams()
    a = prev.data if isinstance(prev, GrayFrame) else np.asarray(prev, dtype=np.float64)
    b = next.data if isinstance(next, GrayFrame) else np.asarray(next, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"frame sizes differ: {a.shape[::-1]} vs {b.shape[::-1]}")
    vec = flow_from_prepared(prepare(a, params), prepare(b, params), params)
    return FlowField(vec, params.margin)


def median_filter_flow(flow: FlowField, kernel: int = 3) -> FlowField:
    """Component-wise median over a ``kernel`` x ``kernel`` window, clamped borders."""
    if not isinstance(kernel, (int, np.integer)) or kernel < 1 or kernel % 2 == 0:
        raise BadKernel(f"median kernel must be an odd integer >= 1, got {kernel!r}")
    if kernel == 1:
        return FlowField(flow.vectors.copy(), flow.margin)
    v = flow.vectors
    out = np.stack(
        [ndimage.median_filter(v[..., c], size=kernel, mode="nearest") for c in range(2)], axis=-1
    )
    return FlowField(out, flow.margin)


def sample_flow(vectors: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Bilinear flow lookup at float (x, y) points; returns (n, 2)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    h, w = vectors.shape[:2]
    coords = [np.clip(pts[:, 1], 0, h - 1), np.clip(pts[:, 0], 0, w - 1)]
    return np.stack(
        [ndimage.map_coordinates(vectors[..., c], coords, order=1, mode="nearest") for c in range(2)],
        axis=-1,
    )
