"""Synthetic videos with closed-form global motion.

A band-limited random texture is advected with wraparound, so every pixel has
exact ground truth: frame ``t`` samples the texture at ``x - offset(t)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .frames import GrayFrame, write_y4m

TEXTURE_SIGMA = 2.0
MAX_STEP = 20.0

KINDS = ("translate", "oscillate", "circulate")
_PARAM_NAMES = {
    "translate": ("dx", "dy"),
    "oscillate": ("amplitude", "period"),
    "circulate": ("radius", "angular_velocity"),
}


@dataclass(frozen=True)
class MotionSpec:
    kind: str
    params: dict
    texture_seed: int = 0
    width: int = 64
    height: int = 64
    n_frames: int = 60
    axis: str = "x"
    name: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown motion kind {self.kind!r}")
        missing = set(_PARAM_NAMES[self.kind]) - set(self.params)
        if missing:
            raise ValueError(f"{self.kind} motion needs parameters {sorted(missing)}")
        if self.axis not in ("x", "y"):
            raise ValueError("axis must be 'x' or 'y'")
        if self.width < 1 or self.height < 1 or self.n_frames < 1:
            raise ValueError("frame size and count must be positive")
        if self.kind == "oscillate" and self.params["period"] <= 0:
            raise ValueError("period must be positive")
        steps = [np.hypot(*self.displacement(t)) for t in range(max(self.n_frames - 1, 1))]
        if max(steps) > MAX_STEP:
            raise ValueError(f"per-frame displacement {max(steps):.2f} exceeds {MAX_STEP}")

    @classmethod
    def translate(cls, dx, dy, **kw):
        return cls("translate", {"dx": float(dx), "dy": float(dy)}, **kw)

    @classmethod
    def oscillate(cls, axis, amplitude, period, **kw):
        return cls("oscillate", {"amplitude": float(amplitude), "period": float(period)}, axis=axis, **kw)

    @classmethod
    def circulate(cls, radius, angular_velocity, **kw):
        return cls("circulate", {"radius": float(radius), "angular_velocity": float(angular_velocity)}, **kw)

    @property
    def label(self) -> str:
        return self.name or self.kind

    def offset(self, t):
        """Cumulative content displacement from frame 0 to frame ``t``."""
        p = self.params
        if self.kind == "translate":
            return (p["dx"] * t, p["dy"] * t)
        if self.kind == "oscillate":
            s = p["amplitude"] * math.sin(2.0 * math.pi * t / p["period"])
            return (s, 0.0) if self.axis == "x" else (0.0, s)
        r, w = p["radius"], p["angular_velocity"]
        return (r * (math.cos(w * t) - 1.0), r * math.sin(w * t))

    def displacement(self, t):
        """Motion from frame ``t`` to frame ``t + 1``."""
        a, b = self.offset(t), self.offset(t + 1)
        return (b[0] - a[0], b[1] - a[1])

    def to_dict(self):
        return {
            "kind": self.kind, "params": dict(self.params), "texture_seed": self.texture_seed,
            "width": self.width, "height": self.height, "n_frames": self.n_frames,
            "axis": self.axis, "name": self.name,
        }


@dataclass
class SyntheticVideo:
    spec: MotionSpec
    frames: list
    texture: np.ndarray = field(repr=False)

    def offset(self, t):
        return self.spec.offset(t)

    def displacement(self, t):
        return self.spec.displacement(t)


def make_texture(width, height, seed, sigma=TEXTURE_SIGMA):
    """Gaussian-smoothed uniform noise, periodic, stretched to [0, 1]."""
    rng = np.random.default_rng(seed)
    tex = ndimage.gaussian_filter(rng.uniform(size=(height, width)), sigma, mode="wrap")
    lo, hi = tex.min(), tex.max()
    return (tex - lo) / (hi - lo)


def advect(texture, offset):
    """Texture translated by ``offset`` = (ox, oy) with bilinear sampling and wraparound."""
    h, w = texture.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    out = ndimage.map_coordinates(texture, [yy - offset[1], xx - offset[0]], order=1, mode="grid-wrap")
    return np.clip(out, 0.0, 1.0)


def generate(spec: MotionSpec) -> SyntheticVideo:
    tex = make_texture(spec.width, spec.height, spec.texture_seed)
    frames = [GrayFrame(advect(tex, spec.offset(t)), t) for t in range(spec.n_frames)]
    return SyntheticVideo(spec, frames, tex)


def default_classes(width=64, height=64, n_frames=60):
    """The three benchmark motion templates."""
    kw = dict(width=width, height=height, n_frames=n_frames)
    return [
        MotionSpec.translate(1.5, -0.5, **kw),
        MotionSpec.oscillate("x", 3.0, 8.0, **kw),
        MotionSpec.circulate(5.0, 2.0 * math.pi / 16.0, **kw),
    ]


@dataclass(frozen=True)
class DatasetItem:
    spec: MotionSpec
    label: str
    group: int


def jitter_spec(spec: MotionSpec, rng, amount, texture_seed):
    params = {k: v * (1.0 + rng.uniform(-amount, amount)) if amount else v for k, v in spec.params.items()}
    return replace(spec, params=params, texture_seed=texture_seed)


def make_dataset(classes, per_class, groups, seed=0, jitter=0.2):
    """Jittered instances of each template with round-robin group ids starting at 1."""
    if per_class < groups:
        raise ValueError("per_class must be >= groups")
    if groups < 1:
        raise ValueError("groups must be >= 1")
    rng = np.random.default_rng(seed)
    items = []
    for template in classes:
        for i in range(per_class):
            tex_seed = int(rng.integers(0, 2**31 - 1))
            spec = jitter_spec(template, rng, jitter, tex_seed)
            items.append(DatasetItem(spec, template.label, i % groups + 1))
    return items


def write_dataset(items, out_dir, manifest_name="manifest.jsonl", fps=30):
    """Render every item to ``<out_dir>/<label>_<nn>.y4m`` and write a JSONL manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counters = {}
    rows = []
    for item in items:
        n = counters.get(item.label, 0)
        counters[item.label] = n + 1
        fname = f"{item.label}_{n:03d}.y4m"
        video = generate(item.spec)
        write_y4m(out / fname, video.frames, fps=fps)
        rows.append({"path": fname, "label": item.label, "group": item.group, "motion": item.spec.to_dict()})
    manifest = out / manifest_name
    with open(manifest, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return manifest
