"""Run configuration: every module's parameters in one validated object."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidConfig
from .flow import FlowParams
from .frames import DEFAULT_MIN_SIDE, DEFAULT_SCALE_FACTOR
from .mlp import ACTIVATIONS, TrainConfig
from .tracking import TrackerParams
from .ts import TsParams


@dataclass(frozen=True)
class PyramidParams:
    scale_factor: float = DEFAULT_SCALE_FACTOR
    min_side: int = DEFAULT_MIN_SIDE

    def __post_init__(self):
        if not 0.0 < self.scale_factor < 1.0:
            raise ValueError("scale_factor must lie in (0, 1)")
        if self.min_side < 8:
            raise ValueError("min_side must be >= 8")


@dataclass(frozen=True)
class CodebookParams:
    ratio: float = 0.01
    n_components: int = 64
    seed: int = 0
    max_iters: int = 100
    tol: float = 1e-6
    pca_dim: int | None = None
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError("codebook ratio must lie in (0, 1]")
        if self.n_components < 1 or self.max_iters < 0:
            raise ValueError("n_components must be >= 1 and max_iters >= 0")
        if self.pca_dim is not None and self.pca_dim < 1:
            raise ValueError("pca_dim must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")


@dataclass(frozen=True)
class MlpParams:
    hidden_dim: int = 100
    activation: str = "relu"
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")


@dataclass(frozen=True)
class RunConfig:
    pyramid: PyramidParams = PyramidParams()
    flow: FlowParams = FlowParams()
    tracker: TrackerParams = TrackerParams()
    ts: TsParams = TsParams()
    codebook: CodebookParams = CodebookParams()
    mlp: MlpParams = MlpParams()
    workers: int = 1
    seed: int = 0
    shared_codebook: bool = False
    baseline: str | None = None

    def __post_init__(self):
        if self.ts.L != self.tracker.L:
            raise ValueError(f"ts.L={self.ts.L} must equal tracker.L={self.tracker.L}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.baseline not in (None, "random"):
            raise ValueError("baseline must be null or 'random'")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def effective_workers(self) -> int:
        cap = os.environ.get("TS_WORKERS")
        if cap:
            try:
                return max(1, min(self.workers, int(cap)))
            except ValueError:
                raise InvalidConfig(f"TS_WORKERS must be an integer, got {cap!r}") from None
        return self.workers


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise InvalidConfig(f"{where}: expected a table, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise InvalidConfig(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = fields[name].default
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    """Build a RunConfig from nested tables; a top-level ``L`` sets both tracker and ts."""
    data = dict(data)
    if "L" in data:
        L = data.pop("L")
        data.setdefault("tracker", {})
        data.setdefault("ts", {})
        data["tracker"] = {**data["tracker"], "L": L}
        data["ts"] = {**data["ts"], "L": L}
    return _build(RunConfig, data, "config")


def merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config_dict(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    except ValueError as exc:
        raise InvalidConfig(f"cannot parse config {path}: {exc}") from exc


def load_config(path=None, overrides=None) -> RunConfig:
    data = load_config_dict(path) if path else {}
    if overrides:
        data = merge(data, overrides)
    return config_from_dict(data)
