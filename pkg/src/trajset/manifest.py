"""JSON-lines dataset manifests: one ``{"path", "label", "group"}`` object per video."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidConfig


@dataclass(frozen=True)
class ManifestRow:
    path: Path
    label: str
    group: int
    index: int

    @property
    def key(self) -> str:
        """Stable per-video stem used for every output file of this video."""
        return f"{self.index:04d}_{self.path.stem}"


@dataclass(frozen=True)
class Manifest:
    name: str
    rows: tuple

    @property
    def labels(self):
        return sorted({r.label for r in self.rows})

    @property
    def groups(self):
        return sorted({r.group for r in self.rows})

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)


def read_manifest(path) -> Manifest:
    """Relative video paths resolve against the manifest's directory."""
    path = Path(path)
    base = path.parent
    rows = []
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise InvalidConfig(f"cannot read manifest {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            video = Path(obj["path"])
            label = str(obj["label"])
            group = int(obj["group"])
        except (ValueError, KeyError, TypeError) as exc:
            raise InvalidConfig(f"{path}:{lineno}: bad manifest row ({exc})") from exc
        if group < 1:
            raise InvalidConfig(f"{path}:{lineno}: group ids must be >= 1")
        rows.append(ManifestRow(video if video.is_absolute() else base / video, label, group, len(rows)))
    return Manifest(path.stem, tuple(rows))


def write_manifest(path, rows):
    """Write dict rows (path, label, group and any extra keys) as JSON lines."""
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
