"""SVG plots of the cell trajectories that make up one TS block."""

from __future__ import annotations

import colorsys
import xml.etree.ElementTree as ET

import numpy as np

from .errors import EmptyBlock
from .tracking import read_trajectories
from .ts import exact_mean

SVG_NS = "http://www.w3.org/2000/svg"


def block_cell_tracks(trajectories, start_frame, block, M=10, K=5, width=None, height=None):
    """Mean point sequence per live cell of the block whose top-left cell is ``block``.

    Returns ``{(cx, cy): (L+1, 2) array}`` in pixel coordinates relative to the
    block's top-left corner.
    """
    bx, by = block
    gw = width // M if width else None
    gh = height // M if height else None
    cells = {}
    for tr in trajectories:
        if tr.start_frame != start_frame:
            continue
        x, y = tr.points[0]
        cx, cy = int(x // M), int(y // M)
        if gw:
            cx = min(cx, gw - 1)
        if gh:
            cy = min(cy, gh - 1)
        if bx <= cx < bx + K and by <= cy < by + K:
            cells.setdefault((cx, cy), []).append(np.asarray(tr.points, dtype=np.float64).ravel())
    origin = np.array([bx * M, by * M], dtype=np.float64)
    return {
        c: exact_mean(np.stack(rows)).reshape(-1, 2) - origin
        for c, rows in sorted(cells.items(), key=lambda kv: (kv[0][1], kv[0][0]))
    }


def _colors(n):
    out = []
    for i in range(n):
        r, g, b = colorsys.hsv_to_rgb(i / max(n, 1), 0.85, 0.85)
        out.append(f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}")
    return out


def render_svg(tracks: dict, size=400, pad=20) -> ET.Element:
    """One polyline per track, coloured distinctly, scaled to the tracks' extent."""
    pts = np.concatenate(list(tracks.values()))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = max(float((hi - lo).max()), 1e-9)
    scale = (size - 2 * pad) / span
    root = ET.Element("svg", xmlns=SVG_NS, version="1.1", width=f"{size}px", height=f"{size}px",
                      viewBox=f"0 0 {size} {size}")
    ET.SubElement(root, "rect", x="0", y="0", width=str(size), height=str(size), fill="white")
    group = ET.SubElement(root, "g", fill="none")
    for color, ((cx, cy), track) in zip(_colors(len(tracks)), tracks.items()):
        xy = (track - lo) * scale + pad
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in xy)
        line = ET.SubElement(group, "polyline", points=coords, stroke=color)
        line.set("stroke-width", "1.5")
        line.set("data-cell", f"{cx},{cy}")
    return root


def cmd_plot(dump_path, start_frame, block, out_svg, M=10, K=5, width=None, height=None):
    """Plot the block ``block`` = (bx, by) (in cells) at ``start_frame`` from a TRJ1 dump."""
    trajs = read_trajectories(dump_path)
    tracks = block_cell_tracks(trajs, start_frame, block, M, K, width, height)
    if not tracks:
        raise EmptyBlock(f"no trajectory starts in block {tuple(block)} at frame {start_frame}")
    root = render_svg(tracks)
    ET.ElementTree(root).write(out_svg, encoding="utf-8", xml_declaration=True)
    return len(tracks)
