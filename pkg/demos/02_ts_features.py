"""
Trajectory-Set features and block plots
=======================================

Trajectories starting in the same 10x10 px cell are averaged; 5x5 cells make
a block and the block's cell trajectories are concatenated into one vector.
"""

# %%
from pathlib import Path

import numpy as np

from trajset import MotionSpec, TsParams, encode_video, extract_trajectories, generate
from trajset.plot import block_cell_tracks, render_svg
from trajset.tracking import write_trajectories
from trajset.ts import assign_to_cells

out = Path("demo_output")
out.mkdir(exist_ok=True)

spec = MotionSpec.circulate(5.0, 2 * np.pi / 16, texture_seed=1, width=96, height=96, n_frames=40)
video = generate(spec)
trajs = extract_trajectories(video.frames)

# %%
for variant in ("displacement", "displacement_skip2", "local_coords"):
    p = TsParams(variant=variant)
    feats = encode_video(trajs, 96, 96, p)
    print(f"{variant:20s} dim {p.feature_dim:4d}  features {len(feats)}")

# %%
# Which cells are live at frame 0?
start0 = [t for t in trajs if t.start_frame == 0]
cells = assign_to_cells(start0, 10, 96, 96)
grid = np.zeros((9, 9), dtype=int)
for (cx, cy), members in cells.items():
    grid[cy, cx] = len(members)
print(grid)

# %%
# Plot the block whose top-left cell is (2, 2): one polyline per live cell.
tracks = block_cell_tracks(trajs, 0, (2, 2), width=96, height=96)
root = render_svg(tracks)
import xml.etree.ElementTree as ET

ET.ElementTree(root).write(out / "block_2_2.svg", encoding="utf-8", xml_declaration=True)
print(len(tracks), "cells plotted to", out / "block_2_2.svg")

# the same plot from the command line:
write_trajectories(out / "circulate.trj", trajs, 15)
print("ts plot demo_output/circulate.trj out.svg --frame 0 --block 2 2 --width 96 --height 96")
