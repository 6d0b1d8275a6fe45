"""Naive reference for block encoding, used as an oracle by the TS tests."""

import math
from fractions import Fraction

import numpy as np

from trajset.tracking import Trajectory

VARIANTS = ["displacement", "local_coords", "displacement_skip2"]


def random_trajs(rng, n, L, width, height, start_frames=(0,), edge_prob=0.1):
    out = []
    for _ in range(n):
        x, y = rng.uniform(0, width), rng.uniform(0, height)
        if rng.random() < edge_prob:
            x = float(width)
        if rng.random() < edge_prob:
            y = float(height)
        steps = rng.normal(scale=2.0, size=(L, 2))
        pts = np.cumsum(np.vstack([[x, y], steps]), axis=0)
        out.append(Trajectory.from_points(pts, int(rng.choice(start_frames))))
    return out


def _oracle_cell(x, y, M, gw, gh):
    cx = min(math.floor(Fraction(x) / M), gw - 1)
    cy = min(math.floor(Fraction(y) / M), gh - 1)
    return cx, cy


def _oracle_rep(tr, variant):
    d = [(float(a), float(b)) for a, b in tr.displacements]
    if variant == "displacement":
        return [c for v in d for c in v]
    if variant == "local_coords":
        return [float(c) for p in tr.points for c in p]
    pairs = [(d[i][0] + d[i + 1][0], d[i][1] + d[i + 1][1]) for i in range(0, len(d) - 1, 2)]
    if len(d) % 2:
        pairs.append(d[-1])
    return [c for v in pairs for c in v]


def _oracle_mean(reps):
    n = len(reps)
    return [float(sum(Fraction(r[j]) for r in reps)) / n for j in range(len(reps[0]))]


def oracle_encode(trajs, width, height, M, K, L, variant):
    gw, gh = width // M, height // M
    dim = {"displacement": 2 * L, "local_coords": 2 * (L + 1), "displacement_skip2": 2 * math.ceil(L / 2)}[variant]
    out = []
    for t in sorted({tr.start_frame for tr in trajs}):
        for by in range(gh - K + 1):
            for bx in range(gw - K + 1):
                values, live = [], 0
                for cy in range(by, by + K):
                    for cx in range(bx, bx + K):
                        members = [tr for tr in trajs if tr.start_frame == t
                                   and _oracle_cell(tr.points[0][0], tr.points[0][1], M, gw, gh) == (cx, cy)]
                        if not members:
                            values.extend([0.0] * dim)
                            continue
                        live += 1
                        mean = _oracle_mean([_oracle_rep(tr, variant) for tr in members])
                        if variant == "local_coords":
                            mean = [v - (bx * M if j % 2 == 0 else by * M) for j, v in enumerate(mean)]
                        values.extend(mean)
                if live:
                    out.append((t, (bx * M, by * M), live, tuple(values)))
    return out
