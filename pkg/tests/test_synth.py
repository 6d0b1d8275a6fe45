import json
import math

import numpy as np
import pytest

from trajset.frames import read_frames
from trajset.synth import MotionSpec, advect, default_classes, generate, make_dataset, make_texture, write_dataset


def test_translate_constant_displacement():
    spec = MotionSpec.translate(1, 0, n_frames=16)
    assert all(spec.displacement(t) == (1.0, 0.0) for t in range(15))


def test_circulate_closed_form():
    w = 2 * math.pi / 16
    spec = MotionSpec.circulate(5, w)
    center = np.array([20.0, 30.0])
    start = center + (5.0, 0.0)
    for t in range(40):
        pos = start + spec.offset(t)
        np.testing.assert_allclose(pos, center + 5 * np.array([math.cos(w * t), math.sin(w * t)]), atol=1e-12)


@pytest.mark.parametrize("t0", [0, 3, 11])
def test_oscillate_sums_to_zero_per_period(t0):
    spec = MotionSpec.oscillate("x", 3, 8)
    total = np.sum([spec.displacement(t) for t in range(t0, t0 + 8)], axis=0)
    np.testing.assert_allclose(total, [0.0, 0.0], atol=1e-12)
    assert all(spec.displacement(t)[1] == 0.0 for t in range(8))


def test_spec_validation():
    with pytest.raises(ValueError):
        MotionSpec.translate(30, 0)
    with pytest.raises(ValueError):
        MotionSpec.oscillate("x", 3, 0)
    with pytest.raises(ValueError):
        MotionSpec("spin", {})


def test_texture_range_and_determinism():
    a, b = make_texture(48, 40, 5), make_texture(48, 40, 5)
    assert np.array_equal(a, b) and a.min() == 0.0 and a.max() == 1.0
    assert not np.array_equal(a, make_texture(48, 40, 6))


def test_integer_advect_is_exact_roll():
    tex = make_texture(32, 32, 1)
    np.testing.assert_allclose(advect(tex, (3, -2)), np.roll(tex, (-2, 3), axis=(0, 1)), atol=1e-12)


@pytest.mark.parametrize("spec", default_classes(64, 64, 20), ids=lambda s: s.kind)
def test_frames_consistent_with_ground_truth(spec):
    video = generate(spec)
    f0 = video.frames[0].data
    for t in range(1, 20):
        # frame 0 carried by the cumulative displacement
        cum = np.sum([video.displacement(i) for i in range(t)], axis=0)
        assert np.sqrt(np.mean((advect(f0, cum) - video.frames[t].data) ** 2)) < 0.02
        # previous frame carried one step (compounds resampling error)
        step = advect(video.frames[t - 1].data, video.displacement(t - 1))
        assert np.sqrt(np.mean((step - video.frames[t].data) ** 2)) < 0.02


def test_dataset_counts_and_groups():
    items = make_dataset(default_classes(), 10, 5, seed=0)
    assert len(items) == 30
    per_group = {g: sum(1 for it in items if it.group == g) for g in range(1, 6)}
    assert per_group == {g: 6 for g in range(1, 6)}
    assert {it.label for it in items} == {"translate", "oscillate", "circulate"}


def test_dataset_deterministic_and_jitter():
    a = make_dataset(default_classes(), 4, 2, seed=7)
    b = make_dataset(default_classes(), 4, 2, seed=7)
    assert [it.spec for it in a] == [it.spec for it in b]
    base = {s.kind: s.params for s in default_classes()}
    jittered = make_dataset(default_classes(), 4, 2, seed=7, jitter=0.2)
    for it in jittered:
        for k, v in it.spec.params.items():
            assert abs(v / base[it.spec.kind][k] - 1) <= 0.2 + 1e-12
    flat = make_dataset(default_classes(), 4, 2, seed=7, jitter=0.0)
    for it in flat:
        assert it.spec.params == base[it.spec.kind]
    assert len({it.spec.texture_seed for it in flat}) == len(flat)


def test_dataset_requires_enough_videos():
    with pytest.raises(ValueError):
        make_dataset(default_classes(), 2, 3)


def test_write_dataset(tmp_path):
    items = make_dataset(default_classes(32, 32, 5), 2, 2, seed=1)
    manifest = write_dataset(items, tmp_path)
    rows = [json.loads(line) for line in manifest.read_text().splitlines()]
    assert len(rows) == 6 and sorted({r["group"] for r in rows}) == [1, 2]
    frames = read_frames(tmp_path / rows[0]["path"])
    assert len(frames) == 5 and frames[0].data.shape == (32, 32)
    expected = generate(items[0].spec).frames[3].data
    assert np.max(np.abs(frames[3].data - expected)) <= 0.5 / 255 + 1e-12
