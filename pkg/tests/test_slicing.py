"""Slice extraction, stacks, and randomized training export."""

import json
import os

import numpy as np
import pytest

from planetomo.geometry import DirectionFrame, make_frame
from planetomo.phantoms import ball, one_hot
from planetomo.slicing import (
    extract_slice,
    extract_stack,
    sample_training_stacks,
    save_training_slices,
    stack_offsets,
    stack_pixels,
)
from planetomo.volume import Volume3, interpolate


@pytest.fixture
def ones_volume():
    return Volume3.from_array(np.ones((8, 8, 8), dtype=np.float32))


@pytest.fixture
def axis_frame():
    # n along the d axis, u and v along h and w
    return make_frame(np.array([0.0, 0.0, 1.0]))


def test_constant_volume_axis_slice(ones_volume, axis_frame):
    sl = extract_slice(ones_volume, 0.0, axis_frame, 16, 16)
    np.testing.assert_allclose(sl.data, 1.0, atol=1e-7)
    assert sl.s == 0.0


def test_plane_missing_the_cube(ones_volume, axis_frame):
    for s in (1.8, -2.0, np.sqrt(3) + 0.01):
        sl = extract_slice(ones_volume, s, axis_frame, 8, 8)
        assert np.all(sl.data == 0.0)


def test_one_hot_center_peaks_at_center_pixel():
    vol = one_hot((9, 9, 9))
    rng = np.random.default_rng(4)
    for _ in range(10):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        sl = extract_slice(vol, 0.0, make_frame(n), 15, 15)
        assert np.unravel_index(np.argmax(sl.data), sl.data.shape) == (7, 7)


def test_slice_shape_validation(ones_volume, axis_frame):
    with pytest.raises(ValueError):
        extract_slice(ones_volume, 0.0, axis_frame, 1, 8)


def test_stack_offsets_formula():
    np.testing.assert_allclose(stack_offsets(3), [-2, -1, 0, 1, 2], atol=1e-15)
    offs = stack_offsets(100)
    assert len(offs) == 102
    np.testing.assert_allclose(np.diff(offs), 2 / 99, atol=1e-14)
    with pytest.raises(ValueError):
        stack_offsets(2)


def test_stack_of_constant_volume(ones_volume, axis_frame):
    stack = extract_stack(ones_volume, axis_frame, 5, 8, 8)
    assert stack.count == 7
    # guard slices sit outside the support
    assert np.all(stack.slices[0].data == 0.0)
    assert np.all(stack.slices[-1].data == 0.0)
    for sl in stack.slices[1:-1]:
        np.testing.assert_allclose(sl.data, 1.0, atol=1e-7)


def test_stack_pixels_matches_extract_stack(ones_volume):
    frame = make_frame(np.array([0.6, 0.0, 0.8]))
    stack = extract_stack(ones_volume, frame, 6, 10, 12)
    block = stack_pixels(ones_volume, frame, 6, 10, 12)
    for k, sl in enumerate(stack.slices):
        np.testing.assert_allclose(sl.data, block[k], atol=1e-7)


def test_flipped_frame_rotates_slice():
    vol = ball((16, 16, 16), center=(0.2, -0.1, 0.3), radius=0.4)
    frame = make_frame(np.array([0.48, 0.6, 0.64]))
    flipped = DirectionFrame(n=frame.n, u=-frame.u, v=-frame.v)
    a = extract_slice(vol, 0.21, frame, 11, 13).data
    b = extract_slice(vol, 0.21, flipped, 11, 13).data
    np.testing.assert_allclose(b, a[::-1, ::-1], atol=1e-6)


def test_slice_linearity():
    rng = np.random.default_rng(12)
    v1 = Volume3.from_array(rng.random((6, 6, 6)).astype(np.float32))
    v2 = Volume3.from_array(rng.random((6, 6, 6)).astype(np.float32))
    combo = Volume3.from_array(2.0 * v1.data - 0.5 * v2.data)
    frame = make_frame(np.array([0.0, 0.6, 0.8]))
    a = extract_slice(combo, 0.1, frame, 9, 9).data
    b = (
        2.0 * extract_slice(v1, 0.1, frame, 9, 9).data
        - 0.5 * extract_slice(v2, 0.1, frame, 9, 9).data
    )
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_training_stacks_deterministic():
    vol = ball((12, 12, 12))
    a_slices, a_meta = sample_training_stacks(vol, 2, 5, h_s=16, w_s=16, seed=77)
    b_slices, b_meta = sample_training_stacks(vol, 2, 5, h_s=16, w_s=16, seed=77)
    assert a_meta == b_meta
    for sa, sb in zip(a_slices, b_slices):
        np.testing.assert_array_equal(sa.data, sb.data)
    c_slices, _ = sample_training_stacks(vol, 2, 5, h_s=16, w_s=16, seed=78)
    assert any(
        np.abs(sa.data - sc.data).max() > 1e-6 for sa, sc in zip(a_slices, c_slices)
    )


def test_training_stack_frame_invariants():
    vol = ball((12, 12, 12))
    _, meta = sample_training_stacks(vol, 3, 4, h_s=8, w_s=8, seed=5)
    assert len(meta) == 12
    for entry in meta:
        n = np.array(entry["n"])
        u = np.array(entry["u"])
        v = np.array(entry["v"])
        assert abs(np.linalg.norm(n) - 1.0) <= 1e-10
        assert abs(np.dot(u, n)) <= 1e-10
        assert abs(np.dot(v, n)) <= 1e-10
        assert abs(np.dot(u, v)) <= 1e-10  # shear disabled by default
        assert 0.7 - 1e-12 <= np.linalg.norm(u) <= 1.3 + 1e-12
        assert 0.7 - 1e-12 <= np.linalg.norm(v) <= 1.3 + 1e-12
        a, b = entry["intensity"]
        assert -0.3 <= a <= 0.3 and -0.3 <= b <= 0.3


def test_training_stack_zero_augmentation_geometry():
    # with all jitter off, the center pixel of slice m must equal the
    # volume sampled at s_m * n, whatever in-plane rotation was drawn
    vol = ball((16, 16, 16), center=(0.1, 0.2, -0.1), radius=0.45)
    slices, meta = sample_training_stacks(
        vol,
        1,
        5,
        h_s=9,
        w_s=9,
        scale_range=(1.0, 1.0),
        translation_range=(0.0, 0.0),
        intensity_range=(0.0, 0.0),
        seed=3,
    )
    for sl, entry in zip(slices, meta):
        expected = interpolate(vol, entry["s"] * np.array(entry["n"]))
        assert abs(float(sl.data[4, 4]) - expected) <= 1e-6


def test_training_stack_metadata_reproduces_pixels():
    # the recorded frame, shift, and intensity parameters are sufficient
    # to recompute any pixel
    vol = ball((16, 16, 16), center=(-0.2, 0.0, 0.15), radius=0.5)
    slices, meta = sample_training_stacks(vol, 1, 4, h_s=9, w_s=9, seed=21)
    for sl, entry in zip(slices, meta):
        n, u, v = (np.array(entry[k]) for k in ("n", "u", "v"))
        du, dv = entry["translation"]
        a, b = entry["intensity"]
        center = entry["s"] * n + du * u + dv * v
        expected = (1.0 + a) * interpolate(vol, center) + b
        assert abs(float(sl.data[4, 4]) - expected) <= 1e-5


def test_training_export_files(tmp_path):
    vol = ball((12, 12, 12))
    slices, meta = sample_training_stacks(vol, 2, 3, h_s=8, w_s=8, seed=9)
    stem = os.path.join(tmp_path, "train")
    save_training_slices(slices, meta, stem)
    with open(stem + ".json") as fh:
        doc = json.load(fh)
    assert doc["shape"] == [6, 8, 8]
    assert doc["dtype"] == "f32le"
    assert len(doc["slices"]) == 6
    raw = np.fromfile(stem + ".bin", dtype="<f4").reshape(6, 8, 8)
    for k, sl in enumerate(slices):
        np.testing.assert_array_equal(raw[k], sl.data)


def test_training_stack_scale_range_validation():
    vol = ball((8, 8, 8))
    with pytest.raises(ValueError):
        sample_training_stacks(vol, 1, 4, scale_range=(0.0, 1.0), seed=0)
    with pytest.raises(ValueError):
        sample_training_stacks(vol, 1, 1, seed=0)
