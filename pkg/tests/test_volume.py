"""Trilinear interpolation semantics and raw volume I/O."""

import json
import os

import numpy as np
import pytest

from planetomo.volume import (
    BadHeaderError,
    NonFiniteError,
    PayloadSizeError,
    Volume3,
    interpolate,
    interpolate_many,
    load_volume,
    save_volume,
)


@pytest.fixture
def random_volume():
    rng = np.random.default_rng(42)
    return Volume3.from_array(rng.random((5, 6, 7)).astype(np.float32))


def test_corner_conditions():
    vol = Volume3.from_array(np.arange(8, dtype=np.float32).reshape(2, 2, 2))
    assert interpolate(vol, (-1.0, -1.0, -1.0)) == 0.0
    assert interpolate(vol, (1.0, 1.0, 1.0)) == 7.0


def test_outside_is_exactly_zero():
    vol = Volume3.from_array(np.ones((4, 4, 4), dtype=np.float32))
    for x in [(2, 0, 0), (0, -1.0001, 0), (0, 0, 1.0001), (5, 5, 5)]:
        assert interpolate(vol, x) == 0.0


def test_boundary_points_interpolate_not_zero():
    # faces belong to the closed cube: a face point reproduces the face value
    vol = Volume3.from_array(np.full((4, 4, 4), 3.0, dtype=np.float32))
    assert interpolate(vol, (1.0, 0.0, 0.0)) == pytest.approx(3.0)
    assert interpolate(vol, (-1.0, 0.3, -0.7)) == pytest.approx(3.0)
    assert interpolate(vol, (0.25, 1.0, -1.0)) == pytest.approx(3.0)


def test_constant_volume_reproduced_inside(random_volume):
    vol = Volume3.from_array(np.full((3, 4, 5), 2.5, dtype=np.float32))
    rng = np.random.default_rng(7)
    pts = rng.uniform(-1, 1, size=(500, 3))
    np.testing.assert_allclose(interpolate_many(vol, pts), 2.5, atol=1e-12)


def test_exact_at_voxel_centers(random_volume):
    d, h, w = random_volume.shape
    for i in range(d):
        for j in range(h):
            for k in range(w):
                x = (2 * i / (d - 1) - 1, 2 * j / (h - 1) - 1, 2 * k / (w - 1) - 1)
                got = interpolate(random_volume, x)
                assert abs(got - float(random_volume.data[i, j, k])) <= 1e-6


def test_monotone_bounded(random_volume):
    # interior samples stay within the min/max of the 8 surrounding voxels
    rng = np.random.default_rng(3)
    data = random_volume.data.astype(np.float64)
    d, h, w = random_volume.shape
    for _ in range(300):
        x = rng.uniform(-0.999, 0.999, size=3)
        a = (x + 1.0) * (np.array([d, h, w]) - 1.0) / 2.0
        i0 = np.floor(a).astype(int)
        cell = data[i0[0] : i0[0] + 2, i0[1] : i0[1] + 2, i0[2] : i0[2] + 2]
        got = interpolate(random_volume, x)
        assert cell.min() - 1e-12 <= got <= cell.max() + 1e-12


def test_linearity(random_volume):
    rng = np.random.default_rng(9)
    other = Volume3.from_array(rng.random((5, 6, 7)).astype(np.float32))
    alpha, beta = 0.7, -1.3
    combo = Volume3.from_array(alpha * random_volume.data + beta * other.data)
    pts = rng.uniform(-1.2, 1.2, size=(400, 3))
    lhs = interpolate_many(combo, pts)
    rhs = alpha * interpolate_many(random_volume, pts) + beta * interpolate_many(
        other, pts
    )
    np.testing.assert_allclose(lhs, rhs, rtol=1e-6, atol=1e-6)


def test_volume_validation():
    with pytest.raises(ValueError):
        Volume3.from_array(np.ones((1, 4, 4), dtype=np.float32))
    with pytest.raises(ValueError):
        Volume3.from_array(np.ones((4, 4), dtype=np.float32))
    bad = np.ones((3, 3, 3), dtype=np.float32)
    bad[1, 1, 1] = np.nan
    with pytest.raises(NonFiniteError):
        Volume3.from_array(bad)


def test_roundtrip_bitwise(tmp_path, random_volume):
    path = os.path.join(tmp_path, "vol")
    save_volume(random_volume, path)
    back = load_volume(path)
    np.testing.assert_array_equal(back.data, random_volume.data)
    assert back.shape == random_volume.shape


def test_roundtrip_accepts_either_suffix(tmp_path, random_volume):
    path = os.path.join(tmp_path, "vol.json")
    save_volume(random_volume, path)
    np.testing.assert_array_equal(
        load_volume(os.path.join(tmp_path, "vol.bin")).data, random_volume.data
    )


def test_truncated_payload(tmp_path, random_volume):
    path = os.path.join(tmp_path, "vol")
    save_volume(random_volume, path)
    payload = path + ".bin"
    with open(payload, "r+b") as fh:
        fh.truncate(os.path.getsize(payload) - 8)
    with pytest.raises(PayloadSizeError):
        load_volume(path)


def test_oversized_payload(tmp_path, random_volume):
    path = os.path.join(tmp_path, "vol")
    save_volume(random_volume, path)
    with open(path + ".bin", "ab") as fh:
        fh.write(b"\x00" * 4)
    with pytest.raises(PayloadSizeError):
        load_volume(path)


def test_missing_payload(tmp_path, random_volume):
    path = os.path.join(tmp_path, "vol")
    save_volume(random_volume, path)
    os.remove(path + ".bin")
    with pytest.raises(FileNotFoundError):
        load_volume(path)


def test_malformed_header(tmp_path):
    path = os.path.join(tmp_path, "vol")
    with open(path + ".json", "w") as fh:
        fh.write("{not json")
    open(path + ".bin", "wb").close()
    with pytest.raises(BadHeaderError):
        load_volume(path)


@pytest.mark.parametrize(
    "header",
    [
        {"dtype": "f32le", "order": "dhw"},
        {"shape": [1, 4, 4], "dtype": "f32le", "order": "dhw"},
        {"shape": [4, 4], "dtype": "f32le", "order": "dhw"},
        {"shape": [4, 4, 4], "dtype": "f64le", "order": "dhw"},
        {"shape": [4, 4, 4], "dtype": "f32le", "order": "whd"},
    ],
)
def test_header_rejections(tmp_path, header):
    path = os.path.join(tmp_path, "vol")
    with open(path + ".json", "w") as fh:
        json.dump(header, fh)
    open(path + ".bin", "wb").close()
    with pytest.raises(BadHeaderError):
        load_volume(path)


def test_nonfinite_payload_rejected(tmp_path):
    path = os.path.join(tmp_path, "vol")
    with open(path + ".json", "w") as fh:
        json.dump({"shape": [2, 2, 2], "dtype": "f32le", "order": "dhw"}, fh)
    data = np.full(8, np.inf, dtype="<f4")
    data.tofile(path + ".bin")
    with pytest.raises(NonFiniteError):
        load_volume(path)
