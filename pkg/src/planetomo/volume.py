"""3D scalar fields on the normalized cube, with trilinear sampling and raw I/O.

A volume of shape (d, h, w) is identified with the cube [-1, 1]^3: voxel
index i on an axis of extent N sits at normalized coordinate 2i/(N-1) - 1,
so the first and last voxels lie exactly on the faces.  Sampling outside
the closed cube returns zero; points on the boundary interpolate.

Files are a JSON header next to a flat little-endian float32 payload:
``<stem>.json`` holding {"shape":[d,h,w],"dtype":"f32le","order":"dhw"}
and ``<stem>.bin`` holding d*h*w floats, row-major, w fastest.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

DTYPE_TAG = "f32le"
ORDER_TAG = "dhw"


class VolumeFormatError(ValueError):
    """Base class for volume file problems."""


class BadHeaderError(VolumeFormatError):
    """Header is not valid JSON or promises an unsupported layout."""


class PayloadSizeError(VolumeFormatError):
    """Payload length does not match the shape in the header."""


class NonFiniteError(VolumeFormatError):
    """Payload contains NaN or Inf."""


@dataclass(frozen=True)
class Volume3:
    """An immutable (d, h, w) float32 scalar field, each axis >= 2."""

    data: np.ndarray

    @property
    def shape(self):
        return self.data.shape

    @staticmethod
    def from_array(arr):
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if arr.ndim != 3:
            raise ValueError(f"expected a 3D array, got shape {arr.shape}")
        if min(arr.shape) < 2:
            raise ValueError(f"every axis must be >= 2, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("volume contains NaN or Inf")
        arr.flags.writeable = False
        return Volume3(data=arr)


def interpolate_many(vol, points):
    """Trilinear samples of a volume at normalized coordinates.

    Coordinate component k indexes array axis k, so (-1, -1, -1) is voxel
    (0, 0, 0) and (1, 1, 1) is voxel (d-1, h-1, w-1).  Points with any
    component outside [-1, 1] contribute zero; the boundary itself is
    inside.  Blending runs in float64 regardless of storage precision.

    Parameters
    ----------
    vol : Volume3
    points : ndarray of shape (..., 3)
        Normalized coordinates; any finite values accepted.

    Returns
    -------
    ndarray of shape points.shape[:-1], float64.
    """
    pts = np.asarray(points, dtype=np.float64)
    lead = pts.shape[:-1]
    pts = pts.reshape(-1, 3)
    inside = np.all(np.abs(pts) <= 1.0, axis=1)
    out = np.zeros(len(pts), dtype=np.float64)
    if inside.any():
        out[inside] = _blend(vol.data, pts[inside])
    return out.reshape(lead)


def _blend(data, pts):
    # pts are guaranteed inside the closed cube here
    d, h, w = data.shape
    shape = np.array([d, h, w], dtype=np.float64)
    a = (pts + 1.0) * (shape - 1.0) / 2.0
    # clamp the base cell so a coordinate exactly on the upper face lands
    # in the last cell with fractional part 1
    i0 = np.clip(np.floor(a).astype(np.intp), 0, np.array([d - 2, h - 2, w - 2]))
    f = a - i0
    fd, fh, fw = f[:, 0], f[:, 1], f[:, 2]
    flat = data.ravel()
    base = (i0[:, 0] * h + i0[:, 1]) * w + i0[:, 2]
    hw = h * w
    # lerp along w, then h, then d; float32 corners upcast against the
    # float64 fractions, so blending runs in float64
    c00 = flat[base] * (1.0 - fw) + flat[base + 1] * fw
    c01 = flat[base + w] * (1.0 - fw) + flat[base + w + 1] * fw
    c10 = flat[base + hw] * (1.0 - fw) + flat[base + hw + 1] * fw
    c11 = flat[base + hw + w] * (1.0 - fw) + flat[base + hw + w + 1] * fw
    c0 = c00 * (1.0 - fh) + c01 * fh
    c1 = c10 * (1.0 - fh) + c11 * fh
    return c0 * (1.0 - fd) + c1 * fd


def interpolate(vol, x):
    """Trilinear sample at a single normalized coordinate; 0 outside the cube."""
    return float(interpolate_many(vol, np.asarray(x, dtype=np.float64)[None, :])[0])


def _paths(path):
    stem, ext = os.path.splitext(path)
    if ext not in ("", ".json", ".bin"):
        stem = path
    return stem + ".json", stem + ".bin"


def save_volume(vol, path):
    """Write ``<stem>.json`` + ``<stem>.bin``; path may carry either suffix."""
    header_path, payload_path = _paths(path)
    d, h, w = vol.shape
    header = {"shape": [int(d), int(h), int(w)], "dtype": DTYPE_TAG, "order": ORDER_TAG}
    with open(header_path, "w") as fh:
        json.dump(header, fh)
        fh.write("\n")
    vol.data.astype("<f4").tofile(payload_path)


def load_volume(path):
    """Read a volume written by save_volume; round-trips bitwise."""
    header_path, payload_path = _paths(path)
    with open(header_path) as fh:
        try:
            header = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BadHeaderError(f"{header_path}: not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or "shape" not in header:
        raise BadHeaderError(f"{header_path}: missing shape")
    if header.get("dtype") != DTYPE_TAG:
        raise BadHeaderError(f"{header_path}: unsupported dtype {header.get('dtype')!r}")
    if header.get("order") != ORDER_TAG:
        raise BadHeaderError(f"{header_path}: unsupported order {header.get('order')!r}")
    shape = header["shape"]
    if (
        not isinstance(shape, list)
        or len(shape) != 3
        or not all(isinstance(n, int) and n >= 2 for n in shape)
    ):
        raise BadHeaderError(f"{header_path}: bad shape {shape!r} (three ints, each >= 2)")
    d, h, w = shape
    expected = 4 * d * h * w
    actual = os.path.getsize(payload_path)
    if actual != expected:
        raise PayloadSizeError(
            f"{payload_path}: {actual} bytes, header promises {expected}"
        )
    data = np.fromfile(payload_path, dtype="<f4").reshape(d, h, w)
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{payload_path}: payload contains NaN or Inf")
    return Volume3.from_array(data)
