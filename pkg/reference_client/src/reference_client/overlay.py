"""Signed heatmap overlays on grayscale volume slices.

Volumes and heatmaps arrive in the engine's file format, a JSON header
(``{"shape": [d, h, w], "dtype": "f32le", "order": "dhw"}``) next to a
flat little-endian float32 payload.  The reader here is an independent
consumer-side implementation of that contract.

The rendering convention: the volume slice in grayscale underneath, the
heatmap on top with opacity proportional to magnitude, red where it is
positive and blue where it is negative.  A zero heatmap therefore
renders as the pure grayscale slice.
"""

import json
import os

import matplotlib

matplotlib.use("Agg")
from matplotlib import image as mpimg
import numpy as np

DTYPE_TAG = "f32le"
ORDER_TAG = "dhw"


def _paths(path):
    stem, ext = os.path.splitext(path)
    if ext not in ("", ".json", ".bin"):
        stem = path
    return stem + ".json", stem + ".bin"


def load_volume(path):
    """Read a ``<stem>.json`` + ``<stem>.bin`` pair into a (d, h, w) array.

    Raises
    ------
    ValueError
        If the header disagrees with the format or the payload length
        disagrees with the header.
    """
    header_path, payload_path = _paths(path)
    with open(header_path) as fh:
        try:
            header = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{header_path}: not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise ValueError(f"{header_path}: header is not an object")
    if header.get("dtype") != DTYPE_TAG:
        raise ValueError(f"{header_path}: unsupported dtype {header.get('dtype')!r}")
    if header.get("order") != ORDER_TAG:
        raise ValueError(f"{header_path}: unsupported order {header.get('order')!r}")
    shape = header.get("shape")
    if (
        not isinstance(shape, list)
        or len(shape) != 3
        or not all(isinstance(n, int) and n >= 1 for n in shape)
    ):
        raise ValueError(f"{header_path}: bad shape {shape!r}")
    data = np.fromfile(payload_path, dtype="<f4")
    expected = shape[0] * shape[1] * shape[2]
    if data.size != expected:
        raise ValueError(
            f"{payload_path}: {data.size} values, header promises {expected}"
        )
    return data.reshape(shape)


def render_overlay(base, heat):
    """Composite a signed heatmap over a grayscale base image.

    Parameters
    ----------
    base : (h, w) ndarray
        The underlying slice; normalized to its own value range.
    heat : (h, w) ndarray
        Signed overlay values.  Opacity is |heat| / max|heat|, color is
        red for positive and blue for negative.

    Returns
    -------
    (h, w, 3) float64 ndarray
        RGB in [0, 1].  Where the heatmap is zero all three channels
        equal the grayscale value exactly.
    """
    base = np.asarray(base, dtype=np.float64)
    heat = np.asarray(heat, dtype=np.float64)
    if base.shape != heat.shape:
        raise ValueError(f"base shape {base.shape} != heatmap shape {heat.shape}")
    spread = float(base.max() - base.min()) if base.size else 0.0
    gray = (base - base.min()) / spread if spread > 0.0 else np.zeros_like(base)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    vmax = float(np.abs(heat).max()) if heat.size else 0.0
    if vmax == 0.0:
        return rgb
    alpha = np.abs(heat) / vmax
    color = np.zeros_like(rgb)
    color[:, :, 0] = heat > 0.0
    color[:, :, 2] = heat < 0.0
    return (1.0 - alpha[:, :, None]) * rgb + alpha[:, :, None] * color


def plot_overlay(volume_path, heatmap_path, axis, index, out_path):
    """Render one slice of a heatmap over its source volume.

    Loads both files, cuts the slice ``index`` along ``axis`` from each,
    composites them with `render_overlay`, and writes a raster image to
    ``out_path`` (format chosen by extension).

    Raises
    ------
    ValueError
        If the shapes differ or the axis is not 0, 1, or 2.
    IndexError
        If the slice index is outside the volume.
    """
    volume = load_volume(volume_path)
    heat = load_volume(heatmap_path)
    if volume.shape != heat.shape:
        raise ValueError(
            f"volume shape {volume.shape} != heatmap shape {heat.shape}"
        )
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1, or 2, got {axis!r}")
    if not 0 <= index < volume.shape[axis]:
        raise IndexError(
            f"slice {index} outside axis {axis} of extent {volume.shape[axis]}"
        )
    rgb = render_overlay(
        np.take(volume, index, axis=axis), np.take(heat, index, axis=axis)
    )
    mpimg.imsave(out_path, rgb, vmin=0.0, vmax=1.0)
    return out_path
