"""Synthetic volumes for self-tests and demos.

Shapes get a smooth edge band (a cubic ramp over +/- edge in normalized
units) rather than a hard cutoff: a band-limited phantom is representable
at modest grid resolutions, so reconstruction error measures the method
instead of voxelization aliasing.
"""

import numpy as np

from .volume import Volume3

DEFAULT_EDGE = 0.06


def normalized_axes(shape):
    """Broadcastable normalized coordinates (one array per axis)."""
    d, h, w = shape
    x = (2.0 * np.arange(d) / (d - 1) - 1.0)[:, None, None]
    y = (2.0 * np.arange(h) / (h - 1) - 1.0)[None, :, None]
    z = (2.0 * np.arange(w) / (w - 1) - 1.0)[None, None, :]
    return x, y, z


def _soft_shell(rho, edge):
    # 1 inside (rho < 1-edge), 0 outside (rho > 1+edge), cubic ramp between
    t = np.clip((rho - (1.0 - edge)) / (2.0 * edge), 0.0, 1.0)
    return 1.0 - t * t * (3.0 - 2.0 * t)


def ellipsoids(shape, parts, edge=DEFAULT_EDGE):
    """Sum of soft-edged ellipsoids.

    parts: iterable of (center, radii, amplitude) with center and radii
    as 3-vectors in normalized units.
    """
    x, y, z = normalized_axes(shape)
    field = np.zeros(shape, dtype=np.float64)
    for center, radii, amplitude in parts:
        cx, cy, cz = center
        rx, ry, rz = radii
        rho = np.sqrt(
            ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 + ((z - cz) / rz) ** 2
        )
        field += amplitude * _soft_shell(rho, edge)
    return Volume3.from_array(field)


def ball(shape, center=(0.0, 0.0, 0.0), radius=0.5, amplitude=1.0, edge=DEFAULT_EDGE):
    """A single soft-edged ball."""
    return ellipsoids(shape, [(center, (radius, radius, radius), amplitude)], edge)


def two_ellipsoids(shape=(64, 64, 64)):
    """The standard self-test phantom: one large and one small ellipsoid."""
    parts = [
        ((-0.10, 0.05, 0.00), (0.55, 0.40, 0.45), 1.0),
        ((0.35, -0.30, 0.20), (0.18, 0.25, 0.20), 0.6),
    ]
    return ellipsoids(shape, parts)


def one_hot(shape, index=None):
    """All zeros except a single voxel (the center by default)."""
    field = np.zeros(shape, dtype=np.float32)
    if index is None:
        index = tuple(n // 2 for n in shape)
    field[tuple(index)] = 1.0
    return Volume3.from_array(field)
