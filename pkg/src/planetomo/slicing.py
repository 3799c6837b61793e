"""Oriented 2D slices and slice stacks of a volume.

A slice is the volume sampled on a plane offset s along a direction n,
rasterized over the in-plane vectors u, v.  Stacks cover the normalized
offset range with two extra guard slices just outside it, which is what
the second-difference filter needs.  Randomized stacks with geometry and
intensity jitter feed an external trainer.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .geometry import DirectionFrame, make_frame
from .volume import interpolate_many


@dataclass(frozen=True)
class Slice2:
    """One rasterized plane: (h_S, w_S) pixels plus its provenance."""

    data: np.ndarray
    s: float
    frame: DirectionFrame


@dataclass(frozen=True)
class SliceStack:
    """M+2 slices at offsets s_m = 2m/(M-1) - 1 for m in {-1, ..., M}."""

    slices: list
    offsets: np.ndarray
    frame: DirectionFrame

    @property
    def count(self):
        return len(self.slices)


def stack_offsets(m_count):
    """Offsets 2m/(M-1) - 1 for m in {-1, ..., M}; spacing 2/(M-1)."""
    if m_count < 3:
        raise ValueError(f"slice count must be >= 3, got {m_count}")
    m = np.arange(-1, m_count + 1, dtype=np.float64)
    return 2.0 * m / (m_count - 1) - 1.0


def _plane_points(s_values, frame, h_s, w_s, origin_shift=None):
    """Sample points s*n + i'*u + j'*v for a batch of offsets.

    i' = 2i/(h_S-1) - 1 runs over rows, j' likewise over columns.
    Returns an array of shape (len(s_values), h_S, w_S, 3).
    """
    if h_s < 2 or w_s < 2:
        raise ValueError(f"slice shape must be >= 2 per axis, got {(h_s, w_s)}")
    i = (2.0 * np.arange(h_s) / (h_s - 1) - 1.0)[:, None, None]
    j = (2.0 * np.arange(w_s) / (w_s - 1) - 1.0)[None, :, None]
    plane = i * frame.u[None, None, :] + j * frame.v[None, None, :]
    if origin_shift is not None:
        plane = plane + origin_shift[None, None, :]
    s_values = np.asarray(s_values, dtype=np.float64)
    return s_values[:, None, None, None] * frame.n[None, None, None, :] + plane[None]


def extract_slice(vol, s, frame, h_s, w_s):
    """Rasterize one plane of a volume.

    Parameters
    ----------
    vol : Volume3
    s : float
        Plane offset along the direction, in normalized units.
    frame : DirectionFrame
    h_s, w_s : int
        Output resolution, each >= 2.

    Returns
    -------
    Slice2 with float32 pixels; pixel (i, j) is the volume interpolated
    at s*n + i'*u + j'*v, zero where that point leaves the cube.
    """
    pts = _plane_points([s], frame, h_s, w_s)
    pixels = interpolate_many(vol, pts)[0].astype(np.float32)
    return Slice2(data=pixels, s=float(s), frame=frame)


def extract_stack(vol, frame, m_count, h_s, w_s):
    """Rasterize M+2 regularly spaced planes along one direction.

    Offsets run from -1 - 2/(M-1) to 1 + 2/(M-1); the first and last
    slice sit outside the offset range covered by the volume's inscribed
    cube and are often all-zero.

    Returns
    -------
    SliceStack of M+2 Slice2 in offset order.
    """
    offsets = stack_offsets(m_count)
    pts = _plane_points(offsets, frame, h_s, w_s)
    pixels = interpolate_many(vol, pts).astype(np.float32)
    slices = [
        Slice2(data=pixels[k], s=float(offsets[k]), frame=frame)
        for k in range(len(offsets))
    ]
    return SliceStack(slices=slices, offsets=offsets, frame=frame)


def stack_pixels(vol, frame, m_count, h_s, w_s):
    """extract_stack without the per-slice wrappers: (M+2, h_S, w_S) float64.

    The reconstruction loop calls this once per direction; keeping the
    result a single array avoids building thousands of small objects.
    """
    offsets = stack_offsets(m_count)
    return interpolate_many(vol, _plane_points(offsets, frame, h_s, w_s))


def _random_unit_vector(rng):
    while True:
        w = rng.normal(size=3)
        norm = np.linalg.norm(w)
        if norm > 1e-12:
            return w / norm


def sample_training_stacks(
    vol,
    stack_count,
    slices_per_stack,
    h_s=224,
    w_s=224,
    scale_range=(0.7, 1.3),
    translation_range=(-0.3, 0.3),
    intensity_range=(-0.3, 0.3),
    shear_range=(0.0, 0.0),
    seed=0,
):
    """Randomized slice stacks for feeding an external trainer.

    Each stack gets one direction drawn uniformly on the sphere and
    slices at offsets evenly spaced over [-1, 1].  Per slice: in-plane
    vectors perpendicular to the direction, rotated by a random angle,
    with lengths drawn independently from scale_range and the angle
    between them opened by a shear angle from shear_range; the plane
    origin is shifted by (du*u + dv*v) with du, dv from
    translation_range; pixel values are mapped y = (1 + a)*x + b with
    a, b from intensity_range.  Setting a range to (0, 0) disables that
    augmentation, so all-zero ranges reproduce plain extraction geometry.

    All random parameters are drawn sequentially from one generator
    before any pixels are touched, so output is deterministic for a
    given seed no matter how extraction is batched.

    Returns
    -------
    (slices, metadata) : list of Slice2 and a list of per-slice dicts
    recording everything needed to reproduce each slice.
    """
    if slices_per_stack < 2:
        raise ValueError(f"slices per stack must be >= 2, got {slices_per_stack}")
    lo, hi = scale_range
    if not (0.0 < lo <= hi):
        raise ValueError(f"scale range must lie in (0, inf), got {scale_range}")
    rng = np.random.default_rng(seed)
    offsets = 2.0 * np.arange(slices_per_stack) / (slices_per_stack - 1) - 1.0

    params = []
    for b in range(stack_count):
        n = _random_unit_vector(rng)
        base = make_frame(n)
        for m in range(slices_per_stack):
            phi = rng.uniform(0.0, 2.0 * np.pi)
            lu = rng.uniform(*scale_range)
            lv = rng.uniform(*scale_range)
            shear = rng.uniform(*shear_range)
            du = rng.uniform(*translation_range)
            dv = rng.uniform(*translation_range)
            a = rng.uniform(*intensity_range)
            bias = rng.uniform(*intensity_range)
            e1 = np.cos(phi) * base.u + np.sin(phi) * base.v
            e2 = -np.sin(phi) * base.u + np.cos(phi) * base.v
            u = lu * e1
            # shear opens the angle between u and v away from 90 degrees
            v = lv * (np.cos(shear) * e2 + np.sin(shear) * e1)
            params.append((b, m, float(offsets[m]), n, u, v, du, dv, a, bias))

    slices = []
    metadata = []
    for b, m, s, n, u, v, du, dv, a, bias in params:
        frame = DirectionFrame(n=n, u=u, v=v)
        shift = du * u + dv * v
        pts = _plane_points([s], frame, h_s, w_s, origin_shift=shift)
        pixels = interpolate_many(vol, pts)[0]
        pixels = ((1.0 + a) * pixels + bias).astype(np.float32)
        slices.append(Slice2(data=pixels, s=s, frame=frame))
        metadata.append(
            {
                "stack": b,
                "slice": m,
                "s": s,
                "n": [float(c) for c in n],
                "u": [float(c) for c in u],
                "v": [float(c) for c in v],
                "translation": [du, dv],
                "intensity": [a, bias],
            }
        )
    return slices, metadata


def save_training_slices(slices, metadata, path):
    """Write slices as ``<stem>.bin`` (count*h*w f32le) + ``<stem>.json``.

    The JSON carries the tensor shape and the per-slice metadata array,
    which is all an external trainer needs to consume the export.
    """
    stem, ext = os.path.splitext(path)
    if ext not in ("", ".json", ".bin"):
        stem = path
    h_s, w_s = slices[0].data.shape
    block = np.stack([sl.data for sl in slices]).astype("<f4")
    block.tofile(stem + ".bin")
    doc = {
        "shape": [len(slices), h_s, w_s],
        "dtype": "f32le",
        "slices": metadata,
    }
    with open(stem + ".json", "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
