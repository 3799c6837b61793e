"""Sphere sampling and slice-plane frames.

Directions are unit vectors in R^3; a frame attaches two in-plane vectors
u, v to a direction n so that a plane offset s along n can be rasterized.
All coordinates live in the normalized cube [-1, 1]^3.
"""

from dataclasses import dataclass

import numpy as np

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))

# Reference axes for the deterministic frame policy.  The second axis is
# used when the direction is nearly parallel to the first.
_REF_PRIMARY = np.array([1.0, 0.0, 0.0])
_REF_FALLBACK = np.array([0.0, 1.0, 0.0])
_REF_ALIGNMENT_LIMIT = 0.9


@dataclass(frozen=True)
class DirectionFrame:
    """A plane normal with its two in-plane vectors.

    For reconstruction the frame is orthonormal (u, v unit length and
    perpendicular).  Training-time frames may carry scaled or sheared
    u, v; only orthogonality to n is guaranteed there.
    """

    n: np.ndarray
    u: np.ndarray
    v: np.ndarray


def fibonacci_lattice(count):
    """Evenly distributed unit directions from the Fibonacci lattice.

    For l in [0, count): y = 2*l/(count-1) - 1, r = sqrt(1 - y^2),
    theta = l * golden angle, direction = (r*cos(theta), y, r*sin(theta)).
    The first and last directions are the poles (0, -1, 0) and (0, 1, 0).

    Parameters
    ----------
    count : int
        Number of directions, at least 2 (the formula divides by count-1).

    Returns
    -------
    ndarray of shape (count, 3), float64, each row unit length.
    """
    if count < 2:
        raise ValueError(f"direction count must be >= 2, got {count}")
    ell = np.arange(count, dtype=np.float64)
    y = 2.0 * ell / (count - 1) - 1.0
    r = np.sqrt(np.maximum(0.0, 1.0 - y * y))
    theta = ell * GOLDEN_ANGLE
    out = np.empty((count, 3), dtype=np.float64)
    out[:, 0] = r * np.cos(theta)
    out[:, 1] = y
    out[:, 2] = r * np.sin(theta)
    return out


def index_to_normalized(i, extent):
    """Map voxel index i in [0, extent) to the range [-1, 1]."""
    if extent < 2:
        raise ValueError(f"axis extent must be >= 2, got {extent}")
    return 2.0 * i / (extent - 1) - 1.0


def frames_for_directions(directions, policy="deterministic", seed=0, start_index=0):
    """In-plane bases for a batch of unit directions, one per row.

    policy "deterministic" takes u from Gram-Schmidt of a fixed reference
    axis against n (with a fallback axis when n is nearly parallel to
    the reference), so repeated runs are bitwise reproducible.  policy
    "random" rotates the deterministic u by an angle drawn from a
    generator keyed by (seed, start_index + row), so a frame depends
    only on its key, never on how directions are batched.  In both
    policies v = n x u.

    Returns
    -------
    (u, v) : pair of ndarrays shaped like directions.
    """
    dirs = np.asarray(directions, dtype=np.float64)
    ref = np.where(
        np.abs(dirs @ _REF_PRIMARY)[:, None] > _REF_ALIGNMENT_LIMIT,
        _REF_FALLBACK,
        _REF_PRIMARY,
    )
    u = ref - (np.einsum("ij,ij->i", ref, dirs))[:, None] * dirs
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    if policy == "random":
        w = np.cross(dirs, u)
        phi = np.array(
            [
                np.random.default_rng((int(seed), start_index + i)).uniform(
                    0.0, 2.0 * np.pi
                )
                for i in range(len(dirs))
            ]
        )
        u = np.cos(phi)[:, None] * u + np.sin(phi)[:, None] * w
    elif policy != "deterministic":
        raise ValueError(f"unknown basis policy {policy!r}")
    v = np.cross(dirs, u)
    return u, v


def make_frame(n, policy="deterministic", seed=0, index=0):
    """Build an orthonormal frame (n, u, v) for one unit direction.

    Thin wrapper over frames_for_directions with a single-row batch, so
    the scalar and batched paths are one code path and agree bitwise.
    """
    n = np.asarray(n, dtype=np.float64)
    u, v = frames_for_directions(n[None, :], policy=policy, seed=seed, start_index=index)
    return DirectionFrame(n=n, u=u[0], v=v[0])
