"""Second-derivative filtering along the offset axis, and profile sampling.

A stack of M+2 evaluator outputs p_m, m in {-1, ..., M}, becomes M
filtered values q_m, m in {0, ..., M-1}, via the central second
difference; the two guard slices exist precisely so no one-sided stencil
is ever needed.  Two scalings are provided:

- "paper" divides the stencil by 1/(M-1), i.e. multiplies by (M-1);
- "true" divides by the squared sample spacing h^2 = (2/(M-1))^2, which
  is the consistent estimator of the second derivative on [-1, 1].

The two differ by the exact global factor 4/(M-1), so any scale-free
downstream quantity (argmax, thresholded masks, correlations) is
identical between them.  "paper" is the default.

Profiles are sampled back as functions of the offset s (and, for grid
profiles, the in-plane coordinates) by linear interpolation with value
q_0 at s=-1, q_{M-1} at s=1, and zero outside [-1, 1].
"""

from dataclasses import dataclass

import numpy as np

PAPER_SCALE = "paper"
TRUE_SECOND_DERIVATIVE = "true"
DERIVATIVE_MODES = (PAPER_SCALE, TRUE_SECOND_DERIVATIVE)


@dataclass(frozen=True)
class FilteredProfile:
    """M filtered values plus their offsets s_m = 2m/(M-1) - 1."""

    values: np.ndarray
    offsets: np.ndarray


def derivative_scale(m_count, mode):
    """Multiplier applied to the raw stencil p_{m+1} + p_{m-1} - 2 p_m."""
    if mode == PAPER_SCALE:
        return float(m_count - 1)
    if mode == TRUE_SECOND_DERIVATIVE:
        return (m_count - 1) ** 2 / 4.0
    raise ValueError(f"unknown derivative mode {mode!r}; expected one of {DERIVATIVE_MODES}")


def _stencil(p, mode):
    p = np.asarray(p, dtype=np.float64)
    m_count = p.shape[0] - 2
    if m_count < 3:
        raise ValueError(f"need at least 5 samples (M >= 3), got {p.shape[0]}")
    return (p[2:] + p[:-2] - 2.0 * p[1:-1]) * derivative_scale(m_count, mode)


def central_offsets(m_count):
    """Offsets of the M filtered samples: 2m/(M-1) - 1, m in {0, ..., M-1}."""
    return 2.0 * np.arange(m_count, dtype=np.float64) / (m_count - 1) - 1.0


def second_difference(p, mode=PAPER_SCALE):
    """Filter a length-(M+2) scalar profile down to M values.

    Parameters
    ----------
    p : sequence of length M+2
        Evaluator outputs ordered by m in {-1, ..., M}.
    mode : "paper" or "true"

    Returns
    -------
    FilteredProfile with M values; exact for quadratics in "true" mode
    and linear in p in both modes.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError(f"expected a 1D profile, got shape {p.shape}")
    q = _stencil(p, mode)
    return FilteredProfile(values=q, offsets=central_offsets(len(q)))


def second_difference_grid(p, mode=PAPER_SCALE):
    """Filter an (M+2, gh, gw) tensor along m, one stencil per grid cell.

    Returns an (M, gh, gw) tensor; each (a, b) column equals the scalar
    filter applied to that column.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 3:
        raise ValueError(f"expected an (M+2, gh, gw) tensor, got shape {p.shape}")
    return _stencil(p, mode)


def linear_profile(values, s):
    """Sample a length-M profile at offsets s, zero outside [-1, 1].

    Endpoints map exactly: s=-1 gives values[0], s=1 gives values[-1].
    Vectorized over s; accumulates in float64.
    """
    values = np.asarray(values, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    m_count = len(values)
    a = (s + 1.0) * (m_count - 1) / 2.0
    inside = np.abs(s) <= 1.0
    i0 = np.clip(np.floor(a).astype(np.intp), 0, m_count - 2)
    f = a - i0
    out = values[i0] * (1.0 - f) + values[i0 + 1] * f
    return np.where(inside, out, 0.0)


def trilinear_profile(values, s, u, v):
    """Sample an (M, gh, gw) profile tensor at (s, u, v), zero outside.

    The offset s interpolates along m as in linear_profile.  In-plane
    coordinates map to fractional grid indices a' = (u+1)(gh-1)/2 and
    b' = (v+1)(gw-1)/2; samples whose index falls outside [0, gh-1] (or
    [0, gw-1]) are zero.  A single-cell axis maps every coordinate to
    index 0, so a (M, 1, 1) tensor reproduces the scalar profile for
    any in-plane position.
    """
    values = np.asarray(values, dtype=np.float64)
    m_count, gh, gw = values.shape
    s = np.asarray(s, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)

    a_m = (s + 1.0) * (m_count - 1) / 2.0
    a_u = (u + 1.0) * (gh - 1) / 2.0
    a_v = (v + 1.0) * (gw - 1) / 2.0
    inside = (
        (np.abs(s) <= 1.0)
        & (a_u >= 0.0)
        & (a_u <= gh - 1)
        & (a_v >= 0.0)
        & (a_v <= gw - 1)
    )

    m0 = np.clip(np.floor(a_m).astype(np.intp), 0, m_count - 2)
    u0 = np.clip(np.floor(a_u).astype(np.intp), 0, max(gh - 2, 0))
    v0 = np.clip(np.floor(a_v).astype(np.intp), 0, max(gw - 2, 0))
    m1 = m0 + 1
    u1 = np.minimum(u0 + 1, gh - 1)
    v1 = np.minimum(v0 + 1, gw - 1)
    fm = a_m - m0
    fu = a_u - u0
    fv = a_v - v0
    em, eu, ev = 1.0 - fm, 1.0 - fu, 1.0 - fv

    out = (
        values[m0, u0, v0] * em * eu * ev
        + values[m0, u0, v1] * em * eu * fv
        + values[m0, u1, v0] * em * fu * ev
        + values[m0, u1, v1] * em * fu * fv
        + values[m1, u0, v0] * fm * eu * ev
        + values[m1, u0, v1] * fm * eu * fv
        + values[m1, u1, v0] * fm * fu * ev
        + values[m1, u1, v1] * fm * fu * fv
    )
    return np.where(inside, out, 0.0)


def interp_profile(profile, s):
    """Scalar convenience wrapper over linear_profile."""
    return float(linear_profile(profile.values, np.float64(s)))
