"""Filtered backprojection of per-slice evaluator outputs.

For each of L directions on the sphere, the engine extracts a stack of
M+2 slices, runs the evaluator along the stack, filters the resulting
profile with the second difference along the offset axis, and smears the
filtered profile back through the output cube:

    G(x) = (c_norm * |S^2| / L) * sum_l  q~(x . n_l, n_l)

Three modes share this skeleton.  The scalar mode backprojects one
filtered profile per direction.  The grid modes backproject a coarse 2D
grid per slice instead, either unfiltered (averaged heatmaps) or with
the second difference applied per grid cell (tomographic heatmaps); with
a 1x1 grid the tomographic mode degenerates to the scalar mode.

Work is split in two phases.  Phase 1 (extract + evaluate + filter) runs
per direction, in blocks sized to bound the profile tables held in
memory.  Phase 2 (accumulate) runs per output-voxel chunk; every chunk
sums its direction terms in direction-index order into a slice of the
output it alone owns, so results are bitwise reproducible for any
thread count.
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .evaluators import evaluate_batch  # noqa: F401  (re-export for callers)
from .filtering import (
    DERIVATIVE_MODES,
    PAPER_SCALE,
    derivative_scale,
    linear_profile,
    second_difference,
    second_difference_grid,
    trilinear_profile,
)
from .geometry import fibonacci_lattice, make_frame
from .slicing import stack_pixels
from .volume import Volume3

C_NORM_DEFAULT = -1.0 / (8.0 * np.pi**2)
SPHERE_AREA = 4.0 * np.pi

# one filtered-profile table block held in memory at a time, per run
_TABLE_BYTES_BUDGET = 256 << 20

Heatmap3 = Volume3

MODE_SCALAR = "tonno"
MODE_AVERAGED = "avgcam"
MODE_TOMOGRAPHIC = "tomocam"
RECON_MODES = (MODE_SCALAR, MODE_AVERAGED, MODE_TOMOGRAPHIC)


@dataclass(frozen=True)
class ReconConfig:
    """Knobs of a reconstruction run.

    direction_count defaults per mode when left None: 2000 for the
    scalar mode, 1000 for the grid modes.  out_shape None means "same
    as the input volume".
    """

    m_count: int = 100
    direction_count: int | None = None
    out_shape: tuple | None = None
    slice_shape: tuple = (224, 224)
    derivative: str = PAPER_SCALE
    c_norm: float = C_NORM_DEFAULT
    basis: str = "deterministic"
    seed: int = 0
    threads: int = 1
    chunk_voxels: int = 1 << 16

    def to_dict(self):
        return {
            "m_count": self.m_count,
            "direction_count": self.direction_count,
            "out_shape": list(self.out_shape) if self.out_shape else None,
            "slice_shape": list(self.slice_shape),
            "derivative": self.derivative,
            "c_norm": self.c_norm,
            "basis": self.basis,
            "seed": self.seed,
            "threads": self.threads,
            "chunk_voxels": self.chunk_voxels,
        }

    @staticmethod
    def from_dict(doc):
        cfg = ReconConfig()
        known = {
            "m_count": int,
            "direction_count": lambda x: None if x is None else int(x),
            "out_shape": lambda x: None if x is None else tuple(int(n) for n in x),
            "slice_shape": lambda x: tuple(int(n) for n in x),
            "derivative": str,
            "c_norm": float,
            "basis": str,
            "seed": int,
            "threads": int,
            "chunk_voxels": int,
        }
        fields = {}
        for key, value in doc.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            fields[key] = known[key](value)
        return replace(cfg, **fields)


def _as_volume_list(vol):
    vols = list(vol) if isinstance(vol, (list, tuple)) else [vol]
    if not vols:
        raise ValueError("need at least one input volume")
    for v in vols[1:]:
        if v.shape != vols[0].shape:
            raise ValueError(
                f"channel volumes disagree on shape: {v.shape} vs {vols[0].shape}"
            )
    return vols


def _validate(cfg, scalar_mode, in_shape):
    if cfg.m_count < 3:
        raise ValueError(f"slice count must be >= 3, got {cfg.m_count}")
    count = cfg.direction_count
    if count is None:
        count = 2000 if scalar_mode else 1000
    if count < 2:
        raise ValueError(f"direction count must be >= 2, got {count}")
    out_shape = cfg.out_shape or in_shape
    if len(out_shape) != 3 or min(out_shape) < 2:
        raise ValueError(f"output shape must be 3 axes, each >= 2, got {out_shape}")
    if cfg.derivative not in DERIVATIVE_MODES:
        derivative_scale(cfg.m_count, cfg.derivative)  # raises with the right message
    h_s, w_s = cfg.slice_shape
    if h_s < 2 or w_s < 2:
        raise ValueError(f"slice shape must be >= 2 per axis, got {cfg.slice_shape}")
    return count, tuple(out_shape)


def resolved_config(cfg, in_shape, mode):
    """cfg with direction_count and out_shape made explicit.

    This is what goes into a run manifest: re-running from the manifest
    must not depend on per-mode defaults staying the same.
    """
    count, out_shape = _validate(cfg, mode == MODE_SCALAR, in_shape)
    return replace(cfg, direction_count=count, out_shape=out_shape)


def _chunk_coords(out_shape, start, end):
    """Normalized coordinates of flat voxel indices [start, end)."""
    d, h, w = out_shape
    flat = np.arange(start, end, dtype=np.intp)
    i = flat // (h * w)
    j = (flat // w) % h
    k = flat % w
    coords = np.empty((end - start, 3), dtype=np.float64)
    coords[:, 0] = 2.0 * i / (d - 1) - 1.0
    coords[:, 1] = 2.0 * j / (h - 1) - 1.0
    coords[:, 2] = 2.0 * k / (w - 1) - 1.0
    return coords


def _measure_direction(vols, evaluator, frame, cfg, mode, lock):
    """Phase 1 for one direction: stack pixels, evaluate, filter."""
    h_s, w_s = cfg.slice_shape
    per_channel = [stack_pixels(v, frame, cfg.m_count, h_s, w_s) for v in vols]
    if len(per_channel) == 1:
        batch = per_channel[0]
    else:
        batch = np.stack(per_channel, axis=1)
    with lock:
        p = evaluator.evaluate(batch)
    if not np.all(np.isfinite(p)):
        raise FloatingPointError("evaluator produced non-finite values")
    if mode == MODE_SCALAR:
        return second_difference(p, cfg.derivative).values
    if mode == MODE_TOMOGRAPHIC:
        return second_difference_grid(p, cfg.derivative)
    return np.asarray(p, dtype=np.float64)[1:-1]


def inscribed_ball_mask(shape):
    """Boolean mask of voxels whose normalized coordinate has norm <= 1."""
    d, h, w = shape
    x = (2.0 * np.arange(d) / (d - 1) - 1.0)[:, None, None]
    y = (2.0 * np.arange(h) / (h - 1) - 1.0)[None, :, None]
    z = (2.0 * np.arange(w) / (w - 1) - 1.0)[None, None, :]
    return x * x + y * y + z * z <= 1.0


def selftest_metrics(heatmap, reference):
    """Affine calibration of a reconstruction against its source volume.

    Fits a*G + b to V by least squares over the inscribed ball (the
    region every slicing plane family covers equally), then reports the
    Pearson correlation of the calibrated heatmap with V and the RMSE
    of the residual relative to V's value range there.
    """
    if heatmap.shape != reference.shape:
        raise ValueError(
            f"heatmap shape {heatmap.shape} != reference shape {reference.shape}"
        )
    mask = inscribed_ball_mask(reference.shape)
    g = heatmap.data[mask].astype(np.float64)
    v = reference.data[mask].astype(np.float64)
    spread = float(v.max() - v.min())
    if spread == 0.0 or float(g.max() - g.min()) == 0.0:
        raise ValueError("degenerate input: constant volume or constant heatmap")
    a, b = np.polyfit(g, v, 1)
    fitted = a * g + b
    r = float(np.corrcoef(fitted, v)[0, 1])
    rel_rmse = float(np.sqrt(np.mean((fitted - v) ** 2))) / spread
    return {
        "a": float(a),
        "b": float(b),
        "pearson_r": r,
        "rel_rmse": rel_rmse,
        "voxels": int(mask.sum()),
    }


def _reconstruct(vol, evaluator, cfg, mode, progress=None):
    vols = _as_volume_list(vol)
    scalar_mode = mode == MODE_SCALAR
    if scalar_mode and evaluator.out != "scalar":
        raise ValueError("scalar reconstruction needs a scalar evaluator")
    if not scalar_mode and evaluator.out != "grid":
        raise ValueError(f"{mode} reconstruction needs a grid evaluator")

    count, out_shape = _validate(cfg, scalar_mode, vols[0].shape)
    dirs = fibonacci_lattice(count)
    frames = [
        make_frame(dirs[ell], policy=cfg.basis, seed=cfg.seed, index=ell)
        for ell in range(count)
    ]

    if scalar_mode:
        table_bytes = 8 * cfg.m_count
    else:
        gh, gw = evaluator.grid_shape
        table_bytes = 8 * cfg.m_count * gh * gw
    block = int(np.clip(_TABLE_BYTES_BUDGET // table_bytes, 1, count))

    total = int(np.prod(out_shape))
    chunk = max(1, min(cfg.chunk_voxels, total))
    spans = [(start, min(start + chunk, total)) for start in range(0, total, chunk)]

    acc = np.zeros(total, dtype=np.float64)
    lock = threading.Lock()
    pool = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        for block_start in range(0, count, block):
            block_frames = frames[block_start : block_start + block]

            def measure(frame):
                return _measure_direction(vols, evaluator, frame, cfg, mode, lock)

            if pool is None:
                tables = [measure(f) for f in block_frames]
            else:
                tables = list(pool.map(measure, block_frames))

            n_block = np.stack([f.n for f in block_frames])
            if not scalar_mode:
                u_block = np.stack([f.u for f in block_frames])
                v_block = np.stack([f.v for f in block_frames])

            def accumulate(span):
                start, end = span
                coords = _chunk_coords(out_shape, start, end)
                s_all = coords @ n_block.T
                out = acc[start:end]
                if scalar_mode:
                    for b, table in enumerate(tables):
                        out += linear_profile(table, s_all[:, b])
                else:
                    u_all = coords @ u_block.T
                    v_all = coords @ v_block.T
                    for b, table in enumerate(tables):
                        out += trilinear_profile(
                            table, s_all[:, b], u_all[:, b], v_all[:, b]
                        )

            if pool is None:
                for span in spans:
                    accumulate(span)
            else:
                list(pool.map(accumulate, spans))
            if progress is not None:
                progress(min(block_start + block, count), count)
    finally:
        if pool is not None:
            pool.shutdown()

    acc *= cfg.c_norm * SPHERE_AREA / count
    return Volume3.from_array(acc.reshape(out_shape).astype(np.float32))


def reconstruct_scalar(vol, evaluator, cfg=None):
    """Backproject scalar evaluator outputs into a heatmap volume.

    vol may be one Volume3 or a list of equal-shape volumes feeding a
    multi-channel external evaluator.  Returns a Heatmap3 shaped per
    cfg.out_shape (input shape by default).
    """
    return _reconstruct(vol, evaluator, cfg or ReconConfig(), MODE_SCALAR)


def reconstruct_averaged_cam(vol, evaluator, cfg=None):
    """Backproject per-slice grids without derivative filtering."""
    return _reconstruct(vol, evaluator, cfg or ReconConfig(), MODE_AVERAGED)


def reconstruct_tomographic_cam(vol, evaluator, cfg=None):
    """Backproject per-slice grids filtered cell-wise along the offset axis."""
    return _reconstruct(vol, evaluator, cfg or ReconConfig(), MODE_TOMOGRAPHIC)


def reconstruct(vol, evaluator, cfg=None, mode=MODE_SCALAR, progress=None):
    """Mode-dispatching entry point used by the command-line front end."""
    if mode not in RECON_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {RECON_MODES}")
    return _reconstruct(vol, evaluator, cfg or ReconConfig(), mode, progress=progress)
