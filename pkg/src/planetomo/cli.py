"""Command-line front end.

Subcommands wire the library into complete workflows: reconstruct a
heatmap from a volume, self-test the pipeline on a phantom, binarize a
heatmap, run the cross-validated segmentation evaluation, and export
randomized training slices.  Every reconstruction writes a JSON manifest
next to its output with the fully resolved configuration, so the run can
be reproduced from the manifest alone.

Errors are reported as one JSON object on stderr; missing input files
exit with status 2, other failures with 1.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import phantoms
from .backprojection import (
    C_NORM_DEFAULT,
    RECON_MODES,
    ReconConfig,
    reconstruct,
    resolved_config,
    selftest_metrics,
)
from .evaluators import ExternalEvaluatorError, evaluator_from_spec
from .postprocess import (
    LabeledSample,
    SENSITIVITY_WEIGHT,
    TAU_PRIME_CANDIDATES,
    binarize,
    connected_components,
    monte_carlo_eval,
)
from .slicing import sample_training_stacks, save_training_slices
from .volume import Volume3, VolumeFormatError, load_volume, save_volume


def _fail(code, kind, message):
    print(json.dumps({"error": message, "kind": kind}), file=sys.stderr)
    raise SystemExit(code)


def _write_json(doc, path):
    if path is None or path == "-":
        json.dump(doc, sys.stdout, indent=1)
        sys.stdout.write("\n")
    else:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")


def _manifest_path(output):
    stem, ext = os.path.splitext(output)
    if ext not in ("", ".json", ".bin"):
        stem = output
    return stem + ".manifest.json"


def _add_recon_flags(sub, m_default=100, l_default=None, derivative_default="paper"):
    sub.add_argument("--M", dest="m_count", type=int, default=m_default,
                     help=f"slices per direction (default {m_default})")
    sub.add_argument("--L", dest="direction_count", type=int, default=l_default,
                     help="direction count (default 2000 scalar / 1000 grid modes)")
    sub.add_argument("--slice-size", nargs=2, type=int, default=[224, 224],
                     metavar=("H", "W"), help="slice resolution (default 224 224)")
    sub.add_argument("--derivative", choices=["paper", "true"],
                     default=derivative_default,
                     help=f"second-difference scaling (default {derivative_default})")
    sub.add_argument("--c-norm", type=float, default=C_NORM_DEFAULT,
                     help="backprojection constant (default -1/(8*pi^2))")
    sub.add_argument("--basis", choices=["deterministic", "random"],
                     default="deterministic", help="in-plane frame policy")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=1)


def _config_from_args(args, out_shape=None):
    return ReconConfig(
        m_count=args.m_count,
        direction_count=args.direction_count,
        out_shape=out_shape,
        slice_shape=tuple(args.slice_size),
        derivative=args.derivative,
        c_norm=args.c_norm,
        basis=args.basis,
        seed=args.seed,
        threads=args.threads,
    )


def _progress_printer(label):
    def report(done, total):
        print(f"{label}: {done}/{total} directions", file=sys.stderr)

    return report


def cmd_reconstruct(args):
    vols = [load_volume(args.input)] + [load_volume(p) for p in args.channel]
    out_shape = tuple(args.out_shape) if args.out_shape else None
    cfg = _config_from_args(args, out_shape)
    evaluator = evaluator_from_spec(
        args.evaluator,
        args.slice_size[0],
        args.slice_size[1],
        channels=len(vols),
        timeout=args.timeout,
    )
    try:
        progress = None if args.quiet else _progress_printer(args.mode)
        heatmap = reconstruct(
            vols if len(vols) > 1 else vols[0],
            evaluator,
            cfg,
            mode=args.mode,
            progress=progress,
        )
    finally:
        evaluator.close()
    save_volume(heatmap, args.output)
    manifest = {
        "command": "reconstruct",
        "mode": args.mode,
        "evaluator": args.evaluator,
        "inputs": [args.input] + list(args.channel),
        "output": args.output,
        "config": resolved_config(cfg, vols[0].shape, args.mode).to_dict(),
    }
    _write_json(manifest, _manifest_path(args.output))
    return 0


def _make_phantom(kind, size):
    shape = (size, size, size)
    if kind == "ellipsoids":
        return phantoms.two_ellipsoids(shape)
    if kind == "ball":
        return phantoms.ball(shape)
    if kind == "onehot":
        return phantoms.one_hot(shape)
    raise ValueError(f"unknown phantom {kind!r}")


def cmd_selftest(args):
    if args.volume:
        vol = load_volume(args.volume)
    else:
        vol = _make_phantom(args.phantom, args.size)
    cfg = _config_from_args(args)
    started = time.monotonic()
    evaluator = evaluator_from_spec("sum", *args.slice_size)
    heatmap = reconstruct(vol, evaluator, cfg, mode="tonno")
    elapsed = time.monotonic() - started
    report = selftest_metrics(heatmap, vol)
    report["seconds"] = round(elapsed, 3)
    report["passed"] = bool(
        report["pearson_r"] >= args.min_r and report["rel_rmse"] <= args.max_rmse
    )
    if args.save_heatmap:
        save_volume(heatmap, args.save_heatmap)
    _write_json(report, None)
    return 0 if report["passed"] else 1


def cmd_binarize(args):
    heat = load_volume(args.heatmap)
    mask = binarize(heat.data, args.tau, args.tau_prime, args.connectivity)
    save_volume(Volume3.from_array(mask.astype(np.float32)), args.output)
    comps = connected_components(mask, args.connectivity, heat.data)
    _write_json(
        {
            "predicted": bool(float(heat.data.max()) >= args.tau),
            "components": len(comps),
            "voxels": int(mask.sum()),
        },
        None,
    )
    return 0


def _load_dataset(path):
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or not isinstance(doc.get("samples"), list):
        raise ValueError(f"{path}: expected an object with a 'samples' list")
    base = os.path.dirname(os.path.abspath(path))
    samples = []
    for k, entry in enumerate(doc["samples"]):
        if "heatmap" not in entry or "label" not in entry:
            raise ValueError(f"{path}: sample {k} needs 'heatmap' and 'label'")
        heat = load_volume(os.path.join(base, entry["heatmap"]))
        mask = None
        if entry.get("mask"):
            mask = load_volume(os.path.join(base, entry["mask"])).data > 0.5
        box = None
        if entry.get("box"):
            lo, hi = entry["box"]
            box = (tuple(int(x) for x in lo), tuple(int(x) for x in hi))
        samples.append(
            LabeledSample(
                heatmap=heat.data, label=int(entry["label"]), mask=mask, box=box
            )
        )
    return samples


def cmd_evaluate(args):
    samples = _load_dataset(args.dataset)
    report = monte_carlo_eval(
        samples,
        folds=args.folds,
        calibration_masks=args.calibration_masks,
        seed=args.seed,
        connectivity=args.connectivity,
        candidate_count=args.candidates,
        weight=args.weight,
    )
    _write_json(report, args.output)
    return 0


def cmd_sample_slices(args):
    labels = None
    if args.labels:
        labels = [int(x) for x in args.labels.split(",")]
        if len(labels) != len(args.volumes):
            raise ValueError(
                f"{len(labels)} labels for {len(args.volumes)} volumes"
            )
    all_slices = []
    all_meta = []
    for k, path in enumerate(args.volumes):
        vol = load_volume(path)
        slices, meta = sample_training_stacks(
            vol,
            stack_count=1,
            slices_per_stack=args.per_volume,
            h_s=args.size,
            w_s=args.size,
            scale_range=(1.0 - args.scale, 1.0 + args.scale),
            translation_range=(-args.translate, args.translate),
            intensity_range=(-args.intensity, args.intensity),
            shear_range=(-args.shear, args.shear),
            seed=(args.seed, k),
        )
        for entry in meta:
            entry["stack"] = k
            entry["volume"] = path
            if labels is not None:
                entry["label"] = labels[k]
        all_slices.extend(slices)
        all_meta.extend(meta)
    save_training_slices(all_slices, all_meta, args.out)
    print(f"wrote {len(all_slices)} slices to {args.out}.bin", file=sys.stderr)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="planetomo",
        description="Tomographic heatmaps from per-slice evaluator outputs.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    rec = subs.add_parser("reconstruct", help="backproject a volume into a heatmap")
    rec.add_argument("input", help="input volume (<stem>.json/.bin pair)")
    rec.add_argument("output", help="output heatmap path")
    rec.add_argument("--mode", choices=list(RECON_MODES), default="tonno")
    rec.add_argument("--evaluator", default="sum",
                     help="sum | pooled:GHxGW | external:CMD | external-grid:GHxGW:CMD")
    rec.add_argument("--channel", action="append", default=[],
                     help="additional channel volume for multi-channel evaluators")
    rec.add_argument("--out-shape", nargs=3, type=int, default=None,
                     metavar=("D", "H", "W"))
    rec.add_argument("--timeout", type=float, default=120.0,
                     help="external evaluator response timeout in seconds")
    rec.add_argument("--quiet", action="store_true", help="no progress lines")
    _add_recon_flags(rec)
    rec.set_defaults(func=cmd_reconstruct)

    st = subs.add_parser("selftest", help="reconstruct a phantom and check G vs V")
    st.add_argument("--phantom", choices=["ellipsoids", "ball", "onehot"],
                    default="ellipsoids")
    st.add_argument("--size", type=int, default=64)
    st.add_argument("--volume", default=None, help="use this volume instead of a phantom")
    st.add_argument("--min-r", type=float, default=0.95)
    st.add_argument("--max-rmse", type=float, default=0.15)
    st.add_argument("--save-heatmap", default=None)
    _add_recon_flags(st, m_default=64, l_default=500, derivative_default="true")
    st.set_defaults(func=cmd_selftest)

    bz = subs.add_parser("binarize", help="two-threshold binarization of a heatmap")
    bz.add_argument("heatmap")
    bz.add_argument("output")
    bz.add_argument("--tau", type=float, required=True)
    bz.add_argument("--tau-prime", type=float, required=True)
    bz.add_argument("--connectivity", type=int, choices=[6, 26], default=26)
    bz.set_defaults(func=cmd_binarize)

    ev = subs.add_parser("evaluate", help="cross-validated segmentation report")
    ev.add_argument("dataset", help="JSON dataset: {'samples': [{heatmap, label, mask?, box?}]}")
    ev.add_argument("output", nargs="?", default=None, help="report path (stdout if omitted)")
    ev.add_argument("--folds", type=int, default=10)
    ev.add_argument("--calibration-masks", type=int, default=5)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--connectivity", type=int, choices=[6, 26], default=26)
    ev.add_argument("--candidates", type=int, default=TAU_PRIME_CANDIDATES)
    ev.add_argument("--weight", type=float, default=SENSITIVITY_WEIGHT)
    ev.set_defaults(func=cmd_evaluate)

    ss = subs.add_parser("sample-slices", help="export randomized training slices")
    ss.add_argument("volumes", nargs="+")
    ss.add_argument("--out", required=True, help="output stem for .bin/.json pair")
    ss.add_argument("--per-volume", type=int, default=120)
    ss.add_argument("--size", type=int, default=224)
    ss.add_argument("--labels", default=None, help="comma-separated labels, one per volume")
    ss.add_argument("--scale", type=float, default=0.3,
                    help="in-plane scale jitter: lengths drawn from [1-s, 1+s]")
    ss.add_argument("--translate", type=float, default=0.3)
    ss.add_argument("--intensity", type=float, default=0.3)
    ss.add_argument("--shear", type=float, default=0.0,
                    help="max shear angle between in-plane axes, radians")
    ss.add_argument("--seed", type=int, default=0)
    ss.set_defaults(func=cmd_sample_slices)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        _fail(2, "missing-file", str(exc))
    except VolumeFormatError as exc:
        _fail(1, type(exc).__name__, str(exc))
    except ExternalEvaluatorError as exc:
        _fail(1, type(exc).__name__, str(exc))
    except (ValueError, FloatingPointError) as exc:
        _fail(1, type(exc).__name__, str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
