"""
Plugging a separate process in as the evaluator
===============================================

The evaluator half of the pipeline can live in another process (usually
one wrapping a trained model) speaking a small framed protocol on
stdin/stdout.  This demo is its own counterpart: run with --serve it
answers requests with per-slice pixel means, so the external
reconstruction must agree with the built-in Sum evaluator.
"""

import json
import struct
import sys

import numpy as np


def serve():
    # protocol v1: one JSON handshake line, then length-prefixed float32
    # batches until a zero-count request says we are done
    stdin, stdout = sys.stdin.buffer, sys.stdout.buffer
    hello = json.loads(stdin.readline())
    h, w, c = hello["h"], hello["w"], hello["c"]
    stdout.write(json.dumps({"ok": True}).encode() + b"\n")
    stdout.flush()
    while True:
        count = struct.unpack("<I", stdin.read(4))[0]
        stdout.write(struct.pack("<I", count))
        if count == 0:
            stdout.flush()
            return
        raw = stdin.read(4 * count * c * h * w)
        pixels = np.frombuffer(raw, dtype="<f4").reshape(count, c, h, w)
        means = pixels.mean(axis=(1, 2, 3), dtype=np.float64).astype("<f4")
        stdout.write(means.tobytes())
        stdout.flush()


if "--serve" in sys.argv:
    serve()
    sys.exit(0)

from planetomo import (ExternalEvaluator, ReconConfig, SumEvaluator,
                       reconstruct_scalar, two_ellipsoids)

vol = two_ellipsoids((24, 24, 24))
cfg = ReconConfig(m_count=16, direction_count=60, slice_shape=(48, 48))

with ExternalEvaluator([sys.executable, __file__, "--serve"], 48, 48) as evaluator:
    external = reconstruct_scalar(vol, evaluator, cfg)
builtin = reconstruct_scalar(vol, SumEvaluator(), cfg)

gap = np.max(np.abs(external.data - builtin.data)) / np.max(np.abs(builtin.data))
print(f"relative max-norm gap to built-in Sum: {gap:.2e}")
assert gap < 1e-5
print("external mean evaluator agrees with the built-in evaluator")
