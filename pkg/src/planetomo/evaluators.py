"""Slice evaluators: the measurement g(slice) applied along each stack.

Three kinds.  Sum is the plain pixel mean, which makes the engine a
classical plane-integral transform.  PooledGrid keeps a coarse spatial
grid per slice instead of one number.  External pipes slice batches to a
separate process (typically wrapping a trained classifier) over a small
framed protocol, so the model half of the pipeline can live in any
language or framework.

Wire protocol, version 1, over the child's stdin/stdout:

- handshake: one JSON line
  {"proto":1,"h":H,"w":W,"c":C,"out":"scalar"|"grid","gh":GH,"gw":GW}
  answered by one JSON line {"ok":true} or {"ok":false,"err":"..."}
- request: 4-byte little-endian unsigned count k, then k*C*H*W float32
  little-endian pixel values
- response: the same 4-byte count (must echo), then k floats in scalar
  mode or k*GH*GW floats in grid mode
- shutdown: a zero-count request; the evaluator echoes the zero count
  and exits.

Any failure of the external process is fatal for the run: a partial
reconstruction stitched from imputed values would look plausible and be
wrong.
"""

import json
import os
import select
import shlex
import struct
import subprocess
import threading
import time

import numpy as np

PROTO_VERSION = 1
_COUNT = struct.Struct("<I")


class ExternalEvaluatorError(RuntimeError):
    """Base class for failures of an external evaluator process."""


class EvaluatorExited(ExternalEvaluatorError):
    """The process ended before the run was over."""


class EvaluatorProtocolError(ExternalEvaluatorError):
    """The process broke the framing or handshake contract."""


class EvaluatorTimeout(ExternalEvaluatorError):
    """No response within the allotted time."""


class NonFiniteResponse(ExternalEvaluatorError):
    """The process returned NaN or Inf."""


def forward_pooled(pixels, gh, gw):
    """Non-overlapping mean pooling of slice pixels to a (gh, gw) grid.

    Kernel and stride are both (h/gh, w/gw); the slice shape must divide
    evenly.  Accepts a single (h, w) slice or a (k, h, w) batch and
    accumulates in float64.
    """
    pixels = np.asarray(pixels)
    h, w = pixels.shape[-2:]
    if h % gh or w % gw:
        raise ValueError(f"grid {(gh, gw)} does not divide slice shape {(h, w)}")
    shaped = pixels.reshape(pixels.shape[:-2] + (gh, h // gh, gw, w // gw))
    return shaped.mean(axis=(-3, -1), dtype=np.float64)


def forward_sum(pixels):
    """Mean pixel value: full pooling down to a single cell."""
    return forward_pooled(pixels, 1, 1)[..., 0, 0]


class SumEvaluator:
    """Built-in scalar evaluator: the per-slice pixel mean."""

    out = "scalar"
    grid_shape = None

    def evaluate(self, pixels):
        return forward_sum(pixels)

    def close(self):
        pass


class PooledGridEvaluator:
    """Built-in grid evaluator: mean pooling to a fixed (gh, gw) grid."""

    out = "grid"

    def __init__(self, gh, gw):
        if gh < 1 or gw < 1:
            raise ValueError(f"grid shape must be >= 1 per axis, got {(gh, gw)}")
        self.grid_shape = (int(gh), int(gw))

    def evaluate(self, pixels):
        return forward_pooled(pixels, *self.grid_shape)

    def close(self):
        pass


def evaluate_batch(evaluator, slices):
    """Apply an evaluator to a list of Slice2, preserving order.

    Returns a (k,) vector for scalar evaluators or a (k, gh, gw) tensor
    for grid evaluators; an empty list yields an empty result.
    """
    if not slices:
        if evaluator.out == "grid":
            return np.zeros((0,) + evaluator.grid_shape, dtype=np.float64)
        return np.zeros(0, dtype=np.float64)
    batch = np.stack([np.asarray(sl.data, dtype=np.float64) for sl in slices])
    return evaluator.evaluate(batch)


class ExternalEvaluator:
    """Client side of the wire protocol above.

    The child is one ordered channel: requests are serialized and at
    most one is in flight.  Batch all slices of a direction into one
    request to amortize round-trips.
    """

    def __init__(
        self,
        command,
        h_s,
        w_s,
        channels=1,
        out="scalar",
        grid_shape=(1, 1),
        timeout=120.0,
    ):
        if out not in ("scalar", "grid"):
            raise ValueError(f"output mode must be 'scalar' or 'grid', got {out!r}")
        if isinstance(command, str):
            command = shlex.split(command)
        if not command:
            raise ValueError("external evaluator command is empty")
        self.out = out
        self.grid_shape = tuple(int(g) for g in grid_shape) if out == "grid" else None
        self._shape = (int(channels), int(h_s), int(w_s))
        self._timeout = float(timeout)
        self._proc = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )
        self._handshake()

    @property
    def _values_per_slice(self):
        return self.grid_shape[0] * self.grid_shape[1] if self.out == "grid" else 1

    def _handshake(self):
        gh, gw = self.grid_shape if self.out == "grid" else (1, 1)
        c, h, w = self._shape
        hello = {
            "proto": PROTO_VERSION,
            "h": h,
            "w": w,
            "c": c,
            "out": self.out,
            "gh": gh,
            "gw": gw,
        }
        self._send(json.dumps(hello).encode() + b"\n")
        line = self._read_line()
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            self._abort()
            raise EvaluatorProtocolError(f"handshake reply is not JSON: {line!r}")
        if not isinstance(reply, dict) or reply.get("ok") is not True:
            err = reply.get("err", "no reason given") if isinstance(reply, dict) else line
            self._abort()
            raise EvaluatorProtocolError(f"evaluator rejected handshake: {err}")

    def evaluate(self, pixels):
        """Send one batch of slices, return the per-slice responses.

        pixels: (k, h, w) for single-channel, or (k, c, h, w); returns
        (k,) in scalar mode, (k, gh, gw) in grid mode.
        """
        pixels = np.asarray(pixels)
        c, h, w = self._shape
        if pixels.ndim == 3 and c == 1:
            pixels = pixels[:, None, :, :]
        if pixels.shape[1:] != (c, h, w):
            raise ValueError(
                f"batch shape {pixels.shape} does not match negotiated {(c, h, w)}"
            )
        k = pixels.shape[0]
        if k == 0:
            shape = (0,) if self.out == "scalar" else (0,) + self.grid_shape
            return np.zeros(shape, dtype=np.float64)
        payload = _COUNT.pack(k) + np.ascontiguousarray(pixels, dtype="<f4").tobytes()
        self._send(payload)
        echoed = _COUNT.unpack(self._read_exact(4))[0]
        if echoed != k:
            self._abort()
            raise EvaluatorProtocolError(f"sent count {k}, evaluator echoed {echoed}")
        raw = self._read_exact(4 * k * self._values_per_slice)
        values = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        if not np.all(np.isfinite(values)):
            self._abort()
            raise NonFiniteResponse("evaluator returned NaN or Inf")
        if self.out == "grid":
            return values.reshape(k, *self.grid_shape)
        return values

    def close(self):
        """Orderly shutdown: zero-count request, echoed, then process exit."""
        if self._proc.poll() is not None:
            return
        try:
            self._send(_COUNT.pack(0))
            echoed = _COUNT.unpack(self._read_exact(4))[0]
            if echoed != 0:
                raise EvaluatorProtocolError(
                    f"shutdown echoed count {echoed}, expected 0"
                )
            self._proc.stdin.close()
            self._proc.wait(timeout=self._timeout)
        except ExternalEvaluatorError:
            self._abort()
            raise
        except Exception:
            self._abort()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- plumbing ---------------------------------------------------------

    def _abort(self):
        if self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def _send(self, data):
        # Writing a large request can block once the pipe buffer fills, so
        # ship it from a helper thread while the main thread reads the
        # response; a stuck child then surfaces as a read timeout instead
        # of a deadlock.
        def _write():
            try:
                self._proc.stdin.write(data)
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError, OSError):
                pass  # the reader reports the death with more context

        writer = threading.Thread(target=_write, daemon=True)
        writer.start()
        self._writer = writer

    def _read_exact(self, n):
        fd = self._proc.stdout.fileno()
        chunks = []
        got = 0
        deadline = time.monotonic() + self._timeout
        while got < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._abort()
                raise EvaluatorTimeout(
                    f"no response within {self._timeout:.0f}s ({got}/{n} bytes)"
                )
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, min(1 << 20, n - got))
            if not chunk:
                code = self._proc.poll()
                self._abort()
                raise EvaluatorExited(
                    f"evaluator exited (code {code}) after {got}/{n} response bytes"
                )
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def _read_line(self):
        buf = bytearray()
        fd = self._proc.stdout.fileno()
        deadline = time.monotonic() + self._timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._abort()
                raise EvaluatorTimeout(f"no handshake reply within {self._timeout:.0f}s")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            ch = os.read(fd, 1)
            if not ch:
                code = self._proc.poll()
                self._abort()
                raise EvaluatorExited(f"evaluator exited (code {code}) during handshake")
            if ch == b"\n":
                return bytes(buf).decode(errors="replace")
            buf += ch
            if len(buf) > 1 << 16:
                self._abort()
                raise EvaluatorProtocolError("handshake reply exceeds 64 KiB")


def evaluator_from_spec(text, h_s, w_s, channels=1, timeout=120.0):
    """Build an evaluator from its command-line spelling.

    "sum" is the pixel mean; "pooled:GHxGW" is grid pooling; and
    "external:CMD ARG..." launches CMD as a protocol evaluator in scalar
    mode ("external-grid:GHxGW:CMD ARG..." for grid mode).
    """
    if text == "sum":
        return SumEvaluator()
    if text.startswith("pooled:"):
        gh, gw = _parse_grid(text[len("pooled:"):])
        return PooledGridEvaluator(gh, gw)
    if text.startswith("external:"):
        cmd = text[len("external:"):]
        return ExternalEvaluator(cmd, h_s, w_s, channels=channels, timeout=timeout)
    if text.startswith("external-grid:"):
        rest = text[len("external-grid:"):]
        grid_text, _, cmd = rest.partition(":")
        gh, gw = _parse_grid(grid_text)
        return ExternalEvaluator(
            cmd,
            h_s,
            w_s,
            channels=channels,
            out="grid",
            grid_shape=(gh, gw),
            timeout=timeout,
        )
    raise ValueError(
        f"unknown evaluator spec {text!r}; expected sum, pooled:GHxGW, "
        "external:CMD, or external-grid:GHxGW:CMD"
    )


def _parse_grid(text):
    try:
        gh_text, gw_text = text.split("x")
        return int(gh_text), int(gw_text)
    except ValueError:
        raise ValueError(f"bad grid spec {text!r}; expected GHxGW, e.g. 7x7") from None
