"""Stdio server speaking version 1 of the slice-evaluator protocol.

The engine spawns this process, sends one JSON handshake line, then
streams length-prefixed batches of little-endian float32 slices.  Every
batch is answered with its per-slice pixel means, as scalars or as a
mean-pooled grid, depending on what the handshake negotiated.  A
zero-count frame is echoed and ends the session cleanly; anything
malformed ends it with an error instead.

The server is single-threaded and strictly request-response, so a
recorded byte transcript fed back in always reproduces the byte
transcript out.
"""

import json
import struct

import numpy as np

PROTO_VERSION = 1

COUNT = struct.Struct("<I")


class ProtocolError(Exception):
    """A malformed frame or a broken session."""


def _read_exact(stream, n, what):
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise ProtocolError(f"input closed after {len(buf)}/{n} bytes of {what}")
        buf += chunk
    return buf


def _reject(stdout, reason):
    stdout.write(json.dumps({"ok": False, "err": reason}).encode() + b"\n")
    stdout.flush()
    return 2


def _negotiate(line):
    """Parse the handshake line into (h, w, c, grid, gh, gw).

    Raises
    ------
    ProtocolError
        If the line is not a JSON object.  Disagreements that the
        protocol can express (wrong version, impossible geometry) are
        reported with ValueError so the caller can answer ``ok: false``
        instead of tearing the session down.
    """
    try:
        hello = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"handshake is not JSON: {exc}") from exc
    if not isinstance(hello, dict):
        raise ProtocolError("handshake is not a JSON object")
    if hello.get("proto") != PROTO_VERSION:
        raise ValueError(f"unsupported proto {hello.get('proto')!r}")
    try:
        h, w, c = int(hello["h"]), int(hello["w"]), int(hello["c"])
        out = hello["out"]
        gh, gw = int(hello["gh"]), int(hello["gw"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"incomplete handshake: {exc}") from exc
    if h < 1 or w < 1 or c < 1:
        raise ValueError(f"bad slice geometry {h}x{w}x{c}")
    if out not in ("scalar", "grid"):
        raise ValueError(f"unknown output mode {out!r}")
    grid = out == "grid"
    if grid:
        if gh < 1 or gw < 1 or h % gh or w % gw:
            raise ValueError(f"grid {gh}x{gw} does not tile {h}x{w}")
    return h, w, c, grid, gh, gw


def batch_means(pixels, grid, gh, gw):
    """Mean responses for one batch of slices.

    Parameters
    ----------
    pixels : (k, c, h, w) ndarray
        One request batch.  Channels are averaged first, in float64.
    grid : bool
        Pool to a ``(gh, gw)`` grid of cell means instead of one scalar
        mean per slice.

    Returns
    -------
    ndarray
        Little-endian float32 response values, flat, C order.
    """
    k, _, h, w = pixels.shape
    merged = pixels.mean(axis=1, dtype=np.float64)
    if grid:
        values = merged.reshape(k, gh, h // gh, gw, w // gw).mean(axis=(2, 4))
    else:
        values = merged.mean(axis=(1, 2))
    return values.astype("<f4").ravel()


def serve_mean(stdin, stdout):
    """Run one protocol session over a pair of binary streams.

    Returns the process exit code: 0 after an orderly zero-count
    shutdown, 2 when the handshake was answered ``ok: false``.  Raises
    ProtocolError on malformed frames; the CLI turns that into an error
    JSON on stderr and a nonzero exit.
    """
    line = stdin.readline()
    if not line:
        raise ProtocolError("input closed before the handshake")
    try:
        h, w, c, grid, gh, gw = _negotiate(line)
    except ValueError as exc:
        return _reject(stdout, str(exc))
    stdout.write(json.dumps({"ok": True}).encode() + b"\n")
    stdout.flush()

    frame = 4 * c * h * w
    while True:
        k = COUNT.unpack(_read_exact(stdin, 4, "a frame header"))[0]
        if k == 0:
            stdout.write(COUNT.pack(0))
            stdout.flush()
            return 0
        payload = _read_exact(stdin, k * frame, f"a {k}-slice payload")
        pixels = np.frombuffer(payload, dtype="<f4").reshape(k, c, h, w)
        if not np.isfinite(pixels).all():
            raise ProtocolError("request contains non-finite values")
        values = batch_means(pixels, grid, gh, gw)
        stdout.write(COUNT.pack(k))
        stdout.write(values.tobytes())
        stdout.flush()
