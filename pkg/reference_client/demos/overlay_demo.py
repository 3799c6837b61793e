"""Reconstruct a ball phantom over the wire and render the overlay.

Drives the engine CLI as a subprocess with this package's `serve`
command as the external evaluator, then paints the mid-axis slice of
the reconstruction over the phantom.  The disc of the overlay should
visibly cover the disc of the ball.

Run from the repository root after installing both packages:

    python3 reference_client/demos/overlay_demo.py
"""

import json
import pathlib
import subprocess
import sys
import tempfile

import numpy as np


def write_volume(stem, data):
    data = np.asarray(data, dtype="<f4")
    d, h, w = data.shape
    with open(f"{stem}.json", "w") as fh:
        json.dump({"shape": [d, h, w], "dtype": "f32le", "order": "dhw"}, fh)
    data.tofile(f"{stem}.bin")
    return stem


def soft_ball(n, radius=0.55, skin=0.12):
    axis = np.linspace(-1.0, 1.0, n)
    z, y, x = np.meshgrid(axis, axis, axis, indexing="ij")
    r = np.sqrt(x * x + y * y + z * z)
    return np.clip((radius - r) / skin + 0.5, 0.0, 1.0)


def main():
    n = 32
    out_png = pathlib.Path(__file__).with_name("overlay_demo.png")
    with tempfile.TemporaryDirectory() as tmp:
        vol = write_volume(f"{tmp}/ball", soft_ball(n))
        heat = f"{tmp}/heat"
        serve = f"{sys.executable} -m reference_client serve"
        engine = [
            sys.executable, "-m", "planetomo", "reconstruct", vol, heat,
            "--evaluator", f"external:{serve}",
            "--M", "24", "--L", "120", "--slice-size", "48", "48", "--quiet",
        ]
        print("reconstructing over the wire:", " ".join(engine[-12:]))
        subprocess.run(engine, check=True)
        overlay = [
            sys.executable, "-m", "reference_client", "overlay",
            vol, heat, str(out_png), "--axis", "0", "--index", str(n // 2),
        ]
        subprocess.run(overlay, check=True)
    print(f"wrote {out_png}")


if __name__ == "__main__":
    main()
