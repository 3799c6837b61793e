"""Reference client for the planetomo slice-evaluator wire protocol.

Two deliberately small tools that live on the far side of the protocol
boundary: a stdio server answering slice batches with pixel means
(`serve_mean`), and an overlay renderer painting a signed heatmap slice
over its source volume (`plot_overlay`).  Neither imports the engine;
the wire protocol and the volume file format are the whole contract.
"""

from .overlay import load_volume, plot_overlay, render_overlay
from .protocol import ProtocolError, serve_mean

__all__ = [
    "ProtocolError",
    "load_volume",
    "plot_overlay",
    "render_overlay",
    "serve_mean",
]

__version__ = "0.1.0"
