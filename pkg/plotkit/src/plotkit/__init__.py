"""Figure rendering for link-simulator result CSVs.

Consumes the simulator's CSV outputs (its external interface) and renders
paper-style figures plus a plain-text data manifest.  Golden tests compare
manifests, never pixels, so figure styling can evolve freely.
"""

from plotkit.figures import FigureSpec, load_spec, render

__all__ = ["FigureSpec", "load_spec", "render"]

__version__ = "0.1.0"
