"""Finite-volume diagnostics for non-Gibbsian transformed and quenched spin measures."""
import os

__version__ = "0.1.0"

# one cache location for compiled kernels, settable before the first import
if "NONGIBBS_CACHE_DIR" in os.environ:
    os.environ.setdefault("NUMBA_CACHE_DIR", os.environ["NONGIBBS_CACHE_DIR"])
