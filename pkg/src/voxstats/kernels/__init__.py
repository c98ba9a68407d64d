"""Numeric kernels with a compiled fast path and a pure-numpy fallback.

The backend is picked once at import time.  Set VOXSTATS_KERNELS to force a
choice:

  auto    (default) compiled extension if built, numpy otherwise
  c       compiled extension, ImportError if it is not available
  python  numpy fallback

`backend` records which one is active.  Both backends implement the same
functions with the same accumulation order; see `_reference` for the
definitions.
"""

import os

import numpy as np

from . import _reference

_choice = os.environ.get("VOXSTATS_KERNELS", "auto").lower()
if _choice not in ("auto", "c", "python"):
    raise ValueError(f"VOXSTATS_KERNELS must be auto, c or python, got {_choice!r}")

backend = "python"
_impl = _reference
if _choice in ("auto", "c"):
    try:
        from . import _fast as _impl  # type: ignore[no-redef]

        backend = "c"
    except ImportError:
        if _choice == "c":
            raise ImportError(
                "VOXSTATS_KERNELS=c but the compiled extension is not built; "
                "reinstall with a C compiler available"
            )


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conv2d_forward(x, w, b):
    return _impl.conv2d_forward(_f64(x), _f64(w), _f64(b))


def conv2d_backward(x, w, dy):
    return _impl.conv2d_backward(_f64(x), _f64(w), _f64(dy))


def maxpool2_forward(x):
    return _impl.maxpool2_forward(_f64(x))


def maxpool2_backward(dy, switches, h, w):
    switches = np.ascontiguousarray(switches, dtype=np.int64)
    return _impl.maxpool2_backward(_f64(dy), switches, h, w)


def bicoherence_sums(spectra, grid):
    spectra = np.ascontiguousarray(spectra, dtype=np.complex128)
    return _impl.bicoherence_sums(spectra, grid)
