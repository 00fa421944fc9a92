"""Backend selection for the path-propagation kernels.

The compiled extension is preferred when it imported cleanly; setting the
environment variable DRIFTBAYES_FORCE_FALLBACK=1 before import pins the
NumPy implementation (useful for parity testing and benchmarking). The
active choice is exposed as `backend_name`.
"""

from __future__ import annotations

import importlib
import os

import numpy as np

from . import fallback

_forced = os.environ.get("DRIFTBAYES_FORCE_FALLBACK", "") not in ("", "0")

_core = None
if not _forced:
    try:
        _core = importlib.import_module("._core", __name__)
    except ImportError:
        _core = None

backend_name = "compiled" if _core is not None else "fallback"


def _contig(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def euler_endpoints(desc, x0, dt, incs):
    """Advance (n, d) starts through pre-scaled increments (n, m, d)."""
    kind, params, grid, values = desc
    if _core is not None:
        return _core.euler_endpoints(kind, _contig(params), _contig(grid),
                                     _contig(values), _contig(x0), dt,
                                     _contig(incs))
    return fallback.euler_endpoints(kind, params, grid, values, x0, dt, incs)


def euler_path_record(desc, x0, dt, incs, record_every):
    """Single path from x0 (d,), recording every `record_every` substeps."""
    kind, params, grid, values = desc
    if _core is not None:
        return _core.euler_path_record(kind, _contig(params), _contig(grid),
                                       _contig(values), _contig(x0), dt,
                                       _contig(incs), record_every)
    return fallback.euler_path_record(kind, params, grid, values, x0, dt,
                                      incs, record_every)


def girsanov_log_weights(desc, x0, dt, dw):
    """Log change-of-measure weights along shifted Brownian paths."""
    kind, params, grid, values = desc
    if _core is not None:
        return _core.girsanov_log_weights(kind, _contig(params), _contig(grid),
                                          _contig(values), _contig(x0), dt,
                                          _contig(dw))
    return fallback.girsanov_log_weights(kind, params, grid, values, x0, dt,
                                         dw)
