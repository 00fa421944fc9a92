"""NumPy reference implementation of the hot path-propagation kernels.

Each kernel consumes a drift descriptor (kind, params, grid, values) as
produced by DriftSpec.kernel_descriptor():

  kind 0: linear b(x) = -c x with c = params[0]
  kind 1: componentwise piecewise-linear table, boundary slopes frozen
  kind 2: radial b(x) = -(c + g / (2 sqrt(1 + |x|^2))) x, params = (c, g)

Gaussian increments are pre-generated and pre-scaled by the caller so both
backends consume identical randomness; results agree with the compiled
kernels to floating-point reassociation error (~1e-15 relative), not
bitwise.
"""

from __future__ import annotations

import numpy as np

from ..drift import _interp_frozen_slope

backend_name = "fallback"


def _drift_eval(kind: int, params: np.ndarray, grid: np.ndarray,
                values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate the descriptor drift on points of shape (n, d)."""
    if kind == 0:
        return -params[0] * x
    if kind == 2:
        s = np.sum(x * x, axis=1)
        rate = params[0] + params[1] / (2.0 * np.sqrt(1.0 + s))
        return -rate[:, None] * x
    if kind == 1:
        out = np.empty_like(x)
        for i in range(x.shape[1]):
            out[:, i] = _interp_frozen_slope(grid, values[i], x[:, i])
        return out
    raise ValueError(f"unknown drift kind {kind}")


def euler_endpoints(kind: int, params: np.ndarray, grid: np.ndarray,
                    values: np.ndarray, x0: np.ndarray, dt: float,
                    incs: np.ndarray) -> np.ndarray:
    """Advance each path through all substeps; returns endpoints (n, d).

    incs has shape (n, m, d) and already carries the sqrt(dt) scaling.
    """
    y = np.array(x0, dtype=float, copy=True)
    m = incs.shape[1]
    for j in range(m):
        b = _drift_eval(kind, params, grid, values, y)
        y = y + b * dt + incs[:, j]
    return y


def euler_path_record(kind: int, params: np.ndarray, grid: np.ndarray,
                      values: np.ndarray, x0: np.ndarray, dt: float,
                      incs: np.ndarray, record_every: int) -> np.ndarray:
    """Single path from x0 (d,); records after every `record_every` substeps.

    incs has shape (m, d) with m divisible by record_every; returns
    (m // record_every, d), excluding the start point.
    """
    m = incs.shape[0]
    if m % record_every != 0:
        raise ValueError("substep count must divide evenly into records")
    y = np.array(x0, dtype=float, copy=True).reshape(1, -1)
    out = np.empty((m // record_every, y.shape[1]))
    k = 0
    for j in range(m):
        b = _drift_eval(kind, params, grid, values, y)
        y = y + b * dt + incs[j]
        if (j + 1) % record_every == 0:
            out[k] = y[0]
            k += 1
    return out


def girsanov_log_weights(kind: int, params: np.ndarray, grid: np.ndarray,
                         values: np.ndarray, x0: np.ndarray, dt: float,
                         dw: np.ndarray) -> np.ndarray:
    """Log change-of-measure weights along shifted Brownian paths.

    For each path the integrand is evaluated at the left endpoint:
    acc += b(y) . dW - |b(y)|^2 dt / 2, then y += dW. x0 is (n, d) and dw
    is (n, m, d) of Brownian increments (already N(0, dt)-scaled).
    """
    y = np.array(x0, dtype=float, copy=True)
    n, m = dw.shape[0], dw.shape[1]
    acc = np.zeros(n)
    for j in range(m):
        b = _drift_eval(kind, params, grid, values, y)
        step = dw[:, j]
        acc += np.einsum("nd,nd->n", b, step)
        acc -= 0.5 * dt * np.einsum("nd,nd->n", b, b)
        y = y + step
    return acc
