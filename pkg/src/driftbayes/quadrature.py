"""Composite-Simpson quadrature with node doubling, plus Gauss-Hermite helpers.

All integrals over unbounded densities in this package are truncated to a
box [-L, L]^d whose half-width L is chosen large enough that the exponential
tail of the integrand makes the truncation error negligible; the node count
is then doubled until the result stabilises to a relative tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.special import logsumexp


class QuadratureError(RuntimeError):
    """Node doubling failed to converge; carries the last estimate."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved estimate: {achieved!r})")
        self.achieved = achieved


@dataclass(frozen=True)
class QuadratureConfig:
    """Controls the truncated-domain Simpson rules.

    half_width=None means "derive from the drift's dissipativity constants"
    (M + 25/r, under which the stationary tail bound makes truncation
    negligible).
    """

    half_width: float | None = None
    nodes: int = 1025
    tol: float = 1e-8
    max_nodes: int = 2**17 + 1
    mc_samples: int = 200_000

    def with_half_width(self, half_width: float) -> "QuadratureConfig":
        return replace(self, half_width=half_width)


def odd_nodes(n: int) -> int:
    """Round up to an odd node count (composite Simpson needs one)."""
    n = max(int(n), 3)
    return n if n % 2 == 1 else n + 1


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights for n (odd) equally spaced nodes."""
    if n < 3 or n % 2 == 0:
        raise ValueError("composite Simpson needs an odd number of nodes >= 3")
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


def simpson_integral(values: np.ndarray, h: float) -> float:
    values = np.asarray(values, dtype=float)
    return float(simpson_weights(values.shape[0], h) @ values)


def log_simpson_integral(log_values: np.ndarray, h: float) -> float:
    """log of integral exp(log_values) dx, stable for very negative logs."""
    log_values = np.asarray(log_values, dtype=float)
    w = simpson_weights(log_values.shape[0], h)
    return float(logsumexp(log_values + np.log(w)))


def cumulative_from_center(values: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Cumulative Simpson integral of sampled values, anchored at x = 0.

    xs must be a symmetric, equally spaced grid containing 0 at its middle
    node; the returned array C satisfies C[i] = integral from 0 to xs[i].
    """
    values = np.asarray(values, dtype=float)
    xs = np.asarray(xs, dtype=float)
    center = xs.shape[0] // 2
    if abs(xs[center]) > 1e-12 * max(1.0, abs(xs[-1])):
        raise ValueError("grid must contain 0 at its middle node")
    cum = cumulative_simpson(values, x=xs, initial=0.0)
    return cum - cum[center]


def doubling_1d(
    evaluate: Callable[[np.ndarray], float],
    half_width: float,
    config: QuadratureConfig,
    what: str,
) -> tuple[float, np.ndarray]:
    """Run `evaluate` on symmetric grids of doubling resolution.

    `evaluate` maps a node grid to a scalar (typically a log-integral); the
    loop stops when successive values differ by less than config.tol in
    relative terms. Returns (value, final grid). Raises QuadratureError when
    the node cap is reached without convergence.
    """
    n = odd_nodes(config.nodes)
    xs = np.linspace(-half_width, half_width, n)
    prev = evaluate(xs)
    while n < config.max_nodes:
        n = 2 * n - 1
        xs = np.linspace(-half_width, half_width, n)
        cur = evaluate(xs)
        if abs(cur - prev) <= config.tol * max(1.0, abs(cur)):
            return cur, xs
        prev = cur
    raise QuadratureError(f"{what}: node doubling did not converge", prev)


@lru_cache(maxsize=8)
def gauss_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Probabilists' Gauss-Hermite rule: E[f(Z)] ~ sum w_i f(t_i), Z~N(0,1)."""
    nodes, weights = np.polynomial.hermite.hermgauss(n)
    return nodes * np.sqrt(2.0), weights / np.sqrt(np.pi)


def gaussian_expectation(f: Callable[[np.ndarray], np.ndarray],
                         mean: np.ndarray,
                         std: float,
                         n_nodes: int = 101) -> float:
    """E[f(X)] for X ~ N(mean, std^2 I) by tensor Gauss-Hermite (dim <= 3)."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    d = mean.shape[0]
    if d > 3:
        raise ValueError("tensor Gauss-Hermite limited to dimension <= 3")
    t, w = gauss_hermite(n_nodes)
    grids = np.meshgrid(*([t] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1) * std + mean
    wts = np.ones(pts.shape[0])
    for axis in range(d):
        wg = np.meshgrid(*([w] * d), indexing="ij")[axis].ravel()
        wts *= wg
    return float(wts @ f(pts))


def tensor_simpson(fn: Callable[[np.ndarray], np.ndarray],
                   half_width: float,
                   nodes_per_axis: int,
                   dim: int,
                   chunk: int = 262_144) -> float:
    """Integral of fn over [-L, L]^dim by a tensor composite-Simpson rule.

    fn receives points of shape (n, dim) and must return (n,) values.
    Evaluation is chunked along the flattened grid to bound memory.
    """
    n = odd_nodes(nodes_per_axis)
    xs = np.linspace(-half_width, half_width, n)
    h = xs[1] - xs[0]
    w1 = simpson_weights(n, h)
    total = 0.0
    idx_grids = np.meshgrid(*([np.arange(n)] * dim), indexing="ij")
    flat_idx = np.stack([g.ravel() for g in idx_grids], axis=-1)
    for start in range(0, flat_idx.shape[0], chunk):
        block = flat_idx[start:start + chunk]
        pts = xs[block]
        wts = np.prod(w1[block], axis=1)
        total += float(wts @ fn(pts))
    return total


def tensor_simpson_doubling(fn: Callable[[np.ndarray], np.ndarray],
                            half_width: float,
                            dim: int,
                            config: QuadratureConfig,
                            what: str) -> float:
    """Tensor Simpson with per-axis node doubling (dim <= 3)."""
    caps = {1: config.max_nodes, 2: 4097, 3: 513}
    start = {1: odd_nodes(config.nodes), 2: 65, 3: 33}
    n = start[dim]
    prev = tensor_simpson(fn, half_width, n, dim)
    while n < caps[dim]:
        n = 2 * n - 1
        cur = tensor_simpson(fn, half_width, n, dim)
        if abs(cur - prev) <= config.tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise QuadratureError(f"{what}: tensor node doubling did not converge", prev)
