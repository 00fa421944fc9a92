"""Transition densities, transition operators, and a weak-topology semimetric.

For a drift b the transition operator is P_D^b f(x) = int p_b(D, x, y) f(y) dy.
Linear drifts admit the closed-form Gaussian transition; for everything else
the operator has a change-of-measure representation under the Wiener measure,

    P_D^b f(x) = E[ f(x + W_D) exp(l_x) ],
    l_x = sum_i int b_i(x + W_s) dW_{i,s} - 1/2 sum_i int b_i^2(x + W_s) ds,

which is estimated on a bundle of Brownian paths with the left-endpoint
stochastic-integral rule. Distances between operators are weighted L1 sums
over a finite positive-weight node measure; evaluating both drifts on the
same bundle (common random numbers) makes the self-distance exactly zero.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .drift import DriftClassError, DriftSpec, OUForm
from .quadrature import gauss_hermite
from .simulate import brownian_bundle, euler_endpoints, exact_linear_step

_LOG_FLOOR = math.log(1e-300)


class PrecisionWarning(UserWarning):
    """A Monte-Carlo result is likely under-resolved."""


class MCValue(float):
    """A float carrying a Monte-Carlo standard error and precision notes.

    Behaves as a plain float in arithmetic; `stderr` is None for exact
    (quadrature) results.
    """

    stderr: float | None
    notes: tuple[str, ...]

    def __new__(cls, value: float, stderr: float | None = None,
                notes: Sequence[str] = ()):
        obj = super().__new__(cls, value)
        obj.stderr = stderr
        obj.notes = tuple(notes)
        return obj


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Bounded continuous test function with an available gradient.

    In dimension d > 1 the named functions act on the coordinate sum
    (gauss-bump on the squared norm), which keeps them bounded by
    `sup_bound` in every dimension.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    sup_bound: float = 1.0

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        return np.asarray(self.value(pts), dtype=float)

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        return np.asarray(self.grad(pts), dtype=float)


def _coord_sum(pts: np.ndarray) -> np.ndarray:
    return np.sum(pts, axis=1)


def _make_cos() -> TestFunction:
    return TestFunction(
        "cos",
        value=lambda p: np.cos(_coord_sum(p)),
        grad=lambda p: -np.sin(_coord_sum(p))[:, None] * np.ones_like(p))


def _make_sin() -> TestFunction:
    return TestFunction(
        "sin",
        value=lambda p: np.sin(_coord_sum(p)),
        grad=lambda p: np.cos(_coord_sum(p))[:, None] * np.ones_like(p))


def _make_tanh() -> TestFunction:
    return TestFunction(
        "tanh",
        value=lambda p: np.tanh(_coord_sum(p)),
        grad=lambda p: (1.0 / np.cosh(_coord_sum(p)) ** 2)[:, None]
        * np.ones_like(p))


def _make_gauss_bump() -> TestFunction:
    def val(p):
        return np.exp(-np.sum(p * p, axis=1))

    def grd(p):
        return -2.0 * p * val(p)[:, None]

    return TestFunction("gauss-bump", value=val, grad=grd)


def _make_indicator_smoothed(a: float, b: float,
                             width: float | None = None) -> TestFunction:
    if not b > a:
        raise ValueError("indicator-smoothed requires b > a")
    w = width if width is not None else (b - a) / 10.0
    if w <= 0:
        raise ValueError("smoothing width must be positive")

    def sig(t):
        return 1.0 / (1.0 + np.exp(-t))

    def val(p):
        t = _coord_sum(p)
        return sig((t - a) / w) * sig((b - t) / w)

    def grd(p):
        t = _coord_sum(p)
        u, v = sig((t - a) / w), sig((b - t) / w)
        dt = (u * (1.0 - u) * v - u * v * (1.0 - v)) / w
        return dt[:, None] * np.ones_like(p)

    return TestFunction(f"indicator-smoothed({a},{b})", value=val, grad=grd)


def test_function(name: str, **params) -> TestFunction:
    """Look up a test function by registry name.

    Known names: cos, sin, tanh, gauss-bump, indicator-smoothed (requires
    a and b, optional width).
    """
    if name == "cos":
        return _make_cos()
    if name == "sin":
        return _make_sin()
    if name == "tanh":
        return _make_tanh()
    if name == "gauss-bump":
        return _make_gauss_bump()
    if name == "indicator-smoothed":
        return _make_indicator_smoothed(**params)
    raise KeyError(f"unknown test function {name!r}")


# ---------------------------------------------------------------------------
# models and probes
# ---------------------------------------------------------------------------

_METHODS = ("exact_ou", "euler_gaussian", "mc_kde", "girsanov_mc")


@dataclass(frozen=True)
class TransitionModel:
    """How transition quantities are evaluated.

    exact_ou: closed-form Gaussian (linear drifts only).
    euler_gaussian: one-step Gaussian N(x + b(x) D, D I).
    mc_kde: Euler endpoint cloud smoothed by a Gaussian kernel.
    girsanov_mc: change-of-measure average over a Brownian bundle.
    """

    method: str
    n_paths: int = 100_000
    substeps: int = 64
    bandwidth: float | None = None
    seed: int = 0
    quad_nodes: int = 101

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")
        if self.n_paths < 100:
            raise ValueError("n_paths must be >= 100")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive when fixed")


@dataclass(frozen=True)
class TopologyProbe:
    """Weighted node measure plus a test function and a radius epsilon.

    Node weights realize a finite measure that assigns positive mass
    everywhere it looks; epsilon is the neighborhood radius used by
    posterior ball computations and may not exceed twice the total mass
    (gaps are bounded by 2 sup|f| nu(R)).
    """

    f: TestFunction
    nodes: np.ndarray
    weights: np.ndarray
    epsilon: float

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        if nodes.shape[0] == 1 and nodes.shape[1] > 1 and self.nodes.ndim == 1:
            nodes = nodes.T
        weights = np.asarray(self.weights, dtype=float).ravel()
        if nodes.shape[0] != weights.shape[0]:
            raise ValueError("nodes and weights must have equal length")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise ValueError("all probe weights must be positive and finite")
        total = float(weights.sum())
        if not np.isfinite(total) or total <= 0:
            raise ValueError("probe measure must have positive finite mass")
        if not 0 < self.epsilon <= 2.0 * total:
            raise ValueError("epsilon must lie in (0, 2 * total mass]")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]


def uniform_probe(f: TestFunction, half_width: float, n_nodes: int,
                  epsilon: float, dim: int = 1) -> TopologyProbe:
    """Unit-mass probe on a uniform grid over [-L, L]^dim."""
    axis = np.linspace(-half_width, half_width, n_nodes)
    if dim == 1:
        nodes = axis.reshape(-1, 1)
    else:
        grids = np.meshgrid(*([axis] * dim), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.full(nodes.shape[0], 1.0 / nodes.shape[0])
    return TopologyProbe(f=f, nodes=nodes, weights=w, epsilon=epsilon)


def probe_from_csv(path_or_buffer, f: TestFunction,
                   epsilon: float) -> TopologyProbe:
    """Load probe nodes/weights from a 'x1[,x2,...],w' CSV file."""
    if hasattr(path_or_buffer, "read"):
        stream, close = path_or_buffer, False
    else:
        stream, close = io.open(path_or_buffer, "r", newline=""), True
    try:
        reader = csv.reader(stream)
        header = [h.strip() for h in next(reader)]
        if header[-1] != "w" or header[:-1] != [f"x{i + 1}"
                                                for i in range(len(header) - 1)]:
            raise ValueError("probe header must be 'x1[,x2,...],w'")
        rows = [[float(c) for c in row] for row in reader if row]
    finally:
        if close:
            stream.close()
    arr = np.asarray(rows, dtype=float)
    return TopologyProbe(f=f, nodes=arr[:, :-1], weights=arr[:, -1],
                         epsilon=epsilon)


def probe_to_csv(probe: TopologyProbe, path) -> None:
    header = ",".join(f"x{i + 1}" for i in range(probe.dim)) + ",w"
    data = np.column_stack([probe.nodes, probe.weights])
    np.savetxt(path, data, delimiter=",", header=header, comments="",
               fmt="%.17g")


# ---------------------------------------------------------------------------
# transition densities
# ---------------------------------------------------------------------------

def _require_linear(spec: DriftSpec) -> float:
    if not isinstance(spec.form, OUForm):
        raise DriftClassError("exact_ou method requires a linear drift")
    return spec.form.beta


def exact_ou_log_density(spec: DriftSpec, delta: float, x: np.ndarray,
                         y: np.ndarray) -> np.ndarray:
    """Vectorized log p(delta, x, y) for linear drifts; x, y are (n, d)."""
    beta = _require_linear(spec)
    phi, sd = exact_linear_step(beta, delta)
    x = np.asarray(x, dtype=float).reshape(-1, spec.dim)
    y = np.asarray(y, dtype=float).reshape(-1, spec.dim)
    z = (y - phi * x) / sd
    return (-0.5 * np.sum(z * z, axis=1)
            - spec.dim * (0.5 * math.log(2.0 * math.pi) + math.log(sd)))


def euler_gaussian_log_density(spec: DriftSpec, delta: float, x: np.ndarray,
                               y: np.ndarray) -> np.ndarray:
    """One-step Gaussian surrogate N(x + b(x) delta, delta I), vectorized."""
    x = np.asarray(x, dtype=float).reshape(-1, spec.dim)
    y = np.asarray(y, dtype=float).reshape(-1, spec.dim)
    mean = x + spec.drift_values(x) * delta
    z = (y - mean) / math.sqrt(delta)
    return (-0.5 * np.sum(z * z, axis=1)
            - spec.dim * 0.5 * math.log(2.0 * math.pi * delta))


def _silverman_bandwidths(samples: np.ndarray) -> np.ndarray:
    """Per-axis Gaussian-kernel bandwidths from Silverman's rule."""
    n, d = samples.shape
    if d == 1:
        sd = float(np.std(samples[:, 0], ddof=1))
        q75, q25 = np.percentile(samples[:, 0], [75.0, 25.0])
        spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
        return np.array([0.9 * spread * n ** (-0.2)])
    sds = np.std(samples, ddof=1, axis=0)
    factor = (4.0 / (d + 2.0)) ** (1.0 / (d + 4.0)) * n ** (-1.0 / (d + 4.0))
    return factor * sds


def transition_density(spec: DriftSpec, model: TransitionModel, delta: float,
                       x, y) -> MCValue:
    """p_b(delta, x, y), strictly positive (log-domain floor at 1e-300)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=float).reshape(1, spec.dim)
    y = np.asarray(y, dtype=float).reshape(1, spec.dim)

    if model.method == "exact_ou":
        logp = float(exact_ou_log_density(spec, delta, x, y)[0])
        return MCValue(math.exp(max(logp, _LOG_FLOOR)))
    if model.method == "euler_gaussian":
        logp = float(euler_gaussian_log_density(spec, delta, x, y)[0])
        return MCValue(math.exp(max(logp, _LOG_FLOOR)))
    if model.method == "mc_kde":
        ends = _endpoint_cloud(spec, model, delta, x)
        return _kde_density(ends, y[0], model.bandwidth)
    raise ValueError("transition_density supports exact_ou, euler_gaussian, "
                     "and mc_kde models")


def _endpoint_cloud(spec: DriftSpec, model: TransitionModel, delta: float,
                    x: np.ndarray) -> np.ndarray:
    bundle = brownian_bundle(model.n_paths, model.substeps, spec.dim, delta,
                             np.random.SeedSequence(model.seed))
    starts = np.broadcast_to(x, (model.n_paths, spec.dim))
    return euler_endpoints(spec, starts, delta, model.substeps, bundle)


def _kde_density(samples: np.ndarray, y: np.ndarray,
                 bandwidth: float | None) -> MCValue:
    n, d = samples.shape
    if bandwidth is not None:
        h = np.full(d, float(bandwidth))
    else:
        h = _silverman_bandwidths(samples)
    z = (samples - y[None, :]) / h[None, :]
    logk = -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(h)) \
        - 0.5 * d * math.log(2.0 * math.pi)
    logp = float(logsumexp(logk)) - math.log(n)
    notes = []
    in_window = np.all(np.abs(samples - y[None, :]) <= 6.0 * h[None, :],
                       axis=1)
    if not np.any(in_window):
        notes.append("no endpoints within 6 bandwidths of the evaluation "
                     "point; density is an extrapolation")
        warnings.warn(notes[-1], PrecisionWarning, stacklevel=3)
    # kernel-average stderr in the density scale
    kvals = np.exp(np.maximum(logk, _LOG_FLOOR))
    stderr = float(np.std(kvals, ddof=1) / math.sqrt(n))
    return MCValue(math.exp(max(logp, _LOG_FLOOR)), stderr=stderr, notes=notes)


# ---------------------------------------------------------------------------
# transition operators
# ---------------------------------------------------------------------------

def _gauss_quadrature_operator(f: TestFunction, mean: np.ndarray, std: float,
                               quad_nodes: int) -> float:
    d = mean.shape[0]
    if d > 3:
        raise DriftClassError("tensor quadrature operators limited to d <= 3; "
                              "use a Monte Carlo method")
    t, w = gauss_hermite(quad_nodes)
    grids = np.meshgrid(*([t] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1) * std + mean
    wts = np.ones(pts.shape[0])
    for axis in range(d):
        wts *= np.meshgrid(*([w] * d), indexing="ij")[axis].ravel()
    return float(wts @ f(pts))


def _girsanov_generic(spec: DriftSpec, x0: np.ndarray, dt: float,
                      dw: np.ndarray) -> np.ndarray:
    y = np.array(x0, dtype=float, copy=True)
    acc = np.zeros(dw.shape[0])
    for j in range(dw.shape[1]):
        b = spec.drift_values(y)
        step = dw[:, j]
        acc += np.einsum("nd,nd->n", b, step)
        acc -= 0.5 * dt * np.einsum("nd,nd->n", b, b)
        y = y + step
    return acc


def girsanov_log_weights(spec: DriftSpec, x0: np.ndarray, delta: float,
                         bundle: np.ndarray) -> np.ndarray:
    """Log change-of-measure weights l_x along a shared Brownian bundle.

    bundle has shape (n, m, d) of N(0, delta/m) increments; x0 is a single
    point or (n, d) starts. The exponential weights average to one.
    """
    x0 = np.asarray(x0, dtype=float)
    n = bundle.shape[0]
    if x0.ndim == 1:
        x0 = np.broadcast_to(x0, (n, bundle.shape[2]))
    dt = delta / bundle.shape[1]
    desc = spec.kernel_descriptor()
    if desc is not None:
        return _kernels.girsanov_log_weights(desc, x0, dt, bundle)
    return _girsanov_generic(spec, np.array(x0), dt, bundle)


def _girsanov_operator(spec: DriftSpec, model: TransitionModel, delta: float,
                       f: TestFunction, x: np.ndarray,
                       bundle: np.ndarray | None = None) -> MCValue:
    if bundle is None:
        bundle = brownian_bundle(model.n_paths, model.substeps, spec.dim,
                                 delta, np.random.SeedSequence(model.seed))
    logw = girsanov_log_weights(spec, x, delta, bundle)
    ends = x[None, :] + bundle.sum(axis=1)
    vals = f(ends)
    shift = float(np.max(logw))
    w = np.exp(logw - shift)
    prod = vals * w
    mean = float(np.mean(prod)) * math.exp(shift)
    stderr = float(np.std(prod, ddof=1) / math.sqrt(prod.size)) * math.exp(shift)
    ess = float(w.sum() ** 2 / np.sum(w * w))
    notes = []
    if ess < 10.0:
        notes.append(f"effective sample size {ess:.2f} < 10")
        warnings.warn(notes[-1], PrecisionWarning, stacklevel=3)
    return MCValue(mean, stderr=stderr, notes=notes)


def transition_operator(spec: DriftSpec, model: TransitionModel, delta: float,
                        f: TestFunction, x) -> MCValue:
    """P_delta^b f(x); Monte Carlo methods attach a standard error."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=float).reshape(spec.dim)

    if model.method == "exact_ou":
        beta = _require_linear(spec)
        phi, sd = exact_linear_step(beta, delta)
        return MCValue(_gauss_quadrature_operator(f, phi * x, sd,
                                                  model.quad_nodes))
    if model.method == "euler_gaussian":
        mean = x + spec.drift_values(x.reshape(1, -1))[0] * delta
        return MCValue(_gauss_quadrature_operator(f, mean, math.sqrt(delta),
                                                  model.quad_nodes))
    if model.method == "mc_kde":
        ends = _endpoint_cloud(spec, model, delta, x.reshape(1, -1))
        vals = f(ends)
        return MCValue(float(np.mean(vals)),
                       stderr=float(np.std(vals, ddof=1)
                                    / math.sqrt(vals.size)))
    if model.method == "girsanov_mc":
        return _girsanov_operator(spec, model, delta, f, x)
    raise ValueError(f"unknown method {model.method!r}")


# ---------------------------------------------------------------------------
# weak-topology semimetric
# ---------------------------------------------------------------------------

def _node_operators(spec: DriftSpec, model: TransitionModel, delta: float,
                    f: TestFunction, nodes: np.ndarray,
                    bundles: list[np.ndarray] | None) -> tuple[np.ndarray,
                                                               np.ndarray]:
    """Operator values and standard errors at each probe node."""
    k = nodes.shape[0]
    vals = np.empty(k)
    errs = np.zeros(k)
    for i in range(k):
        if model.method == "girsanov_mc":
            out = _girsanov_operator(spec, model, delta, f, nodes[i],
                                     bundle=bundles[i])
        else:
            out = transition_operator(spec, model, delta, f, nodes[i])
        vals[i] = float(out)
        errs[i] = out.stderr or 0.0
    return vals, errs


def _spawn_bundles(model: TransitionModel, delta: float, dim: int,
                   k: int) -> list[np.ndarray] | None:
    if model.method != "girsanov_mc":
        return None
    children = np.random.SeedSequence(model.seed).spawn(k)
    return [brownian_bundle(model.n_paths, model.substeps, dim, delta, c)
            for c in children]


def weak_distance(spec_a: DriftSpec, spec_b: DriftSpec,
                  model: TransitionModel, delta: float,
                  probe: TopologyProbe) -> MCValue:
    """Weighted L1 gap sum_i w_i |P^a f(x_i) - P^b f(x_i)|.

    Monte Carlo methods evaluate both drifts on the same per-node Brownian
    bundle, so identical specs give exactly zero and the attached standard
    error reflects the coupled difference.
    """
    if spec_a.dim != spec_b.dim or spec_a.dim != probe.dim:
        raise ValueError("specs and probe must share one dimension")
    bundles = _spawn_bundles(model, delta, spec_a.dim, probe.nodes.shape[0])
    va, ea = _node_operators(spec_a, model, delta, probe.f, probe.nodes,
                             bundles)
    vb, eb = _node_operators(spec_b, model, delta, probe.f, probe.nodes,
                             bundles)
    gaps = np.abs(va - vb)
    total = float(probe.weights @ gaps)
    if model.method in ("exact_ou", "euler_gaussian"):
        return MCValue(total)
    # aggregate error treats node estimates as independent; correlation
    # from the shared bundle only reduces it further
    se = float(np.sqrt(np.sum((probe.weights ** 2) * (ea ** 2 + eb ** 2))))
    return MCValue(total, stderr=se)


@dataclass(frozen=True)
class IdentifiabilityReport:
    max_gap: float
    stderr: float
    argmax_function: str
    argmax_point: tuple[float, ...]
    separated: bool

    def __str__(self):
        verdict = "separated" if self.separated else "not separated"
        return (f"max gap {self.max_gap:.6g} (se {self.stderr:.2g}) at "
                f"f={self.argmax_function}, x={self.argmax_point}: {verdict}")


def identifiability_probe(spec_a: DriftSpec, spec_b: DriftSpec,
                          model: TransitionModel, delta: float,
                          f_family: Sequence[TestFunction],
                          grid: np.ndarray) -> IdentifiabilityReport:
    """Largest operator gap over a family of test functions and a grid.

    The pair is flagged "separated" when the gap exceeds five Monte-Carlo
    standard errors (exact methods carry zero error, so any positive gap
    separates).
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[1] != spec_a.dim:
        grid = grid.reshape(-1, spec_a.dim)
    best = (-1.0, 0.0, "", ())
    bundles = _spawn_bundles(model, delta, spec_a.dim, grid.shape[0])
    for f in f_family:
        va, ea = _node_operators(spec_a, model, delta, f, grid, bundles)
        vb, eb = _node_operators(spec_b, model, delta, f, grid, bundles)
        gaps = np.abs(va - vb)
        i = int(np.argmax(gaps))
        if gaps[i] > best[0]:
            best = (float(gaps[i]), float(np.sqrt(ea[i] ** 2 + eb[i] ** 2)),
                    f.name, tuple(grid[i]))
    max_gap, se, fname, pt = best
    return IdentifiabilityReport(max_gap=max_gap, stderr=se,
                                 argmax_function=fname, argmax_point=pt,
                                 separated=max_gap > 5.0 * se)


@dataclass(frozen=True)
class SmallDeltaReport:
    """Residuals of the first-order gap approximation at shrinking delta.

    residual(D) = |P_D^a f(x) - P_D^b f(x) - D (a(x) - b(x)) . grad f(x)|;
    `slope` is the fitted log-log slope of residual against delta (nan when
    every residual vanishes).
    """

    deltas: np.ndarray
    gaps: np.ndarray
    residuals: np.ndarray
    slope: float

    def rows(self):
        return list(zip(self.deltas, self.gaps, self.residuals))


def small_delta_check(spec_a: DriftSpec, spec_b: DriftSpec, f: TestFunction,
                      x, deltas: Sequence[float],
                      model: TransitionModel | None = None) -> SmallDeltaReport:
    """Check that operator gaps are first-order in delta at small delta."""
    x = np.asarray(x, dtype=float).reshape(spec_a.dim)
    if model is None:
        method = ("exact_ou"
                  if isinstance(spec_a.form, OUForm)
                  and isinstance(spec_b.form, OUForm) else "euler_gaussian")
        model = TransitionModel(method=method)
    if model.method not in ("exact_ou", "euler_gaussian"):
        raise ValueError("small_delta_check needs a quadrature method")
    diff_drift = (spec_a.drift_values(x.reshape(1, -1))
                  - spec_b.drift_values(x.reshape(1, -1)))[0]
    grad = f.gradient(x.reshape(1, -1))[0]
    first_order = float(diff_drift @ grad)
    deltas = np.asarray(sorted(deltas, reverse=True), dtype=float)
    gaps = np.empty(deltas.size)
    residuals = np.empty(deltas.size)
    for i, d in enumerate(deltas):
        pa = float(transition_operator(spec_a, model, d, f, x))
        pb = float(transition_operator(spec_b, model, d, f, x))
        gaps[i] = pa - pb
        residuals[i] = abs(gaps[i] - d * first_order)
    positive = residuals > 0
    if np.count_nonzero(positive) >= 2:
        slope, _ = np.polyfit(np.log(deltas[positive]),
                              np.log(residuals[positive]), 1)
    else:
        slope = float("nan")
    return SmallDeltaReport(deltas=deltas, gaps=gaps, residuals=residuals,
                            slope=float(slope))


def partition_gap_diagnostic(spec_a: DriftSpec, spec_b: DriftSpec,
                             model: TransitionModel, delta: float,
                             edges: Sequence[float],
                             grid: np.ndarray) -> list[tuple[float, float, float]]:
    """Operator gaps for smoothed indicators of consecutive cells.

    For each interval [e_j, e_{j+1}) of the partition the maximal gap
    max_x |P^a 1~_{cell}(x) - P^b 1~_{cell}(x)| over the grid is returned
    as (left edge, right edge, gap); a purely diagnostic view of where two
    transition operators disagree.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing with >= 2 entries")
    grid = np.atleast_2d(np.asarray(grid, dtype=float)).reshape(-1, spec_a.dim)
    out = []
    bundles = _spawn_bundles(model, delta, spec_a.dim, grid.shape[0])
    for j in range(edges.size - 1):
        f = _make_indicator_smoothed(float(edges[j]), float(edges[j + 1]))
        va, _ = _node_operators(spec_a, model, delta, f, grid, bundles)
        vb, _ = _node_operators(spec_b, model, delta, f, grid, bundles)
        out.append((float(edges[j]), float(edges[j + 1]),
                    float(np.max(np.abs(va - vb)))))
    return out
