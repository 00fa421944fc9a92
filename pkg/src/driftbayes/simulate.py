"""Path simulation for unit-diffusion SDEs observed on a uniform time grid.

dX_t = b(X_t) dt + dW_t, recorded at t = 0, delta, 2 delta, ..., n delta.
Linear drifts admit an exact Gaussian recursion (run through a linear
filter); everything else is integrated by Euler with `substeps` inner steps
per observation gap. All randomness flows through numpy SeedSequence
spawning so runs are reproducible and independent streams never collide:
seed -> (initial condition stream, path stream).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from . import _kernels
from .drift import (
    DriftClassError,
    DriftSpec,
    OUForm,
    StationaryLaw,
    default_half_width,
    sample_stationary,
    stationary_density_1d,
    stationary_density_potential,
)


class ExplosionError(RuntimeError):
    """Numerical blow-up during path integration; names step and time."""


class IngestError(ValueError):
    """Imported observation file fails structural validation."""


@dataclass(frozen=True)
class SimScheme:
    """Integration scheme: 'exact' (linear drifts only), 'euler', or 'auto'.

    'auto' picks the exact recursion when the drift is linear and Euler
    otherwise. `substeps` is the number of inner Euler steps per
    observation gap.
    """

    method: str = "auto"
    substeps: int = 64

    def __post_init__(self):
        if self.method not in ("auto", "exact", "euler"):
            raise ValueError("method must be 'auto', 'exact', or 'euler'")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")


@dataclass(frozen=True)
class ObservationSeries:
    """States on the uniform grid t0 + k delta, k = 0..n; shape (n+1, d)."""

    delta: float
    states: np.ndarray
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] < 1:
            raise ValueError("states must be a (n+1, d) array")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        object.__setattr__(self, "states", states)

    @property
    def n(self) -> int:
        """Number of transitions (one fewer than recorded states)."""
        return self.states.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.delta * np.arange(self.states.shape[0])

    def to_csv(self, path) -> None:
        header = "t," + ",".join(f"x{i + 1}" for i in range(self.dim))
        data = np.column_stack([self.times, self.states])
        np.savetxt(path, data, delimiter=",", header=header, comments="",
                   fmt="%.17g")


def exact_linear_step(beta: float, delta: float) -> tuple[float, float]:
    """Autoregression coefficient and innovation s.d. of the linear-drift
    transition: X' | X = x ~ N(x e^{-beta delta}, (1 - e^{-2 beta delta}) / (2 beta))."""
    phi = float(np.exp(-beta * delta))
    var = (1.0 - np.exp(-2.0 * beta * delta)) / (2.0 * beta)
    return phi, float(np.sqrt(var))


def guard_radius(spec: DriftSpec) -> float:
    """Blow-up threshold: an order of magnitude beyond the quadrature box."""
    return 10.0 * default_half_width(spec)


def _check_finite_states(states: np.ndarray, delta: float, t0: float,
                         radius: float) -> None:
    norms = np.linalg.norm(states, axis=1)
    bad = ~np.isfinite(norms) | (norms > radius)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ExplosionError(
            f"path exceeded radius {radius:.3g} at step {k} "
            f"(t = {t0 + k * delta:.6g}); reduce delta or increase substeps")


def _stationary_start(spec: DriftSpec, law: StationaryLaw | None,
                      seed_child: np.random.SeedSequence) -> np.ndarray:
    if isinstance(spec.form, OUForm):
        rng = np.random.default_rng(seed_child)
        sd = np.sqrt(0.5 / spec.form.beta)
        return rng.standard_normal(spec.dim) * sd
    if law is None:
        if spec.dim == 1:
            law = stationary_density_1d(spec)
        elif spec.has_potential():
            law = stationary_density_potential(spec)
        else:
            raise DriftClassError(
                "no stationary sampler for this drift; pass x0 or a law")
    seed = int(seed_child.generate_state(1)[0])
    return sample_stationary(spec, law, 1, seed)[0]


def simulate_series(spec: DriftSpec, delta: float, n: int, seed: int,
                    scheme: SimScheme | None = None,
                    x0: Sequence[float] | None = None,
                    law: StationaryLaw | None = None) -> ObservationSeries:
    """Simulate n observation gaps; returns the (n+1)-state series.

    The start point defaults to a stationary draw. The exact method demands
    a linear drift; Euler paths are checked against a blow-up radius and
    raise ExplosionError rather than returning non-finite states.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    scheme = scheme or SimScheme()
    method = scheme.method
    if method == "auto":
        method = "exact" if isinstance(spec.form, OUForm) else "euler"
    if method == "exact" and not isinstance(spec.form, OUForm):
        raise DriftClassError("exact simulation requires a linear drift")

    ss_init, ss_path = np.random.SeedSequence(seed).spawn(2)
    if x0 is not None:
        start = np.asarray(x0, dtype=float).reshape(spec.dim)
    else:
        start = _stationary_start(spec, law, ss_init)
    rng = np.random.default_rng(ss_path)
    meta = {"seed": seed, "method": method, "drift": spec.to_json_dict()}

    if method == "exact":
        phi, sd = exact_linear_step(spec.form.beta, delta)
        innov = rng.standard_normal((n, spec.dim)) * sd
        states = np.empty((n + 1, spec.dim))
        states[0] = start
        for i in range(spec.dim):
            # AR(1) recursion x_k = phi x_{k-1} + e_k as an IIR filter
            y, _ = lfilter([1.0], [1.0, -phi], innov[:, i], zi=[phi * start[i]])
            states[1:, i] = y
        return ObservationSeries(delta=delta, states=states, meta=meta)

    dt = delta / scheme.substeps
    m_total = n * scheme.substeps
    incs = rng.standard_normal((m_total, spec.dim)) * np.sqrt(dt)
    desc = spec.kernel_descriptor()
    if desc is not None:
        rec = _kernels.euler_path_record(desc, start, dt, incs,
                                         scheme.substeps)
    else:
        rec = np.empty((n, spec.dim))
        y = start.reshape(1, -1).copy()
        k = 0
        for j in range(m_total):
            y = y + spec.drift_values(y) * dt + incs[j]
            if (j + 1) % scheme.substeps == 0:
                rec[k] = y[0]
                k += 1
    states = np.concatenate([start.reshape(1, -1), rec], axis=0)
    meta["substeps"] = scheme.substeps
    series = ObservationSeries(delta=delta, states=states, meta=meta)
    _check_finite_states(states, delta, 0.0, guard_radius(spec))
    return series


def euler_endpoints(spec: DriftSpec, x0: np.ndarray, delta: float,
                    substeps: int, increments: np.ndarray) -> np.ndarray:
    """One observation gap for a batch of starts (n, d) -> endpoints (n, d).

    increments must have shape (n, substeps, d) and be N(0, delta/substeps)
    scaled, e.g. from :func:`brownian_bundle`; sharing one bundle across
    drifts gives common-random-number coupling.
    """
    x0 = np.asarray(x0, dtype=float)
    if increments.shape != (x0.shape[0], substeps, x0.shape[1]):
        raise ValueError("increments shape must be (n, substeps, d)")
    dt = delta / substeps
    desc = spec.kernel_descriptor()
    if desc is not None:
        return _kernels.euler_endpoints(desc, x0, dt, increments)
    y = x0.copy()
    for j in range(substeps):
        y = y + spec.drift_values(y) * dt + increments[:, j]
    return y


def brownian_bundle(n_paths: int, substeps: int, dim: int, delta: float,
                    seed: int | np.random.SeedSequence) -> np.ndarray:
    """Pre-scaled Brownian increments of shape (n_paths, substeps, dim).

    Each entry is N(0, delta/substeps); cumulative sums along axis 1 give
    Brownian paths over one observation gap.
    """
    rng = np.random.default_rng(seed)
    dt = delta / substeps
    return rng.standard_normal((n_paths, substeps, dim)) * np.sqrt(dt)


# ---------------------------------------------------------------------------
# CSV ingest
# ---------------------------------------------------------------------------

@dataclass
class IngestReport:
    n_accepted: int
    rejected: list[tuple[int, str]]
    delta: float

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)


_TIME_TOL = 1e-9


def _parse_csv_rows(path_or_buffer):
    """Row parser shared by the ingest entry points.

    Returns (times, state rows, file line numbers of accepted rows,
    rejected (line, reason) pairs). Structural problems with the header
    raise IngestError; malformed data rows are skipped and recorded.
    """
    if hasattr(path_or_buffer, "read"):
        stream = path_or_buffer
        close = False
    else:
        stream = io.open(path_or_buffer, "r", newline="")
        close = True
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "t" or len(header) < 2:
            raise IngestError("header must be 't,x1[,x2,...]'")
        if header[1:] != [f"x{i + 1}" for i in range(len(header) - 1)]:
            raise IngestError("state columns must be named x1, x2, ...")
        ncol = len(header)
        times: list[float] = []
        rows: list[list[float]] = []
        linenos: list[int] = []
        rejected: list[tuple[int, str]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != ncol:
                rejected.append((lineno, f"expected {ncol} columns, got {len(row)}"))
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                rejected.append((lineno, "non-numeric field"))
                continue
            if not all(np.isfinite(v) for v in vals):
                rejected.append((lineno, "non-finite field"))
                continue
            times.append(vals[0])
            rows.append(vals[1:])
            linenos.append(lineno)
    finally:
        if close:
            stream.close()
    return times, rows, linenos, rejected


def read_series_csv(path_or_buffer) -> tuple[ObservationSeries, IngestReport]:
    """Parse a 't,x1[,x2,...]' file into a series, rejecting malformed rows.

    Rows with the wrong column count or non-numeric fields are skipped and
    recorded in the report. The surviving timestamps must form a uniform
    grid to within a relative tolerance of 1e-9; otherwise IngestError. The
    gap is inferred from the timestamps; use ingest_csv to audit against a
    declared gap instead.
    """
    times, rows, _, rejected = _parse_csv_rows(path_or_buffer)
    if len(rows) < 2:
        raise IngestError("need at least two valid observation rows")
    t = np.asarray(times)
    x = np.asarray(rows)
    diffs = np.diff(t)
    delta = float(np.median(diffs))
    if delta <= 0:
        raise IngestError("timestamps must be strictly increasing")
    scale = max(1.0, float(np.max(np.abs(t))))
    expected = t[0] + delta * np.arange(t.size)
    worst = float(np.max(np.abs(t - expected)))
    if worst > _TIME_TOL * scale:
        raise IngestError(
            f"timestamps deviate from a uniform grid by {worst:.3g} "
            f"(tolerance {_TIME_TOL * scale:.3g})")
    series = ObservationSeries(delta=delta, states=x, t0=float(t[0]))
    return series, IngestReport(n_accepted=len(rows), rejected=rejected,
                                delta=delta)


def ingest_csv(path_or_buffer,
               delta_declared: float) -> tuple[ObservationSeries, IngestReport]:
    """Parse a series file and audit timestamps against a declared gap.

    Malformed rows are skipped and recorded in the report. Every surviving
    timestamp must equal t0 + k * delta to within a relative tolerance of
    1e-9, else the file is rejected naming the offending row. The returned
    series carries meta["origin"] = "ingested".
    """
    if delta_declared <= 0:
        raise IngestError("declared delta must be positive")
    times, rows, linenos, rejected = _parse_csv_rows(path_or_buffer)
    if len(rows) < 2:
        raise IngestError("need at least two valid observation rows")
    t = np.asarray(times)
    t0 = float(t[0])
    expected = t0 + delta_declared * np.arange(t.size)
    tol = _TIME_TOL * np.maximum(1.0, np.abs(expected))
    bad = np.abs(t - expected) > tol
    if np.any(bad):
        k = int(np.argmax(bad))
        raise IngestError(
            f"timestamp rejected at row {k + 1} (file line {linenos[k]}): "
            f"t = {t[k]:.12g} but the declared grid expects "
            f"t0 + {k} * {delta_declared:.12g} = {expected[k]:.12g} "
            f"(off by {abs(t[k] - expected[k]):.3g})")
    series = ObservationSeries(delta=float(delta_declared),
                               states=np.asarray(rows), t0=t0,
                               meta={"origin": "ingested"})
    return series, IngestReport(n_accepted=len(rows), rejected=rejected,
                                delta=float(delta_declared))
