"""Drift coefficients, their regularity classes, and stationary structure.

A drift b: R^d -> R^d is represented by a :class:`DriftSpec` carrying the
functional form plus user-declared class constants: a linear-growth bound
``growth_K`` (so ||b(x)|| <= K (1 + ||x||)) and inward-drift (dissipativity)
constants (r, M, alpha) with b(x).x <= -r ||x||^alpha outside the ball of
radius M. Constants are declared, never inferred; :func:`validate_drift`
audits them numerically on a grid.

For d = 1 the stationary density is recovered from the speed measure,
pi(x) = exp(2 int_0^x b) / m(R); for gradient drifts b = -grad V in any
dimension it is exp(-2V) / C with C = int exp(-2V). Both paths are exposed
and agree (up to quadrature error) where they overlap.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .quadrature import (
    QuadratureConfig,
    QuadratureError,
    cumulative_from_center,
    doubling_1d,
    log_simpson_integral,
    odd_nodes,
    simpson_weights,
    tensor_simpson_doubling,
)


class DriftEvaluationError(ValueError):
    """Drift returned a non-finite value; names the offending point."""


class DriftClassError(ValueError):
    """A precondition on declared class membership failed."""


class DiagnosticsWarning(UserWarning):
    """Non-fatal sampler diagnostics (e.g. Metropolis acceptance rate)."""


# ---------------------------------------------------------------------------
# drift forms
# ---------------------------------------------------------------------------

_PARAMETRIC_1D: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {}


def register_parametric_1d(name: str,
                           fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> None:
    """Register a named scalar drift family fn(params, x) -> values."""
    _PARAMETRIC_1D[name] = fn


register_parametric_1d("linear", lambda p, x: -p[0] * x)
register_parametric_1d("tanh", lambda p, x: -p[0] * np.tanh(p[1] * x))
register_parametric_1d(
    "linear_plus_tanh", lambda p, x: -p[0] * x - p[1] * np.tanh(x)
)


@dataclass(frozen=True)
class OUForm:
    """Linear mean-reverting drift b(x) = -beta x (Ornstein-Uhlenbeck)."""

    beta: float


@dataclass(frozen=True)
class Parametric1DForm:
    """Named scalar drift family from the registry, with a parameter vector."""

    name: str
    params: tuple[float, ...]


@dataclass(frozen=True)
class TabulatedForm:
    """Componentwise piecewise-linear drift on a shared ascending grid.

    Outside the grid each component is extended linearly with the slope of
    its boundary segment (frozen-slope extrapolation).
    """

    grid: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]  # one row per component


@dataclass(frozen=True)
class PotentialSpec:
    """Radial potential profile: V(x) = f(||x||^2), drift b = -2 f'(||x||^2) x.

    f must be C^3 with |f'| <= growth_K/2, f'(s) >= tail_r for s >= tail_M,
    and sup_s {4 s |f''(s)| + 2 |f'(s)|} <= lipschitz_K2 (which bounds every
    partial derivative of b). `profile`/`params` name a registered profile
    so the spec can round-trip through JSON; hand-built callables work too
    but cannot be serialized.
    """

    f: Callable[[np.ndarray], np.ndarray]
    f_prime: Callable[[np.ndarray], np.ndarray]
    f_second: Callable[[np.ndarray], np.ndarray]
    lipschitz_K2: float
    tail_M: float
    tail_r: float
    profile: str | None = None
    params: tuple[float, ...] = ()


@dataclass(frozen=True)
class PotentialForm:
    potential: PotentialSpec


_POTENTIAL_PROFILES: dict[str, Callable[[Sequence[float]], PotentialSpec]] = {}


def register_potential_profile(name: str,
                               builder: Callable[[Sequence[float]], PotentialSpec]) -> None:
    _POTENTIAL_PROFILES[name] = builder


def scaled_identity_profile(params: Sequence[float]) -> PotentialSpec:
    """f(s) = c s / 2, inducing the linear drift b(x) = -c x."""
    (c,) = params
    return PotentialSpec(
        f=lambda s: 0.5 * c * np.asarray(s, dtype=float),
        f_prime=lambda s: np.full_like(np.asarray(s, dtype=float), 0.5 * c),
        f_second=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        lipschitz_K2=float(c),
        tail_M=1.0,
        tail_r=0.5 * c,
        profile="scaled_identity",
        params=(float(c),),
    )


def sqrt_blend_profile(params: Sequence[float]) -> PotentialSpec:
    """f(s) = c s/2 + g sqrt(1+s)/2: a two-parameter C^3 profile family."""
    c, g = params

    def f(s):
        s = np.asarray(s, dtype=float)
        return 0.5 * c * s + 0.5 * g * np.sqrt(1.0 + s)

    def f_prime(s):
        s = np.asarray(s, dtype=float)
        return 0.5 * c + 0.25 * g / np.sqrt(1.0 + s)

    def f_second(s):
        s = np.asarray(s, dtype=float)
        return -0.125 * g * (1.0 + s) ** -1.5

    # sup_s 4s|f''| + 2|f'| <= c + g/2 + g  (coarse but valid)
    return PotentialSpec(
        f=f,
        f_prime=f_prime,
        f_second=f_second,
        lipschitz_K2=float(c + 1.5 * abs(g)),
        tail_M=1.0,
        tail_r=0.5 * c,
        profile="sqrt_blend",
        params=(float(c), float(g)),
    )


register_potential_profile("scaled_identity", scaled_identity_profile)
register_potential_profile("sqrt_blend", sqrt_blend_profile)


def potential_from_profile(name: str, params: Sequence[float]) -> PotentialSpec:
    try:
        return _POTENTIAL_PROFILES[name](params)
    except KeyError:
        raise KeyError(f"unknown potential profile {name!r}") from None


@dataclass(frozen=True)
class Dissipativity:
    r: float
    M: float
    alpha: float = 1.0


# ---------------------------------------------------------------------------
# DriftSpec
# ---------------------------------------------------------------------------

DriftForm = OUForm | Parametric1DForm | PotentialForm | TabulatedForm


@dataclass(frozen=True)
class DriftSpec:
    """A drift coefficient with declared class constants.

    Immutable; evaluation is pure, so instances are safe to share across
    threads. `__call__` accepts a scalar (d = 1), a single point of shape
    (d,), or a batch (n, d), and returns drift values of matching shape.
    """

    dim: int
    form: DriftForm
    growth_K: float
    dissipativity: Dissipativity

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.growth_K <= 0:
            raise ValueError("growth_K must be positive")
        dis = self.dissipativity
        if dis.r <= 0 or dis.M <= 0:
            raise ValueError("dissipativity r and M must be positive")
        if dis.alpha < 1:
            raise ValueError("dissipativity alpha must be >= 1")
        if self.dim == 1 and dis.alpha != 1.0:
            raise ValueError("alpha is fixed to 1 in dimension 1")
        if isinstance(self.form, OUForm):
            if not (0.0 < self.form.beta <= self.growth_K):
                raise ValueError("OU rate beta must lie in (0, growth_K]")
        if isinstance(self.form, TabulatedForm):
            grid = np.asarray(self.form.grid, dtype=float)
            vals = np.asarray(self.form.values, dtype=float)
            if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
                raise ValueError("tabulated grid must be strictly ascending")
            if vals.shape != (self.dim, grid.size):
                raise ValueError("tabulated values must have shape (dim, len(grid))")
        if isinstance(self.form, Parametric1DForm):
            if self.dim != 1:
                raise ValueError("parametric-1d forms require dim == 1")
            if self.form.name not in _PARAMETRIC_1D:
                raise KeyError(f"unregistered parametric drift {self.form.name!r}")

    # -- evaluation --------------------------------------------------------

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        scalar = arr.ndim == 0
        single = arr.ndim == 1 and self.dim > 1 and arr.shape[0] == self.dim
        if scalar:
            pts = arr.reshape(1, 1)
        elif arr.ndim == 1:
            # for d = 1 a 1-d array is a batch of scalar points
            pts = arr.reshape(-1, 1) if self.dim == 1 else arr.reshape(1, -1)
        else:
            pts = arr
        if pts.shape[-1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates")
        out = self.drift_values(pts)
        if scalar:
            return float(out[0, 0])
        if single:
            return out[0]
        if arr.ndim == 1 and self.dim == 1:
            return out[:, 0]
        return out

    def drift_values(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate on a batch of shape (n, d); returns (n, d)."""
        pts = np.asarray(pts, dtype=float)
        form = self.form
        if isinstance(form, OUForm):
            return -form.beta * pts
        if isinstance(form, Parametric1DForm):
            fn = _PARAMETRIC_1D[form.name]
            return fn(np.asarray(form.params, dtype=float), pts[:, 0]).reshape(-1, 1)
        if isinstance(form, PotentialForm):
            s = np.sum(pts * pts, axis=1)
            fp = np.asarray(form.potential.f_prime(s), dtype=float)
            return -2.0 * fp[:, None] * pts
        if isinstance(form, TabulatedForm):
            grid = np.asarray(form.grid, dtype=float)
            vals = np.asarray(form.values, dtype=float)
            out = np.empty_like(pts)
            for i in range(self.dim):
                out[:, i] = _interp_frozen_slope(grid, vals[i], pts[:, i])
            return out
        raise TypeError(f"unknown drift form {form!r}")

    def potential_value(self, pts: np.ndarray) -> np.ndarray:
        """V(x) for gradient drifts; raises for non-potential forms."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        if isinstance(self.form, PotentialForm):
            s = np.sum(pts * pts, axis=1)
            return np.asarray(self.form.potential.f(s), dtype=float)
        if isinstance(self.form, OUForm):
            return 0.5 * self.form.beta * np.sum(pts * pts, axis=1)
        raise DriftClassError("drift has no declared potential")

    def has_potential(self) -> bool:
        return isinstance(self.form, (PotentialForm, OUForm))

    # -- kernel descriptor ---------------------------------------------------

    def kernel_descriptor(self):
        """(kind, params, grid, values) for the compiled kernels, or None.

        Kinds: 0 linear b=-c x; 1 tabulated componentwise; 2 radial profile
        b = -(c + g / (2 sqrt(1+||x||^2))) x. Forms without a descriptor are
        integrated through the NumPy fallback.
        """
        empty = np.empty(0)
        empty2 = np.empty((0, 0))
        form = self.form
        if isinstance(form, OUForm):
            return 0, np.array([form.beta]), empty, empty2
        if isinstance(form, Parametric1DForm) and form.name == "linear":
            return 0, np.array([form.params[0]]), empty, empty2
        if isinstance(form, TabulatedForm):
            return (1, empty, np.asarray(form.grid, dtype=float),
                    np.asarray(form.values, dtype=float))
        if isinstance(form, PotentialForm):
            pot = form.potential
            if pot.profile == "scaled_identity":
                return 2, np.array([pot.params[0], 0.0]), empty, empty2
            if pot.profile == "sqrt_blend":
                return 2, np.asarray(pot.params, dtype=float), empty, empty2
        return None

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        form = self.form
        if isinstance(form, OUForm):
            doc = {"kind": "ou", "beta": form.beta}
        elif isinstance(form, Parametric1DForm):
            doc = {"kind": "parametric-1d", "id": form.name,
                   "params": list(form.params)}
        elif isinstance(form, TabulatedForm):
            doc = {"kind": "tabulated", "grid": list(form.grid),
                   "values": [list(row) for row in form.values],
                   "extrapolation": "linear"}
        elif isinstance(form, PotentialForm):
            pot = form.potential
            if pot.profile is None:
                raise ValueError("potential built from raw callables cannot be "
                                 "serialized; register a profile")
            doc = {"kind": "potential", "profile": pot.profile,
                   "params": list(pot.params)}
        else:  # pragma: no cover
            raise TypeError(f"unknown drift form {form!r}")
        return {
            "dim": self.dim,
            "form": doc,
            "growth_K": self.growth_K,
            "dissipativity": {"r": self.dissipativity.r,
                              "M": self.dissipativity.M,
                              "alpha": self.dissipativity.alpha},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json_dict(doc: dict) -> "DriftSpec":
        formdoc = doc["form"]
        kind = formdoc["kind"]
        if kind == "ou":
            form: DriftForm = OUForm(float(formdoc["beta"]))
        elif kind == "parametric-1d":
            form = Parametric1DForm(formdoc["id"], tuple(formdoc["params"]))
        elif kind == "tabulated":
            form = TabulatedForm(tuple(formdoc["grid"]),
                                 tuple(tuple(row) for row in formdoc["values"]))
        elif kind == "potential":
            form = PotentialForm(potential_from_profile(formdoc["profile"],
                                                        formdoc["params"]))
        else:
            raise ValueError(f"unknown drift form kind {kind!r}")
        dis = doc["dissipativity"]
        return DriftSpec(
            dim=int(doc["dim"]),
            form=form,
            growth_K=float(doc["growth_K"]),
            dissipativity=Dissipativity(float(dis["r"]), float(dis["M"]),
                                        float(dis.get("alpha", 1.0))),
        )

    @staticmethod
    def from_json(text: str) -> "DriftSpec":
        return DriftSpec.from_json_dict(json.loads(text))


def ou_spec(beta: float, growth_K: float | None = None,
            r: float | None = None, M: float = 1.0, dim: int = 1,
            alpha: float | None = None) -> DriftSpec:
    """Convenience constructor for the mean-reverting linear drift.

    b(x).x = -beta ||x||^2 <= -(beta M) ||x|| outside radius M, so the
    default dissipativity constants r = beta*M/2 (declared with slack) and
    the growth bound K = beta are always valid.
    """
    if alpha is None:
        alpha = 1.0
    return DriftSpec(
        dim=dim,
        form=OUForm(float(beta)),
        growth_K=float(growth_K if growth_K is not None else beta),
        dissipativity=Dissipativity(r=float(r if r is not None else 0.5 * beta * M),
                                    M=float(M), alpha=float(alpha)),
    )


def _interp_frozen_slope(grid: np.ndarray, vals: np.ndarray,
                         x: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation, extended with the boundary slopes."""
    x = np.asarray(x, dtype=float)
    idx = np.searchsorted(grid, x, side="right") - 1
    idx = np.clip(idx, 0, grid.size - 2)
    x0 = grid[idx]
    slope = (vals[idx + 1] - vals[idx]) / (grid[idx + 1] - grid[idx])
    return vals[idx] + (x - x0) * slope


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    constraint: str
    point: tuple[float, ...]
    measured: float
    bound: float

    @property
    def slack(self) -> float:
        return self.measured - self.bound

    def __str__(self):
        return (f"{self.constraint} violated at {self.point}: "
                f"{self.measured:.6g} > {self.bound:.6g}")


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    grid_halfwidth: float = 0.0
    grid_points: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.ok:
            return "compliant"
        lines = [str(v) for v in self.violations[:10]]
        if len(self.violations) > 10:
            lines.append(f"... and {len(self.violations) - 10} more")
        return "\n".join(lines)


_VALIDATION_SLACK = 1e-9


def _validation_grid(dim: int, half_width: float, points: int) -> np.ndarray:
    if dim <= 3:
        axis = np.linspace(-half_width, half_width, points)
        grids = np.meshgrid(*([axis] * dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)
    # radial sampling for higher dimensions: fixed internal seed keeps
    # validation deterministic
    rng = np.random.default_rng(1234567)
    dirs = rng.standard_normal((8 * points, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.linspace(0.0, half_width, points)
    pts = (dirs[:, None, :] * radii[None, :, None]).reshape(-1, dim)
    axes = np.eye(dim)
    axis_pts = (axes[:, None, :] * radii[None, :, None]).reshape(-1, dim)
    return np.concatenate([pts, axis_pts, -axis_pts], axis=0)


def validate_drift(spec: DriftSpec, grid_halfwidth: float,
                   grid_points: int) -> ValidationReport:
    """Audit growth and dissipativity constraints on a grid.

    An empty report means the spec is compliant at every grid point; each
    violation records the point and the measured-vs-bound gap. Non-finite
    drift values raise :class:`DriftEvaluationError` naming the point.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    pts = _validation_grid(spec.dim, grid_halfwidth, grid_points)
    vals = spec.drift_values(pts)
    bad = ~np.isfinite(vals).all(axis=1)
    if np.any(bad):
        p = pts[np.argmax(bad)]
        raise DriftEvaluationError(f"drift non-finite at {tuple(p)}")

    report = ValidationReport(grid_halfwidth=grid_halfwidth,
                              grid_points=grid_points)
    norms = np.linalg.norm(pts, axis=1)
    bnorms = np.linalg.norm(vals, axis=1)

    growth_bound = spec.growth_K * (1.0 + norms)
    for i in np.nonzero(bnorms > growth_bound + _VALIDATION_SLACK)[0]:
        report.violations.append(Violation(
            "linear growth ||b(x)|| <= K(1+||x||)", tuple(pts[i]),
            float(bnorms[i]), float(growth_bound[i])))

    dis = spec.dissipativity
    outside = norms >= dis.M
    inner = np.sum(vals * pts, axis=1)
    dissip_bound = -dis.r * norms ** dis.alpha
    for i in np.nonzero(outside & (inner > dissip_bound + _VALIDATION_SLACK))[0]:
        report.violations.append(Violation(
            "dissipativity b(x).x <= -r||x||^alpha", tuple(pts[i]),
            float(inner[i]), float(dissip_bound[i])))

    if isinstance(spec.form, PotentialForm):
        _audit_potential(spec, grid_halfwidth, grid_points, report)
    return report


def _audit_potential(spec: DriftSpec, half_width: float, points: int,
                     report: ValidationReport) -> None:
    pot = spec.form.potential
    s = np.linspace(0.0, half_width ** 2, max(points, 64))
    fp = np.asarray(pot.f_prime(s), dtype=float)
    fpp = np.asarray(pot.f_second(s), dtype=float)

    bound = 0.5 * spec.growth_K
    for i in np.nonzero(np.abs(fp) > bound + _VALIDATION_SLACK)[0]:
        report.violations.append(Violation(
            "profile slope |f'(s)| <= K/2", (float(s[i]),),
            float(abs(fp[i])), bound))

    lip = 4.0 * s * np.abs(fpp) + 2.0 * np.abs(fp)
    for i in np.nonzero(lip > pot.lipschitz_K2 + _VALIDATION_SLACK)[0]:
        report.violations.append(Violation(
            "profile curvature 4s|f''|+2|f'| <= K2", (float(s[i]),),
            float(lip[i]), pot.lipschitz_K2))

    tail = s >= pot.tail_M
    for i in np.nonzero(tail & (fp < pot.tail_r - _VALIDATION_SLACK))[0]:
        report.violations.append(Violation(
            "profile tail f'(s) >= r_f for s >= M_f", (float(s[i]),),
            float(fp[i]), pot.tail_r))


def default_half_width(spec: DriftSpec) -> float:
    """Quadrature half-width M + 25/r; the stationary tail decays at rate
    ~r beyond M, so the truncated mass is exp(-25)-sized."""
    dis = spec.dissipativity
    return dis.M + 25.0 / dis.r


def require_valid(spec: DriftSpec, half_width: float,
                  grid_points: int = 201) -> None:
    report = validate_drift(spec, half_width, grid_points)
    if not report.ok:
        raise DriftClassError(
            f"drift fails class constraints on [-{half_width}, {half_width}]:\n"
            + report.summary())


# ---------------------------------------------------------------------------
# stationary laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StationaryLaw:
    """Stationary density with its log normalizer and sampling support.

    For d = 1, `grid`/`cdf_grid` hold an inverse-CDF table; for gradient
    drifts the unnormalized log density -2V(x) is exact and only the
    normalizer carries quadrature (or Monte Carlo) error.
    """

    spec: DriftSpec
    dim: int
    log_normalizer: float
    half_width: float
    _log_unnorm: Callable[[np.ndarray], np.ndarray]
    grid: np.ndarray | None = None
    cdf_grid: np.ndarray | None = None
    normalizer_stderr: float | None = None

    def log_density(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        squeeze = pts.ndim <= 1 and self.dim == 1
        pts = pts.reshape(-1, self.dim)
        out = np.asarray(self._log_unnorm(pts), dtype=float) - self.log_normalizer
        return out if not squeeze else (out if out.size > 1 else float(out[0]))

    def density(self, x) -> np.ndarray:
        return np.exp(self.log_density(x))

    def sample_inverse_cdf(self, u: np.ndarray) -> np.ndarray:
        if self.grid is None or self.cdf_grid is None:
            raise DriftClassError("inverse-CDF sampling needs a 1-d grid law")
        return np.interp(u, self.cdf_grid, self.grid)


def _build_grid_law_1d(spec: DriftSpec, config: QuadratureConfig,
                       B_of_grid: Callable[[np.ndarray], np.ndarray],
                       boundary_slope: Callable[[float], float]) -> StationaryLaw:
    """Common 1-d law construction from the log unnormalized density B."""
    L = config.half_width if config.half_width is not None else default_half_width(spec)

    def log_m(xs: np.ndarray) -> float:
        B = B_of_grid(xs)
        return log_simpson_integral(B, xs[1] - xs[0])

    logm, xs = doubling_1d(log_m, L, config, "stationary normalizer")
    B = B_of_grid(xs)
    spline = CubicSpline(xs, B, bc_type="not-a-knot")
    slope_lo = boundary_slope(xs[0])
    slope_hi = boundary_slope(xs[-1])
    B_lo, B_hi = B[0], B[-1]

    def log_unnorm(pts: np.ndarray) -> np.ndarray:
        x = pts[:, 0]
        out = np.asarray(spline(np.clip(x, xs[0], xs[-1])), dtype=float)
        lo = x < xs[0]
        hi = x > xs[-1]
        if np.any(lo):
            out[lo] = B_lo + slope_lo * (x[lo] - xs[0])
        if np.any(hi):
            out[hi] = B_hi + slope_hi * (x[hi] - xs[-1])
        return out

    dens = np.exp(B - logm)
    cdf = cumulative_from_center(dens, xs)
    cdf -= cdf[0]
    cdf /= cdf[-1]
    cdf = np.maximum.accumulate(cdf)
    return StationaryLaw(spec=spec, dim=1, log_normalizer=logm, half_width=L,
                         _log_unnorm=log_unnorm, grid=xs, cdf_grid=cdf)


def stationary_density_1d(spec: DriftSpec,
                          config: QuadratureConfig | None = None) -> StationaryLaw:
    """Stationary density pi(x) = exp(2 int_0^x b) / m(R) for a scalar drift.

    The inner integral is accumulated by cumulative Simpson from 0 and the
    normalizer by composite Simpson in the log domain, with node doubling
    until the normalizer stabilises to config.tol (default 1e-8).
    """
    if spec.dim != 1:
        raise DriftClassError("stationary_density_1d requires dim == 1")
    config = config or QuadratureConfig()
    L = config.half_width if config.half_width is not None else default_half_width(spec)
    require_valid(spec, L)
    config = config.with_half_width(L)

    def B_of_grid(xs: np.ndarray) -> np.ndarray:
        b = spec.drift_values(xs.reshape(-1, 1))[:, 0]
        return 2.0 * cumulative_from_center(b, xs)

    def slope(x: float) -> float:
        return 2.0 * float(spec(np.array(x)))

    return _build_grid_law_1d(spec, config, B_of_grid, slope)


def stationary_density_potential(spec: DriftSpec,
                                 config: QuadratureConfig | None = None) -> StationaryLaw:
    """Stationary density exp(-2V)/C for gradient drifts in any dimension.

    C is computed by tensor Simpson for d <= 3 and by importance sampling
    with a Gaussian proposal (matched to the dissipativity rate) for d > 3,
    in which case `normalizer_stderr` reports the Monte Carlo error.
    """
    if not isinstance(spec.form, PotentialForm):
        raise DriftClassError("stationary_density_potential needs a potential form")
    config = config or QuadratureConfig()
    L = config.half_width if config.half_width is not None else default_half_width(spec)
    require_valid(spec, L, grid_points=41 if spec.dim >= 3 else 201)
    config = config.with_half_width(L)
    pot = spec.form.potential

    def log_unnorm(pts: np.ndarray) -> np.ndarray:
        return -2.0 * spec.potential_value(pts)

    if spec.dim == 1:
        def B_of_grid(xs: np.ndarray) -> np.ndarray:
            return log_unnorm(xs.reshape(-1, 1))

        def slope(x: float) -> float:
            return 2.0 * float(spec(np.array(x)))

        return _build_grid_law_1d(spec, config, B_of_grid, slope)

    if spec.dim <= 3:
        C = tensor_simpson_doubling(lambda p: np.exp(log_unnorm(p)), L,
                                    spec.dim, config, "potential normalizer")
        if not np.isfinite(C) or C <= 0:
            raise DriftClassError("normalizer non-finite: tail assumptions violated")
        return StationaryLaw(spec=spec, dim=spec.dim,
                             log_normalizer=float(np.log(C)), half_width=L,
                             _log_unnorm=log_unnorm)

    # d > 3: importance sampling, proposal variance from the tail rate r_f
    sigma2 = 2.0 * max(1.0 / (4.0 * pot.tail_r), pot.tail_M)
    rng = np.random.default_rng(np.random.SeedSequence(987654321))
    n = config.mc_samples
    pts = rng.standard_normal((n, spec.dim)) * np.sqrt(sigma2)
    log_q = (-0.5 * np.sum(pts * pts, axis=1) / sigma2
             - 0.5 * spec.dim * np.log(2.0 * np.pi * sigma2))
    log_w = log_unnorm(pts) - log_q
    w = np.exp(log_w - np.max(log_w))
    scale = np.exp(np.max(log_w))
    C = float(np.mean(w) * scale)
    stderr = float(np.std(w, ddof=1) / np.sqrt(n) * scale)
    if not np.isfinite(C) or C <= 0:
        raise DriftClassError("normalizer estimate non-finite: tail assumptions violated")
    return StationaryLaw(spec=spec, dim=spec.dim, log_normalizer=float(np.log(C)),
                         half_width=L, _log_unnorm=log_unnorm,
                         normalizer_stderr=stderr)


def stationary_log_density(spec: DriftSpec, pts: np.ndarray,
                           law: StationaryLaw | None = None) -> np.ndarray:
    """log pi_b at points (n, d); closed form for linear drifts.

    A linear drift b(x) = -beta x has pi_b = N(0, 1/(2 beta) I) exactly;
    other forms need a precomputed law (or one is built on the fly, which
    is expensive inside loops).
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, spec.dim)
    if isinstance(spec.form, OUForm):
        beta = spec.form.beta
        var = 0.5 / beta
        return (-0.5 * np.sum(pts * pts, axis=1) / var
                - 0.5 * spec.dim * np.log(2.0 * np.pi * var))
    if law is None:
        law = (stationary_density_1d(spec) if spec.dim == 1
               else stationary_density_potential(spec))
    out = law.log_density(pts)
    return np.atleast_1d(np.asarray(out, dtype=float))


def scale_function(spec: DriftSpec, y: float,
                   config: QuadratureConfig | None = None) -> float:
    """s(y) = int_0^y exp(-2 int_0^z b) dz, by nested cumulative quadrature.

    The inner exponent is kept in the log domain; a result too large for a
    float raises OverflowError.
    """
    if spec.dim != 1:
        raise DriftClassError("scale_function requires dim == 1")
    config = config or QuadratureConfig()
    y = float(y)
    if y == 0.0:
        return 0.0
    sign = 1.0 if y > 0 else -1.0
    a = abs(y)

    def evaluate(n: int) -> float:
        xs = np.linspace(-a, a, 2 * n - 1)  # symmetric so 0 is a node
        b = spec.drift_values(xs.reshape(-1, 1))[:, 0]
        A = -2.0 * cumulative_from_center(b, xs)
        half = xs >= 0 if sign > 0 else xs <= 0
        xs_h = xs[half]
        A_h = A[half] if sign > 0 else A[half][::-1]
        return log_simpson_integral(A_h, abs(xs_h[1] - xs_h[0]))

    n = odd_nodes(config.nodes)
    prev = evaluate(n)
    while n < config.max_nodes:
        n = 2 * n - 1
        cur = evaluate(n)
        if abs(cur - prev) <= config.tol * max(1.0, abs(cur)):
            prev = cur
            break
        prev = cur
    else:
        raise QuadratureError("scale function quadrature did not converge",
                              sign * float(np.exp(min(prev, 709.0))))
    if prev > 709.0:
        raise OverflowError(f"scale function overflows: log magnitude {prev:.3g}")
    return sign * float(np.exp(prev))


def sample_stationary(spec: DriftSpec, law: StationaryLaw, n: int,
                      seed: int) -> np.ndarray:
    """Draw n points from the stationary law; reproducible under `seed`.

    d = 1 inverts the quadrature CDF; d >= 2 runs a random-walk Metropolis
    chain targeting exp(-2V) with ceil(10 sqrt(n)) burn-in steps and fixed
    proposal step 0.5 (an acceptance rate outside [0.05, 0.95] emits a
    DiagnosticsWarning, not an error). Returns an array of shape (n, d).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if n == 0:
        return np.empty((0, spec.dim))
    if spec.dim == 1:
        u = rng.random(n)
        return law.sample_inverse_cdf(u).reshape(-1, 1)

    burn = int(np.ceil(10.0 * np.sqrt(n)))
    step = 0.5
    x = np.zeros(spec.dim)
    logp = float(law._log_unnorm(x.reshape(1, -1))[0])
    out = np.empty((n, spec.dim))
    accepted = 0
    total = burn + n
    jumps = rng.standard_normal((total, spec.dim)) * step
    logu = np.log(rng.random(total))
    for i in range(total):
        prop = x + jumps[i]
        logp_prop = float(law._log_unnorm(prop.reshape(1, -1))[0])
        if logp_prop - logp > logu[i]:
            x, logp = prop, logp_prop
            accepted += 1
        if i >= burn:
            out[i - burn] = x
    rate = accepted / total
    if not 0.05 <= rate <= 0.95:
        warnings.warn(f"Metropolis acceptance rate {rate:.3f} outside [0.05, 0.95]",
                      DiagnosticsWarning, stacklevel=2)
    return out
