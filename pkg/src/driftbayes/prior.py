"""Discrete covering-net priors over parametric drift families.

A prior is a finite mixture of Dirac masses at drift atoms. Atoms are laid
out so that for every truncation radius m and every resolution level l the
family is covered within eps_l under the restricted sup metric

    ||b - b'||_{d,m,inf} = max_i sup_{[-m,m]^d} |b_i - b'_i|,

and the atom in cell (m, l) carries weight q1_m q2_l / n_{m,l} where n_{m,l}
is the cell's atom count. Truncating the (m, l) ladder leaves mass
unassigned; it is renormalized away and reported. Coverings are certified
against fresh parameter samples, never assumed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .drift import (
    Dissipativity,
    DriftSpec,
    OUForm,
    PotentialForm,
    StationaryLaw,
    ou_spec,
    sample_stationary,
    sqrt_blend_profile,
    stationary_log_density,
    validate_drift,
)
from .divergence import _law_for, l2_mu_distance
from .quadrature import QuadratureConfig, odd_nodes, simpson_weights
from .transition import MCValue


class CapacityError(RuntimeError):
    """Covering could not be certified within the atom cap; names (m, l)."""

    def __init__(self, m: int, l: int, cap: int):
        super().__init__(f"covering for cell (m={m}, l={l}) not achieved "
                         f"within {cap} atoms")
        self.m = m
        self.l = l


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilyConstants:
    """Shared regularity constants: drift growth K1, derivative bound K2,
    and a polynomial envelope for the potential profile (|f(s)| bounded by
    the polynomial in s; ascending coefficients). The envelope enters no
    computation and is audited pointwise."""

    K1: float
    K2: float
    envelope: tuple[float, ...]


@dataclass(frozen=True)
class FunctionFamily:
    """Parametric drift family over a box of parameters.

    `make` maps a parameter vector inside `parameter_box` to a DriftSpec;
    `profile_value` gives the potential profile f(params, s) for the
    envelope audit (None when the family is not potential-shaped).
    """

    name: str
    dim: int
    parameter_box: tuple[tuple[float, float], ...]
    make: Callable[[np.ndarray], DriftSpec]
    constants: FamilyConstants
    profile_value: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    @property
    def n_params(self) -> int:
        return len(self.parameter_box)

    def sample_params(self, n: int, seed) -> np.ndarray:
        rng = np.random.default_rng(seed)
        lo = np.array([a for a, _ in self.parameter_box])
        hi = np.array([b for _, b in self.parameter_box])
        pts = rng.uniform(lo, hi, size=(n, self.n_params))
        corners = np.stack(np.meshgrid(*[(a, b) for a, b in
                                         self.parameter_box],
                                       indexing="ij"), axis=-1)
        return np.concatenate([pts, corners.reshape(-1, self.n_params)])


def linear_family(beta_lo: float, beta_hi: float, dim: int = 1) -> FunctionFamily:
    """Mean-reverting linear drifts b(x) = -beta x, beta in [beta_lo, beta_hi]."""
    if not 0 < beta_lo < beta_hi:
        raise ValueError("need 0 < beta_lo < beta_hi")

    def make(params: np.ndarray) -> DriftSpec:
        return ou_spec(float(params[0]), growth_K=beta_hi, dim=dim)

    return FunctionFamily(
        name="linear",
        dim=dim,
        parameter_box=((beta_lo, beta_hi),),
        make=make,
        constants=FamilyConstants(K1=beta_hi, K2=beta_hi,
                                  envelope=(0.0, 0.5 * beta_hi)),
        profile_value=lambda p, s: 0.5 * p[0] * np.asarray(s, dtype=float),
    )


def sqrt_blend_family(c_lo: float, c_hi: float, g_lo: float, g_hi: float,
                      dim: int = 2) -> FunctionFamily:
    """Radial potential drifts from f(s) = c s/2 + g sqrt(1+s)/2.

    The induced drift is b(x) = -(c + g / (2 sqrt(1 + |x|^2))) x; the blend
    term only adds inward pull, so the dissipativity constants of the
    smallest c are valid across the box.
    """
    if not (0 < c_lo <= c_hi and 0 <= g_lo <= g_hi):
        raise ValueError("need 0 < c_lo <= c_hi and 0 <= g_lo <= g_hi")
    alpha = 1.0 if dim == 1 else 2.0
    K1 = c_hi + 0.5 * g_hi

    def make(params: np.ndarray) -> DriftSpec:
        c, g = float(params[0]), float(params[1])
        return DriftSpec(
            dim=dim,
            form=PotentialForm(sqrt_blend_profile([c, g])),
            growth_K=K1,
            dissipativity=Dissipativity(r=c, M=1.0, alpha=alpha),
        )

    def profile(p: np.ndarray, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return 0.5 * p[0] * s + 0.5 * p[1] * np.sqrt(1.0 + s)

    return FunctionFamily(
        name="sqrt-blend",
        dim=dim,
        parameter_box=((c_lo, c_hi), (g_lo, g_hi)),
        make=make,
        constants=FamilyConstants(
            K1=K1, K2=c_hi + 1.5 * g_hi,
            # sqrt(1+s) <= 1 + s/2 gives the polynomial envelope
            envelope=(0.5 * g_hi, 0.5 * c_hi + 0.25 * g_hi)),
        profile_value=profile,
    )


def audit_family(family: FunctionFamily, n_samples: int = 50,
                 seed: int = 0, half_width: float = 6.0) -> None:
    """Check sampled members against class constraints and the envelope.

    Raises ValueError naming the first offending member; silent on success.
    """
    params = family.sample_params(n_samples, np.random.SeedSequence(seed))
    s_grid = np.linspace(0.0, half_width ** 2, 101)
    env = np.polynomial.polynomial.polyval(
        s_grid, np.asarray(family.constants.envelope))
    for p in params:
        spec = family.make(p)
        report = validate_drift(spec, half_width,
                                grid_points=41 if family.dim >= 3 else 101)
        if not report.ok:
            raise ValueError(f"family member {tuple(p)} violates class "
                             f"constraints:\n{report.summary()}")
        if family.profile_value is not None:
            f_vals = np.abs(family.profile_value(p, s_grid))
            if np.any(f_vals > env + 1e-9):
                raise ValueError(f"family member {tuple(p)} exceeds the "
                                 "polynomial envelope")


# ---------------------------------------------------------------------------
# sup metric
# ---------------------------------------------------------------------------

def _metric_grid(dim: int, m: float, grid_points: int) -> np.ndarray:
    if dim <= 3:
        per_axis = {1: grid_points, 2: min(grid_points, 33),
                    3: min(grid_points, 15)}[dim]
        axis = np.linspace(-m, m, per_axis)
        grids = np.meshgrid(*([axis] * dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)
    rng = np.random.default_rng(24601)  # fixed so the metric is a function
    pts = rng.uniform(-m, m, size=(grid_points * dim, dim))
    corners = m * np.sign(rng.standard_normal((2 * dim, dim)))
    axes = np.concatenate([m * np.eye(dim), -m * np.eye(dim)])
    return np.concatenate([pts, corners, axes])


def sup_metric(spec_a: DriftSpec, spec_b: DriftSpec, m: float,
               grid_points: int = 201) -> float:
    """max_i sup_{[-m,m]^d} |b_{a,i} - b_{b,i}|, evaluated on a grid."""
    if spec_a.dim != spec_b.dim:
        raise ValueError("specs must share a dimension")
    pts = _metric_grid(spec_a.dim, float(m), grid_points)
    diff = spec_a.drift_values(pts) - spec_b.drift_values(pts)
    return float(np.max(np.abs(diff)))


# ---------------------------------------------------------------------------
# net construction
# ---------------------------------------------------------------------------

@dataclass
class PriorNet:
    """Finite Dirac-mixture prior with covering provenance.

    weights are normalized to one; `truncated_mass` is the weight the full
    (m, l) ladder would have placed beyond (m_max, l_max), removed by
    renormalization when `renormalized` is set.
    """

    atoms: list[DriftSpec]
    weights: np.ndarray
    provenance: list[tuple[int, int, int]]
    atom_params: list[tuple[float, ...]]
    eps_schedule: tuple[float, ...]
    q1: tuple[float, ...]
    q2: tuple[float, ...]
    truncated_mass: float
    renormalized: bool
    family_name: str

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError("net weights must sum to 1")
        if np.any(self.weights <= 0):
            raise ValueError("net weights must all be positive")

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def cell_sizes(self) -> dict[tuple[int, int], int]:
        sizes: dict[tuple[int, int], int] = {}
        for m, l, _ in self.provenance:
            sizes[(m, l)] = sizes.get((m, l), 0) + 1
        return sizes

    def raw_weight(self, index: int) -> float:
        """Weight before truncation renormalization: q1_m q2_l / n_{m,l}."""
        if not self.renormalized:
            return float(self.weights[index])
        return float(self.weights[index]) * (1.0 - self.truncated_mass)

    def to_json_dict(self) -> dict:
        return {
            "family": self.family_name,
            "atoms": [a.to_json_dict() for a in self.atoms],
            "weights": self.weights.tolist(),
            "provenance": [list(p) for p in self.provenance],
            "atom_params": [list(p) for p in self.atom_params],
            "eps_schedule": list(self.eps_schedule),
            "q1": list(self.q1),
            "q2": list(self.q2),
            "truncated_mass": self.truncated_mass,
            "renormalized": self.renormalized,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json_dict(doc: dict) -> "PriorNet":
        return PriorNet(
            atoms=[DriftSpec.from_json_dict(a) for a in doc["atoms"]],
            weights=np.asarray(doc["weights"], dtype=float),
            provenance=[tuple(p) for p in doc["provenance"]],
            atom_params=[tuple(p) for p in doc["atom_params"]],
            eps_schedule=tuple(doc["eps_schedule"]),
            q1=tuple(doc["q1"]),
            q2=tuple(doc["q2"]),
            truncated_mass=float(doc["truncated_mass"]),
            renormalized=bool(doc["renormalized"]),
            family_name=doc["family"],
        )

    @staticmethod
    def from_json(text: str) -> "PriorNet":
        return PriorNet.from_json_dict(json.loads(text))


def _geometric_weights(n: int) -> tuple[float, ...]:
    return tuple(2.0 ** -(j + 1) for j in range(n))


def _member_values(family: FunctionFamily, params: np.ndarray,
                   grid: np.ndarray) -> np.ndarray:
    """Drift values of each member on the metric grid, flattened per member."""
    out = np.empty((params.shape[0], grid.shape[0] * family.dim))
    for i, p in enumerate(params):
        out[i] = family.make(p).drift_values(grid).ravel()
    return out


def _sweep_cover_1d(family: FunctionFamily, grid: np.ndarray, eps: float,
                    cap: int, m: int, l: int) -> list[np.ndarray]:
    """Interval covering of a one-parameter family at continuous positions.

    Walks left to right: from the leftmost uncovered parameter u, place the
    atom at the largest a with ||b_u - b_a|| <= eps (bisection), then jump
    to the right edge of the atom's eps ball. Optimal for metrics monotone
    along the parameter axis; the certification pass guards the assumption.
    """
    (lo, hi), = family.parameter_box

    def vals(p: float) -> np.ndarray:
        return family.make(np.array([p])).drift_values(grid).ravel()

    def reach(anchor: np.ndarray, start: float) -> float:
        # largest p in [start, hi] with max|b_anchor - b_p| <= eps
        if np.max(np.abs(anchor - vals(hi))) <= eps:
            return hi
        a, b = start, hi
        for _ in range(60):
            mid = 0.5 * (a + b)
            if np.max(np.abs(anchor - vals(mid))) <= eps:
                a = mid
            else:
                b = mid
        return a

    atoms: list[np.ndarray] = []
    u = lo
    while True:
        if len(atoms) >= cap:
            raise CapacityError(m, l, cap)
        atom = reach(vals(u), u)
        atoms.append(np.array([atom]))
        covered_to = reach(vals(atom), atom)
        if covered_to >= hi:
            return atoms
        u = covered_to


def _grid_cover(family: FunctionFamily, grid: np.ndarray, eps: float,
                cap: int, m: int, l: int) -> list[np.ndarray]:
    """Product-grid covering with per-axis cell budgets.

    Estimates the metric slope along each parameter axis at the box center
    and sizes the grid so the summed per-axis half-cell contributions stay
    under eps (with margin). Exact for drifts affine in their parameters;
    the certification pass catches anything else.
    """
    box = family.parameter_box
    k = len(box)
    lo = np.array([a for a, _ in box])
    hi = np.array([b for _, b in box])
    span = hi - lo
    center = 0.5 * (lo + hi)
    vc = family.make(center).drift_values(grid).ravel()
    slopes = np.zeros(k)
    for ax in range(k):
        if span[ax] == 0:
            continue
        shifted = center.copy()
        shifted[ax] = hi[ax]
        v = family.make(shifted).drift_values(grid).ravel()
        slopes[ax] = np.max(np.abs(v - vc)) / (0.5 * span[ax])
    contrib = slopes * span
    total = float(contrib.sum())
    target = 0.97 * eps
    if total <= target:
        return [center]
    counts = [max(1, math.ceil(k * c / (2.0 * target))) if c > 0 else 1
              for c in contrib]
    # rebalance: shrink any axis whose budget the others leave room for
    for _ in range(4):
        slack = target - sum(c / (2.0 * n) for c, n in zip(contrib, counts))
        if slack <= 0:
            break
        for ax in range(k):
            n = counts[ax]
            while n > 1 and (contrib[ax] / (2.0 * (n - 1))
                             - contrib[ax] / (2.0 * n)) <= slack:
                slack -= (contrib[ax] / (2.0 * (n - 1))
                          - contrib[ax] / (2.0 * n))
                n -= 1
            counts[ax] = n
    if math.prod(counts) > cap:
        raise CapacityError(m, l, cap)
    axes = [lo[ax] + span[ax] * (np.arange(n) + 0.5) / n
            for ax, n in enumerate(counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return list(np.stack([g.ravel() for g in mesh], axis=-1))


def _greedy_cover(params: np.ndarray, values: np.ndarray, eps: float,
                  cap: int, m: int, l: int) -> list[np.ndarray]:
    """Farthest-point covering: grow atoms until no member is beyond eps."""
    lo = params.min(axis=0)
    hi = params.max(axis=0)
    center = 0.5 * (lo + hi)
    start = int(np.argmin(np.sum((params - center) ** 2, axis=1)))
    picked = [start]
    dmin = np.max(np.abs(values - values[start]), axis=1)
    while True:
        worst = int(np.argmax(dmin))
        if dmin[worst] <= eps:
            return [params[i] for i in picked]
        if len(picked) >= cap:
            raise CapacityError(m, l, cap)
        picked.append(worst)
        dmin = np.minimum(dmin,
                          np.max(np.abs(values - values[worst]), axis=1))


def _certify(values_fresh: np.ndarray, atom_values: np.ndarray,
             eps: float) -> float:
    """Worst fresh-member distance to its nearest atom."""
    dmin = np.full(values_fresh.shape[0], np.inf)
    for av in atom_values:
        dmin = np.minimum(dmin, np.max(np.abs(values_fresh - av), axis=1))
    return float(np.max(dmin))


_CERT_SLACK = 1e-9


def build_net(family: FunctionFamily, m_max: int, l_max: int,
              eps_schedule: Sequence[float],
              q1: Sequence[float] | None = None,
              q2: Sequence[float] | None = None,
              seed: int = 0, atom_cap: int = 2000,
              cert_points: int | None = None,
              metric_points: int = 201) -> PriorNet:
    """Construct the covering-net prior over (m, l) cells.

    For each truncation radius m = 1..m_max and level l = 1..l_max, atoms
    are placed so every family member is within eps_schedule[l-1] of one
    under the sup metric on [-m, m]^d, certified on a fresh dense sample.
    Cell atoms share weight q1[m-1] q2[l-1] / n_{m,l}; the mass the infinite
    ladder would put past the truncation is reported and renormalized away.
    """
    eps_schedule = tuple(float(e) for e in eps_schedule)
    if len(eps_schedule) < l_max:
        raise ValueError("eps_schedule must provide l_max entries")
    if any(e2 >= e1 for e1, e2 in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps_schedule must be strictly decreasing")
    q1 = tuple(q1) if q1 is not None else _geometric_weights(m_max)
    q2 = tuple(q2) if q2 is not None else _geometric_weights(l_max)
    if len(q1) < m_max or len(q2) < l_max:
        raise ValueError("q sequences must cover m_max and l_max")
    if any(q <= 0 for q in q1) or any(q <= 0 for q in q2):
        raise ValueError("q weights must be positive")
    if sum(q1) > 1 + 1e-12 or sum(q2) > 1 + 1e-12:
        raise ValueError("q partial sums must not exceed 1")

    n_cert = cert_points or max(1000 * family.n_params, 1000)
    ss = np.random.SeedSequence(seed)
    ss_build, ss_fresh = ss.spawn(2)

    params_build = family.sample_params(n_cert, ss_build)
    params_fresh = family.sample_params(n_cert, ss_fresh)

    atoms: list[DriftSpec] = []
    weights: list[float] = []
    provenance: list[tuple[int, int, int]] = []
    atom_params: list[tuple[float, ...]] = []

    for m in range(1, m_max + 1):
        grid = _metric_grid(family.dim, float(m), metric_points)
        vals_build = _member_values(family, params_build, grid)
        vals_fresh = _member_values(family, params_fresh, grid)
        for l in range(1, l_max + 1):
            eps = eps_schedule[l - 1]
            if family.n_params == 1:
                cell_params = _sweep_cover_1d(family, grid, eps,
                                              atom_cap, m, l)
                atom_vals = _member_values(family,
                                           np.stack(cell_params), grid)
                worst = _certify(vals_fresh, atom_vals, eps)
                if worst > eps + _CERT_SLACK:
                    cell_params = _greedy_cover(params_build, vals_build,
                                                eps, atom_cap, m, l)
                    atom_vals = _member_values(family,
                                               np.stack(cell_params), grid)
                    worst = _certify(vals_fresh, atom_vals, eps)
            else:
                cell_params = _grid_cover(family, grid, eps, atom_cap, m, l)
                atom_vals = _member_values(family,
                                           np.stack(cell_params), grid)
                worst = _certify(vals_fresh, atom_vals, eps)
                for shrink in (0.9, 0.7):
                    if worst <= eps + _CERT_SLACK:
                        break
                    cell_params = _greedy_cover(params_build, vals_build,
                                                shrink * eps, atom_cap, m, l)
                    atom_vals = _member_values(family,
                                               np.stack(cell_params), grid)
                    worst = _certify(vals_fresh, atom_vals, eps)
            if worst > eps + _CERT_SLACK:
                raise CapacityError(m, l, atom_cap)
            cell_w = q1[m - 1] * q2[l - 1] / len(cell_params)
            for rank, p in enumerate(cell_params):
                atoms.append(family.make(p))
                weights.append(cell_w)
                provenance.append((m, l, rank))
                atom_params.append(tuple(float(v) for v in p))

    total = float(np.sum(weights))
    assigned = sum(q1[m - 1] * q2[l - 1]
                   for m in range(1, m_max + 1) for l in range(1, l_max + 1))
    assert abs(total - assigned) < 1e-12
    truncated = 1.0 - assigned
    w = np.asarray(weights, dtype=float)
    renormalized = truncated > 1e-15
    if renormalized:
        w = w / w.sum()
    return PriorNet(atoms=atoms, weights=w, provenance=provenance,
                    atom_params=atom_params, eps_schedule=eps_schedule,
                    q1=q1, q2=q2, truncated_mass=truncated,
                    renormalized=renormalized, family_name=family.name)


def audit_covering(net: PriorNet, family: FunctionFamily, seed: int,
                   n_samples: int | None = None,
                   metric_points: int = 201) -> dict[tuple[int, int], float]:
    """Re-certify every (m, l) cell on a fresh parameter sample.

    Returns the worst nearest-atom distance per cell; raises CapacityError
    on the first cell whose covering fails.
    """
    n = n_samples or max(1000 * family.n_params, 1000)
    params = family.sample_params(n, np.random.SeedSequence(seed))
    by_cell: dict[tuple[int, int], list[int]] = {}
    for i, (m, l, _) in enumerate(net.provenance):
        by_cell.setdefault((m, l), []).append(i)
    report: dict[tuple[int, int], float] = {}
    for (m, l), atom_idx in sorted(by_cell.items()):
        grid = _metric_grid(family.dim, float(m), metric_points)
        vals = _member_values(family, params, grid)
        atom_vals = np.stack([net.atoms[i].drift_values(grid).ravel()
                              for i in atom_idx])
        worst = _certify(vals, atom_vals, net.eps_schedule[l - 1])
        report[(m, l)] = worst
        if worst > net.eps_schedule[l - 1] + _CERT_SLACK:
            raise CapacityError(m, l, len(atom_idx))
    return report


# ---------------------------------------------------------------------------
# prior mass and tail bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BallMassReport:
    """Prior mass of an L2(pi_b0) ball around b0, with the nearest atom."""

    mass: float
    radius: float
    nearest_distance: float
    nearest_index: int
    in_ball_indices: tuple[int, ...]
    minimal_cell: tuple[int, int] | None


def prior_ball_mass(net: PriorNet, b0: DriftSpec,
                    law0: StationaryLaw | None = None,
                    radius: float = 0.1,
                    config: QuadratureConfig | None = None) -> BallMassReport:
    """Total weight of atoms within `radius` of b0 in L2(pi_b0).

    Also reports the nearest atom distance and the lexicographically
    smallest (m, l) cell containing an in-ball atom, which witnesses how
    deep the ladder must reach before the ball is charged.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    law0 = _law_for(b0, law0, config)
    dists = np.array([float(l2_mu_distance(a, b0, law0=law0, config=config))
                      for a in net.atoms])
    inside = dists < radius
    mass = float(net.weights[inside].sum())
    nearest = int(np.argmin(dists))
    cells = [net.provenance[i][:2] for i in np.nonzero(inside)[0]]
    return BallMassReport(
        mass=mass, radius=radius, nearest_distance=float(dists[nearest]),
        nearest_index=nearest,
        in_ball_indices=tuple(int(i) for i in np.nonzero(inside)[0]),
        minimal_cell=min(cells) if cells else None)


def tail_truncation_bound(b0: DriftSpec, law0: StationaryLaw | None = None,
                          m: float = 0.0, K: float | None = None,
                          config: QuadratureConfig | None = None,
                          mc_samples: int = 200_000, seed: int = 0) -> MCValue:
    """4 K^2 d int_{|x| > m} (1 + |x|)^2 pi_b0(x) dx.

    Controls how much of a drift's growth envelope escapes the truncation
    radius m under the stationary law; monotone non-increasing in m. d = 1
    integrates the two tail intervals exactly; d in {2, 3} masks a tensor
    grid; higher dimensions use stationary-sample Monte Carlo.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    K = float(K if K is not None else b0.growth_K)
    law0 = _law_for(b0, law0, config)
    d = b0.dim
    factor = 4.0 * K * K * d
    L = max((config.half_width if config and config.half_width else 0.0),
            (law0.half_width if law0 is not None else 0.0),
            m + 30.0)

    def weight_fn(pts: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(pts, axis=1)
        return (1.0 + r) ** 2 * np.exp(stationary_log_density(b0, pts, law0))

    if d == 1:
        if m >= L:
            return MCValue(0.0)
        n = odd_nodes(4097)
        xs = np.linspace(m, L, n)
        w = simpson_weights(n, xs[1] - xs[0])
        right = float(w @ weight_fn(xs.reshape(-1, 1)))
        left = float(w @ weight_fn(-xs.reshape(-1, 1)))
        return MCValue(factor * (right + left))
    if isinstance(b0.form, OUForm) or b0.has_potential():
        # the stationary density is radial: integrate the shell profile
        if m >= L:
            return MCValue(0.0)
        n = odd_nodes(4097)
        rs = np.linspace(m, L, n)
        w = simpson_weights(n, rs[1] - rs[0])
        pts = np.zeros((n, d))
        pts[:, 0] = rs
        surface = (2.0 * math.pi ** (0.5 * d) / math.gamma(0.5 * d)
                   * rs ** (d - 1))
        shell = (1.0 + rs) ** 2 * np.exp(
            stationary_log_density(b0, pts, law0)) * surface
        return MCValue(factor * float(w @ shell))
    if d <= 3:
        npts = 513 if d == 2 else 129
        axis = np.linspace(-L, L, npts)
        w1 = simpson_weights(npts, axis[1] - axis[0])
        grids = np.meshgrid(*([axis] * d), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        wts = w1.copy()
        for _ in range(d - 1):
            wts = np.multiply.outer(wts, w1)
        wts = wts.ravel()
        mask = np.linalg.norm(pts, axis=1) > m
        total = 0.0
        chunk = 262_144
        for s in range(0, pts.shape[0], chunk):
            sl = slice(s, s + chunk)
            total += float((wts[sl] * mask[sl]) @ weight_fn(pts[sl]))
        return MCValue(factor * total)

    x = _stationary_draw_for_tail(b0, law0, mc_samples, seed)
    r = np.linalg.norm(x, axis=1)
    vals = (1.0 + r) ** 2 * (r > m)
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(vals.size))
    return MCValue(factor * est, stderr=factor * se)


def _stationary_draw_for_tail(b0: DriftSpec, law0: StationaryLaw | None,
                              n: int, seed: int) -> np.ndarray:
    if isinstance(b0.form, OUForm):
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        return rng.standard_normal((n, b0.dim)) * math.sqrt(0.5 / b0.form.beta)
    return sample_stationary(b0, law0, n, seed)
