"""Exact posteriors over net priors and posterior-concentration experiments.

The likelihood of a discretely observed diffusion factorizes into the
stationary density at the first state times one transition density per
observation gap. Working with log likelihood *ratios* against a reference
drift cancels normalizers shared across atoms, and a max-shifted softmax
turns prior weights plus log ratios into posterior weights without
underflow. Concentration is measured by the posterior mass escaping a
neighborhood of the data-generating drift, either a ball in L2 of its
stationary law or a weak transition-operator neighborhood.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .drift import (
    DriftEvaluationError,
    DriftSpec,
    OUForm,
    StationaryLaw,
    sample_stationary,
    stationary_log_density,
)
from .divergence import _law_for, l2_mu_distance
from .prior import PriorNet
from .quadrature import QuadratureError
from .simulate import ObservationSeries, SimScheme, exact_linear_step, \
    euler_endpoints, simulate_series
from .transition import (
    MCValue,
    PrecisionWarning,
    TopologyProbe,
    TransitionModel,
    exact_ou_log_density,
    euler_gaussian_log_density,
    transition_density,
    weak_distance,
)

_DENSITY_METHODS = ("exact_ou", "euler_gaussian", "mc_kde")


def _pair_log_densities(spec: DriftSpec, delta: float, xs: np.ndarray,
                        ys: np.ndarray, model: TransitionModel) -> np.ndarray:
    """Log transition densities for each (x_i, y_i) pair under one model."""
    if model.method == "exact_ou":
        return exact_ou_log_density(spec, delta, xs, ys)
    if model.method == "euler_gaussian":
        return euler_gaussian_log_density(spec, delta, xs, ys)
    if model.method == "mc_kde":
        # the shared model seed gives every atom the same random numbers
        return np.array([
            math.log(float(transition_density(spec, model, delta, x, y)))
            for x, y in zip(xs, ys)])
    raise ValueError("likelihoods need a density-capable model: "
                     + ", ".join(_DENSITY_METHODS))


def log_likelihood_ratio(b: DriftSpec, b0: DriftSpec,
                         series: ObservationSeries,
                         model: TransitionModel | None = None,
                         law_b: StationaryLaw | None = None,
                         law_b0: StationaryLaw | None = None) -> float:
    """log of [pi_b(X_0) / pi_b0(X_0)] * prod_i [p_b / p_b0](X_{i-1}, X_i).

    A series with zero gaps carries no information and returns 0. Non-finite
    factors raise DriftEvaluationError naming the offending transition.
    """
    model = model or TransitionModel(method="exact_ou")
    if series.n == 0:
        return 0.0
    states = series.states
    xs, ys = states[:-1], states[1:]
    lb = _pair_log_densities(b, series.delta, xs, ys, model)
    l0 = _pair_log_densities(b0, series.delta, xs, ys, model)
    diff = lb - l0
    bad = np.nonzero(~np.isfinite(diff))[0]
    if bad.size:
        raise DriftEvaluationError(
            f"non-finite transition log density at gap {int(bad[0])}")
    s_b = float(stationary_log_density(b, states[:1], law_b)[0])
    s_0 = float(stationary_log_density(b0, states[:1], law_b0)[0])
    if not (math.isfinite(s_b) and math.isfinite(s_0)):
        raise DriftEvaluationError(
            "non-finite stationary log density at the initial state")
    return s_b - s_0 + float(np.sum(diff))


# ---------------------------------------------------------------------------
# posterior over a net
# ---------------------------------------------------------------------------

@dataclass
class PosteriorResult:
    """Posterior weights over the atoms of a PriorNet.

    `log_weights_unnormalized` holds log prior plus log likelihood ratio
    against the chosen reference; `weights` is their max-shifted softmax.
    """

    net: PriorNet
    log_weights_unnormalized: np.ndarray
    weights: np.ndarray
    n_used: int
    model: TransitionModel
    reference: str
    dropped_atoms: tuple[int, ...] = ()

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError("posterior weights must sum to 1")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("posterior weights must be finite")

    @property
    def net_ref(self) -> str:
        return hashlib.sha256(self.net.to_json().encode()).hexdigest()[:12]

    def top_atom(self) -> int:
        return int(np.argmax(self.weights))

    def to_csv(self) -> str:
        lines = ["atom,prior,log_lik_ratio,posterior"]
        logp = np.log(self.net.weights)
        for j in range(self.net.n_atoms):
            ratio = self.log_weights_unnormalized[j] - logp[j]
            lines.append(f"{j},{self.net.weights[j]:.17g},"
                         f"{ratio:.17g},{self.weights[j]:.17g}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "net_ref": self.net_ref,
            "log_weights_unnormalized":
                [float(v) for v in self.log_weights_unnormalized],
            "weights": self.weights.tolist(),
            "n_used": self.n_used,
            "model": dataclasses.asdict(self.model),
            "reference": self.reference,
            "dropped_atoms": list(self.dropped_atoms),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def compute_posterior(net: PriorNet, series: ObservationSeries,
                      model: TransitionModel | None = None,
                      b0_for_ratio: DriftSpec | str = "self-normalizing",
                      laws: Sequence[StationaryLaw | None] | None = None
                      ) -> PosteriorResult:
    """Posterior weights proportional to prior times likelihood ratio.

    Ratios are taken against `b0_for_ratio`, or against the first atom when
    "self-normalizing"; the choice cancels in normalization (to 1e-10). An
    atom whose likelihood fails to evaluate is given weight zero with a
    warning; if every atom fails the posterior is undefined and fatal.
    """
    model = model or TransitionModel(method="exact_ou")
    if isinstance(b0_for_ratio, str):
        if b0_for_ratio != "self-normalizing":
            raise ValueError("b0_for_ratio must be a DriftSpec or "
                             "'self-normalizing'")
        # reference: first atom whose stationary law is computable
        ref = law_ref = ref_name = None
        for j, atom in enumerate(net.atoms):
            try:
                law_ref = laws[j] if laws else _law_for(atom, None, None)
            except (DriftEvaluationError, QuadratureError):
                continue
            ref, ref_name = atom, f"atom:{j}"
            break
        if ref is None:
            raise ValueError("every atom's likelihood failed to evaluate")
    else:
        ref, ref_name = b0_for_ratio, "external"
        law_ref = _law_for(ref, None, None)

    log_ratios = np.empty(net.n_atoms)
    dropped = []
    for j, atom in enumerate(net.atoms):
        try:
            law_j = laws[j] if laws else _law_for(atom, None, None)
            log_ratios[j] = log_likelihood_ratio(atom, ref, series, model,
                                                 law_b=law_j,
                                                 law_b0=law_ref)
        except (DriftEvaluationError, QuadratureError) as err:
            log_ratios[j] = -np.inf
            dropped.append(j)
            warnings.warn(f"atom {j} dropped from the posterior: {err}",
                          PrecisionWarning, stacklevel=2)
    log_unnorm = np.log(net.weights) + log_ratios
    finite = np.isfinite(log_unnorm)
    if not np.any(finite):
        raise ValueError("every atom's likelihood failed to evaluate")
    shift = float(np.max(log_unnorm[finite]))
    w = np.where(finite, np.exp(log_unnorm - shift), 0.0)
    w = w / w.sum()
    return PosteriorResult(net=net, log_weights_unnormalized=log_unnorm,
                           weights=w, n_used=series.n, model=model,
                           reference=ref_name,
                           dropped_atoms=tuple(dropped))


# ---------------------------------------------------------------------------
# concentration neighborhoods
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class L2Ball:
    """Neighborhood {b : ||b - b0||_{L2(pi_b0)} < radius}."""

    radius: float
    law0: StationaryLaw | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class WeakNeighborhood:
    """Neighborhood from a transition-operator probe: gap < probe.epsilon."""

    probe: TopologyProbe
    model: TransitionModel
    delta: float


def _outside_mask(atoms: Sequence[DriftSpec], b0: DriftSpec,
                  criterion) -> np.ndarray:
    if isinstance(criterion, L2Ball):
        law0 = _law_for(b0, criterion.law0, None)
        dists = np.array([
            float(l2_mu_distance(a, b0, law0=law0)) for a in atoms])
        return dists >= criterion.radius
    if isinstance(criterion, WeakNeighborhood):
        gaps = np.array([
            float(weak_distance(a, b0, criterion.model, criterion.delta,
                                criterion.probe)) for a in atoms])
        return gaps >= criterion.probe.epsilon
    raise TypeError("criterion must be L2Ball or WeakNeighborhood")


def neighborhood_complement_mass(post: PosteriorResult, b0: DriftSpec,
                                 criterion) -> float:
    """Posterior mass outside the chosen neighborhood of b0."""
    mask = _outside_mask(post.net.atoms, b0, criterion)
    return float(post.weights @ mask)


# ---------------------------------------------------------------------------
# consistency curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConsistencyCurve:
    """Mean complement mass per sample size over seeded replications."""

    ns: tuple[int, ...]
    means: tuple[float, ...]
    stderrs: tuple[float, ...]
    per_replication: np.ndarray  # (replications, len(ns))

    def to_csv(self) -> str:
        lines = ["n,mass,stderr"]
        for n, m, s in zip(self.ns, self.means, self.stderrs):
            lines.append(f"{n},{m:.17g},{s:.17g}")
        return "\n".join(lines) + "\n"


def _replication_seeds(seed: int, replications: int) -> np.ndarray:
    # one 64-bit stream word per replication; a prefix of the list is
    # unchanged when more replications are requested later
    return np.random.SeedSequence(seed).generate_state(replications,
                                                       np.uint64)


def consistency_curve(net: PriorNet, spec0: DriftSpec, n_list: Sequence[int],
                      delta: float, criterion,
                      model: TransitionModel | None = None,
                      law0: StationaryLaw | None = None,
                      replications: int = 20, seed: int = 0,
                      scheme: SimScheme | None = None) -> ConsistencyCurve:
    """Complement-mass trajectory as the observation count grows.

    Each replication simulates one series of max(n_list) gaps from spec0
    and evaluates the posterior on its prefixes, so sample sizes within a
    replication share data and the n-to-n comparison is paired. n = 0 rows
    equal the prior complement mass by definition.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if not n_list or any(n < 0 for n in n_list):
        raise ValueError("n_list must hold non-negative counts")
    model = model or TransitionModel(method="exact_ou")
    law0 = _law_for(spec0, law0, None)
    mask = _outside_mask(net.atoms, spec0, criterion)
    prior_complement = float(net.weights @ mask)
    atom_laws = [_law_for(a, None, None) for a in net.atoms]

    ns = tuple(int(n) for n in n_list)
    n_max = max(ns)
    per_rep = np.empty((replications, len(ns)))
    for r, rep_seed in enumerate(_replication_seeds(seed, replications)):
        if n_max == 0:
            per_rep[r] = prior_complement
            continue
        series = simulate_series(spec0, delta, n_max, seed=int(rep_seed),
                                 scheme=scheme, law=law0)
        for k, n in enumerate(ns):
            if n == 0:
                per_rep[r, k] = prior_complement
                continue
            prefix = ObservationSeries(delta=delta,
                                       states=series.states[:n + 1])
            post = compute_posterior(net, prefix, model, laws=atom_laws)
            per_rep[r, k] = float(post.weights @ mask)
    means = per_rep.mean(axis=0)
    if replications > 1:
        stderrs = per_rep.std(axis=0, ddof=1) / math.sqrt(replications)
    else:
        stderrs = np.zeros(len(ns))
    return ConsistencyCurve(ns=ns, means=tuple(float(v) for v in means),
                            stderrs=tuple(float(v) for v in stderrs),
                            per_replication=per_rep)


# ---------------------------------------------------------------------------
# likelihood-ratio audits
# ---------------------------------------------------------------------------

def _one_step_pairs(b0: DriftSpec, delta: float, n: int,
                    seed, law0: StationaryLaw | None,
                    substeps: int) -> tuple[np.ndarray, np.ndarray]:
    """n stationary starts and their one-gap endpoints under b0."""
    ss_init, ss_step = np.random.SeedSequence(seed).spawn(2)
    if isinstance(b0.form, OUForm):
        rng0 = np.random.default_rng(ss_init)
        x0 = rng0.standard_normal((n, b0.dim)) / math.sqrt(2.0 * b0.form.beta)
        phi, sd = exact_linear_step(b0.form.beta, delta)
        rng1 = np.random.default_rng(ss_step)
        x1 = phi * x0 + sd * rng1.standard_normal((n, b0.dim))
        return x0, x1
    x0 = sample_stationary(b0, law0, n, ss_init)
    rng1 = np.random.default_rng(ss_step)
    incs = rng1.standard_normal((n, substeps, b0.dim)) \
        * math.sqrt(delta / substeps)
    return x0, euler_endpoints(b0, x0, delta, substeps, incs)


def likelihood_mean_one_check(b: DriftSpec, b0: DriftSpec, delta: float,
                              n_series: int = 100_000, seed: int = 0,
                              model: TransitionModel | None = None,
                              law_b: StationaryLaw | None = None,
                              law_b0: StationaryLaw | None = None,
                              substeps: int = 64) -> MCValue:
    """Monte-Carlo E_{b0}[L_1(b)], which equals 1 for exact densities.

    Simulates fresh one-gap series from b0 and averages the likelihood
    ratio; the attached stderr supports a 3-sigma acceptance band. With
    approximate density methods the check doubles as a method audit.
    """
    model = model or TransitionModel(method="exact_ou")
    law_b = _law_for(b, law_b, None)
    law_b0 = _law_for(b0, law_b0, None)
    x0, x1 = _one_step_pairs(b0, delta, n_series, seed, law_b0, substeps)
    lr = (stationary_log_density(b, x0, law_b)
          - stationary_log_density(b0, x0, law_b0)
          + _pair_log_densities(b, delta, x0, x1, model)
          - _pair_log_densities(b0, delta, x0, x1, model))
    L = np.exp(lr)
    return MCValue(float(np.mean(L)),
                   stderr=float(np.std(L, ddof=1) / math.sqrt(n_series)))


@dataclass(frozen=True)
class SqrtLikelihoodReport:
    """Mean sqrt-likelihood-ratio curve; non-increasing for exact densities.

    E_{b0}[sqrt(L_n(b))] is the Hellinger affinity of the first n
    transitions, which cannot grow with n. `diff_means` holds paired
    mean differences between consecutive sample sizes with their stderrs.
    """

    ns: tuple[int, ...]
    means: tuple[float, ...]
    stderrs: tuple[float, ...]
    diff_means: tuple[float, ...]
    diff_stderrs: tuple[float, ...]

    def is_nonincreasing(self, n_sigma: float = 3.0) -> bool:
        return all(d <= n_sigma * s + 1e-12
                   for d, s in zip(self.diff_means, self.diff_stderrs))


def sqrt_likelihood_curve(b: DriftSpec, b0: DriftSpec, delta: float,
                          n_list: Sequence[int] = (1, 2, 4, 8),
                          replications: int = 200, seed: int = 0,
                          model: TransitionModel | None = None,
                          law_b: StationaryLaw | None = None,
                          law_b0: StationaryLaw | None = None
                          ) -> SqrtLikelihoodReport:
    """Averaged sqrt(L_n(b)) over fresh series from b0 at each n."""
    ns = tuple(sorted(int(n) for n in n_list))
    if ns[0] < 1:
        raise ValueError("sample sizes must be >= 1")
    model = model or TransitionModel(method="exact_ou")
    law_b = _law_for(b, law_b, None)
    law_b0 = _law_for(b0, law_b0, None)
    n_max = ns[-1]
    vals = np.empty((replications, len(ns)))
    for r, rep_seed in enumerate(_replication_seeds(seed, replications)):
        series = simulate_series(b0, delta, n_max, seed=int(rep_seed),
                                 law=law_b0)
        states = series.states
        xs, ys = states[:-1], states[1:]
        gaps = (_pair_log_densities(b, delta, xs, ys, model)
                - _pair_log_densities(b0, delta, xs, ys, model))
        head = (float(stationary_log_density(b, states[:1], law_b)[0])
                - float(stationary_log_density(b0, states[:1], law_b0)[0]))
        cum = head + np.cumsum(gaps)
        for k, n in enumerate(ns):
            vals[r, k] = math.exp(0.5 * cum[n - 1])
    means = vals.mean(axis=0)
    stderrs = vals.std(axis=0, ddof=1) / math.sqrt(replications)
    diffs = np.diff(vals, axis=1)
    dmeans = diffs.mean(axis=0)
    dse = diffs.std(axis=0, ddof=1) / math.sqrt(replications)
    return SqrtLikelihoodReport(
        ns=ns, means=tuple(float(v) for v in means),
        stderrs=tuple(float(v) for v in stderrs),
        diff_means=tuple(float(v) for v in dmeans),
        diff_stderrs=tuple(float(v) for v in dse))
