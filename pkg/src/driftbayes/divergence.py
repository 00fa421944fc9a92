"""Information distances between drifts under the data-generating law.

For drifts b and b0 with stationary laws pi_b, pi_b0 and one observation
gap delta, the quantities of interest are

  l2_mu        = { sum_i int (b_i - b0_i)^2 dpi_b0 }^{1/2},
  kl_invariant = K(pi_b0, pi_b) = int pi_b0 log(pi_b0 / pi_b),
  kl_path      = K of the joint law of (X_0, X_delta) under b0 vs b,
  kl_transition= int pi_b0(x) int p_b0(D,x,y) log(p_b0/p_b)(D,x,y) dy dx.

kl_path obeys the exact identity kl_invariant + (delta/2) l2_mu^2 and is
always computed from it; an optional Monte-Carlo cross-check accumulates
the pathwise log-ratio along simulated paths and must agree within noise.
The one-step transition KL is bounded by kl_path - kl_invariant, i.e. by
(delta/2) l2_mu^2, which the test suite asserts as a property.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .drift import (
    DriftClassError,
    DriftSpec,
    OUForm,
    StationaryLaw,
    sample_stationary,
    stationary_density_1d,
    stationary_density_potential,
    stationary_log_density,
)
from .quadrature import QuadratureConfig, gauss_hermite, tensor_simpson_doubling
from .simulate import brownian_bundle, exact_linear_step
from .transition import (
    MCValue,
    PrecisionWarning,
    TransitionModel,
    exact_ou_log_density,
    euler_gaussian_log_density,
)


def _law_for(spec: DriftSpec, law: StationaryLaw | None,
             config: QuadratureConfig | None) -> StationaryLaw | None:
    """Build a stationary law when one is needed and not supplied."""
    if law is not None or isinstance(spec.form, OUForm):
        return law
    if spec.dim == 1:
        return stationary_density_1d(spec, config)
    if spec.has_potential():
        return stationary_density_potential(spec, config)
    raise DriftClassError("no stationary law available for this drift; "
                          "pass one explicitly")


def _half_width(law: StationaryLaw | None, spec: DriftSpec,
                config: QuadratureConfig | None) -> float:
    if config is not None and config.half_width is not None:
        return config.half_width
    if law is not None:
        return law.half_width
    from .drift import default_half_width
    return default_half_width(spec)


def _stationary_draw(spec: DriftSpec, law: StationaryLaw | None, n: int,
                     seed_child: np.random.SeedSequence) -> np.ndarray:
    if isinstance(spec.form, OUForm):
        rng = np.random.default_rng(seed_child)
        sd = math.sqrt(0.5 / spec.form.beta)
        return rng.standard_normal((n, spec.dim)) * sd
    if law is None:
        raise DriftClassError("sampling the stationary law needs a law object")
    return sample_stationary(spec, law, n, int(seed_child.generate_state(1)[0]))


def l2_mu_distance(b: DriftSpec, b0: DriftSpec,
                   law0: StationaryLaw | None = None,
                   config: QuadratureConfig | None = None,
                   mc_samples: int = 200_000, seed: int = 0) -> MCValue:
    """L2(pi_b0) distance between drifts; root of the sum over components.

    Quadrature for d <= 3, stationary-sample Monte Carlo (with standard
    error on the squared distance, propagated to the root) above.
    """
    if b.dim != b0.dim:
        raise ValueError("drifts must share a dimension")
    law0 = _law_for(b0, law0, config)
    cfg = config or QuadratureConfig()

    def sq_integrand(pts: np.ndarray) -> np.ndarray:
        diff = b.drift_values(pts) - b0.drift_values(pts)
        return (np.sum(diff * diff, axis=1)
                * np.exp(stationary_log_density(b0, pts, law0)))

    if b.dim <= 3:
        L = _half_width(law0, b0, config)
        val = tensor_simpson_doubling(sq_integrand, L, b.dim,
                                      cfg.with_half_width(L), "l2_mu")
        return MCValue(math.sqrt(max(val, 0.0)))

    ss = np.random.SeedSequence(seed)
    x = _stationary_draw(b0, law0, mc_samples, ss)
    diff = b.drift_values(x) - b0.drift_values(x)
    sq = np.sum(diff * diff, axis=1)
    mean = float(np.mean(sq))
    se_sq = float(np.std(sq, ddof=1) / math.sqrt(sq.size))
    root = math.sqrt(max(mean, 0.0))
    se = se_sq / (2.0 * root) if root > 0 else math.sqrt(se_sq)
    return MCValue(root, stderr=se)


def kl_invariant(b: DriftSpec, b0: DriftSpec,
                 law_b: StationaryLaw | None = None,
                 law_b0: StationaryLaw | None = None,
                 config: QuadratureConfig | None = None) -> MCValue:
    """K(pi_b0, pi_b) = int pi_b0 (log pi_b0 - log pi_b), clamped at zero.

    A negative quadrature value (only possible through discretization
    error) is clamped to 0 and the clamp magnitude reported in `notes`.
    """
    if b.dim != b0.dim:
        raise ValueError("drifts must share a dimension")
    law_b = _law_for(b, law_b, config)
    law_b0 = _law_for(b0, law_b0, config)
    cfg = config or QuadratureConfig()

    def integrand(pts: np.ndarray) -> np.ndarray:
        log0 = stationary_log_density(b0, pts, law_b0)
        logb = stationary_log_density(b, pts, law_b)
        return np.exp(log0) * (log0 - logb)

    if b.dim > 3:
        raise DriftClassError("kl_invariant quadrature limited to d <= 3")
    L = _half_width(law_b0, b0, config)
    val = tensor_simpson_doubling(integrand, L, b.dim,
                                  cfg.with_half_width(L), "kl_invariant")
    notes = ()
    if val < 0.0:
        notes = (f"clamped negative quadrature value {val:.3e} to 0",)
        val = 0.0
    return MCValue(val, notes=notes)


def kl_path(b: DriftSpec, b0: DriftSpec,
            law_b0: StationaryLaw | None = None, delta: float = 0.5,
            config: QuadratureConfig | None = None,
            law_b: StationaryLaw | None = None) -> MCValue:
    """Joint-observation KL, from the identity kl_invariant + (D/2) l2^2."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    ki = kl_invariant(b, b0, law_b=law_b, law_b0=law_b0, config=config)
    l2 = l2_mu_distance(b, b0, law0=law_b0, config=config)
    return MCValue(float(ki) + 0.5 * delta * float(l2) ** 2, notes=ki.notes)


# ---------------------------------------------------------------------------
# transition KL
# ---------------------------------------------------------------------------

def kl_transition_exact_linear(b: DriftSpec, b0: DriftSpec,
                               delta: float, quad_nodes: int = 201) -> float:
    """Transition KL for a pair of linear drifts by Gaussian quadrature.

    Per start point x the transition KL is the closed-form Gaussian KL
    between N(x phi0, v0) and N(x phi, v); the outer integral over
    pi_b0 = N(0, 1/(2 beta0)) uses Gauss-Hermite nodes. Serves as the
    oracle for the Monte-Carlo estimator.
    """
    if not (isinstance(b.form, OUForm) and isinstance(b0.form, OUForm)):
        raise DriftClassError("exact transition KL needs two linear drifts")
    phi0, sd0 = exact_linear_step(b0.form.beta, delta)
    phi1, sd1 = exact_linear_step(b.form.beta, delta)
    v0, v1 = sd0 ** 2, sd1 ** 2
    t, w = gauss_hermite(quad_nodes)
    x = t * math.sqrt(0.5 / b0.form.beta)
    per_x = (math.log(sd1 / sd0) + (v0 + (x * (phi0 - phi1)) ** 2) / (2.0 * v1)
             - 0.5)
    return float(b.dim * (w @ per_x))


def kl_transition(b: DriftSpec, b0: DriftSpec,
                  law_b0: StationaryLaw | None = None, delta: float = 0.5,
                  model: TransitionModel | None = None, n_outer: int = 4000,
                  n_inner: int = 4, seed: int = 0) -> MCValue:
    """Double Monte-Carlo estimate of the one-step transition KL.

    Outer draws x ~ pi_b0, inner draws y ~ p_b0(delta, x, .), averaging
    log p_b0 - log p_b. The density surrogate comes from `model` (exact
    for linear pairs, one-step Gaussian otherwise); with the one-step
    Gaussian the estimate is the KL between the surrogates, exact in the
    delta -> 0 limit. A negative estimate beyond 3 standard errors raises
    a PrecisionWarning since the true value is non-negative.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    both_linear = isinstance(b.form, OUForm) and isinstance(b0.form, OUForm)
    if model is None:
        model = TransitionModel(
            method="exact_ou" if both_linear else "euler_gaussian")
    if model.method not in ("exact_ou", "euler_gaussian"):
        raise ValueError("kl_transition supports exact_ou and euler_gaussian "
                         "density surrogates")
    if model.method == "exact_ou" and not both_linear:
        raise DriftClassError("exact_ou surrogate needs two linear drifts")
    law_b0 = _law_for(b0, law_b0, None)

    ss_x, ss_y = np.random.SeedSequence(seed).spawn(2)
    x = _stationary_draw(b0, law_b0, n_outer, ss_x)
    rng = np.random.default_rng(ss_y)
    noise = rng.standard_normal((n_outer, n_inner, b.dim))

    if model.method == "exact_ou":
        phi0, sd0 = exact_linear_step(b0.form.beta, delta)
        y = phi0 * x[:, None, :] + sd0 * noise
        logdens0 = exact_ou_log_density
        logdens1 = exact_ou_log_density
    else:
        mean0 = x + b0.drift_values(x) * delta
        y = mean0[:, None, :] + math.sqrt(delta) * noise
        logdens0 = euler_gaussian_log_density
        logdens1 = euler_gaussian_log_density

    x_rep = np.repeat(x, n_inner, axis=0)
    y_flat = y.reshape(-1, b.dim)
    ratio = (logdens0(b0, delta, x_rep, y_flat)
             - logdens1(b, delta, x_rep, y_flat)).reshape(n_outer, n_inner)
    per_x = ratio.mean(axis=1)
    est = float(per_x.mean())
    se = float(per_x.std(ddof=1) / math.sqrt(n_outer))
    notes = []
    if est < -3.0 * se:
        notes.append(f"estimate {est:.3e} negative beyond 3 standard errors; "
                     "density surrogate is likely biased")
        warnings.warn(notes[-1], PrecisionWarning, stacklevel=2)
    return MCValue(est, stderr=se, notes=notes)


def kl_path_mc(b: DriftSpec, b0: DriftSpec,
               law_b0: StationaryLaw | None = None, delta: float = 0.5,
               n_paths: int = 20_000, substeps: int = 64,
               seed: int = 0,
               law_b: StationaryLaw | None = None) -> MCValue:
    """Monte-Carlo cross-check of the kl_path identity.

    Simulates paths under b0 from the stationary law and accumulates the
    pathwise log change of measure

        log(pi_b0/pi_b)(X_0)
        + sum_j (b0 - b)(Y_j) . dX_j - (|b0|^2 - |b|^2)(Y_j) dt / 2

    with the left-endpoint rule on an Euler path. Its mean is kl_path up
    to discretization bias O(delta/substeps).
    """
    law_b0 = _law_for(b0, law_b0, None)
    law_b = _law_for(b, law_b, None)
    ss_x, ss_w = np.random.SeedSequence(seed).spawn(2)
    x0 = _stationary_draw(b0, law_b0, n_paths, ss_x)
    bundle = brownian_bundle(n_paths, substeps, b.dim, delta, ss_w)
    dt = delta / substeps

    acc = (stationary_log_density(b0, x0, law_b0)
           - stationary_log_density(b, x0, law_b))
    y = x0.copy()
    for j in range(substeps):
        v0 = b0.drift_values(y)
        v1 = b.drift_values(y)
        dx = v0 * dt + bundle[:, j]
        diff = v0 - v1
        acc += np.einsum("nd,nd->n", diff, dx)
        acc -= 0.5 * dt * (np.einsum("nd,nd->n", v0, v0)
                           - np.einsum("nd,nd->n", v1, v1))
        y = y + dx
    est = float(np.mean(acc))
    se = float(np.std(acc, ddof=1) / math.sqrt(n_paths))
    return MCValue(est, stderr=se)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DivergenceReport:
    """All divergences for one (b, b0, delta) with estimator errors.

    kl_path always equals kl_invariant + (delta/2) l2_mu^2 exactly, by
    construction.
    """

    delta: float
    l2_mu: float
    kl_invariant: float
    kl_path: float
    kl_transition: float
    kl_transition_stderr: float
    l2_mu_stderr: float | None = None
    kl_path_mc: float | None = None
    kl_path_mc_stderr: float | None = None
    notes: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        doc = {
            "delta": self.delta,
            "l2_mu": self.l2_mu,
            "kl_invariant": self.kl_invariant,
            "kl_path": self.kl_path,
            "kl_transition": self.kl_transition,
            "kl_transition_stderr": self.kl_transition_stderr,
        }
        if self.l2_mu_stderr is not None:
            doc["l2_mu_stderr"] = self.l2_mu_stderr
        if self.kl_path_mc is not None:
            doc["kl_path_mc"] = self.kl_path_mc
            doc["kl_path_mc_stderr"] = self.kl_path_mc_stderr
        if self.notes:
            doc["notes"] = list(self.notes)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def divergence_report(b: DriftSpec, b0: DriftSpec, delta: float,
                      law_b: StationaryLaw | None = None,
                      law_b0: StationaryLaw | None = None,
                      config: QuadratureConfig | None = None,
                      n_outer: int = 4000, n_inner: int = 4, seed: int = 0,
                      with_path_mc: bool = False) -> DivergenceReport:
    """Assemble every divergence for one pair; kl_path from the identity."""
    law_b = _law_for(b, law_b, config)
    law_b0 = _law_for(b0, law_b0, config)
    l2 = l2_mu_distance(b, b0, law0=law_b0, config=config)
    ki = kl_invariant(b, b0, law_b=law_b, law_b0=law_b0, config=config)
    kp = float(ki) + 0.5 * delta * float(l2) ** 2
    kt = kl_transition(b, b0, law_b0=law_b0, delta=delta, n_outer=n_outer,
                       n_inner=n_inner, seed=seed)
    notes = tuple(ki.notes) + tuple(kt.notes)
    mc = mc_se = None
    if with_path_mc:
        pmc = kl_path_mc(b, b0, law_b0=law_b0, delta=delta,
                         seed=seed + 1, law_b=law_b)
        mc, mc_se = float(pmc), pmc.stderr
    return DivergenceReport(
        delta=delta, l2_mu=float(l2), kl_invariant=float(ki), kl_path=kp,
        kl_transition=float(kt), kl_transition_stderr=kt.stderr or 0.0,
        l2_mu_stderr=l2.stderr, kl_path_mc=mc, kl_path_mc_stderr=mc_se,
        notes=notes)


def batch_divergence(manifest: dict | str,
                     seed: int = 0) -> list[DivergenceReport]:
    """Run divergence_report over a JSON manifest of drift pairs.

    Manifest layout: {"delta": D, "pairs": [{"b": <drift json dict>,
    "b0": <drift json dict>}, ...], "with_path_mc": bool (optional)}.
    """
    if isinstance(manifest, str):
        manifest = json.loads(manifest)
    delta = float(manifest["delta"])
    with_mc = bool(manifest.get("with_path_mc", False))
    reports = []
    children = np.random.SeedSequence(seed).spawn(len(manifest["pairs"]))
    for child, pair in zip(children, manifest["pairs"]):
        b = DriftSpec.from_json_dict(pair["b"])
        b0 = DriftSpec.from_json_dict(pair["b0"])
        reports.append(divergence_report(
            b, b0, delta, seed=int(child.generate_state(1)[0]),
            with_path_mc=with_mc))
    return reports
