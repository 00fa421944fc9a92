"""Divergences: L2(pi_b0), invariant KL, path KL identity, transition KL.

Oracles for the pair b = ou(1.2), b0 = ou(1.0), delta = 0.5, all from
Gaussian closed forms evaluated independently and frozen:

  l2_mu        = 0.2 sqrt(0.5)                    = 0.14142135623730953
  kl_invariant = (1.2 - 1 - ln 1.2)/2             = 0.008839221603022682
  kl_path      = kl_invariant + 0.25 l2^2         = 0.013839221603022683
  kl_transition (exact Gaussian-KL integral)      = 0.00458957607302193

and the Gaussian KL in the reversed direction is 0.007827445063643981,
which witnesses asymmetry.
"""

import json

import numpy as np
import pytest

import driftbayes as db
from driftbayes.divergence import (
    batch_divergence,
    divergence_report,
    kl_invariant,
    kl_path,
    kl_path_mc,
    kl_transition,
    kl_transition_exact_linear,
    l2_mu_distance,
)

B0 = db.ou_spec(1.0)
B = db.ou_spec(1.2)

L2_ORACLE = 0.14142135623730953
KLI_ORACLE = 0.008839221603022682
KLP_ORACLE = 0.013839221603022683
KT_ORACLE = 0.00458957607302193


def test_l2_distance_matches_gaussian_moment():
    assert float(l2_mu_distance(B, B0)) == pytest.approx(L2_ORACLE, abs=1e-6)


def test_l2_distance_of_drift_with_itself_is_zero():
    assert float(l2_mu_distance(B0, B0)) == 0.0


def test_l2_distance_2d_reduces_to_differing_component():
    # potential drifts equal in radial profile give zero; perturbing only
    # the linear rate keeps the distance equal to the 2d Gaussian moment
    a = db.DriftSpec(dim=2,
                     form=db.PotentialForm(db.scaled_identity_profile([1.0])),
                     growth_K=1.0, dissipativity=db.Dissipativity(0.5, 1.0))
    same = db.ou_spec(1.0, dim=2)
    assert float(l2_mu_distance(a, same,
                                config=db.QuadratureConfig(half_width=8.0))
                 ) == pytest.approx(0.0, abs=1e-9)
    # sum-of-components form: ou(1.2) vs ou(1.0) in d=2 doubles the square
    d2 = float(l2_mu_distance(db.ou_spec(1.2, dim=2), db.ou_spec(1.0, dim=2),
                              config=db.QuadratureConfig(half_width=8.0)))
    assert d2 == pytest.approx(np.sqrt(2.0) * L2_ORACLE, rel=1e-6)


def test_l2_distance_high_dim_monte_carlo():
    a = db.ou_spec(1.2, dim=4)
    c = db.ou_spec(1.0, dim=4)
    d = l2_mu_distance(a, c, mc_samples=100_000, seed=3)
    assert d.stderr is not None
    assert float(d) == pytest.approx(2.0 * L2_ORACLE, rel=0.02)


def test_kl_invariant_matches_gaussian_closed_form():
    assert float(kl_invariant(B, B0)) == pytest.approx(KLI_ORACLE, abs=1e-6)


def test_kl_invariant_is_asymmetric():
    fwd = float(kl_invariant(B, B0))
    rev = float(kl_invariant(B0, B))
    assert rev == pytest.approx(0.007827445063643981, abs=1e-6)
    assert fwd != pytest.approx(rev, rel=1e-3)


def test_kl_invariant_self_zero():
    assert float(kl_invariant(B0, B0)) == pytest.approx(0.0, abs=1e-12)


def test_kl_path_identity_value():
    kp = kl_path(B, B0, delta=0.5)
    assert float(kp) == pytest.approx(KLP_ORACLE, abs=2e-5)
    # delta -> 0 limit is the invariant KL
    tiny = kl_path(B, B0, delta=1e-9)
    assert float(tiny) == pytest.approx(KLI_ORACLE, abs=1e-7)
    assert float(kl_path(B0, B0, delta=0.5)) == pytest.approx(0.0, abs=1e-12)


def test_kl_transition_exact_oracle_value_and_bound():
    kt = kl_transition_exact_linear(B, B0, delta=0.5)
    assert kt == pytest.approx(KT_ORACLE, rel=1e-10)
    # one-step KL never exceeds (delta/2) l2^2
    assert kt <= 0.25 * L2_ORACLE ** 2 + 1e-12


def test_kl_transition_mc_matches_exact():
    est = kl_transition(B, B0, delta=0.5, n_outer=8000, n_inner=4, seed=11)
    assert est.stderr is not None and est.stderr > 0
    assert abs(float(est) - KT_ORACLE) <= 3.0 * est.stderr


def test_kl_transition_self_is_exactly_zero():
    est = kl_transition(B0, B0, delta=0.5, n_outer=500, seed=1)
    assert float(est) == 0.0 and est.stderr == 0.0


def test_kl_transition_euler_gaussian_surrogate_close_at_small_delta():
    # surrogate KL approaches (delta/2) l2^2 as delta -> 0
    delta = 0.05
    est = kl_transition(B, B0, delta=delta, n_outer=20_000, n_inner=4,
                        seed=5, model=db.TransitionModel(
                            method="euler_gaussian"))
    target = 0.5 * delta * L2_ORACLE ** 2
    assert float(est) == pytest.approx(target, rel=0.15)


def test_kl_transition_inequality_on_random_pairs():
    # kl_transition <= (delta/2) l2^2 + 3 se on several linear pairs
    rng = np.random.default_rng(77)
    for _ in range(6):
        b0 = db.ou_spec(float(rng.uniform(0.5, 2.0)))
        b = db.ou_spec(float(rng.uniform(0.5, 2.0)))
        delta = float(rng.uniform(0.25, 1.0))
        est = kl_transition(b, b0, delta=delta, n_outer=4000, seed=9)
        bound = 0.5 * delta * float(l2_mu_distance(b, b0)) ** 2
        assert float(est) <= bound + 3.0 * (est.stderr or 0.0) + 1e-12


def test_kl_path_mc_cross_check_agrees_with_identity():
    mc = kl_path_mc(B, B0, delta=0.5, n_paths=40_000, substeps=64, seed=21)
    assert abs(float(mc) - KLP_ORACLE) <= 3.0 * mc.stderr + 2e-4


def test_divergence_report_identity_and_json():
    rep = divergence_report(B, B0, 0.5, seed=2, with_path_mc=True)
    assert rep.kl_path == pytest.approx(
        rep.kl_invariant + 0.25 * rep.l2_mu ** 2, abs=1e-9)
    assert rep.kl_transition == pytest.approx(KT_ORACLE,
                                              abs=3 * rep.kl_transition_stderr)
    assert abs(rep.kl_path_mc - rep.kl_path) <= 3 * rep.kl_path_mc_stderr + 2e-4
    doc = json.loads(rep.to_json())
    assert set(doc) >= {"delta", "l2_mu", "kl_invariant", "kl_path",
                        "kl_transition", "kl_transition_stderr"}


def test_batch_divergence_manifest():
    manifest = {
        "delta": 0.5,
        "pairs": [
            {"b": db.ou_spec(1.2).to_json_dict(),
             "b0": db.ou_spec(1.0).to_json_dict()},
            {"b": db.ou_spec(0.8).to_json_dict(),
             "b0": db.ou_spec(1.0).to_json_dict()},
        ],
    }
    reports = batch_divergence(json.dumps(manifest), seed=4)
    assert len(reports) == 2
    assert reports[0].l2_mu == pytest.approx(L2_ORACLE, abs=1e-6)
    for rep in reports:
        assert rep.kl_path == pytest.approx(
            rep.kl_invariant + 0.25 * rep.l2_mu ** 2, abs=1e-9)


def test_nonlinear_drift_divergences_run():
    # tanh drift vs linear base: no closed form, but the identity and
    # non-negativity still hold
    b = db.DriftSpec(dim=1, form=db.Parametric1DForm("linear_plus_tanh",
                                                     (1.0, 0.3)),
                     growth_K=1.3, dissipativity=db.Dissipativity(0.5, 1.0))
    l2 = float(l2_mu_distance(b, B0))
    ki = float(kl_invariant(b, B0))
    assert l2 > 0 and ki >= 0
    kp = float(kl_path(b, B0, delta=0.5))
    assert kp == pytest.approx(ki + 0.25 * l2 ** 2, abs=1e-9)
