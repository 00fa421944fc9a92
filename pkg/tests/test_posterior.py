"""Posterior weights, neighborhood masses, and likelihood-ratio audits.

Oracles: a straight-line recomputation of the ten Gaussian factors of a
fixed synthetic series (frozen alongside), the mean-one property of
likelihood ratios under the data law, closed-form two-hypothesis Bayes
weights, and the monotone Hellinger-affinity property of sqrt likelihoods.
"""

import math
import warnings

import numpy as np
import pytest

import driftbayes as db
from driftbayes import (
    DriftSpec,
    Dissipativity,
    Parametric1DForm,
    PrecisionWarning,
    TransitionModel,
    ou_spec,
    simulate_series,
    uniform_probe,
)
from driftbayes.drift import DriftEvaluationError, register_parametric_1d
from driftbayes.prior import PriorNet, build_net, linear_family
from driftbayes.posterior import (
    ConsistencyCurve,
    L2Ball,
    PosteriorResult,
    SqrtLikelihoodReport,
    WeakNeighborhood,
    compute_posterior,
    consistency_curve,
    likelihood_mean_one_check,
    log_likelihood_ratio,
    neighborhood_complement_mass,
    sqrt_likelihood_curve,
)
from driftbayes.posterior import _replication_seeds
from driftbayes.simulate import ObservationSeries

DELTA = 0.5


def two_atom_net(beta_a=1.0, beta_b=2.0, w_a=0.5):
    atoms = [ou_spec(beta_a), ou_spec(beta_b)]
    return PriorNet(atoms=atoms, weights=np.array([w_a, 1.0 - w_a]),
                    provenance=[(1, 1, 0), (1, 1, 1)],
                    atom_params=[(beta_a,), (beta_b,)],
                    eps_schedule=(1.0,), q1=(1.0,), q2=(1.0,),
                    truncated_mass=0.0, renormalized=False,
                    family_name="linear")


# ---------------------------------------------------------------------------
# log likelihood ratio
# ---------------------------------------------------------------------------

def test_log_ratio_matches_straight_line_recomputation():
    series = simulate_series(ou_spec(1.0), DELTA, 10, seed=7)
    got = log_likelihood_ratio(ou_spec(1.2), ou_spec(1.0), series)

    def logp(beta, x, y):
        phi = math.exp(-beta * DELTA)
        var = (1.0 - phi * phi) / (2.0 * beta)
        return -0.5 * (y - phi * x) ** 2 / var \
            - 0.5 * math.log(2.0 * math.pi * var)

    def logpi(beta, x):
        return -beta * x * x + 0.5 * math.log(beta / math.pi)

    s = series.states[:, 0]
    brute = logpi(1.2, s[0]) - logpi(1.0, s[0]) + sum(
        logp(1.2, s[i], s[i + 1]) - logp(1.0, s[i], s[i + 1])
        for i in range(10))
    assert got == pytest.approx(brute, abs=1e-12)
    assert got == pytest.approx(-0.9180455976647253, abs=1e-9)


def test_log_ratio_self_is_exact_zero():
    series = simulate_series(ou_spec(1.0), DELTA, 20, seed=1)
    assert log_likelihood_ratio(ou_spec(1.0), ou_spec(1.0), series) == 0.0


def test_log_ratio_empty_series_is_zero():
    series = ObservationSeries(delta=DELTA, states=np.zeros((1, 1)))
    assert log_likelihood_ratio(ou_spec(1.2), ou_spec(1.0), series) == 0.0


def test_log_ratio_mean_one():
    check = likelihood_mean_one_check(ou_spec(1.3), ou_spec(1.0), DELTA,
                                      n_series=100_000, seed=2)
    assert abs(float(check) - 1.0) <= 3.0 * check.stderr


def test_log_ratio_order_sensitivity():
    states = np.array([[0.0], [1.0], [-0.5], [0.3]])
    orig = ObservationSeries(delta=DELTA, states=states)
    permuted = ObservationSeries(delta=DELTA, states=states[[0, 2, 1, 3]])
    a = log_likelihood_ratio(ou_spec(1.2), ou_spec(1.0), orig)
    b = log_likelihood_ratio(ou_spec(1.2), ou_spec(1.0), permuted)
    assert abs(a - b) > 1e-6


def test_log_ratio_names_failing_gap():
    register_parametric_1d(
        "test_post_nan", lambda p, x: np.where(np.abs(x) > 1.0, np.nan, -x))
    bad = DriftSpec(dim=1, form=Parametric1DForm("test_post_nan", ()),
                    growth_K=1.0,
                    dissipativity=Dissipativity(r=0.5, M=1.0, alpha=1.0))
    states = np.array([[0.0], [0.5], [2.0], [0.1]])
    series = ObservationSeries(delta=DELTA, states=states)
    model = TransitionModel(method="euler_gaussian")
    with pytest.raises(DriftEvaluationError, match="gap 2"):
        log_likelihood_ratio(bad, ou_spec(1.0), series, model)


# ---------------------------------------------------------------------------
# posterior computation
# ---------------------------------------------------------------------------

def test_posterior_single_atom():
    fam = linear_family(0.9, 1.1)
    net = build_net(fam, m_max=1, l_max=1, eps_schedule=(10.0,), seed=0)
    series = simulate_series(ou_spec(1.0), DELTA, 20, seed=4)
    post = compute_posterior(net, series)
    assert post.weights.tolist() == [1.0]


def test_posterior_two_atom_picks_truth():
    net = two_atom_net(1.0, 2.0)
    series = simulate_series(ou_spec(1.0), DELTA, 500, seed=3)
    post = compute_posterior(net, series)
    assert post.weights[0] > 0.99
    assert post.n_used == 500


def test_posterior_reference_invariance():
    net = two_atom_net(1.0, 2.0)
    series = simulate_series(ou_spec(1.0), DELTA, 100, seed=9)
    p_self = compute_posterior(net, series)
    p_atom2 = compute_posterior(net, series, b0_for_ratio=net.atoms[1])
    p_ext = compute_posterior(net, series, b0_for_ratio=ou_spec(0.7))
    assert np.max(np.abs(p_self.weights - p_atom2.weights)) < 1e-10
    assert np.max(np.abs(p_self.weights - p_ext.weights)) < 1e-10


def test_posterior_prior_proportionality():
    # posterior odds = prior odds times the shared likelihood ratio
    series = simulate_series(ou_spec(1.0), DELTA, 50, seed=12)
    p_even = compute_posterior(two_atom_net(1.0, 2.0, w_a=0.5), series)
    p_tilt = compute_posterior(two_atom_net(1.0, 2.0, w_a=0.2), series)
    rescaled = p_even.weights * np.array([0.2, 0.8]) / 0.5
    rescaled /= rescaled.sum()
    assert np.max(np.abs(rescaled - p_tilt.weights)) < 1e-12


def test_posterior_drops_failing_atom():
    register_parametric_1d(
        "test_post_nan2", lambda p, x: np.where(np.abs(x) > 0.2, np.nan, -x))
    bad = DriftSpec(dim=1, form=Parametric1DForm("test_post_nan2", ()),
                    growth_K=1.0,
                    dissipativity=Dissipativity(r=0.5, M=1.0, alpha=1.0))
    net = PriorNet(atoms=[ou_spec(1.0), bad],
                   weights=np.array([0.5, 0.5]),
                   provenance=[(1, 1, 0), (1, 1, 1)],
                   atom_params=[(1.0,), (0.0,)],
                   eps_schedule=(1.0,), q1=(1.0,), q2=(1.0,),
                   truncated_mass=0.0, renormalized=False,
                   family_name="mixed")
    series = simulate_series(ou_spec(1.0), DELTA, 30, seed=2)
    model = TransitionModel(method="euler_gaussian")
    with pytest.warns(PrecisionWarning, match="atom 1 dropped"):
        post = compute_posterior(net, series, model)
    assert post.weights[1] == 0.0
    assert post.weights[0] == 1.0
    assert post.dropped_atoms == (1,)


def test_posterior_all_atoms_failing_is_fatal():
    register_parametric_1d("test_post_nan3", lambda p, x: np.full_like(x, np.nan))
    bad = DriftSpec(dim=1, form=Parametric1DForm("test_post_nan3", ()),
                    growth_K=1.0,
                    dissipativity=Dissipativity(r=0.5, M=1.0, alpha=1.0))
    net = PriorNet(atoms=[bad], weights=np.array([1.0]),
                   provenance=[(1, 1, 0)], atom_params=[(0.0,)],
                   eps_schedule=(1.0,), q1=(1.0,), q2=(1.0,),
                   truncated_mass=0.0, renormalized=False,
                   family_name="broken")
    series = simulate_series(ou_spec(1.0), DELTA, 5, seed=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ValueError, match="every atom"):
            compute_posterior(net, series,
                              TransitionModel(method="euler_gaussian"))


def test_posterior_log_domain_safety_large_n():
    net = PriorNet(atoms=[ou_spec(0.5), ou_spec(1.0), ou_spec(2.0)],
                   weights=np.array([0.25, 0.5, 0.25]),
                   provenance=[(1, 1, 0), (1, 1, 1), (1, 1, 2)],
                   atom_params=[(0.5,), (1.0,), (2.0,)],
                   eps_schedule=(1.0,), q1=(1.0,), q2=(1.0,),
                   truncated_mass=0.0, renormalized=False,
                   family_name="linear")
    series = simulate_series(ou_spec(1.0), DELTA, 10_000, seed=5)
    post = compute_posterior(net, series)
    assert np.all(np.isfinite(post.weights))
    assert post.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert post.weights[1] > 0.999


def test_posterior_mc_kde_common_random_numbers():
    # identical atoms under the sampled-density model keep equal weights
    # because both see the same endpoint clouds
    net = two_atom_net(1.0, 1.0)
    series = simulate_series(ou_spec(1.0), DELTA, 3, seed=8)
    model = TransitionModel(method="mc_kde", n_paths=2000, seed=42)
    post = compute_posterior(net, series, model)
    assert post.weights[0] == pytest.approx(0.5, abs=1e-15)


def test_posterior_exports():
    net = two_atom_net(1.0, 2.0)
    series = simulate_series(ou_spec(1.0), DELTA, 50, seed=6)
    post = compute_posterior(net, series)
    csv_text = post.to_csv()
    lines = csv_text.strip().split("\n")
    assert lines[0] == "atom,prior,log_lik_ratio,posterior"
    assert len(lines) == 3
    total = sum(float(row.split(",")[3]) for row in lines[1:])
    assert total == pytest.approx(1.0, abs=1e-12)
    # the reference atom's own log ratio is zero
    assert float(lines[1].split(",")[2]) == 0.0
    doc = post.to_json_dict()
    assert set(doc) >= {"net_ref", "log_weights_unnormalized", "weights",
                        "n_used", "model", "reference"}
    assert len(doc["net_ref"]) == 12
    assert doc["model"]["method"] == "exact_ou"


# ---------------------------------------------------------------------------
# neighborhood complement mass
# ---------------------------------------------------------------------------

def test_complement_mass_isolating_ball():
    net = two_atom_net(1.0, 2.0)
    series = simulate_series(ou_spec(1.0), DELTA, 200, seed=10)
    post = compute_posterior(net, series)
    # ou(2) sits at distance 1/sqrt(2) in L2(N(0, 1/2)); radius 0.1
    # isolates the true atom
    cm = neighborhood_complement_mass(post, ou_spec(1.0), L2Ball(radius=0.1))
    assert cm == pytest.approx(1.0 - post.weights[0], abs=1e-12)


def test_complement_mass_zero_when_eps_swallows_all():
    net = two_atom_net(1.0, 2.0)
    series = simulate_series(ou_spec(1.0), DELTA, 50, seed=11)
    post = compute_posterior(net, series)
    probe = uniform_probe(db.test_function("cos", freq=1.0), half_width=2.0,
                          n_nodes=9, epsilon=1.9)
    crit = WeakNeighborhood(probe=probe,
                            model=TransitionModel(method="exact_ou"),
                            delta=DELTA)
    assert neighborhood_complement_mass(post, ou_spec(1.0), crit) == 0.0


def test_weak_criterion_flags_distant_atom():
    net = two_atom_net(1.0, 2.0)
    series = simulate_series(ou_spec(2.0), DELTA, 400, seed=13)
    post = compute_posterior(net, series)
    probe = uniform_probe(db.test_function("cos", freq=1.0), half_width=2.0,
                          n_nodes=9, epsilon=0.01)
    crit = WeakNeighborhood(probe=probe,
                            model=TransitionModel(method="exact_ou"),
                            delta=DELTA)
    # data favor ou(2); only ou(1) lies outside the b0=ou(2) neighborhood
    cm = neighborhood_complement_mass(post, ou_spec(2.0), crit)
    assert cm == pytest.approx(post.weights[0], abs=1e-12)
    assert cm < 0.01


def test_l2ball_validates_radius():
    with pytest.raises(ValueError):
        L2Ball(radius=0.0)


# ---------------------------------------------------------------------------
# consistency curves
# ---------------------------------------------------------------------------

def test_curve_n0_equals_prior_complement():
    net = two_atom_net(1.0, 2.0, w_a=0.3)
    curve = consistency_curve(net, ou_spec(1.0), [0], DELTA,
                              L2Ball(radius=0.1), replications=3, seed=1)
    assert curve.means[0] == pytest.approx(0.7, abs=1e-12)
    assert curve.stderrs[0] < 1e-12


def test_curve_matches_direct_two_atom_bayes():
    net = two_atom_net(1.0, 2.0)
    reps, n = 3, 5
    curve = consistency_curve(net, ou_spec(1.0), [n], DELTA,
                              L2Ball(radius=0.1), replications=reps, seed=21)
    for r, rep_seed in enumerate(_replication_seeds(21, reps)):
        series = simulate_series(ou_spec(1.0), DELTA, n, seed=int(rep_seed))
        lr = log_likelihood_ratio(ou_spec(2.0), ou_spec(1.0), series)
        expected = 0.5 * math.exp(lr) / (0.5 + 0.5 * math.exp(lr))
        assert curve.per_replication[r, 0] == pytest.approx(expected,
                                                            abs=1e-12)


def test_curve_seed_prefix_stability():
    net = two_atom_net(1.0, 2.0)
    one = consistency_curve(net, ou_spec(1.0), [10], DELTA,
                            L2Ball(radius=0.1), replications=1, seed=33)
    two = consistency_curve(net, ou_spec(1.0), [10], DELTA,
                            L2Ball(radius=0.1), replications=2, seed=33)
    assert one.per_replication[0, 0] == two.per_replication[0, 0]


def test_curve_csv_layout():
    net = two_atom_net(1.0, 2.0)
    curve = consistency_curve(net, ou_spec(1.0), [0, 10], DELTA,
                              L2Ball(radius=0.1), replications=2, seed=2)
    lines = curve.to_csv().strip().split("\n")
    assert lines[0] == "n,mass,stderr"
    assert len(lines) == 3
    assert lines[1].startswith("0,")


def test_curve_validation():
    net = two_atom_net(1.0, 2.0)
    with pytest.raises(ValueError):
        consistency_curve(net, ou_spec(1.0), [], DELTA, L2Ball(radius=0.1))
    with pytest.raises(ValueError):
        consistency_curve(net, ou_spec(1.0), [5], DELTA, L2Ball(radius=0.1),
                          replications=0)
    with pytest.raises(ValueError):
        consistency_curve(net, ou_spec(1.0), [-1], DELTA, L2Ball(radius=0.1))


def test_curve_concentrates_with_more_data():
    fam = linear_family(1e-9, 2.0)
    net = build_net(fam, m_max=1, l_max=2, eps_schedule=(0.5, 0.25), seed=0)
    curve = consistency_curve(net, ou_spec(1.0), [10, 400], DELTA,
                              L2Ball(radius=0.3), replications=8, seed=17)
    assert curve.means[1] < curve.means[0]


# ---------------------------------------------------------------------------
# sqrt-likelihood supermartingale property
# ---------------------------------------------------------------------------

def test_sqrt_likelihood_curve_nonincreasing():
    report = sqrt_likelihood_curve(ou_spec(1.5), ou_spec(1.0), DELTA,
                                   n_list=(1, 2, 4, 8), replications=200,
                                   seed=4)
    assert report.is_nonincreasing(3.0)
    assert report.means[0] <= 1.0 + 3.0 * report.stderrs[0]
    assert report.means[-1] < report.means[0]


def test_sqrt_likelihood_self_is_flat_one():
    report = sqrt_likelihood_curve(ou_spec(1.0), ou_spec(1.0), DELTA,
                                   n_list=(1, 4), replications=5, seed=0)
    assert report.means == (1.0, 1.0)
    assert report.stderrs == (0.0, 0.0)
