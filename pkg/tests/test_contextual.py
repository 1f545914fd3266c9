"""Tests for the analyzer-smearing model.

Oracle strategy: the singlet integrand (1 - xy a.b)/4 is linear in a.b, and
averaging a.b over two independent caps factorizes: the azimuthal average
kills the transverse components, leaving E[cos theta_a] E[cos theta_b] (A.B).
For the uniform-on-cap profile cos theta ~ U(1 - eps, 1], so
E[cos theta] = 1 - eps/2 =: kappa, giving the closed forms

    P(x, y | A, B) = eta_a eta_b (1 - xy kappa_a kappa_b (A.B)) / 4
    gap(eps)       = P(+,+|A,A) + P(-,-|A,A) = (eps - eps^2/4) / 2   (eta = 1)

These were derived by hand and are frozen here; the module never computes
them.  The gauss profile has no frozen closed form and is checked by the
agreement of the two independent integrators (MC vs product quadrature).
"""

import math

import numpy as np
import pytest

from spcelab.contextual import (
    CapDistribution,
    Estimate,
    ExperimentSetting,
    anti_correlation_gap,
    quadrature_probability,
    sample_cap_direction,
    sample_cap_directions,
    sample_contextual_trial,
    sample_contextual_trials,
    smeared_distribution,
    smeared_probability,
)
from spcelab.directions import Direction, as_direction
from spcelab.errors import ParameterError
from spcelab.quantum import OUTCOME_ORDER, Outcome, build_singlet, outcome_distribution


def kappa(eps):
    return 1.0 - eps / 2.0


def closed_form(eps_a, eps_b, dot_ab, x, y, eta_a=1.0, eta_b=1.0):
    return eta_a * eta_b * (1.0 - x * y * kappa(eps_a) * kappa(eps_b) * dot_ab) / 4.0


def make_setting(angle_a, angle_b, eps, eta_a=1.0, eta_b=1.0, profile="uniform", sigma=None):
    return ExperimentSetting(
        cap_a=CapDistribution(as_direction(angle_a), eps, profile, sigma),
        cap_b=CapDistribution(as_direction(angle_b), eps, profile, sigma),
        eta_a=eta_a,
        eta_b=eta_b,
    )


def test_cap_validation():
    c = as_direction(0.0)
    with pytest.raises(ParameterError):
        CapDistribution(c, 0.0)
    with pytest.raises(ParameterError):
        CapDistribution(c, 2.0)
    with pytest.raises(ParameterError):
        CapDistribution(c, 0.1, "triangle")
    with pytest.raises(ParameterError):
        CapDistribution(c, 0.1, "gauss")  # sigma missing
    with pytest.raises(ParameterError):
        CapDistribution(c, 0.1, "uniform", sigma=0.2)
    with pytest.raises(ParameterError):
        ExperimentSetting(CapDistribution(c, 0.1), CapDistribution(c, 0.1), eta_a=0.0)
    with pytest.raises(ParameterError):
        ExperimentSetting(CapDistribution(c, 0.1), CapDistribution(c, 0.1), eta_b=1.5)


@pytest.mark.parametrize("profile,sigma", [("uniform", None), ("gauss", 0.1)])
def test_samples_stay_in_cap_and_unit(profile, sigma):
    cap = CapDistribution(as_direction(37.0), 0.2, profile, sigma)
    d = sample_cap_directions(cap, 20_000, np.random.default_rng(20260401))
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12)
    assert np.all(cap.contains(d))


def test_polar_inverse_cdf_range():
    cap_u = CapDistribution(as_direction(0.0), 0.3)
    cap_g = CapDistribution(as_direction(0.0), 0.3, "gauss", 0.2)
    u = np.linspace(0.0, 1.0 - 1e-12, 1001)
    for cap in (cap_u, cap_g):
        c = cap.cos_theta_from_uniform(u)
        assert np.all(c > 1.0 - cap.epsilon)
        assert np.all(c <= 1.0)
    # uniform profile: cos(theta) is exactly the affine map of u
    np.testing.assert_allclose(cap_u.cos_theta_from_uniform(u), 1.0 - 0.3 * u, atol=0)


def test_degenerate_cap_collapses_to_center():
    cap = CapDistribution(as_direction(25.0), 1e-9)
    d = sample_cap_directions(cap, 1000, np.random.default_rng(20260402))
    # angular radius of the cap is acos(1 - eps) ~ sqrt(2 eps)
    dots = d @ cap.center.vec
    assert np.all(np.arccos(np.clip(dots, -1, 1)) < 1.5 * math.sqrt(2e-9))


def test_uniform_cap_mean_direction():
    """Symmetry: the sample mean is kappa * center, transverse means vanish."""
    eps = 0.4
    cap = CapDistribution(as_direction(68.0), eps)
    n = 100_000
    d = sample_cap_directions(cap, n, np.random.default_rng(20260403))
    mean = d.mean(axis=0)
    se = d.std(axis=0, ddof=1) / math.sqrt(n)
    expect = kappa(eps) * cap.center.vec
    assert np.all(np.abs(mean - expect) < 4 * se + 1e-12)


def test_single_draw_matches_batch_stream():
    cap = CapDistribution(as_direction(12.0), 0.15)
    batch = sample_cap_directions(cap, 5, np.random.default_rng(55))
    rng = np.random.default_rng(55)
    singles = [sample_cap_direction(cap, rng).vec for _ in range(5)]
    np.testing.assert_array_equal(batch, np.array(singles))


def test_smeared_probability_matches_closed_form():
    eps = 0.12
    angle = 60.0
    setting = make_setting(0.0, angle, eps)
    rng = np.random.default_rng(20260404)
    dot_ab = math.cos(math.radians(angle))
    for x, y in OUTCOME_ORDER:
        est = smeared_probability(setting, Outcome(x, y), 200_000, rng)
        want = closed_form(eps, eps, dot_ab, x, y)
        assert abs(est.value - want) < 4 * est.standard_error + 1e-12


def test_quadrature_matches_closed_form_exactly():
    """The integrand is linear in a.b, so the product rule is exact."""
    for angle in (0.0, 30.0, 90.0, 150.0):
        for eps_a, eps_b in ((0.05, 0.05), (0.02, 0.3)):
            setting = ExperimentSetting(
                CapDistribution(as_direction(0.0), eps_a),
                CapDistribution(as_direction(angle), eps_b),
            )
            dot_ab = math.cos(math.radians(angle))
            for x, y in OUTCOME_ORDER:
                got = quadrature_probability(setting, Outcome(x, y))
                want = closed_form(eps_a, eps_b, dot_ab, x, y)
                assert got == pytest.approx(want, abs=1e-12)


def test_quadrature_crosschecks_mc_for_gauss_profile():
    setting = make_setting(0.0, 45.0, 0.25, profile="gauss", sigma=0.15)
    rng = np.random.default_rng(20260405)
    for x, y in ((1, 1), (1, -1)):
        est = smeared_probability(setting, Outcome(x, y), 200_000, rng)
        quad = quadrature_probability(setting, Outcome(x, y))
        assert abs(est.value - quad) < 4 * est.standard_error + 1e-9


def test_efficiency_scales_the_estimate():
    """Perpendicular settings, eta 0.5 per side: 0.25 * 0.25 per outcome."""
    setting = make_setting(0.0, 90.0, 0.05, eta_a=0.5, eta_b=0.5)
    est = smeared_probability(setting, Outcome(1, 1), 100_000, np.random.default_rng(20260406))
    assert abs(est.value - 0.0625) < 4 * est.standard_error + 1e-12


def test_smeared_distribution_sums_to_eta_product():
    setting = make_setting(10.0, 70.0, 0.2, eta_a=0.8, eta_b=0.9)
    ests = smeared_distribution(setting, 10_000, np.random.default_rng(20260407))
    total = sum(e.value for e in ests)
    assert total == pytest.approx(0.72, abs=1e-12)


def test_independent_outcome_estimates_sum_to_one():
    setting = make_setting(20.0, 50.0, 0.3)
    rng = np.random.default_rng(20260408)
    ests = [smeared_probability(setting, Outcome(x, y), 50_000, rng) for x, y in OUTCOME_ORDER]
    total = sum(e.value for e in ests)
    se = math.sqrt(sum(e.standard_error**2 for e in ests))
    assert abs(total - 1.0) < 3 * se + 1e-12


def test_swap_symmetry():
    """Swapping (cap_a, x) with (cap_b, y) leaves the value unchanged."""
    s1 = ExperimentSetting(
        CapDistribution(as_direction(0.0), 0.08),
        CapDistribution(as_direction(40.0), 0.2),
    )
    s2 = ExperimentSetting(
        CapDistribution(as_direction(40.0), 0.2),
        CapDistribution(as_direction(0.0), 0.08),
    )
    for x, y in OUTCOME_ORDER:
        v1 = quadrature_probability(s1, Outcome(x, y))
        v2 = quadrature_probability(s2, Outcome(y, x))
        assert v1 == pytest.approx(v2, abs=1e-13)


def test_gap_matches_frozen_closed_form():
    """gap(0.05) = (0.05 - 0.05^2/4)/2 = 0.0246875, frozen by hand."""
    setting = make_setting(15.0, 15.0, 0.05)
    est = anti_correlation_gap(setting, 400_000, np.random.default_rng(20260409))
    assert abs(est.value - 0.0246875) < 3 * est.standard_error + 1e-12
    assert est.value > 0
    assert est.value - 5 * est.standard_error > 0  # significant positivity


def test_gap_tiny_epsilon():
    setting = make_setting(0.0, 0.0, 1e-9)
    est = anti_correlation_gap(setting, 10_000, np.random.default_rng(20260410))
    assert 0 <= est.value < 1e-6


def test_gap_monotone_in_epsilon_with_paired_seeds():
    seed = 20260411
    prev = None
    for eps in (0.025, 0.05, 0.1, 0.2):
        setting = make_setting(0.0, 0.0, eps)
        est = anti_correlation_gap(setting, 200_000, np.random.default_rng(seed))
        if prev is not None:
            assert est.value > prev.value - 3 * math.hypot(est.standard_error, prev.standard_error)
        prev = est


def test_gap_consistent_with_two_smeared_calls():
    setting = make_setting(0.0, 0.0, 0.1)
    gap = anti_correlation_gap(setting, 200_000, np.random.default_rng(20260412))
    rng = np.random.default_rng(20260413)
    p_pp = smeared_probability(setting, Outcome(1, 1), 200_000, rng)
    p_mm = smeared_probability(setting, Outcome(-1, -1), 200_000, rng)
    combined = p_pp.value + p_mm.value
    se = math.sqrt(gap.standard_error**2 + p_pp.standard_error**2 + p_mm.standard_error**2)
    assert abs(gap.value - combined) < 4 * se + 1e-12


def test_gap_requires_matching_caps():
    setting = ExperimentSetting(
        CapDistribution(as_direction(0.0), 0.05),
        CapDistribution(as_direction(0.0), 0.06),
    )
    with pytest.raises(ParameterError):
        anti_correlation_gap(setting, 1000, np.random.default_rng(1))
    with pytest.raises(ParameterError):
        smeared_probability(make_setting(0, 0, 0.1), Outcome(1, 1), 99, np.random.default_rng(1))


def test_trial_frequencies_match_smeared_probability():
    setting = make_setting(0.0, 45.0, 0.3, eta_a=0.9, eta_b=0.8)
    n = 100_000
    x, y = sample_contextual_trials(setting, n, np.random.default_rng(20260414))
    for xv, yv in OUTCOME_ORDER:
        est = smeared_probability(setting, Outcome(xv, yv), 400_000, np.random.default_rng(20260415))
        freq = float(np.mean((x == xv) & (y == yv)))
        se_freq = math.sqrt(max(freq * (1 - freq), 1e-12) / n)
        assert abs(freq - est.value) < 4 * math.hypot(se_freq, est.standard_error)


def test_full_efficiency_never_drops_trials():
    setting = make_setting(0.0, 30.0, 0.1)
    x, y = sample_contextual_trials(setting, 50_000, np.random.default_rng(20260416))
    assert np.all(x != 0)
    assert np.all(y != 0)


def test_no_detection_rate():
    setting = make_setting(0.0, 30.0, 0.1, eta_a=0.5, eta_b=0.5)
    n = 100_000
    x, y = sample_contextual_trials(setting, n, np.random.default_rng(20260417))
    nd = float(np.mean(x == 0))
    np.testing.assert_array_equal(x == 0, y == 0)
    se = math.sqrt(0.75 * 0.25 / n)
    assert abs(nd - 0.75) < 4 * se


def test_degenerate_cap_reproduces_sharp_statistics():
    """eps -> 0, eta = 1: trial frequencies approach the sharp singlet table."""
    setting = make_setting(0.0, 60.0, 1e-10)
    n = 100_000
    x, y = sample_contextual_trials(setting, n, np.random.default_rng(20260418))
    sharp = outcome_distribution(build_singlet(), as_direction(0.0), as_direction(60.0))
    for k, (xv, yv) in enumerate(OUTCOME_ORDER):
        freq = float(np.mean((x == xv) & (y == yv)))
        se = math.sqrt(sharp[k] * (1 - sharp[k]) / n)
        assert abs(freq - sharp[k]) < 5 * se + 1e-12


def test_single_trial_matches_batch_stream():
    setting = make_setting(5.0, 65.0, 0.2, eta_a=0.7, eta_b=0.9)
    bx, by = sample_contextual_trials(setting, 8, np.random.default_rng(77))
    rng = np.random.default_rng(77)
    outs = [sample_contextual_trial(setting, rng) for _ in range(8)]
    for k, o in enumerate(outs):
        if o is None:
            assert bx[k] == 0 and by[k] == 0
        else:
            assert (o.x, o.y) == (bx[k], by[k])


def test_replay_is_bit_identical():
    setting = make_setting(0.0, 45.0, 0.15)
    e1 = smeared_probability(setting, Outcome(1, -1), 10_000, np.random.default_rng(9))
    e2 = smeared_probability(setting, Outcome(1, -1), 10_000, np.random.default_rng(9))
    assert e1 == e2
    assert isinstance(e1, Estimate)
