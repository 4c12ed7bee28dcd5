import math

import numpy as np
import pytest

from fringemetry.densities import (
    WavePacket, mzi_densities, pattern_model)
from fringemetry.errors import DegenerateModelError, ValidationError
from fringemetry.states import (
    AngularMoments, TwoModeState, chi_for_xi_phi, coherent_state,
    ground_state, moments, summarize)
from fringemetry.theory import (
    VarianceReport, bin_centers, binned_pattern, correlation_c,
    count_covariance, fisher_f1, fit_power_law, fluorescence_threshold,
    gaussian_scaling_optimum, gaussian_two_term, mzi_f1_closed,
    optimal_pattern_state, pattern_c_closed, pattern_f1_closed, qfi_bound,
    scaling_sweep, variance_fit, variance_fit_fluorescence,
    variance_fit_pattern, variance_mle, variance_mzi, variance_pattern,
    variance_pattern_noisy)

WP = WavePacket.dimensionless(60.0)


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
    return TwoModeState.from_amplitudes(c)


def synthetic_moments(n, jx, jy=0.0):
    # only the first moments enter the one-body fringe
    return AngularMoments(n_particles=n, jx=jx, jy=jy, jz=0.0, jx2=n / 4.0,
                          jy2=n / 4.0, jz2=n / 4.0, jxy=0.0, jzx=0.0, jyz=0.0)


# --- single-particle information -------------------------------------------


def test_f1_full_contrast():
    model = pattern_model(moments(coherent_state(30)), 0.0, wp=WP)
    assert abs(fisher_f1(model) - 1.0) < 1e-6


def test_f1_small_contrast():
    # weak fringe: information falls off as nu^2/2
    n, nu = 20, 0.1
    model = pattern_model(synthetic_moments(n, jx=0.5 * n * nu), 0.0, wp=WP)
    f1 = fisher_f1(model)
    assert abs(f1 - nu * nu / 2.0) < 0.02 * (nu * nu / 2.0)
    assert abs(f1 - pattern_f1_closed(nu)) < 1e-9


def test_f1_closed_form_family():
    for chi in (-0.005, -0.0103, -0.02):
        mom = moments(ground_state(100, chi))
        nu = summarize(mom).visibility
        model = pattern_model(mom, 0.9, wp=WP)
        assert abs(fisher_f1(model) - pattern_f1_closed(nu)) \
            < 1e-8 * pattern_f1_closed(nu)


def test_f1_mzi():
    mom = moments(coherent_state(40))
    assert abs(fisher_f1(mzi_densities(0.0, mom, 40)) - 1.0) < 1e-12
    chi = chi_for_xi_phi(100, 0.6)
    mom = moments(ground_state(100, chi))
    nu = summarize(mom).visibility
    model = mzi_densities(0.7, mom, 100)
    assert abs(fisher_f1(model) - mzi_f1_closed(nu, 0.7)) < 1e-9


def product_moments(n, nu):
    # second moments tuned so p2 factorizes into p1*p1 exactly
    q = n * (n - 1.0) / 4.0
    return AngularMoments(
        n_particles=n, jx=0.5 * n * nu, jy=0.0, jz=0.0,
        jx2=q * (nu * nu + 1.0 / (n - 1.0)), jy2=n / 4.0,
        jz2=n / 4.0, jxy=0.0, jzx=0.0, jyz=0.0)


def test_correlation_vanishes_for_product_state():
    # p2 = p1*p1, so C collapses to the squared derivative of the
    # normalization integral.
    model = pattern_model(product_moments(30, 0.9), 0.3, wp=WP)
    assert abs(correlation_c(model)) < 1e-8


def test_correlation_full_contrast_fails_loudly():
    # At nu = 1 the fringe kernels acquire principal-value poles on the
    # dark fringes; the quadrature must refuse rather than return junk.
    from fringemetry.errors import QuadratureError
    model = pattern_model(moments(coherent_state(30)), 0.3, wp=WP)
    with pytest.raises(QuadratureError):
        correlation_c(model)


def test_correlation_negative_for_squeezed():
    opt = optimal_pattern_state(60)
    model = pattern_model(opt.moments, 0.0, wp=WP)
    assert correlation_c(model) < 0.0


def test_correlation_closed_form_family():
    for n, chi in [(40, -0.03), (100, -0.0103)]:
        mom = moments(ground_state(n, chi))
        s = summarize(mom)
        model = pattern_model(mom, 0.5, wp=WP)
        want = pattern_c_closed(n, s.xi_phi, s.visibility)
        assert abs(correlation_c(model) - want) < 1e-8 * abs(want)


# --- variance assembly ------------------------------------------------------


def test_variance_mle_uncorrelated():
    rep = variance_mle(50, 0.4, 0.0)
    assert abs(rep.variance_per_shot - 1.0 / (50 * 0.4)) < 1e-15
    assert rep.variance_per_shot >= 1.0 / 50 / 0.4


def test_variance_mle_single_particle():
    rep = variance_mle(1, 0.5, 123.0)  # pair term carries (N-1) = 0
    assert abs(rep.variance_per_shot - 2.0) < 1e-15


def test_variance_mle_flat_model():
    with pytest.raises(DegenerateModelError):
        variance_mle(10, 0.0, 0.0)


def test_pattern_path_equivalence():
    """Quadrature information route and the closed per-shot formula agree
    for arbitrary states, not just the squeezed family."""
    checked = 0
    seed = 0
    while checked < 20:
        seed += 1
        n = int(np.random.default_rng(seed).integers(2, 24))
        state = random_state(n, seed + 1000)
        mom = moments(state)
        s = summarize(mom)
        if s.visibility < 0.05:
            continue
        model = pattern_model(mom, 0.37, wp=WP)
        f1 = fisher_f1(model)
        c = correlation_c(model)
        got = variance_mle(n, f1, c).variance_per_shot
        want = variance_pattern(n, s.xi_phi, s.visibility).variance_per_shot
        assert abs(got - want) < 0.005 * want
        checked += 1


def test_mzi_path_equivalence():
    for n, seed, theta in [(5, 60, 0.4), (12, 61, 1.1), (30, 62, -0.8)]:
        mom = moments(random_state(n, seed))
        model = mzi_densities(theta, mom, n)
        got = variance_mle(n, fisher_f1(model), correlation_c(model))
        want = variance_mzi(mom, theta)
        assert abs(got.variance_per_shot - want) < 1e-10 * abs(want)


def test_mzi_coherent_is_shot_noise():
    mom = moments(coherent_state(35))
    for theta in (0.0, 0.4, 1.2):
        model = mzi_densities(theta, mom, 35)
        rep = variance_mle(35, fisher_f1(model), correlation_c(model))
        assert abs(rep.variance_per_shot - 1.0 / 35) < 1e-10 / 35
        assert abs(variance_mzi(mom, theta) - 1.0 / 35) < 1e-10 / 35


def test_variance_theta_independent():
    opt = optimal_pattern_state(40)
    vals = []
    for theta in (0.0, 0.7, 0.5 * math.pi, 2.5):
        model = pattern_model(opt.moments, theta, wp=WP)
        rep = variance_mle(40, fisher_f1(model), correlation_c(model))
        vals.append(rep.variance_per_shot)
    assert (max(vals) - min(vals)) < 0.005 * min(vals)


# --- closed-form variances --------------------------------------------------


def test_variance_pattern_coherent():
    rep = variance_pattern(80, 1.0, 1.0)
    assert rep.variance_per_shot == 1.0 / 80
    assert rep.breakdown["contrast_penalty"] == 0.0


def test_variance_pattern_optimum():
    opt = optimal_pattern_state(100)
    assert abs(opt.chi - (-0.010217584931941548)) < 1e-6
    assert abs(opt.summary.xi_phi - 0.45180167020294104) < 1e-6
    assert abs(opt.summary.visibility - 0.9824822149470644) < 1e-6
    assert abs(opt.report.variance_per_shot - 0.003971858826714473) < 1e-12
    assert opt.report.variance_per_shot < 0.01


def test_variance_pattern_single_minimum():
    # one interior minimum along the squeezing branch
    from fringemetry.states import squeezing_branch_floor, xi_phi_of
    floor = squeezing_branch_floor(100)
    chis = np.linspace(floor, -1e-4, 60)
    vals = []
    for chi in chis:
        s = summarize(moments(ground_state(100, chi)))
        vals.append(variance_pattern(100, s.xi_phi, s.visibility)
                    .variance_per_shot)
    k = int(np.argmin(vals))
    assert 0 < k < len(vals) - 1
    diffs = np.sign(np.diff(vals))
    assert np.all(diffs[:k] <= 0) and np.all(diffs[k:] >= 0)


def test_variance_pattern_divergent():
    rep = variance_pattern(10, 2.0, 0.0)
    assert rep.divergent
    d = rep.to_json_dict()
    assert d["variance_per_shot"] is None
    assert d["divergent"] is True
    assert d["breakdown"]["contrast_penalty"] is None


def test_variance_pattern_validation():
    with pytest.raises(ValidationError):
        variance_pattern(10, 1.0, 1.5)


def test_variance_mzi_working_points():
    chi = chi_for_xi_phi(100, 0.7)
    mom = moments(ground_state(100, chi))
    s = summarize(mom)
    at_zero = variance_mzi(mom, 0.0)
    assert abs(at_zero - s.xi_n ** 2 / 100) < 1e-12 * at_zero
    thetas = np.linspace(0.0, 0.5 * math.pi - 1e-3, 40)
    vals = [variance_mzi(mom, t) for t in thetas]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert math.isinf(variance_mzi(mom, 0.5 * math.pi))


def test_variance_mzi_coherent():
    mom = moments(coherent_state(64))
    assert abs(variance_mzi(mom, 0.0) - 1.0 / 64) < 1e-12


def test_qfi_bound():
    mom = moments(coherent_state(48))
    assert abs(qfi_bound(mom) - 1.0 / 48) < 1e-10
    twin = TwoModeState(4, np.array([0.0, 0.0, 1.0, 0.0, 0.0]))
    assert math.isinf(qfi_bound(moments(twin)))  # sharp Jz, no floor


def test_qfi_below_pattern_variance():
    for chi in (-0.002, -0.0103, -0.03):
        mom = moments(ground_state(100, chi))
        s = summarize(mom)
        rep = variance_pattern(100, s.xi_phi, s.visibility)
        assert qfi_bound(mom) <= rep.variance_per_shot * (1.0 + 1e-12)


# --- detection-noise closed form --------------------------------------------


def test_noisy_identity_channel_exact():
    s = optimal_pattern_state(100).summary
    clean = variance_pattern(100, s.xi_phi, s.visibility)
    noisy = variance_pattern_noisy(100, s.xi_phi, s.visibility, 1.0, 0.0)
    assert noisy.variance_per_shot == clean.variance_per_shot


def test_noisy_anchor():
    s = optimal_pattern_state(100).summary
    v = variance_pattern_noisy(100, s.xi_phi, s.visibility, 0.9, 0.2)
    assert abs(v.variance_per_shot - 0.006889711094963145) < 1e-12


def test_noisy_monotone_in_blur():
    s = optimal_pattern_state(100).summary
    sigmas = np.linspace(0.0, 3.0, 30)
    vals = [variance_pattern_noisy(100, s.xi_phi, s.visibility, 0.9, sg)
            .variance_per_shot for sg in sigmas]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_noisy_monotone_in_efficiency():
    s = optimal_pattern_state(100).summary
    vals = [variance_pattern_noisy(100, s.xi_phi, s.visibility, eta, 0.1)
            .variance_per_shot for eta in (1.0, 0.9, 0.7, 0.5)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_noisy_never_below_clean():
    s = optimal_pattern_state(100).summary
    clean = variance_pattern(100, s.xi_phi, s.visibility).variance_per_shot
    for eta, sg in [(1.0, 0.05), (0.8, 0.0), (0.6, 0.4)]:
        v = variance_pattern_noisy(100, s.xi_phi, s.visibility, eta, sg)
        assert v.variance_per_shot > clean


def test_noisy_validation_and_warning():
    with pytest.raises(ValidationError):
        variance_pattern_noisy(100, 0.5, 0.9, 0.0, 0.1)
    with pytest.raises(ValidationError):
        variance_pattern_noisy(100, 0.5, 0.9, 0.9, -0.1)
    with pytest.warns(UserWarning, match="asymptotics are marginal"):
        variance_pattern_noisy(20, 0.5, 0.9, 0.4, 0.1)


# --- binned fit --------------------------------------------------------------


def test_bin_centers_cover_domain():
    x = bin_centers(WP, 0.25)
    assert x.size == int(round(2 * WP.half_domain / 0.25))
    assert abs(x[0] - (-WP.half_domain + 0.125)) < 1e-12
    assert abs(x[-1] - (WP.half_domain - 0.125)) < 1e-12


def test_binned_pattern_mass():
    opt = optimal_pattern_state(100)
    model = pattern_model(opt.moments, 0.0, wp=WP)
    _, means, _ = binned_pattern(model, 0.2)
    assert abs(means.sum() - 100.0) < 1e-8


def test_variance_fit_matches_dense_route():
    # factorized pair sums against the explicit covariance matrix
    opt = optimal_pattern_state(100)
    model = pattern_model(opt.moments, 0.0, wp=WP)
    _, means, derivs = binned_pattern(model, 0.5)
    dense = variance_fit(means, derivs, count_covariance(model, 0.5))
    fast, _ = variance_fit_pattern(model, 0.5)
    assert abs(dense - fast) < 1e-10 * fast


def test_variance_fit_anchor():
    opt = optimal_pattern_state(100)
    model = pattern_model(opt.moments, 0.0, wp=WP)
    v, fisher_sum = variance_fit_pattern(model, 0.2)
    assert abs(v - 0.003987188182730936) < 1e-12
    assert abs(fisher_sum - 81.36436281939606) < 1e-6
    assert v < 0.01  # below shot noise despite the binning penalty


def test_variance_fit_bin_refinement():
    # Richardson-style check: halving the bin width moves the answer by
    # well under a percent, toward the unbinned limit.
    opt = optimal_pattern_state(100)
    model = pattern_model(opt.moments, 0.0, wp=WP)
    v1, _ = variance_fit_pattern(model, 0.05)
    v2, _ = variance_fit_pattern(model, 0.025)
    assert abs(v1 - v2) < 0.01 * v2
    unbinned = opt.report.variance_per_shot
    assert abs(v1 - unbinned) < 0.01 * unbinned
    assert abs(v2 - unbinned) < 0.01 * unbinned


def test_variance_fit_validation():
    opt = optimal_pattern_state(100)
    model = pattern_model(opt.moments, 0.0, wp=WP)
    with pytest.raises(DegenerateModelError):
        bin_centers(WP, 2000.0)
    with pytest.raises(ValidationError):
        variance_fit([1.0, -1.0], [0.1, 0.1], np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        variance_fit([1.0, 1.0], [0.1, 0.1], np.zeros((3, 3)))
    sig = np.ones((2, 2))
    with pytest.raises(ValidationError):
        variance_fit([1.0, 1.0], [0.1, 0.1], sig)
    del model


def test_fluorescence_correction():
    v, fisher_sum = 0.004, 80.0
    assert variance_fit_fluorescence(v, 1e15, fisher_sum) \
        == pytest.approx(v, rel=1e-12)
    at_ten = variance_fit_fluorescence(v, 10.0, fisher_sum)
    assert at_ten == pytest.approx(v + 1.0 / 800.0, rel=1e-12)
    with pytest.raises(ValidationError):
        variance_fit_fluorescence(v, 0.0, fisher_sum)


def test_fluorescence_alpha_ten_below_shot_noise():
    opt = optimal_pattern_state(100)
    model = pattern_model(opt.moments, 0.0, wp=WP)
    v, fisher_sum = variance_fit_pattern(model, 0.2)
    total = variance_fit_fluorescence(v, 10.0, fisher_sum)
    assert abs(total - 0.00521622748857506) < 1e-12
    assert total < 0.01


def test_fluorescence_threshold_anchor():
    opt = optimal_pattern_state(100)
    model = pattern_model(opt.moments, 0.0, wp=WP)
    alpha = fluorescence_threshold(model, 0.2)
    assert abs(alpha - 2.0440340163658854) < 1e-5
    assert abs(alpha - 2.2) < 0.22
    # crossing property: slightly fewer photons pushes above shot noise
    v, fisher_sum = variance_fit_pattern(model, 0.2)
    assert variance_fit_fluorescence(v, 0.9 * alpha, fisher_sum) > 0.01
    assert variance_fit_fluorescence(v, 1.1 * alpha, fisher_sum) < 0.01


# --- scaling laws -------------------------------------------------------------


def test_gaussian_scaling_optimum():
    beta, v = gaussian_scaling_optimum(100)
    assert beta == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert v == pytest.approx(4.31e-3, rel=1e-2)
    # the optimum balances the two contributions exactly
    assert gaussian_two_term(100, beta) == pytest.approx(v, rel=1e-12)


def test_gaussian_beta_scan():
    n = 1e4
    betas = np.linspace(0.0, 1.0, 11)
    vals = [gaussian_two_term(n, b) for b in betas]
    # grid-resolution agreement with the asymptotic optimum; the exact
    # finite-N minimum sits at 1/3 + 2*ln2/(3*lnN), inside one step
    assert abs(betas[int(np.argmin(vals))] - 1.0 / 3.0) <= 0.1 + 1e-12
    fine = np.linspace(0.0, 1.0, 2001)
    vals = [gaussian_two_term(n, b) for b in fine]
    shifted = 1.0 / 3.0 + 2.0 * math.log(2.0) / (3.0 * math.log(n))
    assert abs(fine[int(np.argmin(vals))] - shifted) <= 5e-4 + 1e-12


def test_scaling_sweep_anchors():
    rows = scaling_sweep()
    pinned = {
        50: (9.812283e-3, 5.093608e-3, 1.559623e-2),
        100: (3.971859e-3, 1.933356e-3, 6.886129e-3),
        200: (1.599612e-3, 7.414550e-4, 3.078634e-3),
        400: (6.421626e-4, 2.868755e-4, 1.397545e-3),
        800: (2.572254e-4, 1.117640e-4, 6.446565e-4),
    }
    assert [r.n_particles for r in rows] == list(pinned)
    for row in rows:
        clean, qfi, noisy = pinned[row.n_particles]
        assert row.var_clean == pytest.approx(clean, rel=1e-5)
        assert row.qfi == pytest.approx(qfi, rel=1e-5)
        assert row.var_noisy == pytest.approx(noisy, rel=1e-5)
        assert row.qfi <= row.var_clean <= row.var_noisy
        assert row.gauss_clean == pytest.approx(
            2.0 * row.n_particles ** (-4.0 / 3.0), rel=1e-12)

    ns = [r.n_particles for r in rows]
    amp, power = fit_power_law(ns, [r.gauss_clean for r in rows])
    assert amp == pytest.approx(2.0, rel=1e-10)
    assert power == pytest.approx(4.0 / 3.0, rel=1e-10)
    # regression pins for the numerically optimized family
    amp, power = fit_power_law(ns, [r.var_clean for r in rows])
    assert (amp, power) == pytest.approx((1.6793, 1.3136), abs=2e-3)
    amp, power = fit_power_law(ns, [r.qfi for r in rows])
    assert (amp, power) == pytest.approx((1.1043, 1.3773), abs=2e-3)
    assert abs(power - 4.0 / 3.0) < 0.05
    amp, power = fit_power_law(ns, [r.var_noisy for r in rows])
    assert (amp, power) == pytest.approx((1.379, 1.149), abs=2e-3)


def test_fit_power_law_exact():
    n = np.array([10.0, 100.0, 1000.0])
    amp, power = fit_power_law(n, 3.0 * n ** (-0.5))
    assert amp == pytest.approx(3.0, rel=1e-12)
    assert power == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(ValidationError):
        fit_power_law([10.0], [0.1])


def test_variance_report_per_estimate():
    rep = VarianceReport(variance_per_shot=0.02)
    assert rep.per_estimate(10) == pytest.approx(0.002)
    assert not rep.divergent
