"""Asymptotic phase-uncertainty predictions.

Every protocol gets two independent routes: the generic estimator
variance assembled from the single-particle information integral and
the two-body correlation correction (quadrature for the fringe pattern,
discrete sums for the separated-arm readout), and the closed forms they
reduce to. The routes share no code, so tests can hold them against
each other.

Per-shot convention throughout: values are m * (estimator variance for
m pooled shots); divide by m for a concrete experiment.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .densities import Protocol, dp1_dtheta, mzi_outcome_dtheta, \
    mzi_outcome_probs, mzi_pair_table, p1_pattern, wrap_angle
from .errors import DegenerateModelError, ValidationError
from .quadrature import integrate
from .states import ground_state, moments, optimal_chi, summarize

_P_FLOOR = 1e-300


def _finite_or_none(v):
    return float(v) if math.isfinite(v) else None


@dataclass(frozen=True)
class VarianceReport:
    """Per-shot phase variance with its labeled contributions."""

    variance_per_shot: float
    f1: float | None = None
    c: float | None = None
    breakdown: dict = field(default_factory=dict)

    @property
    def divergent(self):
        return not math.isfinite(self.variance_per_shot)

    def per_estimate(self, m_shots):
        return self.variance_per_shot / m_shots

    def to_json_dict(self):
        # divergent values are tagged instead of leaking inf/nan into JSON
        return {
            "variance_per_shot": _finite_or_none(self.variance_per_shot),
            "divergent": self.divergent,
            "f1": None if self.f1 is None else float(self.f1),
            "c": None if self.c is None else float(self.c),
            "breakdown": {k: _finite_or_none(v)
                          for k, v in self.breakdown.items()},
        }


def _fringe_panels(model):
    # start with ~2 quadrature panels per fringe so the oscillation is
    # resolved before any adaptive splitting
    wp = model.wavepacket
    fringes = wp.kappa * 2.0 * wp.half_domain / (2.0 * math.pi)
    return max(64, int(2.0 * fringes))


def fisher_f1(model, rel_tol=1e-9):
    """Single-particle information of the one-body density at model.theta."""
    if model.protocol is Protocol.MZI:
        p = mzi_outcome_probs(model)
        d = mzi_outcome_dtheta(model)
        if np.any((p <= 0.0) & (d != 0.0)):
            return math.inf
        ratio = np.where(p > 0.0, d * d / np.where(p > 0.0, p, 1.0), 0.0)
        return float(ratio.sum())
    wp = model.wavepacket
    half = wp.half_domain

    def f(x):
        p = p1_pattern(x, model)
        d = dp1_dtheta(x, model)
        return d * d / np.maximum(p, _P_FLOOR)

    return integrate(f, -half, half, rel_tol=rel_tol, abs_tol=1e-14,
                     initial_panels=_fringe_panels(model))


def correlation_c(model, rel_tol=1e-9):
    """Two-body correction to the single-particle information.

    Negative values are what allow sub-shot-noise estimation from the
    one-body density alone.
    """
    if model.protocol is Protocol.MZI:
        p = mzi_outcome_probs(model)
        d = mzi_outcome_dtheta(model)
        t = mzi_pair_table(model)
        r = np.where(p > 0.0, d / np.where(p > 0.0, p, 1.0), 0.0)
        return float(r @ t @ r)

    mom, n, wp = model.moments, model.n_particles, model.wavepacket
    half = wp.half_domain
    panels = _fringe_panels(model)

    def h(x):
        p = p1_pattern(x, model)
        return dp1_dtheta(x, model) / np.maximum(p, _P_FLOOR)

    def kernel(trig):
        if trig is None:
            f = lambda x: wp.envelope(x) * h(x)
        else:
            f = lambda x: wp.envelope(x) * trig(wp.kappa * x + model.theta) * h(x)
        return integrate(f, -half, half, rel_tol=rel_tol, abs_tol=1e-13,
                         initial_panels=panels)

    k0 = kernel(None)
    kc = kernel(np.cos)
    ks = kernel(np.sin)
    a = 2.0 * mom.jx / n
    b = 2.0 * mom.jy / n
    pair = 4.0 / (n * (n - 1.0))
    return (k0 * k0
            - (kc * kc + ks * ks) / (n - 1.0)
            + 2.0 * a * kc * k0 - 2.0 * b * ks * k0
            + pair * (mom.jx2 * kc * kc + mom.jy2 * ks * ks
                      - 2.0 * mom.jxy * ks * kc))


def variance_mle(n_particles, f1, c):
    """Per-shot variance of the one-body maximum-likelihood estimator,
    assembled from the information integral and the pair correction."""
    n = int(n_particles)
    if f1 <= 0.0:
        raise DegenerateModelError(
            "one-body density carries no phase information (F1 <= 0)")
    v = (1.0 / (n * f1)) * (1.0 + (n - 1.0) * c / f1)
    return VarianceReport(
        variance_per_shot=v, f1=float(f1), c=float(c),
        breakdown={"uncorrelated": 1.0 / (n * f1),
                   "pair_correction": (n - 1.0) * c / (n * f1 * f1)})


def pattern_f1_closed(visibility):
    """Closed form of the fringe information integral."""
    nu2 = min(visibility * visibility, 1.0)
    return 1.0 - math.sqrt(1.0 - nu2)


def pattern_c_closed(n_particles, xi_phi, visibility):
    """Closed form of the pair correction for a phase-squeezed state."""
    n = int(n_particles)
    f1 = pattern_f1_closed(visibility)
    return f1 * f1 * (xi_phi * xi_phi - 1.0 / visibility ** 2) / (n - 1.0)


def mzi_f1_closed(visibility, theta):
    nu2 = visibility * visibility
    c, s = math.cos(theta), math.sin(theta)
    return nu2 * c * c / (1.0 - nu2 * s * s)


def variance_pattern(n_particles, xi_phi, visibility):
    """Per-shot fringe-readout variance: squeezing term plus the
    contrast penalty, independent of the actual phase."""
    n = int(n_particles)
    if not 0.0 <= visibility <= 1.0 + 1e-9:
        raise ValidationError(f"visibility {visibility} outside [0, 1]")
    squeeze = xi_phi * xi_phi / n
    if visibility == 0.0:
        return VarianceReport(variance_per_shot=math.inf,
                              breakdown={"squeezing": squeeze,
                                         "contrast_penalty": math.inf})
    nu2 = min(visibility * visibility, 1.0)
    penalty = math.sqrt(1.0 - nu2) / (nu2 * n)
    return VarianceReport(
        variance_per_shot=squeeze + penalty,
        f1=pattern_f1_closed(visibility),
        c=pattern_c_closed(n, xi_phi, visibility) if n > 1 else None,
        breakdown={"squeezing": squeeze, "contrast_penalty": penalty})


def variance_pattern_noisy(n_particles, xi_phi, visibility, eta,
                           sigma_blur, kappa=1.0):
    """Fringe-readout variance with detector efficiency eta and Gaussian
    position resolution sigma_blur (same units as 1/kappa)."""
    n = int(n_particles)
    if not 0.0 < eta <= 1.0:
        raise ValidationError(f"efficiency eta = {eta} outside (0, 1]")
    if sigma_blur < 0.0:
        raise ValidationError("sigma_blur must be >= 0")
    if eta == 1.0 and sigma_blur == 0.0:
        # identity channel; reuse the clean expression so the reduction
        # is exact, not merely within rounding
        return variance_pattern(n, xi_phi, visibility)
    if eta * n < 10.0:
        warnings.warn(f"eta*N = {eta * n:.3g} < 10: the detected-number "
                      "asymptotics are marginal", stacklevel=2)
    if not 0.0 <= visibility <= 1.0 + 1e-9:
        raise ValidationError(f"visibility {visibility} outside [0, 1]")
    squeeze = xi_phi * xi_phi / n
    if visibility == 0.0:
        return VarianceReport(variance_per_shot=math.inf,
                              breakdown={"squeezing": squeeze,
                                         "noisy_contrast_penalty": math.inf})
    nu2 = min(visibility * visibility, 1.0)
    blur = math.exp(kappa * kappa * sigma_blur * sigma_blur)
    penalty = ((math.sqrt(1.0 - nu2 / blur) + 1.0) * blur - eta) \
        / (eta * nu2 * n)
    return VarianceReport(
        variance_per_shot=squeeze + penalty,
        breakdown={"squeezing": squeeze, "noisy_contrast_penalty": penalty})


def variance_mzi(moments_, theta):
    """Per-shot variance of the arm-population readout at working point
    theta; diverges where the signal slope vanishes."""
    if abs(wrap_angle(theta)) == 0.5 * math.pi:
        # the slope only vanishes to rounding at float pi/2; report the
        # divergence explicitly rather than a rounding-limited huge value
        return math.inf
    c, s = math.cos(theta), math.sin(theta)
    num = c * c * moments_.var_jz + s * s * moments_.var_jx \
        - 2.0 * s * c * moments_.cov_jzx
    slope = c * moments_.jx + s * moments_.jz
    if slope == 0.0:
        return math.inf
    return num / (slope * slope)


def qfi_bound(moments_):
    """Per-shot variance floor from the quantum Fisher information of
    the phase generator."""
    var = moments_.var_jz
    if var <= 0.0:
        return math.inf
    return 1.0 / (4.0 * var)


# ---------------------------------------------------------------------------
# binned least-squares fit


def bin_centers(wp, bin_width):
    if bin_width <= 0.0:
        raise ValidationError("bin width must be positive")
    half = wp.half_domain
    k = int(round(2.0 * half / bin_width))
    if k < 2:
        raise DegenerateModelError("need at least two bins")
    return -half + (np.arange(k) + 0.5) * bin_width


def binned_pattern(model, bin_width):
    """Midpoint per-shot mean counts and their phase derivatives."""
    x = bin_centers(model.wavepacket, bin_width)
    n = model.n_particles
    means = bin_width * n * p1_pattern(x, model)
    derivs = bin_width * n * dp1_dtheta(x, model)
    return x, means, derivs


def count_covariance(model, bin_width):
    """Dense k != l covariance matrix of the bin counts (zero diagonal).

    O(bins^2) memory; fine for oracle checks, use variance_fit_pattern
    for production bin widths.
    """
    from .densities import p2_pattern
    x = bin_centers(model.wavepacket, bin_width)
    n = model.n_particles
    p1 = p1_pattern(x, model)
    p2 = p2_pattern(x[:, None], x[None, :], model)
    cov = bin_width ** 2 * n * ((n - 1.0) * p2 - n * np.outer(p1, p1))
    np.fill_diagonal(cov, 0.0)
    return cov


def variance_fit(bin_means, bin_derivs, sigma_kl):
    """Per-shot variance of the least-squares fringe fit from explicit
    bin statistics; the diagonal (Poissonian) term comes from bin_means."""
    means = np.asarray(bin_means, dtype=float)
    derivs = np.asarray(bin_derivs, dtype=float)
    if means.size < 2:
        raise DegenerateModelError("need at least two bins")
    if np.any(means <= 0.0):
        raise ValidationError("bin means must be positive")
    sig = np.asarray(sigma_kl, dtype=float)
    if sig.shape != (means.size, means.size):
        raise ValidationError("sigma_kl shape mismatch")
    if np.any(np.diag(sig) != 0.0):
        raise ValidationError("sigma_kl must have zero diagonal")
    if not np.allclose(sig, sig.T, rtol=1e-10, atol=1e-12):
        raise ValidationError("sigma_kl must be symmetric")
    w = derivs / means
    fisher_sum = float(w @ derivs)
    if fisher_sum <= 0.0:
        raise DegenerateModelError("flat binned model: no phase signal")
    cross = float(w @ sig @ w)
    return (1.0 + cross / fisher_sum) / fisher_sum


def variance_fit_pattern(model, bin_width):
    """(per-shot fit variance, fisher_sum) for the fringe pattern.

    Same quantity as variance_fit fed with count_covariance, but the
    pair sum is factorized through the separable two-body density, so
    cost and memory stay linear in the number of bins.
    """
    mom, n, wp = model.moments, model.n_particles, model.wavepacket
    x = bin_centers(wp, bin_width)
    env = wp.envelope(x)
    phi = wp.kappa * x + model.theta
    cphi, sphi = np.cos(phi), np.sin(phi)
    a = 2.0 * mom.jx / n
    b = 2.0 * mom.jy / n
    bracket = 1.0 + a * cphi - b * sphi
    p1 = env * bracket
    dp1 = env * (-a * sphi - b * cphi)
    h = dp1 / np.maximum(p1, _P_FLOOR)

    fisher_sum = bin_width * n * float(np.sum(dp1 * h))
    if fisher_sum <= 0.0:
        raise DegenerateModelError("flat binned model: no phase signal")

    u0 = env * h
    uc = u0 * cphi
    us = u0 * sphi

    def pairsum(f, g):
        # sum over k != l of f_k g_l
        return float(np.sum(f) * np.sum(g) - np.sum(f * g))

    pair = 4.0 / (n * (n - 1.0))
    two_body = (pairsum(u0, u0)
                - (pairsum(uc, uc) + pairsum(us, us)) / (n - 1.0)
                + 2.0 * a * pairsum(uc, u0) - 2.0 * b * pairsum(us, u0)
                + pair * (mom.jx2 * pairsum(uc, uc)
                          + mom.jy2 * pairsum(us, us)
                          - 2.0 * mom.jxy * pairsum(us, uc)))
    one_body = pairsum(u0 * bracket, u0 * bracket)
    cross = bin_width ** 2 * n * ((n - 1.0) * two_body - n * one_body)
    variance = (1.0 + cross / fisher_sum) / fisher_sum
    return variance, fisher_sum


def variance_fit_fluorescence(fit_variance, alpha, fisher_sum):
    """Fit variance with atom counting read out through on average alpha
    fluorescence photons per atom."""
    if alpha <= 0.0:
        raise ValidationError("alpha must be positive")
    if fisher_sum <= 0.0:
        raise ValidationError("fisher_sum must be positive")
    return fit_variance + 1.0 / (alpha * fisher_sum)


def fluorescence_threshold(model, bin_width, tol=1e-6):
    """Photon number per atom at which the corrected fit variance
    crosses the shot-noise limit, by bisection."""
    base, fisher_sum = variance_fit_pattern(model, bin_width)
    snl = 1.0 / model.n_particles
    if base >= snl:
        raise ValidationError(
            "fit variance already above the shot-noise limit; no "
            "fluorescence threshold exists")

    def excess(alpha):
        return variance_fit_fluorescence(base, alpha, fisher_sum) - snl

    lo, hi = tol, 1.0
    while excess(hi) > 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise DegenerateModelError("fluorescence threshold bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol:
            return mid
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Gaussian-model scaling and optimal-state sweeps


def gaussian_two_term(n_particles, beta):
    """Per-shot variance of the Gaussian-amplitude model family whose
    squeezing scales as N^(-beta): squeezing term plus contrast term."""
    n = float(n_particles)
    return n ** (-(beta + 1.0)) + n ** ((beta - 3.0) / 2.0)


def gaussian_scaling_optimum(n_particles):
    """Optimal exponent of the Gaussian-model family and the resulting
    per-shot variance law (the two terms balance at beta = 1/3)."""
    n = float(n_particles)
    if n < 2:
        raise ValidationError("need at least 2 particles")
    return 1.0 / 3.0, 2.0 * n ** (-4.0 / 3.0)


@dataclass(frozen=True)
class OptimalState:
    """Ground state of the interaction family minimizing the clean
    fringe-readout variance at fixed N."""

    chi: float
    state: object
    moments: object
    summary: object
    report: VarianceReport


def optimal_pattern_state(n_particles):
    n = int(n_particles)

    def objective(state):
        s = summarize(moments(state))
        return variance_pattern(n, s.xi_phi, s.visibility).variance_per_shot

    chi = optimal_chi(n, objective)
    state = ground_state(n, chi)
    mom = moments(state)
    s = summarize(mom)
    return OptimalState(chi=chi, state=state, moments=mom, summary=s,
                        report=variance_pattern(n, s.xi_phi, s.visibility))


@dataclass(frozen=True)
class ScalingRow:
    n_particles: int
    chi_opt: float
    xi_phi: float
    visibility: float
    var_clean: float
    qfi: float
    chi_opt_noisy: float
    var_noisy: float
    gauss_clean: float
    gauss_qfi: float


def scaling_sweep(n_values=(50, 100, 200, 400, 800), eta=0.9,
                  sigma_blur=0.2, kappa=1.0):
    """Optimal-state variances versus particle number.

    Clean and QFI columns are reported both for the numerically
    optimized interaction family and for the Gaussian-model laws
    (gauss_* columns); the noisy column re-optimizes the interaction
    strength under the noise channel.
    """
    rows = []
    for n in n_values:
        n = int(n)
        opt = optimal_pattern_state(n)

        def noisy_objective(state):
            s = summarize(moments(state))
            return variance_pattern_noisy(
                n, s.xi_phi, s.visibility, eta, sigma_blur,
                kappa).variance_per_shot

        chi_noisy = optimal_chi(n, noisy_objective)
        sn = summarize(moments(ground_state(n, chi_noisy)))
        rows.append(ScalingRow(
            n_particles=n,
            chi_opt=opt.chi,
            xi_phi=opt.summary.xi_phi,
            visibility=opt.summary.visibility,
            var_clean=opt.report.variance_per_shot,
            qfi=qfi_bound(opt.moments),
            chi_opt_noisy=chi_noisy,
            var_noisy=variance_pattern_noisy(
                n, sn.xi_phi, sn.visibility, eta, sigma_blur,
                kappa).variance_per_shot,
            gauss_clean=gaussian_scaling_optimum(n)[1],
            gauss_qfi=float(n) ** (-4.0 / 3.0)))
    return rows


def fit_power_law(n_values, variances):
    """Least-squares fit of A * N^(-p) on log-log axes -> (A, p)."""
    n = np.asarray(n_values, dtype=float)
    v = np.asarray(variances, dtype=float)
    if n.size < 2:
        raise ValidationError("need at least two points for a power law")
    slope, intercept = np.polyfit(np.log(n), np.log(v), 1)
    return math.exp(intercept), -slope
