"""Phase estimators and the Monte-Carlo experiment harness.

The maximum-likelihood estimator deliberately uses only the one-body
fringe density, ignoring all inter-particle correlations in the data;
the binned estimator fits the same density to accumulated counts. Both
scan a coarse phase grid and then refine, since fringe likelihoods need
a global search over the full period.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import minimize_scalar

from .densities import DensityModel, Protocol, WavePacket, fringe_basis, \
    pattern_model, wrap_angle
from .errors import InvariantViolation, ValidationError
from .noise import NoiseSpec, apply_noise, blurred_fringe_basis, fluorescence
from .sampling import Shot, sample_mzi_counts, sample_shot
from .states import chi_for_xi_phi, coherent_state, gaussian_phase_squeezed, \
    ground_state, moments, summarize
from .theory import qfi_bound, variance_fit_fluorescence, \
    variance_fit_pattern, variance_mzi, variance_pattern, \
    variance_pattern_noisy

_P_FLOOR = 1e-300
_GRID_POINTS = 512


def pool_positions(shots):
    """Flatten shots (a Shot, an array, or a sequence of either) into a
    single position vector."""
    if isinstance(shots, Shot):
        return np.asarray(shots.positions, dtype=float)
    if isinstance(shots, np.ndarray):
        return shots.ravel().astype(float)
    parts = [s.positions if isinstance(s, Shot) else np.asarray(s, float)
             for s in shots]
    if not parts:
        raise ValidationError("no shots to estimate from")
    return np.concatenate([np.atleast_1d(p).ravel() for p in parts])


@functools.lru_cache(maxsize=8)
def _blurred_nodes(model, sigma_blur, points_per_fringe=64):
    wp = model.wavepacket
    half = wp.half_domain + 8.0 * sigma_blur
    fringes = wp.kappa * 2.0 * half / (2.0 * math.pi)
    n_cells = max(4096, int(math.ceil(points_per_fringe * fringes)))
    nodes = np.linspace(-half, half, n_cells + 1)
    basis = blurred_fringe_basis(nodes, model.moments, model.n_particles,
                                 wp, sigma_blur)
    return nodes, basis


def _basis_at(x, model, sigma_blur=0.0):
    if sigma_blur == 0.0:
        return fringe_basis(x, model.moments, model.n_particles,
                            model.wavepacket)
    nodes, (b, c, s) = _blurred_nodes(model, sigma_blur)
    return (np.interp(x, nodes, b), np.interp(x, nodes, c),
            np.interp(x, nodes, s))


def log_likelihood(shots, phi, model, sigma_blur=0.0):
    """Sum of log one-body densities at fringe phase phi.

    Densities are floored at 1e-300 (dark-fringe guard); a warning
    reports how many points hit the floor.
    """
    x = pool_positions(shots)
    if x.size == 0:
        raise ValidationError("no positions in the data")
    phi = wrap_angle(phi)   # keeps phi and phi + 2*pi bit-identical
    base, cpart, spart = _basis_at(x, model, sigma_blur)
    p = base + math.cos(phi) * cpart + math.sin(phi) * spart
    floored = int(np.sum(p < _P_FLOOR))
    if floored:
        warnings.warn("likelihood floored on dark-fringe points",
                      stacklevel=2)
    return float(np.log(np.maximum(p, _P_FLOOR)).sum())


@dataclass(frozen=True)
class EstimateDetail:
    theta_hat: float
    log_likelihood: float
    ambiguous: bool


def _scan_and_refine(objective_grid, scalar_objective, refine_tol):
    """Maximize over (-pi, pi]: coarse scan, then bounded refinement of
    the best grid peak; flags a second peak refining to the same value."""
    phis = -math.pi + 2.0 * math.pi * (np.arange(_GRID_POINTS) + 1.0) \
        / _GRID_POINTS
    vals = objective_grid(phis)
    step = 2.0 * math.pi / _GRID_POINTS

    def refine(k):
        lo, hi = phis[k] - step, phis[k] + step
        r = minimize_scalar(lambda p: -scalar_objective(p),
                            bounds=(lo, hi), method="bounded",
                            options={"xatol": 0.1 * refine_tol})
        return float(r.x), -float(r.fun)

    k_best = int(np.argmax(vals))
    best_phi, best_val = refine(k_best)

    ambiguous = False
    is_peak = (vals >= np.roll(vals, 1)) & (vals >= np.roll(vals, -1))
    is_peak[k_best] = False
    peaks = np.flatnonzero(is_peak)
    if peaks.size:
        runner = int(peaks[np.argmax(vals[peaks])])
        # only peaks close in likelihood can tie after refinement
        if vals[runner] >= best_val - 2.0:
            phi2, val2 = refine(runner)
            if abs(val2 - best_val) < 1e-6 \
                    and abs(wrap_angle(phi2 - best_phi)) > refine_tol:
                ambiguous = True
    return wrap_angle(best_phi), best_val, ambiguous


def mle_estimate(shots, model, sigma_blur=0.0, refine_tol=1e-6,
                 with_detail=False):
    """Phase maximizing the one-body likelihood of the pooled positions."""
    x = pool_positions(shots)
    if x.size == 0:
        raise ValidationError("no positions in the data")
    base, cpart, spart = _basis_at(x, model, sigma_blur)

    def grid_vals(phis):
        p = base[None, :] + np.cos(phis)[:, None] * cpart[None, :] \
            + np.sin(phis)[:, None] * spart[None, :]
        return np.log(np.maximum(p, _P_FLOOR)).sum(axis=1)

    def scalar(phi):
        p = base + math.cos(phi) * cpart + math.sin(phi) * spart
        return float(np.log(np.maximum(p, _P_FLOOR)).sum())

    theta_hat, val, ambiguous = _scan_and_refine(grid_vals, scalar,
                                                 refine_tol)
    if with_detail:
        return EstimateDetail(theta_hat, val, ambiguous)
    return theta_hat


def fit_estimate(mean_counts, centers, model, m_shots, eta=1.0,
                 sigma_blur=0.0, refine_tol=1e-6, with_detail=False):
    """Phase fitting the one-body model to binned mean counts.

    The fit maximizes the counting likelihood of the accumulated
    histogram, i.e. the count-weighted log model density. This is the
    self-consistent limit of the inverse-variance-weighted least-squares
    fit (identical stationarity equation), but stays well posed when
    bins hold only a few atoms, where any fixed chi-square weighting is
    dominated by sparsely populated tail bins. Its asymptotic variance
    is the corrected least-squares formula of variance_fit_pattern. The
    total model mass over the bin grid carries no phase dependence at
    the grid resolutions in use, so only kept bins enter.
    """
    counts = np.asarray(mean_counts, dtype=float)
    centers = np.asarray(centers, dtype=float)
    if counts.shape != centers.shape:
        raise ValidationError("counts and bin centers disagree in shape")
    del m_shots, eta   # argmax is invariant under count rescaling
    keep = counts > 0.0
    if not np.any(keep):
        raise ValidationError("all bins are empty")
    if not np.all(keep):
        warnings.warn("empty bins excluded from the fit", stacklevel=2)
    counts = counts[keep]
    x = centers[keep]
    base, cpart, spart = _basis_at(x, model, sigma_blur)

    def grid_vals(phis):
        p = base[None, :] + np.cos(phis)[:, None] * cpart[None, :] \
            + np.sin(phis)[:, None] * spart[None, :]
        return np.log(np.maximum(p, _P_FLOOR)) @ counts

    def scalar(phi):
        p = base + math.cos(phi) * cpart + math.sin(phi) * spart
        return float(np.log(np.maximum(p, _P_FLOOR)) @ counts)

    theta_hat, val, ambiguous = _scan_and_refine(grid_vals, scalar,
                                                 refine_tol)
    if with_detail:
        return EstimateDetail(theta_hat, val, ambiguous)
    return theta_hat


def mzi_estimate(counts, n_particles, visibility):
    """Phase from the mean arm-a fraction on the branch (-pi/2, pi/2]."""
    if visibility <= 0.0:
        raise ValidationError("need nonzero visibility to invert the fringe")
    counts = np.asarray(counts, dtype=float)
    if counts.size == 0:
        raise ValidationError("no counts to estimate from")
    frac = counts.mean() / n_particles
    s = (1.0 - 2.0 * frac) / visibility
    return math.asin(min(1.0, max(-1.0, s)))


# ---------------------------------------------------------------------------
# campaigns


@dataclass(frozen=True)
class CampaignConfig:
    """Full recipe for one Monte-Carlo ensemble."""

    n_particles: int
    m_shots: int
    n_rep: int
    theta_true: float = 0.0
    state_kind: str = "ground"     # ground | gaussian | coherent
    chi: float | None = None
    xi_phi: float | None = None
    protocol: str = "pattern"      # pattern | mzi
    estimator: str = "mle"         # mle | fit
    bin_width: float | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    master_seed: int = 0
    kappa_width: float = 60.0
    exclude_ambiguous: bool = False

    def __post_init__(self):
        if self.m_shots < 1:
            raise ValidationError("m_shots must be >= 1")
        if self.n_rep < 2:
            raise ValidationError("n_rep must be >= 2")
        object.__setattr__(self, "theta_true", wrap_angle(self.theta_true))
        if self.state_kind not in ("ground", "gaussian", "coherent"):
            raise ValidationError(f"unknown state kind {self.state_kind!r}")
        if self.protocol not in ("pattern", "mzi"):
            raise ValidationError(f"unknown protocol {self.protocol!r}")
        if self.estimator not in ("mle", "fit"):
            raise ValidationError(f"unknown estimator {self.estimator!r}")
        if self.state_kind == "ground" and (self.chi is None) \
                == (self.xi_phi is None):
            raise ValidationError("ground state needs exactly one of "
                                  "chi or xi_phi")
        if self.state_kind == "gaussian" and self.xi_phi is None:
            raise ValidationError("gaussian state needs xi_phi")
        if self.estimator == "fit":
            if self.protocol != "pattern":
                raise ValidationError("fit estimator needs the pattern "
                                      "protocol")
            if self.bin_width is None:
                raise ValidationError("fit estimator needs bin_width")
            if self.noise.eta < 1.0 or self.noise.sigma_blur > 0.0:
                raise ValidationError(
                    "fit campaigns support fluorescence noise only")
        if self.protocol == "mzi" and not self.noise.is_identity:
            raise ValidationError("noise channels are position-space; "
                                  "not modeled for the arm readout")

    def build_state(self):
        n = self.n_particles
        if self.state_kind == "coherent":
            return coherent_state(n)
        if self.state_kind == "gaussian":
            return gaussian_phase_squeezed(n, self.xi_phi)
        chi = self.chi if self.chi is not None \
            else chi_for_xi_phi(n, self.xi_phi)
        return ground_state(n, chi)

    def to_json_dict(self):
        d = asdict(self)
        d["noise"] = self.noise.to_json_dict()
        return d

    @classmethod
    def from_json_dict(cls, d):
        d = dict(d)
        noise = d.pop("noise", None)
        if noise is not None:
            noise = NoiseSpec.from_json_dict(noise)
        else:
            noise = NoiseSpec()
        return cls(noise=noise, **d)


@dataclass(frozen=True)
class CampaignResult:
    estimates: np.ndarray
    mean: float
    variance: float
    variance_stderr: float
    mean_stderr: float
    predicted_variance: float
    predicted_per_shot: float
    n_ambiguous: int
    n_used: int

    def to_json_dict(self):
        return {
            "estimates": [float(e) for e in self.estimates],
            "mean": self.mean,
            "variance": self.variance,
            "variance_stderr": self.variance_stderr,
            "mean_stderr": self.mean_stderr,
            "predicted_variance":
                self.predicted_variance
                if math.isfinite(self.predicted_variance) else None,
            "predicted_per_shot":
                self.predicted_per_shot
                if math.isfinite(self.predicted_per_shot) else None,
            "n_ambiguous": self.n_ambiguous,
            "n_used": self.n_used,
        }


def predicted_per_shot(config, state=None):
    """The asymptotic per-shot variance matching a campaign config."""
    if state is None:
        state = config.build_state()
    mom = moments(state)
    if config.protocol == "mzi":
        return variance_mzi(mom, config.theta_true)
    s = summarize(mom)
    wp = WavePacket.dimensionless(config.kappa_width)
    if config.estimator == "fit":
        model = pattern_model(mom, config.theta_true, wp)
        v, fisher_sum = variance_fit_pattern(model, config.bin_width)
        if config.noise.alpha is not None:
            v = variance_fit_fluorescence(v, config.noise.alpha, fisher_sum)
        return v
    if config.noise.eta < 1.0 or config.noise.sigma_blur > 0.0:
        return variance_pattern_noisy(
            config.n_particles, s.xi_phi, s.visibility, config.noise.eta,
            config.noise.sigma_blur, wp.kappa).variance_per_shot
    return variance_pattern(config.n_particles, s.xi_phi,
                            s.visibility).variance_per_shot


def _one_pattern_estimate(config, state, model, wp, rep):
    rep_ss = np.random.SeedSequence(config.master_seed, spawn_key=(rep,))
    children = rep_ss.spawn(config.m_shots + 1)
    shots = []
    for i in range(config.m_shots):
        rng = np.random.default_rng(children[i])
        shot = sample_shot(state, wp, config.theta_true, rng,
                           seed_path=(config.master_seed, rep, i))
        if not config.noise.is_identity:
            shot = apply_noise(shot, config.noise, rng)
        shots.append(shot)
    if config.estimator == "mle":
        return mle_estimate(shots, model,
                            sigma_blur=config.noise.sigma_blur,
                            with_detail=True)
    half = wp.half_domain
    n_bins = int(round(2.0 * half / config.bin_width))
    edges = np.linspace(-half, half, n_bins + 1)
    total = np.zeros(n_bins)
    for shot in shots:
        hist, _ = np.histogram(shot.positions, bins=edges)
        total += hist
    mean_counts = total / config.m_shots
    if config.noise.alpha is not None:
        rng = np.random.default_rng(children[config.m_shots])
        mean_counts = fluorescence(mean_counts, config.noise.alpha,
                                   config.m_shots, rng)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return fit_estimate(mean_counts, centers, model, config.m_shots,
                        eta=config.noise.eta,
                        sigma_blur=config.noise.sigma_blur,
                        with_detail=True)


def run_campaign(config, check_invariants=True):
    """n_rep independent estimates, each from m fresh shots; returns the
    ensemble statistics next to the matching asymptotic prediction."""
    state = config.build_state()
    mom = moments(state)
    wp = WavePacket.dimensionless(config.kappa_width)
    model = pattern_model(mom, config.theta_true, wp) \
        if config.protocol == "pattern" else None
    visibility = summarize(mom).visibility

    estimates = np.empty(config.n_rep)
    ambiguous = np.zeros(config.n_rep, dtype=bool)
    for rep in range(config.n_rep):
        if config.protocol == "mzi":
            rep_ss = np.random.SeedSequence(config.master_seed,
                                            spawn_key=(rep,))
            rng = np.random.default_rng(rep_ss.spawn(1)[0])
            counts = sample_mzi_counts(state, config.theta_true,
                                       config.m_shots, rng)
            estimates[rep] = mzi_estimate(counts, config.n_particles,
                                          visibility)
        else:
            detail = _one_pattern_estimate(config, state, model, wp, rep)
            estimates[rep] = detail.theta_hat
            ambiguous[rep] = detail.ambiguous

    used = estimates[~ambiguous] if config.exclude_ambiguous else estimates
    if used.size < 2:
        raise ValidationError("fewer than two usable estimates")
    dev = np.array([wrap_angle(e - config.theta_true) for e in used])
    variance = float(dev.var(ddof=1))
    mean = config.theta_true + float(dev.mean())
    per_shot = predicted_per_shot(config, state)
    result = CampaignResult(
        estimates=used,
        mean=mean,
        variance=variance,
        variance_stderr=variance * math.sqrt(2.0 / (used.size - 1.0)),
        mean_stderr=math.sqrt(variance / used.size),
        predicted_variance=per_shot / config.m_shots,
        predicted_per_shot=per_shot,
        n_ambiguous=int(ambiguous.sum()),
        n_used=int(used.size))

    if check_invariants:
        floor = qfi_bound(mom) / config.m_shots
        if math.isfinite(floor) and \
                result.variance + 3.0 * result.variance_stderr < floor:
            raise InvariantViolation(
                f"campaign variance {result.variance:.3e} sits below the "
                f"information floor {floor:.3e} by more than 3 stderr")
    return result
