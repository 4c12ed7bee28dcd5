"""Exact sampling of particle positions from the N-body fringe density.

Detecting a particle at x applies the position-weighted annihilator to
the two-mode state; the leftover (N-1)-particle state again has a
single-harmonic one-body density. Shots are therefore drawn one
particle at a time: combine three fixed cumulative fringe integrals
with the current reduced-state moments, invert the cell-wise CDF, then
reduce the state at the sampled point. Exact up to the piecewise-linear
density grid.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .densities import wrap_angle
from .errors import NumericalError, ValidationError
from .states import TwoModeState, _jx_eigensystem, _ladder


@dataclass(frozen=True)
class Shot:
    """Positions of all detected particles for one experimental run."""

    positions: np.ndarray
    theta_true: float
    seed_path: tuple | None = None


@dataclass(frozen=True)
class ReducedState:
    """State conditioned on the detections so far.

    Amplitudes are kept normalized; log_weight accumulates the log of
    the raw squared norm lost at each detection (the record weight
    itself underflows after a few dozen detections, which is the point
    of tracking it in log space).
    """

    n_total: int
    remaining: int
    amplitudes: np.ndarray
    log_weight: float = 0.0


def initial_reduced(state):
    return ReducedState(n_total=state.n_particles,
                        remaining=state.n_particles,
                        amplitudes=np.asarray(state.amplitudes, dtype=complex),
                        log_weight=0.0)


def apply_field_operator(state, x, theta, wp):
    """Annihilate one particle at position x with fringe phase theta.

    Returns the renormalized conditional state; the raw squared norm
    (the one-body density contribution of this detection, scaled by
    remaining/n_total) moves into log_weight.
    """
    r = state.remaining
    if r < 1:
        raise ValidationError("no particles left to detect")
    c = state.amplitudes
    j = np.arange(r)
    half = 0.5 * (wp.kappa * x + theta)
    coef_a = np.exp(-1j * half)
    coef_b = np.exp(1j * half)
    d = coef_a * np.sqrt(j + 1.0) * c[1:] + coef_b * np.sqrt(r - j) * c[:r]
    d *= math.sqrt(wp.envelope(x) / state.n_total)
    w = np.vdot(d, d).real
    if w <= 0.0 or not math.isfinite(w):
        raise NumericalError(
            f"conditional weight underflow at x = {x!r} "
            f"({state.n_total - r + 1} of {state.n_total} detections)")
    return ReducedState(n_total=state.n_total, remaining=r - 1,
                        amplitudes=d / math.sqrt(w),
                        log_weight=state.log_weight + math.log(w))


def _transverse_moments(c, r):
    # <Jx>, <Jy> of a normalized r-particle amplitude vector
    f = _ladder(r)
    jp = np.zeros(r + 1, dtype=complex)
    jm = np.zeros(r + 1, dtype=complex)
    jp[1:] = f * c[:-1]
    jm[:-1] = f * c[1:]
    jx = np.vdot(c, 0.5 * (jp + jm)).real
    jy = np.vdot(c, -0.5j * (jp - jm)).real
    return jx, jy


class _FringeGrid:
    """Node values and cumulative trapezoid masses of the three fringe
    basis functions env, env*cos(kappa x + theta), env*sin(...)."""

    def __init__(self, wp, theta, points_per_fringe=64):
        half = wp.half_domain
        fringes = wp.kappa * 2.0 * half / (2.0 * math.pi)
        n_cells = max(4096, int(math.ceil(points_per_fringe * fringes)))
        self.nodes = np.linspace(-half, half, n_cells + 1)
        self.step = self.nodes[1] - self.nodes[0]
        env = wp.envelope(self.nodes)
        phi = wp.kappa * self.nodes + theta
        self.d0 = env
        self.dc = env * np.cos(phi)
        self.ds = env * np.sin(phi)
        self.m0 = 0.5 * self.step * (self.d0[:-1] + self.d0[1:])
        self.mc = 0.5 * self.step * (self.dc[:-1] + self.dc[1:])
        self.ms = 0.5 * self.step * (self.ds[:-1] + self.ds[1:])

    def draw(self, r, jx, jy, u):
        """One position from the density env*(r + 2 jx cos - 2 jy sin)."""
        mass = r * self.m0 + (2.0 * jx) * self.mc - (2.0 * jy) * self.ms
        np.maximum(mass, 0.0, out=mass)
        cdf = np.cumsum(mass)
        total = cdf[-1]
        if total <= 0.0 or not math.isfinite(total):
            raise NumericalError("conditional fringe density has no mass")
        target = u * total
        k = int(np.searchsorted(cdf, target, side="right"))
        k = min(k, mass.size - 1)
        rest = target - (cdf[k - 1] if k > 0 else 0.0)
        dl = r * self.d0[k] + 2.0 * jx * self.dc[k] - 2.0 * jy * self.ds[k]
        dr = r * self.d0[k + 1] + 2.0 * jx * self.dc[k + 1] \
            - 2.0 * jy * self.ds[k + 1]
        dl, dr = max(dl, 0.0), max(dr, 0.0)
        h = self.step
        slope = (dr - dl) / h
        # invert the linear-density cell mass dl*t + slope*t^2/2 = rest
        if abs(slope) * h < 1e-12 * max(dl, 1e-300):
            t = rest / dl if dl > 0.0 else 0.5 * h
        else:
            disc = dl * dl + 2.0 * slope * rest
            t = (math.sqrt(max(disc, 0.0)) - dl) / slope
        t = min(max(t, 0.0), h)
        return self.nodes[k] + t


@functools.lru_cache(maxsize=16)
def _grid_for(wp, theta, points_per_fringe):
    return _FringeGrid(wp, theta, points_per_fringe)


def sample_shot(state, wp, theta, rng, seed_path=None, points_per_fringe=64):
    """All N particle positions of one shot, drawn from the exact joint
    bosonic density at fringe phase theta."""
    theta = wrap_angle(theta)
    grid = _grid_for(wp, theta, points_per_fringe)
    reduced = initial_reduced(state)
    positions = np.empty(state.n_particles)
    for k in range(state.n_particles):
        jx, jy = _transverse_moments(reduced.amplitudes, reduced.remaining)
        x = grid.draw(reduced.remaining, jx, jy, rng.random())
        positions[k] = x
        reduced = apply_field_operator(reduced, x, theta, wp)
    return Shot(positions=positions, theta_true=theta, seed_path=seed_path)


def sample_binned(state, wp, theta, bin_width, m, rng):
    """Mean counts over m shots on a regular grid, with per-bin sample
    variances (zero for m = 1)."""
    if bin_width > 0.25 / wp.kappa + 1e-12:
        raise ValidationError(
            "bin width must not exceed 0.25/kappa: fringes would be "
            "under-resolved")
    half = wp.half_domain
    n_bins = int(round(2.0 * half / bin_width))
    edges = np.linspace(-half, half, n_bins + 1)
    counts = np.empty((m, n_bins))
    for i in range(m):
        shot = sample_shot(state, wp, theta, rng)
        counts[i], _ = np.histogram(shot.positions, bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    mean = counts.mean(axis=0)
    var = counts.var(axis=0, ddof=1) if m > 1 else np.zeros(n_bins)
    return centers, mean, var


def write_shots_csv(shots, path):
    """Stream shots to disk as (shot_id, particle_id, x) rows."""
    with open(path, "w") as fh:
        fh.write("shot_id,particle_id,x\n")
        for i, shot in enumerate(shots):
            for k, x in enumerate(shot.positions):
                fh.write(f"{i},{k},{float(x)!r}\n")


def write_binned_csv(centers, mean, var, path):
    """Write binned count data as (bin_center, mean, var) rows."""
    with open(path, "w") as fh:
        fh.write("bin_center,mean,var\n")
        for c, m_, v in zip(centers, mean, var):
            fh.write(f"{float(c)!r},{float(m_)!r},{float(v)!r}\n")


def rotate_about_jy(state, theta):
    """exp(-i*theta*Jy) through the Jx eigensystem (Jy is Jx conjugated
    by the diagonal i**j phase)."""
    n = state.n_particles
    w, v = _jx_eigensystem(n)
    ph = (1j) ** np.arange(n + 1)
    c = ph * state.amplitudes
    c = v @ (np.exp(-1j * theta * w) * (v.T @ c))
    return TwoModeState(n, np.conj(ph) * c)


def sample_mzi_counts(state, theta, m, rng):
    """Arm-a occupation numbers for m shots of the separated-arm readout.

    Positions in the two arms carry no information beyond the counts,
    so the readout reduces to sampling the rotated number distribution.
    """
    rotated = rotate_about_jy(state, theta)
    probs = np.abs(rotated.amplitudes) ** 2
    probs = np.maximum(probs, 0.0)
    probs /= probs.sum()
    return rng.choice(state.n_particles + 1, size=m, p=probs)
