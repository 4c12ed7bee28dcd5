"""Position densities produced by the two readout protocols.

After free expansion the clouds from the two wells overlap and the one-
and two-body position densities show interference fringes of wavenumber
kappa under a Gaussian envelope; the phase rides on the fringe offset.
If the clouds are instead kept apart (beam-splitter readout), positions
collapse onto two point-like arms and the densities reduce to discrete
two-outcome tables over the arms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .states import AngularMoments

TAU = 2.0 * math.pi


def wrap_angle(theta):
    """Map an angle to (-pi, pi]."""
    w = math.remainder(float(theta), TAU)
    if w <= -math.pi:
        w += TAU
    return w


@dataclass(frozen=True)
class WavePacket:
    """Expansion geometry: well half-separation x0, far-field scale
    sigma_tilde (fringe wavenumber kappa = 2*x0/sigma_tilde**2), and the
    std dev of the Gaussian envelope |psi~|^2."""

    x0: float
    sigma_tilde: float
    envelope_width: float

    def __post_init__(self):
        if min(self.x0, self.sigma_tilde, self.envelope_width) <= 0.0:
            raise ValidationError("wave-packet lengths must be positive")
        kw = self.kappa * self.envelope_width
        if kw < 40.0:
            # the asymptotic formulas assume many fringes under the envelope
            raise ValidationError(
                f"kappa*envelope_width = {kw:.3g} < 40: too few fringes")

    @property
    def kappa(self):
        return 2.0 * self.x0 / self.sigma_tilde ** 2

    @property
    def half_domain(self):
        # truncation radius for quadrature and sampling; the envelope
        # carries ~1e-15 of its mass beyond 8 widths
        return 8.0 * self.envelope_width

    @classmethod
    def dimensionless(cls, kappa_width=60.0):
        """Unit-kappa geometry (lengths in 1/kappa, fringe period 2*pi)."""
        return cls(x0=0.5, sigma_tilde=1.0, envelope_width=float(kappa_width))

    def envelope(self, x):
        w = self.envelope_width
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * (x / w) ** 2) / (math.sqrt(TAU) * w)


def envelope_density(x, wp):
    """Normalized Gaussian envelope density (std = wp.envelope_width)."""
    return wp.envelope(x)


class Protocol(enum.Enum):
    PATTERN = "pattern"
    MZI = "mzi"


@dataclass(frozen=True)
class DensityModel:
    """One- and two-body densities of a state read out at phase theta."""

    protocol: Protocol
    theta: float
    moments: AngularMoments
    n_particles: int
    wavepacket: WavePacket | None = None

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))
        if self.n_particles != self.moments.n_particles:
            raise ValidationError("n_particles disagrees with the moments")
        if self.protocol is Protocol.PATTERN and self.wavepacket is None:
            raise ValidationError("pattern protocol needs a wave packet")


def pattern_model(state_moments, theta, wp=None):
    if wp is None:
        wp = WavePacket.dimensionless()
    return DensityModel(Protocol.PATTERN, theta, state_moments,
                        state_moments.n_particles, wp)


def p1_pattern(x, model):
    """One-body fringe density |psi~|^2(x) * (1 + nu*cos(kappa*x + theta)).

    The sine quadrature enters for states whose mean spin has a Jy
    component; it vanishes for real-amplitude states.
    """
    mom, n, wp = model.moments, model.n_particles, model.wavepacket
    phi = wp.kappa * np.asarray(x, dtype=float) + model.theta
    a = 2.0 * mom.jx / n
    b = 2.0 * mom.jy / n
    return wp.envelope(x) * (1.0 + a * np.cos(phi) - b * np.sin(phi))


def dp1_dtheta(x, model):
    """Phase derivative of p1_pattern at fixed x."""
    mom, n, wp = model.moments, model.n_particles, model.wavepacket
    phi = wp.kappa * np.asarray(x, dtype=float) + model.theta
    a = 2.0 * mom.jx / n
    b = 2.0 * mom.jy / n
    return wp.envelope(x) * (-a * np.sin(phi) - b * np.cos(phi))


def fringe_basis(x, moments, n_particles, wp):
    """Arrays (base, cosine, sine) with p1(x|phi) = base + cosine*cos(phi)
    + sine*sin(phi); lets likelihood scans over phi reuse one evaluation."""
    x = np.asarray(x, dtype=float)
    env = wp.envelope(x)
    kx = wp.kappa * x
    a = 2.0 * moments.jx / n_particles
    b = 2.0 * moments.jy / n_particles
    ck, sk = np.cos(kx), np.sin(kx)
    return env, env * (a * ck - b * sk), env * (-a * sk - b * ck)


def p2_pattern(x1, x2, model):
    """Two-body fringe density (symmetric in its arguments).

    Single-fringe terms carry 2<Jx>/N and 2<Jy>/N; pair terms carry the
    second moments with the 1/(N-1) and 4/(N(N-1)) weights.
    """
    mom, n, wp = model.moments, model.n_particles, model.wavepacket
    if n < 2:
        raise ValidationError("two-body density needs N >= 2")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    phi1 = wp.kappa * x1 + model.theta
    phi2 = wp.kappa * x2 + model.theta
    c1, s1 = np.cos(phi1), np.sin(phi1)
    c2, s2 = np.cos(phi2), np.sin(phi2)
    a = 2.0 * mom.jx / n
    b = 2.0 * mom.jy / n
    pair = 4.0 / (n * (n - 1.0))
    bracket = (1.0
               - np.cos(wp.kappa * (x1 - x2)) / (n - 1.0)
               + a * (c1 + c2) - b * (s1 + s2)
               + pair * (mom.jx2 * c1 * c2 + mom.jy2 * s1 * s2
                         - mom.jxy * (s1 * c2 + c1 * s2)))
    return wp.envelope(x1) * wp.envelope(x2) * bracket


def mzi_densities(theta, moments, n_particles):
    """Discrete model for separated arms: readout rotates Jz by theta
    about Jy, then counts particles per arm."""
    return DensityModel(Protocol.MZI, theta, moments, int(n_particles))


def _rotated_jz(model):
    th, mom = model.theta, model.moments
    return math.cos(th) * mom.jz - math.sin(th) * mom.jx


def _rotated_jz2(model):
    th, mom = model.theta, model.moments
    c, s = math.cos(th), math.sin(th)
    return c * c * mom.jz2 + s * s * mom.jx2 - 2.0 * s * c * mom.jzx


def mzi_outcome_probs(model):
    """P(arm a), P(arm b) for one detected particle."""
    n = model.n_particles
    pa = 0.5 + _rotated_jz(model) / n
    return np.array([pa, 1.0 - pa])


def mzi_outcome_dtheta(model):
    """Phase derivatives of the outcome probabilities."""
    th, mom, n = model.theta, model.moments, model.n_particles
    dpa = (-math.sin(th) * mom.jz - math.cos(th) * mom.jx) / n
    return np.array([dpa, -dpa])


def mzi_pair_table(model):
    """2x2 two-body outcome table; rows/cols index arms (a, b).

    Built from the rotated number correlators; each row sums to the
    matching one-body probability, so the marginal identity is exact.
    """
    n = model.n_particles
    if n < 2:
        raise ValidationError("two-body table needs N >= 2")
    jz = _rotated_jz(model)
    jz2 = _rotated_jz2(model)
    norm = n * (n - 1.0)
    same_a = (0.25 * n * n - 0.5 * n + (n - 1.0) * jz + jz2) / norm
    same_b = (0.25 * n * n - 0.5 * n - (n - 1.0) * jz + jz2) / norm
    cross = (0.25 * n * n - jz2) / norm
    return np.array([[same_a, cross], [cross, same_b]])
