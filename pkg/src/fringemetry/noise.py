"""Detection-noise channels applied to sampled data.

Finite efficiency keeps each position independently with probability
eta; finite resolution jitters each kept position by a Gaussian of std
sigma_blur; fluorescence counting adds Gaussian noise to binned mean
counts. The channels are independent, so their order is irrelevant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .densities import fringe_basis
from .errors import ValidationError
from .sampling import Shot


@dataclass(frozen=True)
class NoiseSpec:
    eta: float = 1.0
    sigma_blur: float = 0.0
    alpha: float | None = None

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValidationError(f"eta = {self.eta} outside (0, 1]")
        if self.sigma_blur < 0.0:
            raise ValidationError("sigma_blur must be >= 0")
        if self.alpha is not None and self.alpha <= 0.0:
            raise ValidationError("alpha must be positive when given")

    @property
    def is_identity(self):
        return self.eta == 1.0 and self.sigma_blur == 0.0 \
            and self.alpha is None

    def to_json_dict(self):
        return {"eta": self.eta, "sigma_blur": self.sigma_blur,
                "alpha": self.alpha}

    @classmethod
    def from_json_dict(cls, d):
        return cls(eta=float(d.get("eta", 1.0)),
                   sigma_blur=float(d.get("sigma_blur", 0.0)),
                   alpha=None if d.get("alpha") is None
                   else float(d["alpha"]))


def thin(shot, eta, rng):
    """Keep each position independently with probability eta."""
    if not 0.0 < eta <= 1.0:
        raise ValidationError(f"eta = {eta} outside (0, 1]")
    if eta == 1.0:
        return shot
    keep = rng.random(shot.positions.size) < eta
    return Shot(positions=shot.positions[keep], theta_true=shot.theta_true,
                seed_path=shot.seed_path)


def blur(shot, sigma_blur, rng):
    """Add independent Gaussian position jitter of std sigma_blur."""
    if sigma_blur < 0.0:
        raise ValidationError("sigma_blur must be >= 0")
    if sigma_blur == 0.0:
        return shot
    jitter = rng.normal(0.0, sigma_blur, size=shot.positions.size)
    return Shot(positions=shot.positions + jitter,
                theta_true=shot.theta_true, seed_path=shot.seed_path)


def apply_noise(shot, spec, rng):
    return blur(thin(shot, spec.eta, rng), spec.sigma_blur, rng)


def fluorescence(counts, alpha, m, rng):
    """Mean counts read out through on average alpha photons per atom:
    adds zero-mean Gaussian noise of variance counts/(alpha*m) per bin.

    Negative results are clipped to zero (the Gaussian model allows
    them); a warning reports how many bins were clipped.
    """
    if alpha <= 0.0:
        raise ValidationError("alpha must be positive")
    counts = np.asarray(counts, dtype=float)
    noisy = counts + rng.normal(0.0, 1.0, size=counts.size) \
        * np.sqrt(np.maximum(counts, 0.0) / (alpha * m))
    clipped = int(np.sum(noisy < 0.0))
    if clipped:
        warnings.warn(f"fluorescence noise drove {clipped} bin(s) "
                      "negative; clipped to zero", stacklevel=2)
        noisy = np.maximum(noisy, 0.0)
    return noisy


def gaussian_kernel(step, sigma):
    """Discrete Gaussian of std sigma on a grid of spacing step,
    truncated at 6 sigma and normalized to unit sum."""
    if sigma <= 0.0:
        raise ValidationError("kernel needs sigma > 0")
    radius = max(1, int(math.ceil(6.0 * sigma / step)))
    t = np.arange(-radius, radius + 1) * step
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def convolve_density(values, step, sigma):
    """Numerically convolve grid samples of a density with a Gaussian.

    Zero padding is exact here because every density we blur lives
    under an envelope that has decayed below double precision at the
    grid edges.
    """
    if sigma == 0.0:
        return np.asarray(values, dtype=float)
    kernel = gaussian_kernel(step, sigma)
    return np.convolve(np.asarray(values, dtype=float), kernel, mode="same")


def blurred_fringe_basis(x_nodes, moments, n_particles, wp, sigma_blur):
    """The three fringe basis functions convolved with the resolution
    kernel on a uniform grid; the noisy-model estimator interpolates
    these instead of the sharp basis."""
    x_nodes = np.asarray(x_nodes, dtype=float)
    step = x_nodes[1] - x_nodes[0]
    base, cpart, spart = fringe_basis(x_nodes, moments, n_particles, wp)
    return (convolve_density(base, step, sigma_blur),
            convolve_density(cpart, step, sigma_blur),
            convolve_density(spart, step, sigma_blur))
