"""Two-mode N-particle states in the Fock basis |j, N-j>.

Constructors for interacting ground states and Gaussian phase-squeezed
states, plus exact angular-momentum moments and squeezing summaries.
All amplitudes live on the (N+1)-dimensional ladder j = 0..N; the
collective operators couple neighbouring rungs with
f_j = sqrt((j+1)(N-j)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import minimize_scalar

from .errors import NumericalError, ValidationError

_NORM_TOL = 1e-12


def _ladder(n):
    j = np.arange(n)
    return np.sqrt((j + 1.0) * (n - j))


def _fix_phase(c):
    # Global phase: largest-magnitude amplitude made real positive, so
    # vectors are reproducible across platforms.
    k = int(np.argmax(np.abs(c)))
    ph = c[k] / abs(c[k])
    c = c / ph
    if abs(c.imag).max() < 1e-14:
        c = c.real.astype(complex)
    return c


@dataclass(frozen=True)
class TwoModeState:
    """Normalized amplitudes c_j of |j, N-j>, j = 0..N."""

    n_particles: int
    amplitudes: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.amplitudes, dtype=complex)
        if c.shape != (self.n_particles + 1,):
            raise ValidationError(
                f"need {self.n_particles + 1} amplitudes, got {c.shape}")
        norm = np.vdot(c, c).real
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValidationError(f"state not normalized: |c|^2 = {norm!r}")
        object.__setattr__(self, "amplitudes", c)

    @classmethod
    def from_amplitudes(cls, amplitudes):
        """Build a state from an arbitrary nonzero vector, normalizing it."""
        c = np.asarray(amplitudes, dtype=complex)
        norm = math.sqrt(np.vdot(c, c).real)
        if norm == 0.0:
            raise ValidationError("zero amplitude vector")
        return cls(len(c) - 1, c / norm)

    def to_json_dict(self):
        return {"n": self.n_particles,
                "re": self.amplitudes.real.tolist(),
                "im": self.amplitudes.imag.tolist()}

    @classmethod
    def from_json_dict(cls, d):
        c = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
        return cls(int(d["n"]), c)


@dataclass(frozen=True)
class AngularMoments:
    """First and second collective-spin moments (symmetrized cross terms)."""

    n_particles: int
    jx: float
    jy: float
    jz: float
    jx2: float
    jy2: float
    jz2: float
    jxy: float
    jzx: float
    jyz: float

    @property
    def var_jx(self):
        return self.jx2 - self.jx ** 2

    @property
    def var_jy(self):
        return self.jy2 - self.jy ** 2

    @property
    def var_jz(self):
        return self.jz2 - self.jz ** 2

    @property
    def cov_jzx(self):
        return self.jzx - self.jz * self.jx


@dataclass(frozen=True)
class SqueezingSummary:
    xi_n: float
    xi_phi: float
    visibility: float
    qfi: float


def ground_state(n_particles, chi):
    """Ground state of -Jx + chi*Jz^2 (chi < 0 gives phase squeezing)."""
    n = int(n_particles)
    if n < 2:
        raise ValidationError("need at least 2 particles")
    if not math.isfinite(chi):
        raise ValidationError("chi must be finite")
    j = np.arange(n + 1)
    diag = chi * (j - n / 2.0) ** 2
    off = -0.5 * _ladder(n)
    try:
        _, v = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    except Exception as exc:  # scipy raises LinAlgError on breakdown
        raise NumericalError(f"ground-state eigensolve failed: {exc}") from exc
    c = _fix_phase(v[:, 0].astype(complex))
    return TwoModeState(n, c)


def coherent_state(n_particles):
    """Spin-coherent state along +x: binomial amplitudes, exact Jx eigenstate."""
    n = int(n_particles)
    if n < 2:
        raise ValidationError("need at least 2 particles")
    j = np.arange(n + 1)
    # log C(n, j) / 2^n, summed in log space to survive large n
    from scipy.special import gammaln
    logc = 0.5 * (gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)) \
        - 0.5 * n * math.log(2.0)
    c = np.exp(logc - logc.max())
    return TwoModeState.from_amplitudes(c)


def _jx_eigensystem(n):
    w, v = eigh_tridiagonal(np.zeros(n + 1), 0.5 * _ladder(n))
    return w, v


def beam_splitter(state, angle=-0.5 * math.pi):
    """Apply exp(i*angle*Jx) through the exact Jx eigendecomposition."""
    n = state.n_particles
    w, v = _jx_eigensystem(n)
    c = v @ (np.exp(1j * angle * w) * (v.T @ state.amplitudes))
    return TwoModeState(n, c)


def gaussian_phase_squeezed(n_particles, xi_phi):
    """Gaussian model state with target phase squeezing xi_phi in (0, 1].

    A number-basis Gaussian exp(-(j-N/2)^2/(N s)) with s = xi_phi^2 is
    rotated onto the phase-squeezed axis by the pi/2 beam splitter. The
    exponent carries the squared parameter: s is (to first order) the
    squeezing parameter squared of the resulting state.
    """
    n = int(n_particles)
    if n < 2:
        raise ValidationError("need at least 2 particles")
    if not 0.0 < xi_phi <= 1.0:
        raise ValidationError("xi_phi must lie in (0, 1]")
    s = xi_phi ** 2
    j = np.arange(n + 1)
    g = np.exp(-((j - n / 2.0) ** 2) / (n * s))
    pre = TwoModeState.from_amplitudes(g)
    out = beam_splitter(pre, angle=-0.5 * math.pi)
    return TwoModeState(n, _fix_phase(out.amplitudes))


def moments(state):
    """Exact first/second moments of Jx, Jy, Jz for any amplitude vector."""
    n = state.n_particles
    c = state.amplitudes
    f = _ladder(n)
    jp = np.zeros(n + 1, dtype=complex)
    jm = np.zeros(n + 1, dtype=complex)
    jp[1:] = f * c[:-1]
    jm[:-1] = f * c[1:]
    jxv = 0.5 * (jp + jm)
    jyv = -0.5j * (jp - jm)
    jzv = (np.arange(n + 1) - n / 2.0) * c

    def ev(vec):
        return np.vdot(c, vec).real

    def cross(a, b):
        return np.vdot(a, b).real

    return AngularMoments(
        n_particles=n,
        jx=ev(jxv), jy=ev(jyv), jz=ev(jzv),
        jx2=cross(jxv, jxv), jy2=cross(jyv, jyv), jz2=cross(jzv, jzv),
        jxy=cross(jxv, jyv), jzx=cross(jzv, jxv), jyz=cross(jyv, jzv))


def summarize(mom, n_particles=None):
    """Squeezing parameters, visibility, and QFI from the moments.

    Quantities are taken in the frame whose x axis points along the
    transverse mean spin, so states that only differ by a rotation about
    Jz (a fringe-phase offset) get identical summaries.
    """
    n = mom.n_particles if n_particles is None else n_particles
    qfi = 4.0 * mom.var_jz
    j_perp = math.hypot(mom.jx, mom.jy)
    if j_perp == 0.0:
        # squeezing parameters lose meaning without a mean spin direction
        return SqueezingSummary(xi_n=math.inf, xi_phi=math.inf,
                                visibility=0.0, qfi=qfi)
    cs = mom.jx / j_perp
    sn = mom.jy / j_perp
    var_orth = sn ** 2 * mom.jx2 + cs ** 2 * mom.jy2 - 2.0 * sn * cs * mom.jxy
    xi_n = math.sqrt(n * mom.var_jz) / j_perp
    xi_phi = math.sqrt(n * var_orth) / j_perp
    return SqueezingSummary(xi_n=xi_n, xi_phi=xi_phi,
                            visibility=2.0 * j_perp / n, qfi=qfi)


def xi_phi_of(n_particles, chi):
    return summarize(moments(ground_state(n_particles, chi))).xi_phi


def squeezing_branch_floor(n_particles, chi_min=-10.0):
    """chi minimizing xi_phi over [chi_min, 0); left edge of the usable branch.

    xi_phi(chi) is not monotone over all negative chi: it dips and then
    grows again once the mean spin collapses, so target lookups must stay
    on the descending branch between this floor and 0.
    """
    r = minimize_scalar(lambda x: xi_phi_of(n_particles, x),
                        bounds=(chi_min, -1e-12), method="bounded",
                        options={"xatol": 1e-10})
    return float(r.x)


def chi_for_xi_phi(n_particles, target, tol=1e-6, chi_floor=None):
    """Interaction strength whose ground state has the requested xi_phi.

    Bisection on the branch [chi_floor, 0] where xi_phi increases with chi.
    """
    if not 0.0 < target <= 1.0:
        raise ValidationError("target xi_phi must lie in (0, 1]")
    if chi_floor is None:
        chi_floor = squeezing_branch_floor(n_particles)
    floor_val = xi_phi_of(n_particles, chi_floor)
    if target < floor_val - tol:
        raise ValidationError(
            f"xi_phi = {target} unreachable: family minimum is {floor_val:.4f}")
    lo, hi = chi_floor, 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        x = xi_phi_of(n_particles, mid)
        if abs(x - target) <= tol:
            return mid
        if x > target:
            hi = mid
        else:
            lo = mid
    raise NumericalError("xi_phi bisection did not converge")


def optimal_chi(n_particles, objective, chi_lo=None, chi_hi=None, xatol=1e-10):
    """chi < 0 minimizing objective(ground_state); coarse scan then refine.

    objective maps a TwoModeState to a scalar. The scan window scales with
    1/N since the useful squeezing strengths do.
    """
    n = int(n_particles)
    if chi_lo is None:
        chi_lo = -50.0 / n
    if chi_hi is None:
        chi_hi = -0.05 / n
    grid = -np.geomspace(-chi_hi, -chi_lo, 96)
    vals = [objective(ground_state(n, x)) for x in grid]
    k = int(np.argmin(vals))
    lo = grid[min(k + 1, len(grid) - 1)]
    hi = grid[max(k - 1, 0)]
    r = minimize_scalar(lambda x: objective(ground_state(n, x)),
                        bounds=(lo, hi), method="bounded",
                        options={"xatol": xatol})
    return float(r.x)
