"""Adaptive panel quadrature with embedded Gauss-Legendre pairs.

Kept deliberately independent of the closed-form fringe integrals in
``theory``: the two routes cross-validate each other. The integrator
bisects panels whose 8- vs 16-point Gauss-Legendre estimates disagree,
evaluating the integrand on all active panels at once, so integrands
must accept vectorized inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import QuadratureError

_X8, _W8 = np.polynomial.legendre.leggauss(8)
_X16, _W16 = np.polynomial.legendre.leggauss(16)


def _panel_estimates(f, lo, hi):
    # lo, hi: (n_panels,) arrays. Returns coarse and fine estimates per panel.
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x8 = mid[:, None] + half[:, None] * _X8[None, :]
    x16 = mid[:, None] + half[:, None] * _X16[None, :]
    f8 = np.asarray(f(x8.ravel()), dtype=float).reshape(x8.shape)
    f16 = np.asarray(f(x16.ravel()), dtype=float).reshape(x16.shape)
    coarse = half * (f8 @ _W8)
    fine = half * (f16 @ _W16)
    return coarse, fine


def integrate(f, a, b, rel_tol=1e-9, abs_tol=1e-13, max_depth=24,
              initial_panels=8):
    """Integrate ``f`` over [a, b] to the requested tolerance.

    Raises QuadratureError if panels at max_depth still disagree.
    """
    if not b > a:
        raise ValueError("integration interval must have b > a")
    edges = np.linspace(a, b, initial_panels + 1)
    lo = edges[:-1].copy()
    hi = edges[1:].copy()
    depth = np.zeros(lo.shape, dtype=int)
    done = 0.0
    width = b - a
    for _ in range(max_depth + 2):
        coarse, fine = _panel_estimates(f, lo, hi)
        panel_err = np.abs(fine - coarse)
        # The running global estimate sets the relative-error budget, spread
        # over panels in proportion to their width.
        estimate = done + fine.sum()
        budget = (abs_tol + rel_tol * abs(estimate)) * (hi - lo) / width
        ok = panel_err <= budget
        at_depth = depth >= max_depth
        if np.any(at_depth & ~ok):
            raise QuadratureError(
                f"no convergence after depth {max_depth}: "
                f"worst panel error {panel_err[~ok].max():.3e}")
        done += fine[ok].sum()
        if np.all(ok):
            return done
        lo, hi, depth = lo[~ok], hi[~ok], depth[~ok]
        mid = 0.5 * (lo + hi)
        lo = np.concatenate([lo, mid])
        hi = np.concatenate([mid, hi])
        depth = np.concatenate([depth, depth]) + 1
    raise QuadratureError("panel subdivision loop exhausted")  # pragma: no cover
