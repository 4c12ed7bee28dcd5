"""Figure renderers for the command-line reports.

Each function takes the rows already written to the delimited output and
draws the matching summary plot, so the PNG and the CSV always describe
the same numbers.
"""

import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def save_squeezing_tradeoff(rows, n_particles, path, mc_rows=None):
    """Estimator variance against the squeezing parameter, with the
    information bound and the uncorrelated-input level for reference."""
    xi = np.array([r["xi_phi"] for r in rows])
    var = np.array([r["asymptotic_variance"] for r in rows])
    sq = np.array([r["squeezing_term"] for r in rows])
    qfi = np.array([r["qfi_bound"] for r in rows])
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(xi, n_particles * var, label="pattern estimator")
    ax.plot(xi, n_particles * sq, ls="--", label="squeezing term only")
    ax.plot(xi, n_particles * qfi, ls=":", color="k",
            label="information bound")
    ax.axhline(1.0, color="0.6", lw=0.8)
    if mc_rows:
        mx = [r["xi_phi"] for r in mc_rows]
        my = [n_particles * r["mc_variance"] for r in mc_rows]
        me = [n_particles * r["mc_stderr"] for r in mc_rows]
        ax.errorbar(mx, my, yerr=me, fmt="o", ms=4, color="C3",
                    label="Monte Carlo")
    ax.set_xlabel(r"phase squeezing $\xi_\phi$")
    ax.set_ylabel(r"$N\,\Delta^2\theta$ per shot")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)


def save_shot_scaling(rows, path):
    """m-scaled campaign variance against the number of shots."""
    m = np.array([r["m_shots"] for r in rows])
    mvar = np.array([r["m_variance"] for r in rows])
    merr = np.array([r["m_variance_stderr"] for r in rows])
    pred = np.array([r["asymptotic_variance"] for r in rows])
    snl = np.array([r["snl"] for r in rows])
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.errorbar(m, mvar, yerr=merr, fmt="o", ms=4, label="Monte Carlo")
    ax.plot(m, pred, color="k", label="asymptotic prediction")
    ax.plot(m, snl, ls="--", color="0.6", label="uncorrelated input")
    ax.set_xscale("log")
    ax.set_xlabel("shots per estimate $m$")
    ax.set_ylabel(r"$m\,\Delta^2\theta$")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)


def save_noise_surface(rows, path):
    """Noisy-detection variance against blur width, one curve per
    efficiency."""
    etas = sorted({r["eta"] for r in rows}, reverse=True)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for eta in etas:
        sub = [r for r in rows if r["eta"] == eta]
        sig = [r["kappa_sigma"] for r in sub]
        var = [r["noisy_variance"] for r in sub]
        ax.plot(sig, var, label=rf"$\eta = {eta:g}$")
    clean = rows[0]["clean_variance"]
    ax.axhline(clean, ls=":", color="k", lw=0.8, label="noiseless")
    ax.set_xlabel(r"blur width $\sigma$")
    ax.set_ylabel(r"$\Delta^2\theta$ per shot")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)


def save_particle_scaling(rows, fits, path):
    """Optimized variance against particle number on log axes, with the
    fitted power laws in the legend."""
    n = np.array([r.n_particles for r in rows])
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    series = [("var_clean", "noiseless", "C0"),
              ("qfi", "information bound", "C2"),
              ("var_noisy", "noisy", "C3")]
    for key, label, color in series:
        y = np.array([getattr(r, key) for r in rows])
        amp, power = fits[key]
        ax.loglog(n, y, "o", ms=4, color=color,
                  label=rf"{label}: ${amp:.2f}\,N^{{-{power:.2f}}}$")
        ax.loglog(n, amp * n ** (-power), color=color, lw=0.8)
    ax.loglog(n, 1.0 / n, ls="--", color="0.6", label=r"$1/N$")
    ax.set_xlabel("particle number $N$")
    ax.set_ylabel(r"$\Delta^2\theta$ per shot")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)


def save_density(x, p1, path):
    """The one-body fringe density over the export grid."""
    fig, ax = plt.subplots(figsize=(6.4, 3.0))
    ax.plot(x, p1, lw=0.7)
    ax.set_xlabel(r"position $\kappa x$")
    ax.set_ylabel(r"$p_1(x|\theta)$")
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)


def save_campaign_histogram(estimates, theta_true, predicted_variance,
                            path):
    """Histogram of phase estimates with the predicted normal curve."""
    est = np.asarray(estimates, dtype=float)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.hist(est, bins=max(10, est.size // 25), density=True,
            color="C0", alpha=0.6, label="estimates")
    if predicted_variance and math.isfinite(predicted_variance):
        width = math.sqrt(predicted_variance)
        grid = np.linspace(est.min() - width, est.max() + width, 400)
        pdf = np.exp(-0.5 * ((grid - theta_true) / width) ** 2) \
            / (width * math.sqrt(2.0 * math.pi))
        ax.plot(grid, pdf, color="k", label="predicted")
    ax.axvline(theta_true, color="C3", lw=0.8, label=r"true $\theta$")
    ax.set_xlabel(r"$\hat\theta$")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
