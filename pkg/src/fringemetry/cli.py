"""Command-line front end.

Each subcommand writes delimited data plus a rendered PNG of the same
numbers, and a manifest JSON naming the command, the resolved
configuration, the seed, and every output path, so any artifact can be
regenerated bit-exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .densities import WavePacket, p1_pattern, pattern_model
from .errors import InvariantViolation, NumericalError, ValidationError
from .estimation import CampaignConfig, run_campaign
from .noise import NoiseSpec
from .states import chi_for_xi_phi, ground_state, moments, summarize
from .theory import fit_power_law, optimal_pattern_state, qfi_bound, \
    scaling_sweep, variance_pattern, variance_pattern_noisy
from . import plotting

_MC_XI_TARGETS = (0.44, 0.59, 0.72, 0.86)


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _out_dir(args):
    out = args.out or os.environ.get("FRINGEMETRY_OUTDIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            out = []
            for v in row:
                if v is None:
                    out.append("")
                elif isinstance(v, float):
                    out.append(repr(float(v)))
                else:
                    out.append(v)
            writer.writerow(out)


def _write_manifest(out, command, config, seed, outputs, wall_time):
    manifest = {
        "command": command,
        "config": config,
        "master_seed": seed,
        "version": __version__,
        "outputs": [str(p) for p in outputs],
        "wall_time_s": wall_time,
    }
    path = out / f"{command}_manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_fig2(args):
    """Squeezing trade-off of the pattern estimator at fixed N."""
    t0 = time.perf_counter()
    out = _out_dir(args)
    n = args.n
    xi_values = list(np.linspace(args.xi_min, args.xi_max, args.points))
    mc_targets = list(_MC_XI_TARGETS) if args.with_mc else []
    xi_values = sorted(set(xi_values) | set(mc_targets))

    rows = []
    for xi in xi_values:
        chi = chi_for_xi_phi(n, xi)
        mom = moments(ground_state(n, chi))
        s = summarize(mom)
        report = variance_pattern(n, s.xi_phi, s.visibility)
        row = {
            "chi": chi,
            "xi_phi": s.xi_phi,
            "visibility": s.visibility,
            "asymptotic_variance": report.variance_per_shot,
            "squeezing_term": report.breakdown["squeezing"],
            "qfi_bound": qfi_bound(mom),
            "mc_variance": None,
            "mc_stderr": None,
        }
        if xi in mc_targets:
            config = CampaignConfig(
                n_particles=n, m_shots=args.m, n_rep=args.nrep,
                theta_true=args.theta, state_kind="ground", xi_phi=xi,
                master_seed=args.seed + mc_targets.index(xi))
            result = run_campaign(config)
            # scaled per shot so the column compares with the analytic one
            row["mc_variance"] = args.m * result.variance
            row["mc_stderr"] = args.m * result.variance_stderr
        rows.append(row)

    header = ["chi", "xi_phi", "visibility", "asymptotic_variance",
              "squeezing_term", "qfi_bound", "mc_variance", "mc_stderr"]
    csv_path = out / "fig2.csv"
    _write_csv(csv_path, header, [[r[k] for k in header] for r in rows])
    png_path = out / "fig2.png"
    mc_rows = [r for r in rows if r["mc_variance"] is not None]
    plotting.save_squeezing_tradeoff(rows, n, png_path, mc_rows=mc_rows)
    config = {"n": n, "xi_min": args.xi_min, "xi_max": args.xi_max,
              "points": args.points, "with_mc": args.with_mc, "m": args.m,
              "nrep": args.nrep, "theta": args.theta}
    _write_manifest(out, "fig2", config, args.seed, [csv_path, png_path],
                    time.perf_counter() - t0)
    return 0


def _shot_ladder(m_max):
    ladder = []
    decade = 1
    while decade <= m_max:
        for v in (1, 2, 5):
            if v * decade <= m_max:
                ladder.append(v * decade)
        decade *= 10
    return ladder


def cmd_fig3(args):
    """Campaign variance against the number of shots per estimate."""
    t0 = time.perf_counter()
    out = _out_dir(args)
    n = args.n
    chi = optimal_pattern_state(n).chi
    s = summarize(moments(ground_state(n, chi)))
    per_shot = variance_pattern(n, s.xi_phi, s.visibility).variance_per_shot

    rows = []
    for i, m in enumerate(_shot_ladder(args.m_max)):
        config = CampaignConfig(
            n_particles=n, m_shots=m, n_rep=args.nrep,
            theta_true=args.theta, state_kind="ground", chi=chi,
            master_seed=args.seed + i)
        result = run_campaign(config)
        rows.append({
            "m_shots": m,
            "m_variance": m * result.variance,
            "m_variance_stderr": m * result.variance_stderr,
            "mean": result.mean,
            "mean_stderr": result.mean_stderr,
            "snl": 1.0 / n,
            "asymptotic_variance": per_shot,
        })

    header = ["m_shots", "m_variance", "m_variance_stderr", "mean",
              "mean_stderr", "snl", "asymptotic_variance"]
    csv_path = out / "fig3.csv"
    _write_csv(csv_path, header, [[r[k] for k in header] for r in rows])
    png_path = out / "fig3.png"
    plotting.save_shot_scaling(rows, png_path)
    config = {"n": n, "m_max": args.m_max, "nrep": args.nrep,
              "theta": args.theta, "chi": chi}
    _write_manifest(out, "fig3", config, args.seed, [csv_path, png_path],
                    time.perf_counter() - t0)
    return 0


def cmd_fig4(args):
    """Detection-noise degradation surface; optionally the particle-number
    scaling sweep with fitted power laws."""
    t0 = time.perf_counter()
    out = _out_dir(args)
    n = args.n
    opt = optimal_pattern_state(n)
    s = summarize(moments(ground_state(n, opt.chi)))
    clean = variance_pattern(n, s.xi_phi, s.visibility).variance_per_shot

    etas = [float(v) for v in args.eta_list.split(",")]
    sigmas = np.linspace(0.0, args.sigma_max, args.sigma_points)
    rows = []
    for eta in etas:
        for sig in sigmas:
            noisy = variance_pattern_noisy(
                n, s.xi_phi, s.visibility, eta, float(sig), kappa=1.0)
            rows.append({
                "eta": eta,
                "kappa_sigma": float(sig),
                "noisy_variance": noisy.variance_per_shot,
                "clean_variance": clean,
            })
    header = ["eta", "kappa_sigma", "noisy_variance", "clean_variance"]
    csv_path = out / "fig4.csv"
    _write_csv(csv_path, header, [[r[k] for k in header] for r in rows])
    png_path = out / "fig4.png"
    plotting.save_noise_surface(rows, png_path)
    outputs = [csv_path, png_path]

    if args.scaling:
        sweep = scaling_sweep(eta=args.eta, sigma_blur=args.sigma,
                              kappa=1.0)
        ns = [r.n_particles for r in sweep]
        fits = {}
        for key in ("var_clean", "qfi", "var_noisy", "gauss_clean",
                    "gauss_qfi"):
            amp, power = fit_power_law(ns, [getattr(r, key) for r in sweep])
            fits[key] = (amp, power)
        sweep_header = ["n_particles", "chi_opt", "xi_phi", "visibility",
                        "var_clean", "qfi", "chi_opt_noisy", "var_noisy",
                        "gauss_clean", "gauss_qfi"]
        sweep_path = out / "fig4_scaling.csv"
        _write_csv(sweep_path, sweep_header,
                   [[getattr(r, k) for k in sweep_header] for r in sweep])
        fits_path = out / "fig4_scaling_fits.csv"
        _write_csv(fits_path, ["series", "amplitude", "power"],
                   [[k, a, p] for k, (a, p) in fits.items()])
        scaling_png = out / "fig4_scaling.png"
        plotting.save_particle_scaling(sweep, fits, scaling_png)
        outputs += [sweep_path, fits_path, scaling_png]

    config = {"n": n, "eta_list": args.eta_list,
              "sigma_max": args.sigma_max,
              "sigma_points": args.sigma_points, "scaling": args.scaling,
              "eta": args.eta, "sigma": args.sigma}
    _write_manifest(out, "fig4", config, args.seed, outputs,
                    time.perf_counter() - t0)
    return 0


def cmd_density(args):
    """Export the one-body fringe density on a regular grid."""
    t0 = time.perf_counter()
    out = _out_dir(args)
    n = args.n
    if args.xi is not None:
        chi = chi_for_xi_phi(n, args.xi)
    elif args.chi is not None:
        chi = args.chi
    else:
        chi = optimal_pattern_state(n).chi
    mom = moments(ground_state(n, chi))
    wp = WavePacket.dimensionless()
    model = pattern_model(mom, args.theta, wp)
    half = args.xmax * wp.envelope_width
    x = np.linspace(-half, half, args.points)
    p1 = p1_pattern(x, model)
    csv_path = out / "density.csv"
    _write_csv(csv_path, ["x", "p1"],
               [[float(a), float(b)] for a, b in zip(x, p1)])
    png_path = out / "density.png"
    plotting.save_density(x, p1, png_path)
    config = {"n": n, "chi": chi, "theta": args.theta,
              "points": args.points, "xmax": args.xmax}
    _write_manifest(out, "density", config, 0, [csv_path, png_path],
                    time.perf_counter() - t0)
    return 0


_CONFIG_KEYS = {
    "n_particles", "m_shots", "n_rep", "theta_true", "state_kind", "chi",
    "xi_phi", "protocol", "estimator", "bin_width", "noise", "master_seed",
    "kappa_width", "exclude_ambiguous",
}
_NOISE_KEYS = {"eta", "sigma_blur", "alpha"}


def _load_config(path, overrides):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ValidationError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"config is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object")
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    noise_raw = raw.get("noise")
    if isinstance(noise_raw, dict):
        unknown += sorted(f"noise.{k}" for k in set(noise_raw) - _NOISE_KEYS)
    if unknown:
        raise ValidationError("unknown config keys: " + ", ".join(unknown))
    raw.update(overrides)
    return CampaignConfig.from_json_dict(raw)


def cmd_campaign(args):
    """One Monte-Carlo campaign from a JSON config file."""
    t0 = time.perf_counter()
    out = _out_dir(args)
    overrides = {}
    for key, name in (("n", "n_particles"), ("m", "m_shots"),
                      ("nrep", "n_rep"), ("seed", "master_seed"),
                      ("theta", "theta_true"),
                      ("binwidth", "bin_width")):
        value = getattr(args, key)
        if value is not None:
            overrides[name] = value
    noise_over = {k: getattr(args, k) for k in ("eta", "sigma", "alpha")
                  if getattr(args, k) is not None}
    config = _load_config(args.config, overrides)
    if noise_over:
        spec = config.noise.to_json_dict()
        spec["eta"] = noise_over.get("eta", spec["eta"])
        spec["sigma_blur"] = noise_over.get("sigma", spec["sigma_blur"])
        spec["alpha"] = noise_over.get("alpha", spec["alpha"])
        config = CampaignConfig.from_json_dict(
            {**config.to_json_dict(), "noise": spec})

    result = run_campaign(config)

    json_path = out / "campaign.json"
    payload = {"config": config.to_json_dict(),
               "result": result.to_json_dict()}
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    csv_path = out / "campaign_estimates.csv"
    _write_csv(csv_path, ["rep", "estimate", "deviation"],
               [[i, float(e), float(e) - config.theta_true]
                for i, e in enumerate(result.estimates)])
    png_path = out / "campaign.png"
    plotting.save_campaign_histogram(result.estimates, config.theta_true,
                                     result.predicted_variance, png_path)
    _write_manifest(out, "campaign", config.to_json_dict(),
                    config.master_seed, [json_path, csv_path, png_path],
                    time.perf_counter() - t0)
    print(f"variance {result.variance:.6e} "
          f"(predicted {result.predicted_variance:.6e}, "
          f"stderr {result.variance_stderr:.2e})")
    return 0


def build_parser():
    parser = _Parser(prog="fringemetry",
                     description="fringe metrology simulations and scans")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p2 = sub.add_parser("fig2", help="squeezing trade-off sweep")
    p2.add_argument("--n", type=int, default=100)
    # default grid starts above the branch floor (0.4098 at N=100)
    p2.add_argument("--xi-min", type=float, default=0.42)
    p2.add_argument("--xi-max", type=float, default=0.99)
    p2.add_argument("--points", type=int, default=39)
    p2.add_argument("--with-mc", action="store_true",
                    help="add Monte-Carlo points at the benchmark "
                         "squeezing values")
    p2.add_argument("--m", type=int, default=10)
    p2.add_argument("--nrep", type=int, default=500)
    p2.add_argument("--theta", type=float, default=0.0)
    p2.add_argument("--seed", type=int, default=20260814)
    p2.add_argument("--out", default=None)
    p2.set_defaults(func=cmd_fig2)

    p3 = sub.add_parser("fig3", help="variance against shots per estimate")
    p3.add_argument("--n", type=int, default=100)
    p3.add_argument("--m-max", type=int, default=10)
    p3.add_argument("--nrep", type=int, default=500)
    p3.add_argument("--theta", type=float, default=0.0)
    p3.add_argument("--seed", type=int, default=20260814)
    p3.add_argument("--out", default=None)
    p3.set_defaults(func=cmd_fig3)

    p4 = sub.add_parser("fig4", help="detection-noise degradation")
    p4.add_argument("--n", type=int, default=100)
    p4.add_argument("--eta-list", default="1.0,0.9,0.8,0.7")
    p4.add_argument("--sigma-max", type=float, default=0.5)
    p4.add_argument("--sigma-points", type=int, default=26)
    p4.add_argument("--scaling", action="store_true",
                    help="add the particle-number scaling sweep")
    p4.add_argument("--eta", type=float, default=0.9,
                    help="efficiency for the scaling sweep")
    p4.add_argument("--sigma", type=float, default=0.2,
                    help="blur (units of fringe spacing) for the sweep")
    p4.add_argument("--seed", type=int, default=20260814)
    p4.add_argument("--out", default=None)
    p4.set_defaults(func=cmd_fig4)

    pd = sub.add_parser("density", help="export the fringe density curve")
    pd.add_argument("--n", type=int, default=100)
    pd.add_argument("--chi", type=float, default=None)
    pd.add_argument("--xi", type=float, default=None,
                    help="target squeezing instead of --chi")
    pd.add_argument("--theta", type=float, default=0.0)
    pd.add_argument("--points", type=int, default=4001)
    pd.add_argument("--xmax", type=float, default=3.0,
                    help="half range in envelope widths")
    pd.add_argument("--out", default=None)
    pd.set_defaults(func=cmd_density)

    pc = sub.add_parser("campaign", help="run a campaign from JSON config")
    pc.add_argument("config", help="path to the JSON config file")
    pc.add_argument("--n", type=int, default=None)
    pc.add_argument("--m", type=int, default=None)
    pc.add_argument("--nrep", type=int, default=None)
    pc.add_argument("--seed", type=int, default=None)
    pc.add_argument("--theta", type=float, default=None)
    pc.add_argument("--eta", type=float, default=None)
    pc.add_argument("--sigma", type=float, default=None)
    pc.add_argument("--alpha", type=float, default=None)
    pc.add_argument("--binwidth", type=float, default=None)
    pc.add_argument("--out", default=None)
    pc.set_defaults(func=cmd_campaign)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except InvariantViolation as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return 3
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
