"""Command line interface.

Subcommands cover the three benchmark sweeps, single-shot localization from
files on disk, and synthetic data generation. Sweep reports write the
delimited summary first and then render the companion figure next to it
unless asked not to.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .channel import FrequencyGrid, channel_covariance, eigen_factor, exp_pdp
from .errors import MplocError
from .estimator import CandidateSet, usage_estimate
from .cwc import usage_cwc_estimate
from .geometry import sample_scenario
from .gpm import GpmConfig
from .harness import (
    DEEP_GPM_CONFIG,
    ESTIMATOR_NAMES,
    ChannelConfig,
    RunConfig,
    SearchConfig,
    SignalConfig,
    baseline_estimate,
    emit_results,
    run_monte_carlo,
)
from .io import (
    read_observations,
    read_pdp,
    read_scenario,
    write_observations,
    write_pdp,
    write_scenario,
    write_usage_result,
)
from .signal import gen_white, noise_variance_for_snr, synthesize_observations
from .channel import sample_rayleigh_channel


def _add_common_sweep_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, required=True, help="root seed; sweeps are deterministic")
    p.add_argument("--out", type=Path, required=True, help="summary CSV path")
    p.add_argument("--json", type=Path, default=None, help="also write a JSON provenance file")
    p.add_argument("--plot", type=Path, default=None,
                   help="figure path (default: CSV path with .png suffix)")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p.add_argument("--records", action="store_true",
                   help="include per-trial records in the JSON file")
    p.add_argument("--configs", type=int, default=5, help="deployments per axis point")
    p.add_argument("--trials", type=int, default=40, help="trials per deployment")
    p.add_argument("--bins", type=int, default=16, help="frequency bins per window")
    p.add_argument("--windows", type=int, default=10, help="observation windows")
    p.add_argument("--sample-rate-hz", type=float, default=100e6)
    p.add_argument("--stations", type=int, default=8,
                   help="station count (ignored by the station sweep)")
    p.add_argument("--snr-db", type=float, default=25.0,
                   help="operating SNR (ignored by the SNR sweep)")
    p.add_argument("--estimators", nargs="+", default=["usage_cwc", "baseline"],
                   choices=ESTIMATOR_NAMES, metavar="NAME",
                   help=f"estimators to run, from {ESTIMATOR_NAMES}")
    p.add_argument("--known-magnitudes", action="store_true",
                   help="hand estimators the true transmit magnitudes")
    p.add_argument("--no-crlb", action="store_true", help="skip the bound column")
    p.add_argument("--extent-m", type=float, default=24.0, help="search square side")
    p.add_argument("--step-m", type=float, default=1.0, help="coarse grid step")
    p.add_argument("--no-refine", action="store_true", help="single-stage search only")
    p.add_argument("--shortlist", type=int, default=0,
                   help="re-solve this many top coarse cells with the deep solver")
    p.add_argument("--deep-refine", action="store_true",
                   help="run shortlist and refinement at the deep solver settings")
    p.add_argument("--workers", type=int, default=1,
                   help="trial process pool size; results are identical for any value")
    p.add_argument("--quiet", action="store_true", help="suppress progress lines")


def _sweep_config(args: argparse.Namespace, axis: str, values) -> RunConfig:
    geometry = replace(RunConfig().geometry, num_stations=args.stations)
    return RunConfig(
        num_bins=args.bins,
        num_windows=args.windows,
        sample_rate_hz=args.sample_rate_hz,
        snr_db=args.snr_db,
        axis=axis,
        axis_values=tuple(values),
        num_configs=args.configs,
        trials_per_config=args.trials,
        estimators=tuple(args.estimators),
        known_magnitudes=args.known_magnitudes,
        compute_crlb=not args.no_crlb,
        seed=args.seed,
        geometry=geometry,
        signal=SignalConfig(),
        channel=ChannelConfig(),
        search=SearchConfig(
            extent_m=args.extent_m,
            step_m=args.step_m,
            refine=not args.no_refine,
            shortlist=args.shortlist,
        ),
    )


def _run_sweep(cfg: RunConfig, args: argparse.Namespace) -> int:
    refine_gpm = DEEP_GPM_CONFIG if args.deep_refine else None
    result = run_monte_carlo(
        cfg,
        verbose=not args.quiet,
        refine_gpm_config=refine_gpm,
        workers=args.workers,
    )
    emit_results(result, args.out, json_path=args.json, include_records=args.records)
    print(f"wrote {args.out}")
    if not args.no_plot:
        from .plotting import plot_sweep

        target = args.plot if args.plot is not None else args.out.with_suffix(".png")
        plot_sweep(result, target)
        print(f"wrote {target}")
    return 0


def _cmd_sweep_snr(args: argparse.Namespace) -> int:
    return _run_sweep(_sweep_config(args, "snr_db", args.values), args)


def _cmd_sweep_stations(args: argparse.Namespace) -> int:
    return _run_sweep(_sweep_config(args, "stations", [int(v) for v in args.values]), args)


def _cmd_sweep_delayspread(args: argparse.Namespace) -> int:
    values = [v * 1e-9 for v in args.values]
    return _run_sweep(_sweep_config(args, "delay_spread", values), args)


def _cmd_localize(args: argparse.Namespace) -> int:
    obs = read_observations(args.obs)
    scenario = read_scenario(args.stations)
    pdp = read_pdp(args.pdp)
    cov = channel_covariance(pdp, obs.grid)
    if cov.rank_bound > obs.num_bins:
        cov = eigen_factor(cov.matrix)
    covs = [cov] * scenario.num_stations
    smat = scenario.station_matrix()
    candidates = CandidateSet.planar_grid(args.extent_m, args.step_m)

    if args.estimator == "baseline":
        res = baseline_estimate(obs, smat, candidates)
        best_score = float(res.scores[res.best_index])
    else:
        fn = usage_cwc_estimate if args.estimator == "usage_cwc" else usage_estimate
        res = fn(obs, covs, smat, candidates, gpm_config=GpmConfig())
        best_score = float(res.costs[res.best_index])
        if not args.no_refine:
            local = CandidateSet.local_grid(
                res.position.as_array(), span_m=args.step_m, step_m=args.step_m / 5.0
            )
            res2 = fn(obs, covs, smat, local, gpm_config=GpmConfig())
            if float(res2.costs[res2.best_index]) >= best_score:
                res = res2

    p = res.position
    print(f"estimate: ({p.x:.3f}, {p.y:.3f}, {p.z:.3f}) m  [{args.estimator}]")
    if args.out is not None and args.estimator != "baseline":
        write_usage_result(res, args.out)
        print(f"wrote {args.out}")
    if args.surface is not None:
        if args.estimator == "baseline":
            print("cost surface output needs a likelihood estimator", file=sys.stderr)
            return 2
        from .plotting import plot_cost_surface

        plot_cost_surface(res, args.surface)
        print(f"wrote {args.surface}")
    return 0


def _cmd_gen_data(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    grid = FrequencyGrid(num_bins=args.bins, sample_rate_hz=args.sample_rate_hz)
    geometry = replace(RunConfig().geometry, num_stations=args.stations)
    scenario = sample_scenario(geometry, rng)
    pdp = exp_pdp(ChannelConfig().exp)
    channels = [sample_rayleigh_channel(pdp, rng) for _ in range(scenario.num_stations)]
    sig = gen_white(args.bins, args.windows, rng)
    sigma2 = noise_variance_for_snr(sig.x, pdp.total_power, args.snr_db)
    obs = synthesize_observations(scenario, channels, sig, grid, sigma2, rng)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_observations(obs, out / "observations.bin")
    write_scenario(scenario, out / "scenario.json")
    write_pdp(pdp, out / "pdp.json")
    print(f"wrote {out / 'observations.bin'} (+ sidecar), scenario.json, pdp.json")
    print(f"emitter at ({scenario.emitter.x:.3f}, {scenario.emitter.y:.3f}, "
          f"{scenario.emitter.z:.3f}) m")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mploc",
        description="Emitter localization benchmarks over multipath channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep-snr", help="RMSE versus SNR")
    p.add_argument("--values", nargs="+", type=float, default=[10.0, 20.0, 30.0],
                   help="SNR points in dB")
    _add_common_sweep_args(p)
    p.set_defaults(func=_cmd_sweep_snr)

    p = sub.add_parser("sweep-stations", help="RMSE versus station count")
    p.add_argument("--values", nargs="+", type=int, default=[4, 8, 16],
                   help="station counts")
    _add_common_sweep_args(p)
    p.set_defaults(func=_cmd_sweep_stations)

    p = sub.add_parser("sweep-delayspread", help="RMSE versus channel decay constant")
    p.add_argument("--values", nargs="+", type=float, default=[10.0, 20.0, 40.0],
                   help="decay constants in nanoseconds")
    _add_common_sweep_args(p)
    p.set_defaults(func=_cmd_sweep_delayspread)

    p = sub.add_parser("localize", help="localize from files on disk")
    p.add_argument("--obs", type=Path, required=True, help="observation payload")
    p.add_argument("--stations", type=Path, required=True, help="scenario JSON")
    p.add_argument("--pdp", type=Path, required=True, help="power profile JSON")
    p.add_argument("--estimator", default="usage_cwc", choices=ESTIMATOR_NAMES)
    p.add_argument("--extent-m", type=float, default=24.0)
    p.add_argument("--step-m", type=float, default=1.0)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--out", type=Path, default=None, help="JSON result path")
    p.add_argument("--surface", type=Path, default=None, help="cost surface figure path")
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--windows", type=int, default=10)
    p.add_argument("--sample-rate-hz", type=float, default=100e6)
    p.add_argument("--stations", type=int, default=8)
    p.add_argument("--snr-db", type=float, default=25.0)
    p.set_defaults(func=_cmd_gen_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MplocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
