"""Monte Carlo sweep harness."""
from dataclasses import replace

import numpy as np
import pytest

from mploc import (
    CandidateSet,
    ChannelConfig,
    DEEP_GPM_CONFIG,
    ExpPdpParams,
    GeometryConfig,
    GpmConfig,
    RunConfig,
    SearchConfig,
    SignalConfig,
    baseline_estimate,
    emit_results,
    run_monte_carlo,
    usage_estimate,
)
from mploc.channel import ChannelRealization, ClusterChannelParams
from mploc.errors import ConfigurationError, ValidationError
from mploc.harness import delay_spread_variant, _nlos_weight_sum
from mploc.geometry import Position, Scenario, sample_scenario
from mploc.signal import gen_white, synthesize_observations

from _synth import make_case, short_profile


def _tiny_config(**overrides) -> RunConfig:
    base = dict(
        num_bins=4,
        num_windows=2,
        axis="stations",
        axis_values=(2, 3),
        num_configs=2,
        trials_per_config=2,
        estimators=("usage", "usage_cwc", "baseline"),
        compute_crlb=True,
        seed=7,
        channel=ChannelConfig(kind="exp", exp=short_profile()),
        search=SearchConfig(extent_m=24.0, step_m=6.0),
    )
    base.update(overrides)
    return RunConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        _tiny_config(axis="bandwidth")
    with pytest.raises(ConfigurationError):
        _tiny_config(axis_values=())
    with pytest.raises(ConfigurationError):
        _tiny_config(estimators=("usage", "magic"))
    with pytest.raises(ConfigurationError):
        _tiny_config(estimators=())
    with pytest.raises(ConfigurationError):
        _tiny_config(num_configs=0)
    with pytest.raises(ConfigurationError):
        _tiny_config(search=SearchConfig(extent_m=12.0, step_m=1.0))  # half-extent < disc
    with pytest.raises(ConfigurationError):
        SearchConfig(step_m=0.0)
    with pytest.raises(ConfigurationError):
        SearchConfig(shortlist=-1)
    with pytest.raises(ConfigurationError):
        SearchConfig(refine_factor=1)
    with pytest.raises(ConfigurationError):
        SignalConfig(kind="chirp")
    with pytest.raises(ConfigurationError):
        ChannelConfig(kind="cluster", cluster=None)
    cluster = ClusterChannelParams(
        cluster_rate_hz=5e7, ray_rate_hz=5e8, cluster_decay_s=30e-9,
        ray_decay_s=10e-9, span_s=100e-9,
    )
    with pytest.raises(ConfigurationError):
        ChannelConfig(kind="cluster", cluster=cluster, pdp_source="analytic")
    with pytest.raises(ConfigurationError):
        _tiny_config(
            axis="delay_spread",
            channel=ChannelConfig(kind="cluster", cluster=cluster, pdp_source="empirical"),
        )


def test_config_round_trip():
    cfg = _tiny_config(known_magnitudes=True, signal=SignalConfig(kind="flat_psk", order=8))
    again = RunConfig.from_dict(cfg.to_dict())
    assert again == cfg
    with pytest.raises(ValidationError):
        RunConfig.from_dict({"num_bins": 4})


def test_run_requires_seed_and_valid_workers():
    cfg = _tiny_config(seed=None)
    with pytest.raises(ConfigurationError):
        run_monte_carlo(cfg)
    with pytest.raises(ConfigurationError):
        run_monte_carlo(_tiny_config(), workers=0)


def test_sweep_is_deterministic(tmp_path):
    cfg = _tiny_config()
    first = run_monte_carlo(cfg)
    second = run_monte_carlo(cfg)
    assert first.axis_values == [2, 3]
    assert first.n_trials == [4, 4]
    for name in cfg.estimators:
        assert first.rmse_m[name] == second.rmse_m[name]
    assert first.crlb_m == second.crlb_m
    for a, b in zip(first.records, second.records):
        for name in cfg.estimators:
            np.testing.assert_array_equal(a.estimates[name], b.estimates[name])

    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_results(first, p1)
    emit_results(second, p2)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header == "axis,estimator,rmse_m,crlb_m,n_trials"


def test_operating_condition_axes_share_deployments_across_points():
    # SNR and delay-spread points leave the scene untouched, so every point
    # reuses one set of deployments and trial draws; only the swept variable
    # moves the error.
    small_ring = GeometryConfig(
        num_stations=3, emitter_radius_m=10.0,
        station_radius_min_m=20.0, station_radius_max_m=22.0,
    )
    for axis, values in (("snr_db", (10.0, 30.0)), ("delay_spread", (5e-9, 60e-9))):
        cfg = _tiny_config(
            axis=axis, axis_values=values,
            estimators=("baseline",), compute_crlb=False, geometry=small_ring,
        )
        result = run_monte_carlo(cfg)
        by_point = {value: {} for value in values}
        for rec in result.records:
            by_point[rec.axis_value][(rec.config_id, rec.trial_id)] = rec.emitter
        lo, hi = by_point[values[0]], by_point[values[1]]
        assert set(lo) == set(hi)
        for key, emitter in lo.items():
            np.testing.assert_array_equal(emitter, hi[key])


def test_station_axis_redraws_deployments_per_point():
    # Changing the station count lays out a new ring, so those points draw
    # fresh deployments rather than sharing a stream.
    cfg = _tiny_config(estimators=("baseline",), compute_crlb=False)
    result = run_monte_carlo(cfg)
    emitters = {value: {} for value in cfg.axis_values}
    for rec in result.records:
        emitters[rec.axis_value][(rec.config_id, rec.trial_id)] = rec.emitter
    assert any(
        not np.array_equal(emitters[2][key], emitters[3][key]) for key in emitters[2]
    )


def test_worker_pool_matches_serial_execution():
    cfg = _tiny_config(
        axis_values=(3,), num_configs=2, trials_per_config=1,
        estimators=("usage_cwc", "baseline"),
    )
    serial = run_monte_carlo(cfg, workers=1)
    pooled = run_monte_carlo(cfg, workers=2)
    for name in cfg.estimators:
        assert serial.rmse_m[name] == pooled.rmse_m[name]
    assert serial.crlb_m == pooled.crlb_m
    for a, b in zip(serial.records, pooled.records):
        for name in cfg.estimators:
            np.testing.assert_array_equal(a.estimates[name], b.estimates[name])


def test_stricter_solver_never_lowers_candidate_scores():
    # Foundation of the staged search: the solver ascends the cost, so
    # rerunning a cell with tighter settings can only raise its score. The
    # shortlist stage relies on this to be lossless.
    case = make_case(num_bins=4, num_windows=2, num_stations=3, snr_db=15.0, seed=81)
    truth = case.scenario.emitter.as_array()
    rng = np.random.default_rng(1)
    pts = truth[None, :] + np.column_stack(
        [rng.uniform(-6, 6, 12), rng.uniform(-6, 6, 12), np.zeros(12)]
    )
    cands = CandidateSet(pts)
    loose = usage_estimate(
        case.obs, case.covs, case.scenario.stations, cands,
        gpm_config=GpmConfig(rel_tol=1e-5, max_iters=50, check_every=25),
    )
    strict = usage_estimate(
        case.obs, case.covs, case.scenario.stations, cands,
        gpm_config=GpmConfig(rel_tol=1e-11, max_iters=20000),
    )
    slack = 1e-12 * np.abs(strict.costs)
    assert np.all(strict.costs >= loose.costs - slack)


def test_shortlist_stage_smoke():
    cfg = _tiny_config(
        axis_values=(3,),
        search=SearchConfig(extent_m=24.0, step_m=6.0, shortlist=4),
    )
    res = run_monte_carlo(cfg, refine_gpm_config=DEEP_GPM_CONFIG)
    for name in cfg.estimators:
        assert np.isfinite(res.rmse_m[name][0])


def test_delay_spread_variant_conserves_nlos_power():
    params = ExpPdpParams(
        mu0_los=0.098, mu0_nlos=0.13, mu1_s=30e-9, delta_tau_s=1e-9, num_taps=300
    )
    for mu1 in [5e-9, 60e-9, 200e-9]:
        variant = delay_spread_variant(params, mu1)
        assert variant.mu1_s == mu1
        before = params.mu0_nlos * _nlos_weight_sum(
            params.mu1_s, params.delta_tau_s, params.num_taps
        )
        after = variant.mu0_nlos * _nlos_weight_sum(
            variant.mu1_s, variant.delta_tau_s, variant.num_taps
        )
        assert after == pytest.approx(before, rel=1e-12)
    with pytest.raises(ConfigurationError):
        delay_spread_variant(params, 0.0)
    lone = replace(params, num_taps=1, mu0_nlos=0.0)
    assert delay_spread_variant(lone, 50e-9).mu1_s == 50e-9


def test_delay_spread_axis_smoke():
    cfg = _tiny_config(
        axis="delay_spread",
        axis_values=(10e-9, 40e-9),
        num_configs=1,
        estimators=("usage_cwc",),
        compute_crlb=False,
    )
    res = run_monte_carlo(cfg)
    assert len(res.rmse_m["usage_cwc"]) == 2
    assert all(np.isfinite(v) for v in res.rmse_m["usage_cwc"])
    assert res.crlb_m is None


def test_baseline_finds_a_noiseless_single_path_emitter():
    rng = np.random.default_rng(91)
    geometry = GeometryConfig(
        num_stations=5, emitter_radius_m=10.0,
        station_radius_min_m=20.0, station_radius_max_m=22.0,
    )
    scenario = sample_scenario(geometry, rng)
    case = make_case(num_bins=8, num_windows=2, num_stations=5, snr_db=20.0, seed=91)
    sig = gen_white(8, 2, rng)
    channels = [ChannelRealization(delays_s=[0.0], gains=[1.0])] * 5
    obs = synthesize_observations(scenario, channels, sig, case.grid, 0.0, rng)
    truth = scenario.emitter.as_array()
    offsets = np.array([[5, 0, 0], [0, 0, 0], [0, 5, 0], [-5, 5, 0], [3, -4, 0]], float)
    res = baseline_estimate(obs, scenario.station_matrix(), CandidateSet(truth[None, :] + offsets))
    assert res.best_index == 1
    with pytest.raises(ValidationError):
        baseline_estimate(obs, scenario.station_matrix()[:3], CandidateSet(truth[None, :]))


def test_emit_results_without_bound_and_with_records(tmp_path):
    cfg = _tiny_config(
        axis_values=(3,), num_configs=1, estimators=("baseline",), compute_crlb=False
    )
    res = run_monte_carlo(cfg)
    csv_path = tmp_path / "out.csv"
    json_path = tmp_path / "out.json"
    emit_results(res, csv_path, json_path, include_records=True)
    lines = csv_path.read_text().splitlines()
    assert lines[1].split(",")[3] == ""          # empty bound column
    assert lines[1].split(",")[1] == "baseline"
    import json

    payload = json.loads(json_path.read_text())
    assert payload["crlb_m"] is None
    assert len(payload["trials"]) == 2
    assert payload["config"]["num_bins"] == 4
