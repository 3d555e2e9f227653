"""Shared builders for test cases: scenes, channels, and observation sets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mploc import (
    ChannelCovariance,
    ExpPdpParams,
    FrequencyGrid,
    GeometryConfig,
    Pdp,
    Scenario,
    TransmitSignal,
    channel_covariance,
    exp_pdp,
    gen_white,
    noise_variance_for_snr,
    sample_rayleigh_channel,
    sample_scenario,
    synthesize_observations,
)
from mploc.signal import ObservationSet

# Dense late-tail profile used by the benchmark scene: strong diffuse floor
# decaying over 30 ns, resolved at 1 ns for 300 taps.
DENSE_PROFILE = ExpPdpParams(
    mu0_los=0.098, mu0_nlos=0.13, mu1_s=30e-9, delta_tau_s=1e-9, num_taps=300
)


def desk_geometry(num_stations: int) -> GeometryConfig:
    """Desk-scale annulus: emitter disc of 10 m inside a 20-22 m station ring."""
    return GeometryConfig(
        num_stations=num_stations,
        emitter_radius_m=10.0,
        station_radius_min_m=20.0,
        station_radius_max_m=22.0,
    )


def short_profile(num_taps: int = 20) -> ExpPdpParams:
    """Compact profile whose tail fits comfortably inside small test windows."""
    return ExpPdpParams(
        mu0_los=0.45, mu0_nlos=0.1, mu1_s=5e-9, delta_tau_s=1e-9, num_taps=num_taps
    )


@dataclass
class Case:
    """One synthesized trial with everything the estimators and bounds consume."""

    obs: ObservationSet
    covs: list[ChannelCovariance]
    scenario: Scenario
    signal: TransmitSignal
    grid: FrequencyGrid
    pdp: Pdp
    noise_variance: float
    channels: list


def make_case(
    num_bins: int,
    num_windows: int,
    num_stations: int,
    snr_db: float,
    seed: int,
    sample_rate_hz: float = 100e6,
    pdp_params: ExpPdpParams | None = None,
    noiseless: bool = False,
) -> Case:
    """Draw a scenario, channels, white signal, and observations from one seed."""
    rng = np.random.default_rng(seed)
    grid = FrequencyGrid(num_bins=num_bins, sample_rate_hz=sample_rate_hz)
    scenario = sample_scenario(desk_geometry(num_stations), rng)
    pdp = exp_pdp(pdp_params if pdp_params is not None else short_profile())
    cov = channel_covariance(pdp, grid)
    channels = [sample_rayleigh_channel(pdp, rng) for _ in range(num_stations)]
    sig = gen_white(num_bins, num_windows, rng)
    sigma2 = 0.0 if noiseless else noise_variance_for_snr(sig.x, pdp.total_power, snr_db)
    obs = synthesize_observations(scenario, channels, sig, grid, sigma2, rng)
    return Case(
        obs=obs,
        covs=[cov] * num_stations,
        scenario=scenario,
        signal=sig,
        grid=grid,
        pdp=pdp,
        noise_variance=sigma2,
        channels=channels,
    )


def quad_form(A: np.ndarray, g: np.ndarray) -> float:
    """Real value of g^H A g."""
    return float(np.real(np.conj(g) @ (A @ g)))
