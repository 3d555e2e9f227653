"""Transmit-signal generation and frequency-domain observation synthesis.

Spectra live on a K-bin grid and span D consecutive DFT windows; the flat
index is k + K*d for bin k of window d. Synthesis follows the frequency-domain
model exactly: station m sees

    y_m[k + K d] = x[k + K d] * exp(-j 2 pi f_k tau_m0) * eta_m[k] + v_m[k + K d]

with eta_m the channel frequency response (LOS-relative delays, so the
line-of-sight delay tau_m0 enters only through the steering phase ramp) and
v_m white circular complex Gaussian noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, FrequencyGrid, frequency_response, steering_vector
from .errors import ConfigurationError, ValidationError
from .geometry import Scenario, toa


@dataclass(frozen=True)
class TransmitSignal:
    """Unknown emitter spectrum across D windows, flat layout k + K*d."""

    x: np.ndarray
    num_windows: int

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=complex)
        object.__setattr__(self, "x", x)
        if x.ndim != 1 or x.size == 0:
            raise ValidationError("signal spectrum must be a non-empty 1D array")
        if self.num_windows < 1 or x.size % self.num_windows != 0:
            raise ValidationError(
                f"spectrum length {x.size} is not a multiple of num_windows={self.num_windows}"
            )

    @property
    def num_bins(self) -> int:
        return int(self.x.size // self.num_windows)

    def windows(self) -> np.ndarray:
        """Per-window view of the spectrum, shape (D, K)."""
        return self.x.reshape(self.num_windows, self.num_bins)


def gen_white(num_bins: int, num_windows: int, rng: np.random.Generator) -> TransmitSignal:
    """Independent unit-variance circular complex Gaussian spectrum samples."""
    n = num_bins * num_windows
    x = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
    return TransmitSignal(x=x, num_windows=num_windows)


def gen_flat_psk(
    num_bins: int, num_windows: int, order: int, rng: np.random.Generator
) -> TransmitSignal:
    """Unit-magnitude spectrum with phases drawn from an evenly spaced constellation.

    ``order`` must be a power of two with at least two points.
    """
    if order < 2 or order & (order - 1) != 0:
        raise ConfigurationError(f"constellation order must be a power of two >= 2, got {order}")
    n = num_bins * num_windows
    symbols = rng.integers(0, order, size=n)
    x = np.exp(2j * np.pi * symbols / order)
    return TransmitSignal(x=x, num_windows=num_windows)


def noise_variance_for_snr(x: np.ndarray, channel_power: float, snr_db: float) -> float:
    """Noise variance that places the per-sample SNR at ``snr_db``.

    SNR is defined as mean(|x|^2) * channel_power / sigma_v^2, with
    ``channel_power`` the total PDP power, so the figure is an average over
    channel and signal statistics rather than a per-realization quantity.
    """
    x = np.asarray(x)
    power = float(np.mean(np.abs(x) ** 2))
    if power <= 0:
        raise ValidationError("signal power must be positive to set an SNR")
    if not (math.isfinite(channel_power) and channel_power > 0):
        raise ValidationError(f"channel_power={channel_power!r} must be positive")
    if not math.isfinite(snr_db):
        raise ValidationError(f"snr_db={snr_db!r} must be finite")
    return power * channel_power / (10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class ObservationSet:
    """Frequency-domain samples at every station, shape (M, K*D)."""

    y: np.ndarray
    grid: FrequencyGrid
    num_windows: int
    noise_variance: float

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=complex)
        object.__setattr__(self, "y", y)
        if y.ndim != 2:
            raise ValidationError(f"observations must be 2D (stations x samples), got {y.shape}")
        if self.num_windows < 1:
            raise ValidationError(f"num_windows={self.num_windows} must be at least 1")
        if y.shape[1] != self.grid.num_bins * self.num_windows:
            raise ValidationError(
                f"got {y.shape[1]} samples per station, expected "
                f"{self.grid.num_bins} bins x {self.num_windows} windows"
            )
        if not (math.isfinite(self.noise_variance) and self.noise_variance >= 0):
            raise ValidationError(f"noise_variance={self.noise_variance!r} must be >= 0")

    @property
    def num_stations(self) -> int:
        return int(self.y.shape[0])

    @property
    def num_bins(self) -> int:
        return int(self.grid.num_bins)

    def windows(self) -> np.ndarray:
        """Per-window view, shape (M, D, K)."""
        return self.y.reshape(self.num_stations, self.num_windows, self.num_bins)


def synthesize_observations(
    scenario: Scenario,
    channels: list[ChannelRealization],
    signal: TransmitSignal,
    grid: FrequencyGrid,
    noise_variance: float,
    rng: np.random.Generator,
) -> ObservationSet:
    """Generate one observation set from explicit channel draws.

    Channel delays must be LOS-relative (first tap at zero); the geometric
    delay of each station enters through the steering ramp so the synthesized
    data match the estimator's signal model exactly. Noise is drawn for all
    stations even when ``noise_variance`` is zero would allow skipping it,
    keeping generator consumption independent of the noise level.
    """
    if len(channels) != scenario.num_stations:
        raise ValidationError(
            f"got {len(channels)} channels for {scenario.num_stations} stations"
        )
    if not (math.isfinite(noise_variance) and noise_variance >= 0):
        raise ValidationError(f"noise_variance={noise_variance!r} must be >= 0")

    K, D = grid.num_bins, signal.num_windows
    y = np.empty((scenario.num_stations, K * D), dtype=complex)
    for m, (station, chan) in enumerate(zip(scenario.stations, channels)):
        ramp = steering_vector(toa(scenario.emitter, station), grid)
        eta = frequency_response(chan, grid)
        y[m] = signal.x * np.tile(ramp * eta, D)
    scale = math.sqrt(noise_variance / 2.0)
    noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    y = y + scale * noise
    return ObservationSet(y=y, grid=grid, num_windows=D, noise_variance=noise_variance)
