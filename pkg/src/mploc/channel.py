"""Multipath channel models and their frequency-domain second-order statistics.

A channel is a tapped delay line with delays measured relative to the
line-of-sight arrival (first tap at delay zero) and zero-mean complex
Gaussian tap gains. Its power delay profile (PDP) collects the per-tap
variances on a uniform delay grid. With many weak taps the frequency-domain
channel vector is well approximated as Gaussian with covariance

    H = sum_n sigma_n^2 g(n dt) g(n dt)^H,

where g(tau) is the steering vector of the DFT frequency grid. Estimators
consume H through a factor U with H = U U^H.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateChannelError,
    DelayRangeError,
    ValidationError,
)


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform DFT frequency grid: bin k sits at k * sample_rate_hz / num_bins."""

    num_bins: int
    sample_rate_hz: float

    def __post_init__(self) -> None:
        if self.num_bins < 2:
            raise ConfigurationError(f"need at least 2 frequency bins, got {self.num_bins}")
        if not (math.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise ConfigurationError(f"sample_rate_hz={self.sample_rate_hz!r} must be positive")

    @property
    def frequencies_hz(self) -> np.ndarray:
        return np.arange(self.num_bins) * (self.sample_rate_hz / self.num_bins)

    @property
    def window_s(self) -> float:
        """Span of one DFT window in seconds; delays alias modulo this."""
        return self.num_bins / self.sample_rate_hz


def steering_vector(tau_s: float, grid: FrequencyGrid) -> np.ndarray:
    """Unit-modulus phase ramp exp(-j 2 pi f_k tau) over the grid frequencies."""
    return np.exp(-2j * np.pi * grid.frequencies_hz * tau_s)


def steering_matrix(delays_s: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """Steering vectors for several delays stacked as columns, shape (K, N)."""
    delays_s = np.atleast_1d(np.asarray(delays_s, dtype=float))
    return np.exp(-2j * np.pi * np.outer(grid.frequencies_hz, delays_s))


@dataclass(frozen=True)
class Pdp:
    """Power delay profile: tap variances on a uniform delay grid."""

    delta_tau_s: float
    variances: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.variances, dtype=float)
        object.__setattr__(self, "variances", v)
        if not (math.isfinite(self.delta_tau_s) and self.delta_tau_s > 0):
            raise ConfigurationError(f"delta_tau_s={self.delta_tau_s!r} must be positive")
        if v.ndim != 1 or v.size == 0:
            raise ConfigurationError("variances must be a non-empty 1D array")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ConfigurationError("variances must be finite and non-negative")
        if not np.any(v > 0):
            raise ConfigurationError("at least one tap variance must be positive")

    @property
    def num_taps(self) -> int:
        return int(self.variances.size)

    @property
    def total_power(self) -> float:
        return float(self.variances.sum())

    def delays_s(self) -> np.ndarray:
        return np.arange(self.num_taps) * self.delta_tau_s

    def to_dict(self) -> dict:
        return {"delta_tau_s": self.delta_tau_s, "variances": self.variances.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Pdp":
        try:
            return cls(
                delta_tau_s=float(d["delta_tau_s"]),
                variances=np.asarray(d["variances"], dtype=float),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed PDP dictionary: {exc}") from exc


@dataclass(frozen=True)
class ExpPdpParams:
    """Exponentially decaying profile with a distinguished line-of-sight tap.

    Tap 0 carries variance ``mu0_los``; tap l >= 1 carries
    ``mu0_nlos * exp(-l * delta_tau_s / mu1_s)``.
    """

    mu0_los: float        # LOS tap variance
    mu0_nlos: float       # NLOS level at delay zero
    mu1_s: float          # decay constant, seconds
    delta_tau_s: float    # tap spacing, seconds
    num_taps: int

    def __post_init__(self) -> None:
        if self.mu0_los < 0 or self.mu0_nlos < 0:
            raise ConfigurationError("tap variance levels must be non-negative")
        if self.mu0_los == 0 and self.mu0_nlos == 0:
            raise ConfigurationError("profile has no power")
        if not (math.isfinite(self.mu1_s) and self.mu1_s > 0):
            raise ConfigurationError(f"mu1_s={self.mu1_s!r} must be positive")
        if not (math.isfinite(self.delta_tau_s) and self.delta_tau_s > 0):
            raise ConfigurationError(f"delta_tau_s={self.delta_tau_s!r} must be positive")
        if self.num_taps < 1:
            raise ConfigurationError(f"num_taps={self.num_taps} must be at least 1")


def exp_pdp(params: ExpPdpParams) -> Pdp:
    """Evaluate the exponential profile on its delay grid."""
    variances = np.empty(params.num_taps)
    variances[0] = params.mu0_los
    if params.num_taps > 1:
        l = np.arange(1, params.num_taps)
        variances[1:] = params.mu0_nlos * np.exp(-l * params.delta_tau_s / params.mu1_s)
    return Pdp(delta_tau_s=params.delta_tau_s, variances=variances)


@dataclass(frozen=True)
class ClusterChannelParams:
    """Clustered arrival model: Poisson clusters of Poisson rays, double-exponential decay.

    Cluster 0 starts at delay zero and holds the line-of-sight ray; later
    clusters arrive at exponential inter-arrival times with rate
    ``cluster_rate_hz``. Rays inside a cluster arrive at rate ``ray_rate_hz``.
    The expected power of a ray at cluster offset T and ray offset t is
    ``power_scale * exp(-T / cluster_decay_s) * exp(-t / ray_decay_s)``.
    Decay constants may be ``inf`` for a flat profile.
    """

    cluster_rate_hz: float
    ray_rate_hz: float
    cluster_decay_s: float
    ray_decay_s: float
    span_s: float
    power_scale: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.cluster_rate_hz) and self.cluster_rate_hz >= 0):
            raise ConfigurationError(f"cluster_rate_hz={self.cluster_rate_hz!r} must be >= 0")
        if not (math.isfinite(self.ray_rate_hz) and self.ray_rate_hz >= 0):
            raise ConfigurationError(f"ray_rate_hz={self.ray_rate_hz!r} must be >= 0")
        if not self.cluster_decay_s > 0 or not self.ray_decay_s > 0:
            raise ConfigurationError("decay constants must be positive (inf allowed)")
        if not (math.isfinite(self.span_s) and self.span_s > 0):
            raise ConfigurationError(f"span_s={self.span_s!r} must be positive")
        if not (math.isfinite(self.power_scale) and self.power_scale > 0):
            raise ConfigurationError(f"power_scale={self.power_scale!r} must be positive")


@dataclass(frozen=True)
class ChannelRealization:
    """One tapped-delay-line draw: delays relative to the LOS arrival."""

    delays_s: np.ndarray
    gains: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.delays_s, dtype=float)
        g = np.asarray(self.gains, dtype=complex)
        object.__setattr__(self, "delays_s", d)
        object.__setattr__(self, "gains", g)
        if d.ndim != 1 or g.shape != d.shape or d.size == 0:
            raise ValidationError("delays and gains must be matching non-empty 1D arrays")
        if d[0] != 0.0:
            raise ValidationError(f"first tap must sit at delay 0, got {d[0]!r}")
        if np.any(np.diff(d) < 0) or np.any(d < 0):
            raise ValidationError("delays must be non-negative and sorted ascending")

    @property
    def num_taps(self) -> int:
        return int(self.delays_s.size)


def sample_rayleigh_channel(pdp: Pdp, rng: np.random.Generator) -> ChannelRealization:
    """Draw tap gains as independent zero-mean complex Gaussians with PDP variances.

    Taps with zero variance come out exactly zero; the tap grid of the PDP is
    kept as is so repeated draws line up sample by sample.
    """
    n = pdp.num_taps
    scale = np.sqrt(pdp.variances / 2.0)
    gains = scale * rng.standard_normal(n) + 1j * scale * rng.standard_normal(n)
    return ChannelRealization(delays_s=pdp.delays_s(), gains=gains)


def sample_cluster_channel(
    params: ClusterChannelParams, rng: np.random.Generator
) -> ChannelRealization:
    """Draw one clustered arrival pattern with Rayleigh ray gains.

    Cluster offsets and intra-cluster ray offsets follow Poisson processes
    truncated at ``span_s``; each ray gain is a zero-mean complex Gaussian
    whose variance follows the double-exponential decay. The LOS ray at
    delay zero is always present.
    """
    delays = [0.0]
    powers = [params.power_scale]

    cluster_offsets = [0.0]
    if params.cluster_rate_hz > 0:
        t = rng.exponential(1.0 / params.cluster_rate_hz)
        while t <= params.span_s:
            cluster_offsets.append(t)
            t += rng.exponential(1.0 / params.cluster_rate_hz)

    for ci, t_c in enumerate(cluster_offsets):
        cluster_gain = math.exp(-t_c / params.cluster_decay_s)
        if ci > 0:
            # Later clusters open with their own first ray at the cluster offset.
            delays.append(t_c)
            powers.append(params.power_scale * cluster_gain)
        if params.ray_rate_hz > 0:
            t_r = rng.exponential(1.0 / params.ray_rate_hz)
            while t_c + t_r <= params.span_s:
                delays.append(t_c + t_r)
                powers.append(
                    params.power_scale * cluster_gain * math.exp(-t_r / params.ray_decay_s)
                )
                t_r += rng.exponential(1.0 / params.ray_rate_hz)

    order = np.argsort(delays, kind="stable")
    delays_arr = np.asarray(delays)[order]
    scale = np.sqrt(np.asarray(powers)[order] / 2.0)
    gains = scale * rng.standard_normal(delays_arr.size) + 1j * scale * rng.standard_normal(
        delays_arr.size
    )
    return ChannelRealization(delays_s=delays_arr, gains=gains)


def empirical_pdp(
    realizations: Sequence[ChannelRealization], delta_tau_s: float, num_taps: int
) -> Pdp:
    """Measure a PDP from channel draws by binning tap power on a uniform grid.

    Each tap is assigned to the nearest grid cell; cell variance is the mean
    over realizations of the total power landing in that cell.
    """
    if not (math.isfinite(delta_tau_s) and delta_tau_s > 0):
        raise ConfigurationError(f"delta_tau_s={delta_tau_s!r} must be positive")
    if num_taps < 1:
        raise ConfigurationError(f"num_taps={num_taps} must be at least 1")
    if len(realizations) == 0:
        raise ValidationError("need at least one realization")

    acc = np.zeros(num_taps)
    limit = (num_taps - 0.5) * delta_tau_s
    for real in realizations:
        if np.any(real.delays_s >= limit):
            worst = float(real.delays_s.max())
            raise DelayRangeError(
                f"tap delay {worst:.3e} s does not fit a {num_taps}-cell grid "
                f"with spacing {delta_tau_s:.3e} s"
            )
        cells = np.rint(real.delays_s / delta_tau_s).astype(int)
        np.add.at(acc, cells, np.abs(real.gains) ** 2)
    return Pdp(delta_tau_s=delta_tau_s, variances=acc / len(realizations))


def frequency_response(realization: ChannelRealization, grid: FrequencyGrid) -> np.ndarray:
    """Frequency-domain channel vector sum_l gain_l exp(-j 2 pi f tau_l), shape (K,)."""
    return steering_matrix(realization.delays_s, grid) @ realization.gains


@dataclass(frozen=True)
class ChannelCovariance:
    """Frequency-domain channel covariance H together with a factor U, H = U U^H."""

    matrix: np.ndarray   # (K, K) Hermitian PSD
    factor: np.ndarray   # (K, r)

    def __post_init__(self) -> None:
        H = np.asarray(self.matrix, dtype=complex)
        U = np.asarray(self.factor, dtype=complex)
        object.__setattr__(self, "matrix", H)
        object.__setattr__(self, "factor", U)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValidationError(f"covariance must be square, got shape {H.shape}")
        if U.ndim != 2 or U.shape[0] != H.shape[0]:
            raise ValidationError(
                f"factor rows must match covariance size: {U.shape} vs {H.shape}"
            )

    @property
    def num_bins(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def rank_bound(self) -> int:
        return int(self.factor.shape[1])

    def validate(self, rtol: float = 1e-8) -> None:
        """Check Hermitian symmetry, positive semidefiniteness, and the factorization."""
        H = self.matrix
        scale = float(np.linalg.norm(H))
        if scale == 0.0:
            raise DegenerateChannelError("covariance is identically zero")
        if np.linalg.norm(H - H.conj().T) > rtol * scale:
            raise ValidationError("covariance is not Hermitian within tolerance")
        eig = np.linalg.eigvalsh(0.5 * (H + H.conj().T))
        if eig[0] < -1e-10 * max(float(np.trace(H).real), 1e-300):
            raise ValidationError(f"covariance has a negative eigenvalue {eig[0]:.3e}")
        if np.linalg.norm(H - self.factor @ self.factor.conj().T) > max(rtol, 1e-8) * scale:
            raise ValidationError("factor does not reproduce the covariance")


def channel_covariance(pdp: Pdp, grid: FrequencyGrid) -> ChannelCovariance:
    """Covariance of the frequency-domain channel under the Gaussian approximation.

    Columns of the factor are steering vectors of the taps with positive
    variance, scaled by the tap standard deviations, so H = U U^H holds by
    construction.
    """
    keep = pdp.variances > 0
    delays = pdp.delays_s()[keep]
    U = steering_matrix(delays, grid) * np.sqrt(pdp.variances[keep])
    H = U @ U.conj().T
    H = 0.5 * (H + H.conj().T)
    return ChannelCovariance(matrix=H, factor=U)


def eigen_factor(H: np.ndarray, eps_rank: float = 1e-10) -> ChannelCovariance:
    """Re-factor a covariance through its eigendecomposition, truncating tiny modes.

    Useful when the tap grid is longer than the frequency grid: the returned
    factor has at most K columns. Eigenvalues below ``eps_rank`` times the
    largest are dropped.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"covariance must be square, got shape {H.shape}")
    scale = float(np.linalg.norm(H))
    if scale == 0.0:
        raise DegenerateChannelError("covariance is identically zero")
    if np.linalg.norm(H - H.conj().T) > 1e-8 * scale:
        raise ValidationError("covariance is not Hermitian within tolerance")
    w, v = np.linalg.eigh(0.5 * (H + H.conj().T))
    lam_max = float(w[-1])
    if lam_max <= 0:
        raise DegenerateChannelError("covariance has no positive eigenvalue")
    if w[0] < -1e-10 * lam_max:
        raise ValidationError(f"covariance has a negative eigenvalue {w[0]:.3e}")
    keep = w > eps_rank * lam_max
    U = v[:, keep] * np.sqrt(np.maximum(w[keep], 0.0))
    return ChannelCovariance(matrix=H, factor=U)


def _pdp_cache_key(pdp: Pdp, grid: FrequencyGrid) -> str:
    h = hashlib.sha256()
    h.update(np.float64(pdp.delta_tau_s).tobytes())
    h.update(np.ascontiguousarray(pdp.variances, dtype=np.float64).tobytes())
    h.update(np.int64(grid.num_bins).tobytes())
    h.update(np.float64(grid.sample_rate_hz).tobytes())
    return h.hexdigest()


def cached_channel_covariance(
    pdp: Pdp, grid: FrequencyGrid, cache_dir: str | Path
) -> ChannelCovariance:
    """Like :func:`channel_covariance` but memoized on disk.

    The cache file is keyed by a digest of the PDP contents and the frequency
    grid, so a changed profile never aliases a stale entry.
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"cov_{_pdp_cache_key(pdp, grid)}.npz"
    if path.exists():
        with np.load(path) as data:
            return ChannelCovariance(matrix=data["matrix"], factor=data["factor"])
    cov = channel_covariance(pdp, grid)
    np.savez(path, matrix=cov.matrix, factor=cov.factor)
    return cov
