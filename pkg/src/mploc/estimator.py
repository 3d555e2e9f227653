"""Direct position estimation from synchronized frequency-domain samples.

The emitter spectrum is unknown, so position is scored by a likelihood
concentrated over the signal: magnitudes are estimated in closed form, and
for each candidate position the remaining phase vector is maximized over the
unit-modulus torus. With Gamma the magnitude estimate and gamma the phase
vector, the data term of the log-likelihood collapses to a quadratic form

    C1(q) = max_gamma (gamma*)^H A(q) gamma*,

where A(q) is Hermitian PSD and assembled per station from the observation
diagonals, the channel covariance factor, and the candidate's steering ramp.
The torus maximization runs through :mod:`mploc.gpm`; the estimate is the
candidate with the largest concentrated cost.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .channel import ChannelCovariance, steering_vector
from .errors import ConfigurationError, DegenerateChannelError, ValidationError
from .geometry import SPEED_OF_LIGHT, Position
from .gpm import GpmConfig, gpm_solve, gpm_solve_batch
from .signal import ObservationSet

# memory budget for one stack of candidate cost matrices
_CHUNK_BYTES = 64 << 20


@dataclass(frozen=True)
class CandidateSet:
    """Candidate emitter positions stacked as an (N, 3) array in meters."""

    positions: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", p)
        if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] == 0:
            raise ValidationError(f"candidates must form a non-empty (N, 3) array, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValidationError("candidate coordinates must be finite")

    @property
    def size(self) -> int:
        return int(self.positions.shape[0])

    @classmethod
    def from_positions(cls, positions: Sequence[Position]) -> "CandidateSet":
        return cls(np.stack([p.as_array() for p in positions]))

    @classmethod
    def planar_grid(
        cls,
        extent_m: float,
        step_m: float,
        center_xy: tuple[float, float] = (0.0, 0.0),
        height_m: float = 0.0,
    ) -> "CandidateSet":
        """Square grid of side ``extent_m`` centered on ``center_xy`` at a fixed height."""
        if not 0.0 < step_m <= extent_m:
            raise ConfigurationError(
                f"need 0 < step_m <= extent_m, got step_m={step_m}, extent_m={extent_m}"
            )
        half = extent_m / 2.0
        axis = np.arange(-half, half + step_m / 2.0, step_m)
        gx, gy = np.meshgrid(axis + center_xy[0], axis + center_xy[1], indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(height_m))])
        return cls(pts)

    @classmethod
    def local_grid(cls, center: np.ndarray, span_m: float, step_m: float) -> "CandidateSet":
        """Square patch of half-side ``span_m`` around ``center``, keeping its height."""
        if not 0.0 < step_m <= 2.0 * span_m:
            raise ConfigurationError(
                f"need 0 < step_m <= 2*span_m, got step_m={step_m}, span_m={span_m}"
            )
        center = np.asarray(center, dtype=float)
        offs = np.arange(-span_m, span_m + step_m / 2.0, step_m)
        gx, gy = np.meshgrid(center[0] + offs, center[1] + offs, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, center[2])])
        return cls(pts)


@dataclass(frozen=True)
class UsageResult:
    """Outcome of one grid-concentrated likelihood search."""

    position: Position            # argmax candidate; first index wins exact ties
    costs: np.ndarray             # concentrated cost per candidate, shape (N,)
    candidates: CandidateSet
    gamma: np.ndarray             # signal-phase estimate at the argmax
    best_index: int
    magnitudes: np.ndarray        # magnitude vector used by the quadratic form
    gammas: np.ndarray | None = None   # per-candidate phase estimates when requested


def station_matrix(stations) -> np.ndarray:
    """Normalize a station list (Positions or coordinate rows) to an (M, 3) array."""
    if isinstance(stations, np.ndarray):
        s = np.asarray(stations, dtype=float)
    else:
        rows = [p.as_array() if isinstance(p, Position) else np.asarray(p, float) for p in stations]
        s = np.stack(rows) if rows else np.empty((0, 3))
    if s.ndim != 2 or s.shape[1] != 3 or s.shape[0] < 1:
        raise ValidationError(f"stations must form an (M, 3) array, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValidationError("station coordinates must be finite")
    return s


def estimate_magnitudes(
    obs: ObservationSet, covs: Sequence[ChannelCovariance]
) -> np.ndarray:
    """Closed-form magnitude estimate from per-bin average received power.

    The expected received power in bin k of window d at station m is
    |x^d[k]|^2 H_m[k, k] plus noise, which motivates

        |x[k + K d]| = sqrt( (1/M) sum_m |y_m[k + K d]|^2 / H_m[k, k] ).

    Requires strictly positive channel power in every bin at every station.
    """
    _check_covs(obs, covs)
    yw = obs.windows()                                            # (M, D, K)
    hdiag = np.stack([np.real(np.diag(c.matrix)) for c in covs])  # (M, K)
    if np.any(hdiag <= 0):
        raise DegenerateChannelError("channel covariance has a zero-power frequency bin")
    ratio = (np.abs(yw) ** 2) / hdiag[:, None, :]
    return np.sqrt(ratio.mean(axis=0).reshape(-1))


def _check_covs(obs: ObservationSet, covs: Sequence[ChannelCovariance]) -> None:
    if len(covs) != obs.num_stations:
        raise ValidationError(f"got {len(covs)} covariances for {obs.num_stations} stations")
    for m, c in enumerate(covs):
        if c.num_bins != obs.num_bins:
            raise ValidationError(
                f"covariance {m} spans {c.num_bins} bins, observations span {obs.num_bins}"
            )


def _check_magnitudes(gamma_hat, n: int) -> np.ndarray:
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    if gamma_hat.shape != (n,):
        raise ValidationError(f"magnitudes must have shape ({n},), got {gamma_hat.shape}")
    if not np.all(np.isfinite(gamma_hat)) or np.any(gamma_hat < 0):
        raise ValidationError("magnitudes must be finite and non-negative")
    return gamma_hat


class _Precompute:
    """Candidate-independent pieces of the cost quadratic form.

    Per station m this caches W_m = U_m B_m^-1 U_m^H with
    B_m = I + sigma_v^-2 U_m^H diag(p) U_m, where p sums the squared
    magnitudes over windows per bin, plus the amplitude vector
    Gamma (.) conj(y_m). A candidate then only contributes steering phases:

        A(q) = sigma_v^-4 sum_m (a_m a_m^H) (.) tile(W_m),
        a_m = Gamma (.) conj(y_m) (.) tile(g_q),

    which equals the factored reduction Z_m^H B_m^-1 Z_m expanded through
    the diagonal structure of Y_m and G_m(q).
    """

    def __init__(
        self,
        obs: ObservationSet,
        covs: Sequence[ChannelCovariance],
        stations: np.ndarray,
        gamma_hat: np.ndarray,
    ) -> None:
        if obs.noise_variance <= 0:
            raise ValidationError(
                "concentrated cost needs a positive noise variance for regularization"
            )
        sigma2 = obs.noise_variance
        K, D = obs.num_bins, obs.num_windows
        p = (gamma_hat**2).reshape(D, K).sum(axis=0)

        self.w_tiles = np.empty((obs.num_stations, K * D, K * D), dtype=complex)
        for m, cov in enumerate(covs):
            U = cov.factor
            B = np.eye(U.shape[1]) + (U.conj().T * p) @ U / sigma2
            W = U @ cho_solve(cho_factor(B), U.conj().T)
            W = 0.5 * (W + W.conj().T)
            self.w_tiles[m] = np.tile(W, (D, D))
        self.amp = gamma_hat * np.conj(obs.y)            # (M, KD)
        self.freqs = obs.grid.frequencies_hz
        self.stations = stations
        self.num_windows = D
        self.scale = 1.0 / sigma2**2

    def cost_matrices(self, points: np.ndarray) -> np.ndarray:
        """Assemble A(q) for a chunk of candidate points, shape (C, KD, KD)."""
        taus = (
            np.linalg.norm(points[:, None, :] - self.stations[None, :, :], axis=2)
            / SPEED_OF_LIGHT
        )                                                                        # (C, M)
        g = np.exp(-2j * np.pi * taus[:, :, None] * self.freqs[None, None, :])   # (C, M, K)
        a = self.amp[None, :, :] * np.tile(g, (1, 1, self.num_windows))          # (C, M, KD)
        out = np.zeros((points.shape[0], a.shape[2], a.shape[2]), dtype=complex)
        for m in range(self.stations.shape[0]):
            out += np.einsum("cu,cv->cuv", a[:, m, :], a[:, m, :].conj()) * self.w_tiles[m]
        out *= self.scale
        return out


def cost_matrix(
    obs: ObservationSet,
    covs: Sequence[ChannelCovariance],
    stations,
    q: Position,
    gamma_hat: np.ndarray,
) -> np.ndarray:
    """Reference assembly of the cost quadratic form A(q) for one candidate.

    Follows the factored likelihood reduction term by term: per station,
    Z_m = U_m^H G_m(q)^H Y_m Gamma with Y_m the horizontal stack of window
    diagonals, and A(q) = sigma_v^-4 sum_m Z_m^H B_m^-1 Z_m. The search path
    assembles the same matrix through an elementwise form; this version stays
    close to the algebra for auditability.
    """
    _check_covs(obs, covs)
    K, D, M = obs.num_bins, obs.num_windows, obs.num_stations
    gamma_hat = _check_magnitudes(gamma_hat, K * D)
    if obs.noise_variance <= 0:
        raise ValidationError(
            "concentrated cost needs a positive noise variance for regularization"
        )
    sigma2 = obs.noise_variance
    smat = station_matrix(stations)
    if smat.shape[0] != M:
        raise ValidationError(f"got {smat.shape[0]} stations for {M} observation rows")
    p = (gamma_hat**2).reshape(D, K).sum(axis=0)

    A = np.zeros((K * D, K * D), dtype=complex)
    yw = obs.windows()
    qa = q.as_array()
    for m in range(M):
        U = covs[m].factor
        tau = float(np.linalg.norm(qa - smat[m])) / SPEED_OF_LIGHT
        gq = steering_vector(tau, obs.grid)
        Y = np.zeros((K, K * D), dtype=complex)
        for d in range(D):
            Y[:, d * K:(d + 1) * K] = np.diag(yw[m, d])
        B = np.eye(U.shape[1]) + (U.conj().T * p) @ U / sigma2
        Z = (U.conj().T * gq.conj()) @ Y * gamma_hat[None, :]
        A += Z.conj().T @ cho_solve(cho_factor(B), Z)
    A /= sigma2**2
    return 0.5 * (A + A.conj().T)


def cost_c1(
    obs: ObservationSet,
    covs: Sequence[ChannelCovariance],
    stations,
    q: Position,
    gamma_hat: np.ndarray | None = None,
    gpm_config: GpmConfig | None = None,
) -> tuple[float, np.ndarray]:
    """Concentrated cost of one candidate position.

    Returns the torus-maximized quadratic form and the signal-phase vector
    achieving it. The solver iterates on the conjugated variable, so the
    returned phases are the conjugate of the solver iterate; the global phase
    is arbitrary.
    """
    if gamma_hat is None:
        gamma_hat = estimate_magnitudes(obs, covs)
    gamma_hat = _check_magnitudes(gamma_hat, obs.num_bins * obs.num_windows)
    A = cost_matrix(obs, covs, stations, q, gamma_hat)
    # A is PSD by construction, so skip the eigenvalue check
    res = gpm_solve(A, gpm_config, validate=False)
    return res.cost, np.conj(res.gamma)


def usage_estimate(
    obs: ObservationSet,
    covs: Sequence[ChannelCovariance],
    stations,
    candidates: CandidateSet,
    known_magnitudes: np.ndarray | None = None,
    gpm_config: GpmConfig | None = None,
    keep_gammas: bool = False,
    chunk_size: int | None = None,
) -> UsageResult:
    """Grid search of the concentrated likelihood over candidate positions.

    Args:
        obs: frequency-domain samples for all stations.
        covs: per-station channel covariance factors, same order as ``obs``.
        stations: station coordinates, (M, 3) array or Position sequence.
        candidates: positions to score.
        known_magnitudes: spectrum magnitudes to use instead of the
            closed-form estimate, length K*D.
        gpm_config: torus solver controls shared by all candidates.
        keep_gammas: also return the phase estimate of every candidate.
        chunk_size: candidates per batched assembly; default sizes chunks to
            a fixed memory budget.

    Returns:
        :class:`UsageResult`; ties in the cost resolve to the first index.
    """
    _check_covs(obs, covs)
    smat = station_matrix(stations)
    if smat.shape[0] != obs.num_stations:
        raise ValidationError(
            f"got {smat.shape[0]} stations for {obs.num_stations} observation rows"
        )
    n = obs.num_bins * obs.num_windows
    if known_magnitudes is None:
        gamma_hat = estimate_magnitudes(obs, covs)
    else:
        gamma_hat = _check_magnitudes(known_magnitudes, n)
    cfg = gpm_config or GpmConfig()
    pre = _Precompute(obs, covs, smat, gamma_hat)

    if chunk_size is None:
        chunk_size = max(1, _CHUNK_BYTES // (16 * n * n))
    pts = candidates.positions
    costs = np.empty(pts.shape[0])
    best_gamma: np.ndarray | None = None
    all_gammas = np.empty((pts.shape[0], n), dtype=complex) if keep_gammas else None
    best = (-np.inf, 0)
    for start in range(0, pts.shape[0], chunk_size):
        sl = slice(start, min(start + chunk_size, pts.shape[0]))
        As = pre.cost_matrices(pts[sl])
        gammas, cvals, _, _ = gpm_solve_batch(As, cfg)
        costs[sl] = cvals
        if all_gammas is not None:
            all_gammas[sl] = np.conj(gammas)
        top = int(np.argmax(cvals))
        if cvals[top] > best[0]:
            best = (float(cvals[top]), start + top)
            best_gamma = np.conj(gammas[top])

    best_index = int(np.argmax(costs))  # first index wins ties, independent of chunking
    if best_index != best[1]:
        best_gamma = None
    if best_gamma is None:
        if all_gammas is not None:
            best_gamma = all_gammas[best_index]
        else:
            _, best_gamma = cost_c1(
                obs, covs, smat, Position.from_array(pts[best_index]), gamma_hat, cfg
            )
    return UsageResult(
        position=Position.from_array(pts[best_index]),
        costs=costs,
        candidates=candidates,
        gamma=best_gamma,
        best_index=best_index,
        magnitudes=gamma_hat,
        gammas=all_gammas,
    )
