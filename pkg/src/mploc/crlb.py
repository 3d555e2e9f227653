"""Cramer-Rao bounds for the Gaussian observation model.

Per station the received vector is zero-mean circular complex Gaussian with
covariance

    R_m = X G_m H_m G_m^H X^H + sigma_v^2 I,

so the Fisher information for real parameters xi is

    J[u, v] = sum_m Tr{ R_m^-1 dR_m/dxi_u R_m^-1 dR_m/dxi_v }.

Parameters are the emitter position, the spectrum magnitudes, and all
spectrum phases except one reference entry (a common phase rotation is
unobservable, so one phase is fixed as gauge). Every derivative of R_m has
rank at most 2K, which lets the Fisher matrix assemble from a handful of
K x K products per station instead of dense KD x KD derivative stacks; the
dense derivative constructors below remain the reference the assembly is
tested against.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import ChannelCovariance, FrequencyGrid, steering_vector
from .errors import RankDeficiencyError, ValidationError
from .geometry import SPEED_OF_LIGHT, Position, Scenario


def _split_windows(x: np.ndarray, grid: FrequencyGrid) -> tuple[np.ndarray, int, int]:
    x = np.asarray(x, dtype=complex)
    K = grid.num_bins
    if x.ndim != 1 or x.size == 0 or x.size % K != 0:
        raise ValidationError(
            f"spectrum length {x.size} is not a multiple of the {K}-bin grid"
        )
    return x, K, x.size // K


def _x_matrix(x: np.ndarray, K: int) -> np.ndarray:
    """Vertical stack of per-window diagonals, shape (KD, K)."""
    D = x.size // K
    X = np.zeros((x.size, K), dtype=complex)
    for d in range(D):
        X[d * K:(d + 1) * K, :] = np.diag(x[d * K:(d + 1) * K])
    return X


def _geometry(q: Position, station: Position) -> tuple[np.ndarray, float, float]:
    delta = q.as_array() - station.as_array()
    dist = float(np.linalg.norm(delta))
    if dist == 0.0:
        raise ValidationError("candidate position coincides with a station")
    return delta, dist, dist / SPEED_OF_LIGHT


def covariance_R(
    x: np.ndarray,
    cov: ChannelCovariance,
    q: Position,
    station: Position,
    grid: FrequencyGrid,
    noise_variance: float,
) -> np.ndarray:
    """Dense observation covariance R = X G H G^H X^H + sigma_v^2 I, shape (KD, KD)."""
    x, K, _ = _split_windows(x, grid)
    if noise_variance < 0:
        raise ValidationError(f"noise_variance={noise_variance!r} must be >= 0")
    _, _, tau = _geometry(q, station)
    g = steering_vector(tau, grid)
    X = _x_matrix(x, K)
    N = (g[:, None] * cov.matrix) * g.conj()[None, :]
    R = X @ N @ X.conj().T + noise_variance * np.eye(x.size)
    return 0.5 * (R + R.conj().T)


def woodbury_inverse(
    x: np.ndarray,
    cov: ChannelCovariance,
    q: Position,
    station: Position,
    grid: FrequencyGrid,
    noise_variance: float,
) -> np.ndarray:
    """R^-1 through the low-rank update identity.

    With the channel factor U (H = U U^H) and B = I + sigma_v^-2 U^H X^H X U,

        R^-1 = sigma_v^-2 I - sigma_v^-4 X G U B^-1 U^H G^H X^H,

    which costs an r x r solve instead of a KD x KD inversion.
    """
    x, K, D = _split_windows(x, grid)
    if noise_variance <= 0:
        raise ValidationError("the low-rank inverse needs a positive noise variance")
    _, _, tau = _geometry(q, station)
    g = steering_vector(tau, grid)
    U = cov.factor
    px = (np.abs(x) ** 2).reshape(D, K).sum(axis=0)
    B = np.eye(U.shape[1]) + (U.conj().T * px) @ U / noise_variance
    XGU = _x_matrix(x, K) @ (g[:, None] * U)
    core = XGU @ np.linalg.solve(B, XGU.conj().T)
    Ri = np.eye(x.size) / noise_variance - core / noise_variance**2
    return 0.5 * (Ri + Ri.conj().T)


def woodbury_logdet(
    x: np.ndarray,
    cov: ChannelCovariance,
    grid: FrequencyGrid,
    noise_variance: float,
) -> float:
    """Natural log determinant of R via ln|B| + KD ln sigma_v^2.

    The steering ramp is unitary and diagonal, so the determinant does not
    depend on the candidate position.
    """
    x, K, D = _split_windows(x, grid)
    if noise_variance <= 0:
        raise ValidationError("the determinant identity needs a positive noise variance")
    U = cov.factor
    px = (np.abs(x) ** 2).reshape(D, K).sum(axis=0)
    B = np.eye(U.shape[1]) + (U.conj().T * px) @ U / noise_variance
    sign, logdet = np.linalg.slogdet(B)
    if sign.real <= 0:
        raise ValidationError("low-rank core lost positive definiteness")
    return float(logdet.real + x.size * np.log(noise_variance))


def dR_dq(
    x: np.ndarray,
    cov: ChannelCovariance,
    q: Position,
    station: Position,
    grid: FrequencyGrid,
) -> np.ndarray:
    """Derivatives of R in the three position coordinates, shape (3, KD, KD).

    The steering ramp differentiates to -j (2 pi / c) (unit vector component)
    diag(f) G, giving dR/dq_i = c_i F X^H + h.c. with F = X diag(f) N.
    """
    x, K, _ = _split_windows(x, grid)
    delta, dist, tau = _geometry(q, station)
    g = steering_vector(tau, grid)
    X = _x_matrix(x, K)
    N = (g[:, None] * cov.matrix) * g.conj()[None, :]
    F = X @ (grid.frequencies_hz[:, None] * N)
    FXh = F @ X.conj().T
    out = np.empty((3, x.size, x.size), dtype=complex)
    for i in range(3):
        ci = -2j * np.pi / SPEED_OF_LIGHT * (delta[i] / dist)
        T = ci * FXh
        out[i] = T + T.conj().T
    return out


def dR_dmag(
    x: np.ndarray,
    cov: ChannelCovariance,
    q: Position,
    station: Position,
    grid: FrequencyGrid,
) -> np.ndarray:
    """Derivatives of R in each spectrum magnitude, shape (KD, KD, KD).

    Element u = k + K d perturbs row u of X only, so the derivative is the
    rank-two Hermitian pair exp(j ang x_u) e_u w_k^H + h.c. with
    w_k = (X N)[:, k].
    """
    x, K, _ = _split_windows(x, grid)
    _, _, tau = _geometry(q, station)
    g = steering_vector(tau, grid)
    X = _x_matrix(x, K)
    N = (g[:, None] * cov.matrix) * g.conj()[None, :]
    W = X @ N
    out = np.zeros((x.size, x.size, x.size), dtype=complex)
    phase = np.exp(1j * np.angle(x))
    for u in range(x.size):
        w = W[:, u % K]
        out[u, u, :] += phase[u] * w.conj()
        out[u, :, u] += phase[u].conj() * w
    return out


def dR_dphase(
    x: np.ndarray,
    cov: ChannelCovariance,
    q: Position,
    station: Position,
    grid: FrequencyGrid,
) -> np.ndarray:
    """Derivatives of R in each spectrum phase, shape (KD, KD, KD).

    Same rank-two structure as the magnitude case with scalar j x_u in place
    of the unit phase factor. All KD phases are returned; gauge selection
    happens in :func:`fim`.
    """
    x, K, _ = _split_windows(x, grid)
    _, _, tau = _geometry(q, station)
    g = steering_vector(tau, grid)
    X = _x_matrix(x, K)
    N = (g[:, None] * cov.matrix) * g.conj()[None, :]
    W = X @ N
    out = np.zeros((x.size, x.size, x.size), dtype=complex)
    for u in range(x.size):
        w = W[:, u % K]
        out[u, u, :] += 1j * x[u] * w.conj()
        out[u, :, u] += (1j * x[u]).conj() * w
    return out


@dataclass(frozen=True)
class FimResult:
    """Fisher information with its parameter layout.

    Rows order as position (3), magnitudes (when estimated), then phases for
    every spectrum element except the gauge entry.
    """

    matrix: np.ndarray
    known_magnitudes: bool
    gauge_index: int
    num_elements: int          # K*D spectrum elements

    def labels(self) -> list[str]:
        out = ["q_x", "q_y", "q_z"]
        if not self.known_magnitudes:
            out += [f"|x[{u}]|" for u in range(self.num_elements)]
        out += [f"arg x[{u}]" for u in range(self.num_elements) if u != self.gauge_index]
        return out


def fim(
    x: np.ndarray,
    covs: Sequence[ChannelCovariance],
    scenario: Scenario,
    grid: FrequencyGrid,
    noise_variance: float,
    known_magnitudes: bool = False,
    gauge_index: int | None = None,
) -> FimResult:
    """Fisher information at the true parameters.

    Args:
        x: true spectrum, length K*D.
        covs: per-station channel covariances, same order as the scenario.
        scenario: true emitter and station positions.
        grid: frequency grid shared by all stations.
        noise_variance: true noise level, must be positive.
        known_magnitudes: drop the magnitude parameters (treat them as known).
        gauge_index: spectrum element whose phase is fixed; defaults to the
            last element.

    Returns:
        :class:`FimResult` whose matrix is symmetric positive semidefinite.

    The assembly exploits that every derivative of R is a low-rank Hermitian
    pair, reducing each entry to products of precomputed K x K blocks; it
    matches the dense Tr{R^-1 dR R^-1 dR} construction to rounding.
    """
    x, K, D = _split_windows(x, grid)
    n = x.size
    if len(covs) != scenario.num_stations:
        raise ValidationError(
            f"got {len(covs)} covariances for {scenario.num_stations} stations"
        )
    if noise_variance <= 0:
        raise ValidationError("Fisher information needs a positive noise variance")
    if gauge_index is None:
        gauge_index = n - 1
    if not 0 <= gauge_index < n:
        raise ValidationError(f"gauge_index={gauge_index} out of range for {n} elements")

    idx = np.arange(n)
    phase_idx = idx[idx != gauge_index]
    if known_magnitudes:
        sig_scalar = 1j * x[phase_idx]
        sig_idx = phase_idx
    else:
        sig_scalar = np.concatenate([np.exp(1j * np.angle(x)), 1j * x[phase_idx]])
        sig_idx = np.concatenate([idx, phase_idx])
    sig_k = sig_idx % K
    P = 3 + sig_idx.size
    J = np.zeros((P, P))

    qa = scenario.emitter.as_array()
    X = _x_matrix(x, K)
    freqs = grid.frequencies_hz
    for m, station in enumerate(scenario.stations):
        delta = qa - station.as_array()
        dist = float(np.linalg.norm(delta))
        if dist == 0.0:
            raise ValidationError(f"emitter coincides with station {m}")
        g = steering_vector(dist / SPEED_OF_LIGHT, grid)
        N = (g[:, None] * covs[m].matrix) * g.conj()[None, :]
        W = X @ N                                     # KD x K
        F = X @ (freqs[:, None] * N)                  # KD x K
        R = X @ N @ X.conj().T + noise_variance * np.eye(n)
        Ri = np.linalg.inv(R)
        c = (-2j * np.pi / SPEED_OF_LIGHT) * delta / dist

        RiW = Ri @ W
        RiF = Ri @ F
        RiX = Ri @ X
        M1 = RiW.conj().T                             # K x KD: w_a^H Ri e_v
        WRiW = W.conj().T @ RiW
        C1 = X.conj().T @ RiF
        C2 = F.conj().T @ RiF
        C3 = X.conj().T @ RiX
        M2 = W.conj().T @ RiF
        M3 = RiX.conj().T                             # K x KD: X^H Ri
        M5 = X.conj().T @ RiW
        Dmat = M2 @ M3                                # K x KD
        Emat = RiF @ M5                               # KD x K

        t1_pp = np.trace(C1 @ C1)
        t2_pp = np.trace(C2 @ C3)
        J[:3, :3] += 2.0 * np.real(
            np.outer(c, c) * t1_pp + np.outer(c, c.conj()) * t2_pp
        )

        E1 = M1[np.ix_(sig_k, sig_idx)]
        T1 = E1 * E1.T
        T2 = WRiW[np.ix_(sig_k, sig_k)] * Ri.T[np.ix_(sig_idx, sig_idx)]
        J[3:, 3:] += 2.0 * np.real(
            np.outer(sig_scalar, sig_scalar) * T1
            + np.outer(sig_scalar, sig_scalar.conj()) * T2
        )

        t1_ps = Dmat[sig_k, sig_idx]
        t2_ps = Emat[sig_idx, sig_k]
        cross = 2.0 * np.real(
            np.outer(c, sig_scalar * t1_ps) + np.outer(c, sig_scalar.conj() * t2_ps)
        )
        J[:3, 3:] += cross
        J[3:, :3] += cross.T

    J = 0.5 * (J + J.T)
    return FimResult(
        matrix=J, known_magnitudes=known_magnitudes, gauge_index=gauge_index, num_elements=n
    )


@dataclass(frozen=True)
class CrlbResult:
    """Position block of the inverse Fisher information."""

    sigma_q_sq: float          # trace of the position covariance block, m^2
    position_cov: np.ndarray   # (2, 2) when planar, else (3, 3)
    planar: bool

    @property
    def rmse_bound_m(self) -> float:
        return float(np.sqrt(self.sigma_q_sq))


def crlb_position(
    fim_result: FimResult, planar: bool = False, cond_limit: float = 1e12
) -> CrlbResult:
    """Invert the Fisher information and read off the position covariance.

    With a planar deployment the height coordinate carries no information and
    its row and column are dropped before inversion. A Fisher matrix that is
    singular beyond ``cond_limit`` raises :class:`RankDeficiencyError` naming
    the parameter dominating the null direction.
    """
    J = fim_result.matrix
    labels = fim_result.labels()
    if planar:
        keep = np.arange(J.shape[0]) != 2
        J = J[np.ix_(keep, keep)]
        labels = [lab for i, lab in enumerate(labels) if i != 2]
    w, V = np.linalg.eigh(J)
    if w[0] <= 0 or w[-1] / w[0] > cond_limit:
        null_vec = V[:, 0]
        worst = labels[int(np.argmax(np.abs(null_vec)))]
        raise RankDeficiencyError(
            f"Fisher information is singular along a direction dominated by {worst} "
            f"(eigenvalue {w[0]:.3e} vs largest {w[-1]:.3e})"
        )
    cov = (V / w) @ V.T
    npos = 2 if planar else 3
    block = cov[:npos, :npos]
    return CrlbResult(
        sigma_q_sq=float(np.trace(block)), position_cov=block, planar=planar
    )
