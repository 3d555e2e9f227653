"""Unit-modulus quadratic maximization by projected gradient ascent.

Maximizes phi^H A phi over the torus |phi_i| = 1 for Hermitian positive
semidefinite A. Each step moves along the gradient of the quadratic form and
projects back entrywise onto the unit circle:

    v   <- (I + beta A) phi
    phi <- exp(j angle(v))

For beta > 0 and A PSD the cost sequence is non-decreasing, so the iteration
terminates either on a relative cost change below tolerance or at the
iteration cap. Entries of v that land exactly at zero take phase zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ValidationError


def _project_torus(v: np.ndarray) -> np.ndarray:
    """Entrywise projection onto the unit circle; zeros map to phase zero."""
    mag = np.abs(v)
    if not mag.all():
        zero = mag == 0.0
        v = np.where(zero, 1.0, v)
        mag = np.where(zero, 1.0, mag)
    return v / mag


@dataclass(frozen=True)
class GpmConfig:
    """Step scale and termination controls for the projected ascent."""

    beta: float = 300.0        # step scale; useful range is roughly 1e2 to 1e3
    rel_tol: float = 1e-9      # relative cost change per step that counts as converged
    max_iters: int = 10_000
    eig_tol: float = 1e-8      # residual tolerance of the starting eigenvector
    eig_max_iters: int = 1_000
    check_every: int = 1       # steps between convergence checks; the test then
                               # compares the average per-step change against rel_tol

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ConfigurationError(f"beta={self.beta!r} must be positive")
        if not (math.isfinite(self.rel_tol) and self.rel_tol > 0):
            raise ConfigurationError(f"rel_tol={self.rel_tol!r} must be positive")
        if self.max_iters < 1 or self.eig_max_iters < 1:
            raise ConfigurationError("iteration caps must be at least 1")
        if not (math.isfinite(self.eig_tol) and self.eig_tol > 0):
            raise ConfigurationError(f"eig_tol={self.eig_tol!r} must be positive")
        if self.check_every < 1:
            raise ConfigurationError(f"check_every={self.check_every} must be at least 1")


@dataclass(frozen=True)
class GpmResult:
    """Final iterate of one solve."""

    gamma: np.ndarray          # unit-modulus vector, shape (N,)
    cost: float                # gamma^H A gamma at the final iterate
    iterations: int
    converged: bool            # True when the relative-change test fired
    cost_trace: np.ndarray | None = None


def leading_eigenvector(
    A: np.ndarray, tol: float = 1e-8, max_iters: int = 1_000
) -> np.ndarray:
    """Leading eigenvector of a Hermitian PSD matrix by power iteration.

    Starts from the largest-norm column, which lies in the range of A. A zero
    matrix returns the normalized all-ones vector. The result is normalized
    but its global phase is arbitrary.
    """
    A = np.asarray(A)
    n = A.shape[0]
    norms = np.linalg.norm(A, axis=0)
    pick = int(np.argmax(norms))
    if norms[pick] == 0.0:
        return np.full(n, 1.0 / math.sqrt(n), dtype=complex)
    v = A[:, pick] / norms[pick]
    for _ in range(max_iters):
        w = A @ v
        lam = float(np.real(np.vdot(v, w)))
        if np.linalg.norm(w - lam * v) <= tol * abs(lam):
            break
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
    return v.astype(complex)


def _validate_psd(A: np.ndarray, herm_tol: float = 1e-8, psd_tol: float = 1e-8) -> np.ndarray:
    """Check Hermitian symmetry and positive semidefiniteness, clipping tiny violations.

    A minimum eigenvalue in [-psd_tol * lambda_max, 0) is absorbed by adding a
    multiple of the identity, which shifts the cost of every unit-modulus
    vector by the same constant and so leaves the maximizer unchanged.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"cost matrix must be square, got shape {A.shape}")
    scale = float(np.linalg.norm(A))
    if scale == 0.0:
        return A
    if np.linalg.norm(A - A.conj().T) > herm_tol * scale:
        raise ValidationError("cost matrix is not Hermitian within tolerance")
    A = 0.5 * (A + A.conj().T)
    w = np.linalg.eigvalsh(A)
    lam_min, lam_max = float(w[0]), float(w[-1])
    if lam_max <= 0.0 and lam_min >= -psd_tol * abs(lam_max if lam_max else scale):
        return A
    if lam_min < -psd_tol * max(lam_max, 0.0):
        raise ValidationError(
            f"cost matrix is not PSD: min eigenvalue {lam_min:.3e} vs max {lam_max:.3e}"
        )
    if lam_min < 0.0:
        A = A + (-lam_min) * np.eye(A.shape[0])
    return A


def gpm_solve(
    A: np.ndarray,
    config: GpmConfig | None = None,
    validate: bool = True,
    keep_trace: bool = False,
) -> GpmResult:
    """Run the projected ascent on one cost matrix.

    Args:
        A: Hermitian PSD matrix of shape (N, N).
        config: solver controls; defaults to :class:`GpmConfig`.
        validate: verify (and, for tiny violations, repair) the PSD
            precondition before iterating. Callers that build A from a
            factored quadratic form may skip this.
        keep_trace: record the cost after every iteration for diagnostics.

    Returns:
        :class:`GpmResult` with the final unit-modulus iterate and its cost.
    """
    cfg = config or GpmConfig()
    A = _validate_psd(A) if validate else np.asarray(A, dtype=complex)

    v0 = leading_eigenvector(A, tol=cfg.eig_tol, max_iters=cfg.eig_max_iters)
    gamma = np.exp(1j * np.angle(v0))

    w = A @ gamma
    cost = float(np.real(np.vdot(gamma, w)))
    trace = [cost] if keep_trace else None
    iterations = 0
    converged = False
    while iterations < cfg.max_iters and not converged:
        steps = min(cfg.check_every, cfg.max_iters - iterations)
        for _ in range(steps):
            gamma = _project_torus(gamma + cfg.beta * w)
            w = A @ gamma
        new_cost = float(np.real(np.vdot(gamma, w)))
        iterations += steps
        if trace is not None:
            trace.append(new_cost)
        if abs(new_cost - cost) <= steps * cfg.rel_tol * max(abs(cost), 1e-300):
            converged = True
        cost = new_cost
    return GpmResult(
        gamma=gamma,
        cost=cost,
        iterations=iterations,
        converged=converged,
        cost_trace=np.asarray(trace) if trace is not None else None,
    )


def _leading_eigenvectors_batch(
    As: np.ndarray, tol: float, max_iters: int
) -> np.ndarray:
    """Power iteration over a stack of Hermitian PSD matrices, shape (B, N, N)."""
    B, n, _ = As.shape
    norms = np.linalg.norm(As, axis=1)                  # column norms, (B, N)
    pick = np.argmax(norms, axis=1)
    v = As[np.arange(B), :, pick].copy()                # (B, N) starting columns
    nv = np.linalg.norm(v, axis=1)
    dead = nv == 0.0
    v[dead] = 1.0
    nv[dead] = math.sqrt(n)
    v /= nv[:, None]

    active = np.ones(B, dtype=bool)
    for _ in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        w = np.einsum("bij,bj->bi", As[idx], v[idx])
        lam = np.real(np.einsum("bi,bi->b", v[idx].conj(), w))
        resid = np.linalg.norm(w - lam[:, None] * v[idx], axis=1)
        done = resid <= tol * np.abs(lam)
        nw = np.linalg.norm(w, axis=1)
        stuck = nw == 0.0
        safe = ~(done | stuck)
        upd = idx[safe]
        v[upd] = w[safe] / nw[safe, None]
        active[idx[done | stuck]] = False
    return v


def gpm_solve_batch(
    As: np.ndarray, config: GpmConfig | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Run the projected ascent independently on a stack of cost matrices.

    Matrices must already be Hermitian PSD; no validation or repair is
    applied. Converged problems are frozen while the rest keep iterating, so
    the result for each matrix equals what :func:`gpm_solve` would return.

    Args:
        As: stack of shape (B, N, N).
        config: solver controls shared by every problem.

    Returns:
        Tuple ``(gammas, costs, iterations, converged)`` with shapes
        (B, N), (B,), (B,), (B,).
    """
    cfg = config or GpmConfig()
    As = np.asarray(As, dtype=complex)
    if As.ndim != 3 or As.shape[1] != As.shape[2]:
        raise ValidationError(f"expected a (B, N, N) stack, got shape {As.shape}")
    B = As.shape[0]

    v0 = _leading_eigenvectors_batch(As, tol=cfg.eig_tol, max_iters=cfg.eig_max_iters)
    gamma = np.exp(1j * np.angle(v0))
    w = np.einsum("bij,bj->bi", As, gamma)
    cost = np.real(np.einsum("bi,bi->b", gamma.conj(), w))

    iterations = np.zeros(B, dtype=int)
    converged = np.zeros(B, dtype=bool)
    idx = np.arange(B)
    done_iters = 0
    while done_iters < cfg.max_iters and idx.size:
        steps = min(cfg.check_every, cfg.max_iters - done_iters)
        A_act = As[idx]
        g = gamma[idx]
        wv = w[idx]
        # Buffers are reused across the inner steps; iterating thousands of
        # small problems makes temporary allocation the dominant cost
        # otherwise. The update matches _project_torus entry for entry.
        v = np.empty_like(g)
        mag = np.empty(g.shape, dtype=float)
        g3 = g[..., None]
        w3 = wv[..., None]
        for _ in range(steps):
            np.multiply(cfg.beta, wv, out=v)
            v += g
            np.abs(v, out=mag)
            if not mag.all():
                zero = mag == 0.0
                np.copyto(v, 1.0, where=zero)
                np.copyto(mag, 1.0, where=zero)
            np.divide(v, mag, out=g)
            np.matmul(A_act, g3, out=w3)
        c_new = np.real(np.einsum("bi,bi->b", g.conj(), wv))
        done_iters += steps
        done = np.abs(c_new - cost[idx]) <= (
            steps * cfg.rel_tol * np.maximum(np.abs(cost[idx]), 1e-300)
        )
        gamma[idx] = g
        w[idx] = wv
        cost[idx] = c_new
        iterations[idx] = done_iters
        converged[idx[done]] = True
        idx = idx[~done]
    return gamma, cost, iterations, converged
