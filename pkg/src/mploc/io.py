"""File formats for observations, profiles, scenarios, and results.

Observation sets travel as a raw binary payload plus a JSON sidecar of the
same basename: the payload is little-endian float64 with real and imaginary
parts interleaved per sample, samples in flat window-major order, stations
concatenated; the sidecar records {M, K, D, Fs, noise_variance}. Everything
else is plain JSON.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .channel import FrequencyGrid, Pdp
from .errors import ValidationError
from .estimator import UsageResult
from .geometry import Scenario
from .signal import ObservationSet

_PAYLOAD_DTYPE = np.dtype("<f8")


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def write_observations(obs: ObservationSet, path: str | Path) -> Path:
    """Write the binary payload to ``path`` and its sidecar next to it."""
    path = Path(path)
    m, n = obs.y.shape
    flat = np.empty((m, n, 2), dtype=_PAYLOAD_DTYPE)
    flat[:, :, 0] = obs.y.real
    flat[:, :, 1] = obs.y.imag
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(flat.tobytes())
    sidecar = {
        "M": m,
        "K": obs.num_bins,
        "D": obs.num_windows,
        "Fs": obs.grid.sample_rate_hz,
        "noise_variance": obs.noise_variance,
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=2) + "\n")
    return path


def read_observations(path: str | Path) -> ObservationSet:
    """Read a binary payload and its JSON sidecar back into an observation set."""
    path = Path(path)
    try:
        meta = json.loads(_sidecar_path(path).read_text())
        m, k, d = int(meta["M"]), int(meta["K"]), int(meta["D"])
        fs = float(meta["Fs"])
        noise_variance = float(meta["noise_variance"])
    except FileNotFoundError:
        raise
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ValidationError(f"malformed observation sidecar {_sidecar_path(path)}: {exc}") from exc
    raw = np.frombuffer(path.read_bytes(), dtype=_PAYLOAD_DTYPE)
    expected = m * k * d * 2
    if raw.size != expected:
        raise ValidationError(
            f"payload {path} holds {raw.size} floats, sidecar promises {expected}"
        )
    flat = raw.reshape(m, k * d, 2)
    y = flat[:, :, 0] + 1j * flat[:, :, 1]
    return ObservationSet(
        y=y, grid=FrequencyGrid(num_bins=k, sample_rate_hz=fs),
        num_windows=d, noise_variance=noise_variance,
    )


def write_pdp(pdp: Pdp, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(pdp.to_dict(), indent=2) + "\n")
    return path


def read_pdp(path: str | Path) -> Pdp:
    try:
        return Pdp.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed PDP file {path}: {exc}") from exc


def write_scenario(scenario: Scenario, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")
    return path


def read_scenario(path: str | Path) -> Scenario:
    try:
        return Scenario.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed scenario file {path}: {exc}") from exc


def usage_result_dict(result: UsageResult) -> dict:
    """JSON-ready view of a search result: estimate plus the scored cost map."""
    return {
        "position": [result.position.x, result.position.y, result.position.z],
        "best_index": result.best_index,
        "best_cost": float(result.costs[result.best_index]),
        "costs": [float(c) for c in result.costs],
        "candidates": result.candidates.positions.tolist(),
    }


def write_usage_result(result: UsageResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(usage_result_dict(result), indent=2) + "\n")
    return path
