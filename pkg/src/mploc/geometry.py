"""Emitter and base-station geometry: positions, deployment sampling, and propagation delays.

All positions are Cartesian coordinates in meters. Deployments are planar:
the emitter and every station share one height, and stations surround the
emitter on an annulus split into equal azimuth arcs so no side of the scene
is left uncovered.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ValidationError

SPEED_OF_LIGHT = 299792458.0  # m/s


@dataclass(frozen=True)
class Position:
    """A point in 3D space, in meters."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"position coordinate {name}={v!r} is not finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a) -> "Position":
        a = np.asarray(a, dtype=float)
        if a.shape != (3,):
            raise ValidationError(f"expected a length-3 coordinate array, got shape {a.shape}")
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def distance_to(self, other: "Position") -> float:
        return float(np.linalg.norm(self.as_array() - other.as_array()))


def toa(source: Position, receiver: Position) -> float:
    """Line-of-sight time of arrival from ``source`` to ``receiver`` in seconds."""
    return source.distance_to(receiver) / SPEED_OF_LIGHT


def toa_array(points: np.ndarray, receiver: np.ndarray) -> np.ndarray:
    """Line-of-sight delays for a stack of points.

    Args:
        points: array of shape (..., 3) in meters.
        receiver: length-3 coordinate array in meters.

    Returns:
        Array of delays in seconds with shape ``points.shape[:-1]``.
    """
    points = np.asarray(points, dtype=float)
    receiver = np.asarray(receiver, dtype=float)
    return np.linalg.norm(points - receiver, axis=-1) / SPEED_OF_LIGHT


@dataclass(frozen=True)
class GeometryConfig:
    """Parameters of the annular deployment sampler.

    The emitter is drawn uniformly over a disc of radius ``emitter_radius_m``.
    Station m is drawn with uniform radius in
    [``station_radius_min_m``, ``station_radius_max_m``] and uniform azimuth
    inside the m-th of ``num_stations`` equal arcs.
    """

    num_stations: int = 8
    emitter_radius_m: float = 25.0
    station_radius_min_m: float = 45.0
    station_radius_max_m: float = 55.0
    plane_height_m: float = 0.0

    def __post_init__(self) -> None:
        if self.num_stations < 2:
            raise ConfigurationError(f"need at least 2 stations, got {self.num_stations}")
        if not 0.0 < self.emitter_radius_m < self.station_radius_min_m:
            raise ConfigurationError(
                "emitter disc must be strictly inside the station annulus: "
                f"emitter_radius_m={self.emitter_radius_m}, "
                f"station_radius_min_m={self.station_radius_min_m}"
            )
        if not self.station_radius_min_m < self.station_radius_max_m:
            raise ConfigurationError(
                f"station annulus is empty: [{self.station_radius_min_m}, "
                f"{self.station_radius_max_m}]"
            )
        if not math.isfinite(self.plane_height_m):
            raise ConfigurationError(f"plane_height_m={self.plane_height_m!r} is not finite")


@dataclass(frozen=True)
class Scenario:
    """One emitter together with the synchronized stations observing it."""

    emitter: Position
    stations: tuple[Position, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if len(self.stations) < 2:
            raise ValidationError(f"need at least 2 stations, got {len(self.stations)}")
        coords = [(p.x, p.y, p.z) for p in self.stations]
        if len(set(coords)) != len(coords):
            raise ValidationError("station positions must be pairwise distinct")
        if (self.emitter.x, self.emitter.y, self.emitter.z) in coords:
            raise ValidationError("emitter coincides with a station")

    @property
    def num_stations(self) -> int:
        return len(self.stations)

    def station_matrix(self) -> np.ndarray:
        """Station coordinates stacked into an (M, 3) array."""
        return np.stack([p.as_array() for p in self.stations])

    def toas(self) -> np.ndarray:
        """Line-of-sight delay from the emitter to each station, shape (M,)."""
        return np.array([toa(self.emitter, p) for p in self.stations])

    def to_dict(self) -> dict:
        return {
            "emitter": [self.emitter.x, self.emitter.y, self.emitter.z],
            "stations": [[p.x, p.y, p.z] for p in self.stations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            emitter = Position.from_array(np.asarray(d["emitter"], dtype=float))
            stations = tuple(Position.from_array(np.asarray(s, dtype=float)) for s in d["stations"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed scenario dictionary: {exc}") from exc
        return cls(emitter=emitter, stations=stations)


def sample_scenario(config: GeometryConfig, rng: np.random.Generator) -> Scenario:
    """Draw one random deployment.

    Draw order is fixed so a seeded generator reproduces the scenario exactly:
    emitter radius, emitter azimuth, then per station radius and azimuth in
    station order. The emitter is uniform in area over its disc (radius
    proportional to sqrt(u)); station radii are uniform in [r_min, r_max].
    """
    r = config.emitter_radius_m * math.sqrt(rng.uniform())
    phi = rng.uniform(0.0, 2.0 * math.pi)
    emitter = Position(r * math.cos(phi), r * math.sin(phi), config.plane_height_m)

    arc = 2.0 * math.pi / config.num_stations
    stations = []
    for m in range(config.num_stations):
        rho = rng.uniform(config.station_radius_min_m, config.station_radius_max_m)
        theta = rng.uniform(m * arc, (m + 1) * arc)
        stations.append(
            Position(rho * math.cos(theta), rho * math.sin(theta), config.plane_height_m)
        )
    return Scenario(emitter=emitter, stations=tuple(stations))
