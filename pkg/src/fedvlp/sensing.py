"""Multi-user fingerprint collection and local dataset maintenance.

Each simulated user (UE) visits positions on its trajectory, measures the
received power vector under the current round's environment, labels it with
the true coordinate, and keeps a rolling dataset of fixed capacity that is
partially refreshed over rounds.

Feature scaling: raw electrical powers span several orders of magnitude, so
learner inputs are standardized per dimension with statistics frozen from a
pilot grid measured under the round-0 environment; labels are scaled to
[0, 1] per room dimension and inverted at inference.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .environment import RoomEnvironment
from .optics import power_vector


@dataclass
class Sample:
    """One labeled fingerprint: power vector (W, electrical) plus coordinate (m)."""

    powers: np.ndarray
    coordinate: np.ndarray
    round_collected: int

    def __post_init__(self):
        self.powers = np.asarray(self.powers, dtype=float)
        self.coordinate = np.asarray(self.coordinate, dtype=float)
        if self.coordinate.shape != (3,):
            raise ValueError("coordinate must be a 3-vector")
        if np.any(self.powers < 0):
            raise ValueError("powers must be non-negative")


@dataclass
class LocalDataset:
    ue_id: int
    samples: list = field(default_factory=list)
    capacity: int = 900

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if len(self.samples) > self.capacity:
            raise ValueError("dataset exceeds capacity")

    def __len__(self) -> int:
        return len(self.samples)

    def as_arrays(self):
        """(coordinates (D,3), powers (D,N)) in insertion order."""
        coords = np.stack([s.coordinate for s in self.samples])
        powers = np.stack([s.powers for s in self.samples])
        return coords, powers


class SamplingMode(str, Enum):
    REGION_NON_IID = "region"
    UNIFORM_IID = "uniform"


@dataclass
class UeTrajectory:
    """Where one UE samples: its own rectangle (non-IID) or the whole floor."""

    ue_id: int
    mode: SamplingMode = SamplingMode.REGION_NON_IID
    region: tuple | None = None       # (x0, y0, x1, y1), REGION_NON_IID only
    z_plane_m: float = 0.85           # handheld receiver height
    z_range_m: tuple | None = None    # (lo, hi) enables 3-D sampling

    def __post_init__(self):
        self.mode = SamplingMode(self.mode)
        if self.mode is SamplingMode.REGION_NON_IID and self.region is None:
            raise ValueError("region mode requires a region rectangle")


def partition_regions(dims, n: int) -> list:
    """Split the floor into n near-equal rectangles (rows x cols grid)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rows = max(1, math.isqrt(n))
    while n % rows != 0:
        rows -= 1
    cols = n // rows
    length, width = float(dims[0]), float(dims[1])
    out = []
    for r in range(rows):
        for c in range(cols):
            out.append((
                length * c / cols,
                width * r / rows,
                length * (c + 1) / cols,
                width * (r + 1) / rows,
            ))
    return out


def default_trajectories(dims, n_ues: int, mode=SamplingMode.REGION_NON_IID,
                         z_plane_m: float = 0.85,
                         z_range_m: tuple | None = None) -> list:
    mode = SamplingMode(mode)
    if mode is SamplingMode.REGION_NON_IID:
        regions = partition_regions(dims, n_ues)
    else:
        regions = [None] * n_ues
    return [
        UeTrajectory(ue_id=j, mode=mode, region=regions[j],
                     z_plane_m=z_plane_m, z_range_m=z_range_m)
        for j in range(n_ues)
    ]


def collect(env: RoomEnvironment, traj: UeTrajectory, count: int,
            round_index: int, rng, stochastic: bool = False) -> list:
    """Measure ``count`` labeled fingerprints under the round's environment.

    Positions are drawn uniformly over the trajectory's rectangle (or the
    whole floor), at the fixed receiver height unless a z range is set.
    Deterministic given the rng stream.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if traj.mode is SamplingMode.REGION_NON_IID:
        x0, y0, x1, y1 = traj.region
        if not (0.0 <= x0 < x1 <= env.dims[0] and 0.0 <= y0 < y1 <= env.dims[1]):
            raise ValueError("trajectory region must lie within the room footprint")
    else:
        x0, y0, x1, y1 = 0.0, 0.0, float(env.dims[0]), float(env.dims[1])
    samples = []
    for _ in range(count):
        x = rng.uniform(x0, x1)
        y = rng.uniform(y0, y1)
        if traj.z_range_m is not None:
            z = rng.uniform(traj.z_range_m[0], traj.z_range_m[1])
        else:
            z = traj.z_plane_m
        position = np.array([x, y, z])
        powers = power_vector(env.leds, position, env.pd, env.patches, env.noise,
                              rng=rng, stochastic=stochastic)
        samples.append(Sample(powers=powers, coordinate=position,
                              round_collected=round_index))
    return samples


def refresh(dataset: LocalDataset, fresh: list,
            replace_fraction: float = 0.1) -> LocalDataset:
    """New dataset with the oldest samples replaced by fresh ones.

    At most round(replace_fraction * capacity) fresh samples are admitted;
    eviction is oldest-first by round_collected, ties by insertion order.
    """
    if not 0.0 <= replace_fraction <= 1.0:
        raise ValueError("replace_fraction must lie in [0, 1]")
    if len(fresh) > dataset.capacity:
        raise ValueError("more fresh samples than capacity")
    n_new = min(len(fresh), int(round(replace_fraction * dataset.capacity)))
    admitted = list(fresh[:n_new])
    room = dataset.capacity - len(admitted)
    n_evict = max(0, len(dataset.samples) - room)
    if n_evict:
        order = np.argsort([s.round_collected for s in dataset.samples],
                           kind="stable")
        evicted = set(int(i) for i in order[:n_evict])
        kept = [s for i, s in enumerate(dataset.samples) if i not in evicted]
    else:
        kept = list(dataset.samples)
    return LocalDataset(ue_id=dataset.ue_id, samples=kept + admitted,
                        capacity=dataset.capacity)


@dataclass
class FeatureScaler:
    """Frozen standardization for powers and [0,1] scaling for coordinates."""

    power_mean: np.ndarray
    power_std: np.ndarray
    room_dims: np.ndarray

    def __post_init__(self):
        self.power_mean = np.asarray(self.power_mean, dtype=float)
        self.power_std = np.asarray(self.power_std, dtype=float)
        self.room_dims = np.asarray(self.room_dims, dtype=float)
        if np.any(self.power_std <= 0):
            raise ValueError("power_std must be strictly positive")

    @classmethod
    def fit(cls, pilot_powers: np.ndarray, room_dims) -> "FeatureScaler":
        pilot_powers = np.asarray(pilot_powers, dtype=float)
        mean = pilot_powers.mean(axis=0)
        std = pilot_powers.std(axis=0)
        std = np.where(std > 0, std, 1.0)  # guard all-constant dimensions
        return cls(power_mean=mean, power_std=std,
                   room_dims=np.asarray(room_dims, dtype=float))

    def scale_powers(self, powers: np.ndarray) -> np.ndarray:
        return (np.asarray(powers, dtype=float) - self.power_mean) / self.power_std

    def scale_coordinates(self, coords: np.ndarray) -> np.ndarray:
        return np.asarray(coords, dtype=float) / self.room_dims

    def unscale_coordinates(self, scaled: np.ndarray) -> np.ndarray:
        return np.asarray(scaled, dtype=float) * self.room_dims

    def to_jsonable(self) -> dict:
        return {
            "power_mean": [float(v) for v in self.power_mean],
            "power_std": [float(v) for v in self.power_std],
            "room_dims": [float(v) for v in self.room_dims],
        }

    @classmethod
    def from_jsonable(cls, d: dict) -> "FeatureScaler":
        return cls(power_mean=np.array(d["power_mean"]),
                   power_std=np.array(d["power_std"]),
                   room_dims=np.array(d["room_dims"]))


def pilot_grid(dims, z_plane_m: float = 0.85, n: int = 41) -> np.ndarray:
    """(n*n, 3) uniform grid over the sampling plane, wall to wall."""
    xs = np.linspace(0.0, float(dims[0]), n)
    ys = np.linspace(0.0, float(dims[1]), n)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    out = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, z_plane_m)], axis=1)
    return out


def fit_scaler_from_pilot(env: RoomEnvironment, z_plane_m: float = 0.85,
                          n: int = 41) -> FeatureScaler:
    """Standardization statistics from a deterministic pilot survey of the
    round-0 environment."""
    grid = pilot_grid(env.dims, z_plane_m, n)
    powers = np.stack([
        power_vector(env.leds, pos, env.pd, env.patches, env.noise)
        for pos in grid
    ])
    return FeatureScaler.fit(powers, env.dims)


def _fmt(value: float) -> str:
    # shortest round-trip decimal; exact float64 recovery on import
    return repr(float(value))


def export_dataset_csv(dataset: LocalDataset, path) -> None:
    """Write one UE's dataset: header round,x,y,z,p_1,...,p_N."""
    path = Path(path)
    n = len(dataset.samples[0].powers) if dataset.samples else 0
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "x", "y", "z"] + [f"p_{i + 1}" for i in range(n)])
        for s in dataset.samples:
            writer.writerow([s.round_collected] + [_fmt(v) for v in s.coordinate]
                            + [_fmt(v) for v in s.powers])


def import_dataset_csv(path, ue_id: int, capacity: int | None = None) -> LocalDataset:
    path = Path(path)
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["round", "x", "y", "z"]:
            raise ValueError(f"unexpected dataset header in {path}")
        for row in reader:
            samples.append(Sample(
                powers=np.array([float(v) for v in row[4:]]),
                coordinate=np.array([float(v) for v in row[1:4]]),
                round_collected=int(row[0]),
            ))
    if capacity is None:
        capacity = max(len(samples), 1)
    return LocalDataset(ue_id=ue_id, samples=samples, capacity=capacity)


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
