"""Room configuration and its evolution across communication rounds.

The default room is 5 x 5 x 3 m with 16 ceiling LEDs on a 4x4 grid (the inner
vertices of a 1 m lattice). Three nonstationary scenarios evolve the
environment as a pure function of the round index:

  ambient_drift   background current starts at 0 A and grows by a fixed step
                  per round
  led_blackout    listed LEDs stop emitting from a given round onward
  device_aging    every LED's optical power decays exponentially with rounds

Snapshots are immutable by convention; ``advance`` always derives round t
from the base environment, never from a previous snapshot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .optics import (
    LedAnchor,
    NoiseParams,
    PatchSet,
    Photodiode,
    make_wall_patches,
)

DEFAULT_AGING_BETA = -math.log(0.8) / 100.0  # 80% power at round 100


@dataclass
class RoomEnvironment:
    dims: np.ndarray              # (L, W, H) m
    leds: list                    # LedAnchor, index order is the feature order
    pd: Photodiode
    noise: NoiseParams
    patches: PatchSet
    round_index: int = 0

    def __post_init__(self):
        self.dims = np.asarray(self.dims, dtype=float)
        if self.dims.shape != (3,) or np.any(self.dims <= 0):
            raise ValueError("dims must be a positive 3-vector")
        height = float(self.dims[2])
        for i, led in enumerate(self.leds):
            x, y, z = (float(v) for v in led.position)
            if abs(z - height) > 1e-9:
                raise ValueError(f"LED {i} must be ceiling-mounted at z={height}")
            if not (0.0 <= x <= self.dims[0] and 0.0 <= y <= self.dims[1]):
                raise ValueError(f"LED {i} lies outside the ceiling rectangle")
        if self.round_index < 0:
            raise ValueError("round_index must be non-negative")

    @property
    def n_leds(self) -> int:
        return len(self.leds)

    def led_positions(self) -> np.ndarray:
        return np.stack([led.position for led in self.leds])


class ScenarioKind(str, Enum):
    STATIONARY = "stationary"
    AMBIENT_DRIFT = "ambient_drift"
    LED_BLACKOUT = "led_blackout"
    DEVICE_AGING = "device_aging"


# canonical application order when scenarios are stacked
_KIND_ORDER = {
    ScenarioKind.AMBIENT_DRIFT: 0,
    ScenarioKind.LED_BLACKOUT: 1,
    ScenarioKind.DEVICE_AGING: 2,
    ScenarioKind.STATIONARY: 3,
}


@dataclass
class ScenarioSpec:
    kind: ScenarioKind = ScenarioKind.STATIONARY
    ambient_step_a: float = 50e-6        # background current increase per round
    blackout_led_ids: list | None = None  # None: LED nearest the room center
    blackout_round: int = 0
    aging_initial_w: float = 1.0
    aging_beta: float = DEFAULT_AGING_BETA

    def __post_init__(self):
        self.kind = ScenarioKind(self.kind)
        if self.ambient_step_a < 0:
            raise ValueError("ambient_step_a must be >= 0")
        if self.aging_beta <= 0:
            raise ValueError("aging_beta must be strictly positive")


def led_grid_positions(dims, n_per_side: int) -> np.ndarray:
    """Inner vertices of the (n+1)x(n+1) ceiling lattice, row-major in y then x."""
    length, width, height = (float(v) for v in dims)
    xs = [length * (i + 1) / (n_per_side + 1) for i in range(n_per_side)]
    ys = [width * (j + 1) / (n_per_side + 1) for j in range(n_per_side)]
    return np.array([[x, y, height] for y in ys for x in xs])


def default_blackout_ids(env: RoomEnvironment) -> list:
    """Single LED nearest the room center, first in index order on ties."""
    center = np.array([env.dims[0] / 2.0, env.dims[1] / 2.0])
    d2 = np.sum((env.led_positions()[:, :2] - center) ** 2, axis=1)
    return [int(np.argmin(d2))]


def build_environment(
    dims=(5.0, 5.0, 3.0),
    led_grid: int = 4,
    emit_power_w: float = 1.0,
    half_power_angle_rad: float = math.pi / 3,
    pd: Photodiode | None = None,
    noise: NoiseParams | None = None,
    wall_reflectance: float = 0.7,
    patch_edge_m: float = 0.25,
) -> RoomEnvironment:
    leds = [
        LedAnchor(position=pos, emit_power_w=emit_power_w,
                  half_power_angle_rad=half_power_angle_rad)
        for pos in led_grid_positions(dims, led_grid)
    ]
    return RoomEnvironment(
        dims=np.asarray(dims, dtype=float),
        leds=leds,
        pd=pd if pd is not None else Photodiode(),
        noise=noise if noise is not None else NoiseParams(),
        patches=make_wall_patches(dims, edge_m=patch_edge_m,
                                  reflectance=wall_reflectance),
    )


def default_environment() -> RoomEnvironment:
    """The default desk-scale setup: 16 LEDs, 1 W, 60 deg half-power angle,
    1 cm^2 PD with 90 deg FOV, 740 uA background current, 5 MHz bandwidth."""
    return build_environment()


def advance(env: RoomEnvironment, spec, t: int) -> RoomEnvironment:
    """Environment at round t, derived purely from the base environment.

    ``spec`` may be a single ScenarioSpec or a sequence; stacked scenarios
    apply in the fixed order ambient drift, blackout, aging.
    """
    if t < 0:
        raise ValueError("round index must be non-negative")
    specs = [spec] if isinstance(spec, ScenarioSpec) else list(spec)
    specs.sort(key=lambda s: _KIND_ORDER[s.kind])
    leds = list(env.leds)
    noise = env.noise
    for s in specs:
        if s.kind is ScenarioKind.STATIONARY:
            continue
        if s.kind is ScenarioKind.AMBIENT_DRIFT:
            noise = replace(noise, background_current_a=t * s.ambient_step_a)
        elif s.kind is ScenarioKind.LED_BLACKOUT:
            if t >= s.blackout_round:
                ids = s.blackout_led_ids
                if ids is None:
                    ids = default_blackout_ids(env)
                dark = set(int(i) for i in ids)
                bad = [i for i in dark if not 0 <= i < len(leds)]
                if bad:
                    raise ValueError(f"blackout LED ids out of range: {bad}")
                leds = [replace(led, active=False) if i in dark else led
                        for i, led in enumerate(leds)]
        elif s.kind is ScenarioKind.DEVICE_AGING:
            power = s.aging_initial_w * math.exp(-s.aging_beta * t)
            leds = [replace(led, emit_power_w=power) for led in leds]
    return replace(env, leds=leds, noise=noise, round_index=t)
