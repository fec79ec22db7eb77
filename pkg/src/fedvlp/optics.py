"""Indoor optical wireless channel for downward-facing ceiling LEDs and an
upward-facing photodiode.

Gains:
  LOS       H = (m+1) * A_PD * cos^m(phi) * cos(theta) * T_s * g(theta) / (2*pi*d^2)
  one-bounce reflection, per wall patch:
            h_in  = A_ref * (m+1) / (2*pi*d_in^2)  * cos^m(phi_in)  * cos(theta_in)
            h_ref = A_PD            / (2*pi*d_ref^2) * cos(phi_ref) * cos(theta_ref)
            contribution = reflectance * h_in * h_ref, gated by the PD field of
            view on the reflected ray.

Received electrical power per LED:
            P = (R_p * P_t * H_total)^2 + sigma_n^2        [A^2]
with sigma_n^2 = shot + thermal noise variance. Shot noise is evaluated on the
noiseless signal photocurrent R_p * P_t * H_total (the fed-back definition is
circular; this is the standard substitution).

All angles in radians, distances in meters, powers in watts, currents in amps.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

# physical constants
ELECTRON_CHARGE_C = 1.602176634e-19  # q
BOLTZMANN_J_PER_K = 1.380649e-23     # k

MIN_HALF_POWER_ANGLE_RAD = 1e-6  # below this the Lambertian order diverges
MIN_DISTANCE_M = 1e-9            # emitter/receiver closer than this is degenerate


class GeometryError(ValueError):
    """Degenerate emitter/receiver geometry (coincident points, etc.)."""


@dataclass
class LedAnchor:
    """Ceiling-mounted LED, emission normal pointing straight down."""

    position: np.ndarray          # (3,) m
    emit_power_w: float = 1.0     # transmitted optical power
    half_power_angle_rad: float = math.pi / 3
    active: bool = True           # False models blackout/obstruction: signal exactly zero

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.position.shape != (3,):
            raise ValueError("LED position must be a 3-vector")
        if self.emit_power_w < 0:
            raise ValueError("emit_power_w must be >= 0")
        if not 0.0 < self.half_power_angle_rad < math.pi / 2:
            raise ValueError("half_power_angle_rad must lie in (0, pi/2)")


@dataclass
class Photodiode:
    """Receiver optics and detector parameters (receiver normal points up)."""

    area_m2: float = 1e-4
    fov_rad: float = math.pi / 2
    responsivity_a_per_w: float = 0.6
    filter_gain: float = 1.0
    concentrator_index: float = 1.0

    def __post_init__(self):
        for name in ("area_m2", "responsivity_a_per_w", "filter_gain", "concentrator_index"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 < self.fov_rad <= math.pi / 2:
            raise ValueError("fov_rad must lie in (0, pi/2]")


@dataclass
class NoiseParams:
    """Shot and thermal noise model parameters.

    i2 and i3 are the noise bandwidth factors, fixed at 0.562 and 0.0868.
    capacitance_per_area is in F/m^2 (112 pF/cm^2 = 1.12e-6 F/m^2).
    """

    background_current_a: float = 740e-6
    bandwidth_hz: float = 5e6
    temperature_k: float = 295.0
    open_loop_gain: float = 10.0
    capacitance_per_area_f_m2: float = 1.12e-6
    fet_noise_factor: float = 1.5
    transconductance_s: float = 30e-3
    i2: float = 0.562
    i3: float = 0.0868

    def __post_init__(self):
        if self.background_current_a < 0:
            raise ValueError("background_current_a must be >= 0")
        for name in ("bandwidth_hz", "temperature_k", "open_loop_gain",
                     "capacitance_per_area_f_m2", "fet_noise_factor",
                     "transconductance_s", "i2", "i3"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass
class WallPatch:
    """One small diffuse reflector on a wall, normal pointing into the room."""

    center: np.ndarray    # (3,) m
    normal: np.ndarray    # unit (3,)
    area_m2: float
    reflectance: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.normal = np.asarray(self.normal, dtype=float)
        if self.center.shape != (3,) or self.normal.shape != (3,):
            raise ValueError("patch center and normal must be 3-vectors")
        if abs(float(np.linalg.norm(self.normal)) - 1.0) > 1e-12:
            raise ValueError("patch normal must have unit length within 1e-12")
        if self.area_m2 <= 0:
            raise ValueError("area_m2 must be strictly positive")
        if not 0.0 <= self.reflectance <= 1.0:
            raise ValueError("reflectance must lie in [0, 1]")


class PatchSet:
    """Struct-of-arrays wall patch collection.

    Caches the LED-to-patch incidence gain table per LED geometry so that
    repeated fingerprint synthesis only pays for the patch-to-receiver leg.
    """

    def __init__(self, centers, normals, areas, reflectances):
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 3)
        self.normals = np.asarray(normals, dtype=float).reshape(-1, 3)
        self.areas = np.asarray(areas, dtype=float).reshape(-1)
        self.reflectances = np.asarray(reflectances, dtype=float).reshape(-1)
        n = len(self.centers)
        if not (len(self.normals) == len(self.areas) == len(self.reflectances) == n):
            raise ValueError("patch arrays must have matching lengths")
        self._incidence_cache: dict = {}

    @classmethod
    def from_patches(cls, patches) -> "PatchSet":
        if len(patches) == 0:
            return cls(np.empty((0, 3)), np.empty((0, 3)), np.empty(0), np.empty(0))
        return cls(
            np.stack([p.center for p in patches]),
            np.stack([p.normal for p in patches]),
            np.array([p.area_m2 for p in patches]),
            np.array([p.reflectance for p in patches]),
        )

    def to_patches(self) -> list:
        return [
            WallPatch(self.centers[i].copy(), self.normals[i].copy(),
                      float(self.areas[i]), float(self.reflectances[i]))
            for i in range(len(self))
        ]

    def __len__(self) -> int:
        return len(self.centers)

    def incidence_gains(self, led_position: np.ndarray, lambertian_m: float) -> np.ndarray:
        """Per-patch gain of the LED-to-patch leg (emitter normal down)."""
        key = (tuple(float(c) for c in led_position), float(lambertian_m))
        cached = self._incidence_cache.get(key)
        if cached is not None:
            return cached
        v = self.centers - np.asarray(led_position, dtype=float)
        d2 = np.einsum("ij,ij->i", v, v)
        d = np.sqrt(d2)
        safe = d >= MIN_DISTANCE_M
        d_safe = np.where(safe, d, 1.0)
        cos_irradiance = np.clip(-v[:, 2] / d_safe, 0.0, None)
        cos_incidence = np.clip(-np.einsum("ij,ij->i", v, self.normals) / d_safe, 0.0, None)
        gains = self.areas * (lambertian_m + 1.0) / (2.0 * math.pi * d2) \
            * cos_irradiance ** lambertian_m * cos_incidence
        gains = np.where(safe, gains, 0.0)
        self._incidence_cache[key] = gains
        return gains

    def reflection_gains(self, pd_position: np.ndarray, pd: Photodiode) -> np.ndarray:
        """Per-patch gain of the patch-to-receiver leg, gated by the PD FOV."""
        u = np.asarray(pd_position, dtype=float) - self.centers
        d2 = np.einsum("ij,ij->i", u, u)
        d = np.sqrt(d2)
        safe = d >= MIN_DISTANCE_M
        d_safe = np.where(safe, d, 1.0)
        cos_leaving = np.clip(np.einsum("ij,ij->i", u, self.normals) / d_safe, 0.0, None)
        cos_arriving = np.clip(-u[:, 2] / d_safe, 0.0, None)
        arrival_angle = np.arccos(np.clip(cos_arriving, -1.0, 1.0))
        in_fov = arrival_angle <= pd.fov_rad
        gains = pd.area_m2 / (2.0 * math.pi * d2) * cos_leaving * cos_arriving
        return np.where(safe & in_fov, gains, 0.0)


def as_patch_set(patches) -> PatchSet:
    if isinstance(patches, PatchSet):
        return patches
    return PatchSet.from_patches(list(patches))


def make_wall_patches(dims, edge_m: float = 0.25, reflectance: float = 0.7) -> PatchSet:
    """Tile the four walls of an L x W x H room with square-ish patches.

    The requested edge is adjusted per wall so the tiling is exact; patch
    area is the product of the adjusted edges.
    """
    length, width, height = (float(x) for x in dims)
    if edge_m <= 0:
        raise ValueError("edge_m must be strictly positive")
    centers, normals, areas = [], [], []

    def add_wall(h_extent, fixed_axis, fixed_value, normal):
        nh = max(1, round(h_extent / edge_m))
        nz = max(1, round(height / edge_m))
        eh, ez = h_extent / nh, height / nz
        hs = (np.arange(nh) + 0.5) * eh
        zs = (np.arange(nz) + 0.5) * ez
        for z in zs:
            for h in hs:
                c = [0.0, 0.0, z]
                c[fixed_axis] = fixed_value
                c[1 - fixed_axis] = h
                centers.append(c)
                normals.append(normal)
                areas.append(eh * ez)

    add_wall(length, 1, 0.0, (0.0, 1.0, 0.0))     # y = 0
    add_wall(length, 1, width, (0.0, -1.0, 0.0))  # y = W
    add_wall(width, 0, 0.0, (1.0, 0.0, 0.0))      # x = 0
    add_wall(width, 0, length, (-1.0, 0.0, 0.0))  # x = L
    n = len(centers)
    return PatchSet(np.array(centers), np.array(normals), np.array(areas),
                    np.full(n, float(reflectance)))


def lambertian_order(half_power_angle_rad: float,
                     min_angle_rad: float = MIN_HALF_POWER_ANGLE_RAD) -> float:
    """m = -ln 2 / ln(cos(half-power angle)); 60 deg gives m = 1."""
    if not min_angle_rad <= half_power_angle_rad:
        raise ValueError(
            f"half-power angle {half_power_angle_rad!r} below minimum {min_angle_rad!r}")
    c = math.cos(half_power_angle_rad)
    if c <= 0.0:
        raise ValueError("half-power angle must be strictly below pi/2")
    return -math.log(2.0) / math.log(c)


def concentrator_gain(incidence_rad: float, pd: Photodiode) -> float:
    """Optical concentrator gain: n^2 / sin^2(FOV) inside the FOV, else 0."""
    if incidence_rad > pd.fov_rad:
        return 0.0
    return pd.concentrator_index ** 2 / math.sin(pd.fov_rad) ** 2


def los_gain(led: LedAnchor, pd_position: np.ndarray, pd: Photodiode) -> float:
    """Line-of-sight DC channel gain between one LED and the receiver."""
    pd_position = np.asarray(pd_position, dtype=float)
    delta = pd_position - led.position
    d = float(np.linalg.norm(delta))
    if d < MIN_DISTANCE_M:
        raise GeometryError("LED and receiver are coincident")
    # emitter normal (0,0,-1), receiver normal (0,0,1): both cosines reduce to
    # the vertical drop over the distance
    cos_angle = (float(led.position[2]) - float(pd_position[2])) / d
    if cos_angle <= 0.0:
        return 0.0
    incidence = math.acos(min(1.0, cos_angle))
    if incidence > pd.fov_rad:
        return 0.0
    m = lambertian_order(led.half_power_angle_rad)
    return (m + 1.0) * pd.area_m2 * cos_angle ** m * cos_angle \
        * pd.filter_gain * concentrator_gain(incidence, pd) / (2.0 * math.pi * d * d)


_EMPTY_PATCH_WARNING = "empty wall patch set: reflected-path gain is zero"


def nlos_gain(led: LedAnchor, pd_position: np.ndarray, pd: Photodiode, patches) -> float:
    """Total one-bounce reflected gain summed over wall patches."""
    ps = as_patch_set(patches)
    if len(ps) == 0:
        warnings.warn(_EMPTY_PATCH_WARNING, stacklevel=2)
        return 0.0
    href = ps.reflection_gains(pd_position, pd)
    return _nlos_from_reflection(led, pd_position, ps, href)


def _nlos_from_reflection(led: LedAnchor, pd_position, ps: PatchSet,
                          href: np.ndarray) -> float:
    m = lambertian_order(led.half_power_angle_rad)
    hin = ps.incidence_gains(led.position, m)
    return float(np.dot(ps.reflectances * hin, href))


def shot_noise_variance(noise: NoiseParams, signal_photocurrent_a: float) -> float:
    """2qB * (signal photocurrent + I2 * background current), in A^2."""
    q, b = ELECTRON_CHARGE_C, noise.bandwidth_hz
    return 2.0 * q * signal_photocurrent_a * b \
        + 2.0 * q * noise.background_current_a * noise.i2 * b


def thermal_noise_variance(noise: NoiseParams, pd: Photodiode) -> float:
    """Feedback-resistor and FET thermal noise of the receiver front end, A^2."""
    k, b = BOLTZMANN_J_PER_K, noise.bandwidth_hz
    eta_a = noise.capacitance_per_area_f_m2 * pd.area_m2
    term_feedback = 8.0 * math.pi * k * noise.temperature_k / noise.open_loop_gain \
        * eta_a * noise.i2 * b ** 2
    term_fet = 16.0 * math.pi ** 2 * k * noise.temperature_k * noise.fet_noise_factor \
        / noise.transconductance_s * eta_a ** 2 * noise.i3 * b ** 3
    return term_feedback + term_fet


def noise_variance(noise: NoiseParams, pd: Photodiode,
                   signal_photocurrent_a: float) -> float:
    return shot_noise_variance(noise, signal_photocurrent_a) \
        + thermal_noise_variance(noise, pd)


def _received_power_impl(led: LedAnchor, pd_position, pd: Photodiode,
                         ps: PatchSet | None, href: np.ndarray | None,
                         noise: NoiseParams, rng, stochastic: bool) -> float:
    if led.active:
        h = los_gain(led, pd_position, pd)
        if href is not None:
            h += _nlos_from_reflection(led, pd_position, ps, href)
        photocurrent = pd.responsivity_a_per_w * led.emit_power_w * h
    else:
        photocurrent = 0.0
    variance = noise_variance(noise, pd, photocurrent)
    signal = photocurrent
    if stochastic:
        if rng is None:
            raise ValueError("stochastic mode requires an explicit rng")
        signal = signal + rng.normal(0.0, math.sqrt(variance))
    return signal * signal + variance


def received_power(led: LedAnchor, pd_position, pd: Photodiode, patches,
                   noise: NoiseParams, rng=None, stochastic: bool = False) -> float:
    """Received electrical power from one LED, including the noise floor.

    Deterministic mode adds the noise variance as a bias term; stochastic
    mode additionally perturbs the electrical signal with a zero-mean
    Gaussian of that variance before squaring.
    """
    ps = as_patch_set(patches)
    if len(ps) == 0:
        warnings.warn(_EMPTY_PATCH_WARNING, stacklevel=2)
        ps, href = None, None
    else:
        href = ps.reflection_gains(pd_position, pd)
    return _received_power_impl(led, pd_position, pd, ps, href, noise, rng, stochastic)


def power_vector(leds, pd_position, pd: Photodiode, patches, noise: NoiseParams,
                 rng=None, stochastic: bool = False) -> np.ndarray:
    """Received electrical power for every LED, in LED index order.

    Shares the patch-to-receiver leg across LEDs; element i is bit-identical
    to received_power for LED i. Stochastic draws are consumed in LED index
    order.
    """
    leds = list(leds)
    if len(leds) == 0:
        raise ValueError("power_vector requires at least one LED")
    ps = as_patch_set(patches)
    if len(ps) == 0:
        warnings.warn(_EMPTY_PATCH_WARNING, stacklevel=2)
        ps, href = None, None
    else:
        href = ps.reflection_gains(pd_position, pd)
    out = np.empty(len(leds), dtype=float)
    for i, led in enumerate(leds):
        out[i] = _received_power_impl(led, pd_position, pd, ps, href, noise,
                                      rng, stochastic)
    return out
