"""Multi-state LoS/NLoS spherical-wave channel model for a uniform linear array.

Geometry: the base station is a uniform linear array of ``M`` elements spaced
``d`` meters apart along the x-axis, centered on the origin of a 2-D plane.
A user at polar position ``(r, theta)`` sits at ``(r sin(theta), r cos(theta))``;
``theta = 0`` points along boresight (the +y axis). Every antenna element sees
its own distance ``r_{k,m}`` to the user, so both the received amplitude and
the phase vary across the aperture instead of following a single plane wave.

A user's link is either line-of-sight (state 1), in which case the channel is
the deterministic spherical-wave response, or non-line-of-sight (state 0), in
which case it is Rayleigh fading with a per-antenna path-loss profile. States
are drawn Bernoulli with a configurable LoS probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Rate floors beyond this make 2**rate overflow any sensible power budget;
# reject them at config time rather than produce inf/nan downstream.
MAX_MIN_RATE = 64.0


@dataclass(frozen=True)
class SystemConfig:
    """Physical and system constants for one simulated cell.

    Defaults are the reference urban micro-cell setup: a 1000-element array at
    4 GHz with half-wavelength spacing, 20 MHz bandwidth, 1000 users dropped
    uniformly over an annulus between 30 m and 1 km, -174 dBm/Hz noise floor,
    and per-user rate floors drawn uniformly from [5, 15] bps/Hz.

    All powers are in watts; dBm exists only at the CLI boundary.
    """

    num_antennas: int = 1000
    antenna_spacing: float = 0.0375          # m
    carrier_freq: float = 4.0e9              # Hz
    bandwidth: float = 20.0e6                # Hz
    num_users: int = 1000
    tx_power_budget: float = 1.0             # W (30 dBm)
    los_probability: float = 1.0
    epsilon: float = 0.4                     # admissibility for channel orthogonality
    pathloss_exp_los: float = 2.20
    pathloss_exp_nlos: float = 3.67
    ref_attenuation_los: float = 1.0e-4      # linear, at 1 m
    ref_attenuation_nlos: float = 10.0 ** -3.85
    noise_psd: float = 10.0 ** ((-174.0 - 30.0) / 10.0)   # W/Hz
    min_rate_range: tuple[float, float] = (5.0, 15.0)     # bps/Hz
    r_min: float = 30.0                      # m
    r_max: float = 1000.0                    # m
    rng_seed: int = 0

    def __post_init__(self):
        def bad(name, msg):
            raise ConfigInvalid(name, msg)

        if self.num_antennas < 1:
            bad("num_antennas", "must be >= 1")
        if self.antenna_spacing <= 0:
            bad("antenna_spacing", "must be positive")
        if self.carrier_freq <= 0:
            bad("carrier_freq", "must be positive")
        if self.bandwidth <= 0:
            bad("bandwidth", "must be positive")
        if self.num_users < 0:
            bad("num_users", "must be >= 0")
        if self.tx_power_budget <= 0:
            bad("tx_power_budget", "must be positive")
        if not 0.0 <= self.los_probability <= 1.0:
            bad("los_probability", "must lie in [0, 1]")
        if not 0.0 < self.epsilon < 1.0:
            bad("epsilon", "must lie strictly between 0 and 1")
        if self.pathloss_exp_los <= 0 or self.pathloss_exp_nlos <= 0:
            bad("pathloss_exp", "exponents must be positive")
        if self.ref_attenuation_los <= 0 or self.ref_attenuation_nlos <= 0:
            bad("ref_attenuation", "attenuations must be positive")
        if self.noise_psd <= 0:
            bad("noise_psd", "must be positive")
        lo, hi = self.min_rate_range
        if not 0.0 <= lo <= hi:
            bad("min_rate_range", "need 0 <= lo <= hi")
        if hi > MAX_MIN_RATE:
            bad("min_rate_range", f"rate floors above {MAX_MIN_RATE} bps/Hz are not supported")
        if not 0.0 < self.r_min < self.r_max:
            bad("r_min/r_max", "need 0 < r_min < r_max")
        if self.rng_seed < 0:
            bad("rng_seed", "must be a non-negative integer")
        if self.antenna_spacing < self.wavelength / 2.0:
            bad("antenna_spacing", "must be at least half a wavelength "
                f"({self.wavelength / 2.0:.6g} m) for uncorrelated NLoS fading")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def aperture(self) -> float:
        """Physical array length (M - 1) * d in meters."""
        return (self.num_antennas - 1) * self.antenna_spacing

    @property
    def noise_power(self) -> float:
        """Receiver noise power over the full band, N0 * B, in watts."""
        return self.noise_psd * self.bandwidth


@dataclass(frozen=True)
class UserPosition:
    """Polar position relative to the array center; theta = 0 is boresight."""

    r: float       # m
    theta: float   # rad

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("user distance must be positive")
        if not -math.pi <= self.theta <= math.pi:
            raise ValueError("theta must lie in [-pi, pi]")

    @property
    def xy(self) -> tuple[float, float]:
        return (self.r * math.sin(self.theta), self.r * math.cos(self.theta))


@dataclass
class User:
    """One user: position, channel state (1 = LoS, 0 = NLoS), rate floor, channel."""

    position: UserPosition
    state: int
    min_rate: float                     # bps/Hz
    channel: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.state not in (0, 1):
            raise ValueError("channel state must be 0 or 1")
        if self.min_rate < 0:
            raise ValueError("rate floor must be non-negative")


def antenna_positions(cfg: SystemConfig) -> np.ndarray:
    """Element offsets along the array axis, centered on the origin.

    Element m (0-based) sits at m*d - D/2 where D is the aperture.
    """
    m = np.arange(cfg.num_antennas, dtype=float)
    return m * cfg.antenna_spacing - cfg.aperture / 2.0


def user_antenna_distance(pos: UserPosition, antenna_offset) -> np.ndarray:
    """Distance between the user point (r sin(theta), r cos(theta)) and an
    element at (x, 0): sqrt(r^2 + x^2 - 2 r x sin(theta)).

    ``antenna_offset`` may be a scalar or an array of offsets.
    """
    x = np.asarray(antenna_offset, dtype=float)
    return np.sqrt(pos.r**2 + x**2 - 2.0 * pos.r * x * math.sin(pos.theta))


def los_channel_vector(pos: UserPosition, cfg: SystemConfig) -> np.ndarray:
    """Spherical-wave line-of-sight response.

    Entry m has amplitude sqrt(beta0 / r_m^gamma) and phase -2*pi*r_m/lambda,
    with r_m the per-element distance; deterministic in (pos, cfg).
    """
    r_m = user_antenna_distance(pos, antenna_positions(cfg))
    amplitude = np.sqrt(cfg.ref_attenuation_los / r_m**cfg.pathloss_exp_los)
    return amplitude * np.exp(-2j * np.pi * r_m / cfg.wavelength)


def nlos_covariance_diag(pos: UserPosition, cfg: SystemConfig) -> np.ndarray:
    """Per-antenna NLoS path-loss coefficients beta_m = beta0 / r_m^gamma.

    These are the diagonal of the (diagonal) NLoS covariance: the large array
    aperture makes the average received power vary across elements.
    """
    r_m = user_antenna_distance(pos, antenna_positions(cfg))
    return cfg.ref_attenuation_nlos / r_m**cfg.pathloss_exp_nlos


def sample_nlos_vector(pos: UserPosition, cfg: SystemConfig,
                       rng: np.random.Generator) -> np.ndarray:
    """One Rayleigh-fading draw: entry m is circularly-symmetric complex
    Gaussian with variance beta_m, independent across antennas."""
    variance = nlos_covariance_diag(pos, cfg)
    scale = np.sqrt(variance / 2.0)
    m = cfg.num_antennas
    return scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m))


def sample_channel_state(los_probability: float, rng: np.random.Generator) -> int:
    """Bernoulli draw: 1 (LoS) with the given probability, else 0 (NLoS)."""
    if not 0.0 <= los_probability <= 1.0:
        raise ValueError("los_probability must lie in [0, 1]")
    return int(rng.random() < los_probability)


def multi_state_channel(pos: UserPosition, state: int, cfg: SystemConfig,
                        rng: np.random.Generator) -> np.ndarray:
    """Channel vector for a user in the given state: the deterministic LoS
    response when state is 1, a fresh NLoS draw when state is 0.

    Only the selected branch is evaluated, so the rng is consumed only for
    NLoS users.
    """
    if state not in (0, 1):
        raise ValueError("channel state must be 0 or 1")
    if state == 1:
        return los_channel_vector(pos, cfg)
    return sample_nlos_vector(pos, cfg, rng)


def radius_from_uniform(u: float, r_min: float, r_max: float) -> float:
    """Inverse CDF of the area-uniform radial density 2r/(r_max^2 - r_min^2)."""
    return math.sqrt(r_min**2 + u * (r_max**2 - r_min**2))


def sample_user_position(cfg: SystemConfig, rng: np.random.Generator) -> UserPosition:
    """Position uniform over the annulus: theta uniform on [-pi, pi], radius
    by inverse transform so the density is proportional to r."""
    theta = rng.uniform(-np.pi, np.pi)
    r = radius_from_uniform(rng.random(), cfg.r_min, cfg.r_max)
    return UserPosition(r=r, theta=float(theta))


def sample_user(cfg: SystemConfig, rng: np.random.Generator) -> User:
    """Draw one user: position, state, rate floor, then its channel vector."""
    pos = sample_user_position(cfg, rng)
    state = sample_channel_state(cfg.los_probability, rng)
    lo, hi = cfg.min_rate_range
    min_rate = lo if lo == hi else float(rng.uniform(lo, hi))
    chan = multi_state_channel(pos, state, cfg, rng)
    return User(position=pos, state=state, min_rate=min_rate, channel=chan)


def sample_users(cfg: SystemConfig, rng: np.random.Generator) -> list[User]:
    """Draw the full user population for one realization."""
    return [sample_user(cfg, rng) for _ in range(cfg.num_users)]
