"""Ground telescope model: pointing, discrete slewing, field of view, and
noisy az/el/range measurements with their inertial-frame noise covariance."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import astro
from .astro import AerVector, EarthModel, SensorSite, StateVector, wrap_angle, wrap_signed


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    NOOP = 4


@dataclass(frozen=True)
class TelescopePointing:
    """Boresight direction; elevation stays between horizon and zenith."""

    azimuth: float    # rad, [0, 2*pi)
    elevation: float  # rad, [0, pi/2]

    def __post_init__(self):
        if not 0 <= self.elevation <= np.pi / 2:
            raise ValueError("elevation must lie in [0, pi/2]")
        if not 0 <= self.azimuth < 2 * np.pi:
            raise ValueError("azimuth must lie in [0, 2*pi)")


@dataclass(frozen=True)
class SensorConfig:
    site: SensorSite = SensorSite()
    fov_half_angle: float = np.deg2rad(15.0)  # rad
    slew_rate: float = np.deg2rad(2.0)        # rad/s
    sigma_theta: float = 1e-5                 # rad, both angles
    sigma_r: float = 10.0                     # m
    dt: float = 30.0                          # s per environment step

    def __post_init__(self):
        if self.fov_half_angle <= 0 or self.slew_rate <= 0 or self.dt <= 0:
            raise ValueError("fov_half_angle, slew_rate and dt must be positive")
        if self.sigma_theta < 0 or self.sigma_r < 0:
            raise ValueError("noise sigmas must be non-negative")

    @property
    def step_angle(self) -> float:
        """Angular distance covered by one full-step slew."""
        return self.slew_rate * self.dt


@dataclass(frozen=True)
class Measurement:
    """One detection: noisy AER, its ECI equivalent, and the mapped noise."""

    satellite_id: int
    aer: AerVector
    eci_position: np.ndarray   # (3,) m
    noise_eci: np.ndarray      # (3, 3), symmetric PSD
    time: float                # s


def apply_action(p: TelescopePointing, a: Action, cfg: SensorConfig) -> TelescopePointing:
    """Slew one step in the commanded direction.

    Azimuth moves wrap modulo 2*pi. An up move past the zenith comes down the
    other side (elevation reflects about pi/2, azimuth flips by pi); a down
    move that would dip below the horizon is refused and leaves the pointing
    unchanged.
    """
    step = cfg.step_angle
    az, el = p.azimuth, p.elevation
    if a == Action.NOOP:
        return p
    if a == Action.LEFT:
        return TelescopePointing(wrap_angle(az - step), el)
    if a == Action.RIGHT:
        return TelescopePointing(wrap_angle(az + step), el)
    if a == Action.UP:
        el_new = el + step
        if el_new > np.pi / 2:
            el_new = np.pi - el_new
            az = wrap_angle(az + np.pi)
        return TelescopePointing(az, el_new)
    if a == Action.DOWN:
        el_new = el - step
        if el_new < 0:
            return p
        return TelescopePointing(az, el_new)
    raise ValueError(f"unknown action {a!r}")


def angular_offsets(sat_aer: AerVector, p: TelescopePointing) -> tuple[float, float]:
    """(azimuth, elevation) angular distances between satellite and boresight.

    The azimuth difference is wrapped so that targets straddling the 0/2*pi
    seam measure small, not almost-full-circle.
    """
    d_phi = abs(wrap_signed(sat_aer.azimuth - p.azimuth))
    d_theta = abs(sat_aer.elevation - p.elevation)
    return float(d_phi), float(d_theta)


def in_fov(sat_aer: AerVector, p: TelescopePointing, cfg: SensorConfig) -> bool:
    """True when the satellite sits inside the square field of view and above
    the horizon. The FoV boundary is inclusive."""
    if sat_aer.elevation <= 0:
        return False
    d_phi, d_theta = angular_offsets(sat_aer, p)
    return d_phi <= cfg.fov_half_angle and d_theta <= cfg.fov_half_angle


def aer_noise_matrix(cfg: SensorConfig) -> np.ndarray:
    """Diagonal measurement noise in the AER frame: (sigma_theta^2, sigma_theta^2, sigma_r^2)."""
    return np.diag([cfg.sigma_theta**2, cfg.sigma_theta**2, cfg.sigma_r**2])


def measure(sat_eci: StateVector, p: TelescopePointing, cfg: SensorConfig,
            t: float, rng: np.random.Generator,
            earth: EarthModel = EarthModel(), satellite_id: int = 0) -> Measurement | None:
    """Attempt a detection of the satellite at time t.

    Returns None when the satellite is outside the field of view. Otherwise
    adds independent zero-mean Gaussian noise to azimuth, elevation and range,
    maps the AER noise covariance into ECI through the Jacobian at the noisy
    point, and reports the noisy position in ECI.
    """
    truth = astro.eci_to_aer(sat_eci.position, cfg.site, t, earth)
    if not in_fov(truth, p, cfg):
        return None
    noise = rng.normal(size=3) * np.array([cfg.sigma_theta, cfg.sigma_theta, cfg.sigma_r])
    noisy = AerVector(
        azimuth=float(wrap_angle(truth.azimuth + noise[0])),
        elevation=float(np.clip(truth.elevation + noise[1], -np.pi / 2, np.pi / 2)),
        range=float(max(truth.range + noise[2], 0.0)),
    )
    jac = astro.jacobian_aer_to_eci(noisy, cfg.site, t, earth)
    return Measurement(
        satellite_id=satellite_id,
        aer=noisy,
        eci_position=astro.aer_to_eci(noisy, cfg.site, t, earth),
        noise_eci=astro.transform_noise(aer_noise_matrix(cfg), jac),
        time=t,
    )
