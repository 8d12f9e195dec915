"""The discrete-time pointing game: a fixed constellation overhead, one
steerable telescope, five slew actions, reward = satellites inside the field
of view after each step.

The satellite geometry is deterministic given the constellation seed; a
per-episode RNG drives only the measurement noise. Internals are vectorized
across the constellation because training rolls out millions of steps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import astro
from .astro import AerVector, EarthModel, OrbitElements, wrap_angle, wrap_signed
from .errors import SteppedAfterDone
from .sensor import Action, Measurement, SensorConfig, TelescopePointing, aer_noise_matrix, apply_action

N_ACTIONS = len(Action)

INITIAL_POINTING = TelescopePointing(azimuth=0.0, elevation=np.pi / 4)


@dataclass(frozen=True)
class EnvConfig:
    n_satellites: int = 25
    episode_steps: int = 20
    sensor: SensorConfig = field(default_factory=SensorConfig)
    orbit_radius: float = 7e6
    seed: int = 42

    def __post_init__(self):
        if self.n_satellites < 1 or self.episode_steps < 1:
            raise ValueError("n_satellites and episode_steps must be at least 1")

    @property
    def observation_size(self) -> int:
        return 2 + 2 * self.n_satellites


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    measurements: list[Measurement]


class Environment:
    """reset/step episode machine. One instance is single-threaded."""

    def __init__(self, cfg: EnvConfig, earth: EarthModel = EarthModel(),
                 elements: list[OrbitElements] | None = None):
        self.cfg = cfg
        self.earth = earth
        if elements is None:
            elements = astro.generate_constellation(cfg.n_satellites, cfg.orbit_radius,
                                                    cfg.seed, earth)
        if len(elements) != cfg.n_satellites:
            raise ValueError("elements length does not match n_satellites")
        self.elements = elements

        # per-satellite orbit machinery, stacked for vectorized propagation
        basis = [astro.orbit_plane_basis(el) for el in elements]
        self._p_basis = np.array([b[0] for b in basis])          # (n, 3)
        self._q_basis = np.array([b[1] for b in basis])          # (n, 3)
        self._radius = np.array([el.radius for el in elements])
        self._phase = np.array([el.phase for el in elements])
        self._mean_motion = np.sqrt(earth.mu / self._radius**3)

        self._site_ecef = astro.site_ecef_position(cfg.sensor.site, earth)
        self._ned_rot = astro.ned_rotation(cfg.sensor.site)
        self._p_aer = aer_noise_matrix(cfg.sensor)
        self._noise_scale = np.array([cfg.sensor.sigma_theta, cfg.sensor.sigma_theta,
                                      cfg.sensor.sigma_r])

        self._t_index: int | None = None  # None until reset

    # -- truth geometry ----------------------------------------------------

    def _truth_at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(n, 3) positions and velocities of the constellation at time t."""
        u = self._phase + self._mean_motion * t
        cu, su = np.cos(u)[:, None], np.sin(u)[:, None]
        r = self._radius[:, None]
        pos = r * (cu * self._p_basis + su * self._q_basis)
        vel = r * self._mean_motion[:, None] * (-su * self._p_basis + cu * self._q_basis)
        return pos, vel

    def _aer_arrays(self, pos: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized eci_to_aer for (n, 3) positions."""
        ecef = astro.earth_spin(t, self.earth).T @ pos.T          # (3, n)
        ned = self._ned_rot.T @ (ecef - self._site_ecef[:, None])
        north, east, down = ned
        horiz = np.hypot(north, east)
        rng = np.hypot(horiz, down)
        az = wrap_angle(np.arctan2(east, north))
        el = np.arctan2(-down, horiz)
        return az, el, rng

    def _eci_of_aer(self, az: np.ndarray, el: np.ndarray, rng: np.ndarray,
                    t: float) -> np.ndarray:
        """Vectorized aer_to_eci; returns (3, k)."""
        ce = np.cos(el)
        ned = np.vstack([rng * ce * np.cos(az), rng * ce * np.sin(az), -rng * np.sin(el)])
        ecef = self._ned_rot @ ned + self._site_ecef[:, None]
        return astro.earth_spin(t, self.earth) @ ecef

    # -- episode lifecycle ---------------------------------------------------

    def reset(self, episode_seed) -> np.ndarray:
        """Start an episode: t = 0, boresight at (az 0, el 45 deg), fresh
        measurement-noise RNG. Returns the initial observation."""
        self._t_index = 0
        self._pointing = INITIAL_POINTING
        self._rng = np.random.default_rng(episode_seed)
        pos, vel = self._truth_at(0.0)
        self.truth_positions = [pos]
        self.truth_velocities = [vel]
        self.pointing_log = [self._pointing]
        az, el, _ = self._aer_arrays(pos, 0.0)
        return self._observation(az, el)

    @property
    def observation_size(self) -> int:
        return self.cfg.observation_size

    @property
    def done(self) -> bool:
        return self._t_index is not None and self._t_index >= self.cfg.episode_steps

    def step(self, action) -> StepResult:
        if self._t_index is None:
            raise SteppedAfterDone("reset() the environment before stepping")
        if self.done:
            raise SteppedAfterDone("episode already finished")
        self._t_index += 1
        t = self._t_index * self.cfg.sensor.dt
        self._pointing = apply_action(self._pointing, Action(action), self.cfg.sensor)

        pos, vel = self._truth_at(t)
        self.truth_positions.append(pos)
        self.truth_velocities.append(vel)
        self.pointing_log.append(self._pointing)

        az, el, rng = self._aer_arrays(pos, t)
        d_phi = wrap_signed(az - self._pointing.azimuth)
        d_theta = el - self._pointing.elevation
        fov = self.cfg.sensor.fov_half_angle
        detected = (np.abs(d_phi) <= fov) & (np.abs(d_theta) <= fov) & (el > 0)

        measurements = self._build_measurements(detected, az, el, rng, t)
        return StepResult(
            observation=self._observation(az, el),
            reward=float(np.count_nonzero(detected)),
            done=self.done,
            measurements=measurements,
        )

    def _observation(self, az: np.ndarray, el: np.ndarray) -> np.ndarray:
        obs = np.empty(self.cfg.observation_size)
        obs[0] = self._pointing.azimuth
        obs[1] = self._pointing.elevation
        obs[2::2] = wrap_signed(az - self._pointing.azimuth)
        obs[3::2] = el - self._pointing.elevation
        return obs

    def _build_measurements(self, detected: np.ndarray, az: np.ndarray, el: np.ndarray,
                            rng: np.ndarray, t: float) -> list[Measurement]:
        idx = np.flatnonzero(detected)
        if idx.size == 0:
            return []
        k = idx.size
        noise = self._rng.normal(size=(k, 3)) * self._noise_scale
        az_n = wrap_angle(az[idx] + noise[:, 0])
        el_n = np.clip(el[idx] + noise[:, 1], -np.pi / 2, np.pi / 2)
        r_n = np.maximum(rng[idx] + noise[:, 2], 0.0)

        # central differences at the noisy points, all satellites in one pass:
        # 7 evaluation points per satellite (center, az+-h, el+-h, range+-h)
        h_az, h_el, h_r = astro.JACOBIAN_STEPS
        azs = np.concatenate([az_n, az_n + h_az, az_n - h_az, az_n, az_n, az_n, az_n])
        els = np.concatenate([el_n, el_n, el_n, el_n + h_el, el_n - h_el, el_n, el_n])
        rs = np.concatenate([r_n, r_n, r_n, r_n, r_n, r_n + h_r, r_n - h_r])
        eci = self._eci_of_aer(azs, els, rs, t).reshape(3, 7, k)
        center = eci[:, 0, :]
        j_az = (eci[:, 1, :] - eci[:, 2, :]) / (2 * h_az)
        j_el = (eci[:, 3, :] - eci[:, 4, :]) / (2 * h_el)
        j_r = (eci[:, 5, :] - eci[:, 6, :]) / (2 * h_r)

        out = []
        for j, sat in enumerate(idx):
            jac = np.column_stack([j_az[:, j], j_el[:, j], j_r[:, j]])
            out.append(Measurement(
                satellite_id=int(sat),
                aer=AerVector(float(az_n[j]), float(el_n[j]), float(r_n[j])),
                eci_position=center[:, j].copy(),
                noise_eci=astro.transform_noise(self._p_aer, jac),
                time=t,
            ))
        return out


def episode_return(actions, cfg: EnvConfig, episode_seed,
                   earth: EarthModel = EarthModel(),
                   elements: list[OrbitElements] | None = None,
                   env: Environment | None = None) -> float:
    """Total reward of one episode under a fixed action sequence."""
    if len(actions) != cfg.episode_steps:
        raise ValueError("action sequence length must equal episode_steps")
    if env is None:
        env = Environment(cfg, earth, elements)
    env.reset(episode_seed)
    total = 0.0
    for a in actions:
        total += env.step(a).reward
    return total
