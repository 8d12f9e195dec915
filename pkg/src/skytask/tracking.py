"""Extended Kalman filter over the 6-dimensional inertial state of each
satellite: two-body prediction with a finite-difference transition Jacobian,
linear position updates from ECI-mapped measurements, and the log-trace
uncertainty diagnostic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import astro
from .astro import EarthModel, OrbitElements, StateVector
from .errors import NonPositiveTrace, SingularInnovation
from .sensor import Measurement

# Central-difference steps for the 6x6 flow Jacobian: metres for the position
# block, m/s for the velocity block.
FLOW_JACOBIAN_STEPS = (1.0, 1.0, 1.0, 1e-3, 1e-3, 1e-3)


@dataclass(frozen=True)
class EkfConfig:
    process_noise_accel: float = 1e-6   # white-acceleration intensity q, m^2/s^3
    initial_pos_sigma: float = 1e4      # m
    initial_vel_sigma: float = 10.0     # m/s

    def __post_init__(self):
        if min(self.process_noise_accel, self.initial_pos_sigma, self.initial_vel_sigma) < 0:
            raise ValueError("EkfConfig values must be non-negative")


@dataclass(frozen=True)
class TrackEstimate:
    state: StateVector
    covariance: np.ndarray      # (6, 6)
    last_update_time: float


def init_track(initial_state: StateVector, cfg: EkfConfig, t: float = 0.0) -> TrackEstimate:
    """Fresh track with a diagonal covariance from the configured sigmas."""
    diag = [cfg.initial_pos_sigma**2] * 3 + [cfg.initial_vel_sigma**2] * 3
    return TrackEstimate(state=initial_state, covariance=np.diag(diag).astype(float),
                         last_update_time=t)


def process_noise(dt: float, q: float) -> np.ndarray:
    """Discrete white-acceleration noise for one step of length dt."""
    qm = np.zeros((6, 6))
    for i in range(3):
        qm[i, i] = q * dt**3 / 3.0
        qm[i, i + 3] = qm[i + 3, i] = q * dt**2 / 2.0
        qm[i + 3, i + 3] = q * dt
    return qm


def flow_jacobian(x: StateVector, dt: float, earth: EarthModel) -> np.ndarray:
    """6x6 Jacobian of the two-body flow over dt, by central differences."""
    jac = np.empty((6, 6))
    base = x.as_array()
    for k, h in enumerate(FLOW_JACOBIAN_STEPS):
        hi, lo = base.copy(), base.copy()
        hi[k] += h
        lo[k] -= h
        f_hi = astro.two_body_rk4(StateVector.from_array(hi), dt, earth).as_array()
        f_lo = astro.two_body_rk4(StateVector.from_array(lo), dt, earth).as_array()
        jac[:, k] = (f_hi - f_lo) / (2.0 * h)
    return jac


def predict(track: TrackEstimate, dt: float, earth: EarthModel, cfg: EkfConfig) -> TrackEstimate:
    """Propagate mean and covariance through the two-body dynamics."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    f = flow_jacobian(track.state, dt, earth)
    state = astro.two_body_rk4(track.state, dt, earth)
    cov = f @ track.covariance @ f.T + process_noise(dt, cfg.process_noise_accel)
    cov = 0.5 * (cov + cov.T)
    return TrackEstimate(state=state, covariance=cov,
                         last_update_time=track.last_update_time + dt)


def update(track: TrackEstimate, m: Measurement) -> TrackEstimate:
    """Joseph-form Kalman update with the position-selecting measurement model.

    Measurements arrive already mapped to ECI, so H = [I3 0] and the update is
    linear; all the AER nonlinearity lives in the measurement's noise_eci.
    """
    p = track.covariance
    r = np.asarray(m.noise_eci, dtype=float)
    s = p[:3, :3] + r
    if np.linalg.cond(s) > 1e12:
        raise SingularInnovation("innovation covariance condition number above 1e12")
    k = p[:, :3] @ np.linalg.inv(s)                         # K = P H^T S^-1
    innovation = np.asarray(m.eci_position, dtype=float) - track.state.position
    new_state = track.state.as_array() + k @ innovation
    i_kh = np.eye(6)
    i_kh[:, :3] -= k                                        # I - K H
    cov = i_kh @ p @ i_kh.T + k @ r @ k.T
    cov = 0.5 * (cov + cov.T)
    return TrackEstimate(state=StateVector.from_array(new_state), covariance=cov,
                         last_update_time=track.last_update_time)


def log_trace(track: TrackEstimate) -> float:
    """Natural log of the covariance trace; the paper-style uncertainty summary."""
    tr = float(np.trace(track.covariance))
    if tr <= 0:
        raise NonPositiveTrace(f"covariance trace {tr} is not positive")
    return float(np.log(tr))


def run_tracking_episode(elements: list[OrbitElements],
                         measurement_log: list[list[Measurement]],
                         cfg: EkfConfig,
                         dt: float,
                         earth: EarthModel) -> np.ndarray:
    """One EKF per satellite over a logged episode.

    measurement_log[j] holds the detections produced at step j+1 (time
    (j+1)*dt). Tracks start from the true states at t = 0. Every step runs a
    predict; satellites with a detection at that step get an update. Returns
    the (n_satellites, n_steps) array of log-traces recorded after each step.
    """
    n_steps = len(measurement_log)
    tracks = [init_track(astro.propagate_circular(el, 0.0, earth), cfg) for el in elements]
    out = np.empty((len(elements), n_steps))
    for j, step_measurements in enumerate(measurement_log):
        by_sat = {m.satellite_id: m for m in step_measurements}
        for i in range(len(tracks)):
            tracks[i] = predict(tracks[i], dt, earth, cfg)
            m = by_sat.get(i)
            if m is not None:
                tracks[i] = update(tracks[i], m)
            out[i, j] = log_trace(tracks[i])
    return out
