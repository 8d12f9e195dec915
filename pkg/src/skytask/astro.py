"""Orbits and reference frames.

Everything here is a pure function. Angles are radians, lengths metres,
times seconds since the simulation epoch. At t = 0 the rotating (ECEF) and
inertial (ECI) frames coincide; the Earth is a sphere with a ground site at
zero altitude.

Frame chain for a ground sensor observation:

    AER (az/el/range at the site)
      -> NED  (local north-east-down Cartesian)
      -> ECEF (rotate NED into the Earth-fixed frame, add the site position)
      -> ECI  (undo Earth rotation, z-axis spin by omega*t)

and the exact inverse chain for pointing/visibility tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadRadius, SingularState, ZeroRange

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class EarthModel:
    """Spherical Earth: gravitational parameter, spin rate, radius."""

    mu: float = 3.986004418e14      # m^3/s^2
    omega: float = 7.2921159e-5     # rad/s
    r_earth: float = 6.371e6        # m

    def __post_init__(self):
        if not (self.mu > 0 and self.omega > 0 and self.r_earth > 0):
            raise ValueError("EarthModel parameters must be positive")


@dataclass(frozen=True)
class AerVector:
    """Azimuth/elevation/range of a target as seen from a ground site."""

    azimuth: float      # rad, [0, 2*pi)
    elevation: float    # rad, [-pi/2, pi/2]
    range: float        # m, >= 0

    def __post_init__(self):
        if not np.all(np.isfinite([self.azimuth, self.elevation, self.range])):
            raise ValueError("AER components must be finite")
        if self.range < 0:
            raise ValueError("range must be non-negative")


@dataclass(frozen=True)
class SensorSite:
    """Geographic location of the sensor (spherical Earth, zero altitude)."""

    latitude: float = 0.0   # rad, [-pi/2, pi/2]
    longitude: float = 0.0  # rad, [-pi, pi)

    def __post_init__(self):
        if not -np.pi / 2 <= self.latitude <= np.pi / 2:
            raise ValueError("latitude out of range")
        if not -np.pi <= self.longitude < np.pi:
            raise ValueError("longitude out of range")


@dataclass(frozen=True)
class StateVector:
    """Inertial-frame position (m) and velocity (m/s)."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))
        if self.position.shape != (3,) or self.velocity.shape != (3,):
            raise ValueError("position and velocity must be 3-vectors")
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("state components must be finite")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "StateVector":
        x = np.asarray(x, dtype=float)
        return cls(position=x[:3].copy(), velocity=x[3:6].copy())


@dataclass(frozen=True)
class OrbitElements:
    """Circular orbit: geocentric radius, inclination, node angle, and the
    in-plane angle from the ascending node at epoch."""

    radius: float
    inclination: float
    raan: float
    phase: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if not 0 <= self.inclination <= np.pi:
            raise ValueError("inclination out of range")
        if not (0 <= self.raan < TWO_PI and 0 <= self.phase < TWO_PI):
            raise ValueError("raan/phase must lie in [0, 2*pi)")


def wrap_angle(a):
    """Wrap angle(s) to [0, 2*pi).

    np.mod of a tiny negative rounds up to exactly 2*pi, so that value is
    pinned back to 0 to keep the half-open interval honest.
    """
    out = np.where(np.equal(m := np.mod(a, TWO_PI), TWO_PI), 0.0, m)
    return float(out) if np.ndim(a) == 0 else out


def wrap_signed(a):
    """Wrap angle difference(s) to [-pi, pi)."""
    out = wrap_angle(np.asarray(a) + np.pi) - np.pi
    return float(out) if np.ndim(a) == 0 else out


def ned_rotation(site: SensorSite) -> np.ndarray:
    """3x3 rotation taking local NED components to ECEF components.

    Columns are the local north, east and down unit vectors expressed in ECEF.
    """
    sphi, cphi = np.sin(site.latitude), np.cos(site.latitude)
    slam, clam = np.sin(site.longitude), np.cos(site.longitude)
    return np.array([
        [-sphi * clam, -slam, -cphi * clam],
        [-sphi * slam,  clam, -cphi * slam],
        [cphi,          0.0,  -sphi],
    ])


def earth_spin(t: float, earth: EarthModel) -> np.ndarray:
    """z-axis rotation by omega*t (ECEF -> ECI for our epoch-aligned frames)."""
    a = earth.omega * t
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def aer_to_ned(aer: AerVector) -> np.ndarray:
    """AER to local north-east-down Cartesian (m)."""
    ce = np.cos(aer.elevation)
    return np.array([
        aer.range * ce * np.cos(aer.azimuth),
        aer.range * ce * np.sin(aer.azimuth),
        -aer.range * np.sin(aer.elevation),
    ])


def ned_to_ecef_direction(ned: np.ndarray, site: SensorSite) -> np.ndarray:
    """Rotate a NED offset vector into ECEF (site position NOT added)."""
    return ned_rotation(site) @ np.asarray(ned, dtype=float)


def site_ecef_position(site: SensorSite, earth: EarthModel) -> np.ndarray:
    """ECEF position of the sensor on the spherical Earth surface."""
    cphi = np.cos(site.latitude)
    return earth.r_earth * np.array([
        cphi * np.cos(site.longitude),
        cphi * np.sin(site.longitude),
        np.sin(site.latitude),
    ])


def ecef_to_eci(ecef: np.ndarray, t: float, earth: EarthModel) -> np.ndarray:
    """Spin an ECEF vector into the inertial frame at elapsed time t."""
    return earth_spin(t, earth) @ np.asarray(ecef, dtype=float)


def aer_to_eci(aer: AerVector, site: SensorSite, t: float, earth: EarthModel) -> np.ndarray:
    """Absolute ECI position of a target observed at aer from the site at time t.

    The rotated NED offset is a sensor-relative vector, so the site's own
    ECEF position is added before spinning into ECI; without it the result
    would not be geocentric.
    """
    ecef = site_ecef_position(site, earth) + ned_to_ecef_direction(aer_to_ned(aer), site)
    return ecef_to_eci(ecef, t, earth)


def eci_to_aer(eci: np.ndarray, site: SensorSite, t: float, earth: EarthModel) -> AerVector:
    """Inverse of aer_to_eci. Elevation is negative below the local horizon.

    Azimuth at exact zenith is reported as 0 (any value is geometrically
    valid there; a fixed choice keeps results reproducible).

    Raises ZeroRange if eci coincides with the site position (within 1e-3 m).
    """
    ecef = earth_spin(t, earth).T @ np.asarray(eci, dtype=float)
    ned = ned_rotation(site).T @ (ecef - site_ecef_position(site, earth))
    north, east, down = ned
    horiz = np.hypot(north, east)
    rng = np.hypot(horiz, down)
    if rng < 1e-3:
        raise ZeroRange(f"target within {rng:.2e} m of the site")
    azimuth = wrap_angle(np.arctan2(east, north))
    elevation = np.arctan2(-down, horiz)
    return AerVector(azimuth=float(azimuth), elevation=float(elevation), range=float(rng))


# Central-difference steps for the AER->ECI Jacobian: azimuth, elevation (rad),
# range (m). Finite differences avoid transcribing the chain's derivatives by
# hand; the step-halving test pins the accuracy.
JACOBIAN_STEPS = (1e-6, 1e-6, 1e-2)


def jacobian_aer_to_eci(aer: AerVector, site: SensorSite, t: float, earth: EarthModel) -> np.ndarray:
    """3x3 partial derivatives of the ECI position w.r.t. (azimuth, elevation, range)."""
    base = np.array([aer.azimuth, aer.elevation, aer.range])
    jac = np.empty((3, 3))
    for k, h in enumerate(JACOBIAN_STEPS):
        hi, lo = base.copy(), base.copy()
        hi[k] += h
        lo[k] -= h
        f_hi = aer_to_eci(AerVector(*hi), site, t, earth)
        f_lo = aer_to_eci(AerVector(*lo), site, t, earth)
        jac[:, k] = (f_hi - f_lo) / (2.0 * h)
    return jac


def transform_noise(p_aer: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Map an AER-frame noise covariance through the Jacobian: J P J^T.

    Symmetrized by averaging with its transpose to kill round-off skew.
    """
    p_eci = j @ np.asarray(p_aer, dtype=float) @ j.T
    return 0.5 * (p_eci + p_eci.T)


def generate_constellation(n: int, radius: float, rng_seed: int,
                           earth: EarthModel = EarthModel()) -> list[OrbitElements]:
    """n circular orbits with uniformly random plane orientation and phase.

    Inclination ~ U[0, pi], node and phase ~ U[0, 2*pi). Reproducible for a
    fixed seed (numpy PCG64).
    """
    if n < 1:
        raise ValueError("need at least one satellite")
    if radius <= earth.r_earth:
        raise BadRadius(f"orbit radius {radius} m does not clear the Earth")
    rng = np.random.default_rng(rng_seed)
    out = []
    for _ in range(n):
        out.append(OrbitElements(
            radius=radius,
            inclination=float(rng.uniform(0.0, np.pi)),
            raan=float(rng.uniform(0.0, TWO_PI)),
            phase=float(rng.uniform(0.0, TWO_PI)),
        ))
    return out


def orbit_plane_basis(el: OrbitElements) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors spanning the orbit plane: toward the ascending node, and
    90 degrees ahead in the direction of motion."""
    co, so = np.cos(el.raan), np.sin(el.raan)
    ci, si = np.cos(el.inclination), np.sin(el.inclination)
    p = np.array([co, so, 0.0])
    q = np.array([-so * ci, co * ci, si])
    return p, q


def propagate_circular(el: OrbitElements, t: float, earth: EarthModel) -> StateVector:
    """Analytic state of a circular orbit at elapsed time t."""
    n = np.sqrt(earth.mu / el.radius**3)
    u = el.phase + n * t
    p, q = orbit_plane_basis(el)
    cu, su = np.cos(u), np.sin(u)
    pos = el.radius * (cu * p + su * q)
    vel = el.radius * n * (-su * p + cu * q)
    return StateVector(position=pos, velocity=vel)


# A single 30 s RK4 step leaves ~1.3 m of along-track error after 6000 s of
# LEO motion; halving the grid brings that under 0.1 m, inside the 1 m budget
# the tracker's dynamics are held to.
RK4_MAX_SUBSTEP = 15.0


def two_body_rk4(x: StateVector, dt: float, earth: EarthModel) -> StateVector:
    """Advance point-mass two-body motion by dt using classical RK4.

    dt is split into equal substeps no longer than RK4_MAX_SUBSTEP seconds.
    Raises SingularState when the position falls inside half an Earth radius,
    where the 1/r^3 term blows up.
    """
    mu = earth.mu
    guard = earth.r_earth / 2.0

    def accel(pos):
        r = np.linalg.norm(pos)
        if r < guard:
            raise SingularState(f"|position| = {r:.3e} m inside guard radius")
        return -mu * pos / r**3

    n_sub = max(1, int(np.ceil(abs(dt) / RK4_MAX_SUBSTEP)))
    h = dt / n_sub
    p0, v0 = x.position, x.velocity
    for _ in range(n_sub):
        k1v = accel(p0)
        k1p = v0
        k2v = accel(p0 + 0.5 * h * k1p)
        k2p = v0 + 0.5 * h * k1v
        k3v = accel(p0 + 0.5 * h * k2p)
        k3p = v0 + 0.5 * h * k2v
        k4v = accel(p0 + h * k3p)
        k4p = v0 + h * k3v
        p0 = p0 + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        v0 = v0 + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return StateVector(position=p0, velocity=v0)


def specific_energy(x: StateVector, earth: EarthModel) -> float:
    """Orbital specific energy v^2/2 - mu/r (J/kg); conserved by two-body motion."""
    r = np.linalg.norm(x.position)
    v2 = float(x.velocity @ x.velocity)
    return 0.5 * v2 - earth.mu / r


def is_valid_covariance(m: np.ndarray, rel_tol: float = 1e-9) -> bool:
    """Symmetric within rel_tol and PSD up to -rel_tol * trace after symmetrization."""
    m = np.asarray(m, dtype=float)
    scale = max(np.abs(m).max(), 1e-300)
    if np.abs(m - m.T).max() > rel_tol * scale:
        return False
    sym = 0.5 * (m + m.T)
    return float(np.linalg.eigvalsh(sym).min()) >= -rel_tol * max(np.trace(sym), scale)
