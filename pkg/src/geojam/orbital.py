"""Two-body orbital geometry for the target, attacker and ground terminal.

Frame conventions
-----------------
* ECI: Earth-centred inertial, z along the rotation axis.  At ``t = 0`` the
  Earth-fixed frame coincides with ECI (Greenwich sidereal angle is zero), so
  a point at Earth-fixed longitude ``lon`` sits at inertial angle
  ``lon + OMEGA_EARTH * t``.
* Earth is a sphere of radius ``R_EARTH``; no J2, drag or other perturbation.
* Lengths in km, times in s, angles in rad.

All functions are pure; array inputs are broadcast where noted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MU_EARTH = 398600.4418  # km^3/s^2
R_EARTH = 6378.137  # km
SIDEREAL_DAY = 86164.0905  # s
OMEGA_EARTH = 2.0 * math.pi / SIDEREAL_DAY  # rad/s
GEO_RADIUS = (MU_EARTH * (SIDEREAL_DAY / (2.0 * math.pi)) ** 2) ** (1.0 / 3.0)  # ~42164.17 km

KEPLER_TOL = 1e-12
KEPLER_MAX_ITER = 50


class KeplerConvergenceError(ArithmeticError):
    """Newton iteration on Kepler's equation did not converge."""


@dataclass(frozen=True)
class KeplerianElements:
    semi_major_axis: float  # km
    eccentricity: float
    inclination: float  # rad
    raan: float  # rad
    arg_perigee: float  # rad
    mean_anomaly_epoch: float  # rad
    epoch: float = 0.0  # s

    def __post_init__(self):
        if not self.semi_major_axis > R_EARTH:
            raise ValueError(f"semi-major axis {self.semi_major_axis} km is inside the Earth")
        if not 0.0 <= self.eccentricity < 1.0:
            raise ValueError(f"eccentricity {self.eccentricity} outside [0, 1)")
        angles = (self.inclination, self.raan, self.arg_perigee, self.mean_anomaly_epoch, self.epoch)
        if not all(math.isfinite(x) for x in angles):
            raise ValueError("orbital angles and epoch must be finite")

    @property
    def mean_motion(self) -> float:
        return math.sqrt(MU_EARTH / self.semi_major_axis**3)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.mean_motion


@dataclass(frozen=True)
class EciState:
    """Position (km) and velocity (km/s); shape (3,) or (n, 3)."""

    position: np.ndarray
    velocity: np.ndarray


@dataclass(frozen=True)
class GroundStation:
    latitude: float  # rad
    longitude: float  # rad
    altitude: float = 0.0  # km

    def __post_init__(self):
        if abs(self.latitude) > math.pi / 2:
            raise ValueError(f"latitude {self.latitude} rad outside [-pi/2, pi/2]")


@dataclass(frozen=True)
class AccessInterval:
    """Closed span of grid epochs ``[start, end]``.

    A run made of one isolated epoch has ``start == end``.
    """

    start: float
    end: float

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("access interval must have start <= end")


def solve_kepler(mean_anomaly, eccentricity: float):
    """Eccentric anomaly E solving ``E - e sin E = M`` by Newton iteration.

    Accepts a scalar or an array of mean anomalies.  The result lies on the
    same 2*pi branch as ``mean_anomaly``.

    Raises
    ------
    KeplerConvergenceError
        If the residual is not below 1e-12 after 50 iterations.
    """
    e = float(eccentricity)
    if not 0.0 <= e < 1.0:
        raise ValueError(f"eccentricity {e} outside [0, 1)")
    m = np.asarray(mean_anomaly, dtype=float)
    # reduce to [-pi, pi) for conditioning, restore the branch afterwards
    turns = np.floor((m + np.pi) / (2.0 * np.pi))
    m_red = m - turns * 2.0 * np.pi
    E = m_red.copy() if e < 0.8 else np.where(m_red >= 0.0, np.pi, -np.pi) + 0.0 * m_red
    for _ in range(KEPLER_MAX_ITER):
        f = E - e * np.sin(E) - m_red
        step = f / (1.0 - e * np.cos(E))
        E = E - step
        if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(E))):
            break
    residual = np.abs(E - e * np.sin(E) - m_red)
    if not np.all(residual < KEPLER_TOL):
        raise KeplerConvergenceError(
            f"Kepler solve did not converge (max residual {float(residual.max()):.3e})"
        )
    out = E + turns * 2.0 * np.pi
    return float(out) if out.ndim == 0 else out


def _perifocal_basis(el: KeplerianElements) -> tuple[np.ndarray, np.ndarray]:
    cO, sO = math.cos(el.raan), math.sin(el.raan)
    cw, sw = math.cos(el.arg_perigee), math.sin(el.arg_perigee)
    ci, si = math.cos(el.inclination), math.sin(el.inclination)
    p_hat = np.array([cO * cw - sO * sw * ci, sO * cw + cO * sw * ci, sw * si])
    q_hat = np.array([-cO * sw - sO * cw * ci, -sO * sw + cO * cw * ci, cw * si])
    return p_hat, q_hat


def propagate(elements: KeplerianElements, t) -> EciState:
    """Two-body Keplerian state at time(s) ``t``.

    Scalar ``t`` gives (3,) vectors; an array of n times gives (n, 3).
    """
    t_arr = np.asarray(t, dtype=float)
    a, e = elements.semi_major_axis, elements.eccentricity
    n = elements.mean_motion
    M = elements.mean_anomaly_epoch + n * (t_arr - elements.epoch)
    E = np.asarray(solve_kepler(M, e))
    cosE, sinE = np.cos(E), np.sin(E)
    root = math.sqrt(1.0 - e * e)
    x_pf = a * (cosE - e)
    y_pf = a * root * sinE
    vscale = n * a / (1.0 - e * cosE)
    vx_pf = -vscale * sinE
    vy_pf = vscale * root * cosE
    p_hat, q_hat = _perifocal_basis(elements)
    pos = x_pf[..., None] * p_hat + y_pf[..., None] * q_hat
    vel = vx_pf[..., None] * p_hat + vy_pf[..., None] * q_hat
    return EciState(position=pos, velocity=vel)


def geo_slot_state(longitude: float, t) -> EciState:
    """Ideal geostationary satellite parked over ``longitude``."""
    t_arr = np.asarray(t, dtype=float)
    theta = longitude + OMEGA_EARTH * t_arr
    c, s = np.cos(theta), np.sin(theta)
    zero = np.zeros_like(theta)
    pos = GEO_RADIUS * np.stack([c, s, zero], axis=-1)
    vel = GEO_RADIUS * OMEGA_EARTH * np.stack([-s, c, zero], axis=-1)
    return EciState(position=pos, velocity=vel)


def ground_station_eci(gs: GroundStation, t) -> np.ndarray:
    """ECI position of a ground terminal on the spherical Earth."""
    t_arr = np.asarray(t, dtype=float)
    r = R_EARTH + gs.altitude
    theta = gs.longitude + OMEGA_EARTH * t_arr
    cl = math.cos(gs.latitude)
    return r * np.stack(
        [cl * np.cos(theta), cl * np.sin(theta), np.full_like(theta, math.sin(gs.latitude))],
        axis=-1,
    )


def sample_voi(target, radius: float, count: int, seed) -> np.ndarray:
    """Draw ``count`` points uniformly inside the ball of ``radius`` around ``target``.

    Direction is an isotropic Gaussian vector normalised to unit length and
    the distance is ``radius * u**(1/3)``, which gives uniform volume density
    without a rejection loop.  Returns an array of shape (count, 3).
    """
    if radius < 0 or count < 0:
        raise ValueError("radius and count must be non-negative")
    rng = np.random.default_rng(seed)
    target = np.asarray(target, dtype=float)
    direction = rng.standard_normal((count, 3))
    norms = np.linalg.norm(direction, axis=1)
    # a zero vector has probability zero but would poison the division
    norms[norms == 0.0] = 1.0
    direction /= norms[:, None]
    dist = radius * np.cbrt(rng.random(count))
    return target + dist[:, None] * direction


def random_attacker_elements(
    seed,
    target_longitude: float = 0.0,
    r_voi: float = 5000.0,
    sma_band: float = 3000.0,
    max_inclination: float = math.radians(5.0),
    max_eccentricity: float = 0.01,
) -> KeplerianElements:
    """Randomized near-GEO attacker orbit placed around the target's slot.

    Semi-major axis is drawn in ``GEO_RADIUS +- sma_band``, inclination in
    ``[0, max_inclination]`` and eccentricity in ``[0, max_eccentricity]``.
    RAAN and argument of perigee are uniform on the circle; the mean anomaly
    is then chosen so that the mean longitude at t = 0 falls within the
    angular half-width ``r_voi / GEO_RADIUS`` of the target.
    """
    rng = np.random.default_rng(seed)
    a = GEO_RADIUS + rng.uniform(-sma_band, sma_band)
    e = rng.uniform(0.0, max_eccentricity)
    inc = rng.uniform(0.0, max_inclination)
    raan = rng.uniform(0.0, 2.0 * math.pi)
    argp = rng.uniform(0.0, 2.0 * math.pi)
    half_width = r_voi / GEO_RADIUS
    mean_longitude = target_longitude + rng.uniform(-half_width, half_width)
    m0 = (mean_longitude - raan - argp) % (2.0 * math.pi)
    return KeplerianElements(a, e, inc, raan, argp, m0, 0.0)


def line_of_sight(p1, p2):
    """True where the segment p1-p2 stays clear of the Earth sphere.

    Works on single points (3,) or row-wise on (n, 3) arrays.
    """
    a = np.asarray(p1, dtype=float)
    b = np.asarray(p2, dtype=float)
    d = b - a
    dd = np.sum(d * d, axis=-1)
    safe = np.where(dd > 0.0, dd, 1.0)
    s = np.clip(-np.sum(a * d, axis=-1) / safe, 0.0, 1.0)
    s = np.where(dd > 0.0, s, 0.0)
    closest = a + s[..., None] * d
    clear = np.linalg.norm(closest, axis=-1) > R_EARTH
    return bool(clear) if clear.ndim == 0 else clear


def range_km(p1, p2):
    r = np.linalg.norm(np.asarray(p1, dtype=float) - np.asarray(p2, dtype=float), axis=-1)
    return float(r) if np.ndim(r) == 0 else r


def epoch_grid(t0: float, t1: float, step: float) -> np.ndarray:
    """Sampling epochs ``t0, t0 + step, ...`` up to and including ``t1``."""
    if not t0 < t1:
        raise ValueError("t0 must be before t1")
    if not step > 0:
        raise ValueError("step must be positive")
    n = int(math.floor((t1 - t0) / step + 1e-9)) + 1
    return t0 + step * np.arange(n)


def access_mask(attacker: KeplerianElements, target_longitude: float, times, r_voi: float):
    """Per-epoch access flag and attacker-target range for a GEO target.

    Returns ``(mask, ranges)`` aligned with ``times``.
    """
    att = propagate(attacker, times).position
    tgt = geo_slot_state(target_longitude, times).position
    ranges = np.linalg.norm(att - tgt, axis=-1)
    mask = line_of_sight(att, tgt) & (ranges <= r_voi)
    return np.atleast_1d(mask), np.atleast_1d(ranges)


def runs(mask) -> list[tuple[int, int]]:
    """Inclusive (first, last) index pairs of maximal True runs."""
    m = np.asarray(mask, dtype=bool)
    if m.size == 0:
        return []
    padded = np.concatenate([[False], m, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(s), int(e) - 1) for s, e in zip(edges[::2], edges[1::2])]


def access_intervals(
    attacker: KeplerianElements,
    target_longitude: float,
    t0: float,
    t1: float,
    step: float,
    r_voi: float,
) -> list[AccessInterval]:
    """Maximal spans of grid epochs with line of sight and range <= r_voi."""
    times = epoch_grid(t0, t1, step)
    mask, _ = access_mask(attacker, target_longitude, times, r_voi)
    return [AccessInterval(float(times[i]), float(times[j])) for i, j in runs(mask)]
