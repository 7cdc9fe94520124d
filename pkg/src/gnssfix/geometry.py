"""Geodesy primitives on a spherical-Earth local frame.

All local-frame math (ENU, elevation/azimuth, angular proximity) uses the
radial direction at the origin as "up". The simulator and the metrics share
this frame, so the approximation is self-consistent.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateGeometry
from .types import EcefPosition

# Below this separation the LOS direction is meaningless [m].
MIN_LOS_DISTANCE = 1.0

# Horizontal component below which azimuth is defined as 0 [m].
ZENITH_HORIZONTAL_EPS = 1e-9


def _vec(p) -> np.ndarray:
    if isinstance(p, EcefPosition):
        return p.as_array()
    return np.asarray(p, dtype=float)


def los_unit_vector(receiver, sat) -> np.ndarray:
    """Unit vector from receiver toward satellite."""
    d = _vec(sat) - _vec(receiver)
    dist = float(np.linalg.norm(d))
    if dist < MIN_LOS_DISTANCE:
        raise DegenerateGeometry(f"receiver-satellite distance {dist:.3g} m below {MIN_LOS_DISTANCE} m")
    return d / dist


def enu_basis(origin) -> np.ndarray:
    """Rows are the east, north, up unit vectors of the local frame at origin."""
    o = _vec(origin)
    r = float(np.linalg.norm(o))
    if r < MIN_LOS_DISTANCE:
        raise DegenerateGeometry("ENU origin at Earth's center")
    up = o / r
    east = np.cross([0.0, 0.0, 1.0], up)
    e_norm = float(np.linalg.norm(east))
    if e_norm < 1e-12:
        east = np.array([0.0, 1.0, 0.0])  # polar origin: pick +y by convention
    else:
        east = east / e_norm
    north = np.cross(up, east)
    return np.vstack([east, north, up])


def ecef_to_enu(origin, point) -> np.ndarray:
    """Local tangent-plane (east, north, up) coordinates of point relative to origin."""
    basis = enu_basis(origin)
    return basis @ (_vec(point) - _vec(origin))


def enu_to_ecef(origin, enu) -> np.ndarray:
    """Inverse of ecef_to_enu."""
    basis = enu_basis(origin)
    return _vec(origin) + basis.T @ np.asarray(enu, dtype=float)


def elevation_azimuth(receiver, sat) -> tuple[float, float]:
    """Elevation above the local horizontal and azimuth clockwise from north, radians.

    Azimuth lies in [0, 2*pi); a satellite at zenith gets azimuth 0 by convention.
    """
    los = los_unit_vector(receiver, sat)
    basis = enu_basis(receiver)
    e, n, u = basis @ los
    horiz = math.hypot(e, n)
    elevation = math.atan2(u, horiz)
    if horiz < ZENITH_HORIZONTAL_EPS:
        return elevation, 0.0
    azimuth = math.atan2(e, n) % (2.0 * math.pi)
    return elevation, azimuth


def angular_proximity(receiver, sat_i, sat_j) -> float:
    """How close two satellites appear in the receiver's sky, in [0, 1].

    1 for coincident directions, 0 at 90 degrees apart and beyond.
    """
    u_i = los_unit_vector(receiver, sat_i)
    u_j = los_unit_vector(receiver, sat_j)
    return max(0.0, float(np.dot(u_i, u_j)))
