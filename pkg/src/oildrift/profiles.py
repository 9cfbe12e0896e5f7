"""Closed-form vertical velocity profiles and their composition.

Depth is measured downward from the surface (z = 0) to the cell's mean
depth.  Four mechanisms give the environmental velocity at depth:

* tidal/circulation: U_c0 * (1 - z/zbar)^(1/6), no-slip at the bottom;
* wind-induced surface shear: alpha_w * U_w * exp(-2 pi z / z_c), where
  z_c = alpha_z * L_capillary is the (very shallow) zero-effect depth of
  the capillary-wave layer;
* Ekman spiral: surface speed V0E at the wind-drift angle beta off the
  Ekman-averaged wind bearing (deflected right in the northern
  hemisphere, left in the southern), rotating a further pi radians over
  one Ekman layer depth while decaying as exp(-pi z / z_E);
* Stokes drift: omega k a_p^2 exp(-2 k z), attenuated by the directional
  energy fraction and directed along the mean wave energy direction.

All functions broadcast over numpy arrays; bearings are radians clockwise
from north, so a vector at bearing t is (sin t, cos t) in (east, north).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .waves import WaveSummary

log = logging.getLogger(__name__)

__all__ = [
    "GRAVITY", "EARTH_ROTATION", "SIGMA_WATER", "MIN_EKMAN_LATITUDE",
    "ProfileParams", "AdvectionCoeffs", "ProfileInputs",
    "tidal_profile", "capillary_wavelength", "wind_shear_profile",
    "wind_drift_angle", "drag_coefficient", "wind_stress",
    "ekman_profile", "stokes_profile", "environment_velocity",
]

GRAVITY = 9.81  # m/s^2
EARTH_ROTATION = 7.2921e-5  # rad/s
SIGMA_WATER = 0.0728  # N/m, clean water surface tension
MIN_EKMAN_LATITUDE = 2.0  # deg; below this the Ekman term is undefined


@dataclass(frozen=True)
class ProfileParams:
    tidal_exponent_denom: float = 6.0
    alpha_w: float = 0.02  # wind shear coefficient
    alpha_z: float = 2.0  # zero-effect depth multiplier
    sigma_water: float = SIGMA_WATER
    g: float = GRAVITY

    def __post_init__(self):
        if not (0.005 <= self.alpha_w <= 0.03):
            raise ValueError(
                f"profiles.alpha_w={self.alpha_w} outside the accepted range [0.005, 0.03]"
            )
        if self.tidal_exponent_denom <= 0:
            raise ValueError("tidal exponent denominator must be positive")


@dataclass(frozen=True)
class AdvectionCoeffs:
    wind: float = 0.02  # additional wind advection of surface oil
    current: float = 1.0  # tidal current advection coefficient


@dataclass(frozen=True)
class ProfileInputs:
    """Environment at one cell, for evaluating the composed profile."""

    current_u: float
    current_v: float
    wind_u: float
    wind_v: float
    ekman_u: float
    ekman_v: float
    wave: WaveSummary
    depth: float  # zbar, m
    latitude: float  # deg
    water_density: float = 1025.0
    air_density: float = 1.225


def tidal_profile(u0, v0, z, zbar, exponent_denom: float = 6.0):
    """Tide/circulation velocity at depth z: U_c0 (1 - z/zbar)^(1/6)."""
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0) or np.any(z > np.asarray(zbar)):
        raise ValueError("depth z must lie within [0, zbar]")
    factor = (1.0 - z / zbar) ** (1.0 / exponent_denom)
    return u0 * factor, v0 * factor


def capillary_wavelength(sigma_water: float = SIGMA_WATER,
                         rho_water: float = 1025.0,
                         rho_air: float = 1.225) -> float:
    """Typical capillary wavelength 2 pi sqrt(sigma / ((rho_w - rho_a) g))."""
    if rho_water <= rho_air:
        raise ValueError("water must be denser than air")
    return 2.0 * math.pi * math.sqrt(sigma_water / ((rho_water - rho_air) * GRAVITY))


def shear_layer_depth(params: ProfileParams, rho_water: float = 1025.0,
                      rho_air: float = 1.225) -> float:
    """Zero-effect depth z_c = alpha_z * L_capillary of the shear layer."""
    return params.alpha_z * capillary_wavelength(params.sigma_water, rho_water, rho_air)


def wind_shear_profile(wind_u, wind_v, z, params: ProfileParams = ProfileParams(),
                       rho_water: float = 1025.0, rho_air: float = 1.225):
    """Instantaneous wind-driven shear: alpha_w U_w exp(-2 pi z / z_c)."""
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0):
        raise ValueError("depth z must be >= 0")
    z_c = shear_layer_depth(params, rho_water, rho_air)
    factor = params.alpha_w * np.exp(-2.0 * math.pi * z / z_c)
    return wind_u * factor, wind_v * factor


def wind_drift_angle(wind_u, wind_v):
    """Wind drift angle in degrees: 40 - 8 * speed^(1/2), zero above 25 m/s."""
    speed = np.hypot(np.asarray(wind_u, dtype=np.float64), wind_v)
    beta = 40.0 - 8.0 * np.sqrt(speed)
    return np.where(speed <= 25.0, beta, 0.0)


def drag_coefficient(speed):
    """Wind-stress drag coefficient C_D = (0.8 + 0.065 U) * 1e-3."""
    return (0.8 + 0.065 * np.asarray(speed, dtype=np.float64)) * 1.0e-3


def wind_stress(ekman_u, ekman_v, rho_air: float = 1.225):
    """Surface wind stress tau = C_D rho_air |U_wE|^2, N/m^2."""
    speed = np.hypot(np.asarray(ekman_u, dtype=np.float64), ekman_v)
    return drag_coefficient(speed) * rho_air * speed ** 2


def ekman_layer_depth(ekman_speed, latitude):
    """Ekman layer depth z_E = pi sqrt(2 A_z / |f|) with A_z = 4.3e-4 U^2."""
    a_z = 4.3e-4 * np.asarray(ekman_speed, dtype=np.float64) ** 2
    f = coriolis_frequency(latitude)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.pi * np.sqrt(2.0 * a_z / np.abs(f))


def coriolis_frequency(latitude):
    return 2.0 * EARTH_ROTATION * np.sin(np.radians(np.asarray(latitude, dtype=np.float64)))


def ekman_profile(ekman_u, ekman_v, z, latitude, rho_water: float = 1025.0,
                  rho_air: float = 1.225):
    """Ekman spiral velocity at depth z from the Ekman-averaged wind.

    Raises for |latitude| < 2 deg where the Coriolis balance degenerates.
    """
    lat = np.asarray(latitude, dtype=np.float64)
    if np.any(np.abs(lat) < MIN_EKMAN_LATITUDE):
        raise ValueError("equatorial Ekman undefined: |latitude| < 2 degrees")
    eu = np.asarray(ekman_u, dtype=np.float64)
    ev = np.asarray(ekman_v, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    speed = np.hypot(eu, ev)
    f = coriolis_frequency(lat)
    tau = wind_stress(eu, ev, rho_air)
    z_e = ekman_layer_depth(speed, lat)
    with np.errstate(divide="ignore", invalid="ignore"):
        v0 = math.sqrt(2.0) * np.pi * tau / (z_e * rho_water * np.abs(f))
        phase = np.pi * z / z_e
    beta = np.radians(wind_drift_angle(eu, ev))
    bearing = np.arctan2(eu, ev) + np.sign(f) * (beta + phase)
    with np.errstate(invalid="ignore"):
        amp = np.where(speed > 0, v0 * np.exp(-phase), 0.0)
    amp = np.where(speed > 0, amp, 0.0)
    bearing = np.where(speed > 0, bearing, 0.0)
    return amp * np.sin(bearing), amp * np.cos(bearing)


def stokes_profile(summary: WaveSummary, z):
    """Stokes drift at depth z: omega k a_p^2 exp(-2 k z) psi_fr along the
    mean wave energy direction."""
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0):
        raise ValueError("depth z must be >= 0")
    if summary.calm or summary.t_peak <= 0 or summary.l_peak <= 0:
        zero = np.zeros_like(z)
        return zero, zero.copy()
    return stokes_profile_arrays(summary.t_peak, summary.l_peak, summary.a_p,
                                 summary.theta, summary.psi_fr, z)


def stokes_profile_arrays(t_peak, l_peak, a_p, theta, psi_fr, z):
    """Array form of the Stokes profile; cells with t_peak <= 0 are calm."""
    t_peak = np.asarray(t_peak, dtype=np.float64)
    l_peak = np.asarray(l_peak, dtype=np.float64)
    live = (t_peak > 0) & (l_peak > 0)
    omega = np.where(live, 2.0 * np.pi / np.where(live, t_peak, 1.0), 0.0)
    k = np.where(live, 2.0 * np.pi / np.where(live, l_peak, 1.0), 0.0)
    speed = omega * k * np.asarray(a_p) ** 2 * np.exp(-2.0 * k * np.asarray(z)) * psi_fr
    return speed * np.sin(theta), speed * np.cos(theta)


def environment_velocity(inputs: ProfileInputs, z: float,
                         coeffs: AdvectionCoeffs = AdvectionCoeffs(),
                         params: ProfileParams = ProfileParams()) -> np.ndarray:
    """Total environmental velocity (east, north, vertical=0) at depth z.

    The additional wind-advection term applies only within the shear
    layer (z < z_c); the environment itself contributes no vertical
    velocity.  Inside 2 degrees of the equator the Ekman term is zeroed
    with a warning.
    """
    if not (0.0 <= z <= inputs.depth):
        raise ValueError("depth z must lie within [0, zbar]")
    u, v = tidal_profile(inputs.current_u, inputs.current_v, z, inputs.depth,
                         params.tidal_exponent_denom)
    u, v = coeffs.current * u, coeffs.current * v
    su, sv = wind_shear_profile(inputs.wind_u, inputs.wind_v, z, params,
                                inputs.water_density, inputs.air_density)
    u, v = u + su, v + sv
    if abs(inputs.latitude) >= MIN_EKMAN_LATITUDE:
        eu, ev = ekman_profile(inputs.ekman_u, inputs.ekman_v, z, inputs.latitude,
                               inputs.water_density, inputs.air_density)
        u, v = u + eu, v + ev
    else:
        log.warning("Ekman profile zeroed at latitude %.2f deg (equatorial guard)",
                    inputs.latitude)
    ku, kv = stokes_profile(inputs.wave, z)
    u, v = u + ku, v + kv
    if z < shear_layer_depth(params, inputs.water_density, inputs.air_density):
        u += coeffs.wind * inputs.wind_u
        v += coeffs.wind * inputs.wind_v
    return np.array([float(u), float(v), 0.0])
