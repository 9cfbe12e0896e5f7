"""Parametric directional wave spectrum and its summary quantities.

Each cell carries a wave energy spectrum on a regular (kx, ky) wavenumber
grid.  The wind-sea part is a Pierson-Moskowitz frequency spectrum with a
cos^(2s)(theta/2) directional spreading about the wind direction, mapped
onto the wavenumber grid through the finite-depth dispersion relation
omega^2 = g k tanh(k depth) and normalised so that the grid-integrated
energy matches the closed-form PM variance.  Swell adds a Gaussian bump
at its own wavenumber, normalised to (Hs/4)^2.  The surface current
Doppler-shifts the observed frequencies (omega = sigma + k . U); winds
below 0.1 m/s raise only capillary-scale ripples and are treated as
calm.

The oil model consumes only the summary: significant wave height
Hs = 4 sqrt(m0), peak period/wavelength/amplitude/frequency at the
discrete spectral maximum, the mean energy direction, and the fraction of
energy aligned with it (the energy-weighted vector resultant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["GRAVITY", "SwellSpec", "WaveSpectrum", "WaveSummary",
           "build_spectrum", "spectrum_summary", "energy_direction",
           "omega_from_k", "k_from_omega"]

GRAVITY = 9.81  # m/s^2
PM_ALPHA = 8.1e-3
PM_BETA = 0.74
# omega_peak = PM_PEAK * g / U for a fully developed sea
PM_PEAK = 0.877

_MIN_WIND = 0.1  # m/s; below this only capillary ripples form


@dataclass(frozen=True)
class SwellSpec:
    """Background swell: height (m), period (s), travel direction
    (degrees clockwise from north, the direction waves move toward)."""

    height: float
    period: float
    direction_deg: float


@dataclass
class WaveSpectrum:
    energy: np.ndarray  # (n, n), m^2 per wavenumber cell, >= 0
    kx: np.ndarray  # (n,), rad/m, cell centres
    ky: np.ndarray  # (n,)
    depth: float
    current: tuple[float, float] = (0.0, 0.0)  # ambient surface current

    @property
    def dk(self) -> tuple[float, float]:
        return (float(self.kx[1] - self.kx[0]), float(self.ky[1] - self.ky[0]))

    def total_energy(self) -> float:
        return float(self.energy.sum())


@dataclass(frozen=True)
class WaveSummary:
    hs: float
    t_peak: float
    l_peak: float
    a_p: float
    f_p: float
    theta: float  # mean energy direction, rad clockwise from north
    psi_fr: float
    calm: bool = False

    @classmethod
    def flat_calm(cls) -> "WaveSummary":
        return cls(hs=0.0, t_peak=0.0, l_peak=0.0, a_p=0.0, f_p=0.0,
                   theta=0.0, psi_fr=1.0, calm=True)


def omega_from_k(k, depth: float) -> np.ndarray:
    """Angular frequency from wavenumber, finite depth."""
    k = np.asarray(k, dtype=np.float64)
    kd = np.minimum(k * depth, 50.0)
    return np.sqrt(GRAVITY * k * np.tanh(kd))


def k_from_omega(omega: float, depth: float) -> float:
    """Invert the dispersion relation by Newton iteration from the
    deep-water guess k = omega^2 / g."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    k = omega ** 2 / GRAVITY
    for _ in range(50):
        kd = min(k * depth, 50.0)
        th = math.tanh(kd)
        f = GRAVITY * k * th - omega ** 2
        df = GRAVITY * th + GRAVITY * k * depth * (1.0 - th ** 2) if kd < 50.0 else GRAVITY * th
        k_next = k - f / df
        if k_next <= 0:
            k_next = 0.5 * k
        if abs(k_next - k) < 1e-14 * k:
            return k_next
        k = k_next
    return k


@lru_cache(maxsize=64)
def _k_grid(n: int, k_max: float):
    """Symmetric cell-centre grid including the axes (n odd)."""
    half = (n - 1) // 2
    k1 = np.arange(-half, half + 1) * (k_max / half)
    kx = k1[:, None]
    ky = k1[None, :]
    kmag = np.hypot(kx, ky)
    theta = np.arctan2(kx, ky)  # bearing of the wavenumber vector
    return k1, kmag, theta


def _pm_spectrum(omega: np.ndarray, wind_speed: float) -> np.ndarray:
    """Pierson-Moskowitz S(omega), zero at omega = 0."""
    w0 = GRAVITY / wind_speed
    out = np.zeros_like(omega)
    pos = omega > 0
    w = omega[pos]
    out[pos] = PM_ALPHA * GRAVITY ** 2 / w ** 5 * np.exp(-PM_BETA * (w0 / w) ** 4)
    return out


def pm_variance(wind_speed: float) -> float:
    """Closed-form integral of the PM spectrum (m^2)."""
    return PM_ALPHA * wind_speed ** 4 / (4.0 * PM_BETA * GRAVITY ** 2)


def build_spectrum(wind, current, swell: SwellSpec | None, depth: float,
                   grid_n: int = 65, extent_factor: float = 4.0,
                   spreading_exponent: float = 10.0) -> WaveSpectrum:
    """Directional spectrum from local wind, surface current and swell.

    The wind sea grows from the wind relative to the surface current.
    Returns a zero spectrum when there is neither wind nor swell.
    """
    if depth <= 0:
        raise ValueError("wave spectrum needs positive water depth")
    if grid_n % 2 == 0:
        grid_n += 1
    wind = np.asarray(wind, dtype=np.float64)
    current = np.asarray(current, dtype=np.float64)
    wind_speed = float(np.hypot(wind[0], wind[1]))
    has_wind = wind_speed > _MIN_WIND
    has_swell = swell is not None and swell.height > 0

    k_scales = []
    if has_wind:
        k_scales.append(PM_PEAK ** 2 * GRAVITY / wind_speed ** 2)
    k_swell = None
    if has_swell:
        k_swell = k_from_omega(2.0 * math.pi / swell.period, depth)
        k_scales.append(k_swell)
    cur = (float(current[0]), float(current[1]))
    if not k_scales:
        k1, _, _ = _k_grid(grid_n, 1.0)
        return WaveSpectrum(energy=np.zeros((grid_n, grid_n)), kx=k1.copy(),
                            ky=k1.copy(), depth=depth, current=cur)

    k_max = extent_factor * max(k_scales)
    k1, kmag, theta = _k_grid(grid_n, k_max)
    energy = np.zeros((grid_n, grid_n))

    if has_wind:
        omega = omega_from_k(kmag, depth)
        raw = _pm_spectrum(omega, wind_speed)
        wind_dir = math.atan2(wind[0], wind[1])
        spread = np.abs(np.cos(0.5 * (theta - wind_dir))) ** (2.0 * spreading_exponent)
        raw = raw * spread
        raw[kmag == 0] = 0.0
        total = raw.sum()
        if total > 0:
            energy += raw * (pm_variance(wind_speed) / total)

    if has_swell:
        d = math.radians(swell.direction_deg)
        kxs = k_swell * math.sin(d)
        kys = k_swell * math.cos(d)
        dk = k_max / ((grid_n - 1) // 2)
        sigma = max(0.1 * k_swell, 1.5 * dk)
        kxg = k1[:, None]
        kyg = k1[None, :]
        bump = np.exp(-((kxg - kxs) ** 2 + (kyg - kys) ** 2) / (2.0 * sigma ** 2))
        bump[kmag == 0] = 0.0
        total = bump.sum()
        if total > 0:
            energy += bump * ((swell.height / 4.0) ** 2 / total)

    return WaveSpectrum(energy=energy, kx=k1.copy(), ky=k1.copy(), depth=depth,
                        current=cur)


def energy_direction(spec: WaveSpectrum) -> tuple[float, float, float]:
    """Mean energy direction via the energy-weighted vector resultant.

    Returns (theta_sum, r_sum, psi_fr): each wavenumber cell contributes a
    vector of length = its energy pointing along its propagation bearing;
    psi_fr is |resultant| / total energy.  A zero spectrum returns
    psi_fr = 1 with direction 0 by convention.
    """
    e = spec.energy
    total = float(e.sum())
    if total <= 0.0:
        return 0.0, 0.0, 1.0
    kx = spec.kx[:, None]
    ky = spec.ky[None, :]
    kmag = np.hypot(kx, ky)
    with np.errstate(divide="ignore", invalid="ignore"):
        ex = np.where(kmag > 0, e * kx / kmag, 0.0)
        ey = np.where(kmag > 0, e * ky / kmag, 0.0)
    rx = float(ex.sum())
    ry = float(ey.sum())
    r_sum = math.hypot(rx, ry)
    theta = math.atan2(rx, ry)
    return theta, r_sum, r_sum / total


def spectrum_summary(spec: WaveSpectrum) -> WaveSummary:
    """Summary quantities at the discrete spectral maximum."""
    total = spec.total_energy()
    if total <= 0.0:
        return WaveSummary.flat_calm()
    flat = int(np.argmax(spec.energy))
    i, j = np.unravel_index(flat, spec.energy.shape)
    k_pk = math.hypot(spec.kx[i], spec.ky[j])
    e_pk = float(spec.energy[i, j])
    a_p = math.sqrt(2.0 * e_pk)
    # observed (encounter) frequency: intrinsic sigma Doppler-shifted by
    # the ambient current; a blocking counter-current falls back to sigma
    sigma = float(omega_from_k(k_pk, spec.depth))
    omega = sigma + spec.kx[i] * spec.current[0] + spec.ky[j] * spec.current[1]
    if omega <= 0.1 * sigma:
        omega = sigma
    f_p = omega / (2.0 * math.pi)
    t_peak = 1.0 / f_p
    l_peak = 2.0 * math.pi / k_pk
    hs = 4.0 * math.sqrt(total)
    theta, _, psi_fr = energy_direction(spec)
    return WaveSummary(hs=hs, t_peak=t_peak, l_peak=l_peak, a_p=a_p, f_p=f_p,
                       theta=theta, psi_fr=psi_fr, calm=False)
