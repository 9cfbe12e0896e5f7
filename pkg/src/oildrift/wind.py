"""Wind-specific flow machinery: canopy speed limits and the Ekman wind.

Over land the wind is not blocked but slowed: each masked cell's speed is
capped at (1 - lambda_p)^2 of the maximum wind speed, applied before the
projection so continuity re-routes flow around the obstruction.

The Ekman-averaged wind approximates the ~12 h formation time of Ekman
currents with an incremental weighted mean of the instantaneous wind,
updated on the (variable) solver time-step:

    U_wE <- (W1 * U_wE_prev + W2 * U_w) / (W1 + W2)
    W1 = (T_E - dt) / (T_E / 2),  W2 = dt / T_E
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import VelocityField

__all__ = ["EKMAN_PERIOD", "CanopyMask", "EkmanWindState", "wind_limit",
           "apply_wind_limits", "update_ekman_wind"]

EKMAN_PERIOD = 12.0 * 3600.0  # s


def wind_limit(lambda_p, max_speed) -> np.ndarray:
    """Urban-canopy speed limit (1 - lambda_p)^2 * max_speed."""
    lam = np.asarray(lambda_p, dtype=np.float64)
    if np.any(lam < 0) or np.any(lam > 1):
        raise ValueError("plan density lambda_p must lie in [0, 1]")
    if np.any(np.asarray(max_speed) < 0):
        raise ValueError("max wind speed must be >= 0")
    return (1.0 - lam) ** 2 * max_speed


@dataclass
class CanopyMask:
    """Per-cell plan density on the cells where the limit applies."""

    active: np.ndarray  # (nx, ny) bool
    lambda_p: np.ndarray  # (nx, ny), in [0, 1]

    @classmethod
    def from_coefficient(cls, land: np.ndarray, coefficient: float) -> "CanopyMask":
        """Scalar fallback: (1-lambda_p)^2 == coefficient on all land cells."""
        if not (0.0 <= coefficient <= 1.0):
            raise ValueError("canopy coefficient must lie in [0, 1]")
        lam = np.where(land, 1.0 - np.sqrt(coefficient), 0.0)
        return cls(active=land.copy(), lambda_p=lam)

    @classmethod
    def from_raster(cls, lambda_p: np.ndarray) -> "CanopyMask":
        lam = np.where(np.isnan(lambda_p), 0.0, lambda_p)
        if np.any(lam < 0) or np.any(lam > 1):
            raise ValueError("canopy raster values must lie in [0, 1]")
        return cls(active=~np.isnan(lambda_p) & (lam > 0), lambda_p=lam)


def apply_wind_limits(field: VelocityField, mask: CanopyMask,
                      max_speed: float = 40.0) -> VelocityField:
    """Rescale cell speeds above their canopy limit, direction preserved.

    The per-cell factor is applied to all four faces of the cell; faces
    shared between two limited cells take the smaller factor, so no cell
    ends up above its limit and no face speed ever increases.
    """
    if field.kind != "wind":
        raise ValueError("canopy limits apply to wind fields only")
    out = field.copy()
    uc, vc = out.cell_centred()
    speed = np.hypot(uc, vc)
    limit = wind_limit(mask.lambda_p, max_speed)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(speed > 0, limit / speed, 1.0)
    factor = np.minimum(factor, 1.0)
    factor = np.where(mask.active, factor, 1.0)

    fu = np.ones_like(out.u)
    fu[:-1, :] = factor
    fu[1:, :] = np.minimum(fu[1:, :], factor)
    fv = np.ones_like(out.v)
    fv[:, :-1] = factor
    fv[:, 1:] = np.minimum(fv[:, 1:], factor)
    out.u *= fu
    out.v *= fv
    return out


@dataclass
class EkmanWindState:
    """Ekman-averaged wind per cell with its formation period."""

    u: np.ndarray
    v: np.ndarray
    period: float = EKMAN_PERIOD

    @classmethod
    def from_wind(cls, wind_u: np.ndarray, wind_v: np.ndarray,
                  period: float = EKMAN_PERIOD) -> "EkmanWindState":
        return cls(u=wind_u.copy(), v=wind_v.copy(), period=period)

    def copy(self) -> "EkmanWindState":
        return EkmanWindState(self.u.copy(), self.v.copy(), self.period)


def update_ekman_wind(state: EkmanWindState, wind_u, wind_v, dt: float) -> EkmanWindState:
    """Advance the incremental weighted mean by one step of length dt."""
    if not (0.0 < dt < state.period):
        raise ValueError(
            f"ekman update needs 0 < dt < formation period {state.period}; got {dt}"
        )
    w1 = (state.period - dt) / (0.5 * state.period)
    w2 = dt / state.period
    norm = w1 + w2
    return EkmanWindState(
        u=(w1 * state.u + w2 * np.asarray(wind_u)) / norm,
        v=(w1 * state.v + w2 * np.asarray(wind_v)) / norm,
        period=state.period,
    )
