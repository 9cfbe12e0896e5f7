"""2D incompressible flow on a staggered (MAC) grid.

Solves du/dt = -(U.grad)U + nu*lap(U) - grad(p) with div(U) = 0 for the
ocean-surface current and the 10 m wind.  Advection is forward Euler with
first-order upwind face interpolation; diffusion is backward Euler solved
by red-black SOR; mass conservation is enforced by an iterative pressure
projection, also red-black SOR, driven to a divergence tolerance.

Velocities live on cell faces: u has shape (nx+1, ny) on west/east faces,
v has shape (nx, ny+1) on south/north faces, pressure p (kinematic,
m^2/s^2) at cell centres.  Obstacle cells (land, for the water field)
hold zero on all their faces, which on a staggered grid acts as a
semi-slip wall: tangential velocities half a cell away stay free.

Measured velocities can be pinned exactly (never touched by the
projection) or bounded: bounded faces start at the measured value, are
corrected like free faces, and are clamped to [measured-w, measured+w];
a face that lands on a bound is then pinned and the projection repeats
so the remaining free faces absorb the correction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "VelocityField",
    "BoundarySpec",
    "MeasurementConstraint",
    "SolverParams",
    "FlowMasks",
    "ProjectionError",
    "build_masks",
    "apply_boundary",
    "compute_timestep",
    "advect",
    "diffuse",
    "apply_obstacles",
    "project",
    "divergence",
    "step",
]

WATER = "water"
WIND = "wind"


class ProjectionError(RuntimeError):
    pass


@dataclass
class VelocityField:
    u: np.ndarray  # (nx+1, ny)
    v: np.ndarray  # (nx, ny+1)
    p: np.ndarray  # (nx, ny)
    kind: str
    nu: float
    dx: float
    dy: float

    @classmethod
    def zeros(cls, nx: int, ny: int, dx: float, dy: float, kind: str = WATER,
              nu: float = 1.0e-6) -> "VelocityField":
        return cls(u=np.zeros((nx + 1, ny)), v=np.zeros((nx, ny + 1)),
                   p=np.zeros((nx, ny)), kind=kind, nu=nu, dx=dx, dy=dy)

    @classmethod
    def uniform(cls, nx, ny, dx, dy, u0, v0, kind=WATER, nu=1.0e-6) -> "VelocityField":
        f = cls.zeros(nx, ny, dx, dy, kind, nu)
        f.u[:] = u0
        f.v[:] = v0
        return f

    @property
    def nx(self) -> int:
        return self.p.shape[0]

    @property
    def ny(self) -> int:
        return self.p.shape[1]

    def copy(self) -> "VelocityField":
        return VelocityField(self.u.copy(), self.v.copy(), self.p.copy(),
                             self.kind, self.nu, self.dx, self.dy)

    def cell_centred(self) -> tuple[np.ndarray, np.ndarray]:
        """Velocity averaged to cell centres, two (nx, ny) arrays."""
        uc = 0.5 * (self.u[:-1, :] + self.u[1:, :])
        vc = 0.5 * (self.v[:, :-1] + self.v[:, 1:])
        return uc, vc


@dataclass(frozen=True)
class BoundarySpec:
    """Per-edge condition: a (u, v) tuple for Dirichlet, None for open."""

    west: tuple[float, float] | None = None
    east: tuple[float, float] | None = None
    south: tuple[float, float] | None = None
    north: tuple[float, float] | None = None


@dataclass(frozen=True)
class MeasurementConstraint:
    i: int
    j: int
    u: float
    v: float
    half_width: float = 0.0  # m/s; 0 pins the cell exactly

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("measurement half-width must be >= 0")


@dataclass(frozen=True)
class SolverParams:
    omega: float = 1.7
    sor_tol: float = 1.0e-6
    max_iters: int = 2000
    div_tol: float = 1.0e-8
    courant_target: float = 0.8
    dt_max: float = 1800.0
    eps_vel: float = 1.0e-6


@dataclass
class FlowMasks:
    """Face bookkeeping: which faces the solver may alter.

    fixed_* faces are boundary-owned or obstacle faces; free faces are
    corrected by the projection.  Obstacle faces additionally must be
    zero (water fields only).
    """

    fixed_u: np.ndarray
    fixed_v: np.ndarray
    obstacle_u: np.ndarray
    obstacle_v: np.ndarray
    land: np.ndarray | None = None
    pinned_u: np.ndarray = dc_field(default=None)  # measurement pins, set by project
    pinned_v: np.ndarray = dc_field(default=None)


def build_masks(nx: int, ny: int, land: np.ndarray | None,
                boundary: BoundarySpec) -> FlowMasks:
    obs_u = np.zeros((nx + 1, ny), dtype=bool)
    obs_v = np.zeros((nx, ny + 1), dtype=bool)
    if land is not None:
        obs_u[1:nx, :] = land[:-1, :] | land[1:, :]
        obs_u[0, :] = land[0, :]
        obs_u[nx, :] = land[-1, :]
        obs_v[:, 1:ny] = land[:, :-1] | land[:, 1:]
        obs_v[:, 0] = land[:, 0]
        obs_v[:, ny] = land[:, -1]
    fixed_u = obs_u.copy()
    fixed_v = obs_v.copy()
    if boundary.west is not None:
        fixed_u[0, :] = True
    if boundary.east is not None:
        fixed_u[nx, :] = True
    if boundary.south is not None:
        fixed_v[:, 0] = True
    if boundary.north is not None:
        fixed_v[:, ny] = True
    return FlowMasks(fixed_u=fixed_u, fixed_v=fixed_v,
                     obstacle_u=obs_u, obstacle_v=obs_v, land=land)


def apply_boundary(field: VelocityField, boundary: BoundarySpec) -> VelocityField:
    """Impose edge conditions on the normal faces of each domain edge.

    Dirichlet edges set the normal component; open edges copy the adjacent
    interior face (zero gradient).  Tangential faces half a cell inside
    are left free (semi-slip).
    """
    u, v = field.u, field.v
    nx, ny = field.nx, field.ny
    u[0, :] = boundary.west[0] if boundary.west is not None else u[1, :]
    u[nx, :] = boundary.east[0] if boundary.east is not None else u[nx - 1, :]
    v[:, 0] = boundary.south[1] if boundary.south is not None else v[:, 1]
    v[:, ny] = boundary.north[1] if boundary.north is not None else v[:, ny - 1]
    return field


def compute_timestep(field: VelocityField, params: SolverParams) -> float:
    """Courant-limited time-step, capped at dt_max."""
    if not (0.0 < params.courant_target <= 1.0):
        raise ValueError("courant_target must be in (0, 1]")
    if not (np.all(np.isfinite(field.u)) and np.all(np.isfinite(field.v))):
        raise ValueError("velocity field is not finite")
    vmax = max(np.abs(field.u).max(initial=0.0), np.abs(field.v).max(initial=0.0),
               params.eps_vel)
    dt = params.courant_target * min(field.dx, field.dy) / vmax
    return min(dt, params.dt_max)


def advect(field: VelocityField, dt: float, masks: FlowMasks) -> VelocityField:
    """Forward-Euler advection with first-order upwind face differences."""
    if not (np.all(np.isfinite(field.u)) and np.all(np.isfinite(field.v))):
        raise ValueError("cannot advect a non-finite field")
    out = field.copy()
    if dt == 0.0:
        return out
    u, v = field.u, field.v
    dx, dy = field.dx, field.dy
    nx, ny = field.nx, field.ny

    # u faces, interior in x (i = 1 .. nx-1)
    uc = u[1:-1, :]
    dudx_b = (u[1:-1, :] - u[:-2, :]) / dx
    dudx_f = (u[2:, :] - u[1:-1, :]) / dx
    vbar = 0.25 * (v[:-1, :-1] + v[1:, :-1] + v[:-1, 1:] + v[1:, 1:])
    up = np.pad(u, ((0, 0), (1, 1)), mode="edge")
    dudy_b = (up[1:-1, 1:-1] - up[1:-1, :-2]) / dy
    dudy_f = (up[1:-1, 2:] - up[1:-1, 1:-1]) / dy
    du = uc * np.where(uc >= 0, dudx_b, dudx_f) + vbar * np.where(vbar >= 0, dudy_b, dudy_f)
    new_u = uc - dt * du
    upd = ~masks.fixed_u[1:-1, :]
    out.u[1:-1, :] = np.where(upd, new_u, uc)

    # v faces, interior in y (j = 1 .. ny-1)
    vc = v[:, 1:-1]
    dvdy_b = (v[:, 1:-1] - v[:, :-2]) / dy
    dvdy_f = (v[:, 2:] - v[:, 1:-1]) / dy
    ubar = 0.25 * (u[:-1, :-1] + u[:-1, 1:] + u[1:, :-1] + u[1:, 1:])
    vp = np.pad(v, ((1, 1), (0, 0)), mode="edge")
    dvdx_b = (vp[1:-1, 1:-1] - vp[:-2, 1:-1]) / dx
    dvdx_f = (vp[2:, 1:-1] - vp[1:-1, 1:-1]) / dx
    dv = ubar * np.where(ubar >= 0, dvdx_b, dvdx_f) + vc * np.where(vc >= 0, dvdy_b, dvdy_f)
    new_v = vc - dt * dv
    upd = ~masks.fixed_v[:, 1:-1]
    out.v[:, 1:-1] = np.where(upd, new_v, vc)
    return out


def _parity_masks(shape) -> tuple[np.ndarray, np.ndarray]:
    ii, jj = np.indices(shape)
    red = (ii + jj) % 2 == 0
    return red, ~red


def _sor_component(w: np.ndarray, rhs: np.ndarray, lamx: float, lamy: float,
                   upd: np.ndarray, params: SolverParams) -> tuple[np.ndarray, float, bool]:
    """Red-black SOR for (1 + 2 lamx + 2 lamy) w - lam*(neighbours) = rhs.

    Neumann (zero-gradient) ghosts outside the array; faces with
    upd=False are Dirichlet data.
    """
    diag = 1.0 + 2.0 * lamx + 2.0 * lamy
    red, black = _parity_masks(w.shape)
    res = np.inf
    for _ in range(params.max_iters):
        for colour in (red, black):
            wp = np.pad(w, 1, mode="edge")
            nb = lamx * (wp[2:, 1:-1] + wp[:-2, 1:-1]) + lamy * (wp[1:-1, 2:] + wp[1:-1, :-2])
            w_new = (1.0 - params.omega) * w + params.omega * (rhs + nb) / diag
            m = colour & upd
            w[m] = w_new[m]
        wp = np.pad(w, 1, mode="edge")
        nb = lamx * (wp[2:, 1:-1] + wp[:-2, 1:-1]) + lamy * (wp[1:-1, 2:] + wp[1:-1, :-2])
        r = np.where(upd, rhs + nb - diag * w, 0.0)
        res = float(np.abs(r).max()) if r.size else 0.0
        if res <= params.sor_tol:
            return w, res, True
    return w, res, False


def diffuse(field: VelocityField, dt: float, masks: FlowMasks,
            params: SolverParams) -> VelocityField:
    """Backward-Euler viscous diffusion, (I - nu dt lap) U' = U."""
    if field.nu < 0:
        raise ValueError("kinematic viscosity must be >= 0")
    out = field.copy()
    if field.nu == 0.0 or dt == 0.0:
        return out
    lamx = field.nu * dt / field.dx ** 2
    lamy = field.nu * dt / field.dy ** 2
    nx, ny = field.nx, field.ny

    upd_u = ~masks.fixed_u.copy()
    upd_u[0, :] = False
    upd_u[nx, :] = False
    out.u, res_u, ok_u = _sor_component(out.u, field.u, lamx, lamy, upd_u, params)

    upd_v = ~masks.fixed_v.copy()
    upd_v[:, 0] = False
    upd_v[:, ny] = False
    out.v, res_v, ok_v = _sor_component(out.v, field.v, lamx, lamy, upd_v, params)

    if not (ok_u and ok_v):
        log.warning("diffusion SOR did not converge (residuals u=%.3e v=%.3e); "
                    "keeping best iterate", res_u, res_v)
    return out


def apply_obstacles(field: VelocityField, masks: FlowMasks) -> VelocityField:
    """Zero all faces of obstacle cells (water fields)."""
    out = field.copy()
    out.u[masks.obstacle_u] = 0.0
    out.v[masks.obstacle_v] = 0.0
    return out


def divergence(field: VelocityField) -> np.ndarray:
    """Discrete divergence per cell, 1/s."""
    du = (field.u[1:, :] - field.u[:-1, :]) / field.dx
    dv = (field.v[:, 1:] - field.v[:, :-1]) / field.dy
    return du + dv


def _constraint_faces(constraints, nx, ny):
    """Measured values/half-widths mapped onto the faces of each cell."""
    meas_u = np.full((nx + 1, ny), np.nan)
    meas_v = np.full((nx, ny + 1), np.nan)
    wid_u = np.full((nx + 1, ny), np.nan)
    wid_v = np.full((nx, ny + 1), np.nan)
    for c in constraints:
        if not (0 <= c.i < nx and 0 <= c.j < ny):
            raise ValueError(f"measurement cell ({c.i}, {c.j}) outside grid")
        meas_u[c.i, c.j] = meas_u[c.i + 1, c.j] = c.u
        wid_u[c.i, c.j] = wid_u[c.i + 1, c.j] = c.half_width
        meas_v[c.i, c.j] = meas_v[c.i, c.j + 1] = c.v
        wid_v[c.i, c.j] = wid_v[c.i, c.j + 1] = c.half_width
    return meas_u, meas_v, wid_u, wid_v


def _solve_pressure(p, b, cw, ce, cs, cn, diag, free_cells, tol, params):
    red, black = _parity_masks(p.shape)
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 0.0)
    res = np.inf
    for it in range(params.max_iters):
        for colour in (red, black):
            pp = np.pad(p, 1)
            nb = (cw * pp[:-2, 1:-1] + ce * pp[2:, 1:-1]
                  + cs * pp[1:-1, :-2] + cn * pp[1:-1, 2:])
            p_new = (1.0 - params.omega) * p + params.omega * (nb - b) * inv_diag
            m = colour & free_cells
            p[m] = p_new[m]
        pp = np.pad(p, 1)
        nb = (cw * pp[:-2, 1:-1] + ce * pp[2:, 1:-1]
              + cs * pp[1:-1, :-2] + cn * pp[1:-1, 2:])
        r = np.where(free_cells, nb - diag * p - b, 0.0)
        res = float(np.abs(r).max()) if r.size else 0.0
        if res <= tol:
            return p, res, it + 1
    return p, res, params.max_iters


def project(field: VelocityField, dt: float, masks: FlowMasks,
            params: SolverParams,
            constraints: tuple[MeasurementConstraint, ...] = ()) -> VelocityField:
    """Pressure projection with measurement handling.

    Exact measurements (half-width 0) are pinned; bounded measurements are
    corrected like free faces but clamped to their interval, and any face
    that lands on a bound is pinned for a repeat pass.  Raises
    ProjectionError if the divergence of unconstrained cells cannot be
    driven below div_tol.
    """
    out = field.copy()
    nx, ny = out.nx, out.ny
    dx2, dy2 = out.dx ** 2, out.dy ** 2
    water = ~masks.land if masks.land is not None else np.ones((nx, ny), dtype=bool)

    meas_u, meas_v, wid_u, wid_v = _constraint_faces(constraints, nx, ny)
    has_meas_u = ~np.isnan(meas_u)
    has_meas_v = ~np.isnan(meas_v)
    # measured values are applied prior to the projection
    out.u[has_meas_u] = meas_u[has_meas_u]
    out.v[has_meas_v] = meas_v[has_meas_v]
    pinned_u = has_meas_u & (wid_u == 0.0)
    pinned_v = has_meas_v & (wid_v == 0.0)
    bounded_u = has_meas_u & ~pinned_u
    bounded_v = has_meas_v & ~pinned_v

    dt_eff = dt if dt > 0 else 1.0
    # drive the Poisson residual to half the divergence budget so the
    # corrected field sits safely below div_tol after rounding
    tol = 0.5 * params.div_tol / dt_eff

    for attempt in range(8):
        free_u = ~(masks.fixed_u | pinned_u)
        free_v = ~(masks.fixed_v | pinned_v)
        cw = free_u[:-1, :] / dx2
        ce = free_u[1:, :] / dx2
        cs = free_v[:, :-1] / dy2
        cn = free_v[:, 1:] / dy2
        zero = np.zeros((nx, ny))
        cw = np.where(water, cw, zero)
        ce = np.where(water, ce, zero)
        cs = np.where(water, cs, zero)
        cn = np.where(water, cn, zero)
        diag = cw + ce + cs + cn
        free_cells = water & (diag > 0)

        b = divergence(out) / dt_eff
        b = np.where(free_cells, b, 0.0)
        # without an open edge the Poisson system is all-Neumann (singular);
        # remove the incompatible mean and gauge-fix p for determinism
        anchored = bool(free_u[0, :].any() or free_u[-1, :].any()
                        or free_v[:, 0].any() or free_v[:, -1].any())
        if not anchored and free_cells.any():
            b[free_cells] -= b[free_cells].mean()

        p = np.where(free_cells, out.p, 0.0)
        p, res, iters = _solve_pressure(p, b, cw, ce, cs, cn, diag, free_cells, tol, params)
        if res > tol:
            raise ProjectionError(
                f"pressure projection did not converge: residual {res:.3e} > {tol:.3e} "
                f"after {iters} iterations (over-constrained or incompatible system)"
            )
        if not anchored and free_cells.any():
            p[free_cells] -= p[free_cells].mean()
        out.p = p

        pp = np.pad(p, 1)
        gx = (pp[1:, 1:-1] - pp[:-1, 1:-1]) / out.dx
        gy = (pp[1:-1, 1:] - pp[1:-1, :-1]) / out.dy
        out.u = np.where(free_u, out.u - dt_eff * gx, out.u)
        out.v = np.where(free_v, out.v - dt_eff * gy, out.v)

        # clamp bounded faces; pin any that sit at a bound and re-project
        new_pins = False
        for arr, meas, wid, bnd, pins in ((out.u, meas_u, wid_u, bounded_u, pinned_u),
                                          (out.v, meas_v, wid_v, bounded_v, pinned_v)):
            if not bnd.any():
                continue
            lo = meas - wid
            hi = meas + wid
            below = bnd & (arr <= lo)
            above = bnd & (arr >= hi)
            arr[below] = lo[below]
            arr[above] = hi[above]
            hit = (below | above) & ~pins
            if hit.any():
                pins |= hit
                new_pins = True
        if not new_pins:
            break
    else:
        raise ProjectionError("bounded measurements failed to settle after 8 passes")

    masks.pinned_u, masks.pinned_v = pinned_u, pinned_v
    return out


def step(field: VelocityField, boundary: BoundarySpec, dt: float,
         masks: FlowMasks, params: SolverParams,
         constraints: tuple[MeasurementConstraint, ...] = (),
         limiter=None) -> VelocityField:
    """One solver step: boundary, advect, diffuse, obstacles/limits,
    constraints, project.

    `limiter` replaces the obstacle zeroing for wind fields (urban-canopy
    speed rescale); it is any callable VelocityField -> VelocityField.
    """
    f = apply_boundary(field.copy(), boundary)
    f = advect(f, dt, masks)
    f = diffuse(f, dt, masks, params)
    if limiter is not None:
        f = limiter(f)
    else:
        f = apply_obstacles(f, masks)
    f = apply_boundary(f, boundary)
    f = project(f, dt, masks, params, constraints)
    return f
