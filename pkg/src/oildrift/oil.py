"""Lagrangian oil transport: release, diffusion, entrainment, buoyancy,
slick thickness, mechanical spreading and shore deposition.

Particles carry a fixed contaminant volume (no weathering) and live in
one of four states: drifting on the surface (z = 0), entrained in the
water column, beached (frozen on a land cell), or escaped through a
domain boundary (frozen, still counted in the volume audit).

Turbulent diffusion is the random-walk form with spatially varying
coefficients: horizontal u' = xi sqrt(12 D_h / dt) sin(2 pi phi) (cos for
v'), vertical w' = (2 zeta - 1) sqrt(6 D_v / dt), plus the gradient of
D_h as a deterministic correction velocity so particles do not collect
in low-diffusivity regions.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .flow import VelocityField
from .grid import Domain

log = logging.getLogger(__name__)

__all__ = [
    "STATUS_SURFACE", "STATUS_ENTRAINED", "STATUS_BEACHED", "STATUS_ESCAPED",
    "STATUS_NAMES", "BARREL_M3", "KNOT_MS",
    "OilProperties", "SpillSource", "EntrainmentParams", "ParticleSet",
    "ThicknessMap", "release_count", "horizontal_diffusivity",
    "vertical_diffusivity", "diffusion_coefficients", "turbulent_step",
    "diffusion_correction", "entrainment_rate", "entrain_probability",
    "intrusion_depth", "buoyancy_velocity", "advect_particle",
    "thickness_map", "mechanical_spread", "resolve_moves",
    "required_particles", "RECOMMENDED_MIN_PARTICLES",
]

STATUS_SURFACE = 0
STATUS_ENTRAINED = 1
STATUS_BEACHED = 2
STATUS_ESCAPED = 3
STATUS_NAMES = {STATUS_SURFACE: "surface", STATUS_ENTRAINED: "entrained",
                STATUS_BEACHED: "beached", STATUS_ESCAPED: "escaped"}

BARREL_M3 = 0.158987  # m^3 per barrel
KNOT_MS = 0.514444  # m/s per knot
RECOMMENDED_MIN_PARTICLES = 3000
AGE_CAP_S = 48.0 * 3600.0  # spreading-age cap


@dataclass(frozen=True)
class OilProperties:
    density: float = 950.0  # kg/m^3
    terminal_thickness: float = 1.0e-4  # m, spreading stops below this
    droplet_diameter: float = 300.0e-6  # m, entrained droplets
    water_viscosity: float = 1.2e-3  # Pa s

    def __post_init__(self):
        if self.density <= 0:
            raise ValueError("oil density must be positive")


@dataclass(frozen=True)
class SpillSource:
    x: float  # domain metres
    y: float
    t_start: float  # sim seconds
    t_end: float
    volume: float  # m^3

    def __post_init__(self):
        if not (self.t_start < self.t_end):
            raise ValueError("spill source needs t_start < t_end")
        if self.volume <= 0:
            raise ValueError("spill volume must be positive")


@dataclass(frozen=True)
class EntrainmentParams:
    k_e: float = 0.4
    alpha: float = 1.5
    length_scale: float = 15.0  # m
    gamma_coefficient: float = 1.0e-5  # white-capping prefactor
    whitecap_wind_threshold: float = 6.0  # m/s

    def __post_init__(self):
        if not (0.3 <= self.k_e <= 0.5):
            raise ValueError(f"entrainment.k_e={self.k_e} outside [0.3, 0.5]")
        if not (1.15 <= self.alpha <= 1.85):
            raise ValueError(f"entrainment.alpha={self.alpha} outside [1.15, 1.85]")
        if not (10.0 <= self.length_scale <= 20.0):
            raise ValueError(
                f"entrainment.length_scale={self.length_scale} outside [10, 20] m"
            )


class ParticleSet:
    """Pre-allocated particle storage; ids are array indices."""

    def __init__(self, budget: int, particle_volume: float):
        self.budget = budget
        self.particle_volume = particle_volume
        self.n = 0
        self.x = np.zeros(budget)
        self.y = np.zeros(budget)
        self.z = np.zeros(budget)
        self.volume = np.full(budget, particle_volume)
        self.age = np.zeros(budget)
        self.status = np.zeros(budget, dtype=np.int8)
        self.buoyancy_off = np.zeros(budget, dtype=bool)

    def release(self, count: int, x: float, y: float) -> slice:
        new = slice(self.n, self.n + count)
        self.x[new] = x
        self.y[new] = y
        self.z[new] = 0.0
        self.age[new] = 0.0
        self.status[new] = STATUS_SURFACE
        self.n += count
        return new

    @property
    def released(self) -> slice:
        return slice(0, self.n)

    def copy(self) -> "ParticleSet":
        out = ParticleSet(self.budget, self.particle_volume)
        out.n = self.n
        for name in ("x", "y", "z", "volume", "age", "status", "buoyancy_off"):
            getattr(out, name)[:] = getattr(self, name)
        return out

    def total_volume(self) -> float:
        return float(np.sum(self.volume[: self.n]))

    def volume_by_status(self) -> dict[str, float]:
        s = self.status[: self.n]
        v = self.volume[: self.n]
        return {name: float(np.sum(v[s == code])) for code, name in STATUS_NAMES.items()}


def release_count(source: SpillSource, budget: int, t: float, dt: float,
                  already_released: int) -> int:
    """Particles to create in [t, t+dt]: the cumulative leaked fraction of
    the budget, minus what is already out."""
    frac = (t + dt - source.t_start) / (source.t_end - source.t_start)
    target = int(math.floor(budget * min(max(frac, 0.0), 1.0) + 1.0e-9))
    return max(target - already_released, 0)


def check_particle_budget(budget: int, override: bool = False) -> None:
    if budget < RECOMMENDED_MIN_PARTICLES and not override:
        warnings.warn(
            f"particle budget {budget} is below the recommended minimum of "
            f"{RECOMMENDED_MIN_PARTICLES}; the stochastic dispersion processes "
            "may be under-sampled",
            stacklevel=2,
        )


def horizontal_diffusivity(field: VelocityField, c_smag: float,
                           literal_form: bool = False) -> np.ndarray:
    """Smagorinsky-type horizontal diffusivity per cell, m^2/s.

    D_h = c_smag (dx^2 + dy^2) sqrt(T^2 + S^2) with T = du/dx - dv/dy and
    S = du/dy + dv/dx from the staggered field.  `literal_form` selects
    the sqrt(max(T + S, 0)) variant instead.
    """
    dx, dy = field.dx, field.dy
    dudx = (field.u[1:, :] - field.u[:-1, :]) / dx
    dvdy = (field.v[:, 1:] - field.v[:, :-1]) / dy
    uc, vc = field.cell_centred()
    dudy = np.gradient(uc, dy, axis=1)
    dvdx = np.gradient(vc, dx, axis=0)
    t_s = dudx - dvdy
    s_s = dudy + dvdx
    scale = c_smag * (dx ** 2 + dy ** 2)
    if literal_form:
        return scale * np.sqrt(np.clip(t_s + s_s, 0.0, None))
    return scale * np.sqrt(t_s ** 2 + s_s ** 2)


def vertical_diffusivity(hs, t_peak, l_peak, z) -> np.ndarray:
    """Depth-dependent vertical diffusivity 0.028 Hs^2/T exp(-2 z / L)."""
    hs = np.asarray(hs, dtype=np.float64)
    t_peak = np.asarray(t_peak, dtype=np.float64)
    l_peak = np.asarray(l_peak, dtype=np.float64)
    live = (t_peak > 0) & (l_peak > 0)
    base = np.where(live, 0.028 * hs ** 2 / np.where(live, t_peak, 1.0), 0.0)
    return base * np.exp(-2.0 * np.asarray(z) / np.where(live, l_peak, 1.0))


def diffusion_coefficients(gradients, wave, z: float, c_smag: float,
                           cell_sizes: tuple[float, float]) -> tuple[float, float]:
    """(D_h, D_v) at one point from velocity gradients and the wave summary.

    `gradients` is (du/dx, du/dy, dv/dx, dv/dy) of the surface current.
    """
    dudx, dudy, dvdx, dvdy = gradients
    dx, dy = cell_sizes
    t_s = dudx - dvdy
    s_s = dudy + dvdx
    d_h = c_smag * (dx ** 2 + dy ** 2) * math.sqrt(t_s ** 2 + s_s ** 2)
    d_v = float(vertical_diffusivity(wave.hs, wave.t_peak, wave.l_peak, z))
    return d_h, d_v


def turbulent_step(d_h, d_v, dt: float, xi, phi, zeta):
    """Random-walk displacement (dx, dy, dz) over one step.

    xi, phi, zeta are uniform [0, 1] draws; per-axis displacement variance
    works out to 2 D dt for both the horizontal and vertical parts.
    """
    mag = np.asarray(xi) * np.sqrt(12.0 * np.asarray(d_h) / dt)
    ang = 2.0 * np.pi * np.asarray(phi)
    w = (2.0 * np.asarray(zeta) - 1.0) * np.sqrt(6.0 * np.asarray(d_v) / dt)
    return mag * np.sin(ang) * dt, mag * np.cos(ang) * dt, w * dt


def diffusion_correction(d_h: np.ndarray, dx: float, dy: float,
                         land: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of D_h per cell: central differences, one-sided at domain
    and land edges, zero where no water neighbour exists."""

    def _axis_grad(d, h, axis, water):
        dpad = np.moveaxis(np.pad(np.moveaxis(d, axis, 0), ((1, 1), (0, 0)), mode="edge"), 0, axis)
        wpad = np.moveaxis(np.pad(np.moveaxis(water, axis, 0), ((1, 1), (0, 0))), 0, axis)
        lo = np.moveaxis(np.moveaxis(dpad, axis, 0)[:-2], 0, axis)
        hi = np.moveaxis(np.moveaxis(dpad, axis, 0)[2:], 0, axis)
        has_lo = np.moveaxis(np.moveaxis(wpad, axis, 0)[:-2], 0, axis)
        has_hi = np.moveaxis(np.moveaxis(wpad, axis, 0)[2:], 0, axis)
        central = (hi - lo) / (2.0 * h)
        fwd = (hi - d) / h
        bwd = (d - lo) / h
        g = np.where(has_lo & has_hi, central,
                     np.where(has_hi, fwd, np.where(has_lo, bwd, 0.0)))
        return np.where(water, g, 0.0)

    water = ~land if land is not None else np.ones_like(d_h, dtype=bool)
    return _axis_grad(d_h, dx, 0, water), _axis_grad(d_h, dy, 1, water)


def entrainment_rate(hs, t_peak, wind_speed, rho_water: float = 1025.0,
                     params: EntrainmentParams = EntrainmentParams()):
    """Wave-entrainment rate scale lambda_ow (1/s).

    The damping coefficient gamma switches between the white-capping form
    gamma_coefficient * omega * E_w^0.25 (wind at or above the whitecap
    threshold) and the swell-decay form 1.8e-7 * omega^3.
    """
    hs = np.asarray(hs, dtype=np.float64)
    t_peak = np.asarray(t_peak, dtype=np.float64)
    live = (hs > 0) & (t_peak > 0)
    t_safe = np.where(live, t_peak, 1.0)
    omega = 2.0 * np.pi / t_safe
    e_w = 9.81 * rho_water * hs ** 2 / 16.0
    gamma_wc = params.gamma_coefficient * omega * e_w ** 0.25
    gamma_sw = 1.8e-7 * omega ** 3
    gamma = np.where(np.asarray(wind_speed) >= params.whitecap_wind_threshold,
                     gamma_wc, gamma_sw)
    lam = np.pi * params.k_e * gamma * hs / (8.0 * params.alpha * t_safe * params.length_scale)
    return np.where(live, lam, 0.0)


def entrain_probability(lam, dt: float):
    """P(entrained within dt) = 1 - exp(-lambda dt)."""
    return 1.0 - np.exp(-np.asarray(lam) * dt)


def intrusion_depth(hs, phi):
    """Insertion depth (1.35 + 0.35 (2 phi - 1)) Hs, within [1.0, 1.7] Hs."""
    return (1.35 + 0.35 * (2.0 * np.asarray(phi) - 1.0)) * hs


def buoyancy_velocity(props: OilProperties, rho_water: float = 1025.0) -> float:
    """Terminal rise speed of an entrained droplet, m/s (upward).

    Stokes law for small droplets, the Reynolds form for large ones; the
    minimum of the two is continuous and monotone in diameter.  Oil at or
    above the water density stays entrained (returns 0).
    """
    drho = rho_water - props.density
    if drho <= 0:
        log.warning("oil density %.1f >= water density %.1f: buoyancy zeroed",
                    props.density, rho_water)
        return 0.0
    d = props.droplet_diameter
    stokes = 9.81 * d ** 2 * drho / (18.0 * props.water_viscosity)
    reynolds = math.sqrt(8.0 / 3.0 * 9.81 * d * drho / rho_water)
    return min(stokes, reynolds)


def advect_particle(x, y, z, status, env, correction, turbulent, w_b, dt, zbar):
    """Move one particle by the composed velocities; returns (x, y, z, status).

    Beached and escaped particles never move.  Depth is advanced by the
    vertical turbulent displacement minus the buoyant rise, clamped to
    [0, zbar]; a particle reaching the surface becomes a surface particle.
    """
    if status in (STATUS_BEACHED, STATUS_ESCAPED):
        return x, y, z, status
    x = x + (env[0] + correction[0]) * dt + turbulent[0]
    y = y + (env[1] + correction[1]) * dt + turbulent[1]
    if status == STATUS_ENTRAINED:
        z = z + turbulent[2] - w_b * dt
        z = min(max(z, 0.0), zbar)
        if z == 0.0:
            status = STATUS_SURFACE
    return x, y, z, status


@dataclass
class ThicknessMap:
    """Per-cell surface-slick bookkeeping."""

    volume_m3: np.ndarray
    volume_bbl: np.ndarray
    area: np.ndarray
    thickness: np.ndarray
    mean_age_s: np.ndarray
    count: np.ndarray


def thickness_map(particles: ParticleSet, domain: Domain, wind_speed,
                  props: OilProperties, rho_water: float = 1025.0) -> ThicknessMap:
    """Slick volume, empirical area and thickness per cell.

    Volume sums the surface particles in each cell; the area follows the
    modified Fay-type spreading law with volume in barrels, mean oil age
    in minutes (capped at 48 h) and wind in knots, clamped from above by
    the cell area.  Cells with zero volume or zero age carry zero area
    and thickness.
    """
    shape = (domain.nx, domain.ny)
    vol = np.zeros(shape)
    ages = np.zeros(shape)
    cnt = np.zeros(shape)
    sl = particles.released
    surf = particles.status[sl] == STATUS_SURFACE
    if np.any(surf):
        xs = particles.x[sl][surf]
        ys = particles.y[sl][surf]
        i, j = domain.cell_index(xs, ys)
        np.add.at(vol, (i, j), particles.volume[sl][surf])
        np.add.at(ages, (i, j), particles.age[sl][surf])
        np.add.at(cnt, (i, j), 1.0)
    mean_age = np.divide(ages, cnt, out=np.zeros(shape), where=cnt > 0)

    bbl = vol / BARREL_M3
    t_min = np.minimum(mean_age, AGE_CAP_S) / 60.0
    wind_kn = np.asarray(wind_speed) / KNOT_MS
    ratio = (rho_water - props.density) / props.density
    ok = (vol > 0) & (t_min > 0)
    t_safe = np.where(ok, t_min, 1.0)
    area = 1.0e3 * (2.27 * ratio ** (2.0 / 3.0) * bbl ** (2.0 / 3.0) * t_safe ** -0.5
                    + 0.03 * ratio ** (1.0 / 3.0) * bbl ** (1.0 / 3.0)
                    * wind_kn ** (4.0 / 3.0) * t_safe)
    area = np.where(ok, np.minimum(area, domain.dx * domain.dy), 0.0)
    thick = np.divide(vol, area, out=np.zeros(shape), where=area > 0)
    return ThicknessMap(volume_m3=vol, volume_bbl=bbl, area=area,
                        thickness=thick, mean_age_s=mean_age, count=cnt)


def mechanical_spread(particles: ParticleSet, tmap: ThicknessMap, domain: Domain,
                      wind_u, wind_v, dt: float, signs_q, signs_r,
                      props: OilProperties, rho_water: float = 1025.0):
    """Per-particle spreading displacements (dx, dy) in cells whose slick
    is thicker than the terminal thickness.

    The cell-level radial increments dQ (gravity-viscous) and dR (wind
    augmented) are applied along/across the wind bearing with independent
    random signs per particle, so a cell's cloud expands without net
    translation.  Freshly formed slicks (zero mean age) are skipped.
    """
    sl = particles.released
    n = particles.n
    disp_x = np.zeros(n)
    disp_y = np.zeros(n)
    age_s = np.minimum(tmap.mean_age_s, AGE_CAP_S)
    active_cells = (tmap.thickness > props.terminal_thickness) & (age_s > 0)
    if not np.any(active_cells):
        return disp_x, disp_y

    ratio = (rho_water - props.density) / rho_water
    t_safe = np.where(active_cells, age_s, 1.0)
    dq = (1.13 * ratio ** (1.0 / 3.0) * tmap.volume_m3 ** (1.0 / 3.0)
          * 0.25 * t_safe ** -0.75 * dt)
    wind_speed = np.hypot(wind_u, wind_v)
    dr = dq + 0.0034 * wind_speed ** (4.0 / 3.0) * 0.75 * t_safe ** -0.25 * dt
    theta = np.arctan2(wind_u, wind_v)

    surf = particles.status[sl] == STATUS_SURFACE
    if not np.any(surf):
        return disp_x, disp_y
    idx = np.nonzero(surf)[0]
    i, j = domain.cell_index(particles.x[idx], particles.y[idx])
    in_cell = active_cells[i, j]
    idx = idx[in_cell]
    if idx.size == 0:
        return disp_x, disp_y
    i, j = i[in_cell], j[in_cell]
    q = signs_q[idx] * dq[i, j]
    r = signs_r[idx] * dr[i, j]
    th = theta[i, j]
    disp_x[idx] = q * np.cos(th) + r * np.sin(th)
    disp_y[idx] = q * np.sin(th) + r * np.cos(th)
    return disp_x, disp_y


def _entry_point(domain: Domain, x0, y0, x1, y1, ic, jc):
    """Point where the segment (x0,y0)->(x1,y1) enters cell (ic, jc),
    nudged just inside the cell."""
    dx_seg = x1 - x0
    dy_seg = y1 - y0
    t = 0.0
    if dx_seg > 0 and x0 < ic * domain.dx:
        t = max(t, (ic * domain.dx - x0) / dx_seg)
    elif dx_seg < 0 and x0 >= (ic + 1) * domain.dx:
        t = max(t, ((ic + 1) * domain.dx - x0) / dx_seg)
    if dy_seg > 0 and y0 < jc * domain.dy:
        t = max(t, (jc * domain.dy - y0) / dy_seg)
    elif dy_seg < 0 and y0 >= (jc + 1) * domain.dy:
        t = max(t, ((jc + 1) * domain.dy - y0) / dy_seg)
    eps = 1.0e-9 * max(domain.dx, domain.dy)
    ex = x0 + t * dx_seg
    ey = y0 + t * dy_seg
    # nudge into the target cell so the stored position maps to it
    cx = (ic + 0.5) * domain.dx
    cy = (jc + 0.5) * domain.dy
    ex += math.copysign(eps, cx - ex) if ex != cx else 0.0
    ey += math.copysign(eps, cy - ey) if ey != cy else 0.0
    return ex, ey


def _exit_point(domain: Domain, x0, y0, x1, y1):
    """Point where the segment leaves the domain box."""
    dx_seg = x1 - x0
    dy_seg = y1 - y0
    t = 1.0
    if dx_seg > 0 and x1 >= domain.width:
        t = min(t, (domain.width - x0) / dx_seg)
    elif dx_seg < 0 and x1 < 0.0:
        t = min(t, (0.0 - x0) / dx_seg)
    if dy_seg > 0 and y1 >= domain.height:
        t = min(t, (domain.height - y0) / dy_seg)
    elif dy_seg < 0 and y1 < 0.0:
        t = min(t, (0.0 - y0) / dy_seg)
    x = min(max(x0 + t * dx_seg, 0.0), np.nextafter(domain.width, 0.0))
    y = min(max(y0 + t * dy_seg, 0.0), np.nextafter(domain.height, 0.0))
    return x, y


def resolve_moves(particles: ParticleSet, domain: Domain, new_x, new_y,
                  beach_volume: np.ndarray, beach_capacity: float) -> None:
    """Commit tentative horizontal moves, handling coast and boundaries.

    Particles leaving the domain are frozen at their exit point as
    escaped.  Particles whose path enters a land cell beach at the entry
    point if the cell still has capacity, and otherwise stay afloat at
    their pre-step position.  Beached particles never re-float.
    """
    sl = particles.released
    status = particles.status[sl]
    movable = (status == STATUS_SURFACE) | (status == STATUS_ENTRAINED)
    x0 = particles.x[sl]
    y0 = particles.y[sl]
    nx_ = np.where(movable, new_x, x0)
    ny_ = np.where(movable, new_y, y0)

    outside = movable & ~domain.contains(nx_, ny_)
    for k in np.nonzero(outside)[0]:
        ex, ey = _exit_point(domain, x0[k], y0[k], nx_[k], ny_[k])
        nx_[k], ny_[k] = ex, ey
        status[k] = STATUS_ESCAPED

    inside = movable & ~outside
    ii = np.zeros(len(x0), dtype=np.int64)
    jj = np.zeros(len(y0), dtype=np.int64)
    ii[inside], jj[inside] = domain.cell_index(nx_[inside], ny_[inside])
    landing = inside.copy()
    landing[inside] = domain.land[ii[inside], jj[inside]]
    # corner-cutting guard: also catch paths whose midpoint is on land
    mid_check = inside & ~landing
    if np.any(mid_check):
        mx = 0.5 * (x0 + nx_)
        my = 0.5 * (y0 + ny_)
        ok = mid_check & domain.contains(mx, my)
        mi, mj = domain.cell_index(mx[ok], my[ok])
        hit = np.zeros(len(x0), dtype=bool)
        hit[ok] = domain.land[mi, mj]
        landing |= hit
        ii[hit], jj[hit] = domain.cell_index(mx[hit], my[hit])
        nx_[hit] = mx[hit]
        ny_[hit] = my[hit]

    for k in np.nonzero(landing)[0]:
        ic, jc = int(ii[k]), int(jj[k])
        if beach_volume[ic, jc] + particles.volume[k] <= beach_capacity:
            ex, ey = _entry_point(domain, x0[k], y0[k], nx_[k], ny_[k], ic, jc)
            nx_[k], ny_[k] = ex, ey
            status[k] = STATUS_BEACHED
            particles.z[k] = 0.0
            beach_volume[ic, jc] += particles.volume[k]
        else:
            nx_[k], ny_[k] = x0[k], y0[k]  # saturated: remains afloat

    particles.x[sl] = nx_
    particles.y[sl] = ny_
    particles.status[sl] = status


def required_particles(alpha_conf: float, d_h: float | None = None,
                       dt: float | None = None, *, recommended_floor: bool = True,
                       extra_floors: tuple[int, ...] = ()) -> int:
    """Sample count for resolving the horizontal random walk at the given
    confidence width.

    n >= (1.96 / (alpha E))^2 sigma^2 with sigma = (sqrt(2)-1) sqrt(12 D dt)
    and E = 0.5 sqrt(12 D dt); D and dt cancel, so the result depends only
    on alpha.  The module-level recommendation of 3000 particles is
    applied as a floor unless disabled.
    """
    if not (0.0 < alpha_conf < 1.0):
        raise ValueError("confidence width alpha must lie in (0, 1)")
    if d_h and dt:
        sigma2 = (math.sqrt(2.0) - 1.0) ** 2 * 12.0 * d_h * dt
        e_walk = 0.5 * math.sqrt(12.0 * d_h * dt)
        n = (1.96 / (alpha_conf * e_walk)) ** 2 * sigma2
    else:
        n = (1.96 / alpha_conf) ** 2 * 4.0 * (math.sqrt(2.0) - 1.0) ** 2
    count = math.ceil(n - 1.0e-9)
    floors = [count]
    if recommended_floor:
        floors.append(RECOMMENDED_MIN_PARTICLES)
    floors.extend(extra_floors)
    return max(floors)
