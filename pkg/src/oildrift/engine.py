"""Forward simulation: one realization of the coupled flow/wave/oil model.

Each step runs a fixed sequence of phases: state correction from external
data and sensors, the Ekman-averaged wind update, state saving, oil
correction, time-step selection, per-cell profile and wave updates
(restricted to oil-holding cells unless configured otherwise), diffusion
coefficients, the composed oil velocity, the diffusion-correction
velocity, particle release, entrainment, advection, slick thickness,
mechanical spreading, a thickness recompute, ageing, the two flow-solver
steps, and the time advance.  The phase order is recorded in a trace so
conformance can be asserted.

A failed step leaves the previous state intact (the step works on copies
and commits only on success).
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import flow, oil, profiles, rng, waves, wind
from .config import ScenarioConfig, edge_condition, format_time, parse_time
from .forcing import load_gridded_series
from .grid import CellStates, Domain, DomainSpec, build_domain
from .rasters import read_esri_ascii

log = logging.getLogger(__name__)

__all__ = ["PHASES", "Snapshot", "RunResult", "Simulation"]

PHASES = (
    "correct_states",
    "ekman_update",
    "save_states",
    "correct_oil",
    "compute_timestep",
    "profiles_waves",
    "diffusion_coefficients",
    "oil_velocity",
    "correction_velocity",
    "release",
    "entrain",
    "advect",
    "thickness",
    "mechanical_spreading",
    "thickness_recompute",
    "age_increment",
    "flow_step",
    "advance_time",
)

_SNAP_EPS = 1.0e-6


@dataclass
class Snapshot:
    time: float  # epoch seconds
    sim_time: float  # seconds since scenario start
    iso: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    volume: np.ndarray
    age: np.ndarray
    status: np.ndarray
    thickness: oil.ThicknessMap
    column_volume: np.ndarray  # per-cell volume of non-escaped particles
    escaped_volume: float
    audit: dict


@dataclass
class RunResult:
    snapshots: list  # light records: dicts with time/audit/column_volume
    final_snapshot: Snapshot
    summary: dict
    trace: list = field(default_factory=list)


class Simulation:
    def __init__(self, scenario: ScenarioConfig, seed: int | None = None,
                 realization: int = 0, sampled: dict | None = None):
        self.scenario = scenario
        cfg = scenario.raw
        self.cfg = cfg
        self.seed = int(cfg["seed"] if seed is None else seed)
        self.realization = int(realization)
        sampled = sampled or {}

        dom_cfg = cfg["domain"]
        bathy = scenario.bathymetry_array(dom_cfg["nx"], dom_cfg["ny"])
        self.domain: Domain = build_domain(
            DomainSpec(
                origin_lon=dom_cfg["origin_lon"], origin_lat=dom_cfg["origin_lat"],
                nx=dom_cfg["nx"], ny=dom_cfg["ny"], dx=scenario.dx, dy=scenario.dy,
                depth_fine_step=dom_cfg["depth_fine_step"],
                depth_coarse_step=dom_cfg["depth_coarse_step"],
                n_crit=dom_cfg["n_crit"], z_crit=dom_cfg["z_crit"],
                start_time=scenario.start_time, end_time=scenario.end_time,
            ),
            bathy,
        )
        env = cfg["environment"]
        self.rho_water = env["water_density"]
        self.rho_air = env["air_density"]
        self.cells = CellStates.initial(self.domain, self.rho_water, self.rho_air,
                                        env["temperature"])

        sol = cfg["solver"]
        self.params = flow.SolverParams(
            omega=sol["omega"], sor_tol=sol["sor_tol"], max_iters=sol["max_iters"],
            div_tol=sol["div_tol"], courant_target=sol["courant_target"],
            dt_max=sol["dt_max"], eps_vel=sol["eps_vel"],
        )
        nx, ny, dx, dy = self.domain.nx, self.domain.ny, self.domain.dx, self.domain.dy
        wcfg, ccfg = cfg["wind"], cfg["current"]
        self.water = flow.VelocityField.uniform(nx, ny, dx, dy, *ccfg["initial"],
                                                kind=flow.WATER, nu=sol["nu_water"])
        self.windf = flow.VelocityField.uniform(nx, ny, dx, dy, *wcfg["initial"],
                                                kind=flow.WIND, nu=sol["nu_wind"])
        self.bc_water = flow.BoundarySpec(
            **{k: edge_condition(v) for k, v in ccfg["boundary"].items()})
        self.bc_wind = flow.BoundarySpec(
            **{k: edge_condition(v) for k, v in wcfg["boundary"].items()})
        self.masks_water = flow.build_masks(nx, ny, self.domain.land, self.bc_water)
        self.masks_wind = flow.build_masks(nx, ny, None, self.bc_wind)
        self.water = flow.apply_obstacles(self.water, self.masks_water)

        self.canopy = None
        self.wind_max_speed = wcfg["max_speed"]
        if wcfg["canopy_raster"] is not None:
            lam, _ = read_esri_ascii(wcfg["canopy_raster"])
            self.canopy = wind.CanopyMask.from_raster(lam)
        elif wcfg["canopy_coefficient"] is not None:
            self.canopy = wind.CanopyMask.from_coefficient(self.domain.land,
                                                           wcfg["canopy_coefficient"])
        self.ekman_period = wcfg["ekman_period"]
        uc, vc = self.windf.cell_centred()
        self.cells.wind_u[:], self.cells.wind_v[:] = uc, vc
        self.cells.ekman_u[:], self.cells.ekman_v[:] = uc, vc

        self.profile_params = profiles.ProfileParams(
            alpha_w=cfg["profiles"]["alpha_w"], alpha_z=cfg["profiles"]["alpha_z"])
        self.adv = profiles.AdvectionCoeffs(
            wind=sampled.get("wind_advection", cfg["advection"]["wind"]),
            current=sampled.get("current_advection", cfg["advection"]["current"]))
        self.z_shear = profiles.shear_layer_depth(self.profile_params,
                                                  self.rho_water, self.rho_air)

        ocfg = cfg["oil"]
        self.props = oil.OilProperties(
            density=ocfg["density"], terminal_thickness=ocfg["terminal_thickness"],
            droplet_diameter=ocfg["droplet_diameter"],
            water_viscosity=ocfg["water_viscosity"])
        self.entrain_params = oil.EntrainmentParams(
            k_e=ocfg["entrainment"]["k_e"], alpha=ocfg["entrainment"]["alpha"],
            length_scale=ocfg["entrainment"]["length_scale"],
            gamma_coefficient=ocfg["entrainment"]["gamma_coefficient"],
            whitecap_wind_threshold=ocfg["entrainment"]["whitecap_wind_threshold"])
        self.c_smag = sampled.get("c_smag", ocfg["c_smag"])
        self.literal_smag = ocfg["literal_smagorinsky"]
        self.beach_capacity = ocfg["beach_capacity_m3"]
        self.beach_volume = np.zeros((nx, ny))
        self.w_b = oil.buoyancy_velocity(self.props, self.rho_water)

        src = cfg["source"]
        sx, sy = self.domain.lonlat_to_xy(src["lon"], src["lat"])
        volume_m3 = sampled.get("volume_m3", scenario.source_volume_m3)
        t0 = sampled.get("t_start", scenario.source_t[0])
        tf = sampled.get("t_end", scenario.source_t[1])
        self.source = oil.SpillSource(x=float(sx), y=float(sy), t_start=t0, t_end=tf,
                                      volume=volume_m3)
        if not self.domain.contains(self.source.x, self.source.y):
            raise ValueError("spill source lies outside the domain")
        si, sj = self.domain.cell_index(self.source.x, self.source.y)
        if self.domain.land[si, sj]:
            raise ValueError("spill source lies on a land cell")
        self.source_cell = (int(si), int(sj))

        budget = ocfg["particles"]
        oil.check_particle_budget(budget, ocfg["allow_small_budget"])
        self.particles = oil.ParticleSet(budget, volume_m3 / budget)

        wv = cfg["waves"]
        self.wave_grid_n = wv["grid_n"]
        self.wave_extent = wv["extent_factor"]
        self.wave_spread = wv["spreading_exponent"]
        self.wave_update_mode = wv["update"]
        self.swell = None
        if wv["swell"] is not None:
            self.swell = waves.SwellSpec(height=wv["swell"]["height"],
                                         period=wv["swell"]["period"],
                                         direction_deg=wv["swell"]["direction"])
            if self.domain.z_crit < 1.7 * self.swell.height:
                log.warning(
                    "z_crit=%.2f m is above the deepest swell intrusion "
                    "(1.7 x %.2f m); the fine mesh may not cover entrained oil",
                    self.domain.z_crit, self.swell.height)

        fc = cfg["forcing"]
        self.forcing = {}
        for key in ("wind_u", "wind_v", "current_u", "current_v"):
            if fc[key] is not None:
                self.forcing[key] = load_gridded_series(fc[key], key)
        if self.forcing:
            ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
            cx = (ii + 0.5) * dx
            cy = (jj + 0.5) * dy
            self._cell_lon, self._cell_lat = self.domain.xy_to_lonlat(cx, cy)

        self.sensors = []
        for s in cfg["sensors"]:
            self.sensors.append({
                "constraint": flow.MeasurementConstraint(
                    i=int(s["i"]), j=int(s["j"]), u=float(s["u"]), v=float(s["v"]),
                    half_width=float(s.get("half_width", 0.0))),
                "t_start": parse_or(s.get("t_start"), -math.inf),
                "t_end": parse_or(s.get("t_end"), math.inf),
            })

        self.cadence = cfg["output"]["cadence_s"]
        self.t = scenario.start_time
        self.end_time = scenario.end_time
        self.step_index = 0
        self._last_dt = 0.0
        self._equator_warned = False
        self.trace: list[tuple[int, str]] = []
        self.timings: dict[str, float] = {name: 0.0 for name in PHASES}
        self._cache: dict = {}
        self._dump_flow_dir = None

    # ------------------------------------------------------------------
    def _phase(self, name: str):
        self.trace.append((self.step_index, name))
        return _PhaseTimer(self.timings, name)

    @property
    def sim_time(self) -> float:
        return self.t - self.scenario.start_time

    def _snapshot_times(self, until: float) -> list[float]:
        t0 = self.scenario.start_time
        k = 0
        out = []
        while t0 + k * self.cadence <= until + _SNAP_EPS:
            out.append(t0 + k * self.cadence)
            k += 1
        if not out or out[-1] < until - _SNAP_EPS:
            out.append(until)
        return out

    # ------------------------------------------------------------------ phases
    def _phase_correct_states(self):
        uc, vc = self.windf.cell_centred()
        self.cells.wind_u[:], self.cells.wind_v[:] = uc, vc
        if self.forcing:
            self._assimilate_forcing()
        cons = tuple(s["constraint"] for s in self.sensors
                     if s["t_start"] <= self.t <= s["t_end"])
        self._cache["constraints"] = cons

    def _assimilate_forcing(self):
        lon, lat = self._cell_lon, self._cell_lat
        for prefix, fld, cells_uv in (("wind", self.windf, (self.cells.wind_u, self.cells.wind_v)),
                                      ("current", self.water, None)):
            su = self.forcing.get(f"{prefix}_u")
            sv = self.forcing.get(f"{prefix}_v")
            if su is None and sv is None:
                continue
            uc, vc = fld.cell_centred()
            covered = np.ones(uc.shape, dtype=bool)
            if su is not None:
                covered &= su.covers(lon, lat)
                uc = np.where(covered, su.sample(self.t, lon, lat), uc)
            if sv is not None:
                covered &= sv.covers(lon, lat)
                vc = np.where(covered, sv.sample(self.t, lon, lat), vc)
            _write_faces_from_cells(fld, uc, vc, covered)
            if cells_uv is not None:
                cells_uv[0][covered] = uc[covered]
                cells_uv[1][covered] = vc[covered]

    def _phase_ekman(self):
        if self._last_dt > 0.0:
            state = wind.EkmanWindState(self.cells.ekman_u, self.cells.ekman_v,
                                        self.ekman_period)
            state = wind.update_ekman_wind(state, self.cells.wind_u,
                                           self.cells.wind_v, self._last_dt)
            self.cells.ekman_u, self.cells.ekman_v = state.u, state.v

    def _phase_save_states(self):
        due = self._cache.get("snapshot_due")
        if due is not None and abs(self.t - due) <= _SNAP_EPS:
            self._emit_snapshot()

    def _phase_correct_oil(self):
        pass  # external oil-state corrections hook; no feed configured

    def _phase_timestep(self) -> float:
        dt = min(flow.compute_timestep(self.water, self.params),
                 flow.compute_timestep(self.windf, self.params))
        horizon = self._cache.get("horizon", self.end_time)
        nxt = self._cache.get("next_snapshot")
        if nxt is not None and nxt > self.t + _SNAP_EPS:
            dt = min(dt, nxt - self.t)
        dt = min(dt, horizon - self.t)
        self._cache["dt"] = dt
        return dt

    def _wave_cells(self) -> tuple[np.ndarray, np.ndarray]:
        if self.wave_update_mode == "everywhere":
            ii, jj = np.nonzero(~self.domain.land)
            return ii, jj
        sl = self.particles.released
        active = ((self.particles.status[sl] == oil.STATUS_SURFACE)
                  | (self.particles.status[sl] == oil.STATUS_ENTRAINED))
        cells = set()
        if np.any(active):
            i, j = self.domain.cell_index(self.particles.x[sl][active],
                                          self.particles.y[sl][active])
            cells.update(zip(i.tolist(), j.tolist()))
        cells.add(self.source_cell)
        cells = sorted(cells)
        ii = np.array([c[0] for c in cells], dtype=np.int64)
        jj = np.array([c[1] for c in cells], dtype=np.int64)
        water = ~self.domain.land[ii, jj]
        return ii[water], jj[water]

    def _phase_profiles_waves(self):
        uc, vc = self.water.cell_centred()
        self._cache["water_uc"], self._cache["water_vc"] = uc, vc
        ii, jj = self._wave_cells()
        for i, j in zip(ii, jj):
            spec = waves.build_spectrum(
                (self.cells.wind_u[i, j], self.cells.wind_v[i, j]),
                (uc[i, j], vc[i, j]), self.swell, self.domain.bathymetry[i, j],
                grid_n=self.wave_grid_n, extent_factor=self.wave_extent,
                spreading_exponent=self.wave_spread)
            summ = waves.spectrum_summary(spec)
            self.cells.wave_hs[i, j] = summ.hs
            self.cells.wave_t_peak[i, j] = summ.t_peak
            self.cells.wave_l_peak[i, j] = summ.l_peak
            self.cells.wave_a_p[i, j] = summ.a_p
            self.cells.wave_f_p[i, j] = summ.f_p
            self.cells.wave_theta[i, j] = summ.theta
            self.cells.wave_psi_fr[i, j] = summ.psi_fr
            self.cells.wave_calm[i, j] = summ.calm

    def _phase_diffusion_coeffs(self):
        self._cache["d_h"] = oil.horizontal_diffusivity(self.water, self.c_smag,
                                                        self.literal_smag)

    def _phase_oil_velocity(self):
        pass  # per-cell ingredients are cached; composition happens per particle

    def _phase_correction_velocity(self):
        self._cache["grad_dh"] = oil.diffusion_correction(
            self._cache["d_h"], self.domain.dx, self.domain.dy, self.domain.land)

    def _phase_release(self):
        n_new = oil.release_count(self.source, self.particles.budget, self.t,
                                  self._cache["dt"], self.particles.n)
        if n_new:
            self.particles.release(n_new, self.source.x, self.source.y)

    def _phase_entrain(self):
        p = self.particles
        p.buoyancy_off[: p.n] = False
        n = p.n
        if n == 0:
            return
        gen = rng.stream(self.seed, self.realization, self.step_index, rng.PHASE_ENTRAIN)
        draw = gen.random(n)
        phi = gen.random(n)
        sl = p.released
        surf = p.status[sl] == oil.STATUS_SURFACE
        if not np.any(surf):
            return
        i, j = self.domain.cell_index(p.x[sl], p.y[sl])
        wind_speed = np.hypot(self.cells.wind_u[i, j], self.cells.wind_v[i, j])
        lam = oil.entrainment_rate(self.cells.wave_hs[i, j], self.cells.wave_t_peak[i, j],
                                   wind_speed, self.rho_water, self.entrain_params)
        prob = oil.entrain_probability(lam, self._cache["dt"])
        go = surf & (draw < prob)
        if not np.any(go):
            return
        depth = oil.intrusion_depth(self.cells.wave_hs[i, j], phi)
        zbar = self.domain.bathymetry[i, j]
        z = p.z[:n]
        z[go] = np.minimum(depth[go], zbar[go])
        p.status[: n][go] = oil.STATUS_ENTRAINED
        p.buoyancy_off[: n][go] = True

    def _phase_advect(self):
        p = self.particles
        n = p.n
        if n == 0:
            return
        dt = self._cache["dt"]
        sl = p.released
        status = p.status[:n]
        active = (status == oil.STATUS_SURFACE) | (status == oil.STATUS_ENTRAINED)
        if not np.any(active):
            return
        i, j = self.domain.cell_index(p.x[:n], p.y[:n])
        i = np.clip(i, 0, self.domain.nx - 1)
        j = np.clip(j, 0, self.domain.ny - 1)
        z = p.z[:n]
        zbar = np.maximum(self.domain.bathymetry[i, j], 1.0e-9)
        zc = np.minimum(z, zbar)

        uc, vc = self._cache["water_uc"], self._cache["water_vc"]
        tid = (1.0 - zc / zbar) ** (1.0 / self.profile_params.tidal_exponent_denom)
        eu = self.adv.current * uc[i, j] * tid
        ev = self.adv.current * vc[i, j] * tid

        wu = self.cells.wind_u[i, j]
        wv = self.cells.wind_v[i, j]
        shear = self.profile_params.alpha_w * np.exp(-2.0 * np.pi * zc / self.z_shear)
        eu += wu * shear
        ev += wv * shear

        lat = self.cells.latitude[i, j]
        ok_lat = np.abs(lat) >= profiles.MIN_EKMAN_LATITUDE
        if np.any(ok_lat):
            keu, kev = profiles.ekman_profile(
                self.cells.ekman_u[i, j][ok_lat], self.cells.ekman_v[i, j][ok_lat],
                zc[ok_lat], lat[ok_lat], self.rho_water, self.rho_air)
            eu[ok_lat] += keu
            ev[ok_lat] += kev
        elif not self._equator_warned:
            log.warning("Ekman term zeroed near the equator (|lat| < 2 deg)")
            self._equator_warned = True

        su, sv = profiles.stokes_profile_arrays(
            self.cells.wave_t_peak[i, j], self.cells.wave_l_peak[i, j],
            self.cells.wave_a_p[i, j], self.cells.wave_theta[i, j],
            self.cells.wave_psi_fr[i, j], zc)
        eu += su
        ev += sv

        in_shear_layer = zc < self.z_shear
        eu += np.where(in_shear_layer, self.adv.wind * wu, 0.0)
        ev += np.where(in_shear_layer, self.adv.wind * wv, 0.0)

        gx, gy = self._cache["grad_dh"]
        eu += gx[i, j]
        ev += gy[i, j]

        gen = rng.stream(self.seed, self.realization, self.step_index, rng.PHASE_TURB)
        xi = gen.random(n)
        phi = gen.random(n)
        zeta = gen.random(n)
        d_h = self._cache["d_h"][i, j]
        d_v = oil.vertical_diffusivity(self.cells.wave_hs[i, j],
                                       self.cells.wave_t_peak[i, j],
                                       self.cells.wave_l_peak[i, j], zc)
        tx, ty, tz = oil.turbulent_step(d_h, d_v, dt, xi, phi, zeta)

        new_x = np.where(active, p.x[:n] + eu * dt + tx, p.x[:n])
        new_y = np.where(active, p.y[:n] + ev * dt + ty, p.y[:n])

        entrained = status == oil.STATUS_ENTRAINED
        w_b = np.where(p.buoyancy_off[:n], 0.0, self.w_b)
        zn = np.where(entrained, zc + tz - w_b * dt, zc)
        zn = np.clip(zn, 0.0, zbar)
        p.z[:n] = np.where(active, zn, p.z[:n])
        resurfaced = entrained & (p.z[:n] <= 0.0)
        p.status[:n][resurfaced] = oil.STATUS_SURFACE

        oil.resolve_moves(p, self.domain, new_x, new_y, self.beach_volume,
                          self.beach_capacity)

    def _wind_speed_cells(self) -> np.ndarray:
        return np.hypot(self.cells.wind_u, self.cells.wind_v)

    def _phase_thickness(self):
        self._cache["thickness"] = oil.thickness_map(
            self.particles, self.domain, self._wind_speed_cells(), self.props,
            self.rho_water)

    def _phase_spread(self):
        p = self.particles
        n = p.n
        if n == 0:
            return
        gen = rng.stream(self.seed, self.realization, self.step_index, rng.PHASE_SPREAD)
        signs_q = gen.integers(0, 2, size=n) * 2.0 - 1.0
        signs_r = gen.integers(0, 2, size=n) * 2.0 - 1.0
        dxp, dyp = oil.mechanical_spread(
            p, self._cache["thickness"], self.domain, self.cells.wind_u,
            self.cells.wind_v, self._cache["dt"], signs_q, signs_r, self.props,
            self.rho_water)
        if np.any(dxp) or np.any(dyp):
            oil.resolve_moves(p, self.domain, p.x[:n] + dxp, p.y[:n] + dyp,
                              self.beach_volume, self.beach_capacity)

    def _phase_thickness2(self):
        self._phase_thickness()

    def _phase_age(self):
        self.particles.age[: self.particles.n] += self._cache["dt"]

    def _phase_flow(self):
        dt = self._cache["dt"]
        cons = self._cache.get("constraints", ())
        self.water = flow.step(self.water, self.bc_water, dt, self.masks_water,
                               self.params, constraints=cons)
        limiter = None
        if self.canopy is not None:
            canopy, max_speed = self.canopy, self.wind_max_speed
            limiter = lambda f: wind.apply_wind_limits(f, canopy, max_speed)
        self.windf = flow.step(self.windf, self.bc_wind, dt, self.masks_wind,
                               self.params, limiter=limiter)
        if self._dump_flow_dir is not None:
            self._dump_flow()

    def _phase_advance(self):
        dt = self._cache["dt"]
        self.t += dt
        nxt = self._cache.get("next_snapshot")
        if nxt is not None and abs(self.t - nxt) <= _SNAP_EPS:
            self.t = nxt
        self._last_dt = dt
        self.step_index += 1

    # ------------------------------------------------------------------
    def step_once(self):
        saved = self._save_state()
        try:
            with self._phase("correct_states"):
                self._phase_correct_states()
            with self._phase("ekman_update"):
                self._phase_ekman()
            with self._phase("save_states"):
                self._phase_save_states()
            with self._phase("correct_oil"):
                self._phase_correct_oil()
            with self._phase("compute_timestep"):
                self._phase_timestep()
            with self._phase("profiles_waves"):
                self._phase_profiles_waves()
            with self._phase("diffusion_coefficients"):
                self._phase_diffusion_coeffs()
            with self._phase("oil_velocity"):
                self._phase_oil_velocity()
            with self._phase("correction_velocity"):
                self._phase_correction_velocity()
            with self._phase("release"):
                self._phase_release()
            with self._phase("entrain"):
                self._phase_entrain()
            with self._phase("advect"):
                self._phase_advect()
            with self._phase("thickness"):
                self._phase_thickness()
            with self._phase("mechanical_spreading"):
                self._phase_spread()
            with self._phase("thickness_recompute"):
                self._phase_thickness2()
            with self._phase("age_increment"):
                self._phase_age()
            with self._phase("flow_step"):
                self._phase_flow()
            with self._phase("advance_time"):
                self._phase_advance()
        except Exception:
            self._restore_state(saved)
            raise

    def _save_state(self):
        return {
            "water": self.water.copy(), "wind": self.windf.copy(),
            "cells": self.cells.copy(), "particles": self.particles.copy(),
            "beach": self.beach_volume.copy(), "t": self.t,
            "step_index": self.step_index, "last_dt": self._last_dt,
            "trace_len": len(self.trace),
            "snaps_len": len(self._cache.get("light_snaps", ())),
        }

    def _restore_state(self, saved):
        self.water = saved["water"]
        self.windf = saved["wind"]
        self.cells = saved["cells"]
        self.particles = saved["particles"]
        self.beach_volume = saved["beach"]
        self.t = saved["t"]
        self.step_index = saved["step_index"]
        self._last_dt = saved["last_dt"]
        del self.trace[saved["trace_len"]:]
        snaps = self._cache.get("light_snaps")
        if snaps is not None:
            del snaps[saved["snaps_len"]:]

    # ------------------------------------------------------------------
    def build_snapshot(self) -> Snapshot:
        p = self.particles
        n = p.n
        tm = oil.thickness_map(p, self.domain, self._wind_speed_cells(), self.props,
                               self.rho_water)
        col = np.zeros((self.domain.nx, self.domain.ny))
        status = p.status[:n]
        kept = status != oil.STATUS_ESCAPED
        if np.any(kept):
            i, j = self.domain.cell_index(p.x[:n][kept], p.y[:n][kept])
            np.add.at(col, (i, j), p.volume[:n][kept])
        counts = {name: int(np.count_nonzero(status == code))
                  for code, name in oil.STATUS_NAMES.items()}
        v = p.particle_volume
        audit = {
            "released_count": n,
            "particle_volume_m3": v,
            "released_volume_m3": n * v,
            "counts": counts,
            "volumes_m3": {name: counts[name] * v for name in counts},
            "total_volume_m3": sum(counts.values()) * v,
        }
        return Snapshot(
            time=self.t, sim_time=self.sim_time, iso=format_time(self.t),
            x=p.x[:n].copy(), y=p.y[:n].copy(), z=p.z[:n].copy(),
            volume=p.volume[:n].copy(), age=p.age[:n].copy(), status=status.copy(),
            thickness=tm, column_volume=col,
            escaped_volume=counts["escaped"] * v, audit=audit)

    def _emit_snapshot(self):
        snap = self.build_snapshot()
        cb = self._cache.get("on_snapshot")
        if cb is not None:
            cb(snap)
        self._cache.setdefault("light_snaps", []).append({
            "time": snap.time, "sim_time": snap.sim_time, "iso": snap.iso,
            "audit": snap.audit, "column_volume": snap.column_volume,
            "escaped_volume": snap.escaped_volume,
        })

    def run(self, until: float | None = None, on_snapshot=None,
            dump_flow_dir=None) -> RunResult:
        """Run to `until` (epoch seconds; scenario end by default)."""
        horizon = self.end_time if until is None else until
        if horizon < self.t - _SNAP_EPS:
            raise ValueError("run horizon precedes current time")
        self._cache["on_snapshot"] = on_snapshot
        self._cache["horizon"] = horizon
        self._dump_flow_dir = dump_flow_dir
        snap_times = self._snapshot_times(horizon)
        wall0 = _time.perf_counter()

        while self.t < horizon - _SNAP_EPS:
            future = [s for s in snap_times if s > self.t + _SNAP_EPS]
            self._cache["next_snapshot"] = future[0] if future else None
            self._cache["snapshot_due"] = min(
                (s for s in snap_times if abs(s - self.t) <= _SNAP_EPS),
                default=None)
            self.step_once()
        # final state snapshot
        self._cache["snapshot_due"] = self.t
        self._emit_snapshot()

        wall = _time.perf_counter() - wall0
        light = self._cache.get("light_snaps", [])
        final = self.build_snapshot()
        summary = {
            "seed": self.seed,
            "realization": self.realization,
            "steps": self.step_index,
            "wall_time_s": wall,
            "phase_timings_s": dict(self.timings),
            "start_time": format_time(self.scenario.start_time),
            "end_time": format_time(horizon),
            "volume_audit": final.audit,
            "effective_config": self.scenario.echo(),
        }
        return RunResult(snapshots=light, final_snapshot=final, summary=summary,
                         trace=list(self.trace))

    def _dump_flow(self):
        from .rasters import write_esri_ascii

        d = self.domain
        tag = f"{self.step_index:06d}"
        uc, vc = self.water.cell_centred()
        div = flow.divergence(self.water)
        for name, arr in (("u", uc), ("v", vc), ("p", self.water.p), ("div", div)):
            write_esri_ascii(f"{self._dump_flow_dir}/flow_{name}_{tag}.asc", arr,
                             0.0, 0.0, d.dx, d.dy)


def parse_or(value, default: float) -> float:
    return default if value is None else parse_time(value)


def _write_faces_from_cells(fld: flow.VelocityField, uc, vc, covered) -> None:
    """Overwrite faces from cell-centred values where both cells are covered."""
    nx, ny = fld.nx, fld.ny
    face_u = np.empty((nx + 1, ny))
    face_u[1:-1, :] = 0.5 * (uc[:-1, :] + uc[1:, :])
    face_u[0, :] = uc[0, :]
    face_u[-1, :] = uc[-1, :]
    cov_u = np.zeros((nx + 1, ny), dtype=bool)
    cov_u[1:-1, :] = covered[:-1, :] & covered[1:, :]
    cov_u[0, :] = covered[0, :]
    cov_u[-1, :] = covered[-1, :]
    fld.u[cov_u] = face_u[cov_u]

    face_v = np.empty((nx, ny + 1))
    face_v[:, 1:-1] = 0.5 * (vc[:, :-1] + vc[:, 1:])
    face_v[:, 0] = vc[:, 0]
    face_v[:, -1] = vc[:, -1]
    cov_v = np.zeros((nx, ny + 1), dtype=bool)
    cov_v[:, 1:-1] = covered[:, :-1] & covered[:, 1:]
    cov_v[:, 0] = covered[:, 0]
    cov_v[:, -1] = covered[:, -1]
    fld.v[cov_v] = face_v[cov_v]


class _PhaseTimer:
    def __init__(self, sink: dict, name: str):
        self.sink = sink
        self.name = name

    def __enter__(self):
        self.t0 = _time.perf_counter()

    def __exit__(self, *exc):
        self.sink[self.name] = self.sink.get(self.name, 0.0) + _time.perf_counter() - self.t0
        return False
