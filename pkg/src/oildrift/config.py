"""Scenario configuration: loading, validation, defaults, echoing.

Scenarios are TOML (or JSON) documents.  Every key has a documented
default; unknown keys and out-of-range values are rejected with the
offending key named.  The fully resolved configuration is echoed into
the run summary as JSON, which `load_config` accepts again, so an echo
reproduces its run.
"""

from __future__ import annotations

import copy
import json
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

__all__ = ["ConfigError", "ScenarioConfig", "load_config", "parse_time", "format_time"]


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 2."""


def parse_time(value) -> float:
    """ISO-8601 UTC timestamp (or epoch seconds) -> epoch seconds."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse time '{value}': {exc}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_time(epoch: float) -> str:
    dt = datetime.fromtimestamp(epoch, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def edge_condition(value):
    """Boundary edge condition: 'open' or [u, v]."""
    if value == "open" or value is None:
        return None
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return (float(value[0]), float(value[1]))
    raise ConfigError(f"boundary edge must be 'open' or [u, v], got {value!r}")


DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "domain": {
        "origin_lon": 0.0,
        "origin_lat": 45.0,
        "nx": 16,
        "ny": 12,
        "size_km": None,  # [Lx, Ly]; or give cell_m
        "cell_m": None,  # [dx, dy]
        "bathymetry": None,  # path, or "uniform:<depth_m>"
        "depth_fine_step": 0.5,
        "depth_coarse_step": 25.0,
        "n_crit": 10,
        "z_crit": None,
        "start_time": "2000-01-01T00:00:00Z",
        "end_time": "2000-01-02T00:00:00Z",
    },
    "solver": {
        "omega": 1.7,
        "sor_tol": 1.0e-6,
        "max_iters": 2000,
        "div_tol": 1.0e-8,
        "courant_target": 0.8,
        "dt_max": 1800.0,
        "eps_vel": 1.0e-6,
        "nu_water": 1.0e-6,
        "nu_wind": 1.5e-5,
    },
    "profiles": {"alpha_w": 0.02, "alpha_z": 2.0},
    "advection": {"wind": 0.02, "current": 1.0},
    "wind": {
        "max_speed": 40.0,
        "canopy_coefficient": None,
        "canopy_raster": None,
        "ekman_period": 43200.0,
        "initial": [0.0, 0.0],
        "boundary": {"west": "open", "east": "open", "south": "open", "north": "open"},
    },
    "current": {
        "initial": [0.0, 0.0],
        "boundary": {"west": "open", "east": "open", "south": "open", "north": "open"},
    },
    "waves": {
        "grid_n": 65,
        "extent_factor": 4.0,
        "spreading_exponent": 10.0,
        "swell": None,  # {height, period, direction}
        "update": "oil_cells",  # or "everywhere"
    },
    "oil": {
        "density": 950.0,
        "terminal_thickness": 1.0e-4,
        "droplet_diameter": 300.0e-6,
        "water_viscosity": 1.2e-3,
        "particles": 3000,
        "allow_small_budget": False,
        "c_smag": 0.1,
        "literal_smagorinsky": False,
        "beach_capacity_m3": math.inf,
        "entrainment": {
            "k_e": 0.4,
            "alpha": 1.5,
            "length_scale": 15.0,
            "gamma_coefficient": 1.0e-5,
            "whitecap_wind_threshold": 6.0,
        },
    },
    "source": {
        "lon": None,
        "lat": None,
        "t_start": None,
        "t_end": None,
        "volume_tonnes": None,
        "volume_m3": None,
    },
    "environment": {"water_density": 1025.0, "air_density": 1.225, "temperature": 288.0},
    "forcing": {"wind_u": None, "wind_v": None, "current_u": None, "current_v": None},
    "sensors": [],
    "output": {"cadence_s": 3600.0, "directory": None},
    "montecarlo": {
        "realizations": 500,
        "workers": 0,
        "presence_threshold_m3": 0.0,
        "sampling": {
            "wind_advection": [0.005, 0.03],
            "current_advection": [0.9, 1.1],
            "c_smag": [0.01, 0.3],
            "t_start_window": None,
            "t_end_window": None,
            "volume_tonnes": None,
        },
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key '{here}'")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge(base[key], val, here)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


@dataclass
class ScenarioConfig:
    """Validated scenario: the normalized dict plus derived quantities."""

    raw: dict
    base_dir: Path
    dx: float = field(init=False)
    dy: float = field(init=False)
    start_time: float = field(init=False)
    end_time: float = field(init=False)
    source_t: tuple[float, float] = field(init=False)
    source_volume_m3: float = field(init=False)

    def __post_init__(self):
        dom = self.raw["domain"]
        if dom["cell_m"] is not None:
            self.dx, self.dy = float(dom["cell_m"][0]), float(dom["cell_m"][1])
        else:
            lx, ly = dom["size_km"]
            self.dx = lx * 1000.0 / dom["nx"]
            self.dy = ly * 1000.0 / dom["ny"]
        self.start_time = parse_time(dom["start_time"])
        self.end_time = parse_time(dom["end_time"])
        src = self.raw["source"]
        self.source_t = (parse_time(src["t_start"]), parse_time(src["t_end"]))
        if src["volume_m3"] is not None:
            self.source_volume_m3 = float(src["volume_m3"])
        else:
            self.source_volume_m3 = (
                float(src["volume_tonnes"]) * 1000.0 / self.raw["oil"]["density"]
            )

    def echo(self) -> dict:
        """JSON-serializable effective configuration (itself loadable)."""
        return copy.deepcopy(self.raw)

    def bathymetry_array(self, nx: int, ny: int) -> np.ndarray:
        from .rasters import read_esri_ascii

        spec = self.raw["domain"]["bathymetry"]
        if spec is None:
            raise ConfigError("domain.bathymetry is required")
        if isinstance(spec, str) and spec.startswith("uniform:"):
            depth = float(spec.split(":", 1)[1])
            _require(depth > 0, "uniform bathymetry depth must be positive")
            return np.full((nx, ny), depth)
        data, _ = read_esri_ascii(spec)
        return np.where(np.isnan(data), 0.0, data)


def _validate(cfg: dict, base_dir: Path) -> None:
    dom = cfg["domain"]
    _require(dom["nx"] >= 3 and dom["ny"] >= 3, "domain.nx and domain.ny must be >= 3")
    _require((dom["size_km"] is not None) != (dom["cell_m"] is not None),
             "give exactly one of domain.size_km or domain.cell_m")
    _require(dom["bathymetry"] is not None, "domain.bathymetry is required")
    _require(parse_time(dom["end_time"]) > parse_time(dom["start_time"]),
             "domain.end_time must be after domain.start_time")

    sol = cfg["solver"]
    _require(0.0 < sol["courant_target"] <= 1.0, "solver.courant_target must be in (0, 1]")
    _require(0.0 < sol["omega"] < 2.0, "solver.omega must be in (0, 2)")
    _require(sol["dt_max"] > 0, "solver.dt_max must be positive")
    _require(sol["dt_max"] < cfg["wind"]["ekman_period"],
             "solver.dt_max must be below wind.ekman_period")

    prof = cfg["profiles"]
    _require(0.005 <= prof["alpha_w"] <= 0.03,
             f"profiles.alpha_w={prof['alpha_w']} outside [0.005, 0.03]")

    adv = cfg["advection"]
    _require(0.0 <= adv["wind"] <= 0.05,
             f"advection.wind={adv['wind']} outside the hard bound [0, 0.05]")
    if not 0.005 <= adv["wind"] <= 0.03:
        warnings.warn(f"advection.wind={adv['wind']} outside the usual range [0.005, 0.03]")
    _require(0.9 <= adv["current"] <= 1.1,
             f"advection.current={adv['current']} outside the hard bound [0.9, 1.1]")
    if not 0.95 <= adv["current"] <= 1.1:
        warnings.warn(f"advection.current={adv['current']} outside the usual range [0.95, 1.1]")

    oil_cfg = cfg["oil"]
    _require(0.01 <= oil_cfg["c_smag"] <= 0.3,
             f"oil.c_smag={oil_cfg['c_smag']} outside [0.01, 0.3]")
    _require(oil_cfg["particles"] >= 1, "oil.particles must be >= 1")
    _require(0 < oil_cfg["density"], "oil.density must be positive")
    ent = oil_cfg["entrainment"]
    _require(0.3 <= ent["k_e"] <= 0.5, f"oil.entrainment.k_e={ent['k_e']} outside [0.3, 0.5]")
    _require(1.15 <= ent["alpha"] <= 1.85,
             f"oil.entrainment.alpha={ent['alpha']} outside [1.15, 1.85]")
    _require(10.0 <= ent["length_scale"] <= 20.0,
             f"oil.entrainment.length_scale={ent['length_scale']} outside [10, 20]")

    wcfg = cfg["wind"]
    if wcfg["canopy_coefficient"] is not None:
        _require(0.0 <= wcfg["canopy_coefficient"] <= 1.0,
                 "wind.canopy_coefficient must lie in [0, 1]")
    _require(wcfg["max_speed"] > 0, "wind.max_speed must be positive")

    for section in ("wind", "current"):
        for edge_val in cfg[section]["boundary"].values():
            edge_condition(edge_val)  # raises on malformed edges  # raises on malformed edges

    src = cfg["source"]
    for key in ("lon", "lat", "t_start", "t_end"):
        _require(src[key] is not None, f"source.{key} is required")
    _require(parse_time(src["t_start"]) < parse_time(src["t_end"]),
             "source.t_start must be before source.t_end")
    _require((src["volume_tonnes"] is not None) or (src["volume_m3"] is not None),
             "source needs volume_tonnes or volume_m3")

    env = cfg["environment"]
    _require(env["water_density"] > env["air_density"] > 0,
             "environment densities must satisfy water > air > 0")
    _require(oil_cfg["density"] < env["water_density"],
             "oil.density must be below environment.water_density")

    sw = cfg["waves"]["swell"]
    if sw is not None:
        for key in ("height", "period", "direction"):
            _require(key in sw, f"waves.swell.{key} is required")
        _require(sw["period"] > 0, "waves.swell.period must be positive")
    _require(cfg["waves"]["update"] in ("oil_cells", "everywhere"),
             "waves.update must be 'oil_cells' or 'everywhere'")

    for idx, sensor in enumerate(cfg["sensors"]):
        for key in ("i", "j", "u", "v"):
            _require(key in sensor, f"sensors[{idx}].{key} is required")
        _require(sensor.get("half_width", 0.0) >= 0.0,
                 f"sensors[{idx}].half_width must be >= 0")

    mc = cfg["montecarlo"]
    _require(mc["realizations"] >= 1, "montecarlo.realizations must be >= 1")
    samp = mc["sampling"]
    for key in ("wind_advection", "current_advection", "c_smag", "volume_tonnes"):
        rng = samp.get(key)
        if rng is not None:
            _require(len(rng) == 2 and rng[0] <= rng[1],
                     f"montecarlo.sampling.{key} must be [lo, hi]")

    # referenced files must exist
    for key in ("wind_u", "wind_v", "current_u", "current_v"):
        path = cfg["forcing"][key]
        if path is not None:
            _require(Path(path).exists(), f"forcing.{key}: file not found: {path}")
    bathy = cfg["domain"]["bathymetry"]
    if isinstance(bathy, str) and not bathy.startswith("uniform:"):
        _require(Path(bathy).exists(), f"domain.bathymetry: file not found: {bathy}")
    if wcfg["canopy_raster"] is not None:
        _require(Path(wcfg["canopy_raster"]).exists(),
                 f"wind.canopy_raster: file not found: {wcfg['canopy_raster']}")


def _resolve_paths(cfg: dict, base_dir: Path) -> None:
    def resolve(p):
        if p is None or (isinstance(p, str) and p.startswith("uniform:")):
            return p
        q = Path(p)
        return str(q if q.is_absolute() else (base_dir / q).resolve())

    cfg["domain"]["bathymetry"] = resolve(cfg["domain"]["bathymetry"])
    cfg["wind"]["canopy_raster"] = resolve(cfg["wind"]["canopy_raster"])
    for key in list(cfg["forcing"]):
        cfg["forcing"][key] = resolve(cfg["forcing"][key])


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    """Load, merge overrides, validate and normalize a scenario file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        with open(path) as fh:
            doc = json.load(fh)
    else:
        import tomli

        with open(path, "rb") as fh:
            try:
                doc = tomli.load(fh)
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a table")
    cfg = _merge(DEFAULTS, doc)
    if overrides:
        cfg = _merge(cfg, overrides)
    _resolve_paths(cfg, path.parent.resolve())
    _validate(cfg, path.parent.resolve())
    return ScenarioConfig(raw=cfg, base_dir=path.parent.resolve())


def parse_override(text: str):
    """Parse one --set dotted.key=value into a nested dict fragment."""
    if "=" not in text:
        raise ConfigError(f"override '{text}' must look like key.path=value")
    key, _, value = text.partition("=")
    keys = key.strip().split(".")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value.strip()
    frag: dict = {}
    node = frag
    for part in keys[:-1]:
        node[part] = {}
        node = node[part]
    node[keys[-1]] = parsed
    return frag
