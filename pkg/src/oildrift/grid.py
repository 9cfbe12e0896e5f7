"""Computation domain: surface grid, two-stage depth mesh, land mask.

The domain is a regular nx x ny surface grid on a local tangent plane.
Longitude/latitude are converted once to metric offsets (equirectangular
with cos(mean latitude) scaling); everything downstream is Cartesian.
Cell (i, j) covers the half-open box [i*dx, (i+1)*dx) x [j*dy, (j+1)*dy)
with its centre at ((i+0.5)*dx, (j+0.5)*dy).

Each water column is discretised with a fine mesh of n_crit steps of
depth_fine_step down to z_crit, then a coarse mesh of depth_coarse_step
steps down to the cell's bathymetric depth.  A cell is land iff its mean
depth is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rasters import read_esri_ascii

__all__ = [
    "EARTH_RADIUS",
    "Domain",
    "DomainSpec",
    "CellStates",
    "build_domain",
    "depth_levels",
    "cell_of",
]

EARTH_RADIUS = 6371000.0  # m


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """User-facing description of the domain before the mesh is built."""

    origin_lon: float
    origin_lat: float
    nx: int
    ny: int
    dx: float  # m
    dy: float  # m
    depth_fine_step: float = 0.5  # m
    depth_coarse_step: float = 25.0  # m
    n_crit: int = 10
    z_crit: float | None = None  # defaults to n_crit * depth_fine_step
    start_time: float = 0.0  # UTC seconds
    end_time: float = 0.0


@dataclass(frozen=True)
class Domain:
    origin_lon: float
    origin_lat: float
    nx: int
    ny: int
    dx: float
    dy: float
    depth_fine_step: float
    depth_coarse_step: float
    n_crit: int
    z_crit: float
    bathymetry: np.ndarray  # (nx, ny), mean depth in m, 0 = land
    start_time: float
    end_time: float
    land: np.ndarray = field(init=False)  # (nx, ny) bool
    mean_lat: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "land", self.bathymetry == 0.0)
        lat_span = self.ny * self.dy / EARTH_RADIUS * 180.0 / math.pi
        object.__setattr__(self, "mean_lat", self.origin_lat + 0.5 * lat_span)
        self.bathymetry.setflags(write=False)

    @property
    def width(self) -> float:
        return self.nx * self.dx

    @property
    def height(self) -> float:
        return self.ny * self.dy

    @property
    def n_water(self) -> int:
        return int(np.count_nonzero(~self.land))

    def cell_centre(self, i: int, j: int) -> tuple[float, float]:
        return ((i + 0.5) * self.dx, (j + 0.5) * self.dy)

    def cell_latitude(self, j) -> np.ndarray:
        """Latitude of cell-row centres, degrees north."""
        y = (np.asarray(j, dtype=np.float64) + 0.5) * self.dy
        return self.origin_lat + y / EARTH_RADIUS * 180.0 / math.pi

    def lonlat_to_xy(self, lon, lat) -> tuple[np.ndarray, np.ndarray]:
        lon = np.asarray(lon, dtype=np.float64)
        lat = np.asarray(lat, dtype=np.float64)
        coslat = math.cos(math.radians(self.mean_lat))
        x = np.radians(lon - self.origin_lon) * EARTH_RADIUS * coslat
        y = np.radians(lat - self.origin_lat) * EARTH_RADIUS
        return x, y

    def xy_to_lonlat(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        coslat = math.cos(math.radians(self.mean_lat))
        lon = self.origin_lon + np.degrees(x / (EARTH_RADIUS * coslat))
        lat = self.origin_lat + np.degrees(y / EARTH_RADIUS)
        return lon, lat

    def contains(self, x, y) -> np.ndarray:
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= 0.0) & (x < self.width) & (y >= 0.0) & (y < self.height)

    def cell_index(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised cell lookup; caller must pre-check `contains`."""
        i = np.floor(np.asarray(x) / self.dx).astype(np.int64)
        j = np.floor(np.asarray(y) / self.dy).astype(np.int64)
        return i, j


def build_domain(spec: DomainSpec, bathymetry: np.ndarray | str) -> Domain:
    """Construct the domain from a spec and a bathymetry raster.

    `bathymetry` is either an (nx, ny) array of mean depths or a path to
    an ESRI ASCII grid (NODATA and 0 both mean land).
    """
    if isinstance(bathymetry, (str, bytes)) or hasattr(bathymetry, "__fspath__"):
        data, _ = read_esri_ascii(bathymetry)
        bathy = np.where(np.isnan(data), 0.0, data)
    else:
        bathy = np.array(bathymetry, dtype=np.float64)
        bathy = np.where(np.isnan(bathy), 0.0, bathy)

    if spec.nx < 3 or spec.ny < 3:
        raise DomainError(f"grid must be at least 3x3, got {spec.nx}x{spec.ny}")
    if spec.dx <= 0 or spec.dy <= 0:
        raise DomainError("cell sizes dx, dy must be positive")
    if bathy.shape != (spec.nx, spec.ny):
        raise DomainError(
            f"bathymetry shape {bathy.shape} does not match grid {(spec.nx, spec.ny)}"
        )
    if np.any(bathy < 0):
        raise DomainError("bathymetry depths must be >= 0 (0 = land)")
    if spec.depth_fine_step <= 0 or spec.depth_coarse_step <= 0 or spec.n_crit < 1:
        raise DomainError("depth mesh parameters must be positive")

    fine_bottom = spec.n_crit * spec.depth_fine_step
    water = bathy[bathy > 0]
    if water.size and fine_bottom > water.min():
        raise DomainError(
            f"fine mesh extends to {fine_bottom} m, deeper than the shallowest "
            f"water cell ({water.min()} m)"
        )
    z_crit = spec.z_crit if spec.z_crit is not None else fine_bottom
    if z_crit < fine_bottom:
        raise DomainError(f"z_crit={z_crit} must not be above the fine mesh bottom {fine_bottom}")

    return Domain(
        origin_lon=spec.origin_lon,
        origin_lat=spec.origin_lat,
        nx=spec.nx,
        ny=spec.ny,
        dx=spec.dx,
        dy=spec.dy,
        depth_fine_step=spec.depth_fine_step,
        depth_coarse_step=spec.depth_coarse_step,
        n_crit=spec.n_crit,
        z_crit=z_crit,
        bathymetry=bathy,
        start_time=spec.start_time,
        end_time=spec.end_time,
    )


def depth_levels(domain: Domain, i: int, j: int) -> np.ndarray:
    """Per-cell depth level vector: fine mesh, coarse mesh, bottom.

    Strictly increasing from 0 to the cell's mean depth.  If the cell is
    shallower than z_crit the mesh is truncated at the bottom.
    """
    zbar = float(domain.bathymetry[i, j])
    if zbar == 0.0:
        raise DomainError(f"cell ({i}, {j}) is land: no water column")
    levels = [k * domain.depth_fine_step for k in range(domain.n_crit + 1)]
    if domain.z_crit > levels[-1]:
        levels.append(domain.z_crit)
    z = domain.z_crit + domain.depth_coarse_step
    while z < zbar:
        levels.append(z)
        z += domain.depth_coarse_step
    levels = [lvl for lvl in levels if lvl < zbar]
    levels.append(zbar)
    return np.array(levels, dtype=np.float64)


def cell_of(domain: Domain, x: float, y: float) -> tuple[int, int] | None:
    """Cell index covering (x, y) in domain metres, or None if outside.

    Cells are half-open boxes [lo, hi) on both axes, so a point exactly on
    a shared edge belongs to the higher-index cell.
    """
    if not (0.0 <= x < domain.width and 0.0 <= y < domain.height):
        return None
    return (int(x // domain.dx), int(y // domain.dy))


@dataclass
class CellStates:
    """Per-cell environment record, stored as arrays over the grid.

    Wind and Ekman-averaged wind are kept per cell; the wave summary
    arrays mirror `waves.WaveSummary` fields.  The Ekman wind starts
    equal to the instantaneous wind.
    """

    water_density: np.ndarray
    air_density: np.ndarray
    temperature: np.ndarray
    wind_u: np.ndarray
    wind_v: np.ndarray
    ekman_u: np.ndarray
    ekman_v: np.ndarray
    latitude: np.ndarray  # (nx, ny), degrees
    wave_hs: np.ndarray
    wave_t_peak: np.ndarray
    wave_l_peak: np.ndarray
    wave_a_p: np.ndarray
    wave_f_p: np.ndarray
    wave_theta: np.ndarray  # mean energy direction, rad clockwise from north
    wave_psi_fr: np.ndarray
    wave_calm: np.ndarray  # bool

    @classmethod
    def initial(cls, domain: Domain, water_density: float = 1025.0,
                air_density: float = 1.225, temperature: float = 288.0) -> "CellStates":
        shape = (domain.nx, domain.ny)
        lat = np.broadcast_to(domain.cell_latitude(np.arange(domain.ny)), shape).copy()
        z = np.zeros(shape)
        return cls(
            water_density=np.full(shape, water_density),
            air_density=np.full(shape, air_density),
            temperature=np.full(shape, temperature),
            wind_u=z.copy(), wind_v=z.copy(),
            ekman_u=z.copy(), ekman_v=z.copy(),
            latitude=lat,
            wave_hs=z.copy(), wave_t_peak=z.copy(), wave_l_peak=z.copy(),
            wave_a_p=z.copy(), wave_f_p=z.copy(), wave_theta=z.copy(),
            wave_psi_fr=np.ones(shape), wave_calm=np.ones(shape, dtype=bool),
        )

    def copy(self) -> "CellStates":
        return CellStates(**{k: v.copy() for k, v in vars(self).items()})
