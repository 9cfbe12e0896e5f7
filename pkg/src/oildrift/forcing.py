"""Time-stamped gridded forcing series (wind/current components).

Two interchangeable on-disk layouts:

* CSV stack: repeated blocks of a header line ``time,<ISO-8601>`` followed
  by ``lon,lat,value`` rows (an optional ``lon,lat,value`` column-header
  line after the time line is skipped).  All blocks must share the same
  regular lon/lat grid and times must strictly increase.
* Manifest: a JSON file ``{"variable": ..., "slices": [{"time": ...,
  "path": ...}]}`` pointing at one ESRI ASCII grid per time slice.

Queries interpolate bilinearly in space and linearly in time; queries
outside the covered time range clamp to the nearest slice (warned once).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_time
from .rasters import read_esri_ascii

log = logging.getLogger(__name__)

__all__ = ["GriddedSeries", "load_gridded_series"]


@dataclass
class GriddedSeries:
    variable: str
    times: np.ndarray  # (nt,), epoch seconds, strictly increasing
    lons: np.ndarray  # (nlon,), ascending
    lats: np.ndarray  # (nlat,), ascending
    values: np.ndarray  # (nt, nlon, nlat)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError(f"{self.variable}: timestamps must strictly increase")
        self._warned_clamp = False

    def sample(self, t: float, lon, lat) -> np.ndarray:
        """Bilinear-in-space, linear-in-time interpolation at (t, lon, lat).

        Spatial queries clamp to the grid hull; temporal queries outside
        the range clamp to the nearest slice.
        """
        times = self.times
        if t <= times[0]:
            if t < times[0] and not self._warned_clamp:
                log.warning("%s: query %.0f before first slice; clamping", self.variable, t)
                self._warned_clamp = True
            return self._slice_at(0, lon, lat)
        if t >= times[-1]:
            if t > times[-1] and not self._warned_clamp:
                log.warning("%s: query %.0f after last slice; clamping", self.variable, t)
                self._warned_clamp = True
            return self._slice_at(len(times) - 1, lon, lat)
        k = int(np.searchsorted(times, t, side="right")) - 1
        w = (t - times[k]) / (times[k + 1] - times[k])
        return (1.0 - w) * self._slice_at(k, lon, lat) + w * self._slice_at(k + 1, lon, lat)

    def _slice_at(self, k: int, lon, lat) -> np.ndarray:
        lon = np.clip(np.asarray(lon, dtype=np.float64), self.lons[0], self.lons[-1])
        lat = np.clip(np.asarray(lat, dtype=np.float64), self.lats[0], self.lats[-1])
        vi = np.clip(np.searchsorted(self.lons, lon, side="right") - 1, 0, len(self.lons) - 2)
        vj = np.clip(np.searchsorted(self.lats, lat, side="right") - 1, 0, len(self.lats) - 2)
        x0 = self.lons[vi]
        y0 = self.lats[vj]
        fx = (lon - x0) / (self.lons[vi + 1] - x0)
        fy = (lat - y0) / (self.lats[vj + 1] - y0)
        g = self.values[k]
        return ((1 - fx) * (1 - fy) * g[vi, vj] + fx * (1 - fy) * g[vi + 1, vj]
                + (1 - fx) * fy * g[vi, vj + 1] + fx * fy * g[vi + 1, vj + 1])

    def covers(self, lon, lat) -> np.ndarray:
        lon = np.asarray(lon)
        lat = np.asarray(lat)
        return ((lon >= self.lons[0]) & (lon <= self.lons[-1])
                & (lat >= self.lats[0]) & (lat <= self.lats[-1]))


def _load_csv_stack(path: Path, variable: str) -> GriddedSeries:
    blocks: list[tuple[float, list[tuple[float, float, float]]]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if parts[0].lower() == "time":
                blocks.append((parse_time(parts[1]), []))
                continue
            if parts[0].lower() == "lon":
                continue  # optional column header
            if not blocks:
                raise ConfigError(f"{path}:{lineno}: data before any 'time,' header")
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: expected lon,lat,value")
            blocks[-1][1].append(tuple(float(p) for p in parts))
    if not blocks:
        raise ConfigError(f"{path}: no time slices found")

    first = blocks[0][1]
    coords = {(lon, lat) for lon, lat, _ in first}
    lons = np.array(sorted({lon for lon, _ in coords}))
    lats = np.array(sorted({lat for _, lat in coords}))
    if len(lons) * len(lats) != len(coords) or len(coords) != len(first):
        raise ConfigError(f"{path}: points do not form a regular lon/lat grid")
    index = {(lon, lat): (i, j)
             for i, lon in enumerate(lons) for j, lat in enumerate(lats)}

    times = []
    values = np.empty((len(blocks), len(lons), len(lats)))
    for k, (t, rows) in enumerate(blocks):
        if {(lon, lat) for lon, lat, _ in rows} != coords:
            raise ConfigError(f"{path}: slice {k} grid differs from the first slice")
        times.append(t)
        for lon, lat, val in rows:
            i, j = index[(lon, lat)]
            values[k, i, j] = val
    return GriddedSeries(variable=variable, times=np.array(times),
                         lons=lons, lats=lats, values=values)


def _load_manifest(path: Path, variable: str) -> GriddedSeries:
    with open(path) as fh:
        doc = json.load(fh)
    slices = doc.get("slices", [])
    if not slices:
        raise ConfigError(f"{path}: manifest has no slices")
    times = []
    grids = []
    header0 = None
    for entry in slices:
        grid_path = Path(entry["path"])
        if not grid_path.is_absolute():
            grid_path = path.parent / grid_path
        data, header = read_esri_ascii(grid_path)
        if header0 is None:
            header0 = header
        elif (header.ncols, header.nrows, header.xllcorner, header.yllcorner,
              header.dx, header.dy) != (header0.ncols, header0.nrows,
                                        header0.xllcorner, header0.yllcorner,
                                        header0.dx, header0.dy):
            raise ConfigError(f"{path}: slice grids are not co-registered")
        times.append(parse_time(entry["time"]))
        grids.append(np.where(np.isnan(data), 0.0, data))
    lons = header0.xllcorner + (np.arange(header0.ncols) + 0.5) * header0.dx
    lats = header0.yllcorner + (np.arange(header0.nrows) + 0.5) * header0.dy
    return GriddedSeries(variable=doc.get("variable", variable), times=np.array(times),
                         lons=lons, lats=lats, values=np.stack(grids))


def load_gridded_series(path, variable: str = "") -> GriddedSeries:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"forcing file not found: {path}")
    if path.suffix == ".json":
        return _load_manifest(path, variable or path.stem)
    return _load_csv_stack(path, variable or path.stem)
