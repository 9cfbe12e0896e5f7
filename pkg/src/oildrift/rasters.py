"""ESRI ASCII grid reading and writing.

Grids are exchanged as plain-text ESRI ASCII rasters: a short header
(ncols, nrows, xllcorner, yllcorner, cellsize, NODATA_value) followed by
rows of values ordered north to south.  Internally arrays are indexed
``data[i, j]`` with ``i`` west->east and ``j`` south->north, so rows are
flipped on read/write.  For rectangular cells the GDAL ``dx``/``dy``
header extension replaces ``cellsize``.  Values are written with 9
significant digits; re-writing a file read back here reproduces it
byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["RasterHeader", "read_esri_ascii", "write_esri_ascii"]

_HEADER_KEYS = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "dx", "dy", "nodata_value"}


@dataclass(frozen=True)
class RasterHeader:
    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    dx: float
    dy: float
    nodata: float = -9999.0


def read_esri_ascii(path) -> tuple[np.ndarray, RasterHeader]:
    """Read an ESRI ASCII grid.

    Returns ``(data, header)`` where ``data[i, j]`` is indexed west->east,
    south->north.  NODATA cells are returned as NaN.
    """
    fields: dict[str, float] = {}
    rows: list[np.ndarray] = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            key = parts[0].lower()
            if key in _HEADER_KEYS and len(parts) == 2:
                fields[key] = float(parts[1])
            else:
                rows.append(np.array([float(tok) for tok in parts], dtype=np.float64))
    for required in ("ncols", "nrows", "xllcorner", "yllcorner"):
        if required not in fields:
            raise ValueError(f"{path}: missing ESRI ASCII header field '{required}'")
    if "cellsize" in fields:
        dx = dy = fields["cellsize"]
    elif "dx" in fields and "dy" in fields:
        dx, dy = fields["dx"], fields["dy"]
    else:
        raise ValueError(f"{path}: header needs 'cellsize' or 'dx'+'dy'")
    header = RasterHeader(
        ncols=int(fields["ncols"]),
        nrows=int(fields["nrows"]),
        xllcorner=fields["xllcorner"],
        yllcorner=fields["yllcorner"],
        dx=dx,
        dy=dy,
        nodata=fields.get("nodata_value", -9999.0),
    )
    grid = np.concatenate(rows) if rows else np.empty(0)
    if grid.size != header.ncols * header.nrows:
        raise ValueError(
            f"{path}: expected {header.ncols * header.nrows} values, found {grid.size}"
        )
    grid = grid.reshape(header.nrows, header.ncols)
    grid = np.where(grid == header.nodata, np.nan, grid)
    # rows run north->south; transpose to [i, j] with j south->north
    data = grid[::-1].T.copy()
    return data, header


def write_esri_ascii(path, data: np.ndarray, xllcorner: float, yllcorner: float,
                     dx: float, dy: float, nodata: float = -9999.0) -> Path:
    """Write ``data[i, j]`` (west->east, south->north) as an ESRI ASCII grid."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("raster data must be 2-D")
    nx, ny = data.shape
    path = Path(path)
    out = data.T[::-1]  # rows north->south
    with open(path, "w") as fh:
        fh.write(f"ncols {nx}\n")
        fh.write(f"nrows {ny}\n")
        fh.write(f"xllcorner {xllcorner:.9g}\n")
        fh.write(f"yllcorner {yllcorner:.9g}\n")
        if dx == dy:
            fh.write(f"cellsize {dx:.9g}\n")
        else:
            fh.write(f"dx {dx:.9g}\n")
            fh.write(f"dy {dy:.9g}\n")
        fh.write(f"NODATA_value {nodata:.9g}\n")
        for row in out:
            vals = np.where(np.isnan(row), nodata, row)
            fh.write(" ".join(f"{v:.9g}" for v in vals))
            fh.write("\n")
    return path
