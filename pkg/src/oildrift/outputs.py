"""Result serialization: particle snapshots, rasters, summary, manifest.

Every run directory holds one particles CSV per snapshot
(``snap_<iso-time>.csv``), a thickness raster per snapshot, a
``summary.json`` (volume audit, per-phase timings, seeds, the effective
configuration echo), a plain-text phase trace, and a ``manifest.json``
listing every artifact with its sha256.  The summary contains wall-clock
timings, so the manifest records it without a checksum; everything else
is bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .engine import RunResult, Snapshot, Simulation
from .oil import STATUS_NAMES
from .rasters import write_esri_ascii

__all__ = ["RunWriter", "write_manifest", "sha256_file", "read_particles_csv"]

PARTICLE_COLUMNS = "time,id,x,y,z,lon,lat,volume_m3,age_s,status"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _fname_time(iso: str) -> str:
    return iso.replace(":", "").replace("-", "")


class RunWriter:
    """Streams one realization's outputs into a directory."""

    def __init__(self, directory, simulation: Simulation, write_rasters: bool = True):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.sim = simulation
        self.write_rasters = write_rasters
        self.artifacts: list[Path] = []

    def on_snapshot(self, snap: Snapshot) -> None:
        dom = self.sim.domain
        stamp = _fname_time(snap.iso)
        csv_path = self.dir / f"snap_{stamp}.csv"
        lon, lat = dom.xy_to_lonlat(snap.x, snap.y)
        cols = [snap.x, snap.y, snap.z, lon, lat, snap.volume, snap.age]
        with open(csv_path, "w") as fh:
            fh.write(PARTICLE_COLUMNS + "\n")
            for k in range(len(snap.x)):
                vals = ",".join(repr(float(c[k])) for c in cols)
                fh.write(f"{snap.iso},{k},{vals},"
                         f"{STATUS_NAMES[int(snap.status[k])]}\n")
        self.artifacts.append(csv_path)
        if self.write_rasters:
            r_path = self.dir / f"thickness_{stamp}.asc"
            write_esri_ascii(r_path, snap.thickness.thickness, 0.0, 0.0, dom.dx, dom.dy)
            self.artifacts.append(r_path)

    def finish(self, result: RunResult) -> Path:
        trace_path = self.dir / "trace.log"
        with open(trace_path, "w") as fh:
            for step, phase in result.trace:
                fh.write(f"step={step} phase={phase}\n")
        self.artifacts.append(trace_path)

        summary_path = self.dir / "summary.json"
        with open(summary_path, "w") as fh:
            json.dump(result.summary, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return write_manifest(self.dir, self.artifacts, summary_path)


def write_manifest(directory, artifacts, summary_path=None,
                   partial: bool = False) -> Path:
    entries = []
    root = Path(directory)
    for path in sorted(set(Path(p) for p in artifacts)):
        entries.append({"path": str(path.relative_to(root)),
                        "sha256": sha256_file(path)})
    doc = {"artifacts": entries}
    if summary_path is not None:
        # summary carries wall-clock timings; list it unchecksummed so
        # identical runs produce identical manifests
        doc["summary"] = {"path": str(Path(summary_path).relative_to(root)),
                          "sha256": None}
    if partial:
        doc["partial"] = True
    out = root / "manifest.json"
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return out


def read_particles_csv(path):
    """Read a snapshot CSV back into arrays (exact float round-trip)."""
    xs, ys, zs, vols, ages, stats = [], [], [], [], [], []
    code = {name: num for num, name in STATUS_NAMES.items()}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != PARTICLE_COLUMNS:
            raise ValueError(f"{path}: unexpected snapshot header {header!r}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            xs.append(float(parts[2]))
            ys.append(float(parts[3]))
            zs.append(float(parts[4]))
            vols.append(float(parts[7]))
            ages.append(float(parts[8]))
            stats.append(code[parts[9]])
    return {
        "x": np.array(xs), "y": np.array(ys), "z": np.array(zs),
        "volume": np.array(vols), "age": np.array(ages),
        "status": np.array(stats, dtype=np.int8),
    }
