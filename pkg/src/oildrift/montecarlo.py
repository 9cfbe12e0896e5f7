"""Monte-Carlo layer: many realizations, presence statistics, drift PMF,
spill centre, and parameter sampling.

Realizations are independent: each gets its own deterministic random
stream from (master seed, realization index) and its own parameter draw.
Aggregation is an ordered reduction over realization index, so results
are identical for any worker count.
"""

from __future__ import annotations

import json
import logging
import multiprocessing
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .config import ConfigError, ScenarioConfig, format_time, parse_time
from .engine import Simulation
from .oil import STATUS_ESCAPED

log = logging.getLogger(__name__)

__all__ = [
    "RealizationResult", "sample_parameters", "run_realization", "run_ensemble",
    "presence", "presence_probability", "presence_field", "presence_variance",
    "drift_pmf", "mean_drift_pmf", "mean_spill_centre", "write_ensemble_outputs",
]


@dataclass
class RealizationResult:
    realization: int
    seed: int
    sampled: dict
    times: np.ndarray  # snapshot times, epoch s
    column_volume: np.ndarray  # (nt, nx, ny), non-escaped volume per cell
    escaped_volume: np.ndarray  # (nt,)
    final_x: np.ndarray
    final_y: np.ndarray
    final_volume: np.ndarray
    final_status: np.ndarray
    audit: dict


def sample_parameters(sampling: dict, seed: int, realization: int,
                      oil_density: float) -> dict:
    """Independent uniform draws for the sampled scenario parameters.

    Start/end times are redrawn until ordered.  Missing entries are left
    unsampled (the scenario value is used).
    """
    gen = rng.stream(seed, realization, rng.PHASE_PARAMS)
    out: dict = {}

    def uniform(lo, hi):
        return float(gen.uniform(lo, hi)) if hi > lo else float(lo)

    if sampling.get("wind_advection"):
        out["wind_advection"] = uniform(*sampling["wind_advection"])
    if sampling.get("current_advection"):
        out["current_advection"] = uniform(*sampling["current_advection"])
    if sampling.get("c_smag"):
        out["c_smag"] = uniform(*sampling["c_smag"])
    t0w = sampling.get("t_start_window")
    tfw = sampling.get("t_end_window")
    if t0w and tfw:
        lo0, hi0 = parse_time(t0w[0]), parse_time(t0w[1])
        lof, hif = parse_time(tfw[0]), parse_time(tfw[1])
        for _ in range(1000):
            t0 = uniform(lo0, hi0)
            tf = uniform(lof, hif)
            if t0 < tf:
                break
        else:
            raise ConfigError("could not draw ordered t_start < t_end from the windows")
        out["t_start"] = t0
        out["t_end"] = tf
    if sampling.get("volume_tonnes"):
        tonnes = uniform(*sampling["volume_tonnes"])
        out["volume_m3"] = tonnes * 1000.0 / oil_density
    return out


def run_realization(scenario: ScenarioConfig, seed: int, realization: int,
                    sample: bool = True, out_dir=None) -> RealizationResult:
    sampling = scenario.raw["montecarlo"]["sampling"]
    sampled = (sample_parameters(sampling, seed, realization,
                                 scenario.raw["oil"]["density"]) if sample else {})
    sim = Simulation(scenario, seed=seed, realization=realization, sampled=sampled)
    writer = None
    if out_dir is not None:
        from .outputs import RunWriter

        writer = RunWriter(Path(out_dir) / f"real_{realization:04d}", sim,
                           write_rasters=False)
    result = sim.run(on_snapshot=writer.on_snapshot if writer else None)
    if writer is not None:
        writer.finish(result)
    times = np.array([s["time"] for s in result.snapshots])
    col = np.stack([s["column_volume"] for s in result.snapshots])
    esc = np.array([s["escaped_volume"] for s in result.snapshots])
    fin = result.final_snapshot
    return RealizationResult(
        realization=realization, seed=seed, sampled=sampled, times=times,
        column_volume=col, escaped_volume=esc, final_x=fin.x, final_y=fin.y,
        final_volume=fin.volume, final_status=fin.status, audit=fin.audit)


def _worker(args):
    scenario, seed, realization, sample, out_dir = args
    try:
        return run_realization(scenario, seed, realization, sample, out_dir)
    except Exception as exc:  # recorded; the ensemble may still proceed
        log.error("realization %d failed: %s", realization, exc)
        return exc


def run_ensemble(scenario: ScenarioConfig, seed: int, realizations: int,
                 workers: int = 0, sample: bool = True,
                 out_dir=None) -> list[RealizationResult]:
    """Run the ensemble; raises if more than 10% of realizations fail."""
    if realizations < 2:
        raise ValueError("an ensemble needs at least 2 realizations")
    jobs = [(scenario, seed, r, sample, out_dir) for r in range(realizations)]
    if workers == 1:
        results = [_worker(j) for j in jobs]
    else:
        procs = workers if workers > 0 else (multiprocessing.cpu_count() or 1)
        with multiprocessing.Pool(processes=procs) as pool:
            results = pool.map(_worker, jobs, chunksize=1)
    failures = [(i, r) for i, r in enumerate(results) if isinstance(r, Exception)]
    if failures:
        if len(failures) > 0.1 * realizations:
            raise RuntimeError(
                f"{len(failures)} of {realizations} realizations failed; first: "
                f"{failures[0][1]}")
        log.warning("%d of %d realizations failed; aggregating the rest",
                    len(failures), realizations)
    return [r for r in results if not isinstance(r, Exception)]


# ---------------------------------------------------------------- statistics
def presence(column_volume: np.ndarray, zeta: float,
             region: np.ndarray | None = None) -> int:
    """Binary presence over a spatio-temporal set for one realization.

    `column_volume` is the (nt, nx, ny) stack; `region` a boolean mask of
    the same shape (None = everywhere).  1 iff any selected cell-time
    holds volume above zeta.
    """
    if region is None:
        region = np.ones_like(column_volume, dtype=bool)
    if region.shape != column_volume.shape:
        raise ValueError("region mask shape must match the snapshot stack")
    if not region.any():
        raise ValueError("presence region is empty")
    return int(np.any(column_volume[region] > zeta))


def presence_probability(results: list[RealizationResult], zeta: float,
                         region: np.ndarray | None = None) -> float:
    if len(results) < 2:
        raise ValueError("presence probability needs at least 2 realizations")
    vals = [presence(r.column_volume, zeta, region) for r in results]
    return float(np.mean(vals))


def _indicator_stack(results: list[RealizationResult], zeta: float) -> np.ndarray:
    return np.stack([r.column_volume > zeta for r in results])  # (S, nt, nx, ny)


def presence_field(results: list[RealizationResult], zeta: float) -> np.ndarray:
    """Per cell-time presence probability, (nt, nx, ny)."""
    return _indicator_stack(results, zeta).mean(axis=0)


def presence_variance(results: list[RealizationResult], zeta: float):
    """Running per-cell sample variance of the presence indicator.

    Returns (variance_field, trace): the per cell-time sample variance
    over all realizations, and the Var_max trace indexed by realization
    count n = 2..S (max over all cell-times of the variance over the
    first n realizations).
    """
    ind = _indicator_stack(results, zeta).astype(np.float64)
    s = ind.shape[0]
    if s < 2:
        raise ValueError("presence variance needs at least 2 realizations")
    csum = np.cumsum(ind, axis=0)
    ns = np.arange(1, s + 1, dtype=np.float64).reshape((s,) + (1,) * (ind.ndim - 1))
    phat = csum / ns
    var = phat * (1.0 - phat) * ns / np.maximum(ns - 1.0, 1.0)
    trace = var.reshape(s, -1).max(axis=1)[1:]  # n = 2..S
    return var[-1], trace


def drift_pmf(x, y, volume, status, domain) -> tuple[np.ndarray, float]:
    """Per-cell volume fraction at one time; escaped mass reported apart.

    The PMF sums to (1 - escaped fraction) over the grid; PMF plus the
    escaped mass is 1 within float tolerance.
    """
    total = float(np.sum(volume))
    if total <= 0:
        raise ValueError("drift PMF undefined: zero total oil volume")
    pmf = np.zeros((domain.nx, domain.ny))
    kept = status != STATUS_ESCAPED
    if np.any(kept):
        i, j = domain.cell_index(np.asarray(x)[kept], np.asarray(y)[kept])
        np.add.at(pmf, (i, j), np.asarray(volume)[kept])
    pmf /= total
    escaped = float(np.sum(np.asarray(volume)[~kept])) / total
    return pmf, escaped


def mean_drift_pmf(results: list[RealizationResult], domain):
    """Average of the per-realization final-time PMFs."""
    acc = np.zeros((domain.nx, domain.ny))
    esc = 0.0
    for r in results:
        pmf, e = drift_pmf(r.final_x, r.final_y, r.final_volume, r.final_status, domain)
        acc += pmf
        esc += e
    n = len(results)
    return acc / n, esc / n


def mean_spill_centre(results: list[RealizationResult], domain,
                      time_index: int = -1) -> dict:
    """Mean over realizations of each realization's max-volume cell centre.

    Realizations with no oil on the grid at that time are excluded (and
    counted).  Ties resolve to the lexicographically smallest (i, j).
    """
    centres = []
    excluded = 0
    for r in results:
        col = r.column_volume[time_index]
        if col.max() <= 0.0:
            excluded += 1
            continue
        flat = int(np.argmax(col))  # first occurrence = smallest (i, j)
        i, j = np.unravel_index(flat, col.shape)
        centres.append(domain.cell_centre(int(i), int(j)))
    if not centres:
        raise ValueError("no realization had oil at the requested time")
    if excluded:
        log.warning("mean spill centre: %d realizations had no oil and were excluded",
                    excluded)
    arr = np.array(centres)
    mx, my = float(arr[:, 0].mean()), float(arr[:, 1].mean())
    lon, lat = domain.xy_to_lonlat(mx, my)
    return {"x": mx, "y": my, "lon": float(lon), "lat": float(lat),
            "realizations_used": len(centres), "realizations_excluded": excluded}


def write_ensemble_outputs(directory, results: list[RealizationResult], domain,
                           zeta: float) -> list[Path]:
    """Presence/variance/PMF rasters, the variance trace and centre report."""
    from .rasters import write_esri_ascii

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    artifacts = []

    prob = presence_field(results, zeta)
    path = directory / "presence_probability.asc"
    write_esri_ascii(path, prob[-1], 0.0, 0.0, domain.dx, domain.dy)
    artifacts.append(path)

    var_field, trace = presence_variance(results, zeta)
    path = directory / "presence_variance.asc"
    write_esri_ascii(path, var_field[-1], 0.0, 0.0, domain.dx, domain.dy)
    artifacts.append(path)

    path = directory / "variance_trace.csv"
    with open(path, "w") as fh:
        fh.write("realizations,var_max\n")
        for n, v in enumerate(trace, start=2):
            fh.write(f"{n},{float(v)!r}\n")
    artifacts.append(path)

    pmf, escaped = mean_drift_pmf(results, domain)
    path = directory / "drift_pmf_mean.asc"
    write_esri_ascii(path, pmf, 0.0, 0.0, domain.dx, domain.dy)
    artifacts.append(path)

    centre = mean_spill_centre(results, domain)
    centre["escaped_mass_mean"] = escaped
    centre["presence_threshold_m3"] = zeta
    centre["final_time"] = format_time(float(results[0].times[-1]))
    path = directory / "spill_centre.json"
    with open(path, "w") as fh:
        json.dump(centre, fh, indent=1, sort_keys=True)
        fh.write("\n")
    artifacts.append(path)
    return artifacts
