"""Command-line interface.

Subcommands: ``simulate`` (one realization), ``monte-carlo`` (ensemble
with parameter sampling and aggregation), ``analyze`` (recompute
statistics from stored run directories), ``validate`` (load a config and
echo the effective values).

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

log = logging.getLogger("oildrift")


def _add_common(p: argparse.ArgumentParser, needs_config: bool = True):
    if needs_config:
        p.add_argument("--config", required=True, help="scenario file (.toml or .json)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config key (dotted path), repeatable")
    p.add_argument("--output", default=None, help="output directory")
    p.add_argument("--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="oildrift",
        description="Coupled ocean/wind/wave and Lagrangian oil-drift simulator.",
        epilog="Config keys and defaults: see `oildrift validate --help-keys`.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a single realization")
    _add_common(s)
    s.add_argument("--seed", type=int, default=None, help="master seed")
    s.add_argument("--dump-flow", action="store_true",
                   help="write per-step u/v/p/divergence rasters")

    m = sub.add_parser("monte-carlo", help="run an ensemble with parameter sampling")
    _add_common(m)
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--realizations", type=int, default=None)
    m.add_argument("--workers", type=int, default=None,
                   help="worker processes (0 = all cores)")
    m.add_argument("--keep-runs", action="store_true",
                   help="keep per-realization snapshot directories")

    a = sub.add_parser("analyze", help="recompute statistics from stored runs")
    a.add_argument("--runs", required=True,
                   help="monte-carlo output directory (with real_* subdirs)")
    a.add_argument("--config", required=True, help="the scenario the runs used")
    a.add_argument("--zeta", type=float, default=0.0, help="presence threshold, m^3")
    a.add_argument("--region", default=None, metavar="I0,J0,I1,J1",
                   help="cell box for the presence probability (default: whole grid)")
    a.add_argument("--output", default=None)
    a.add_argument("--verbose", action="store_true")

    v = sub.add_parser("validate", help="validate a config and echo effective values")
    _add_common(v)
    v.add_argument("--help-keys", action="store_true",
                   help="list every config key with its default")
    return p


def _overrides_dict(pairs):
    from .config import parse_override

    merged: dict = {}

    def deep_update(dst, src):
        for key, val in src.items():
            if isinstance(val, dict) and isinstance(dst.get(key), dict):
                deep_update(dst[key], val)
            else:
                dst[key] = val

    for pair in pairs:
        deep_update(merged, parse_override(pair))
    return merged


def _output_dir(args, default_name: str) -> Path:
    if args.output:
        return Path(args.output)
    env = os.environ.get("SCEM_OUTPUT_DIR")
    if env:
        return Path(env) / default_name
    return Path("runs") / default_name


def cmd_simulate(args) -> int:
    from .config import load_config
    from .engine import Simulation
    from .outputs import RunWriter

    scenario = load_config(args.config, _overrides_dict(args.overrides))
    sim = Simulation(scenario, seed=args.seed)
    out = _output_dir(args, "simulate")
    writer = RunWriter(out, sim)
    dump_dir = None
    if args.dump_flow:
        dump_dir = out / "flow"
        dump_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = sim.run(on_snapshot=writer.on_snapshot, dump_flow_dir=dump_dir)
    except Exception:
        # flush whatever made it to disk under a partial manifest
        from .outputs import write_manifest

        write_manifest(out, writer.artifacts, partial=True)
        raise
    if dump_dir is not None:
        writer.artifacts.extend(sorted(dump_dir.glob("*.asc")))
    manifest = writer.finish(result)
    audit = result.summary["volume_audit"]
    log.info("simulate: %d steps, %d particles, released %.3f m^3, outputs in %s",
             result.summary["steps"], audit["released_count"],
             audit["released_volume_m3"], out)
    print(manifest)
    return 0


def cmd_monte_carlo(args) -> int:
    from .config import load_config
    from .engine import Simulation
    from .montecarlo import run_ensemble, write_ensemble_outputs
    from .outputs import write_manifest

    scenario = load_config(args.config, _overrides_dict(args.overrides))
    mc = scenario.raw["montecarlo"]
    seed = scenario.raw["seed"] if args.seed is None else args.seed
    realizations = mc["realizations"] if args.realizations is None else args.realizations
    workers = mc["workers"] if args.workers is None else args.workers
    out = _output_dir(args, "monte-carlo")
    out.mkdir(parents=True, exist_ok=True)

    results = run_ensemble(scenario, seed, realizations, workers,
                           out_dir=out if args.keep_runs else None)
    domain = Simulation(scenario, seed=seed).domain
    artifacts = write_ensemble_outputs(out, results, domain,
                                       mc["presence_threshold_m3"])
    summary = {
        "seed": seed,
        "realizations": realizations,
        "succeeded": len(results),
        "sampled_parameters": [r.sampled for r in results],
        "effective_config": scenario.echo(),
    }
    summary_path = out / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    if args.keep_runs:
        for r in results:
            sub = out / f"real_{r.realization:04d}"
            # per-realization summaries hold wall-clock timings; their own
            # manifests list them unchecksummed, so skip them here too
            artifacts.extend(p for p in sub.rglob("*")
                             if p.is_file() and p.name != "summary.json")
    manifest = write_manifest(out, artifacts, summary_path)
    log.info("monte-carlo: %d/%d realizations aggregated into %s",
             len(results), realizations, out)
    print(manifest)
    return 0


def cmd_analyze(args) -> int:
    from .config import ConfigError, load_config
    from .engine import Simulation
    from .montecarlo import (RealizationResult, mean_spill_centre, presence_field,
                             presence_probability, presence_variance)
    from .outputs import read_particles_csv
    from .oil import STATUS_ESCAPED

    scenario = load_config(args.config)
    domain = Simulation(scenario).domain
    root = Path(args.runs)
    run_dirs = sorted(root.glob("real_*"))
    if not run_dirs:
        raise ConfigError(f"no real_* run directories under {root}")

    results = []
    for k, rd in enumerate(run_dirs):
        snaps = sorted(rd.glob("snap_*.csv"))
        if not snaps:
            raise ConfigError(f"{rd}: no snapshots found")
        cols = []
        escs = []
        for path in snaps:
            data = read_particles_csv(path)
            col = np.zeros((domain.nx, domain.ny))
            kept = data["status"] != STATUS_ESCAPED
            if np.any(kept):
                i, j = domain.cell_index(data["x"][kept], data["y"][kept])
                np.add.at(col, (i, j), data["volume"][kept])
            cols.append(col)
            escs.append(float(np.sum(data["volume"][~kept])))
        last = read_particles_csv(snaps[-1])
        results.append(RealizationResult(
            realization=k, seed=0, sampled={}, times=np.arange(len(snaps), dtype=float),
            column_volume=np.stack(cols), escaped_volume=np.array(escs),
            final_x=last["x"], final_y=last["y"], final_volume=last["volume"],
            final_status=last["status"], audit={}))

    region = None
    if args.region:
        i0, j0, i1, j1 = (int(v) for v in args.region.split(","))
        if not (0 <= i0 <= i1 < domain.nx and 0 <= j0 <= j1 < domain.ny):
            raise ConfigError("analysis region lies outside the domain grid")
        region = np.zeros_like(results[0].column_volume, dtype=bool)
        region[:, i0:i1 + 1, j0:j1 + 1] = True

    report = {
        "runs": len(results),
        "zeta_m3": args.zeta,
        "presence_probability": presence_probability(results, args.zeta, region),
        "var_max_final": float(presence_variance(results, args.zeta)[1][-1]),
        "mean_spill_centre": mean_spill_centre(results, domain),
        "presence_field_max": float(presence_field(results, args.zeta).max()),
    }
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return 0


def cmd_validate(args) -> int:
    from .config import DEFAULTS, load_config

    if args.help_keys:
        print(json.dumps(DEFAULTS, indent=1, sort_keys=True, default=str))
        return 0
    scenario = load_config(args.config, _overrides_dict(args.overrides))
    print(json.dumps(scenario.echo(), indent=1, sort_keys=True))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    from .config import ConfigError

    handler = {"simulate": cmd_simulate, "monte-carlo": cmd_monte_carlo,
               "analyze": cmd_analyze, "validate": cmd_validate}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except Exception as exc:  # runtime failure
        log.error("runtime error: %s", exc)
        if getattr(args, "verbose", False):
            raise
        return 3


if __name__ == "__main__":
    sys.exit(main())
