"""Command-line front end.

Subcommands::

    uplinksim run      --scenario <name|path> [--policy a,b] [--seed 1,2]
                       [--frames N] [--out DIR] [--force] [--drop-on-miss]
    uplinksim validate <name|path>
    uplinksim report   <events.csv> [...] [--frame-duration-ms F] [--out DIR]

``run`` executes the cross product of policies and seeds, writes one
per-event CSV per run plus a combined ``summary.csv``, and prints the summary
table. ``validate`` checks a config without running and prints the resolved
effective configuration. ``report`` recomputes global metrics from existing
per-event CSVs.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 internal
invariant breach.

Scenario file schema (YAML)
---------------------------
::

    name: demo                     # optional, defaults to file stem
    frame_duration_ms: 5.0
    total_frames: 12000
    seed: 1
    scheduler: edf                 # rr | wrr | edf | ssbpf_edf | hedf
    ewma_alpha: 0.1                # optional, default 0.1
    drop_on_miss: false            # optional, default false
    cells:
      - id: 0
        capacity_bits_per_frame: 1200
        stations:
          - id: 0
            capacity_bits_per_frame: 1200
            wrr_weight: 2          # optional; default scales with capacity
            traffic:
              - class: rtPS        # UGS | ertPS | rtPS | nrtPS | BE
                pattern: constant_rate   # or poisson
                rate_bits_per_s: 64000
                packet_size_bits: 800
                start_ms: 0        # optional, default 0
                stop_ms: 60000     # optional, default run end

The builtin names ``canonical`` (7 cells x 2 stations, rtPS plus best-effort
background) and ``starvation`` (one overloaded real-time station next to a
sparse best-effort station) need no file.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

import yaml

from .engine import InvariantError, run
from .metrics import (format_table, load_events_csv, summary_columns,
                      summary_row, write_events_csv, write_summary_csv,
                      compute_metrics)
from .model import (CLASS_BY_NAME, Cell, ConfigError, Scenario,
                    SubscriberStation, canonical_scenario, validate_scenario)
from .schedulers import POLICY_NAMES
from .traffic import PATTERNS, TrafficSpec, starvation_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INVARIANT = 4

BUILTIN_SCENARIOS = {
    "canonical": canonical_scenario,
    "starvation": starvation_scenario,
}


def _require(mapping: dict, key: str, path: str, errors: List[str]):
    if key not in mapping:
        errors.append(f"{path}.{key}: missing required key")
        return None
    return mapping[key]


def scenario_from_dict(doc: dict, default_name: str) -> Scenario:
    """Build a Scenario from a parsed config tree; raises ConfigError with
    every structural problem found."""
    errors: List[str] = []
    if not isinstance(doc, dict):
        raise ConfigError(["config: top level must be a mapping"])

    known = {"name", "frame_duration_ms", "total_frames", "seed", "scheduler",
             "ewma_alpha", "drop_on_miss", "cells"}
    for key in doc:
        if key not in known:
            errors.append(f"config.{key}: unknown key")

    name = doc.get("name", default_name)
    frame_ms = _require(doc, "frame_duration_ms", "config", errors)
    total_frames = _require(doc, "total_frames", "config", errors)
    cells_doc = _require(doc, "cells", "config", errors) or []

    cells: List[Cell] = []
    stations: List[SubscriberStation] = []
    specs: Dict[int, Tuple[TrafficSpec, ...]] = {}
    horizon = None
    try:
        horizon = float(frame_ms) * int(total_frames)
    except (TypeError, ValueError):
        pass

    for i, cdoc in enumerate(cells_doc):
        cpath = f"cells[{i}]"
        cid = _require(cdoc, "id", cpath, errors)
        ccap = _require(cdoc, "capacity_bits_per_frame", cpath, errors)
        if cid is None or ccap is None:
            continue
        sids = []
        for j, sdoc in enumerate(cdoc.get("stations", [])):
            spath = f"{cpath}.stations[{j}]"
            sid = _require(sdoc, "id", spath, errors)
            scap = sdoc.get("capacity_bits_per_frame", ccap)
            if sid is None:
                continue
            sids.append(sid)
            stations.append(SubscriberStation(
                id=sid, cell_id=cid, capacity_c=int(scap),
                wrr_weight=sdoc.get("wrr_weight")))
            st_specs = []
            for k, tdoc in enumerate(sdoc.get("traffic", [])):
                tpath = f"{spath}.traffic[{k}]"
                cls_name = _require(tdoc, "class", tpath, errors)
                pattern = _require(tdoc, "pattern", tpath, errors)
                rate = _require(tdoc, "rate_bits_per_s", tpath, errors)
                size = _require(tdoc, "packet_size_bits", tpath, errors)
                if None in (cls_name, pattern, rate, size):
                    continue
                if cls_name not in CLASS_BY_NAME:
                    errors.append(f"{tpath}.class: unknown class {cls_name!r}, "
                                  f"expected one of {sorted(CLASS_BY_NAME)}")
                    continue
                if pattern not in PATTERNS:
                    errors.append(f"{tpath}.pattern: unknown pattern "
                                  f"{pattern!r}, expected one of {PATTERNS}")
                    continue
                stop_default = horizon if horizon is not None else float("inf")
                st_specs.append(TrafficSpec(
                    service_class=CLASS_BY_NAME[cls_name],
                    pattern=pattern,
                    rate_bits_per_s=float(rate),
                    packet_size_bits=int(size),
                    start_time=float(tdoc.get("start_ms", 0.0)),
                    stop_time=float(tdoc.get("stop_ms", stop_default))))
            specs[sid] = tuple(st_specs)
        cells.append(Cell(id=cid, base_station_capacity=int(ccap),
                          station_ids=sids))

    if errors:
        raise ConfigError(errors)
    return Scenario(
        name=str(name),
        cells=cells,
        stations=stations,
        frame_duration=float(frame_ms),
        total_frames=int(total_frames),
        traffic_specs=specs,
        seed=int(doc.get("seed", 1)),
        scheduler_name=str(doc.get("scheduler", "edf")),
        ewma_alpha=float(doc.get("ewma_alpha", 0.1)),
        drop_on_miss=bool(doc.get("drop_on_miss", False)),
    )


def scenario_to_dict(sc: Scenario) -> dict:
    """Resolved effective configuration, ready for YAML dumping."""
    cells = []
    by_cell: Dict[int, List[SubscriberStation]] = {}
    for st in sc.stations:
        by_cell.setdefault(st.cell_id, []).append(st)
    for cell in sc.cells:
        sdocs = []
        for st in by_cell.get(cell.id, []):
            tdocs = []
            for spec in sc.traffic_specs.get(st.id, ()):
                tdocs.append({
                    "class": spec.service_class.value,
                    "pattern": spec.pattern,
                    "rate_bits_per_s": spec.rate_bits_per_s,
                    "packet_size_bits": spec.packet_size_bits,
                    "start_ms": spec.start_time,
                    "stop_ms": spec.stop_time,
                })
            sdoc = {"id": st.id, "capacity_bits_per_frame": st.capacity_c,
                    "traffic": tdocs}
            if st.wrr_weight is not None:
                sdoc["wrr_weight"] = st.wrr_weight
            sdocs.append(sdoc)
        cells.append({"id": cell.id,
                      "capacity_bits_per_frame": cell.base_station_capacity,
                      "stations": sdocs})
    return {
        "name": sc.name,
        "frame_duration_ms": sc.frame_duration,
        "total_frames": sc.total_frames,
        "seed": sc.seed,
        "scheduler": sc.scheduler_name,
        "ewma_alpha": sc.ewma_alpha,
        "drop_on_miss": sc.drop_on_miss,
        "cells": cells,
    }


def load_scenario(ref: str, *, seed: Optional[int] = None,
                  scheduler: Optional[str] = None,
                  total_frames: Optional[int] = None,
                  drop_on_miss: Optional[bool] = None) -> Scenario:
    """Resolve a builtin name or YAML path, with optional overrides."""
    builder = BUILTIN_SCENARIOS.get(ref)
    if builder is not None:
        kwargs = {}
        if seed is not None:
            kwargs["seed"] = seed
        if scheduler is not None:
            kwargs["scheduler_name"] = scheduler
        if total_frames is not None:
            kwargs["total_frames"] = total_frames
        sc = builder(**kwargs)
    else:
        if not os.path.exists(ref):
            raise ConfigError(
                [f"scenario: no builtin or file named {ref!r} "
                 f"(builtins: {sorted(BUILTIN_SCENARIOS)})"])
        try:
            with open(ref) as fh:
                doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError([f"scenario file {ref}: {exc}"]) from exc
        sc = scenario_from_dict(doc, os.path.splitext(os.path.basename(ref))[0])
        if seed is not None:
            sc = replace(sc, seed=seed)
        if scheduler is not None:
            sc = replace(sc, scheduler_name=scheduler)
        if total_frames is not None:
            sc = replace(sc, total_frames=total_frames)
    if drop_on_miss is not None:
        sc = replace(sc, drop_on_miss=drop_on_miss)
    violations = validate_scenario(sc)
    if violations:
        raise ConfigError(violations)
    return sc


def _parse_list(value: str) -> List[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def cmd_run(args) -> int:
    policies = _parse_list(args.policy) if args.policy else None
    seeds = [int(s) for s in _parse_list(args.seed)] if args.seed else None
    if policies:
        unknown = [p for p in policies if p not in POLICY_NAMES]
        if unknown:
            raise ConfigError(
                [f"policy: unknown {unknown}, expected from {POLICY_NAMES}"])

    base = load_scenario(args.scenario, total_frames=args.frames,
                         drop_on_miss=args.drop_on_miss or None)
    if policies is None:
        policies = [base.scheduler_name]
    if seeds is None:
        seeds = [base.seed]

    os.makedirs(args.out, exist_ok=True)
    rows = []
    station_ids = [s.id for s in base.stations]
    for policy in policies:
        for seed in seeds:
            sc = load_scenario(args.scenario, seed=seed, scheduler=policy,
                               total_frames=args.frames,
                               drop_on_miss=args.drop_on_miss or None)
            log, rec = run(sc)
            events_path = os.path.join(
                args.out, f"{sc.name}_{policy}_seed{seed}.events.csv")
            write_events_csv(log, events_path, force=args.force)
            rows.append(summary_row(sc.name, policy, seed, rec, station_ids))
            print(f"wrote {events_path}")
    summary_path = os.path.join(args.out, "summary.csv")
    write_summary_csv(rows, station_ids, summary_path, force=args.force)
    print(f"wrote {summary_path}")

    head = ["scenario", "policy", "seed", "throughput_bps", "delay_mean_ms",
            "delay_p95_ms", "deadline_miss_ratio", "context_switch_count"]
    cols = summary_columns(station_ids)
    idx = [cols.index(h) for h in head]
    print(format_table(head, [[r[i] for i in idx] for r in rows]))
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        sc = load_scenario(args.scenario)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"invalid: {v}", file=sys.stderr)
        return EXIT_CONFIG
    print(yaml.safe_dump(scenario_to_dict(sc), sort_keys=False), end="")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = []
    station_ids: List[int] = []
    for path in args.events:
        if not os.path.exists(path):
            raise ConfigError([f"report: no such file {path}"])
        log = load_events_csv(path, frame_duration_ms=args.frame_duration_ms,
                              total_frames=args.frames)
        rec = compute_metrics(log)
        station_ids = sorted(set(station_ids) | set(log.station_ids))
        rows.append((os.path.basename(path), rec, log.station_ids))
    head = ["file", "throughput_bps", "delay_mean_ms", "delay_p95_ms",
            "deadline_miss_ratio", "context_switch_count"]
    table = [[name, rec.throughput_bps, rec.delay_ms.mean, rec.delay_ms.p95,
              rec.deadline_miss_ratio, rec.context_switch_count]
             for name, rec, _ in rows]
    print(format_table(head, table))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        out_rows = [summary_row(name, "", 0, rec, station_ids)
                    for name, rec, _ in rows]
        path = os.path.join(args.out, "report_summary.csv")
        write_summary_csv(out_rows, station_ids, path, force=args.force)
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="uplinksim",
        description="Frame-based uplink scheduling simulator")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="simulate policies x seeds on a scenario")
    pr.add_argument("--scenario", required=True,
                    help="builtin name (canonical, starvation) or YAML path")
    pr.add_argument("--policy", help="comma list from: " + ", ".join(POLICY_NAMES))
    pr.add_argument("--seed", help="comma list of integer seeds")
    pr.add_argument("--frames", type=int, help="override total_frames")
    pr.add_argument("--out", default="out", help="output directory")
    pr.add_argument("--force", action="store_true",
                    help="overwrite existing output files")
    pr.add_argument("--drop-on-miss", action="store_true",
                    help="drop requests at their first missed frame boundary")
    pr.set_defaults(func=cmd_run)

    pv = sub.add_parser("validate", help="check a scenario without running")
    pv.add_argument("scenario", help="builtin name or YAML path")
    pv.set_defaults(func=cmd_validate)

    pp = sub.add_parser("report", help="re-summarize existing event CSVs")
    pp.add_argument("events", nargs="+", help="per-event CSV files")
    pp.add_argument("--frame-duration-ms", type=float, default=5.0)
    pp.add_argument("--frames", type=int, default=None)
    pp.add_argument("--out", help="also write a summary CSV here")
    pp.add_argument("--force", action="store_true")
    pp.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvariantError as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
