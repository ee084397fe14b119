"""Run metrics and CSV export.

Everything here is a pure function of an EventLog, so any number recomputed
from the exported per-event CSV matches the in-memory value (per-class delay
breakdowns excepted: the event schema does not carry service classes, so
they are available only for in-memory logs).

CSV formats
-----------
Per-event file, one row per event::

    frame,time_ms,event,cell,station,request,bits

Per-run summary file, one row per (scenario, policy, seed). Fixed columns
first, then a delay block (mean/p50/p95/max) per service class in declaration
order, then per-station throughput and longest-starvation columns in station
id order. All floats are written with repr precision so a reload reproduces
the in-memory record exactly.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .engine import EventLog
from .model import ServiceClass
from .schedulers import context_switches

CLASS_ORDER = [c.value for c in ServiceClass]
EVENT_HEADER = ["frame", "time_ms", "event", "cell", "station", "request",
                "bits"]


@dataclass(frozen=True)
class DelayStats:
    """End-to-end delay aggregate; zeros when nothing completed."""

    mean: float = 0.0
    p50: float = 0.0
    p95: float = 0.0
    max: float = 0.0


@dataclass
class MetricsRecord:
    """Per-run aggregates of the quantities the policies are compared on."""

    throughput_bps: float
    throughput_bps_by_station: Dict[int, float]
    delay_ms: DelayStats
    delay_ms_by_class: Dict[str, DelayStats]
    deadline_miss_ratio: float
    max_starvation_window_ms: Dict[int, float]
    context_switch_count: int
    offered_load_bps: float


def _percentile(sorted_vals: Sequence[float], q: float) -> float:
    """Nearest-rank percentile over an ascending sequence."""
    idx = max(0, math.ceil(q * len(sorted_vals)) - 1)
    return sorted_vals[idx]


def delay_stats(values: Iterable[float]) -> DelayStats:
    vals = sorted(values)
    if not vals:
        return DelayStats()
    return DelayStats(
        mean=sum(vals) / len(vals),
        p50=_percentile(vals, 0.50),
        p95=_percentile(vals, 0.95),
        max=vals[-1],
    )


def throughput(log: EventLog, duration_s: float) -> float:
    """Completed bits per second over the run."""
    if duration_s <= 0:
        raise ValueError(f"duration must be > 0, got {duration_s}")
    total = sum(e[6] for e in log.iter_events("completion"))
    return total / duration_s


def end_to_end_delay(log: EventLog) -> DelayStats:
    """Departure minus arrival over completed requests.

    Incomplete requests are excluded here; those already past their deadline
    show up in the miss ratio instead.
    """
    return delay_stats(
        e[1] - log.requests[e[5]].arrival_time
        for e in log.iter_events("completion"))


def starvation_window(log: EventLog, station_id: int) -> float:
    """Longest interval the station was backlogged but received no grant.

    Frame-granular: a frame counts toward a window when the station holds
    unserved bits after that frame's arrivals and ends the frame without a
    single granted bit.
    """
    return compute_starvation_windows(log)[station_id]


def compute_starvation_windows(log: EventLog) -> Dict[int, float]:
    arrived: Dict[int, Dict[int, int]] = {sid: {} for sid in log.station_ids}
    removed: Dict[int, Dict[int, int]] = {sid: {} for sid in log.station_ids}
    granted_in: Dict[int, set] = {sid: set() for sid in log.station_ids}
    for e in log.events:
        kind = e[2]
        sid = e[4]
        frame = e[0]
        if kind == "arrival":
            d = arrived[sid]
            d[frame] = d.get(frame, 0) + e[6]
        elif kind == "grant":
            d = removed[sid]
            d[frame] = d.get(frame, 0) + e[6]
            granted_in[sid].add(frame)
        elif kind == "deadline_miss" and log.drop_on_miss and e[6] > 0:
            d = removed[sid]
            d[frame] = d.get(frame, 0) + e[6]

    out: Dict[int, float] = {}
    delta = log.frame_duration_ms
    for sid in log.station_ids:
        backlog = 0
        current = 0
        best = 0
        arr = arrived[sid]
        rem = removed[sid]
        got = granted_in[sid]
        for f in range(log.total_frames):
            backlog += arr.get(f, 0)
            if backlog > 0 and f not in got:
                current += 1
                if current > best:
                    best = current
            else:
                current = 0
            backlog -= rem.get(f, 0)
        out[sid] = best * delta
    return out


def count_context_switches(log: EventLog) -> int:
    """Recount preemptive transitions from the grant trace alone.

    Always equals the number of context_switch events the engine logged;
    kept as an independent path so the two can be checked against each other.
    """
    return context_switches(
        ((e[4], e[5], e[6]) for e in log.iter_events("grant")),
        size_of={rid: r.size_bits for rid, r in log.requests.items()},
        cell_of=log.cell_of_station,
    )


def compute_metrics(log: EventLog) -> MetricsRecord:
    duration_s = log.duration_s
    offered_bits = 0
    total_requests = 0
    completed_bits_by_station: Dict[int, int] = {
        sid: 0 for sid in log.station_ids}
    delays: List[float] = []
    delays_by_class: Dict[str, List[float]] = {}
    misses = 0
    switches = 0

    requests = log.requests
    for e in log.events:
        kind = e[2]
        if kind == "arrival":
            offered_bits += e[6]
            total_requests += 1
        elif kind == "completion":
            rid = e[5]
            completed_bits_by_station[e[4]] += e[6]
            info = requests[rid]
            delay = e[1] - info.arrival_time
            delays.append(delay)
            cls = getattr(info, "service_class", None)
            key = cls.value if cls is not None else "unknown"
            delays_by_class.setdefault(key, []).append(delay)
        elif kind == "deadline_miss":
            misses += 1
        elif kind == "context_switch":
            switches += 1

    return MetricsRecord(
        throughput_bps=sum(completed_bits_by_station.values()) / duration_s,
        throughput_bps_by_station={
            sid: bits / duration_s
            for sid, bits in completed_bits_by_station.items()},
        delay_ms=delay_stats(delays),
        delay_ms_by_class={
            key: delay_stats(vals)
            for key, vals in sorted(delays_by_class.items())},
        deadline_miss_ratio=(misses / total_requests) if total_requests else 0.0,
        max_starvation_window_ms=compute_starvation_windows(log),
        context_switch_count=switches,
        offered_load_bps=offered_bits / duration_s,
    )


# ---------------------------------------------------------------------------
# CSV export / reload


def _guard(path: str, force: bool) -> None:
    if not force and os.path.exists(path):
        raise FileExistsError(
            f"{path} exists; pass force to overwrite")


def write_events_csv(log: EventLog, path: str, *, force: bool = False) -> str:
    _guard(path, force)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_HEADER)
        w.writerows(log.events)
    return path


def summary_columns(station_ids: Sequence[int]) -> List[str]:
    cols = ["scenario", "policy", "seed", "offered_load_bps",
            "throughput_bps", "delay_mean_ms", "delay_p50_ms",
            "delay_p95_ms", "delay_max_ms", "deadline_miss_ratio",
            "context_switch_count"]
    for cls in CLASS_ORDER:
        cols.extend(f"delay_{stat}_ms_{cls}"
                    for stat in ("mean", "p50", "p95", "max"))
    for sid in station_ids:
        cols.append(f"throughput_bps_station{sid}")
    for sid in station_ids:
        cols.append(f"max_starvation_ms_station{sid}")
    return cols


def summary_row(scenario: str, policy: str, seed: int, rec: MetricsRecord,
                station_ids: Sequence[int]) -> List:
    row: List = [scenario, policy, seed, rec.offered_load_bps,
                 rec.throughput_bps, rec.delay_ms.mean, rec.delay_ms.p50,
                 rec.delay_ms.p95, rec.delay_ms.max,
                 rec.deadline_miss_ratio, rec.context_switch_count]
    for cls in CLASS_ORDER:
        st = rec.delay_ms_by_class.get(cls, DelayStats())
        row.extend((st.mean, st.p50, st.p95, st.max))
    for sid in station_ids:
        row.append(rec.throughput_bps_by_station.get(sid, 0.0))
    for sid in station_ids:
        row.append(rec.max_starvation_window_ms.get(sid, 0.0))
    return row


def write_summary_csv(rows: List[List], station_ids: Sequence[int],
                      path: str, *, force: bool = False) -> str:
    _guard(path, force)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(summary_columns(station_ids))
        w.writerows(rows)
    return path


def parse_summary_csv(path: str) -> List[Dict[str, object]]:
    """Reload a summary file; numeric fields come back as int/float."""
    out: List[Dict[str, object]] = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row: Dict[str, object] = {}
            for key, val in raw.items():
                if key in ("scenario", "policy"):
                    row[key] = val
                elif key in ("seed", "context_switch_count"):
                    row[key] = int(val)
                else:
                    row[key] = float(val)
            out.append(row)
    return out


def record_from_summary(row: Dict[str, object],
                        station_ids: Sequence[int]) -> MetricsRecord:
    """Inverse of summary_row, for round-trip checks and re-reporting."""
    by_class = {}
    for cls in CLASS_ORDER:
        by_class[cls] = DelayStats(
            mean=row[f"delay_mean_ms_{cls}"], p50=row[f"delay_p50_ms_{cls}"],
            p95=row[f"delay_p95_ms_{cls}"], max=row[f"delay_max_ms_{cls}"])
    return MetricsRecord(
        throughput_bps=row["throughput_bps"],
        throughput_bps_by_station={
            sid: row[f"throughput_bps_station{sid}"] for sid in station_ids},
        delay_ms=DelayStats(mean=row["delay_mean_ms"], p50=row["delay_p50_ms"],
                            p95=row["delay_p95_ms"], max=row["delay_max_ms"]),
        delay_ms_by_class=by_class,
        deadline_miss_ratio=row["deadline_miss_ratio"],
        max_starvation_window_ms={
            sid: row[f"max_starvation_ms_station{sid}"] for sid in station_ids},
        context_switch_count=row["context_switch_count"],
        offered_load_bps=row["offered_load_bps"],
    )


def export_csv(log: EventLog, rec: MetricsRecord, out_dir: str,
               basename: str, *, force: bool = False) -> Tuple[str, str]:
    """Write one run's event file and one-row summary file."""
    os.makedirs(out_dir, exist_ok=True)
    events_path = os.path.join(out_dir, f"{basename}.events.csv")
    summary_path = os.path.join(out_dir, f"{basename}.summary.csv")
    write_events_csv(log, events_path, force=force)
    row = summary_row(log.scenario_name, log.policy_name, log.seed, rec,
                      log.station_ids)
    write_summary_csv([row], log.station_ids, summary_path, force=force)
    return events_path, summary_path


@dataclass(slots=True)
class ReqInfo:
    """Minimal request view reconstructed from an arrival row."""

    id: int
    station_id: int
    arrival_time: float
    size_bits: int
    service_class: Optional[ServiceClass] = None


def load_events_csv(path: str, *, frame_duration_ms: float = 5.0,
                    total_frames: Optional[int] = None) -> EventLog:
    """Rebuild a log from a per-event CSV for re-summarising.

    Service classes are not part of the event schema, so per-class delay
    stats of a reloaded log land under the single key "unknown".
    """
    events: List[tuple] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != EVENT_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for row in reader:
            events.append((int(row[0]), float(row[1]), row[2], int(row[3]),
                           int(row[4]), int(row[5]), int(row[6])))
    max_frame = max((e[0] for e in events), default=-1)
    log = EventLog(
        frame_duration_ms=frame_duration_ms,
        total_frames=total_frames if total_frames is not None else max_frame + 1,
        scenario_name=os.path.basename(path),
        events=events,
    )
    stations = sorted({e[4] for e in events})
    log.station_ids = stations
    log.cell_of_station = {e[4]: e[3] for e in events}
    for e in events:
        if e[2] == "arrival":
            log.requests[e[5]] = ReqInfo(
                id=e[5], station_id=e[4], arrival_time=e[1], size_bits=e[6])
    return log


def format_table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Aligned text table for terminal summaries."""
    def fmt(v) -> str:
        if isinstance(v, float):
            return f"{v:.3f}"
        return str(v)

    cells = [[fmt(v) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    line = " | ".join(h.ljust(w) for h, w in zip(headers, widths))
    sep = "-+-".join("-" * w for w in widths)
    body = [" | ".join(c.rjust(w) for c, w in zip(row, widths))
            for row in cells]
    return "\n".join([line, sep] + body)
