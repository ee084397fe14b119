"""Deterministic frame-stepped simulation loop.

Each frame, in order: (1) inject the arrivals whose time falls inside the
frame (at the frame start, so a request can be served in its arrival frame),
(2) let every cell's policy allocate its capacity, (3) apply the grants,
(4) record completions and deadline misses at the closing frame boundary,
(5) fold the frame's served bits into each station's smoothed throughput.

Event records are 7-tuples ``(frame, time_ms, event, cell, station, request,
bits)``. Arrivals carry their true arrival time; grant, completion,
deadline_miss and context_switch records are stamped at the closing boundary
of their frame, which keeps the log time-ordered. The ``bits`` column holds
the request size for arrivals and completions, the granted bits for grants,
the unserved remainder for deadline misses, and 0 for context switches.

A run never mutates its Scenario: stations are cloned and requests are
regenerated from the scenario seed, so running the same scenario twice gives
byte-identical logs.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .model import (ConfigError, Grant, Request, Scenario, SubscriberStation,
                    validate_scenario)
from .schedulers import make_policy
from .traffic import build_requests

EVENT_TYPES = ("arrival", "grant", "completion", "deadline_miss",
               "context_switch")


class InvariantError(Exception):
    """An internal consistency check failed; the run is aborted."""


@dataclass(slots=True)
class SimClock:
    """Frame counter; ``now`` is exactly frame_index * frame_duration."""

    frame_duration_ms: float
    frame_index: int = 0

    @property
    def now(self) -> float:
        return self.frame_index * self.frame_duration_ms

    def advance(self) -> None:
        self.frame_index += 1


@dataclass
class EventLog:
    """Complete, time-ordered record of one run."""

    frame_duration_ms: float
    total_frames: int
    scenario_name: str = ""
    policy_name: str = ""
    seed: int = 0
    drop_on_miss: bool = False
    station_ids: List[int] = field(default_factory=list)
    cell_of_station: Dict[int, int] = field(default_factory=dict)
    cell_capacity: Dict[int, int] = field(default_factory=dict)
    events: List[tuple] = field(default_factory=list)
    # Request objects by id; for logs reloaded from CSV this holds the
    # lighter ReqInfo view (see metrics.load_events_csv).
    requests: Dict[int, object] = field(default_factory=dict)
    # Smoothed per-station throughput at end of run (bits/frame).
    final_station_throughput: Dict[int, float] = field(default_factory=dict)

    @property
    def duration_s(self) -> float:
        return self.total_frames * self.frame_duration_ms / 1000.0

    def iter_events(self, event_type: str):
        return (e for e in self.events if e[2] == event_type)


def deadline_policy(r: Request, now: float) -> str:
    """"missed" once ``now`` is strictly past the deadline, else "pending".

    Missed requests stay queued and are still served late; the engine
    records the miss once, at the first frame boundary past the deadline.
    """
    return "missed" if now > r.deadline else "pending"


def apply_grant(r: Request, g: Grant) -> bool:
    """Advance a request by one grant; True when it completes.

    Over-grants abort the run: a policy that emits one is buggy and
    continuing would corrupt every downstream metric.
    """
    rem = r.size_bits - r.served_bits
    if g.granted_bits <= 0 or g.granted_bits > rem:
        raise InvariantError(
            f"grant of {g.granted_bits} bits to request {r.id} with "
            f"{rem} bits remaining (frame {g.frame_index})")
    if r.dropped:
        raise InvariantError(f"grant to dropped request {r.id}")
    if g.station_id != r.station_id:
        raise InvariantError(
            f"grant routed to station {g.station_id} for request {r.id} "
            f"of station {r.station_id}")
    r.served_bits += g.granted_bits
    return r.served_bits == r.size_bits


def simulate(scenario: Scenario, requests: List[Request]) -> EventLog:
    """Run the frame loop over an explicit, time-ordered request list."""
    delta = scenario.frame_duration
    n_frames = scenario.total_frames
    stations = scenario.fresh_stations()
    by_id: Dict[int, SubscriberStation] = {s.id: s for s in stations}
    cell_of: Dict[int, int] = {s.id: s.cell_id for s in stations}
    cells = scenario.cells

    log = EventLog(
        frame_duration_ms=delta,
        total_frames=n_frames,
        scenario_name=scenario.name,
        policy_name=scenario.scheduler_name,
        seed=scenario.seed,
        drop_on_miss=scenario.drop_on_miss,
        station_ids=[s.id for s in stations],
        cell_of_station=dict(cell_of),
        cell_capacity={c.id: c.base_station_capacity for c in cells},
    )
    ev = log.events.append
    req_index = log.requests

    buckets: List[List[Request]] = [[] for _ in range(n_frames)]
    for r in requests:
        f = int(r.arrival_time // delta)
        if 0 <= f < n_frames:
            buckets[f].append(r)

    policies = {c.id: make_policy(scenario.scheduler_name, c, by_id, delta)
                for c in cells}
    policy_of_station = {sid: policies[cid] for sid, cid in cell_of.items()}

    alpha = scenario.ewma_alpha
    drop = scenario.drop_on_miss
    miss_heap: List[Tuple[float, int, Request]] = []
    completed_at: Dict[int, float] = {}
    # Per cell: (last granted request, was it incomplete after that grant).
    prev_grant: Dict[int, Tuple[Request, bool]] = {}
    served_frame: Dict[int, int] = {}

    clock = SimClock(delta)
    for f in range(n_frames):
        now = clock.now
        boundary = now + delta

        for r in buckets[f]:
            st = by_id[r.station_id]
            st.queue.append(r)
            req_index[r.id] = r
            policy_of_station[r.station_id].on_arrival(r)
            ev((f, r.arrival_time, "arrival", st.cell_id, r.station_id,
                r.id, r.size_bits))
            heapq.heappush(miss_heap, (r.deadline, r.id, r))

        for cell in cells:
            grants = policies[cell.id].allocate_frame(
                f, now, cell.base_station_capacity)
            if not grants:
                continue
            total = 0
            cid = cell.id
            for g in grants:
                r = req_index[g.request_id]
                total += g.granted_bits
                prev = prev_grant.get(cid)
                if prev is not None and prev[0] is not r and prev[1]:
                    p = prev[0]
                    ev((f, boundary, "context_switch", cid, p.station_id,
                        p.id, 0))
                done = apply_grant(r, g)
                served_frame[r.station_id] = (
                    served_frame.get(r.station_id, 0) + g.granted_bits)
                ev((f, boundary, "grant", cid, g.station_id, r.id,
                    g.granted_bits))
                prev_grant[cid] = (r, not done)
                if done:
                    completed_at[r.id] = boundary
                    ev((f, boundary, "completion", cid, r.station_id, r.id,
                        r.size_bits))
                    q = by_id[r.station_id].queue
                    if q and q[0] is r:
                        q.popleft()
                    else:
                        q.remove(r)
            if total > cell.base_station_capacity:
                raise InvariantError(
                    f"cell {cid} granted {total} bits in frame {f}, "
                    f"capacity {cell.base_station_capacity}")

        while miss_heap and miss_heap[0][0] < boundary:
            _, _, r = heapq.heappop(miss_heap)
            done_at = completed_at.get(r.id)
            if done_at is not None and done_at <= r.deadline:
                continue
            rem = r.size_bits - r.served_bits
            ev((f, boundary, "deadline_miss", cell_of[r.station_id],
                r.station_id, r.id, rem))
            if drop and rem > 0:
                r.dropped = True
                q = by_id[r.station_id].queue
                if q and q[0] is r:
                    q.popleft()
                else:
                    q.remove(r)
                policy_of_station[r.station_id].on_drop(r)

        for st in stations:
            st.historical_throughput += alpha * (
                served_frame.get(st.id, 0) - st.historical_throughput)
        served_frame.clear()
        clock.advance()

    log.final_station_throughput = {
        s.id: s.historical_throughput for s in stations}
    return log


def run(scenario: Scenario, *, validate: bool = True):
    """Simulate a scenario end to end; returns (EventLog, MetricsRecord)."""
    if validate:
        violations = validate_scenario(scenario)
        if violations:
            raise ConfigError(violations)
    requests = build_requests(scenario)
    log = simulate(scenario, requests)
    from .metrics import compute_metrics  # engine <-> metrics one-way at import
    return log, compute_metrics(log)
