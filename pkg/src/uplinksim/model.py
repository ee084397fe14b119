"""Domain model for a frame-based uplink scheduling simulator.

A base station (one per cell) owns a pool of uplink capacity, expressed in
bits per frame, and hands it out to subscriber stations as per-frame grants.
Subscriber stations queue deadline-tagged bandwidth requests; scheduling
policies decide which requests are served each frame.

Everything here is a plain value type. All mutation happens inside the
single-threaded engine loop.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Deque, Dict, List, Optional, Tuple, TYPE_CHECKING

if TYPE_CHECKING:  # avoids a circular import; TrafficSpec lives in traffic.py
    from .traffic import TrafficSpec


class ConfigError(Exception):
    """A scenario failed validation. Carries one message per violation."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ServiceClass(Enum):
    """MAC service classes, ordered from most to least latency-sensitive."""

    UGS = "UGS"
    ERTPS = "ertPS"
    RTPS = "rtPS"
    NRTPS = "nrtPS"
    BE = "BE"

    @property
    def deadline_offset_ms(self) -> float:
        """Static deadline offset: a request is due this long after arrival."""
        return _DEADLINE_OFFSET_MS[self]


# Real-time classes get tight deadlines, best effort a very loose one; the
# wide rtPS/BE gap is what makes plain deadline ordering starve BE stations.
_DEADLINE_OFFSET_MS: Dict[ServiceClass, float] = {
    ServiceClass.UGS: 5.0,
    ServiceClass.ERTPS: 10.0,
    ServiceClass.RTPS: 20.0,
    ServiceClass.NRTPS: 200.0,
    ServiceClass.BE: 1000.0,
}

CLASS_BY_NAME: Dict[str, ServiceClass] = {c.value: c for c in ServiceClass}


@dataclass(slots=True)
class Request:
    """One uplink bandwidth demand from a station.

    ``deadline`` is absolute simulation time in ms. For traffic-generated
    requests it always equals ``arrival_time + class offset`` (see
    :func:`make_request`); synthetic test workloads may set it freely.
    """

    id: int
    station_id: int
    service_class: ServiceClass
    arrival_time: float
    size_bits: int
    deadline: float
    served_bits: int = 0
    dropped: bool = False

    @property
    def complete(self) -> bool:
        return self.served_bits >= self.size_bits


def make_request(req_id: int, station_id: int, service_class: ServiceClass,
                 arrival_time: float, size_bits: int) -> Request:
    """Build a request with the class-derived deadline."""
    return Request(
        id=req_id,
        station_id=station_id,
        service_class=service_class,
        arrival_time=arrival_time,
        size_bits=size_bits,
        deadline=arrival_time + service_class.deadline_offset_ms,
    )


def remaining_bits(r: Request) -> int:
    """Bits still owed to a request."""
    return r.size_bits - r.served_bits


@dataclass(slots=True)
class SubscriberStation:
    """A client node queuing requests toward its cell's base station.

    ``capacity_c`` is the station's transmission capacity in bits per frame;
    it feeds the proportional-fairness priority and service-time estimates.
    ``historical_throughput`` is the exponentially smoothed bits-per-frame
    this station has recently been served.
    """

    id: int
    cell_id: int
    capacity_c: int
    historical_throughput: float = 0.0
    queue: Deque[Request] = field(default_factory=deque)
    wrr_weight: Optional[int] = None

    def backlog_bits(self) -> int:
        return sum(r.size_bits - r.served_bits for r in self.queue)


@dataclass(slots=True)
class Cell:
    """One base station and the stations it serves."""

    id: int
    base_station_capacity: int
    station_ids: List[int] = field(default_factory=list)


@dataclass(slots=True)
class Grant:
    """An allocation of frame capacity to one request in one frame."""

    frame_index: int
    station_id: int
    request_id: int
    granted_bits: int


@dataclass
class Scenario:
    """Full description of one simulation run.

    ``traffic_specs`` maps station id to the traffic sources attached to that
    station (a station may carry e.g. an rtPS stream plus best-effort
    background). Identical (Scenario, seed) pairs produce bit-identical runs.
    """

    name: str
    cells: List[Cell]
    stations: List[SubscriberStation]
    frame_duration: float  # ms
    total_frames: int
    traffic_specs: Dict[int, Tuple["TrafficSpec", ...]]
    seed: int
    scheduler_name: str = "edf"
    ewma_alpha: float = 0.1
    drop_on_miss: bool = False

    @property
    def duration_ms(self) -> float:
        return self.total_frames * self.frame_duration

    def station_by_id(self) -> Dict[int, SubscriberStation]:
        return {s.id: s for s in self.stations}

    def fresh_stations(self) -> List[SubscriberStation]:
        """Per-run copies so a run never mutates the scenario itself."""
        return [replace(s, queue=deque()) for s in self.stations]


# Canonical topology: 7 cells, 2 stations each, one base station per cell.
CANONICAL_CELLS = 7
CANONICAL_STATIONS_PER_CELL = 2
DEFAULT_FRAME_MS = 5.0
DEFAULT_TOTAL_FRAMES = 12_000  # 60 s at 5 ms per frame
# 80% mean utilisation: per station 64 kbit/s rtPS + 32 kbit/s BE background
# = 480 bits/frame, twice per cell, against 1200 bits/frame of capacity.
CANONICAL_CELL_CAPACITY = 1200


def canonical_scenario(*, seed: int = 1, scheduler_name: str = "edf",
                       total_frames: int = DEFAULT_TOTAL_FRAMES) -> Scenario:
    """The default benchmark topology.

    Every station sources real-time (rtPS) traffic plus a trickle of
    best-effort background, so deadline-ordered policies are regularly
    interrupted mid-request and context-switch behaviour is observable.
    """
    from .traffic import TrafficSpec  # deferred: traffic imports this module

    horizon = total_frames * DEFAULT_FRAME_MS
    cells: List[Cell] = []
    stations: List[SubscriberStation] = []
    specs: Dict[int, Tuple[TrafficSpec, ...]] = {}
    for c in range(CANONICAL_CELLS):
        sids = []
        for k in range(CANONICAL_STATIONS_PER_CELL):
            sid = c * CANONICAL_STATIONS_PER_CELL + k
            sids.append(sid)
            stations.append(SubscriberStation(
                id=sid, cell_id=c, capacity_c=CANONICAL_CELL_CAPACITY))
            specs[sid] = (
                TrafficSpec(service_class=ServiceClass.RTPS,
                            pattern="constant_rate",
                            rate_bits_per_s=64_000.0,
                            packet_size_bits=800,
                            start_time=0.0, stop_time=horizon),
                TrafficSpec(service_class=ServiceClass.BE,
                            pattern="poisson",
                            rate_bits_per_s=32_000.0,
                            packet_size_bits=1600,
                            start_time=0.0, stop_time=horizon),
            )
        cells.append(Cell(id=c, base_station_capacity=CANONICAL_CELL_CAPACITY,
                          station_ids=sids))
    return Scenario(
        name="canonical",
        cells=cells,
        stations=stations,
        frame_duration=DEFAULT_FRAME_MS,
        total_frames=total_frames,
        traffic_specs=specs,
        seed=seed,
        scheduler_name=scheduler_name,
    )


def validate_scenario(sc: Scenario) -> List[str]:
    """Check every model invariant; returns all violations, not just the first.

    Messages start with the offending field path so config errors are
    actionable from the command line.
    """
    from .schedulers import POLICY_NAMES  # deferred: schedulers imports model
    from .traffic import validate_spec

    v: List[str] = []
    if sc.total_frames <= 0:
        v.append(f"total_frames: must be > 0, got {sc.total_frames}")
    if sc.frame_duration <= 0:
        v.append(f"frame_duration: must be > 0, got {sc.frame_duration}")
    if not (0.0 < sc.ewma_alpha <= 1.0):
        v.append(f"ewma_alpha: must be in (0, 1], got {sc.ewma_alpha}")
    if not (-(2 ** 63) <= sc.seed < 2 ** 64):
        v.append(f"seed: must fit in 64 bits, got {sc.seed}")
    if sc.scheduler_name not in POLICY_NAMES:
        v.append(f"scheduler_name: unknown policy {sc.scheduler_name!r}, "
                 f"expected one of {sorted(POLICY_NAMES)}")

    seen_cells: Dict[int, int] = {}
    for i, cell in enumerate(sc.cells):
        if cell.id in seen_cells:
            v.append(f"cells[{i}].id: duplicate cell id {cell.id} "
                     f"(also cells[{seen_cells[cell.id]}])")
        else:
            seen_cells[cell.id] = i
        if cell.base_station_capacity <= 0:
            v.append(f"cells[{i}].base_station_capacity: must be > 0, "
                     f"got {cell.base_station_capacity}")

    seen_stations: Dict[int, int] = {}
    for i, st in enumerate(sc.stations):
        if st.id in seen_stations:
            v.append(f"stations[{i}].id: duplicate station id {st.id} "
                     f"(also stations[{seen_stations[st.id]}])")
        else:
            seen_stations[st.id] = i
        if st.capacity_c <= 0:
            v.append(f"stations[{i}].capacity_c: must be > 0, got {st.capacity_c}")
        if st.historical_throughput < 0:
            v.append(f"stations[{i}].historical_throughput: must be >= 0, "
                     f"got {st.historical_throughput}")
        if st.cell_id not in seen_cells:
            v.append(f"stations[{i}].cell_id: no such cell {st.cell_id}")
        if st.wrr_weight is not None and st.wrr_weight < 1:
            v.append(f"stations[{i}].wrr_weight: must be >= 1, got {st.wrr_weight}")

    by_id = {s.id: s for s in sc.stations}
    claimed: Dict[int, int] = {}
    for i, cell in enumerate(sc.cells):
        for sid in cell.station_ids:
            st = by_id.get(sid)
            if st is None:
                v.append(f"cells[{i}].station_ids: no such station {sid}")
                continue
            if st.cell_id != cell.id:
                v.append(f"cells[{i}].station_ids: station {sid} has "
                         f"cell_id {st.cell_id}, expected {cell.id}")
            if sid in claimed:
                v.append(f"cells[{i}].station_ids: station {sid} already "
                         f"claimed by cell {claimed[sid]}")
            claimed[sid] = cell.id
    for sid, st in by_id.items():
        if sid not in claimed:
            v.append(f"stations: station {sid} not listed by any cell")

    for sid, specs in sorted(sc.traffic_specs.items()):
        if sid not in by_id:
            v.append(f"traffic_specs[{sid}]: no such station")
        for j, spec in enumerate(specs):
            v.extend(f"traffic_specs[{sid}][{j}].{msg}"
                     for msg in validate_spec(spec))
    return v
