"""Shared test helpers: a minimal single-cell policy harness that mimics the
engine's grant application without events or metrics."""

from typing import Dict, List, Optional

from uplinksim.model import (Cell, Grant, Request, ServiceClass,
                             SubscriberStation, make_request)
from uplinksim.schedulers import SchedulerPolicy, make_policy


class PolicyHarness:
    """Drives one policy over one cell, applying grants like the engine."""

    def __init__(self, policy_name: str, n_stations: int = 1,
                 capacity: int = 1000, frame_ms: float = 5.0,
                 station_caps: Optional[List[int]] = None):
        self.frame_ms = frame_ms
        self.capacity = capacity
        caps = station_caps or [capacity] * n_stations
        self.stations: Dict[int, SubscriberStation] = {
            i: SubscriberStation(id=i, cell_id=0, capacity_c=caps[i])
            for i in range(n_stations)}
        self.cell = Cell(id=0, base_station_capacity=capacity,
                         station_ids=list(range(n_stations)))
        self.policy: SchedulerPolicy = make_policy(
            policy_name, self.cell, self.stations, frame_ms)
        self._next_id = 0
        self.requests: Dict[int, Request] = {}

    def arrive(self, station_id: int, size_bits: int, arrival: float,
               service_class: ServiceClass = ServiceClass.RTPS,
               deadline: Optional[float] = None) -> Request:
        r = make_request(self._next_id, station_id, service_class, arrival,
                         size_bits)
        if deadline is not None:
            r.deadline = deadline
        self._next_id += 1
        self.requests[r.id] = r
        self.stations[station_id].queue.append(r)
        self.policy.on_arrival(r)
        return r

    def backlog(self) -> int:
        return sum(st.backlog_bits() for st in self.stations.values())

    def frame(self, frame_index: int,
              capacity: Optional[int] = None) -> List[Grant]:
        cap = self.capacity if capacity is None else capacity
        now = frame_index * self.frame_ms
        grants = self.policy.allocate_frame(frame_index, now, cap)
        assert sum(g.granted_bits for g in grants) <= cap
        for g in grants:
            r = self.requests[g.request_id]
            assert 0 < g.granted_bits <= r.size_bits - r.served_bits
            r.served_bits += g.granted_bits
            if r.complete:
                self.stations[r.station_id].queue.remove(r)
        return grants
