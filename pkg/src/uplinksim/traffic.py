"""Seeded traffic generators.

Request streams must be reproducible bit-for-bit across runs, platforms and
reimplementations, so randomness comes from an explicitly specified PRNG
rather than a platform default.

PRNG specification (splitmix64):
    state is a 64-bit unsigned integer. Each draw advances
        state = (state + 0x9E3779B97F4A7C15) mod 2^64
    then returns the mix of the new state
        z = state
        z = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
        z = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
        z = z XOR (z >> 31)
    A uniform double in (0, 1] is ((z >> 11) + 1) * 2^-53.

Stream seeding: the generator for traffic source ``k`` of station ``i`` under
run seed ``s`` starts from
    state0 = (s XOR ((i + 1) * 0x9E3779B97F4A7C15)
                XOR ((k + 1) * 0xC2B2AE3D27D4EB4F)) mod 2^64
so per-station streams are independent: changing one station's spec never
perturbs another station's arrivals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

from .model import (Cell, Request, Scenario, ServiceClass, SubscriberStation,
                    make_request)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_STREAM = 0xC2B2AE3D27D4EB4F

# Station ids get a private id namespace this wide, keeping request ids
# globally unique while independent of other stations' traffic volume.
IDS_PER_STATION = 1_000_000


class SplitMix64:
    """The 64-bit generator specified in the module docstring."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_unit(self) -> float:
        """Uniform double in (0, 1]; never 0, so log() is always finite."""
        return ((self.next_u64() >> 11) + 1) * 2.0 ** -53


def stream_rng(seed: int, station_id: int, source_index: int = 0) -> SplitMix64:
    state = (seed
             ^ ((station_id + 1) * _GOLDEN)
             ^ ((source_index + 1) * _STREAM)) & _MASK64
    return SplitMix64(state)


@dataclass(frozen=True)
class TrafficSpec:
    """One traffic source attached to a station."""

    service_class: ServiceClass
    pattern: str  # "constant_rate" | "poisson"
    rate_bits_per_s: float
    packet_size_bits: int
    start_time: float = 0.0  # ms
    stop_time: float = float("inf")  # ms

    @property
    def packets_per_s(self) -> float:
        return self.rate_bits_per_s / self.packet_size_bits


PATTERNS = ("constant_rate", "poisson")


def validate_spec(spec: TrafficSpec) -> List[str]:
    v = []
    if spec.pattern not in PATTERNS:
        v.append(f"pattern: unknown pattern {spec.pattern!r}, "
                 f"expected one of {PATTERNS}")
    if spec.rate_bits_per_s <= 0:
        v.append(f"rate_bits_per_s: must be > 0, got {spec.rate_bits_per_s}")
    if spec.packet_size_bits <= 0:
        v.append(f"packet_size_bits: must be > 0, got {spec.packet_size_bits}")
    if not spec.start_time < spec.stop_time:
        v.append(f"start_time: must be < stop_time, got "
                 f"[{spec.start_time}, {spec.stop_time})")
    return v


def generate(spec: TrafficSpec, station_id: int, seed: int, horizon: float,
             *, source_index: int = 0, first_id: int = 0) -> List[Request]:
    """Emit the time-ordered requests of one source up to ``horizon`` ms.

    constant_rate places packets at exact multiples of
    packet_size_bits / rate_bits_per_s starting at ``start_time``; poisson
    draws exponential inter-arrivals at the same mean rate from the seeded
    generator. Deadlines follow the service class offset.
    """
    end = min(spec.stop_time, horizon)
    out: List[Request] = []
    rid = first_id
    if spec.pattern == "constant_rate":
        interval_ms = spec.packet_size_bits / spec.rate_bits_per_s * 1000.0
        k = 0
        while True:
            t = spec.start_time + k * interval_ms
            if t >= end:
                break
            out.append(make_request(rid, station_id, spec.service_class,
                                    t, spec.packet_size_bits))
            rid += 1
            k += 1
    elif spec.pattern == "poisson":
        rng = stream_rng(seed, station_id, source_index)
        mean_ms = 1000.0 / spec.packets_per_s
        t = spec.start_time + (-math.log(rng.next_unit())) * mean_ms
        while t < end:
            out.append(make_request(rid, station_id, spec.service_class,
                                    t, spec.packet_size_bits))
            rid += 1
            t += (-math.log(rng.next_unit())) * mean_ms
    else:
        raise ValueError(f"unknown traffic pattern {spec.pattern!r}")
    return out


def generate_station(specs: Tuple[TrafficSpec, ...], station_id: int,
                     seed: int, horizon: float) -> List[Request]:
    """Merge all of one station's sources into a single time-ordered stream.

    Ids are assigned after the merge from the station's private namespace, so
    they are stable for a fixed (specs, seed, station) triple.
    """
    tagged: List[Tuple[float, int, Request]] = []
    for k, spec in enumerate(specs):
        for r in generate(spec, station_id, seed, horizon, source_index=k):
            tagged.append((r.arrival_time, k, r))
    tagged.sort(key=lambda item: (item[0], item[1]))
    base = station_id * IDS_PER_STATION
    out = []
    for n, (_, _, r) in enumerate(tagged):
        r.id = base + n
        out.append(r)
    return out


def build_requests(sc: Scenario) -> List[Request]:
    """All requests of a scenario, ordered by (arrival, station, id)."""
    horizon = sc.duration_ms
    everything: List[Request] = []
    for st in sc.stations:
        specs = sc.traffic_specs.get(st.id, ())
        if specs:
            everything.extend(generate_station(specs, st.id, sc.seed, horizon))
    everything.sort(key=lambda r: (r.arrival_time, r.station_id, r.id))
    return everything


# Starvation demonstration: station A's real-time load exceeds the cell
# capacity by OVERLOAD_FACTOR, so its backlog (and the lag of its oldest
# deadline) grows without bound. Station B wakes up with one best-effort
# packet every BE_PERIOD_MS; under plain deadline order each successive
# packet waits longer than the one before, while fairness-aware policies
# serve it within a frame or two.
STARVATION_CELL_CAPACITY = 4000  # bits/frame
OVERLOAD_FACTOR = 1.2
STARVATION_RTPS_PACKET = 4000  # bits
STARVATION_BE_PACKET = 1600  # bits
BE_PERIOD_MS = 15_000.0


def starvation_scenario(*, seed: int = 1, scheduler_name: str = "edf",
                        total_frames: int = 12_000) -> Scenario:
    """One cell, two stations: overloaded rtPS vs sparse best effort."""
    from .model import DEFAULT_FRAME_MS

    horizon = total_frames * DEFAULT_FRAME_MS
    frames_per_s = 1000.0 / DEFAULT_FRAME_MS
    rtps_rate = OVERLOAD_FACTOR * STARVATION_CELL_CAPACITY * frames_per_s
    stations = [
        SubscriberStation(id=0, cell_id=0, capacity_c=STARVATION_CELL_CAPACITY),
        SubscriberStation(id=1, cell_id=0, capacity_c=STARVATION_CELL_CAPACITY),
    ]
    specs: Dict[int, Tuple[TrafficSpec, ...]] = {
        0: (TrafficSpec(service_class=ServiceClass.RTPS,
                        pattern="constant_rate",
                        rate_bits_per_s=rtps_rate,
                        packet_size_bits=STARVATION_RTPS_PACKET,
                        start_time=0.0, stop_time=horizon),),
        1: (TrafficSpec(service_class=ServiceClass.BE,
                        pattern="constant_rate",
                        rate_bits_per_s=STARVATION_BE_PACKET / (BE_PERIOD_MS / 1000.0),
                        packet_size_bits=STARVATION_BE_PACKET,
                        start_time=0.0, stop_time=horizon),),
    }
    return Scenario(
        name="starvation",
        cells=[Cell(id=0, base_station_capacity=STARVATION_CELL_CAPACITY,
                    station_ids=[0, 1])],
        stations=stations,
        frame_duration=DEFAULT_FRAME_MS,
        total_frames=total_frames,
        traffic_specs=specs,
        seed=seed,
        scheduler_name=scheduler_name,
    )
