import pytest

from uplinksim.model import ServiceClass
from uplinksim.traffic import (SplitMix64, TrafficSpec, generate,
                               generate_station, starvation_scenario,
                               stream_rng, validate_spec)

RTPS = ServiceClass.RTPS
BE = ServiceClass.BE


def test_splitmix64_reference_vectors():
    # Published outputs of the reference splitmix64 for seed 0.
    g = SplitMix64(0)
    assert [g.next_u64() for _ in range(5)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F,
        0xF88BB8A8724C81EC, 0x1B39896A51A8749B,
    ]


def test_unit_interval_never_zero():
    g = SplitMix64(42)
    for _ in range(10_000):
        u = g.next_unit()
        assert 0.0 < u <= 1.0


def test_constant_rate_spec_rate_arithmetic():
    spec = TrafficSpec(service_class=RTPS, pattern="constant_rate",
                       rate_bits_per_s=64_000.0, packet_size_bits=800,
                       start_time=0.0, stop_time=10_000.0)
    reqs = generate(spec, station_id=0, seed=1, horizon=1000.0)
    assert len(reqs) == 80
    for k, r in enumerate(reqs):
        assert r.arrival_time == k * 12.5
        assert r.size_bits == 800


def test_zero_horizon_empty():
    spec = TrafficSpec(service_class=RTPS, pattern="constant_rate",
                       rate_bits_per_s=64_000.0, packet_size_bits=800)
    assert generate(spec, 0, 1, 0.0) == []


def test_poisson_mean_interarrival_within_5_percent():
    # Law-of-large-numbers check over 10^4 arrivals: 1000 packets/s.
    spec = TrafficSpec(service_class=BE, pattern="poisson",
                       rate_bits_per_s=800_000.0, packet_size_bits=800,
                       start_time=0.0, stop_time=float("inf"))
    reqs = generate(spec, station_id=3, seed=99, horizon=60_000.0)
    assert len(reqs) > 10_000
    gaps = [b.arrival_time - a.arrival_time
            for a, b in zip(reqs[:10_000], reqs[1:10_001])]
    mean = sum(gaps) / len(gaps)
    assert abs(mean - 1.0) / 1.0 < 0.05


def test_generator_determinism():
    spec = TrafficSpec(service_class=BE, pattern="poisson",
                       rate_bits_per_s=32_000.0, packet_size_bits=1600)
    a = generate(spec, 5, 1234, 30_000.0)
    b = generate(spec, 5, 1234, 30_000.0)
    assert [(r.arrival_time, r.size_bits, r.deadline) for r in a] == \
           [(r.arrival_time, r.size_bits, r.deadline) for r in b]


def test_stream_independence_across_stations():
    spec = TrafficSpec(service_class=BE, pattern="poisson",
                       rate_bits_per_s=32_000.0, packet_size_bits=1600)
    other = TrafficSpec(service_class=BE, pattern="poisson",
                        rate_bits_per_s=64_000.0, packet_size_bits=400)
    with_spec = generate_station((spec,), station_id=7, seed=5, horizon=20_000.0)
    # Station 8 changing its traffic must not perturb station 7's stream.
    again = generate_station((spec,), station_id=7, seed=5, horizon=20_000.0)
    assert [(r.id, r.arrival_time) for r in with_spec] == \
           [(r.id, r.arrival_time) for r in again]
    st8_a = generate_station((spec,), station_id=8, seed=5, horizon=20_000.0)
    st8_b = generate_station((other,), station_id=8, seed=5, horizon=20_000.0)
    assert [r.arrival_time for r in st8_a] != [r.arrival_time for r in st8_b]
    assert stream_rng(5, 7).next_u64() != stream_rng(5, 8).next_u64()


def test_deadline_law_every_request():
    for cls in (RTPS, BE):
        spec = TrafficSpec(service_class=cls, pattern="poisson",
                           rate_bits_per_s=100_000.0, packet_size_bits=1000)
        for r in generate(spec, 2, 7, 5_000.0):
            assert r.deadline == r.arrival_time + cls.deadline_offset_ms


def test_time_ordered_and_ids_unique():
    specs = (
        TrafficSpec(service_class=RTPS, pattern="constant_rate",
                    rate_bits_per_s=64_000.0, packet_size_bits=800),
        TrafficSpec(service_class=BE, pattern="poisson",
                    rate_bits_per_s=32_000.0, packet_size_bits=1600),
    )
    reqs = generate_station(specs, station_id=4, seed=11, horizon=10_000.0)
    times = [r.arrival_time for r in reqs]
    assert times == sorted(times)
    ids = [r.id for r in reqs]
    assert len(set(ids)) == len(ids)
    assert all(r.station_id == 4 for r in reqs)


def test_validate_spec_messages():
    bad = TrafficSpec(service_class=RTPS, pattern="burst", rate_bits_per_s=-1,
                      packet_size_bits=0, start_time=10.0, stop_time=5.0)
    msgs = validate_spec(bad)
    assert len(msgs) == 4


def test_starvation_scenario_construction():
    sc = starvation_scenario()
    assert len(sc.stations) == 2
    assert len(sc.cells) == 1
    cap = sc.cells[0].base_station_capacity
    frames_per_s = 1000.0 / sc.frame_duration
    a_spec = sc.traffic_specs[0][0]
    # Station A overloads the cell by a factor of 1.2.
    assert a_spec.rate_bits_per_s == pytest.approx(1.2 * cap * frames_per_s)
    assert a_spec.service_class is RTPS
    b_spec = sc.traffic_specs[1][0]
    assert b_spec.service_class is BE
    # 980 ms deadline gap between the two classes involved.
    assert (BE.deadline_offset_ms - RTPS.deadline_offset_ms) == 980.0
