"""Event loop, bottleneck queue, and path-model unit tests."""

import pytest

from dcsim.netsim import (
    EV_DEQUEUE_COMPLETE,
    EV_FLOW_START,
    EV_SIM_END,
    BottleneckQueue,
    ClockModel,
    EventLoop,
    LinkModel,
    SchedulingError,
    divceil,
    occupancy_delay_us,
    serialization_us,
)


class FakePacket:
    def __init__(self, flow_id, size_bytes):
        self.flow_id = flow_id
        self.size_bytes = size_bytes


def test_divceil():
    assert divceil(0, 5) == 0
    assert divceil(9, 3) == 3
    assert divceil(10, 3) == 4
    assert divceil(1, 1) == 1


def test_serialization_full_packet_at_10mbps():
    # 1252 bytes * 8 / 10 Mbps = 1001.6 us, rounded up to whole microseconds
    assert serialization_us(1252, 10_000_000) == 1002


def test_occupancy_delay_is_drain_time():
    assert occupancy_delay_us(125_000, 10_000_000) == 100_000
    assert occupancy_delay_us(0, 10_000_000) == 0


def test_link_rtt_floor_includes_one_serialization():
    link = LinkModel(capacity_bps=10_000_000, prop_fwd_us=25_000, prop_bwd_us=25_000,
                     buffer_bytes=250_000)
    assert link.rtt_min_us(1252) == 51_002


def test_clock_offset_and_skew():
    assert ClockModel().reported_us(1234) == 1234
    assert ClockModel(offset_us=-500).reported_us(1234) == 734
    # 100 ppm over one second drifts 100 us
    assert ClockModel(offset_us=0, skew_ppm=100.0).reported_us(1_000_000) == 1_000_100
    assert ClockModel(offset_us=7, skew_ppm=100.0).reported_us(1_000_000) == 1_000_107


def test_loop_fires_in_time_order_with_insertion_order_ties():
    loop = EventLoop()
    fired = []
    loop.register(EV_FLOW_START, lambda t, p: fired.append((t, p)))
    loop.schedule(30, EV_FLOW_START, "c")
    loop.schedule(10, EV_FLOW_START, "a1")
    loop.schedule(10, EV_FLOW_START, "a2")
    loop.schedule(20, EV_FLOW_START, "b")
    loop.run()
    assert fired == [(10, "a1"), (10, "a2"), (20, "b"), (30, "c")]
    assert loop.now_us == 30
    assert loop.events_processed == 4


def test_loop_rejects_scheduling_in_the_past():
    loop = EventLoop()
    loop.register(EV_FLOW_START, lambda t, p: None)
    loop.schedule(100, EV_FLOW_START)
    loop.run()
    with pytest.raises(SchedulingError):
        loop.schedule(99, EV_FLOW_START)


def test_loop_run_until_stops_and_advances_clock():
    loop = EventLoop()
    fired = []
    loop.register(EV_FLOW_START, lambda t, p: fired.append(t))
    loop.schedule(10, EV_FLOW_START)
    loop.schedule(500, EV_FLOW_START)
    loop.run(until_us=100)
    assert fired == [10]
    assert loop.now_us == 100  # clock parked at the horizon, not the last event
    loop.run(until_us=1000)
    assert fired == [10, 500]


def test_loop_after_event_hook_sees_every_event():
    loop = EventLoop()
    seen = []
    loop.register(EV_FLOW_START, lambda t, p: None)
    loop.register(EV_SIM_END, lambda t, p: None)
    loop.after_event = lambda t, kind: seen.append((t, kind))
    loop.schedule(5, EV_FLOW_START)
    loop.schedule(6, EV_SIM_END)
    loop.run()
    assert seen == [(5, EV_FLOW_START), (6, EV_SIM_END)]


def _queue(buffer_bytes=10_000, capacity_bps=10_000_000):
    loop = EventLoop()
    q = BottleneckQueue(loop, capacity_bps, buffer_bytes)
    departures = []

    def on_complete(t, _payload):
        departures.append((t, q.service_complete(t)))

    loop.register(EV_DEQUEUE_COMPLETE, on_complete)
    return loop, q, departures


def test_queue_admission_is_byte_granular():
    loop, q, _ = _queue(buffer_bytes=3000)
    assert q.enqueue(FakePacket(0, 1252), 0) is True
    assert q.enqueue(FakePacket(0, 1252), 0) is True
    assert q.occupancy_bytes == 2504
    # 2504 + 1252 > 3000: tail drop
    assert q.enqueue(FakePacket(1, 1252), 0) is False
    assert q.occupancy_bytes == 2504
    # ...but a smaller packet still fits the remaining 496 bytes
    assert q.enqueue(FakePacket(1, 400), 0) is True
    assert q.dropped_packets == 1
    assert q.dropped_bytes == 1252
    assert q.drops_by_flow == {1: 1}
    assert q.dropped_bytes_by_flow == {1: 1252}
    assert q.drop_log == [(0, 1)]


def test_queue_back_to_back_completions_never_drift():
    # five 1252-byte packets at 10 Mbps: ceil(1001.6 * k) per cumulative bytes
    loop, q, departures = _queue()
    for _ in range(5):
        q.enqueue(FakePacket(0, 1252), 0)
    loop.run()
    assert [t for t, _ in departures] == [1002, 2004, 3005, 4007, 5008]
    assert q.occupancy_bytes == 0
    assert q.held_bytes_by_flow == {0: 0}


def test_queue_occupancy_includes_packet_in_service():
    loop, q, _ = _queue()
    for _ in range(5):
        q.enqueue(FakePacket(0, 1252), 0)
    assert q.occupancy_bytes == 5 * 1252
    assert q.max_occupancy_bytes == 5 * 1252
    loop.run(until_us=1002)  # first departure only
    assert q.occupancy_bytes == 4 * 1252


def test_queue_ground_truth_delay():
    loop, q, _ = _queue()
    assert q.ground_truth_delay_us(0) == 0  # idle
    for _ in range(5):
        q.enqueue(FakePacket(0, 1252), 0)
    # residual of the in-service packet (1002) plus drain of 4 waiting packets
    assert q.ground_truth_delay_us(0) == 1002 + occupancy_delay_us(4 * 1252, 10_000_000)
    loop.run(until_us=500)
    assert q.ground_truth_delay_us(500) == 502 + occupancy_delay_us(4 * 1252, 10_000_000)
    loop.run()
    assert q.ground_truth_delay_us(5008) == 0


def test_queue_idle_gap_starts_a_new_busy_period():
    loop, q, departures = _queue()
    q.enqueue(FakePacket(0, 1252), 0)
    loop.run()
    assert [t for t, _ in departures] == [1002]
    # arrival into an idle queue at t=5000 serializes from 5000, not from 1002
    loop.schedule(5000, EV_FLOW_START)
    loop.register(EV_FLOW_START, lambda t, p: q.enqueue(FakePacket(0, 1252), t))
    loop.run()
    assert [t for t, _ in departures] == [1002, 6002]
