"""Sender/receiver endpoint tests: pacing, acking, loss declaration, timers."""

import pytest

from dcsim.cc import make_controller
from dcsim.metrics import FlowTrace
from dcsim.netsim import (
    EV_ACK_ARRIVAL_AT_SENDER,
    EV_PACKET_ARRIVAL_AT_QUEUE,
    EV_PACER_TICK,
    EV_RTO_EXPIRY,
    ClockModel,
    EventLoop,
)
from dcsim.transport import (
    AckFrame,
    K_INITIAL_RTO_US,
    ProtocolError,
    ReceiverEndpoint,
    RttEstimator,
    SenderEndpoint,
)


def test_rtt_estimator_first_sample_seeds_state():
    est = RttEstimator()
    est.on_sample(50_000)
    assert est.srtt_us == 50_000
    assert est.rttvar_us == 25_000
    assert est.min_rtt_us == 50_000
    assert est.rto_us() == 50_000 + 4 * 25_000


def test_rtt_estimator_smoothing_gains():
    est = RttEstimator()
    est.on_sample(50_000)
    est.on_sample(58_000)
    # rttvar += (|50000-58000| - 25000) // 4 ; srtt += (58000-50000) // 8
    assert est.rttvar_us == 25_000 + (8_000 - 25_000) // 4
    assert est.srtt_us == 51_000
    assert est.min_rtt_us == 50_000
    est.on_sample(40_000)
    assert est.min_rtt_us == 40_000


def test_rtt_estimator_timeout_backoff_doubles_until_progress():
    est = RttEstimator()
    assert est.rto_us() == K_INITIAL_RTO_US
    est.on_timeout()
    assert est.rto_us() == 2 * K_INITIAL_RTO_US
    est.on_timeout()
    assert est.rto_us() == 4 * K_INITIAL_RTO_US
    est.on_progress()
    assert est.rto_us() == K_INITIAL_RTO_US


def test_rtt_estimator_variance_floor():
    est = RttEstimator()
    for _ in range(50):
        est.on_sample(50_000)  # rttvar decays toward zero
    assert est.rttvar_us < 1_000
    assert est.rto_us() == est.srtt_us + 4 * 1_000  # 1 ms granularity floor


class FakeDataPacket:
    def __init__(self, pn, data_id, size=1252, new_data=True, first_sent_us=0):
        self.flow_id = 0
        self.packet_number = pn
        self.size_bytes = size
        self.data_id = data_id
        self.new_data = new_data
        self.sent_at_us = first_sent_us
        self.first_sent_us = first_sent_us


def test_receiver_acks_every_nth_packet():
    rcv = ReceiverEndpoint(0, ClockModel(), FlowTrace(0), ack_ratio=2)
    assert rcv.on_packet(FakeDataPacket(0, 0), 1000) is None
    frame = rcv.on_packet(FakeDataPacket(1, 1), 2000)
    assert frame is not None
    assert frame.largest_acked == 1
    assert frame.ranges == ((0, 1),)
    assert frame.recv_timestamps == [(0, 1000), (1, 2000)]


def test_receiver_acks_retransmissions_immediately():
    rcv = ReceiverEndpoint(0, ClockModel(), FlowTrace(0), ack_ratio=4)
    assert rcv.on_packet(FakeDataPacket(0, 0), 1000) is None
    frame = rcv.on_packet(FakeDataPacket(1, 7, new_data=False, first_sent_us=200), 2000)
    assert frame is not None  # no waiting for the ack ratio on a retransmission
    assert frame.recv_timestamps == [(0, 1000), (1, 2000)]


def test_receiver_tracks_gap_ranges():
    rcv = ReceiverEndpoint(0, ClockModel(), FlowTrace(0), ack_ratio=1)
    rcv.on_packet(FakeDataPacket(0, 0), 100)
    rcv.on_packet(FakeDataPacket(1, 1), 200)
    rcv.on_packet(FakeDataPacket(2, 2), 300)
    frame = rcv.on_packet(FakeDataPacket(4, 4), 400)  # pn 3 never arrives
    assert frame.ranges == ((0, 2), (4, 4))
    assert frame.largest_acked == 4


def test_receiver_delivers_each_chunk_once():
    trace = FlowTrace(0)
    rcv = ReceiverEndpoint(0, ClockModel(), trace, ack_ratio=1)
    rcv.on_packet(FakeDataPacket(0, 0), 100)
    rcv.on_packet(FakeDataPacket(1, 0, new_data=False), 200)  # same chunk again
    assert trace.unique_bytes_delivered == 1252
    assert trace.last_new_delivery_us == 100
    assert rcv.duplicate_chunks == 1


def test_receiver_reports_clock_offset_timestamps():
    rcv = ReceiverEndpoint(0, ClockModel(offset_us=1_000_000), FlowTrace(0), ack_ratio=1)
    frame = rcv.on_packet(FakeDataPacket(0, 0), 500)
    assert frame.recv_timestamps == [(0, 1_000_500)]


# -- sender harness ----------------------------------------------------------


class SenderHarness:
    """Sender wired to a scriptable network: packets are captured, ACK frames
    are injected by the test."""

    def __init__(self, transfer_bytes=None, blackhole=False, pacer_interval_us=0,
                 pacing_jitter_max_us=0, jitter_rng=None):
        self.loop = EventLoop()
        self.trace = FlowTrace(0)
        self.controller = make_controller("newreno", 1252)
        self.sent_packets = []
        self.sender = SenderEndpoint(
            0, self.loop, self.controller, self.trace,
            transfer_bytes=transfer_bytes,
            pacer_interval_us=pacer_interval_us,
            pacing_jitter_max_us=pacing_jitter_max_us,
            jitter_rng=jitter_rng,
        )
        self.loop.register(EV_PACKET_ARRIVAL_AT_QUEUE,
                           lambda t, pkt: None if blackhole else self.sent_packets.append(pkt))
        self.loop.register(EV_PACER_TICK, lambda t, fid: self.sender.on_pacer_tick(t))
        self.loop.register(EV_RTO_EXPIRY, lambda t, p: self.sender.on_rto_expiry(t, p[1]))
        self.loop.register(EV_ACK_ARRIVAL_AT_SENDER, lambda t, fr: self.sender.on_ack(fr, t))


def test_sender_numbers_packets_monotonically():
    h = SenderHarness(transfer_bytes=12520)
    h.sender.start(0)
    h.loop.run(until_us=0)
    pns = [p.packet_number for p in h.sent_packets]
    assert pns == sorted(pns) == list(range(len(pns)))
    assert h.sender.bytes_in_flight == sum(p.size_bytes for p in h.sent_packets)


def test_sender_paces_releases():
    h = SenderHarness(transfer_bytes=12520, pacer_interval_us=200)
    h.sender.start(0)
    h.loop.run(until_us=5_000)
    times = [p.sent_at_us for p in h.sent_packets]
    assert times == [0, 200, 400, 600, 800, 1000, 1200, 1400, 1600, 1800]


def test_sender_pacing_jitter_widens_spacing():
    class FixedRng:
        def randint(self, lo, hi):
            return hi

    h = SenderHarness(transfer_bytes=6260, pacer_interval_us=200,
                      pacing_jitter_max_us=100, jitter_rng=FixedRng())
    h.sender.start(0)
    h.loop.run(until_us=5_000)
    times = [p.sent_at_us for p in h.sent_packets]
    assert times == [0, 300, 600, 900, 1200]


def test_sender_tail_chunk_carries_the_remainder():
    h = SenderHarness(transfer_bytes=3000)  # 1252 + 1252 + 496
    h.sender.start(0)
    h.loop.run(until_us=0)
    assert [p.size_bytes for p in h.sent_packets] == [1252, 1252, 496]
    assert h.trace.transmitted_bytes == 3000


def _ack(largest, ranges, recv_timestamps):
    return AckFrame(0, largest, ranges, recv_timestamps)


def test_ack_resolves_inflight_and_samples_rtt():
    h = SenderHarness(transfer_bytes=12520)
    h.sender.start(0)
    h.loop.run(until_us=0)
    inflight_before = h.sender.bytes_in_flight
    h.sender.on_ack(_ack(1, ((0, 1),), [(0, 400), (1, 500)]), 1000)
    assert h.sender.bytes_in_flight == inflight_before - 2 * 1252
    assert h.trace.rtt_samples == [(1000, 1000)]  # both sent at t=0
    assert h.sender.largest_acked == 1


def test_ack_for_unsent_packet_is_a_protocol_error():
    h = SenderHarness(transfer_bytes=2504)
    h.sender.start(0)
    h.loop.run(until_us=0)
    with pytest.raises(ProtocolError):
        h.sender.on_ack(_ack(99, ((99, 99),), [(99, 1)]), 1000)


def test_reorder_threshold_declares_loss_and_requeues():
    h = SenderHarness(transfer_bytes=12520)
    h.sender.start(0)
    h.loop.run(until_us=0)
    # receiver saw 1..4 but never pn 0: gap of 4 >= threshold 3
    h.sender.on_ack(_ack(4, ((1, 4),), [(1, 400), (2, 410), (3, 420), (4, 430)]), 1000)
    assert 0 in h.sender.retx_queue
    assert 0 not in h.sender.sent
    assert h.controller.reaction_log and h.controller.reaction_log[0][1] == "loss"


def test_small_gap_below_threshold_is_not_loss():
    h = SenderHarness(transfer_bytes=12520)
    h.sender.start(0)
    h.loop.run(until_us=0)
    # receiver saw 1..2 but not 0: largest - 0 = 2 < 3, keep waiting
    h.sender.on_ack(_ack(2, ((1, 2),), [(1, 400), (2, 410)]), 1000)
    assert not h.sender.retx_queue
    assert 0 in h.sender.sent
    assert h.controller.reaction_log == []


def test_reordered_ack_frames_never_count_as_loss():
    h = SenderHarness(transfer_bytes=12520)
    h.sender.start(0)
    h.loop.run(until_us=0)
    # the frame covering 4..5 overtakes the one covering 2..3 on the way back;
    # its ranges say everything up to 5 arrived, so nothing may be declared lost
    h.sender.on_ack(_ack(1, ((0, 1),), [(0, 400), (1, 410)]), 1000)
    h.sender.on_ack(_ack(5, ((0, 5),), [(4, 440), (5, 450)]), 1100)
    assert not h.sender.retx_queue
    assert h.controller.reaction_log == []
    # the overtaken frame still resolves its packets when it lands
    h.sender.on_ack(_ack(3, ((0, 3),), [(2, 420), (3, 430)]), 1200)
    assert h.sender.bytes_in_flight == 12_520 - 6 * 1252
    assert h.controller.reaction_log == []
    assert h.trace.retransmitted_packets == 0


def test_genuine_gap_behind_received_ranges_is_loss():
    h = SenderHarness(transfer_bytes=12520)
    h.sender.start(0)
    h.loop.run(until_us=0)
    # pn 1 truly missing at the receiver while 0 and 2..5 arrived
    h.sender.on_ack(_ack(5, ((0, 0), (2, 5)),
                         [(0, 400), (2, 420), (3, 430), (4, 440), (5, 450)]), 1000)
    assert h.controller.reaction_log and h.controller.reaction_log[0][1] == "loss"
    # chunk 1 went straight back out as a fresh packet number
    assert h.trace.retransmitted_packets == 1
    h.loop.run(until_us=1000)  # flush the scheduled departure
    retx = [p for p in h.sent_packets if not p.new_data]
    assert [p.data_id for p in retx] == [1]
    assert retx[0].packet_number == 10


def test_rto_fires_at_initial_timeout_then_backs_off():
    h = SenderHarness(transfer_bytes=12520, blackhole=True)
    rto_times = []
    h.loop.register(EV_RTO_EXPIRY,
                    lambda t, p: (rto_times.append(t), h.sender.on_rto_expiry(t, p[1])))
    h.sender.start(0)
    h.loop.run(until_us=2_500_000)
    # 333 ms, then +666 ms, then +1332 ms of exponential backoff
    assert rto_times == [333_000, 999_000, 2_331_000]
    assert h.trace.rto_count == 3
    assert h.trace.retransmitted_packets > 0
    assert h.controller.cwnd_bytes == 1252
    assert h.controller.authorized_send_window() == 2 * 1252


def test_rto_requeues_everything_unacked_once():
    h = SenderHarness(transfer_bytes=12520, blackhole=True)
    h.sender.start(0)
    h.loop.run(until_us=400_000)  # one timeout
    assert h.sender.bytes_in_flight == sum(
        size for _, size, _, _ in h.sender.sent.values()
    )
    # every chunk is either acked or queued/sent again exactly once
    outstanding = set(h.sender.retx_queue) | {
        info[0] for info in h.sender.sent.values()
    }
    assert outstanding == set(range(10))


def test_stale_rto_token_is_ignored():
    h = SenderHarness(transfer_bytes=2504)
    h.sender.start(0)
    h.loop.run(until_us=0)
    stale = h.sender._rto_token
    h.sender.on_ack(_ack(1, ((0, 1),), [(0, 400), (1, 500)]), 1000)
    h.sender.on_rto_expiry(334_000, stale)
    assert h.trace.rto_count == 0


def test_completion_recorded_when_all_chunks_acked():
    h = SenderHarness(transfer_bytes=2504)
    h.sender.start(0)
    h.loop.run(until_us=0)
    assert h.sender.completed_us is None
    h.sender.on_ack(_ack(1, ((0, 1),), [(0, 400), (1, 500)]), 1000)
    assert h.sender.completed_us == 1000
    assert h.sender.bytes_in_flight == 0
