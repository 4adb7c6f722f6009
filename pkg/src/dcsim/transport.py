"""QUIC-like transport endpoints: windowed, paced sender with monotonically
increasing packet numbers, and a receiver that acknowledges with receive
timestamps.

Loss handling follows the packet-number threshold rule: a packet is declared
lost once the highest acknowledged number is at least REORDER_THRESHOLD ahead
of it and the receiver's reported ranges show it was never received, so
reordered ACK frames never count as loss. Retransmissions are new packets
(new numbers) carrying the same application chunk; a timeout collapses the
in-flight accounting and requeues everything unacknowledged.
"""

from __future__ import annotations

from collections import deque

from .netsim import (
    EV_PACKET_ARRIVAL_AT_QUEUE,
    EV_PACER_TICK,
    EV_RTO_EXPIRY,
    divceil,
)

K_DEFAULT_PACKET_SIZE = 1252  # bytes on the wire per data packet
K_ACK_SIZE = 40
K_REORDER_THRESHOLD = 3  # pn gap before a packet is declared lost
K_INITIAL_RTO_US = 333_000
K_DEFAULT_PACER_INTERVAL_US = 200
K_GRANULARITY_US = 1_000  # rttvar floor in the timeout formula
K_MAX_ACK_RANGES = 32  # oldest ranges are forgotten, like a bounded ACK frame


class ProtocolError(Exception):
    """The peer acknowledged a packet number that was never sent."""


class DataPacket:
    __slots__ = (
        "flow_id",
        "packet_number",
        "size_bytes",
        "data_id",
        "new_data",
        "sent_at_us",
        "first_sent_us",
    )

    def __init__(self, flow_id, packet_number, size_bytes, data_id, new_data, sent_at_us, first_sent_us):
        self.flow_id = flow_id
        self.packet_number = packet_number
        self.size_bytes = size_bytes
        self.data_id = data_id
        self.new_data = new_data
        self.sent_at_us = sent_at_us
        self.first_sent_us = first_sent_us


class AckFrame:
    __slots__ = ("flow_id", "largest_acked", "ranges", "recv_timestamps", "size_bytes")

    def __init__(self, flow_id, largest_acked, ranges, recv_timestamps):
        self.flow_id = flow_id
        self.largest_acked = largest_acked
        self.ranges = ranges  # tuple of (lo, hi), inclusive
        self.recv_timestamps = recv_timestamps  # [(pn, reported_recv_us)] in arrival order
        self.size_bytes = K_ACK_SIZE


class RttEstimator:
    """Smoothed RTT and retransmission timeout with exponential backoff.

    Gains 1/8 (srtt) and 1/4 (rttvar); rto = srtt + 4*rttvar, never below
    srtt, doubled per consecutive timeout until forward progress.
    """

    def __init__(self):
        self.srtt_us = None
        self.rttvar_us = None
        self.min_rtt_us = None
        self._backoff = 1

    def on_sample(self, rtt_us: int) -> None:
        if self.srtt_us is None:
            self.srtt_us = rtt_us
            self.rttvar_us = rtt_us // 2
            self.min_rtt_us = rtt_us
        else:
            self.rttvar_us += (abs(self.srtt_us - rtt_us) - self.rttvar_us) // 4
            self.srtt_us += (rtt_us - self.srtt_us) // 8
            if rtt_us < self.min_rtt_us:
                self.min_rtt_us = rtt_us

    def rto_us(self) -> int:
        if self.srtt_us is None:
            return K_INITIAL_RTO_US * self._backoff
        base = self.srtt_us + 4 * max(self.rttvar_us, K_GRANULARITY_US)
        return max(base, self.srtt_us) * self._backoff

    def on_timeout(self) -> None:
        self._backoff *= 2

    def on_progress(self) -> None:
        self._backoff = 1


class ReceiverEndpoint:
    """Delivers each application chunk exactly once and acknowledges every
    ack_ratio-th packet, carrying the reported receive timestamp of each
    newly seen packet."""

    def __init__(self, flow_id, clock, trace, ack_ratio=1):
        self.flow_id = flow_id
        self.clock = clock
        self.trace = trace
        self.ack_ratio = ack_ratio
        self.ranges = []  # inclusive [lo, hi] pairs, ascending
        self.seen_data = set()
        self.received_packets = 0
        self.received_bytes = 0
        self.duplicate_chunks = 0
        self._pending_ts = []
        self._since_ack = 0

    def on_packet(self, pkt: DataPacket, now_us: int):
        """Returns an AckFrame when one is due, else None."""
        self.received_packets += 1
        self.received_bytes += pkt.size_bytes
        pn = pkt.packet_number
        if self.ranges and pn == self.ranges[-1][1] + 1:
            self.ranges[-1][1] = pn
        else:
            # FIFO path: packet numbers arrive strictly increasing, gaps only
            self.ranges.append([pn, pn])
            if len(self.ranges) > K_MAX_ACK_RANGES:
                del self.ranges[0]
        self._pending_ts.append((pn, self.clock.reported_us(now_us)))
        if pkt.data_id in self.seen_data:
            self.duplicate_chunks += 1  # acknowledged below, but not re-delivered
        else:
            self.seen_data.add(pkt.data_id)
            tr = self.trace
            tr.unique_bytes_delivered += pkt.size_bytes
            tr.last_new_delivery_us = now_us
            if not pkt.new_data:
                tr.retx_latencies_us.append(now_us - pkt.first_sent_us)
        self._since_ack += 1
        if self._since_ack >= self.ack_ratio or not pkt.new_data:
            frame = AckFrame(
                self.flow_id,
                self.ranges[-1][1],
                tuple((lo, hi) for lo, hi in self.ranges),
                self._pending_ts,
            )
            self._pending_ts = []
            self._since_ack = 0
            return frame
        return None


class SenderEndpoint:
    """Window- and pacing-limited sender; congestion control is delegated to
    the attached controller through its callback contract."""

    def __init__(
        self,
        flow_id,
        loop,
        controller,
        trace,
        packet_size=K_DEFAULT_PACKET_SIZE,
        transfer_bytes=None,  # None = unbounded (duration-limited run)
        pacer_interval_us=K_DEFAULT_PACER_INTERVAL_US,
        pacing_jitter_max_us=0,  # extra random spacing per release, 0 = off
        jitter_rng=None,
        queue_occupancy=None,  # callable for trace rows, optional
        collect_series=False,
    ):
        self.flow_id = flow_id
        self.loop = loop
        self.controller = controller
        self.trace = trace
        self.packet_size = packet_size
        self.pacer_interval_us = pacer_interval_us
        self.pacing_jitter_max_us = pacing_jitter_max_us
        self.jitter_rng = jitter_rng
        self.queue_occupancy = queue_occupancy or (lambda: 0)
        self.collect_series = collect_series

        if transfer_bytes is None:
            self.n_chunks = None
        else:
            self.n_chunks = divceil(transfer_bytes, packet_size)
            self._tail_size = transfer_bytes - (self.n_chunks - 1) * packet_size
        self.next_packet_number = 0
        self.next_new_chunk = 0
        self.acked_chunks = set()
        self.acked_chunk_count = 0
        self.retx_queue = deque()
        self.sent = {}  # pn -> (data_id, size, sent_at_us, new_data)
        self.unacked_order = deque()  # pns in send order, lazily pruned
        self.bytes_in_flight = 0
        self.largest_acked = -1
        self.peer_ranges = ()  # receiver-reported received ranges, latest frame
        self.rtt = RttEstimator()
        self.started = False
        self.completed_us = None
        self._next_release_us = 0
        self._pacer_armed = False
        self._rto_token = 0
        self._rto_armed = False

    # -- data bookkeeping ---------------------------------------------------

    def _chunk_size(self, data_id: int) -> int:
        if self.n_chunks is not None and data_id == self.n_chunks - 1:
            return self._tail_size
        return self.packet_size

    def _has_data(self) -> bool:
        if self.retx_queue:
            return True
        return self.n_chunks is None or self.next_new_chunk < self.n_chunks

    def _window_open(self) -> bool:
        return self.bytes_in_flight < self.controller.authorized_send_window()

    # -- transmit path ------------------------------------------------------

    def start(self, now_us: int) -> None:
        self.started = True
        self.trace.start_us = now_us
        self.try_send(now_us)

    def try_send(self, now_us: int) -> None:
        while self._has_data() and self._window_open():
            if now_us < self._next_release_us:
                if not self._pacer_armed:
                    self._pacer_armed = True
                    self.loop.schedule(self._next_release_us, EV_PACER_TICK, self.flow_id)
                return
            self._transmit_one(now_us)
            step = self.pacer_interval_us
            if self.pacing_jitter_max_us:
                step += self.jitter_rng.randint(0, self.pacing_jitter_max_us)
            self._next_release_us = now_us + step

    def _transmit_one(self, now_us: int) -> None:
        while self.retx_queue and self.retx_queue[0] in self.acked_chunks:
            self.retx_queue.popleft()
        if self.retx_queue:
            data_id = self.retx_queue.popleft()
            new_data = False
        else:
            data_id = self.next_new_chunk
            self.next_new_chunk += 1
            new_data = True
        size = self._chunk_size(data_id)
        pn = self.next_packet_number
        self.next_packet_number += 1
        tr = self.trace
        if new_data:
            first_sent = now_us
            tr.chunk_first_send[data_id] = now_us
        else:
            first_sent = tr.chunk_first_send[data_id]
            tr.retransmitted_packets += 1
            tr.retransmitted_bytes += size
        pkt = DataPacket(self.flow_id, pn, size, data_id, new_data, now_us, first_sent)
        self.sent[pn] = (data_id, size, now_us, new_data)
        self.unacked_order.append(pn)
        self.bytes_in_flight += size
        tr.transmitted_packets += 1
        tr.transmitted_bytes += size
        if tr.first_send_us is None:
            tr.first_send_us = now_us
        self.loop.schedule(now_us, EV_PACKET_ARRIVAL_AT_QUEUE, pkt)
        if not self._rto_armed:
            self._arm_rto(now_us)

    def on_pacer_tick(self, now_us: int) -> None:
        self._pacer_armed = False
        self.try_send(now_us)

    # -- timers ---------------------------------------------------------------

    def _arm_rto(self, now_us: int) -> None:
        self._rto_token += 1
        self._rto_armed = True
        self.loop.schedule(now_us + self.rtt.rto_us(), EV_RTO_EXPIRY, (self.flow_id, self._rto_token))

    def _disarm_rto(self) -> None:
        self._rto_token += 1
        self._rto_armed = False

    def on_rto_expiry(self, now_us: int, token: int) -> None:
        if token != self._rto_token or not self._rto_armed:
            return  # stale timer
        self._rto_armed = False
        if not self.sent:
            return
        # timeout: everything unacknowledged is treated as gone and requeued
        lost = []
        for pn in self.unacked_order:
            info = self.sent.pop(pn, None)
            if info is None:
                continue
            data_id, size, sent_at, _ = info
            self.bytes_in_flight -= size
            lost.append((pn, size, sent_at))
            if data_id not in self.acked_chunks:
                self.retx_queue.append(data_id)
        self.unacked_order.clear()
        self.trace.rto_count += 1
        self.rtt.on_timeout()
        self.controller.on_rto(now_us)
        self.try_send(now_us)

    # -- ack path -------------------------------------------------------------

    def on_ack(self, frame: AckFrame, now_us: int) -> None:
        if frame.largest_acked >= self.next_packet_number:
            raise ProtocolError(
                f"flow {self.flow_id}: ack for pn {frame.largest_acked}, none sent past {self.next_packet_number - 1}"
            )
        newly = []  # (pn, size, sent_at)
        pairs = []  # (send_us, reported_recv_us) in arrival order
        for pn, recv_ts in frame.recv_timestamps:
            info = self.sent.pop(pn, None)
            if info is None:
                continue  # already resolved (e.g. marked lost on a timeout)
            data_id, size, sent_at, _ = info
            self.bytes_in_flight -= size
            newly.append((pn, size, sent_at))
            pairs.append((sent_at, recv_ts))
            if data_id not in self.acked_chunks:
                self.acked_chunks.add(data_id)
                self.acked_chunk_count += 1
        if frame.largest_acked > self.largest_acked:
            self.largest_acked = frame.largest_acked
            self.peer_ranges = frame.ranges

        lost = self._detect_losses()

        if newly:
            rtt_sample = now_us - newly[-1][2]
            self.rtt.on_sample(rtt_sample)
            self.rtt.on_progress()
            ctrl = self.controller
            if lost:
                ctrl.on_loss_detected(now_us, lost)
            ctrl.on_ack(now_us, newly, rtt_sample, pairs)
            tr = self.trace
            tr.rtt_samples.append((now_us, rtt_sample))
            if self.collect_series:
                tr.ack_rows.append(
                    (now_us, ctrl.cwnd_bytes, rtt_sample, getattr(ctrl, "owqd_us", 0), self.queue_occupancy())
                )
        elif lost:
            self.controller.on_loss_detected(now_us, lost)

        if self.sent:
            self._arm_rto(now_us)
        else:
            self._disarm_rto()

        if (
            self.completed_us is None
            and self.n_chunks is not None
            and self.acked_chunk_count >= self.n_chunks
        ):
            self.completed_us = now_us
        self.try_send(now_us)

    def _received_by_peer(self, pn: int) -> bool:
        for lo, hi in self.peer_ranges:
            if pn < lo:
                return False
            if pn <= hi:
                return True
        return False

    def _detect_losses(self):
        threshold = self.largest_acked - K_REORDER_THRESHOLD
        lost = []
        order = self.unacked_order
        sent = self.sent
        while order:
            pn = order[0]
            if pn > threshold:
                break
            if pn not in sent:
                order.popleft()
                continue  # was acked
            if self._received_by_peer(pn):
                # the frame carrying its timestamp is still on the way back;
                # ack reordering never counts as loss
                break
            order.popleft()
            data_id, size, sent_at, _ = sent.pop(pn)
            self.bytes_in_flight -= size
            lost.append((pn, size, sent_at))
            if data_id not in self.acked_chunks:
                self.retx_queue.append(data_id)
        return lost
