"""Deterministic discrete-event core: virtual clock, event queue, and the
single-bottleneck path model (FIFO tail-drop buffer feeding a fixed-rate link,
pure-delay reverse path).

Model notes:

- Virtual time is integer microseconds everywhere.
- Service completions are scheduled from a cumulative byte count per busy
  period with ceiling division, so the long-run drain rate is exactly
  capacity_bps and sub-microsecond remainders never accumulate across a
  busy period.
- occupancy_bytes counts every admitted packet still in the node, including
  the one currently being serialized.
- The path's RTT floor is prop_fwd + prop_bwd + one forward serialization of
  a full data packet; ACKs cross the reverse path with propagation delay only
  (documented model: no ACK serialization, infinite reverse buffer).
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

# event kinds, dense ints for cheap dispatch
EV_FLOW_START = 0
EV_PACKET_ARRIVAL_AT_QUEUE = 1
EV_DEQUEUE_COMPLETE = 2
EV_PACKET_ARRIVAL_AT_RECEIVER = 3
EV_ACK_ARRIVAL_AT_SENDER = 4
EV_PACER_TICK = 5
EV_RTO_EXPIRY = 6
EV_SIM_END = 7

EVENT_NAMES = (
    "flow-start",
    "packet-arrival-at-queue",
    "dequeue-complete",
    "packet-arrival-at-receiver",
    "ack-arrival-at-sender",
    "pacer-tick",
    "rto-expiry",
    "sim-end",
)


class SchedulingError(Exception):
    """An event was scheduled before the current virtual time."""


def divceil(num: int, den: int) -> int:
    return -(-num // den)


def serialization_us(nbytes: int, capacity_bps: int) -> int:
    """Wire time of nbytes at capacity_bps: ceil of exactly 8*nbytes/capacity seconds, in us."""
    return divceil(nbytes * 8_000_000, capacity_bps)


def occupancy_delay_us(occupancy_bytes: int, capacity_bps: int) -> int:
    """Drain time of a byte backlog at link rate, in us."""
    return divceil(occupancy_bytes * 8_000_000, capacity_bps)


@dataclass
class LinkModel:
    """Dimensions of the bottleneck path."""

    capacity_bps: int
    prop_fwd_us: int
    prop_bwd_us: int
    buffer_bytes: int

    def serialization_us(self, nbytes: int) -> int:
        return serialization_us(nbytes, self.capacity_bps)

    def rtt_min_us(self, packet_size: int) -> int:
        """Floor RTT: both propagation legs plus one forward data serialization."""
        return self.prop_fwd_us + self.prop_bwd_us + self.serialization_us(packet_size)


@dataclass
class ClockModel:
    """Receiver-side clock; reported time = true time + offset + skew drift.

    The skew term truncates toward zero so reported timestamps stay integers.
    """

    offset_us: int = 0
    skew_ppm: float = 0.0

    def reported_us(self, t_us: int) -> int:
        if not self.skew_ppm:
            return t_us + self.offset_us
        return t_us + self.offset_us + int(self.skew_ppm * t_us / 1_000_000.0)


class EventLoop:
    """Min-heap event queue over integer-microsecond virtual time.

    Ties at equal timestamps fire in insertion order (monotone sequence
    numbers), which makes every run bit-reproducible.
    """

    def __init__(self):
        self._heap = []
        self._seq = 0
        self.now_us = 0
        self._handlers = [None] * len(EVENT_NAMES)
        self.events_processed = 0
        self.after_event = None  # optional audit hook, called as fn(t, kind)

    def register(self, kind: int, handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, fire_at_us: int, kind: int, payload=None) -> None:
        if fire_at_us < self.now_us:
            raise SchedulingError(
                f"cannot schedule {EVENT_NAMES[kind]} at {fire_at_us} us, now is {self.now_us} us"
            )
        heapq.heappush(self._heap, (fire_at_us, self._seq, kind, payload))
        self._seq += 1

    def run(self, until_us: int | None = None) -> None:
        """Process events in order until the heap drains or until_us passes."""
        heap = self._heap
        handlers = self._handlers
        audit = self.after_event
        while heap:
            if until_us is not None and heap[0][0] > until_us:
                break
            t, _, kind, payload = heapq.heappop(heap)
            self.now_us = t
            self.events_processed += 1
            handlers[kind](t, payload)
            if audit is not None:
                audit(t, kind)
        if until_us is not None and self.now_us < until_us:
            self.now_us = until_us


class BottleneckQueue:
    """FIFO tail-drop byte buffer in front of a fixed-rate server.

    A packet is admitted iff occupancy_bytes + size <= buffer_bytes; admission
    is byte-granular and the in-service packet stays part of the occupancy
    until its last bit leaves. The queue schedules its own dequeue-complete
    events; the owner routes the departed packet onward.
    """

    def __init__(self, loop: EventLoop, capacity_bps: int, buffer_bytes: int):
        self.loop = loop
        self.capacity_bps = capacity_bps
        self.buffer_bytes = buffer_bytes
        self._waiting = deque()
        self.in_service = None
        self.occupancy_bytes = 0
        self.max_occupancy_bytes = 0
        self.busy_until_us = 0
        self._busy_start_us = 0
        self._busy_bytes = 0  # bytes that began service in the current busy period
        self.admitted_packets = 0
        self.dropped_packets = 0
        self.dropped_bytes = 0
        self.drops_by_flow = {}
        self.dropped_bytes_by_flow = {}
        self.held_bytes_by_flow = {}
        self.drop_log = []  # (t_us, flow_id)

    def enqueue(self, pkt, now_us: int) -> bool:
        """Admit or tail-drop an arriving packet. Returns True when admitted."""
        size = pkt.size_bytes
        if self.occupancy_bytes + size > self.buffer_bytes:
            self.dropped_packets += 1
            self.dropped_bytes += size
            fid = pkt.flow_id
            self.drops_by_flow[fid] = self.drops_by_flow.get(fid, 0) + 1
            self.dropped_bytes_by_flow[fid] = self.dropped_bytes_by_flow.get(fid, 0) + size
            self.drop_log.append((now_us, fid))
            return False
        self.occupancy_bytes += size
        if self.occupancy_bytes > self.max_occupancy_bytes:
            self.max_occupancy_bytes = self.occupancy_bytes
        self.admitted_packets += 1
        fid = pkt.flow_id
        self.held_bytes_by_flow[fid] = self.held_bytes_by_flow.get(fid, 0) + size
        if self.in_service is None:
            self._busy_start_us = now_us
            self._busy_bytes = 0
            self._begin_service(pkt)
        else:
            self._waiting.append(pkt)
        return True

    def _begin_service(self, pkt) -> None:
        self.in_service = pkt
        self._busy_bytes += pkt.size_bytes
        done = self._busy_start_us + divceil(self._busy_bytes * 8_000_000, self.capacity_bps)
        self.busy_until_us = done
        self.loop.schedule(done, EV_DEQUEUE_COMPLETE)

    def service_complete(self, now_us: int):
        """Handler body for dequeue-complete: pop the served packet, start the next."""
        pkt = self.in_service
        self.in_service = None
        self.occupancy_bytes -= pkt.size_bytes
        self.held_bytes_by_flow[pkt.flow_id] -= pkt.size_bytes
        if self._waiting:
            self._begin_service(self._waiting.popleft())
        return pkt

    def ground_truth_delay_us(self, now_us: int) -> int:
        """Queueing delay a packet arriving right now would experience:
        residual serialization of the in-service packet plus drain time of
        the bytes waiting behind it."""
        if self.in_service is None:
            return 0
        residual = self.busy_until_us - now_us
        waiting = self.occupancy_bytes - self.in_service.size_bytes
        return residual + occupancy_delay_us(waiting, self.capacity_bps)
