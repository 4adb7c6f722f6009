"""Wires endpoints, bottleneck, and event loop into a runnable simulation.

Forward path: sender -> tail-drop queue -> fixed-rate serialization ->
forward propagation -> receiver. Reverse path: ACK frames cross back with
propagation delay only. Every per-flow byte that has reached the bottleneck
is accounted to one of four places at all times (delivered, dropped, queued,
propagating), which the conservation audit checks after any event when
enabled; a just-transmitted packet may additionally be in hand-off to the
queue within the same timestamp, so transmitted bytes may lead the accounted
sum between those two events and must match it exactly once the loop drains.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

from .metrics import FlowReport, FlowTrace, flow_report
from .netsim import (
    EV_ACK_ARRIVAL_AT_SENDER,
    EV_DEQUEUE_COMPLETE,
    EV_FLOW_START,
    EV_PACER_TICK,
    EV_PACKET_ARRIVAL_AT_QUEUE,
    EV_PACKET_ARRIVAL_AT_RECEIVER,
    EV_RTO_EXPIRY,
    EV_SIM_END,
    BottleneckQueue,
    ClockModel,
    EventLoop,
    LinkModel,
)
from .transport import (
    K_DEFAULT_PACER_INTERVAL_US,
    K_DEFAULT_PACKET_SIZE,
    ReceiverEndpoint,
    SenderEndpoint,
)


class ConservationError(AssertionError):
    """A flow's bytes stopped adding up across the pipeline stages."""




@dataclass
class RunResult:
    traces: dict  # flow_id -> FlowTrace
    reports: dict  # flow_id -> FlowReport
    duration_us: int
    events_processed: int
    max_queue_bytes: int
    queue_dropped_packets: int
    queue_dropped_bytes: int
    drop_log: list = field(repr=False, default_factory=list)
    completions_us: dict = field(default_factory=dict)


class Simulation:
    def __init__(
        self,
        link: LinkModel,
        duration_us: int | None = None,
        collect_series: bool = False,
        audit: bool = False,
    ):
        self.link = link
        self.duration_us = duration_us
        self.collect_series = collect_series
        self.loop = EventLoop()
        self.queue = BottleneckQueue(self.loop, link.capacity_bps, link.buffer_bytes)
        self.senders = {}
        self.receivers = {}
        self.traces = {}
        self.fwd_inflight_bytes = {}  # per flow, dequeued but not yet at receiver
        self.delivered_bytes = {}  # per flow, everything that reached the receiver
        self.arrived_bytes = {}  # per flow, everything that reached the bottleneck
        self.ack_jitter = {}  # flow_id -> (max_us, rng), present only when on
        self.ended = False

        loop = self.loop
        loop.register(EV_FLOW_START, self._on_flow_start)
        loop.register(EV_PACKET_ARRIVAL_AT_QUEUE, self._on_packet_at_queue)
        loop.register(EV_DEQUEUE_COMPLETE, self._on_dequeue_complete)
        loop.register(EV_PACKET_ARRIVAL_AT_RECEIVER, self._on_packet_at_receiver)
        loop.register(EV_ACK_ARRIVAL_AT_SENDER, self._on_ack_at_sender)
        loop.register(EV_PACER_TICK, self._on_pacer_tick)
        loop.register(EV_RTO_EXPIRY, self._on_rto_expiry)
        loop.register(EV_SIM_END, self._on_sim_end)
        if audit:
            loop.after_event = self._audit

    def add_flow(
        self,
        controller,
        start_us: int = 0,
        transfer_bytes: int | None = None,
        packet_size: int = K_DEFAULT_PACKET_SIZE,
        ack_ratio: int = 1,
        pacer_interval_us: int = K_DEFAULT_PACER_INTERVAL_US,
        pacing_jitter_max_us: int = 0,
        jitter_rng=None,
        ack_jitter_max_us: int = 0,
        ack_jitter_rng=None,
        clock: ClockModel | None = None,
    ) -> int:
        flow_id = len(self.senders)
        trace = FlowTrace(flow_id)
        receiver = ReceiverEndpoint(flow_id, clock or ClockModel(), trace, ack_ratio)
        sender = SenderEndpoint(
            flow_id,
            self.loop,
            controller,
            trace,
            packet_size=packet_size,
            transfer_bytes=transfer_bytes,
            pacer_interval_us=pacer_interval_us,
            pacing_jitter_max_us=pacing_jitter_max_us,
            jitter_rng=jitter_rng,
            queue_occupancy=lambda: self.queue.occupancy_bytes,
            collect_series=self.collect_series,
        )
        self.senders[flow_id] = sender
        self.receivers[flow_id] = receiver
        self.traces[flow_id] = trace
        self.fwd_inflight_bytes[flow_id] = 0
        self.delivered_bytes[flow_id] = 0
        self.arrived_bytes[flow_id] = 0
        if ack_jitter_max_us and ack_jitter_rng is not None:
            self.ack_jitter[flow_id] = (ack_jitter_max_us, ack_jitter_rng)
        self.loop.schedule(start_us, EV_FLOW_START, flow_id)
        return flow_id

    # -- event handlers -------------------------------------------------------

    def _on_flow_start(self, t, flow_id):
        self.senders[flow_id].start(t)

    def _on_packet_at_queue(self, t, pkt):
        self.arrived_bytes[pkt.flow_id] += pkt.size_bytes
        if not self.queue.enqueue(pkt, t):
            tr = self.traces[pkt.flow_id]
            tr.dropped_packets += 1
            tr.dropped_bytes += pkt.size_bytes

    def _on_dequeue_complete(self, t, _payload):
        pkt = self.queue.service_complete(t)
        self.fwd_inflight_bytes[pkt.flow_id] += pkt.size_bytes
        self.loop.schedule(t + self.link.prop_fwd_us, EV_PACKET_ARRIVAL_AT_RECEIVER, pkt)

    def _on_packet_at_receiver(self, t, pkt):
        fid = pkt.flow_id
        self.fwd_inflight_bytes[fid] -= pkt.size_bytes
        self.delivered_bytes[fid] += pkt.size_bytes
        frame = self.receivers[fid].on_packet(pkt, t)
        if frame is not None:
            delay = self.link.prop_bwd_us
            jitter = self.ack_jitter.get(fid)
            if jitter is not None:
                delay += jitter[1].randint(0, jitter[0])
            self.loop.schedule(t + delay, EV_ACK_ARRIVAL_AT_SENDER, frame)

    def _on_ack_at_sender(self, t, frame):
        self.senders[frame.flow_id].on_ack(frame, t)

    def _on_pacer_tick(self, t, flow_id):
        self.senders[flow_id].on_pacer_tick(t)

    def _on_rto_expiry(self, t, payload):
        flow_id, token = payload
        self.senders[flow_id].on_rto_expiry(t, token)

    def _on_sim_end(self, t, _payload):
        self.ended = True

    # -- invariant audit ------------------------------------------------------

    def _audit(self, t, kind):
        self.check_conservation(t)

    def check_conservation(self, t_us: int | None = None, quiescent: bool = False) -> None:
        """arrived == delivered + dropped + queued + propagating at every event;
        transmitted may lead arrived only by packets still in hand-off to the
        queue, and must equal it when the event queue has drained."""
        q = self.queue
        for fid, trace in self.traces.items():
            held = q.held_bytes_by_flow.get(fid, 0)
            dropped = q.dropped_bytes_by_flow.get(fid, 0)
            arrived = self.arrived_bytes[fid]
            total = self.delivered_bytes[fid] + dropped + held + self.fwd_inflight_bytes[fid]
            if total != arrived or trace.transmitted_bytes < arrived or (
                quiescent and trace.transmitted_bytes != arrived
            ):
                raise ConservationError(
                    f"flow {fid} at t={t_us}: transmitted {trace.transmitted_bytes}, "
                    f"arrived {arrived}, accounted {total} (delivered "
                    f"{self.delivered_bytes[fid]}, dropped {dropped}, queued {held}, "
                    f"propagating {self.fwd_inflight_bytes[fid]})"
                )

    # -- run ------------------------------------------------------------------

    def run(self) -> RunResult:
        if self.duration_us is not None:
            self.loop.schedule(self.duration_us, EV_SIM_END)
            self.loop.run(until_us=self.duration_us)
        else:
            self.loop.run()
        self.check_conservation(self.loop.now_us, quiescent=True)
        for fid, trace in self.traces.items():
            trace.dropped_packets = self.queue.drops_by_flow.get(fid, 0)
            trace.dropped_bytes = self.queue.dropped_bytes_by_flow.get(fid, 0)
            ctrl = self.senders[fid].controller
            trace.reaction_log = list(ctrl.reaction_log)
            trace.ss_exit_us = ctrl.ss_exit_us
        return RunResult(
            traces=self.traces,
            reports={fid: flow_report(tr) for fid, tr in self.traces.items()},
            duration_us=self.loop.now_us,
            events_processed=self.loop.events_processed,
            max_queue_bytes=self.queue.max_occupancy_bytes,
            queue_dropped_packets=self.queue.dropped_packets,
            queue_dropped_bytes=self.queue.dropped_bytes,
            drop_log=self.queue.drop_log,
            completions_us={
                fid: s.completed_us for fid, s in self.senders.items() if s.completed_us is not None
            },
        )


def trace_digest(trace: FlowTrace) -> int:
    """Order-sensitive checksum of a flow's observable history; equal digests
    mean the runs were behaviourally identical ack by ack."""
    parts = [
        trace.transmitted_packets,
        trace.transmitted_bytes,
        trace.retransmitted_packets,
        trace.retransmitted_bytes,
        trace.rto_count,
        trace.unique_bytes_delivered,
        trace.last_new_delivery_us,
        tuple(trace.rtt_samples),
        tuple(trace.ack_rows),
        tuple(trace.reaction_log),
    ]
    return zlib.crc32(repr(parts).encode())
