"""Congestion-controller callback contract shared by every algorithm.

Controllers are deterministic functions of their event history: the sender
feeds them acknowledgements (with receive-timestamp pairs), detected losses,
and timeouts; they answer with an authorized send window. The window never
falls below two packets even when internal state says one (a timeout leaves
cwnd at one packet, Linux style, while the floor keeps the flow able to
probe).
"""

from __future__ import annotations

K_INITIAL_WINDOW_PACKETS = 10
K_MINIMUM_WINDOW_PACKETS = 2
K_DEFAULT_MAX_CWND_BYTES = 1 << 24


class CongestionController:
    name = "base"

    def __init__(self, mss: int, max_cwnd_bytes: int = K_DEFAULT_MAX_CWND_BYTES):
        self.mss = mss
        self.max_cwnd_bytes = max_cwnd_bytes
        self.cwnd_bytes = K_INITIAL_WINDOW_PACKETS * mss
        self.ssthresh_bytes = None  # None = not yet set (unbounded slow start)
        self.recovery_start_us = None
        self.ss_exit_us = None
        self.reaction_log = []  # (t_us, kind) for every window reduction
        self._stash = 0  # fractional congestion-avoidance credit, in bytes

    # -- contract -----------------------------------------------------------

    def authorized_send_window(self) -> int:
        return max(self.cwnd_bytes, K_MINIMUM_WINDOW_PACKETS * self.mss)

    def on_ack(self, now_us, acked, rtt_sample_us, pairs) -> None:
        """acked: [(pn, size_bytes, sent_at_us)] newly acknowledged, ascending;
        pairs: [(send_us, reported_recv_us)] for the same packets in arrival order."""
        raise NotImplementedError

    def on_loss_detected(self, now_us, lost) -> None:
        """lost: [(pn, size_bytes, sent_at_us)] newly declared lost."""
        raise NotImplementedError

    def on_rto(self, now_us) -> None:
        raise NotImplementedError

    # -- shared helpers -------------------------------------------------------

    def _in_recovery(self, sent_at_us: int) -> bool:
        return self.recovery_start_us is not None and sent_at_us <= self.recovery_start_us

    def _note_ss_exit(self, now_us: int) -> None:
        if self.ss_exit_us is None:
            self.ss_exit_us = now_us

    def _reno_growth(self, acked_bytes: int) -> None:
        """Slow start adds every acked byte; congestion avoidance adds one
        packet per window's worth of acknowledged bytes (fractional credit
        kept in a stash so integer math never stalls)."""
        if self.ssthresh_bytes is None or self.cwnd_bytes < self.ssthresh_bytes:
            self.cwnd_bytes += acked_bytes
        else:
            self._stash += acked_bytes
            count = self._stash // self.cwnd_bytes
            if count:
                self._stash -= count * self.cwnd_bytes
                self.cwnd_bytes += count * self.mss
        if self.cwnd_bytes > self.max_cwnd_bytes:
            self.cwnd_bytes = self.max_cwnd_bytes

    def _floor_bytes(self) -> int:
        return K_MINIMUM_WINDOW_PACKETS * self.mss
