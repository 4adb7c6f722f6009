"""Cubic baseline: cubic window growth around the last maximum, with the
AIMD-tracking friendly region enabled and no delay-based slow-start exit.

Windows are kept in bytes; the cubic polynomial works in packet (MSS) units
as usual, with C = 0.4 and beta = 0.7.
"""

from __future__ import annotations

from dataclasses import dataclass

from .base import CongestionController

K_CUBIC_C = 0.4
K_CUBIC_BETA = 0.7
K_FRIENDLY_ALPHA = 3 * (1 - K_CUBIC_BETA) / (1 + K_CUBIC_BETA)
K_MAX_TARGET_RATIO = 1.5  # growth target clamped to 1.5x cwnd per ack burst
K_FAST_CONVERGENCE_FACTOR = (1 + K_CUBIC_BETA) / 2  # extra w_max discount when losing ground

REACTION_LOSS = "loss"
REACTION_TIMEOUT = "timeout"


def cubic_k_s(w_max_mss: float) -> float:
    """Time (seconds) for the cubic curve to return to the previous maximum."""
    return (w_max_mss * (1 - K_CUBIC_BETA) / K_CUBIC_C) ** (1 / 3)


@dataclass
class CubicState:
    w_max_bytes: int
    k_s: float
    epoch_start_us: int | None
    tcp_friendly_w_bytes: float


def cubic_window(t_since_epoch_s: float, state: CubicState, mss: int) -> int:
    """Window the cubic curve authorizes t seconds into the epoch, floored by
    the AIMD-tracking friendly window."""
    w_max_mss = state.w_max_bytes / mss
    w_mss = K_CUBIC_C * (t_since_epoch_s - state.k_s) ** 3 + w_max_mss
    return int(max(w_mss * mss, state.tcp_friendly_w_bytes))


class Cubic(CongestionController):
    name = "cubic"

    def __init__(self, mss, **kwargs):
        super().__init__(mss, **kwargs)
        self.state = CubicState(0, 0.0, None, 0.0)
        self.srtt_us = None

    def on_ack(self, now_us, acked, rtt_sample_us, pairs) -> None:
        if self.srtt_us is None:
            self.srtt_us = rtt_sample_us
        else:
            self.srtt_us += (rtt_sample_us - self.srtt_us) >> 3
        if self._in_recovery(acked[-1][2]):
            return
        acked_bytes = 0
        for _, size, _ in acked:
            acked_bytes += size
        if self.ssthresh_bytes is None or self.cwnd_bytes < self.ssthresh_bytes:
            self.cwnd_bytes = min(self.cwnd_bytes + acked_bytes, self.max_cwnd_bytes)
            return
        self._avoidance_growth(now_us, acked_bytes)

    def _avoidance_growth(self, now_us, acked_bytes) -> None:
        st = self.state
        if st.epoch_start_us is None:
            st.epoch_start_us = now_us
            if st.w_max_bytes < self.cwnd_bytes:
                # entering avoidance above the recorded maximum: restart the
                # curve from here so it probes instead of jumping
                st.w_max_bytes = self.cwnd_bytes
                st.k_s = 0.0
            st.tcp_friendly_w_bytes = float(self.cwnd_bytes)
        st.tcp_friendly_w_bytes += K_FRIENDLY_ALPHA * self.mss * acked_bytes / self.cwnd_bytes
        t_s = (now_us - st.epoch_start_us + (self.srtt_us or 0)) / 1e6
        target = cubic_window(t_s, st, self.mss)
        max_target = int(self.cwnd_bytes * K_MAX_TARGET_RATIO)
        if target > max_target:
            target = max_target
        if target > self.cwnd_bytes:
            self.cwnd_bytes += (target - self.cwnd_bytes) * acked_bytes // self.cwnd_bytes
        if self.cwnd_bytes > self.max_cwnd_bytes:
            self.cwnd_bytes = self.max_cwnd_bytes

    def on_loss_detected(self, now_us, lost) -> None:
        if self._in_recovery(lost[-1][2]):
            return
        self._reduce(now_us, REACTION_LOSS, collapse=False)

    def on_rto(self, now_us) -> None:
        self._reduce(now_us, REACTION_TIMEOUT, collapse=True)

    def _reduce(self, now_us, kind, collapse) -> None:
        st = self.state
        if self.cwnd_bytes < st.w_max_bytes:
            # shrinking peak: competing flows are gaining, so aim the next
            # epoch below the window we just had and release room faster
            st.w_max_bytes = int(self.cwnd_bytes * K_FAST_CONVERGENCE_FACTOR)
        else:
            st.w_max_bytes = self.cwnd_bytes
        st.k_s = cubic_k_s(st.w_max_bytes / self.mss)
        st.epoch_start_us = None
        self.ssthresh_bytes = max(int(self.cwnd_bytes * K_CUBIC_BETA), self._floor_bytes())
        self.cwnd_bytes = self.mss if collapse else self.ssthresh_bytes
        self.recovery_start_us = now_us
        self._stash = 0
        self._note_ss_exit(now_us)
        self.reaction_log.append((now_us, kind))
