"""Classic AIMD baseline: halve on loss, collapse to one packet on timeout."""

from __future__ import annotations

from .base import CongestionController

REACTION_LOSS = "loss"
REACTION_TIMEOUT = "timeout"


class NewReno(CongestionController):
    name = "newreno"

    def on_ack(self, now_us, acked, rtt_sample_us, pairs) -> None:
        if self._in_recovery(acked[-1][2]):
            return
        acked_bytes = 0
        for _, size, _ in acked:
            acked_bytes += size
        self._reno_growth(acked_bytes)

    def on_loss_detected(self, now_us, lost) -> None:
        if self._in_recovery(lost[-1][2]):
            return
        self.ssthresh_bytes = max(self.cwnd_bytes // 2, self._floor_bytes())
        self.cwnd_bytes = self.ssthresh_bytes
        self._finish_reaction(now_us, REACTION_LOSS)

    def on_rto(self, now_us) -> None:
        self.ssthresh_bytes = max(self.cwnd_bytes // 2, self._floor_bytes())
        self.cwnd_bytes = self.mss
        self._finish_reaction(now_us, REACTION_TIMEOUT)

    def _finish_reaction(self, now_us, kind) -> None:
        self.recovery_start_us = now_us
        self._stash = 0
        self._note_ss_exit(now_us)
        self.reaction_log.append((now_us, kind))
