"""Bandwidth-estimating controller with an optional one-way queueing-delay
trigger.

The base behavior is Westwood-style: Reno growth, and on congestion the slow
start threshold is set to the estimated bandwidth times the lowest RTT seen,
so the window lands near the path's bandwidth-delay product. The delay-control
variant additionally reacts, with the identical reduction, as soon as the
accumulated one-way queueing-delay estimate exceeds a configured threshold,
i.e. before the bottleneck buffer overflows. With the trigger disabled the
controller IS the plain Westwood-plus baseline; the two share every code path.
"""

from __future__ import annotations

from .base import CongestionController

K_SAMPLE_GAIN = 0.8  # weight of the newest bandwidth sample (old value keeps 0.2)
K_MIN_SAMPLE_INTERVAL_US = 50_000  # floor for the bandwidth sampling interval
K_SRTT_GAIN_SHIFT = 3  # srtt gain 1/8
K_SS_EXIT_GUARD_FLOOR_US = 1_000
K_SS_EXIT_GUARD_SHIFT = 3  # initial slow start ends when rtt > rtt_min + rtt_min/8

REACTION_LOSS = "loss"
REACTION_DELAY = "delay"
REACTION_TIMEOUT = "timeout"


def owd_variation_us(send_delta_us: int, recv_delta_us: int) -> int:
    """Change in one-way delay between two consecutively received packets.

    Computed from inter-send and inter-receive gaps, so constant clock offsets
    between sender and receiver cancel exactly.
    """
    return recv_delta_us - send_delta_us


class OwqdEstimator:
    """Accumulates one-way-delay variation into a queueing-delay estimate.

    The running sum clamps at zero, anchoring the estimate to the emptiest
    queue observed since it was last re-baselined; non-monotone timestamp
    pairs are rejected and counted instead of corrupting the state.
    """

    __slots__ = ("owqd_us", "last_send_us", "last_recv_us", "rejected_samples", "clamp_count", "samples")

    def __init__(self):
        self.owqd_us = 0
        self.last_send_us = None
        self.last_recv_us = None
        self.rejected_samples = 0
        self.clamp_count = 0
        self.samples = 0

    def update(self, send_us: int, recv_us: int) -> int:
        last_send = self.last_send_us
        if last_send is None:
            self.last_send_us = send_us
            self.last_recv_us = recv_us
            self.samples = 1
            return self.owqd_us
        if send_us <= last_send or recv_us < self.last_recv_us:
            self.rejected_samples += 1
            return self.owqd_us
        owqd = self.owqd_us + owd_variation_us(send_us - last_send, recv_us - self.last_recv_us)
        if owqd < 0:
            owqd = 0
            self.clamp_count += 1
        self.owqd_us = owqd
        self.last_send_us = send_us
        self.last_recv_us = recv_us
        self.samples += 1
        return owqd

    def rebaseline(self) -> None:
        """Restart the accumulation at zero, keeping the timestamp state.

        Called after a congestion reaction: the window cut is expected to
        drain the sender's own queue share, so the level at the reaction
        becomes the new floor and the clamp re-anchors at whatever minimum
        follows it.
        """
        self.owqd_us = 0


class BandwidthFilter:
    """Low-pass filter over per-interval delivery-rate samples.

    One sample per elapsed interval of max(srtt, 50 ms): acknowledged bytes
    over the actual interval length. The first sample initializes the filter
    directly; afterwards 0.2 * previous + 0.8 * sample, except that a sample
    equal to the estimate leaves it untouched so fixed points hold exactly
    at any scale.
    """

    __slots__ = (
        "bwe_bps",
        "sample_gain",
        "keep_gain",
        "_acked_bytes",
        "_interval_start_us",
        "sample_count",
    )

    def __init__(self, sample_gain: float = K_SAMPLE_GAIN):
        self.bwe_bps = None
        self.sample_gain = sample_gain
        # the decimal complement, not 1.0-gain float noise: 0.8 pairs with 0.2
        self.keep_gain = round(1.0 - sample_gain, 12)
        self._acked_bytes = 0
        self._interval_start_us = None
        self.sample_count = 0

    def on_ack(self, now_us: int, acked_bytes: int, srtt_us: int) -> None:
        if self._interval_start_us is None:
            self._interval_start_us = now_us
            self._acked_bytes = acked_bytes
            return
        self._acked_bytes += acked_bytes
        interval = now_us - self._interval_start_us
        if interval < max(srtt_us, K_MIN_SAMPLE_INTERVAL_US):
            return
        sample = self._acked_bytes * 8_000_000 / interval
        if self.bwe_bps is None:
            self.bwe_bps = sample
        elif sample != self.bwe_bps:
            self.bwe_bps = self.keep_gain * self.bwe_bps + self.sample_gain * sample
        self.sample_count += 1
        self._interval_start_us = now_us
        self._acked_bytes = 0


class DelayControl(CongestionController):
    """Westwood-plus core with the one-way queueing-delay reaction.

    owqd_th_us=None disables the delay trigger entirely, which is exactly the
    Westwood-plus baseline.
    """

    name = "dc"

    def __init__(self, mss, owqd_th_us=None, sample_gain=K_SAMPLE_GAIN, **kwargs):
        super().__init__(mss, **kwargs)
        self.owqd_th_us = owqd_th_us
        self.estimator = OwqdEstimator()
        self.bwe = BandwidthFilter(sample_gain)
        self.rtt_min_us = None
        self.srtt_us = None
        self.last_reaction_us = None

    # -- signal maintenance ---------------------------------------------------

    @property
    def owqd_us(self) -> int:
        return self.estimator.owqd_us

    def _update_rtt(self, rtt_sample_us: int) -> None:
        if self.srtt_us is None:
            self.srtt_us = rtt_sample_us
            self.rtt_min_us = rtt_sample_us
        else:
            self.srtt_us += (rtt_sample_us - self.srtt_us) >> K_SRTT_GAIN_SHIFT
            if rtt_sample_us < self.rtt_min_us:
                self.rtt_min_us = rtt_sample_us

    def _bwe_window_bytes(self) -> int | None:
        """Estimated bandwidth-delay product: bwe_bps * rtt_min, in bytes."""
        if self.bwe.bwe_bps is None or self.rtt_min_us is None:
            return None
        return int(self.bwe.bwe_bps * self.rtt_min_us / 8_000_000)

    # -- callbacks -------------------------------------------------------------

    def on_ack(self, now_us, acked, rtt_sample_us, pairs) -> None:
        self._update_rtt(rtt_sample_us)
        acked_bytes = 0
        for _, size, _ in acked:
            acked_bytes += size
        self.bwe.on_ack(now_us, acked_bytes, self.srtt_us)
        est = self.estimator
        for send_us, recv_us in pairs:
            est.update(send_us, recv_us)

        # end the initial slow start as soon as the rtt shows queue buildup,
        # before the overshoot fills the bottleneck buffer
        if self.ssthresh_bytes is None:
            guard = max(self.rtt_min_us >> K_SS_EXIT_GUARD_SHIFT, K_SS_EXIT_GUARD_FLOOR_US)
            if rtt_sample_us > self.rtt_min_us + guard:
                self.ssthresh_bytes = self.cwnd_bytes
                self._note_ss_exit(now_us)

        if not self._in_recovery(acked[-1][2]):
            self._reno_growth(acked_bytes)

        if self._check_delay_event(now_us):
            self._on_congestion_event(now_us, REACTION_DELAY)

    def _check_delay_event(self, now_us: int) -> bool:
        """True when the queueing-delay estimate exceeds the threshold and at
        least one smoothed RTT has passed since the last reaction of any kind."""
        if self.owqd_th_us is None or self.estimator.owqd_us <= self.owqd_th_us:
            return False
        if self.last_reaction_us is None or self.srtt_us is None:
            return True
        return now_us - self.last_reaction_us >= self.srtt_us

    def on_loss_detected(self, now_us, lost) -> None:
        if not self._in_recovery(lost[-1][2]):
            self._on_congestion_event(now_us, REACTION_LOSS)

    def on_rto(self, now_us) -> None:
        self._set_westwood_ssthresh()
        self.cwnd_bytes = self.mss  # timeout collapses to one packet
        self._after_reaction(now_us, REACTION_TIMEOUT)

    def _on_congestion_event(self, now_us, kind) -> None:
        """Identical reduction for loss and for delay-threshold crossings."""
        self._set_westwood_ssthresh()
        if self.cwnd_bytes > self.ssthresh_bytes:
            self.cwnd_bytes = self.ssthresh_bytes
        self._after_reaction(now_us, kind)

    def _set_westwood_ssthresh(self) -> None:
        target = self._bwe_window_bytes()
        if target is None:
            target = self.cwnd_bytes // 2  # no bandwidth sample yet
        self.ssthresh_bytes = max(target, self._floor_bytes())

    def _after_reaction(self, now_us, kind) -> None:
        self.recovery_start_us = now_us
        self.last_reaction_us = now_us
        self._stash = 0
        self.estimator.rebaseline()
        self._note_ss_exit(now_us)
        self.reaction_log.append((now_us, kind))


class WestwoodPlus(DelayControl):
    """Plain Westwood-plus: the delay trigger permanently off."""

    name = "westwood+"

    def __init__(self, mss, **kwargs):
        super().__init__(mss, owqd_th_us=None, **kwargs)
