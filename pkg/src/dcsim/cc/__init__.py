"""Congestion controllers, addressable by name."""

from __future__ import annotations

from .base import CongestionController, K_DEFAULT_MAX_CWND_BYTES
from .cubic import Cubic, CubicState, cubic_k_s, cubic_window
from .delay_control import (
    BandwidthFilter,
    DelayControl,
    K_SAMPLE_GAIN,
    OwqdEstimator,
    WestwoodPlus,
    owd_variation_us,
)
from .newreno import NewReno

CONTROLLER_NAMES = ("dc", "westwood+", "newreno", "cubic")


def make_controller(
    name: str,
    mss: int,
    owqd_th_us: int | None = None,
    max_cwnd_bytes: int = K_DEFAULT_MAX_CWND_BYTES,
    sample_gain: float = K_SAMPLE_GAIN,
) -> CongestionController:
    if name == "dc":
        return DelayControl(
            mss, owqd_th_us=owqd_th_us, sample_gain=sample_gain, max_cwnd_bytes=max_cwnd_bytes
        )
    if name == "westwood+":
        return WestwoodPlus(mss, sample_gain=sample_gain, max_cwnd_bytes=max_cwnd_bytes)
    if name == "newreno":
        return NewReno(mss, max_cwnd_bytes=max_cwnd_bytes)
    if name == "cubic":
        return Cubic(mss, max_cwnd_bytes=max_cwnd_bytes)
    raise ValueError(f"unknown congestion controller {name!r}, expected one of {CONTROLLER_NAMES}")
