"""Per-flow and aggregate statistics plus their delimited exports.

Definitions:

- goodput: unique application bytes delivered / duration, where duration runs
  from the flow's first data transmission to its last new-data delivery.
- throughput: all transmitted bytes, retransmissions included, over the same
  duration.
- loss %: packets dropped at the bottleneck / packets transmitted * 100.
- rtt_mean/rtt_std: per-ACK samples, unweighted by default; a time-weighted
  mean is available as an alternative, and an optional warm-up window can be
  excluded from the RTT statistics.

All functions are pure over finished traces.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

SUMMARY_COLUMNS = (
    "cca",
    "threshold",
    "buffer_bdp",
    "gput_mbps",
    "tput_mbps",
    "loss_pct",
    "rtt_avg_ms",
    "rtt_std_ms",
    "jfi",
)
TIMESERIES_COLUMNS = ("t_us", "cwnd_bytes", "rtt_us", "owqd_us", "queue_bytes")
CDF_COLUMNS = ("rtt_ms", "fraction")


class FlowTrace:
    """Raw per-flow records accumulated while a simulation runs."""

    __slots__ = (
        "flow_id",
        "start_us",
        "first_send_us",
        "last_new_delivery_us",
        "unique_bytes_delivered",
        "transmitted_packets",
        "transmitted_bytes",
        "retransmitted_packets",
        "retransmitted_bytes",
        "rto_count",
        "rtt_samples",
        "ack_rows",
        "retx_latencies_us",
        "chunk_first_send",
        "dropped_packets",
        "dropped_bytes",
        "reaction_log",
        "ss_exit_us",
    )

    def __init__(self, flow_id: int):
        self.flow_id = flow_id
        self.start_us = None
        self.first_send_us = None
        self.last_new_delivery_us = None
        self.unique_bytes_delivered = 0
        self.transmitted_packets = 0
        self.transmitted_bytes = 0
        self.retransmitted_packets = 0
        self.retransmitted_bytes = 0
        self.rto_count = 0
        self.rtt_samples = []  # (t_us, rtt_us)
        self.ack_rows = []  # (t_us, cwnd, rtt_us, owqd_us, queue_bytes), when collected
        self.retx_latencies_us = []
        self.chunk_first_send = {}
        self.dropped_packets = 0
        self.dropped_bytes = 0
        self.reaction_log = []
        self.ss_exit_us = None


@dataclass
class FlowReport:
    """One flow's summary statistics and (optional) per-ack series."""

    flow_id: int
    goodput_bps: float
    throughput_bps: float
    loss_pct: float
    rtt_mean_us: float
    rtt_std_us: float
    rtt_min_us: int
    duration_us: int
    unique_bytes: int
    transmitted_packets: int
    transmitted_bytes: int
    dropped_packets: int
    retransmitted_packets: int
    rto_count: int
    retx_latency_mean_us: float
    empty: bool
    rtt_samples: list = field(repr=False, default_factory=list)
    cwnd_series: list = field(repr=False, default_factory=list)
    owqd_series: list = field(repr=False, default_factory=list)
    queue_series: list = field(repr=False, default_factory=list)


@dataclass
class AggregateReport:
    """Cross-flow statistics for one simulation run."""

    per_flow: list
    jain_index: float
    aggregate_goodput_bps: float  # all unique bytes over the union time span
    goodput_mean_bps: float
    goodput_std_bps: float
    loss_mean_pct: float
    loss_std_pct: float
    rtt_mean_us: float
    rtt_std_us: float  # spread of the per-flow means


def mean_std(values):
    vals = list(values)
    if not vals:
        return math.nan, math.nan
    m = sum(vals) / len(vals)
    var = sum((v - m) ** 2 for v in vals) / len(vals)
    return m, math.sqrt(var)


def rtt_average_us(samples, weighting: str = "sample") -> float:
    """Mean RTT from (t, rtt) samples; 'time' weights each sample by how long
    it stayed the latest observation."""
    if not samples:
        return math.nan
    if weighting == "sample":
        return sum(rtt for _, rtt in samples) / len(samples)
    if weighting != "time":
        raise ValueError(f"unknown weighting {weighting!r}")
    if len(samples) == 1:
        return float(samples[0][1])
    total = 0.0
    span = 0
    for (t0, rtt), (t1, _) in zip(samples, samples[1:]):
        dt = t1 - t0
        total += rtt * dt
        span += dt
    if span == 0:
        return sum(rtt for _, rtt in samples) / len(samples)
    return total / span


def flow_report(trace: FlowTrace, weighting: str = "sample", warmup_us: int = 0) -> FlowReport:
    """Summarize a finished trace. warmup_us > 0 drops RTT samples (and series
    rows) earlier than start + warmup from the delay statistics; byte counts
    always cover the whole transfer."""
    if trace.first_send_us is None or trace.last_new_delivery_us is None:
        duration = 0
    else:
        duration = trace.last_new_delivery_us - trace.first_send_us
    if duration > 0:
        goodput = trace.unique_bytes_delivered * 8_000_000 / duration
        throughput = trace.transmitted_bytes * 8_000_000 / duration
    else:
        goodput = throughput = 0.0
    if trace.transmitted_packets:
        loss_pct = 100.0 * trace.dropped_packets / trace.transmitted_packets
    else:
        loss_pct = 0.0

    samples = trace.rtt_samples
    cutoff = None
    if warmup_us and trace.first_send_us is not None:
        cutoff = trace.first_send_us + warmup_us
        samples = [s for s in samples if s[0] >= cutoff]
    rtts = [rtt for _, rtt in samples]
    empty = not rtts
    if rtts:
        avg = rtt_average_us(samples, weighting)
        per_sample_mean = sum(rtts) / len(rtts)
        var = sum((r - per_sample_mean) ** 2 for r in rtts) / len(rtts)
        std = math.sqrt(var)
        rtt_min = min(rtts)
    else:
        avg = std = 0.0
        rtt_min = 0

    rows = trace.ack_rows
    if cutoff is not None:
        rows = [r for r in rows if r[0] >= cutoff]
    lat = trace.retx_latencies_us
    return FlowReport(
        flow_id=trace.flow_id,
        goodput_bps=goodput,
        throughput_bps=throughput,
        loss_pct=loss_pct,
        rtt_mean_us=avg,
        rtt_std_us=std,
        rtt_min_us=rtt_min,
        duration_us=duration,
        unique_bytes=trace.unique_bytes_delivered,
        transmitted_packets=trace.transmitted_packets,
        transmitted_bytes=trace.transmitted_bytes,
        dropped_packets=trace.dropped_packets,
        retransmitted_packets=trace.retransmitted_packets,
        rto_count=trace.rto_count,
        retx_latency_mean_us=(sum(lat) / len(lat)) if lat else 0.0,
        empty=empty,
        rtt_samples=samples,
        cwnd_series=[(r[0], r[1]) for r in rows],
        owqd_series=[(r[0], r[3]) for r in rows],
        queue_series=[(r[0], r[4]) for r in rows],
    )


def aggregate_report(traces, weighting: str = "sample", warmup_us: int = 0) -> AggregateReport:
    """Cross-flow roll-up of one run. aggregate_goodput covers first send of
    any flow to last new delivery of any flow, so it reads as link utilization
    when flows overlap."""
    reports = [flow_report(tr, weighting, warmup_us) for tr in traces]
    goodputs = [r.goodput_bps for r in reports]
    jfi = jain_index(goodputs) if any(goodputs) else 0.0
    starts = [tr.first_send_us for tr in traces if tr.first_send_us is not None]
    ends = [tr.last_new_delivery_us for tr in traces if tr.last_new_delivery_us is not None]
    span = (max(ends) - min(starts)) if starts and ends else 0
    total_unique = sum(tr.unique_bytes_delivered for tr in traces)
    agg = total_unique * 8_000_000 / span if span > 0 else 0.0
    g_mean, g_std = mean_std(goodputs)
    l_mean, l_std = mean_std(r.loss_pct for r in reports)
    r_mean, r_std = mean_std(r.rtt_mean_us for r in reports if not r.empty)
    return AggregateReport(
        per_flow=reports,
        jain_index=jfi,
        aggregate_goodput_bps=agg,
        goodput_mean_bps=g_mean,
        goodput_std_bps=g_std,
        loss_mean_pct=l_mean,
        loss_std_pct=l_std,
        rtt_mean_us=r_mean,
        rtt_std_us=r_std,
    )


def jain_index(values) -> float:
    """Fairness of an allocation: (sum x)^2 / (n * sum x^2), in (1/n, 1]."""
    vals = list(values)
    if not vals:
        raise ValueError("jain_index needs at least one value")
    if any(v < 0 for v in vals):
        raise ValueError("jain_index values must be non-negative")
    sq = sum(v * v for v in vals)
    if sq == 0:
        raise ValueError("jain_index needs at least one positive value")
    s = sum(vals)
    return (s * s) / (len(vals) * sq)


def rtt_cdf(rtt_samples_us):
    """Empirical step CDF: one (value, fraction of samples <= value) point per
    distinct sample value, ascending; last fraction is exactly 1."""
    if not rtt_samples_us:
        return []
    ordered = sorted(rtt_samples_us)
    n = len(ordered)
    points = []
    prev = None
    for i, v in enumerate(ordered):
        if v != prev:
            if prev is not None:
                points.append((prev, i / n))
            prev = v
    points.append((prev, 1.0))
    return points


def quantile(sorted_values, q: float):
    """Empirical inverse CDF at q in (0, 1]."""
    if not sorted_values:
        raise ValueError("quantile of empty sample set")
    if not 0 < q <= 1:
        raise ValueError("q must be in (0, 1]")
    idx = max(0, math.ceil(q * len(sorted_values)) - 1)
    return sorted_values[idx]


# -- delimited exports --------------------------------------------------------


def write_summary_csv(path, rows) -> None:
    """rows: iterables matching SUMMARY_COLUMNS; floats are fixed to 6 digits
    so identical runs serialize to identical bytes."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_timeseries_csv(path, ack_rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMESERIES_COLUMNS)
        w.writerows(ack_rows)


def write_cdf_csv(path, cdf_points_us) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CDF_COLUMNS)
        for rtt_us, frac in cdf_points_us:
            w.writerow([_fmt(rtt_us / 1000.0), _fmt(frac)])


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.6f}"
    return value
