"""Scenario execution: repetition averaging, parameter sweeps, and report
emission (CSV files plus rendered figures in the chosen output directory).

Seeds: repetition k runs with seed + k; the seed only randomizes per-flow
start jitter (0..5 ms), everything else is deterministic.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, replace
from pathlib import Path

from .cc import make_controller
from .metrics import (
    AggregateReport,
    SUMMARY_COLUMNS,
    aggregate_report,
    jain_index,
    mean_std,
    rtt_cdf,
    write_cdf_csv,
    write_summary_csv,
    write_timeseries_csv,
)
from .netsim import ClockModel
from .scenario import ConfigError, K_START_JITTER_MAX_US, Scenario
from .simulation import RunResult, Simulation

SWEEP_DIMENSIONS = ("buffer_bdp_multiple", "owqd_th_frac", "cca")
_DIM_ALIASES = {
    "buffer-bdp": "buffer_bdp_multiple",
    "buffer_bdp": "buffer_bdp_multiple",
    "owqd-th-frac": "owqd_th_frac",
}


def build_simulation(
    s: Scenario, seed: int, collect_series: bool = False, audit: bool = False
) -> Simulation:
    rng = random.Random(seed)
    sim = Simulation(
        s.link(),
        duration_us=s.duration_us(),
        collect_series=collect_series,
        audit=audit,
    )
    threshold = s.owqd_threshold_us()
    for i in range(s.n_flows):
        name = s.cca[i]
        controller = make_controller(
            name,
            s.packet_size_bytes,
            owqd_th_us=threshold if name == "dc" else None,
            max_cwnd_bytes=s.max_cwnd_bytes,
        )
        start_us = int(round(s.flow_start_offsets_ms[i] * 1000)) + rng.randint(
            0, K_START_JITTER_MAX_US
        )
        sim.add_flow(
            controller,
            start_us=start_us,
            transfer_bytes=s.transfer_bytes,
            packet_size=s.packet_size_bytes,
            ack_ratio=s.ack_ratio,
            pacer_interval_us=s.pacing_interval_us,
            pacing_jitter_max_us=s.pacing_jitter_us,
            jitter_rng=random.Random(rng.getrandbits(64)),
            ack_jitter_max_us=s.ack_jitter_us,
            ack_jitter_rng=random.Random(rng.getrandbits(64)),
            clock=ClockModel(s.clock_offset_us, s.clock_skew_ppm),
        )
    return sim


def run_once(s: Scenario, seed: int, collect_series: bool = False, audit: bool = False) -> RunResult:
    return build_simulation(s, seed, collect_series, audit).run()


@dataclass
class ScenarioReport:
    """All repetitions of one scenario, plus cross-repetition statistics."""

    scenario: Scenario
    results: list  # RunResult per repetition
    reps: list  # AggregateReport per repetition

    def _across_reps(self, pick):
        return mean_std(pick(rep) for rep in self.reps)

    @property
    def goodput_mean_bps(self):
        return self._across_reps(lambda r: r.goodput_mean_bps)[0]

    @property
    def aggregate_goodput_mean_bps(self):
        return self._across_reps(lambda r: r.aggregate_goodput_bps)[0]

    @property
    def loss_mean_pct(self):
        return self._across_reps(lambda r: r.loss_mean_pct)[0]

    @property
    def rtt_mean_us(self):
        return self._across_reps(lambda r: r.rtt_mean_us)[0]

    @property
    def jain_mean(self):
        # fairness of the repetition-averaged shares, so that per-seed winner
        # rotation cancels the way it does when a testbed table is averaged
        means = [self.flow_mean(fid, "goodput_bps") for fid in range(self.scenario.n_flows)]
        return jain_index(means)

    def flow_mean(self, flow_id: int, attr: str) -> float:
        return mean_std(getattr(rep.per_flow[flow_id], attr) for rep in self.reps)[0]

    def pooled_rtt_samples_us(self, flow_id: int) -> list:
        pooled = []
        for res in self.results:
            pooled.extend(rtt for _, rtt in res.traces[flow_id].rtt_samples)
        return pooled

    def _threshold_cell(self):
        s = self.scenario
        if s.owqd_th_frac is not None:
            return s.owqd_th_frac
        if s.owqd_th_us is not None:
            return s.owqd_th_us
        return ""

    def _buffer_cell(self):
        s = self.scenario
        if s.buffer_bdp_multiple is not None:
            return s.buffer_bdp_multiple
        return round(s.effective_buffer_bytes() / s.bdp_bytes(), 6)

    def summary_rows(self) -> list:
        """One row per flow, repetition-averaged, in SUMMARY_COLUMNS order."""
        s = self.scenario
        rows = []
        for fid in range(s.n_flows):
            threshold = self._threshold_cell() if s.cca[fid] == "dc" else ""
            rows.append(
                (
                    s.cca[fid],
                    threshold,
                    self._buffer_cell(),
                    self.flow_mean(fid, "goodput_bps") / 1e6,
                    self.flow_mean(fid, "throughput_bps") / 1e6,
                    self.flow_mean(fid, "loss_pct"),
                    self.flow_mean(fid, "rtt_mean_us") / 1e3,
                    self.flow_mean(fid, "rtt_std_us") / 1e3,
                    self.jain_mean,
                )
            )
        return rows


def run_scenario(s: Scenario, collect_series: bool = False, audit: bool = False) -> ScenarioReport:
    results = [
        run_once(s, s.seed + k, collect_series=collect_series, audit=audit)
        for k in range(s.repetitions)
    ]
    reps = [
        aggregate_report(res.traces.values(), s.rtt_weighting, s.warmup_us()) for res in results
    ]
    return ScenarioReport(scenario=s, results=results, reps=reps)


# -- sweeps ---------------------------------------------------------------------


def normalize_dimension(dim: str) -> str:
    dim = _DIM_ALIASES.get(dim, dim)
    if dim not in SWEEP_DIMENSIONS:
        raise ConfigError(f"unknown sweep dimension {dim!r}, expected one of {SWEEP_DIMENSIONS}")
    return dim


def apply_dimension(base: Scenario, dim: str, value) -> Scenario:
    dim = normalize_dimension(dim)
    if dim == "buffer_bdp_multiple":
        return replace(base, buffer_bdp_multiple=float(value), buffer_bytes=None)
    if dim == "owqd_th_frac":
        return replace(base, owqd_th_frac=float(value), owqd_th_us=None)
    name = str(value)
    if name == "dc":
        if base.owqd_th_frac is None and base.owqd_th_us is None:
            raise ConfigError("sweeping cca to 'dc' needs a threshold on the base scenario")
        return replace(base, cca=name)
    # baselines take no threshold; drop whatever the base carried
    return replace(base, cca=name, owqd_th_frac=None, owqd_th_us=None)


def sweep(base: Scenario, dim: str, values, collect_series: bool = False) -> list:
    """Returns [(value, ScenarioReport)], one entry per swept value."""
    dim = normalize_dimension(dim)
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    out = []
    for value in values:
        scen = apply_dimension(base, dim, value)
        out.append((value, run_scenario(scen, collect_series=collect_series)))
    return out


# -- emission -------------------------------------------------------------------


def emit_report(
    report: ScenarioReport,
    out_dir,
    write_trace: bool = False,
    make_plots: bool = True,
) -> list:
    """Writes summary.csv, per-flow cdf_<id>.csv, optional timeseries_<id>.csv,
    and rendered figures. Returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "summary.csv"
    write_summary_csv(path, report.summary_rows())
    written.append(path)

    s = report.scenario
    cdfs = {}
    for fid in range(s.n_flows):
        points = rtt_cdf(report.pooled_rtt_samples_us(fid))
        cdfs[f"flow {fid} ({s.cca[fid]})"] = points
        path = out / f"cdf_{fid}.csv"
        write_cdf_csv(path, points)
        written.append(path)

    series = {}
    if write_trace:
        first = report.results[0]
        for fid in range(s.n_flows):
            rows = first.traces[fid].ack_rows
            series[fid] = rows
            path = out / f"timeseries_{fid}.csv"
            write_timeseries_csv(path, rows)
            written.append(path)

    if make_plots:
        from . import plots

        path = out / "rtt_cdf.png"
        plots.plot_rtt_cdf(path, cdfs)
        written.append(path)
        for fid, rows in series.items():
            if not rows:
                continue
            path = out / f"timeseries_{fid}.png"
            plots.plot_timeseries(
                path,
                rows,
                owqd_th_us=s.owqd_threshold_us() if s.cca[fid] == "dc" else None,
                buffer_bytes=s.effective_buffer_bytes(),
            )
            written.append(path)
    return written


def emit_sweep(swept, dim: str, out_dir, make_plots: bool = True) -> list:
    """Writes one sub-directory per swept value plus a combined sweep.csv
    (and a combined RTT CDF figure)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    combined = []
    overlay = {}
    for value, report in swept:
        sub = out / f"{dim}={value}"
        written.extend(emit_report(report, sub, make_plots=make_plots))
        for row in report.summary_rows():
            combined.append((dim, value) + row)
        overlay[f"{dim}={value}"] = rtt_cdf(report.pooled_rtt_samples_us(0))

    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("dim", "value") + SUMMARY_COLUMNS)
        for row in combined:
            w.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row])
    written.append(path)

    if make_plots:
        from . import plots

        path = out / "sweep_rtt_cdf.png"
        plots.plot_rtt_cdf(path, overlay)
        written.append(path)
    return written


def format_report(report: ScenarioReport) -> str:
    """Human-readable per-flow table plus the run-level aggregates."""
    s = report.scenario
    lines = []
    head = s.label or "scenario"
    lines.append(
        f"{head}: {s.n_flows} flow(s), {s.capacity_mbps:g} Mbps, "
        f"buffer {report._buffer_cell()}x BDP, {s.repetitions} rep(s)"
    )
    lines.append(
        f"{'flow':>4}  {'cca':<9} {'gput Mbps':>9}  {'tput Mbps':>9}  "
        f"{'loss %':>7}  {'rtt ms':>8}  {'rtt sd':>7}"
    )
    for fid in range(s.n_flows):
        lines.append(
            f"{fid:>4}  {s.cca[fid]:<9} "
            f"{report.flow_mean(fid, 'goodput_bps') / 1e6:>9.3f}  "
            f"{report.flow_mean(fid, 'throughput_bps') / 1e6:>9.3f}  "
            f"{report.flow_mean(fid, 'loss_pct'):>7.3f}  "
            f"{report.flow_mean(fid, 'rtt_mean_us') / 1e3:>8.2f}  "
            f"{report.flow_mean(fid, 'rtt_std_us') / 1e3:>7.2f}"
        )
    lines.append(
        f"aggregate goodput {report.aggregate_goodput_mean_bps / 1e6:.3f} Mbps, "
        f"jain {report.jain_mean:.4f}"
    )
    return "\n".join(lines)
