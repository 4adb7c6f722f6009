"""Statistics and delimited-export tests."""

import csv
import math

import pytest

from dcsim.metrics import (
    CDF_COLUMNS,
    SUMMARY_COLUMNS,
    FlowTrace,
    aggregate_report,
    flow_report,
    jain_index,
    mean_std,
    quantile,
    rtt_average_us,
    rtt_cdf,
    write_cdf_csv,
    write_summary_csv,
)


def test_mean_std():
    m, s = mean_std([2, 4])
    assert m == 3 and s == 1
    m, s = mean_std([])
    assert math.isnan(m) and math.isnan(s)
    m, s = mean_std([7.0])
    assert m == 7.0 and s == 0.0


def test_jain_index_bounds_and_cases():
    assert jain_index([5.0]) == 1.0
    assert jain_index([3, 3, 3, 3]) == 1.0
    assert jain_index([8, 0, 0, 0]) == 0.25  # one-hot hits the 1/n floor
    x = [1.0, 2.0, 3.0, 4.0]
    assert jain_index([10 * v for v in x]) == pytest.approx(jain_index(x))


def test_jain_index_rejects_degenerate_input():
    with pytest.raises(ValueError):
        jain_index([])
    with pytest.raises(ValueError):
        jain_index([1.0, -0.5])
    with pytest.raises(ValueError):
        jain_index([0.0, 0.0])


def test_rtt_average_weightings():
    samples = [(0, 100), (10, 300), (40, 300)]
    assert rtt_average_us(samples, "sample") == pytest.approx(700 / 3)
    # first value covers 10 us, second covers 30: (100*10 + 300*30) / 40
    assert rtt_average_us(samples, "time") == pytest.approx(250.0)
    with pytest.raises(ValueError):
        rtt_average_us(samples, "median")
    assert math.isnan(rtt_average_us([], "sample"))
    assert rtt_average_us([(5, 42)], "time") == 42.0


def test_rtt_cdf_steps():
    assert rtt_cdf([3, 1, 2, 2]) == [(1, 0.25), (2, 0.75), (3, 1.0)]
    assert rtt_cdf([]) == []
    points = rtt_cdf([9, 9, 9])
    assert points == [(9, 1.0)]


def test_rtt_cdf_last_fraction_is_exactly_one():
    points = rtt_cdf(list(range(1, 1001)))
    assert points[-1][1] == 1.0
    fracs = [f for _, f in points]
    assert fracs == sorted(fracs)


def test_quantile_indexing():
    values = [10, 20, 30, 40]
    assert quantile(values, 0.25) == 10
    assert quantile(values, 0.5) == 20
    assert quantile(values, 0.75) == 30
    assert quantile(values, 1.0) == 40
    assert quantile(values, 0.1) == 10
    with pytest.raises(ValueError):
        quantile([], 0.5)
    with pytest.raises(ValueError):
        quantile(values, 0.0)
    with pytest.raises(ValueError):
        quantile(values, 1.5)


def _trace(**overrides):
    tr = FlowTrace(0)
    tr.first_send_us = 0
    tr.last_new_delivery_us = 2_000_000
    tr.unique_bytes_delivered = 1_000_000
    tr.transmitted_packets = 850
    tr.transmitted_bytes = 1_030_000
    tr.dropped_packets = 17
    tr.rtt_samples = [(100_000, 50_000), (600_000, 60_000), (1_500_000, 70_000)]
    for k, v in overrides.items():
        setattr(tr, k, v)
    return tr


def test_flow_report_rates_and_loss():
    rep = flow_report(_trace())
    assert rep.goodput_bps == pytest.approx(1_000_000 * 8e6 / 2_000_000)
    assert rep.throughput_bps == pytest.approx(1_030_000 * 8e6 / 2_000_000)
    assert rep.loss_pct == pytest.approx(100 * 17 / 850)
    assert rep.rtt_mean_us == pytest.approx(60_000)
    assert rep.rtt_min_us == 50_000
    assert rep.duration_us == 2_000_000
    assert not rep.empty


def test_flow_report_handles_an_unstarted_flow():
    rep = flow_report(FlowTrace(3))
    assert rep.goodput_bps == 0.0
    assert rep.loss_pct == 0.0
    assert rep.empty


def test_flow_report_warmup_drops_early_samples():
    rep = flow_report(_trace(), warmup_us=500_000)
    assert rep.rtt_mean_us == pytest.approx(65_000)  # first sample excluded
    assert rep.rtt_min_us == 60_000
    # byte counts still cover the whole run
    assert rep.unique_bytes == 1_000_000
    rep_all_cut = flow_report(_trace(), warmup_us=5_000_000)
    assert rep_all_cut.empty


def test_flow_report_time_weighting_changes_only_the_mean():
    plain = flow_report(_trace(), weighting="sample")
    weighted = flow_report(_trace(), weighting="time")
    assert weighted.rtt_mean_us != plain.rtt_mean_us
    assert weighted.rtt_std_us == plain.rtt_std_us
    assert weighted.goodput_bps == plain.goodput_bps


def test_aggregate_report_union_span_and_fairness():
    a = _trace()
    b = _trace()
    b.flow_id = 1
    b.first_send_us = 1_000_000
    b.last_new_delivery_us = 4_000_000
    agg = aggregate_report([a, b])
    # union span: 0 .. 4 s holding 2 MB total
    assert agg.aggregate_goodput_bps == pytest.approx(2_000_000 * 8e6 / 4_000_000)
    assert agg.jain_index == pytest.approx(jain_index([r.goodput_bps for r in agg.per_flow]))
    assert agg.loss_mean_pct == pytest.approx(100 * 17 / 850)


def test_aggregate_report_all_idle_flows():
    agg = aggregate_report([FlowTrace(0), FlowTrace(1)])
    assert agg.jain_index == 0.0
    assert agg.aggregate_goodput_bps == 0.0


def test_summary_csv_is_stable_text(tmp_path):
    rows = [("dc", 0.8, 2.0, 9.123456789, 9.5, 0.01, 55.5, 3.25, 0.999)]
    path = tmp_path / "summary.csv"
    write_summary_csv(path, rows)
    text = path.read_text()
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(SUMMARY_COLUMNS)
    assert lines[1] == "dc,0.800000,2.000000,9.123457,9.500000,0.010000,55.500000,3.250000,0.999000"


def test_cdf_csv_converts_to_milliseconds(tmp_path):
    path = tmp_path / "cdf.csv"
    write_cdf_csv(path, [(51_002, 0.5), (60_000, 1.0)])
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(CDF_COLUMNS)
    assert rows[1] == ["51.002000", "0.500000"]
    assert rows[2] == ["60.000000", "1.000000"]
