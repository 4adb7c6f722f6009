"""Figure rendering for the report path. Headless by design."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def plot_rtt_cdf(path, labelled_cdfs) -> None:
    """labelled_cdfs: {label: [(rtt_us, fraction)]}; drawn as step curves."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, points in labelled_cdfs.items():
        if not points:
            continue
        xs = [rtt_us / 1000.0 for rtt_us, _ in points]
        ys = [frac for _, frac in points]
        ax.step(xs, ys, where="post", label=label)
    ax.set_xlabel("RTT (ms)")
    ax.set_ylabel("cumulative fraction")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_timeseries(path, ack_rows, owqd_th_us=None, buffer_bytes=None) -> None:
    """Three stacked panels over time: congestion window, RTT with the
    estimated queueing delay, and bottleneck queue occupancy."""
    ts = [r[0] / 1e6 for r in ack_rows]
    fig, (ax_w, ax_r, ax_q) = plt.subplots(3, 1, figsize=(8, 7), sharex=True)

    ax_w.plot(ts, [r[1] / 1024 for r in ack_rows], lw=0.8)
    ax_w.set_ylabel("cwnd (KiB)")
    ax_w.grid(True, alpha=0.3)

    ax_r.plot(ts, [r[2] / 1000 for r in ack_rows], lw=0.8, label="rtt")
    ax_r.plot(ts, [r[3] / 1000 for r in ack_rows], lw=0.8, label="est. queue delay")
    if owqd_th_us is not None:
        ax_r.axhline(owqd_th_us / 1000, color="tab:red", ls="--", lw=0.8, label="threshold")
    ax_r.set_ylabel("delay (ms)")
    ax_r.grid(True, alpha=0.3)
    ax_r.legend(loc="upper right", fontsize=8)

    ax_q.plot(ts, [r[4] / 1024 for r in ack_rows], lw=0.8)
    if buffer_bytes is not None:
        ax_q.axhline(buffer_bytes / 1024, color="tab:red", ls="--", lw=0.8, label="buffer")
        ax_q.legend(loc="upper right", fontsize=8)
    ax_q.set_ylabel("queue (KiB)")
    ax_q.set_xlabel("time (s)")
    ax_q.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
