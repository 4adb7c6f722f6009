"""Built-in scenario matrix.

Grid: a 10 Mbps bottleneck with 50 ms propagation RTT. Single-flow presets
transfer 100 MB; the buffer steps through 4x, 2x, 1x, 0.5x the
bandwidth-delay product (table1..table4 families). The table5 family runs
four same-algorithm flows for 60 s, started 2 s apart. The fig4 pair is the
deep-buffer RTT-distribution comparison; the fig5 pair is the 2x-BDP
queue-protection comparison, where per-ack time series are the point.

Delay-control thresholds are percentages of the buffer drain time 8B/C, so
"dc80" reacts when the estimated queueing delay exceeds 80% of the time a
full buffer needs to empty.

The table5 family is sometimes described with a 25 Mbps bottleneck, which
would put each of the four flows near 6 Mbps. Its per-flow goodput target
of roughly 2.3 Mbps is only consistent with the same 10 Mbps link the other
families use, so these presets keep 10 Mbps and the 25 Mbps reading is
deliberately not modeled.
"""

from __future__ import annotations

from .scenario import ConfigError, Scenario

_BUFFER_FAMILY = (("table1", 4.0), ("table2", 2.0), ("table3", 1.0), ("table4", 0.5))
_DC_THRESHOLDS = (("dc10", 0.10), ("dc20", 0.20), ("dc50", 0.50), ("dc80", 0.80))
_BASELINES = ("westwood+", "newreno", "cubic")


def _baseline_key(cca: str) -> str:
    return "westwood" if cca == "westwood+" else cca


def _build() -> dict:
    presets = {}
    for family, bdp in _BUFFER_FAMILY:
        for key, frac in _DC_THRESHOLDS:
            name = f"{family}-{key}"
            presets[name] = (
                Scenario(cca="dc", buffer_bdp_multiple=bdp, owqd_th_frac=frac, label=name),
                f"single flow, 100 MB, buffer {bdp:g}x BDP, delay control at {frac:.0%} of buffer drain time",
            )
        for cca in _BASELINES:
            name = f"{family}-{_baseline_key(cca)}"
            presets[name] = (
                Scenario(cca=cca, buffer_bdp_multiple=bdp, label=name),
                f"single flow, 100 MB, buffer {bdp:g}x BDP, {cca}",
            )

    multi = {"n_flows": 4, "buffer_bdp_multiple": 2.0, "duration_s": 60.0}
    presets["table5-dc80"] = (
        Scenario(cca="dc", owqd_th_frac=0.80, label="table5-dc80", **multi),
        "four flows started 2 s apart, 60 s, buffer 2x BDP, delay control at 80% of buffer drain time",
    )
    for cca in _BASELINES:
        name = f"table5-{_baseline_key(cca)}"
        presets[name] = (
            Scenario(cca=cca, label=name, **multi),
            f"four flows started 2 s apart, 60 s, buffer 2x BDP, {cca}",
        )

    # comparison aliases: same scenarios, named for the figure they feed
    for alias, base, why in (
        ("fig4-dc10", "table1-dc10", "RTT distribution side of the deep-buffer comparison"),
        ("fig4-westwood", "table1-westwood", "RTT distribution side of the deep-buffer comparison"),
        ("fig5-dc80", "table2-dc80", "queue-protection time series at 2x BDP"),
        ("fig5-westwood", "table2-westwood", "queue-protection time series at 2x BDP"),
    ):
        scen, _ = presets[base]
        presets[alias] = (scen, f"alias of {base}: {why}")
    return presets


PRESETS = _build()


def preset_names() -> list:
    return sorted(PRESETS)


def get_preset(name: str) -> Scenario:
    try:
        return PRESETS[name][0]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None


def preset_description(name: str) -> str:
    return PRESETS[name][1]
