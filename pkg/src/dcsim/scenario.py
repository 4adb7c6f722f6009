"""Declarative experiment description: one bottleneck, one or more flows.

A scenario normalizes to a canonical form (explicit controller list, explicit
start offsets, exactly one of transfer_bytes/duration_s populated) and that
canonical form serializes to TOML and parses back to an equal value.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .cc import CONTROLLER_NAMES
from .netsim import LinkModel

K_DEFAULT_TRANSFER_BYTES = 100_000_000  # single-flow default: 100 MB (decimal)
K_DEFAULT_MULTIFLOW_DURATION_S = 60.0
K_DEFAULT_BUFFER_BDP = 4.0
K_DEFAULT_OFFSET_SPACING_MS = 2000.0
K_START_JITTER_MAX_US = 5000  # per-flow start randomization drawn from the seed


class ConfigError(ValueError):
    """The scenario is not runnable as specified."""


@dataclass
class Scenario:
    cca: tuple = ("dc",)  # one controller name per flow (str accepted, normalized)
    capacity_mbps: float = 10.0
    rtt_min_ms: float = 50.0  # two-way propagation, split evenly fwd/bwd
    packet_size_bytes: int = 1252
    buffer_bdp_multiple: float | None = None
    buffer_bytes: int | None = None
    owqd_th_frac: float | None = None  # fraction of buffer drain time 8B/C
    owqd_th_us: int | None = None  # absolute alternative
    n_flows: int = 1
    flow_start_offsets_ms: tuple | None = None
    transfer_bytes: int | None = None
    duration_s: float | None = None
    seed: int = 1
    repetitions: int = 3
    pacing_interval_us: int = 200
    pacing_jitter_us: int = 200  # max extra per-release spacing, seeded; 0 = off
    ack_jitter_us: int = 4000  # max extra reverse-path delay per ACK, seeded; 0 = off
    ack_ratio: int = 2  # ack every second packet, the usual QUIC default
    clock_offset_us: int = 0
    clock_skew_ppm: float = 0.0
    max_cwnd_bytes: int = 1 << 24
    rtt_weighting: str = "sample"
    warmup_s: float = 0.0
    label: str = ""

    def __post_init__(self):
        self._normalize()
        self._validate()

    # -- canonical form -------------------------------------------------------

    def _normalize(self) -> None:
        if isinstance(self.cca, str):
            self.cca = (self.cca,) * self.n_flows
        else:
            self.cca = tuple(self.cca)
            if len(self.cca) == 1 and self.n_flows > 1:
                self.cca = self.cca * self.n_flows
        if self.buffer_bytes is None and self.buffer_bdp_multiple is None:
            self.buffer_bdp_multiple = K_DEFAULT_BUFFER_BDP
        if self.flow_start_offsets_ms is None:
            self.flow_start_offsets_ms = tuple(
                i * K_DEFAULT_OFFSET_SPACING_MS for i in range(self.n_flows)
            )
        else:
            self.flow_start_offsets_ms = tuple(float(v) for v in self.flow_start_offsets_ms)
        if self.transfer_bytes is None and self.duration_s is None:
            if self.n_flows == 1:
                self.transfer_bytes = K_DEFAULT_TRANSFER_BYTES
            else:
                self.duration_s = K_DEFAULT_MULTIFLOW_DURATION_S

    def _validate(self) -> None:
        if self.capacity_mbps <= 0:
            raise ConfigError("capacity_mbps must be positive")
        if self.rtt_min_ms < 0:
            raise ConfigError("rtt_min_ms must be non-negative")
        if self.packet_size_bytes <= 0:
            raise ConfigError("packet_size_bytes must be positive")
        if self.n_flows < 1:
            raise ConfigError("n_flows must be at least 1")
        if len(self.cca) != self.n_flows:
            raise ConfigError(f"{len(self.cca)} controller names for {self.n_flows} flows")
        for name in self.cca:
            if name not in CONTROLLER_NAMES:
                raise ConfigError(f"unknown cca {name!r}, expected one of {CONTROLLER_NAMES}")
        if self.buffer_bytes is not None and self.buffer_bdp_multiple is not None:
            raise ConfigError("give buffer_bdp_multiple or buffer_bytes, not both")
        if self.buffer_bytes is not None and self.buffer_bytes < self.packet_size_bytes:
            raise ConfigError("buffer_bytes must hold at least one packet")
        if self.buffer_bdp_multiple is not None and self.buffer_bdp_multiple <= 0:
            raise ConfigError("buffer_bdp_multiple must be positive")
        has_dc = "dc" in self.cca
        if self.owqd_th_frac is not None and self.owqd_th_us is not None:
            raise ConfigError("give owqd_th_frac or owqd_th_us, not both")
        if (self.owqd_th_frac is not None or self.owqd_th_us is not None) and not has_dc:
            raise ConfigError("a delay threshold is only meaningful for cca 'dc'")
        if has_dc and self.owqd_th_frac is None and self.owqd_th_us is None:
            raise ConfigError("cca 'dc' needs owqd_th_frac or owqd_th_us")
        if self.owqd_th_frac is not None and not 0 < self.owqd_th_frac <= 1:
            raise ConfigError("owqd_th_frac must be in (0, 1]")
        if self.owqd_th_us is not None and self.owqd_th_us <= 0:
            raise ConfigError("owqd_th_us must be positive")
        offs = self.flow_start_offsets_ms
        if len(offs) != self.n_flows:
            raise ConfigError(f"{len(offs)} start offsets for {self.n_flows} flows")
        if any(v < 0 for v in offs):
            raise ConfigError("flow start offsets must be non-negative")
        if self.n_flows > 1 and any(b <= a for a, b in zip(offs, offs[1:])):
            raise ConfigError("flow start offsets must be strictly increasing")
        if self.transfer_bytes is not None and self.duration_s is not None:
            raise ConfigError("give transfer_bytes or duration_s, not both")
        if self.transfer_bytes is not None and self.transfer_bytes <= 0:
            raise ConfigError("transfer_bytes must be positive")
        if self.duration_s is not None and self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if self.pacing_interval_us < 0:
            raise ConfigError("pacing_interval_us must be non-negative")
        if self.pacing_jitter_us < 0:
            raise ConfigError("pacing_jitter_us must be non-negative")
        if self.ack_jitter_us < 0:
            raise ConfigError("ack_jitter_us must be non-negative")
        if self.ack_ratio < 1:
            raise ConfigError("ack_ratio must be at least 1")
        if self.rtt_weighting not in ("sample", "time"):
            raise ConfigError("rtt_weighting must be 'sample' or 'time'")
        if self.warmup_s < 0:
            raise ConfigError("warmup_s must be non-negative")
        if self.max_cwnd_bytes < 2 * self.packet_size_bytes:
            raise ConfigError("max_cwnd_bytes must allow at least two packets")
        if self.effective_buffer_bytes() < self.packet_size_bytes:
            raise ConfigError("derived buffer holds less than one packet")

    # -- derived dimensions ---------------------------------------------------

    def capacity_bps(self) -> int:
        return int(round(self.capacity_mbps * 1e6))

    def propagation_rtt_us(self) -> int:
        return int(round(self.rtt_min_ms * 1000))

    def bdp_bytes(self) -> int:
        """capacity * two-way propagation delay, in bytes."""
        return self.capacity_bps() * self.propagation_rtt_us() // 8_000_000

    def effective_buffer_bytes(self) -> int:
        if self.buffer_bytes is not None:
            return self.buffer_bytes
        return int(round(self.buffer_bdp_multiple * self.bdp_bytes()))

    def buffer_drain_us(self) -> int:
        """Time the full buffer takes to drain at link rate."""
        return int(round(self.effective_buffer_bytes() * 8_000_000 / self.capacity_bps()))

    def owqd_threshold_us(self) -> int | None:
        if self.owqd_th_us is not None:
            return self.owqd_th_us
        if self.owqd_th_frac is not None:
            return int(round(self.owqd_th_frac * self.buffer_drain_us()))
        return None

    def link(self) -> LinkModel:
        prop = self.propagation_rtt_us()
        fwd = prop // 2
        return LinkModel(
            capacity_bps=self.capacity_bps(),
            prop_fwd_us=fwd,
            prop_bwd_us=prop - fwd,
            buffer_bytes=self.effective_buffer_bytes(),
        )

    def duration_us(self) -> int | None:
        if self.duration_s is None:
            return None
        return int(round(self.duration_s * 1e6))

    def warmup_us(self) -> int:
        return int(round(self.warmup_s * 1e6))


# -- TOML serialization --------------------------------------------------------


def emit_scenario(s: Scenario) -> str:
    """Canonical TOML: one `key = value` line per populated field, field order."""
    lines = []
    for f in dataclasses.fields(s):
        value = getattr(s, f.name)
        if value is None:
            continue
        if f.name == "cca" and len(set(value)) == 1:
            value = value[0]
        lines.append(f"{f.name} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def _toml_value(value) -> str:
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__} to TOML")


def scenario_from_dict(data: dict) -> Scenario:
    known = {f.name for f in dataclasses.fields(Scenario)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
    try:
        return Scenario(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def parse_scenario(text: str) -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid scenario file: {exc}") from exc
    return scenario_from_dict(data)


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())
