"""Scenario configuration, presets and validation."""

import dataclasses
import json
from dataclasses import dataclass, field

from .beamforming import BEAMFORMERS

SCHEDULERS = ("tmrs", "pmrs")


class ConfigError(ValueError):
    pass


@dataclass
class TrafficConfig:
    packet_bytes: int = 1500
    interval_us: float = 1500.0
    symmetric: bool = True


@dataclass
class ScenarioConfig:
    n_ues: int = 7
    disc_radius_m: float = 100.0
    h_bs_m: float = 25.0
    h_ut_m: float = 1.6
    fc_ghz: float = 28.0
    n_rbs: int = 275
    subcarriers_per_rb: int = 12
    delta_f: float = 60e3
    symbols_per_slot: int = 14
    slots_per_subframe: int = 4
    symbol_duration_us: float = 17.85
    bs_array: tuple = (8, 8)
    ue_array: tuple = (4, 4)
    phase_const: float = 3.141592653589793
    n_layers: int = 1
    bf_scheme: str = "cbf"
    scheduler: str = "tmrs"
    beam_aware: bool = True
    p_tx_bs_dbm: float = 30.0
    p_tx_ue_dbm: float = 30.0
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 5.0
    dl_power_split: bool = False
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    duration_ms: int = 200
    n_drops: int = 5
    base_seed: int = 1
    n_clusters: int = 12
    k_factor_db: float = 10.0
    delay_spread_ns: float = 50.0
    angle_spread_deg: float = 10.0
    coherence_time_ms: float = 50.0
    shadowing: bool = False
    cqi_delay_subframes: int = 2
    subband_size: int = 12
    eesm_beta: float = 1.0
    bler_slope_db: float = 0.1
    target_bler: float = 0.01

    @property
    def n_subcarriers(self):
        return self.n_rbs * self.subcarriers_per_rb

    @property
    def bandwidth_hz(self):
        return self.n_subcarriers * self.delta_f

    def validate(self):
        checks = [
            ("n_ues", self.n_ues >= 1, "must be >= 1"),
            ("disc_radius_m", self.disc_radius_m >= 0, "must be >= 0"),
            ("h_bs_m", self.h_bs_m > self.h_ut_m, "BS must be above the UEs"),
            ("fc_ghz", 0.5 <= self.fc_ghz <= 100, "must lie in [0.5, 100]"),
            ("n_rbs", self.n_rbs >= 1, "must be >= 1"),
            ("subcarriers_per_rb", self.subcarriers_per_rb >= 1, "must be >= 1"),
            ("delta_f", self.delta_f > 0, "must be positive"),
            ("symbols_per_slot", self.symbols_per_slot >= 3, "must be >= 3"),
            ("slots_per_subframe", self.slots_per_subframe >= 1, "must be >= 1"),
            ("symbol_duration_us", self.symbol_duration_us > 0, "must be positive"),
            ("bs_array", len(self.bs_array) == 2 and min(self.bs_array) >= 1,
             "must be [n1, n2] with positive entries"),
            ("ue_array", len(self.ue_array) == 2 and min(self.ue_array) >= 1,
             "must be [n1, n2] with positive entries"),
            ("n_layers", self.n_layers >= 1, "must be >= 1"),
            ("bf_scheme", self.bf_scheme in BEAMFORMERS, f"must be one of {sorted(BEAMFORMERS)}"),
            ("scheduler", self.scheduler in SCHEDULERS, f"must be one of {list(SCHEDULERS)}"),
            ("scheduler", self.scheduler != "tmrs" or self.n_layers == 1,
             "tmrs schedules a single layer; use pmrs for n_layers > 1"),
            ("beam_aware", self.scheduler != "pmrs" or self.beam_aware,
             "pmrs needs beam-aware grouping"),
            ("traffic.packet_bytes", self.traffic.packet_bytes >= 0, "must be >= 0"),
            ("traffic.interval_us", self.traffic.interval_us > 0, "must be positive"),
            ("duration_ms", self.duration_ms >= 1, "must be >= 1"),
            ("n_drops", self.n_drops >= 1, "must be >= 1"),
            ("n_clusters", self.n_clusters >= 1, "must be >= 1"),
            ("delay_spread_ns", self.delay_spread_ns >= 0, "must be >= 0"),
            ("angle_spread_deg", self.angle_spread_deg >= 0, "must be >= 0"),
            ("coherence_time_ms", self.coherence_time_ms > 0, "must be positive"),
            ("cqi_delay_subframes", self.cqi_delay_subframes >= 0, "must be >= 0"),
            ("subband_size", self.subband_size >= 1, "must be >= 1"),
            ("eesm_beta", self.eesm_beta > 0, "must be positive"),
            ("bler_slope_db", self.bler_slope_db > 0, "must be positive"),
            ("target_bler", 0 < self.target_bler < 0.5, "must lie in (0, 0.5)"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{name}: {msg}")
        return self

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["bs_array"] = list(self.bs_array)
        d["ue_array"] = list(self.ue_array)
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        data = dict(data)
        if "traffic" in data:
            tr = data["traffic"]
            if isinstance(tr, dict):
                tknown = {f.name for f in dataclasses.fields(TrafficConfig)}
                bad = set(tr) - tknown
                if bad:
                    raise ConfigError(f"unknown traffic fields: {sorted(bad)}")
                data["traffic"] = TrafficConfig(**tr)
        for key in ("bs_array", "ue_array"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data).validate()

    def replace(self, **changes):
        return dataclasses.replace(self, **changes).validate()


def load_config(path):
    with open(path) as fh:
        return ScenarioConfig.from_dict(json.load(fh))


PRESETS = {
    "paper-low-traffic": {"traffic": {"packet_bytes": 1500, "interval_us": 1500.0,
                                      "symmetric": True},
                          "n_drops": 20, "duration_ms": 400},
    "paper-high-traffic": {"traffic": {"packet_bytes": 1500, "interval_us": 150.0,
                                       "symmetric": True},
                           "n_drops": 20, "duration_ms": 400},
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    data = json.loads(json.dumps(PRESETS[name]))
    data.update(overrides)
    return ScenarioConfig.from_dict(data)
