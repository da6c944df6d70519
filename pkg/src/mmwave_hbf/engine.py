"""Subframe-stepped single-cell simulation and result aggregation.

A drop places the UEs, draws their channels and then advances one 1 ms
subframe at a time: channels evolve, CBR packets are queued, the scheduler
fills the (symbol, layer) grid, beams and precoders are designed at every
bundle start and each transport block is judged from its effective SINR.
"""

import logging
import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace

import numpy as np

from .arrays import ArrayGeometry, dft_codebook
from .beamforming import best_beam_pair, combined_norms, get_beamformer, port_gram
from .channel import (BeamspaceLink, correlation, drop_ues, evolve_clusters,
                      generate_clusters, pathloss_uma, subband_offsets)
from .config import ScenarioConfig
from .phy import (DEFAULT_MCS_TABLE, LinkBudget, effective_sinr, lin2db, margin_for_target,
                  select_mcs, sinr_dl_from_gains, sinr_ul_from_gains, tb_size, tb_verdict)
from .scheduler import (Direction, FrameConfig, SchedulerState, pmrs_schedule,
                        symbols_for_bits, tmrs_schedule)

log = logging.getLogger(__name__)

SUBFRAME_US = 1000.0

SINR_FIELDS = [("drop", "i4"), ("time_us", "f8"), ("ue", "i4"), ("direction", "U2"),
               ("layer", "i4"), ("sinr_db", "f8"), ("sinr_eff_db", "f8")]
BLER_FIELDS = [("drop", "i4"), ("time_us", "f8"), ("ue", "i4"), ("direction", "U2"),
               ("layer", "i4"), ("sinr_db", "f8"), ("sinr_eff_db", "f8"), ("mcs", "i4"), ("bler", "f8"),
               ("corrupted", "?")]
TRACE_FIELDS = [("drop", "i4"), ("subframe", "i4"), ("bundle", "i4"), ("layer", "i4"),
                ("ue", "i4"), ("direction", "U2"), ("start_symbol", "i4"),
                ("n_symbols", "i4"), ("padding_after", "i4")]


@dataclass
class TrafficSource:
    ue_id: int
    direction: Direction
    packet_bytes: int
    interval_us: float
    next_arrival_us: float = 0.0

    def __post_init__(self):
        if self.interval_us <= 0:
            raise ValueError("interval_us must be positive")

    def pop_until(self, t_us):
        """Number of packets arriving up to and including ``t_us``."""
        if t_us < self.next_arrival_us:
            return 0
        n = math.floor((t_us - self.next_arrival_us) / self.interval_us + 1e-9) + 1
        self.next_arrival_us += n * self.interval_us
        return n


def cbr_arrivals(src: TrafficSource, t0, t1):
    """Arrival instants of a periodic source inside ``[t0, t1)``, phase-locked to 0."""
    if t1 < t0:
        raise ValueError("window end precedes its start")
    step = src.interval_us
    k0 = math.ceil(t0 / step - 1e-9)
    k1 = math.ceil(t1 / step - 1e-9)
    return [k * step for k in range(k0, k1)]


@dataclass
class DropResult:
    drop_index: int
    duration_s: float
    n_layers: int
    n_subframes: int
    n_data_symbols: int
    offered_bits: dict
    delivered_bits: dict
    corrupted_bits: dict
    queued_bits: dict
    sinr_samples: np.ndarray
    bler_samples: np.ndarray
    schedule_trace: np.ndarray
    scheduled_symbols: int = 0
    padding_symbols: int = 0
    idle_symbols: int = 0
    placements: list = field(default_factory=list, repr=False)

    def _total(self, counter, direction):
        return sum(v for (u, d), v in counter.items() if d == Direction(direction))

    def offered_mbps(self, direction):
        return self._total(self.offered_bits, direction) / self.duration_s / 1e6

    def throughput_mbps(self, direction):
        return self._total(self.delivered_bits, direction) / self.duration_s / 1e6

    @property
    def padding_fraction(self):
        return self.padding_symbols / (self.n_subframes * self.n_data_symbols * self.n_layers)


class _Link:
    """Per-UE channel state kept across subframes."""

    def __init__(self, placement, pathloss_db, cs, beams, rng):
        self.placement = placement
        self.pathloss_db = pathloss_db
        self.pathloss = 10.0 ** (-pathloss_db / 10.0)
        self.cs = cs
        self.beams = beams
        self.rng = rng


class DropSimulator:
    def __init__(self, cfg: ScenarioConfig, drop_index: int):
        cfg.validate()
        self.cfg = cfg
        self.drop_index = drop_index
        self.frame = FrameConfig(symbols_per_slot=cfg.symbols_per_slot,
                                 slots_per_subframe=cfg.slots_per_subframe,
                                 symbol_duration_us=cfg.symbol_duration_us,
                                 n_layers=cfg.n_layers)
        self.budget = LinkBudget(p_tx_bs_dbm=cfg.p_tx_bs_dbm, p_tx_ue_dbm=cfg.p_tx_ue_dbm,
                                 noise_psd_dbm_hz=cfg.noise_psd_dbm_hz,
                                 noise_figure_db=cfg.noise_figure_db, delta_f_hz=cfg.delta_f,
                                 n_subcarriers=cfg.n_subcarriers)
        self.n_sc = cfg.n_subcarriers
        self.bf = get_beamformer(cfg.bf_scheme)
        self.table = DEFAULT_MCS_TABLE
        self.margin_db = margin_for_target(cfg.target_bler, cfg.bler_slope_db)
        self.rho = correlation(SUBFRAME_US * 1e-6, cfg.coherence_time_ms * 1e-3)

        self.tx_geom = ArrayGeometry(*cfg.bs_array, phase_const=cfg.phase_const)
        self.rx_geom = ArrayGeometry(*cfg.ue_array, phase_const=cfg.phase_const)
        self.tx_cb = dft_codebook(self.tx_geom)
        self.rx_cb = dft_codebook(self.rx_geom)
        self.offsets = subband_offsets(self.n_sc, cfg.subband_size, cfg.delta_f)
        self.k_ref = len(self.offsets) // 2

        root = np.random.SeedSequence([cfg.base_seed, drop_index])
        geo_ss, verdict_ss, *ue_ss = root.spawn(2 + cfg.n_ues)
        self.verdict_rng = np.random.default_rng(verdict_ss)
        placements = drop_ues(cfg.n_ues, cfg.disc_radius_m, cfg.h_bs_m, cfg.h_ut_m,
                              np.random.default_rng(geo_ss))
        self.links = []
        for p, ss in zip(placements, ue_ss):
            rng = np.random.default_rng(ss)
            pl = pathloss_uma(p, cfg.fc_ghz, rng, shadowing=cfg.shadowing)
            p = _with_los(p, pl.los)
            cs = generate_clusters(p, cfg.n_clusters, np.deg2rad(cfg.angle_spread_deg), rng,
                                   k_factor_db=cfg.k_factor_db,
                                   delay_spread=cfg.delay_spread_ns * 1e-9,
                                   rx_geom=self.rx_geom, tx_geom=self.tx_geom)
            beams = BeamspaceLink.build(cs, self.offsets, self.rx_cb, self.tx_cb)
            self.links.append(_Link(p, pl.pathloss_db, cs, beams, rng))

        ue_ids = [p.ue_id for p in placements]
        self.state = SchedulerState.for_ues(ue_ids)
        directions = list(Direction) if cfg.traffic.symmetric else [Direction.DL]
        self.sources = [TrafficSource(u, d, cfg.traffic.packet_bytes, cfg.traffic.interval_us)
                        for u in ue_ids for d in directions]
        keys = [(u, d) for u in ue_ids for d in Direction]
        self.offered = dict.fromkeys(keys, 0)
        self.delivered = dict.fromkeys(keys, 0)
        self.corrupted = dict.fromkeys(keys, 0)
        self.reports = {k: ([], []) for k in keys}
        self.initial_cqi = {}
        self.sinr_rows, self.bler_rows, self.trace_rows = [], [], []
        self.padding = self.idle = self.scheduled = 0

    # channel helpers

    def _evolve(self):
        for link in self.links:
            link.cs = evolve_clusters(link.cs, self.rho, link.rng)
            link.beams.cs = link.cs

    def _cbf(self):
        return [best_beam_pair(link.beams.beamspace(self.k_ref, link.cs.gains))[:2]
                for link in self.links]

    # CQI bookkeeping

    def _initial_cqi(self, cbf):
        full_dl = self._dl_budget(self.cfg.n_layers)
        for u, link in enumerate(self.links):
            r, t = cbf[u]
            g = np.abs(link.beams.port_channel(r, [t], link.cs.gains)[:, 0]) ** 2
            snr = link.pathloss * g / self.budget.noise_power
            self.initial_cqi[(u, Direction.DL)] = self._eff_db(snr * full_dl.p_sc)
            self.initial_cqi[(u, Direction.UL)] = self._eff_db(snr * self.budget.p_sc_ue)

    def _dl_budget(self, n_layers):
        return self.budget.with_layers(n_layers if self.cfg.dl_power_split else 1)

    def _eff_db(self, sinrs, weights=None):
        return float(lin2db(max(effective_sinr(sinrs, self.cfg.eesm_beta, weights), 1e-30)))

    def _report_at(self, key, sf):
        times, values = self.reports[key]
        i = bisect_right(times, sf)
        return values[i - 1] if i else self.initial_cqi[key]

    def _demand_mcs(self, key, sf):
        lag = max(self.cfg.cqi_delay_subframes, 1)
        return select_mcs(self._report_at(key, sf - lag), self.table)

    def _tb_mcs(self, key, sf, current_db):
        if self.cfg.cqi_delay_subframes == 0:
            return select_mcs(current_db, self.table)
        return select_mcs(self._report_at(key, sf - self.cfg.cqi_delay_subframes), self.table)

    # main loop

    def run(self) -> DropResult:
        cfg = self.cfg
        queues = self.state.queues
        packet_bits = 8 * cfg.traffic.packet_bytes
        n_sf = cfg.duration_ms
        for sf in range(n_sf):
            t_us = sf * SUBFRAME_US
            if sf:
                self._evolve()
            for src in self.sources:
                n = src.pop_until(t_us)
                if n:
                    key = (src.ue_id, src.direction)
                    queues[key] += n * packet_bits
                    self.offered[key] += n * packet_bits
            cbf = self._cbf()
            if sf == 0:
                self._initial_cqi(cbf)
            demands = {}
            for key, bits in queues.items():
                if bits > 0:
                    mcs = self._demand_mcs(key, sf)
                    demands[key] = symbols_for_bits(bits, mcs.spectral_eff, self.n_sc)
            if cfg.scheduler == "pmrs":
                sched = pmrs_schedule(self.state, demands, self.frame,
                                      beams={u: cbf[u][1] for u in range(len(cbf))})
            else:
                sched = tmrs_schedule(self.state, demands, self.frame)
            self.scheduled += sched.scheduled_symbols
            self.padding += sum(sched.padding_symbols)
            self.idle += sum(sched.idle_symbols)
            for a in sched.allocations:
                pad = sched.bundle_length - a.n_symbols if sched.bundle_length else 0
                self.trace_rows.append((self.drop_index, sf, a.bundle, a.layer, a.ue_id,
                                        str(a.direction), a.start_symbol, a.n_symbols, pad))
            for group in sched.bundles():
                self._serve(sf, t_us, group, cbf)

        return DropResult(
            drop_index=self.drop_index,
            duration_s=n_sf * SUBFRAME_US * 1e-6,
            n_layers=cfg.n_layers,
            n_subframes=n_sf,
            n_data_symbols=self.frame.n_data_symbols,
            offered_bits=self.offered,
            delivered_bits=self.delivered,
            corrupted_bits=self.corrupted,
            queued_bits=dict(queues),
            sinr_samples=np.array(self.sinr_rows, dtype=SINR_FIELDS),
            bler_samples=np.array(self.bler_rows, dtype=BLER_FIELDS),
            schedule_trace=np.array(self.trace_rows, dtype=TRACE_FIELDS),
            scheduled_symbols=self.scheduled,
            padding_symbols=self.padding,
            idle_symbols=self.idle,
            placements=[link.placement for link in self.links],
        )

    def _serve(self, sf, t_us, group, cbf):
        """Design beams for one start-aligned group and judge its transport blocks."""
        direction = group[0].direction
        ues = [a.ue_id for a in group]
        tx_idx = [cbf[u][1] for u in ues]
        pathloss = np.array([self.links[u].pathloss for u in ues])
        # port_channel rows: UE u listening with its CBF beam to each group port
        ports = np.stack([self.links[u].beams.port_channel(cbf[u][0], tx_idx,
                                                           self.links[u].cs.gains)
                          for u in ues], axis=1)
        heq = np.sqrt(pathloss)[None, :, None] * ports
        n_layers = len(ues)
        if direction is Direction.DL:
            ratio = self.budget.noise_power / self._dl_budget(n_layers).p_sc
            mix = self.bf.dl_mixing(heq, ratio)
        else:
            ratio = self.budget.noise_power / self.budget.p_sc_ue
            mix = self.bf.ul_mixing(heq, ratio)
        norms = combined_norms(mix, port_gram(self.tx_cb.vectors[tx_idx]))
        safe = np.where(norms > 0, norms, np.inf)
        h = (ports @ mix) / safe[:, None, :]
        gains = np.moveaxis(np.abs(h) ** 2, 0, -1)

        lengths = np.array([a.n_symbols for a in group])
        bounds = np.unique(np.concatenate(([0], lengths)))
        per_ue = [([], []) for _ in ues]
        for s0, s1 in zip(bounds[:-1], bounds[1:]):
            act = np.flatnonzero(lengths > s0)
            g = gains[np.ix_(act, act)]
            if direction is Direction.DL:
                p_sc = self._dl_budget(len(act)).p_sc
                sinr = sinr_dl_from_gains(g, pathloss[act], p_sc, self.budget.noise_power)
            else:
                sinr = sinr_ul_from_gains(g, pathloss[act], self.budget.p_sc_ue,
                                          self.budget.noise_power)
            for j, i in enumerate(act):
                per_ue[i][0].append(sinr[j])
                per_ue[i][1].append(np.full(sinr.shape[1], float(s1 - s0)))

        for i, a in enumerate(group):
            sinrs = np.concatenate(per_ue[i][0])
            weights = np.concatenate(per_ue[i][1])
            eff_db = self._eff_db(sinrs, weights)
            mean_db = float(lin2db(np.average(sinrs, weights=weights)))
            key = (a.ue_id, direction)
            mcs = self._tb_mcs(key, sf, eff_db)
            tb_bits = tb_size(mcs, a.n_symbols, self.n_sc)
            payload = min(self.state.queues[key], tb_bits)
            res = tb_verdict(eff_db, mcs, self.cfg.bler_slope_db, self.verdict_rng,
                             margin_db=self.margin_db, ue_id=a.ue_id,
                             direction=str(direction), tb_bits=tb_bits)
            self.state.queues[key] -= payload
            if res.corrupted:
                self.corrupted[key] += payload
            else:
                self.delivered[key] += payload
            times, values = self.reports[key]
            times.append(sf)
            values.append(eff_db)
            t_tb = t_us + a.start_symbol * self.frame.symbol_duration_us
            self.sinr_rows.append((self.drop_index, t_tb, a.ue_id, str(direction), a.layer,
                                   mean_db, eff_db))
            self.bler_rows.append((self.drop_index, t_tb, a.ue_id, str(direction), a.layer,
                                   mean_db, eff_db, mcs.index, res.bler, res.corrupted))


def _with_los(p, los):
    return replace(p, los=los)


def run_drop(cfg: ScenarioConfig, drop_index: int) -> DropResult:
    return DropSimulator(cfg, drop_index).run()


def run_drops(cfg: ScenarioConfig, n_drops=None):
    n = cfg.n_drops if n_drops is None else n_drops
    out = []
    for i in range(n):
        log.info("drop %d/%d", i + 1, n)
        out.append(run_drop(cfg, i))
    return out


def empirical_cdf(samples, x):
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        return float("nan")
    return float(np.mean(samples <= x))


@dataclass
class Summary:
    n_drops: int
    sinr_db: dict
    sinr_eff_db: dict
    bler: dict
    throughput_mbps: dict
    throughput_stderr: dict
    offered_mbps: dict
    padding_fraction: float

    def cdf(self, direction, x, which="sinr_db"):
        return empirical_cdf(getattr(self, which)[str(direction)], x)

    def to_json(self):
        levels = np.linspace(0.0, 1.0, 101)
        out = {
            "n_drops": self.n_drops,
            "throughput_mbps": self.throughput_mbps,
            "throughput_stderr_mbps": self.throughput_stderr,
            "offered_mbps": self.offered_mbps,
            "padding_fraction": self.padding_fraction,
            "quantile_levels": levels.tolist(),
        }
        for name in ("sinr_db", "sinr_eff_db", "bler"):
            out[f"{name}_quantiles"] = {
                d: (np.quantile(v, levels).tolist() if len(v) else [])
                for d, v in getattr(self, name).items()
            }
        return out


def aggregate(results) -> Summary:
    if not results:
        raise ValueError("need at least one drop")
    dirs = [str(d) for d in Direction]

    def pool(attr, fld):
        out = {}
        for d in dirs:
            parts = [r.__dict__[attr] for r in results]
            out[d] = np.concatenate([p[p["direction"] == d][fld] for p in parts])
        return out

    thr, err, off = {}, {}, {}
    for d in dirs:
        vals = np.array([r.throughput_mbps(d) for r in results])
        thr[d] = float(vals.mean())
        err[d] = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        off[d] = float(np.mean([r.offered_mbps(d) for r in results]))
    return Summary(
        n_drops=len(results),
        sinr_db=pool("sinr_samples", "sinr_db"),
        sinr_eff_db=pool("sinr_samples", "sinr_eff_db"),
        bler=pool("bler_samples", "bler"),
        throughput_mbps=thr,
        throughput_stderr=err,
        offered_mbps=off,
        padding_fraction=float(np.mean([r.padding_fraction for r in results])),
    )
