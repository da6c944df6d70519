"""Per-subband SINR, effective-SINR compression, MCS choice and TB verdicts."""

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .arrays import effective_channel


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm2watt(p_dbm):
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class LinkBudget:
    p_tx_bs_dbm: float = 30.0
    p_tx_ue_dbm: float = 30.0
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 5.0
    delta_f_hz: float = 60e3
    n_subcarriers: int = 3300
    n_active_layers: int = 1

    def __post_init__(self):
        if self.n_subcarriers < 1 or self.n_active_layers < 1:
            raise ValueError("n_subcarriers and n_active_layers must be >= 1")

    @property
    def p_sc(self):
        """BS power per layer and subcarrier, in watts."""
        return dbm2watt(self.p_tx_bs_dbm) / (self.n_subcarriers * self.n_active_layers)

    @property
    def p_sc_ue(self):
        """UE power per subcarrier; a UE always drives a single layer."""
        return dbm2watt(self.p_tx_ue_dbm) / self.n_subcarriers

    @property
    def noise_power(self):
        """``delta_f * N_o`` in watts, noise figure included."""
        return dbm2watt(self.noise_psd_dbm_hz + self.noise_figure_db) * self.delta_f_hz

    def with_layers(self, n):
        return replace(self, n_active_layers=n)


def _check_active(u, active):
    if u not in active:
        raise ValueError(f"UE {u} is not in the active set {list(active)}")


def sinr_dl(u, active: Sequence, channels: Mapping, rx_beams: Mapping, tx_vectors: Mapping,
            pathloss: Mapping, p_sc, noise_power):
    """Downlink SINR of UE ``u`` on one subband.

    ``channels[x]`` is UE ``x``'s channel matrix on the subband,
    ``rx_beams[x]`` its receive beam, ``tx_vectors[x]`` the BS vector of the
    layer serving ``x`` and ``pathloss[x]`` its linear pathloss gain.
    Interference reaches ``u`` through ``u``'s own channel.
    """
    _check_active(u, active)
    h, w, lu = channels[u], rx_beams[u], pathloss[u]
    desired = lu * abs(effective_channel(w, h, tx_vectors[u])) ** 2 * p_sc
    interf = sum(lu * abs(effective_channel(w, h, tx_vectors[x])) ** 2 * p_sc
                 for x in active if x != u)
    return desired / (interf + noise_power)


def sinr_ul(u, active: Sequence, channels: Mapping, tx_beams: Mapping, combiners: Mapping,
            pathloss: Mapping, p_sc, noise_power):
    """Uplink SINR of UE ``u`` on one subband.

    ``tx_beams[x]`` is UE ``x``'s transmit beam and ``combiners[x]`` the BS
    receive vector of the layer decoding ``x``. Interferer ``x`` arrives
    through its own channel and pathloss onto ``u``'s combiner.
    """
    _check_active(u, active)
    c = combiners[u]
    desired = pathloss[u] * abs(effective_channel(tx_beams[u], channels[u], c)) ** 2 * p_sc
    interf = sum(pathloss[x] * abs(effective_channel(tx_beams[x], channels[x], c)) ** 2 * p_sc
                 for x in active if x != u)
    return desired / (interf + noise_power)


def sinr_dl_from_gains(gains, pathloss, p_sc, noise_power):
    """Vectorized downlink SINR.

    ``gains[u, x, k] = |w_u^T H_u[k] v_x[k]|**2`` over the active UEs, in
    layer order. Returns ``(n_ue, n_subbands)``.
    """
    gains = np.asarray(gains, dtype=float)
    rx = np.asarray(pathloss, dtype=float)[:, None, None] * gains * p_sc
    desired = np.einsum("uuk->uk", rx)
    return desired / (rx.sum(axis=1) - desired + noise_power)


def sinr_ul_from_gains(gains, pathloss, p_sc, noise_power):
    """Vectorized uplink SINR.

    ``gains[x, u, k] = |w_x^T H_x[k] c_u[k]|**2``: transmitter ``x`` seen on
    the combiner of ``u``. ``p_sc`` may be a per-UE array.
    """
    gains = np.asarray(gains, dtype=float)
    tx_power = np.broadcast_to(np.asarray(pathloss, dtype=float) * p_sc, gains.shape[:1])
    rx = tx_power[:, None, None] * gains
    desired = np.einsum("uuk->uk", rx)
    return desired / (rx.sum(axis=0) - desired + noise_power)


def effective_sinr(sinrs, beta=1.0, weights=None):
    """Exponential effective SINR ``-beta ln(mean exp(-sinr / beta))`` (linear)."""
    sinrs = np.asarray(sinrs, dtype=float).ravel()
    if sinrs.size == 0:
        raise ValueError("need at least one SINR value")
    if beta <= 0:
        raise ValueError("beta must be positive")
    if weights is None:
        weights = np.ones_like(sinrs)
    else:
        weights = np.asarray(weights, dtype=float).ravel()
    val = -beta * (logsumexp(-sinrs / beta, b=weights) - np.log(weights.sum()))
    return float(np.clip(val, sinrs.min(), sinrs.max()))


@dataclass(frozen=True)
class McsEntry:
    index: int
    spectral_eff: float
    sinr_threshold_db: float
    floor: bool = False


def mcs_table(n=15, se_min=0.2, se_max=5.55, gap_db=3.0):
    """Evenly spaced spectral efficiencies with gap-to-capacity thresholds."""
    se = np.linspace(se_min, se_max, n)
    thr = lin2db(db2lin(gap_db) * (2.0 ** se - 1.0))
    return tuple(McsEntry(i, float(s), float(t)) for i, (s, t) in enumerate(zip(se, thr)))


DEFAULT_MCS_TABLE = mcs_table()


def select_mcs(reported_db, table=DEFAULT_MCS_TABLE) -> McsEntry:
    """Highest entry whose threshold does not exceed ``reported_db``.

    Below every threshold the lowest entry is returned with ``floor=True``.
    """
    if not table:
        raise ValueError("empty MCS table")
    best = None
    for entry in table:
        if entry.sinr_threshold_db <= reported_db:
            best = entry
    if best is None:
        return replace(table[0], floor=True)
    return best


def bler_logistic(actual_db, threshold_db, slope_db, margin_db=0.0):
    if slope_db <= 0:
        raise ValueError("slope_db must be positive")
    return float(expit(-(actual_db - threshold_db + margin_db) / slope_db))


def margin_for_target(target_bler, slope_db):
    """Margin placing the MCS threshold at ``target_bler`` on the logistic curve."""
    return slope_db * np.log(1.0 / target_bler - 1.0)


@dataclass(frozen=True)
class TransportBlockResult:
    ue_id: int
    direction: str
    sinr_eff_db: float
    mcs: McsEntry
    tb_bits: int
    bler: float
    corrupted: bool


def tb_verdict(actual_sinr_eff_db, mcs: McsEntry, slope_db, rng, *, margin_db=0.0, ue_id=-1,
               direction="DL", tb_bits=0) -> TransportBlockResult:
    bler = bler_logistic(actual_sinr_eff_db, mcs.sinr_threshold_db, slope_db, margin_db)
    corrupted = bool(rng.random() < bler)
    return TransportBlockResult(ue_id, direction, float(actual_sinr_eff_db), mcs, int(tb_bits),
                                bler, corrupted)


def bits_per_symbol(spectral_eff, n_subcarriers):
    # small epsilon guards products like 3.64 * 3300 against rounding below an integer
    return int(np.floor(spectral_eff * n_subcarriers + 1e-9))


def tb_size(mcs, n_symbols, n_subcarriers):
    if n_symbols < 0 or n_subcarriers < 0:
        raise ValueError("sizes must be non-negative")
    se = getattr(mcs, "spectral_eff", mcs)
    return bits_per_symbol(se, n_subcarriers) * int(n_symbols)
