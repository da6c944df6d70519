"""Codebook beam selection and low-dimensional MMSE precoding over analog ports.

Matrices in port space follow one convention throughout: the equivalent
channel ``heq`` has shape ``(..., n_ue, n_port)`` with entry ``(u, p)`` equal
to ``sqrt(L_u) * w_u^T H_u v_p``, and precoding or combining matrices have
shape ``(..., n_port, n_layer)``. Leading axes are subbands.
"""

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .arrays import Codebook


class UnservableLayerError(ValueError):
    """A layer's precoder collapsed to zero on some subband."""


@dataclass(frozen=True)
class PortAssignment:
    """Dense layer/port numbering of the UEs sharing a bundle.

    UE ``ue_ids[i]`` is served on layer ``i`` through port ``i``.
    """

    ue_ids: tuple

    def __post_init__(self):
        if len(set(self.ue_ids)) != len(self.ue_ids):
            raise ValueError("a UE can hold only one layer")

    def layer(self, ue_id):
        return self.ue_ids.index(ue_id)

    port = layer

    def __len__(self):
        return len(self.ue_ids)


@dataclass(frozen=True)
class CbfResult:
    tx_index: int
    rx_index: int
    tx_beam: np.ndarray
    rx_beam: np.ndarray
    gain: float


def best_beam_pair(beamspace):
    """Index pair maximizing ``|beamspace[r, t]|**2``; ties go to the lowest ``(r, t)``."""
    power = np.abs(beamspace) ** 2
    flat = int(np.argmax(power))
    r, t = divmod(flat, power.shape[1])
    return r, t, float(power[r, t])


def cbf_select(h_ref, tx_cb: Codebook, rx_cb: Codebook) -> CbfResult:
    """Exhaustive max-SNR search over the codebook product set at one subband."""
    h_ref = np.asarray(h_ref)
    if h_ref.shape != (rx_cb.vectors.shape[1], tx_cb.vectors.shape[1]):
        raise ValueError(f"channel shape {h_ref.shape} does not match the codebooks")
    beamspace = rx_cb.vectors @ h_ref @ tx_cb.vectors.T
    r, t, gain = best_beam_pair(beamspace)
    return CbfResult(t, r, tx_cb[t], rx_cb[r], gain)


def build_equivalent_matrix(cbf: Mapping, channels: Mapping, k, ue_order: Sequence = None):
    """Equivalent port-space channel of the co-scheduled UEs at subband ``k``.

    ``cbf`` and ``channels`` map UE id to :class:`CbfResult` and
    :class:`~mmwave_hbf.channel.ChannelRealization`. Row ``u`` is UE ``u``
    listening with its own CBF receive beam; column ``p`` is the port
    carrying the CBF transmit beam of the ``p``-th UE in ``ue_order``.
    """
    if set(cbf) != set(channels):
        raise ValueError("beam selections and channels cover different UE sets")
    ue_order = list(ue_order) if ue_order is not None else sorted(cbf)
    if set(ue_order) != set(cbf):
        raise ValueError("ue_order must list exactly the scheduled UEs")
    tx = np.stack([cbf[u].tx_beam for u in ue_order])
    heq = np.empty((len(ue_order), len(ue_order)), dtype=complex)
    for i, u in enumerate(ue_order):
        cr = channels[u]
        heq[i] = np.sqrt(cr.pathloss_gain) * (cbf[u].rx_beam @ cr.matrices[k] @ tx.T)
    return heq


def _herm(a):
    return np.conj(np.swapaxes(a, -1, -2))


def mmse_precoder(heq, noise_ratio, return_floor=False):
    """``heq^H (heq heq^H + noise_ratio I)^-1`` for one or a stack of matrices.

    With ``noise_ratio == 0`` and a rank-deficient ``heq`` the system is
    regularized with ``1e-12 * trace(heq heq^H) / n_ue``. When
    ``return_floor`` is set, a boolean array telling which matrices needed
    that floor is returned as well.
    """
    heq = np.asarray(heq, dtype=complex)
    gram = heq @ _herm(heq)
    ratio, floored = _regularized_ratio(heq, gram, noise_ratio)
    v = _herm(np.linalg.solve(gram + ratio[..., None, None] * np.eye(heq.shape[-2]), heq))
    if return_floor:
        return v, floored
    return v


def _regularized_ratio(heq, gram, noise_ratio):
    if np.any(np.asarray(noise_ratio) < 0):
        raise ValueError("noise_ratio must be non-negative")
    n_ue = heq.shape[-2]
    ratio = np.broadcast_to(np.asarray(noise_ratio, dtype=float), heq.shape[:-2]).copy()
    floored = np.zeros(heq.shape[:-2], dtype=bool)
    zero = ratio == 0
    if np.any(zero):
        floored = zero & (np.linalg.matrix_rank(heq) < n_ue)
        if np.any(floored):
            tr = np.real(np.trace(gram, axis1=-2, axis2=-1)) / n_ue
            ratio = np.where(floored, np.maximum(1e-12 * tr, np.finfo(float).tiny), ratio)
    return ratio, floored


def ul_mmse_combiner(heq, noise_ratio):
    """Receive-side MMSE filter for the uplink, as a combining matrix.

    In the uplink the ports receive ``y = heq^T x``. The MMSE estimate is
    ``W y`` with ``W = (G^H G + noise_ratio I)^-1 G^H`` and ``G = heq^T``.
    Beams are applied without conjugation, so the combining vector of layer
    ``u`` is row ``u`` of ``W``; the returned matrix is ``W^T``.
    """
    heq = np.asarray(heq, dtype=complex)
    g = np.swapaxes(heq, -1, -2)
    gh = _herm(g)
    ratio, _ = _regularized_ratio(heq, heq @ _herm(heq), noise_ratio)
    w = np.linalg.solve(gh @ g + ratio[..., None, None] * np.eye(g.shape[-1]), gh)
    return np.swapaxes(w, -1, -2)


def port_gram(cb_beams):
    """``G[p, q] = v_p^H v_q`` of the analog beams loaded on the ports."""
    cb_beams = np.asarray(cb_beams)
    return cb_beams.conj() @ cb_beams.T


def combined_norms(mix, gram):
    """Norm of ``sum_p v_p mix[p, u]`` for every layer, computed in port space."""
    q = np.einsum("...pu,pq,...qu->...u", mix.conj(), gram, mix)
    return np.sqrt(np.maximum(np.real(q), 0.0))


def effective_vectors(cb_beams, mix):
    """Unit-norm array vectors ``normalize(sum_p v_p mix[p, u])``.

    ``cb_beams`` is ``(n_port, n_elem)``; ``mix`` is ``(..., n_port, n_layer)``.
    Returns ``(..., n_layer, n_elem)``.
    """
    cb_beams = np.asarray(cb_beams)
    mix = np.asarray(mix)
    if mix.shape[-2] != cb_beams.shape[0]:
        raise ValueError("precoder rows must match the number of ports")
    raw = np.einsum("...pu,pn->...un", mix, cb_beams)
    norms = np.linalg.norm(raw, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise UnservableLayerError("zero-norm precoder column")
    return raw / norms


def smbf_ul_combiners(cb_beams, heq, noise_ratio):
    """Unit-norm BS receive vectors per subband and layer for the uplink."""
    return effective_vectors(cb_beams, ul_mmse_combiner(heq, noise_ratio))


class CodebookBeamformer:
    """Analog beams only: each layer rides its own CBF port unmixed."""

    name = "cbf"

    def dl_mixing(self, heq, noise_ratio):
        return _identity_like(heq)

    def ul_mixing(self, heq, noise_ratio):
        return _identity_like(heq)

    def __repr__(self):
        return "CodebookBeamformer()"


class MmseBeamformer:
    """Per-subband MMSE mixing of layers onto the CBF ports."""

    name = "smbf"

    def dl_mixing(self, heq, noise_ratio):
        return mmse_precoder(heq, noise_ratio)

    def ul_mixing(self, heq, noise_ratio):
        return ul_mmse_combiner(heq, noise_ratio)

    def __repr__(self):
        return "MmseBeamformer()"


def _identity_like(heq):
    n_port = heq.shape[-1]
    eye = np.eye(n_port, dtype=complex)
    return np.broadcast_to(eye, heq.shape[:-2] + (n_port, n_port)).copy()


BEAMFORMERS = {"cbf": CodebookBeamformer, "smbf": MmseBeamformer}


def get_beamformer(name):
    try:
        return BEAMFORMERS[name]()
    except KeyError:
        raise ValueError(f"unknown beamforming scheme {name!r}; choose from {sorted(BEAMFORMERS)}")
