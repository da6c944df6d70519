"""UE drops, Urban-Macro pathloss and a clustered wideband MIMO channel.

The small-scale model is a compact stand-in for the 38.901 fast-fading
procedure: a handful of clusters, each a single plane wave with its own
complex gain, delay, departure and arrival direction. The LOS cluster is
aligned with the geometric bearing between the BS and the UE.

Both arrays lie in the horizontal plane: the BS panel faces down towards the
cell and the UE panel faces up. The array-local sines fed to the steering
vector are therefore the x and y direction cosines of the path.
"""

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .arrays import ArrayGeometry, steering_phases


@dataclass(frozen=True)
class Placement:
    ue_id: int
    position: tuple
    bs_position: tuple
    d2d: float
    d3d: float
    los: bool = False


def drop_ues(n_ues, radius, h_bs, h_ut, rng):
    """Drop ``n_ues`` uniformly over a disc of ``radius`` centred on the BS."""
    if n_ues < 1:
        raise ValueError("n_ues must be >= 1")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    r = radius * np.sqrt(rng.random(n_ues))
    ang = rng.uniform(0.0, 2 * np.pi, n_ues)
    dh = h_bs - h_ut
    out = []
    for i in range(n_ues):
        x, y = r[i] * np.cos(ang[i]), r[i] * np.sin(ang[i])
        d2d = float(np.hypot(x, y))
        out.append(Placement(
            ue_id=i,
            position=(float(x), float(y), float(h_ut)),
            bs_position=(0.0, 0.0, float(h_bs)),
            d2d=d2d,
            d3d=float(np.hypot(d2d, dh)),
        ))
    return out


def los_probability_uma(d2d, h_ut=1.5):
    """38.901 UMa LOS probability."""
    if d2d <= 18.0:
        return 1.0
    c = 0.0 if h_ut <= 13.0 else ((h_ut - 13.0) / 10.0) ** 1.5
    base = 18.0 / d2d + np.exp(-d2d / 63.0) * (1.0 - 18.0 / d2d)
    return float(base * (1.0 + c * 1.25 * (d2d / 100.0) ** 3 * np.exp(-d2d / 150.0)))


class PathlossResult(NamedTuple):
    pathloss_db: float
    los: bool


def pathloss_uma(p: Placement, fc, rng=None, shadowing=False, los=None, min_d2d=10.0):
    """UMa pathloss in dB at carrier ``fc`` (GHz).

    ``los`` forces the LOS state; otherwise it is drawn from the UMa LOS
    probability with ``rng``. Shadowing (4 dB LOS, 6 dB NLOS) is only drawn
    when ``shadowing`` is set.
    """
    if not 0.5 <= fc <= 100.0:
        raise ValueError(f"carrier frequency {fc} GHz outside [0.5, 100]")
    h_bs = p.bs_position[2]
    h_ut = p.position[2]
    d2d = max(p.d2d, min_d2d)
    d3d = float(np.hypot(d2d, h_bs - h_ut))
    if los is None:
        if rng is None:
            raise ValueError("rng is required to draw the LOS state")
        los = bool(rng.random() < los_probability_uma(d2d, h_ut))
    pl_los = 28.0 + 22.0 * np.log10(d3d) + 20.0 * np.log10(fc)
    if los:
        pl, sigma = pl_los, 4.0
    else:
        pl_nlos = 13.54 + 39.08 * np.log10(d3d) + 20.0 * np.log10(fc) - 0.6 * (h_ut - 1.5)
        pl, sigma = max(pl_los, pl_nlos), 6.0
    if shadowing:
        if rng is None:
            raise ValueError("rng is required for shadowing")
        pl += sigma * rng.standard_normal()
    return PathlossResult(float(pl), bool(los))


@dataclass
class ClusterSet:
    """Clusters of one BS-UE link.

    Each cluster gain is the sum of a fixed specular part (non-zero only for
    the LOS cluster) and a circular Gaussian diffuse part with mean power
    ``powers[l]``.
    """

    specular: np.ndarray
    diffuse: np.ndarray
    powers: np.ndarray
    delays: np.ndarray
    aod_az: np.ndarray
    aod_el: np.ndarray
    aoa_az: np.ndarray
    aoa_el: np.ndarray
    rx_geom: ArrayGeometry
    tx_geom: ArrayGeometry

    @property
    def gains(self):
        return self.specular + self.diffuse

    @property
    def n_clusters(self):
        return len(self.delays)

    def tx_steering(self):
        """Un-normalized BS responses, shape ``(n_clusters, n_tx)``."""
        return steering_phases(self.tx_geom, *_horizontal_sines(self.aod_az, self.aod_el))

    def rx_steering(self):
        """Un-normalized UE responses, shape ``(n_clusters, n_rx)``."""
        return steering_phases(self.rx_geom, *_horizontal_sines(self.aoa_az, self.aoa_el))


def _horizontal_sines(az, el):
    c = np.cos(el)
    return c * np.cos(az), c * np.sin(az)


def _wrap(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


def generate_clusters(p: Placement, n_clusters, angle_spread, rng, *, k_factor_db=10.0,
                      delay_spread=50e-9, rx_geom=None, tx_geom=None):
    """Draw a cluster set for placement ``p``.

    Cluster 0 follows the geometric bearing with zero delay; the others are
    perturbed by wrapped Gaussian angle offsets of std ``angle_spread`` and
    exponential delays with mean ``delay_spread``.
    """
    if n_clusters < 1:
        raise ValueError("n_clusters must be >= 1")
    rx_geom = rx_geom or ArrayGeometry(4, 4)
    tx_geom = tx_geom or ArrayGeometry(8, 8)

    dx = p.position[0] - p.bs_position[0]
    dy = p.position[1] - p.bs_position[1]
    dz = p.position[2] - p.bs_position[2]
    dep_az = np.arctan2(dy, dx)
    dep_el = np.arctan2(dz, np.hypot(dx, dy))
    arr_az = _wrap(dep_az + np.pi)
    arr_el = -dep_el

    offsets = rng.normal(0.0, angle_spread, size=(4, n_clusters))
    offsets[:, 0] = 0.0
    aod_az = _wrap(dep_az + offsets[0])
    aod_el = _wrap(dep_el + offsets[1])
    aoa_az = _wrap(arr_az + offsets[2])
    aoa_el = _wrap(arr_el + offsets[3])

    delays = rng.exponential(delay_spread, n_clusters) if delay_spread > 0 else np.zeros(n_clusters)
    delays[0] = 0.0

    if p.los and np.isinf(k_factor_db):
        spec_power, diff_total = 1.0, 0.0
    elif p.los:
        kappa = 10.0 ** (k_factor_db / 10.0)
        spec_power, diff_total = kappa / (kappa + 1.0), 1.0 / (kappa + 1.0)
    else:
        spec_power, diff_total = 0.0, 1.0
    powers = np.full(n_clusters, diff_total / n_clusters)
    specular = np.zeros(n_clusters, dtype=complex)
    specular[0] = np.sqrt(spec_power) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    diffuse = _cn(rng, n_clusters) * np.sqrt(powers)

    return ClusterSet(specular=specular, diffuse=diffuse, powers=powers, delays=delays,
                      aod_az=aod_az, aod_el=aod_el, aoa_az=aoa_az, aoa_el=aoa_el,
                      rx_geom=rx_geom, tx_geom=tx_geom)


def _cn(rng, n):
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)


def channel_at(cs: ClusterSet, f_offset):
    """Channel matrix ``(n_rx, n_tx)`` at frequency offset ``f_offset`` (Hz)."""
    coef = cs.gains * np.exp(-2j * np.pi * cs.delays * f_offset)
    return np.einsum("l,lr,lt->rt", coef, cs.rx_steering(), cs.tx_steering())


def subband_offsets(n_subcarriers, subband_size, delta_f):
    """Centre frequency offset of every subband relative to the carrier."""
    n_sub = -(-n_subcarriers // subband_size)
    starts = np.arange(n_sub) * subband_size
    stops = np.minimum(starts + subband_size, n_subcarriers)
    centres = (starts + stops - 1) / 2.0
    return (centres - (n_subcarriers - 1) / 2.0) * delta_f


def delay_phases(cs: ClusterSet, offsets):
    """``exp(-j 2 pi tau_l f_k)``, shape ``(n_subbands, n_clusters)``."""
    return np.exp(-2j * np.pi * np.outer(offsets, cs.delays))


@dataclass
class ChannelRealization:
    ue_id: int
    pathloss_db: float
    matrices: np.ndarray
    timestamp: float = 0.0
    offsets: np.ndarray = field(default=None, repr=False)

    @property
    def pathloss_gain(self):
        return 10.0 ** (-self.pathloss_db / 10.0)

    @property
    def n_subbands(self):
        return self.matrices.shape[0]


def realize(ue_id, cs: ClusterSet, pathloss_db, offsets, timestamp=0.0):
    """Evaluate the per-subband matrices of a cluster set."""
    coef = delay_phases(cs, offsets) * cs.gains
    mats = np.einsum("kl,lr,lt->krt", coef, cs.rx_steering(), cs.tx_steering())
    return ChannelRealization(ue_id, pathloss_db, mats, timestamp, np.asarray(offsets))


def correlation(dt, coherence_time):
    return float(np.exp(-dt / coherence_time))


def evolve_clusters(cs: ClusterSet, rho, rng):
    """AR(1) update of the diffuse cluster gains with correlation ``rho``."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    innov = _cn(rng, cs.n_clusters) * np.sqrt(cs.powers)
    return replace(cs, diffuse=rho * cs.diffuse + np.sqrt(1.0 - rho * rho) * innov)


def evolve(cr: ChannelRealization, cs: ClusterSet, dt, rng, *, coherence_time=None, rho=None):
    """Advance a realization by ``dt`` seconds.

    ``rho`` defaults to ``exp(-dt / coherence_time)``. Returns the new
    realization and the updated cluster set.
    """
    if rho is None:
        if coherence_time is None:
            raise ValueError("either rho or coherence_time must be given")
        rho = correlation(dt, coherence_time)
    new_cs = evolve_clusters(cs, rho, rng)
    new_cr = realize(cr.ue_id, new_cs, cr.pathloss_db, cr.offsets, cr.timestamp + dt)
    return new_cr, new_cs


@dataclass
class BeamspaceLink:
    """Cluster-domain view of a link projected on the codebooks.

    ``rx_proj[l, r]`` is rx beam ``r`` applied to cluster ``l``'s UE response
    and ``tx_proj[l, t]`` is the BS response of cluster ``l`` applied to tx
    beam ``t``. Evaluating ``w^T H[k] v`` for codebook beams then costs one
    small contraction over clusters instead of a full matrix build.
    """

    cs: ClusterSet
    phases: np.ndarray
    rx_proj: np.ndarray
    tx_proj: np.ndarray

    @classmethod
    def build(cls, cs: ClusterSet, offsets, rx_codebook, tx_codebook):
        return cls(cs=cs, phases=delay_phases(cs, offsets),
                   rx_proj=cs.rx_steering() @ rx_codebook.vectors.T,
                   tx_proj=cs.tx_steering() @ tx_codebook.vectors.T)

    def beamspace(self, k, gains=None):
        """``w_r^T H[k] v_t`` for every codebook pair, shape ``(n_rx_beams, n_tx_beams)``."""
        g = self.cs.gains if gains is None else gains
        coef = g * self.phases[k]
        return (self.rx_proj.T * coef) @ self.tx_proj

    def port_channel(self, rx_beam, tx_beams, gains=None):
        """``w_r^T H[k] v_t`` for one rx beam index and a list of tx beam indices.

        Returns shape ``(n_subbands, len(tx_beams))``.
        """
        g = self.cs.gains if gains is None else gains
        left = self.phases * (g * self.rx_proj[:, rx_beam])
        return left @ self.tx_proj[:, list(tx_beams)]
