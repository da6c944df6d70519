import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmwave_hbf.arrays import ArrayGeometry, dft_codebook, effective_channel, grid_angles
from mmwave_hbf.arrays import steering_phases
from mmwave_hbf.beamforming import (CbfResult, PortAssignment, UnservableLayerError,
                                    best_beam_pair, build_equivalent_matrix, cbf_select,
                                    combined_norms, effective_vectors, get_beamformer,
                                    mmse_precoder, port_gram, smbf_ul_combiners,
                                    ul_mmse_combiner)
from mmwave_hbf.channel import ChannelRealization

seeds = st.integers(0, 2**32 - 1)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def well_conditioned(rng, n, max_cond=20.0):
    while True:
        h = crandn(rng, n, n)
        if np.linalg.cond(h) <= max_cond:
            return h


def same_up_to_phase(a, b, tol=1e-12):
    ph = np.vdot(b, a)
    if abs(ph) == 0:
        return False
    return np.allclose(a, b * ph / abs(ph), atol=tol)


class TestCbf:
    def test_grid_rank_one_channel(self):
        rx, tx = ArrayGeometry(4, 4), ArrayGeometry(8, 8)
        rx_cb, tx_cb = dft_codebook(rx), dft_codebook(tx)
        th_r, ph_r = grid_angles(4)[1], grid_angles(4)[3]
        th_t, ph_t = grid_angles(8)[5], grid_angles(8)[2]
        a_rx = steering_phases(rx, np.sin(th_r), np.sin(ph_r))
        a_tx = steering_phases(tx, np.sin(th_t), np.sin(ph_t))
        h = np.outer(a_rx.conj(), a_tx.conj())
        res = cbf_select(h, tx_cb, rx_cb)
        assert (res.rx_index, res.tx_index) == (1 * 4 + 3, 5 * 8 + 2)
        assert res.gain == pytest.approx(16 * 64, rel=1e-12)
        np.testing.assert_array_equal(res.tx_beam, tx_cb[res.tx_index])
        # brute force over every pair
        best = max(abs(effective_channel(rx_cb[r], h, tx_cb[t])) ** 2
                   for r in range(16) for t in range(64))
        assert res.gain == pytest.approx(best, rel=1e-12)

    def test_zero_channel(self):
        cb = dft_codebook(ArrayGeometry(2, 2))
        res = cbf_select(np.zeros((4, 4)), cb, cb)
        assert (res.rx_index, res.tx_index, res.gain) == (0, 0, 0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_exhaustive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        cb = dft_codebook(ArrayGeometry(2, 2))
        h = crandn(rng, 4, 4)
        best, pair = -1.0, None
        for r in range(4):
            for t in range(4):
                g = abs(cb[r] @ h @ cb[t]) ** 2
                if g > best:
                    best, pair = g, (r, t)
        res = cbf_select(h, cb, cb)
        assert (res.rx_index, res.tx_index) == pair
        assert res.gain == pytest.approx(best, rel=1e-12)

    def test_tie_break_lowest_pair(self):
        bs = np.ones((3, 4))
        bs[2, 1] = 1.0
        assert best_beam_pair(bs)[:2] == (0, 0)
        bs[1, 3] = -2.0
        bs[2, 0] = 2.0
        assert best_beam_pair(bs)[:2] == (1, 3)

    def test_shape_mismatch(self):
        cb = dft_codebook(ArrayGeometry(2, 2))
        with pytest.raises(ValueError):
            cbf_select(np.zeros((4, 5)), cb, cb)


def cbf_entry(rx_cb, tx_cb, r, t):
    return CbfResult(t, r, tx_cb[t], rx_cb[r], 0.0)


class TestEquivalentMatrix:
    def setup_method(self):
        self.rx_cb = dft_codebook(ArrayGeometry(2, 2))
        self.tx_cb = dft_codebook(ArrayGeometry(4, 2))

    def test_orthogonal_single_paths(self):
        # UE u sees a single path exactly on tx beam t_u and rx beam r_u
        pairs = {0: (0, 1), 1: (3, 6), 2: (1, 4)}
        cbf, chans = {}, {}
        for u, (r, t) in pairs.items():
            h = np.outer(self.rx_cb[r].conj(), self.tx_cb[t].conj()) * 3.0
            chans[u] = ChannelRealization(u, 90.0 + u, h[None])
            cbf[u] = cbf_entry(self.rx_cb, self.tx_cb, r, t)
        heq = build_equivalent_matrix(cbf, chans, 0)
        off = heq - np.diag(np.diag(heq))
        assert np.abs(off).max() <= 1e-9
        for u in range(3):
            assert heq[u, u] == pytest.approx(np.sqrt(10 ** (-(90.0 + u) / 10)) * 3.0)

    def test_single_ue(self):
        rng = np.random.default_rng(0)
        h = crandn(rng, 4, 8)
        cr = ChannelRealization(0, 100.0, h[None])
        e = cbf_entry(self.rx_cb, self.tx_cb, 2, 5)
        heq = build_equivalent_matrix({0: e}, {0: cr}, 0)
        assert heq.shape == (1, 1)
        assert heq[0, 0] == pytest.approx(1e-5 * effective_channel(e.rx_beam, h, e.tx_beam))

    def test_duplicated_ue_rank_one(self):
        rng = np.random.default_rng(1)
        h = crandn(rng, 4, 8)
        e = cbf_entry(self.rx_cb, self.tx_cb, 1, 1)
        chans = {u: ChannelRealization(u, 95.0, h[None]) for u in (0, 1)}
        heq = build_equivalent_matrix({0: e, 1: e}, chans, 0)
        assert np.linalg.matrix_rank(heq, tol=1e-12 * np.abs(heq).max()) == 1

    def test_ue_sets_must_match(self):
        e = cbf_entry(self.rx_cb, self.tx_cb, 0, 0)
        cr = ChannelRealization(0, 95.0, np.zeros((1, 4, 8)))
        with pytest.raises(ValueError):
            build_equivalent_matrix({0: e, 1: e}, {0: cr}, 0)
        with pytest.raises(ValueError):
            build_equivalent_matrix({0: e}, {0: cr}, 0, ue_order=[0, 1])


class TestMmse:
    def test_identity(self):
        v = mmse_precoder(np.eye(2), 0.3)
        np.testing.assert_allclose(v, np.eye(2) / 1.3, atol=1e-15)

    def test_zero_forcing_limit_2x2(self):
        h = np.array([[1, 0.5], [0.5, 1]], dtype=complex)
        v = mmse_precoder(h, 1e-12)
        np.testing.assert_allclose(v, np.array([[1, -0.5], [-0.5, 1]]) / 0.75, rtol=1e-9)
        np.testing.assert_allclose(h @ v, np.eye(2), atol=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_matched_filter_limit(self, seed):
        h = crandn(np.random.default_rng(seed), 4, 4)
        v = mmse_precoder(h, 1e6)
        scaled = h.conj().T / 1e6
        assert np.linalg.norm(v - scaled) <= 1e-3 * np.linalg.norm(scaled)

    @settings(max_examples=50)
    @given(seed=seeds, n=st.integers(1, 5), ratio=st.floats(1e-6, 1e3))
    def test_matches_explicit_inverse(self, seed, n, ratio):
        h = crandn(np.random.default_rng(seed), n, n)
        ref = h.conj().T @ np.linalg.inv(h @ h.conj().T + ratio * np.eye(n))
        v = mmse_precoder(h, ratio)
        assert np.linalg.norm(v - ref) <= 1e-9 * np.linalg.norm(ref)

    def test_batched_matches_loop(self):
        h = crandn(np.random.default_rng(3), 6, 3, 3)
        v = mmse_precoder(h, 0.1)
        for k in range(6):
            np.testing.assert_allclose(v[k], mmse_precoder(h[k], 0.1), atol=1e-14)

    def test_negative_ratio(self):
        with pytest.raises(ValueError):
            mmse_precoder(np.eye(2), -1.0)

    def test_singular_floor_flagged(self):
        h = np.array([[1, 1], [1, 1]], dtype=complex)
        v, floored = mmse_precoder(h, 0.0, return_floor=True)
        assert floored
        assert np.all(np.isfinite(v))
        _, ok = mmse_precoder(np.eye(2), 0.0, return_floor=True)
        assert not ok

    @settings(max_examples=50)
    @given(seed=seeds, n=st.integers(2, 4))
    def test_interference_suppression(self, seed, n):
        h = well_conditioned(np.random.default_rng(seed), n)
        g = h @ mmse_precoder(h, 1e-9)
        diag = np.abs(np.diag(g))
        off = np.abs(g - np.diag(np.diag(g)))
        assert np.all(off <= 1e-6 * diag[None, :])

    @settings(max_examples=50)
    @given(seed=seeds, n=st.integers(1, 4), ratio=st.floats(0.0, 1e3))
    def test_ul_combiner_equals_dl_precoder(self, seed, n, ratio):
        h = crandn(np.random.default_rng(seed), 3, n, n)
        np.testing.assert_allclose(ul_mmse_combiner(h, ratio), mmse_precoder(h, ratio),
                                   atol=1e-9 * np.abs(mmse_precoder(h, ratio)).max())


class TestEffectiveVectors:
    def setup_method(self):
        self.cb = dft_codebook(ArrayGeometry(4, 4))
        self.beams = self.cb.vectors[[1, 6, 11]]

    def test_identity(self):
        out = effective_vectors(self.beams, np.eye(3))
        np.testing.assert_allclose(out, self.beams, atol=1e-15)

    def test_diagonal_scaling(self):
        out = effective_vectors(self.beams, np.diag([2.0, -0.5j, 3 + 4j]))
        for u in range(3):
            assert same_up_to_phase(out[u], self.beams[u])

    @settings(max_examples=40)
    @given(seed=seeds)
    def test_unit_norm(self, seed):
        mix = crandn(np.random.default_rng(seed), 5, 3, 3)
        out = effective_vectors(self.beams, mix)
        assert out.shape == (5, 3, 16)
        np.testing.assert_allclose(np.linalg.norm(out, axis=-1), 1.0, atol=1e-12)

    @settings(max_examples=40)
    @given(seed=seeds)
    def test_port_space_norms(self, seed):
        rng = np.random.default_rng(seed)
        beams = self.cb.vectors[rng.choice(16, 3, replace=False)]
        mix = crandn(rng, 4, 3, 3)
        raw = np.einsum("kpu,pn->kun", mix, beams)
        np.testing.assert_allclose(combined_norms(mix, port_gram(beams)),
                                   np.linalg.norm(raw, axis=-1), rtol=1e-12)

    def test_zero_column(self):
        mix = np.eye(3)
        mix[:, 1] = 0
        with pytest.raises(UnservableLayerError):
            effective_vectors(self.beams, mix)

    def test_port_count_mismatch(self):
        with pytest.raises(ValueError):
            effective_vectors(self.beams, np.eye(2))

    def test_normalization_keeps_zero_pattern(self):
        rng = np.random.default_rng(4)
        h = np.diag(crandn(rng, 3))
        v = mmse_precoder(h, 1e-3)
        scaled = v / combined_norms(v, port_gram(self.beams))[None, :]
        assert np.array_equal(h @ v == 0, h @ scaled == 0)

    def test_single_ue_reduces_to_cbf(self):
        h = np.array([[0.3 - 0.8j]])
        out = effective_vectors(self.beams[:1], mmse_precoder(h, 0.2))
        assert same_up_to_phase(out[0], self.beams[0])


class TestUplinkCombiners:
    def setup_method(self):
        self.cb = dft_codebook(ArrayGeometry(4, 2))

    def test_single_ue(self):
        beams = self.cb.vectors[[3]]
        out = smbf_ul_combiners(beams, np.array([[0.2 + 1j]]), 0.5)
        assert same_up_to_phase(out[0], beams[0])

    def test_symmetric_equals_downlink(self):
        rng = np.random.default_rng(2)
        a = crandn(rng, 3, 3)
        h = a + a.T
        beams = self.cb.vectors[[0, 2, 5]]
        ul = smbf_ul_combiners(beams, h, 0.1)
        dl = effective_vectors(beams, mmse_precoder(h, 0.1))
        np.testing.assert_allclose(ul, dl, atol=1e-12)

    def test_two_ue_cross_gain(self):
        c, s = np.cos(0.4), np.sin(0.4)
        h = np.array([[c, -s], [s, c]], dtype=complex) * (1 + 0.5j)
        comb = ul_mmse_combiner(h, 1e-12)
        gains = h @ comb
        # transmitter x seen on combiner u
        assert abs(gains[1, 0]) <= 1e-9 and abs(gains[0, 1]) <= 1e-9


class TestStrategies:
    def test_names(self):
        assert get_beamformer("cbf").name == "cbf"
        assert get_beamformer("smbf").name == "smbf"
        with pytest.raises(ValueError):
            get_beamformer("zf")

    def test_cbf_mixing_is_identity(self):
        h = crandn(np.random.default_rng(0), 7, 3, 3)
        bf = get_beamformer("cbf")
        np.testing.assert_array_equal(bf.dl_mixing(h, 0.1), np.broadcast_to(np.eye(3), (7, 3, 3)))
        np.testing.assert_array_equal(bf.ul_mixing(h, 0.1), np.broadcast_to(np.eye(3), (7, 3, 3)))

    def test_deterministic(self):
        h = crandn(np.random.default_rng(0), 2, 3, 3)
        bf = get_beamformer("smbf")
        np.testing.assert_array_equal(bf.dl_mixing(h, 0.1), bf.dl_mixing(h, 0.1))


class TestPortAssignment:
    def test_dense_numbering(self):
        pa = PortAssignment((7, 3, 5))
        assert [pa.layer(u) for u in (7, 3, 5)] == [0, 1, 2]
        assert pa.port(5) == pa.layer(5)
        assert len(pa) == 3

    def test_duplicate_rejected(self):
        with pytest.raises(ValueError):
            PortAssignment((1, 2, 1))

    def test_all_permutations_distinct(self):
        for perm in itertools.permutations(range(3)):
            pa = PortAssignment(perm)
            assert sorted(pa.layer(u) for u in perm) == [0, 1, 2]
