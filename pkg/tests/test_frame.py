import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddofdm.channel import ChannelRealization, OfdmConfig, sample_channel, tf_channel_matrix
from ddofdm.errors import InvalidArgumentError
from ddofdm.frame import (
    PilotPattern,
    TfGrid,
    apply_channel,
    build_grid,
    data_re_count,
    data_symbols,
    grid_from_csv,
    grid_to_csv,
    noise_variance,
    qam4_demap,
    qam4_map,
    random_qam4,
    transmit,
)
from ddofdm.numerics import make_rng

CFG = OfdmConfig()
PAT = PilotPattern.from_config(CFG)


def random_bits(cfg, seed):
    return make_rng(seed).integers(0, 2, 2 * data_re_count(cfg))


class TestQam4:
    def test_gray_table(self):
        s = qam4_map([0, 0, 0, 1, 1, 0, 1, 1]) * np.sqrt(2)
        np.testing.assert_allclose(s, [1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])

    def test_unit_energy(self):
        assert np.allclose(np.abs(qam4_map([0, 1, 1, 1])), 1.0)
        assert np.allclose(np.abs(random_qam4(10, make_rng(0))), 1.0)

    def test_neighbours_differ_in_one_bit(self):
        pts = {(0, 0): 1 + 1j, (0, 1): 1 - 1j, (1, 0): -1 + 1j, (1, 1): -1 - 1j}
        for a, pa in pts.items():
            for b, pb in pts.items():
                if abs(abs(pa - pb) - 2) < 1e-12:
                    assert sum(x != y for x, y in zip(a, b)) == 1

    def test_negation_flips_both_bits(self):
        bits = random_bits(CFG, 1)[:40]
        np.testing.assert_array_equal(qam4_demap(-qam4_map(bits)), 1 - bits)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=0, max_size=64).filter(lambda b: len(b) % 2 == 0))
    def test_round_trip(self, bits):
        np.testing.assert_array_equal(qam4_demap(qam4_map(bits)), bits)

    def test_invalid_bits(self):
        with pytest.raises(InvalidArgumentError):
            qam4_map([0, 1, 1])
        with pytest.raises(InvalidArgumentError):
            qam4_map([0, 2])


class TestGrid:
    def test_pilot_lattice(self):
        mask = PAT.mask(64, 64)
        assert mask.sum() == 256 and mask[0, 0] and mask[4, 8] and not mask[1, 0] and not mask[0, 1]
        assert PAT.positions(64, 64)[:2] == [(0, 0), (4, 0)]
        assert data_re_count(CFG) == 64 * 64 - 256

    def test_pattern_must_tile(self):
        with pytest.raises(InvalidArgumentError):
            PilotPattern(3, 4).mask(64, 64)

    def test_build_places_data_symbol_major(self):
        bits = random_bits(CFG, 2)
        g = build_grid(bits, PAT, CFG, make_rng(0))
        np.testing.assert_allclose(data_symbols(g), qam4_map(bits))
        # the first data RE is subcarrier 1 of symbol 0
        assert np.isclose(g.data[1, 0], qam4_map(bits[:2])[0])
        assert np.allclose(np.abs(g.data), 1.0)

    def test_energy_scaling(self):
        cfg = OfdmConfig(E_p=4.0)
        g = build_grid(random_bits(cfg, 3), PAT, cfg, make_rng(0))
        assert np.allclose(np.abs(g.data) ** 2, 4.0)

    def test_wrong_bit_count(self):
        with pytest.raises(InvalidArgumentError):
            build_grid(np.zeros(10, int), PAT, CFG, make_rng(0))

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            TfGrid(np.zeros((4, 4)), np.zeros((4, 5), bool))

    def test_csv_round_trip(self):
        cfg = OfdmConfig(M=8, N=8, d_t=2, d_f=2)
        g = build_grid(random_bits(cfg, 4), PilotPattern(2, 2), cfg, make_rng(5))
        text = grid_to_csv(g)
        assert text.splitlines()[0] == "m,n,re,im,flag"
        back = grid_from_csv(text)
        np.testing.assert_array_equal(back.data, g.data)
        np.testing.assert_array_equal(back.mask, g.mask)


class TestTransmit:
    def test_matches_per_symbol_matrices(self):
        ch = sample_channel(CFG, 5, 4.17e-6, 937.5, "off-grid-doppler", make_rng(6))
        g = build_grid(random_bits(CFG, 6), PAT, CFG, make_rng(7))
        y = apply_channel(g.data, ch, CFG)
        for n in (0, 31, 63):
            np.testing.assert_allclose(y[:, n], tf_channel_matrix(ch, n, CFG) @ g.data[:, n], atol=1e-12)

    def test_noiseless_and_noisy(self):
        ch = ChannelRealization.from_indices([(1.0, 0, 0.0)], CFG)
        g = build_grid(random_bits(CFG, 8), PAT, CFG, make_rng(9))
        clean = transmit(g, ch, np.inf, CFG, make_rng(1))
        np.testing.assert_allclose(clean.data, g.data, atol=1e-15)
        noisy = transmit(g, ch, 10.0, CFG, make_rng(1))
        assert abs(np.mean(np.abs(noisy.data - g.data) ** 2) - 0.1) < 0.01

    def test_noise_variance(self):
        assert np.isclose(noise_variance(20.0), 0.01)
        assert np.isclose(noise_variance(0.0, E_p=2.0), 2.0)
