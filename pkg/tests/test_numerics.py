import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddofdm.errors import InvalidArgumentError, SingularMatrixError
from ddofdm.numerics import (
    dft,
    dft_matrix,
    doppler_bins,
    gaussian_noise,
    idft,
    make_rng,
    sfft_pilot_grid,
    solve_linear,
)


def naive_dft(x):
    M = len(x)
    return np.array([sum(x[l] * np.exp(-2j * np.pi * m * l / M) for l in range(M)) for m in range(M)]) / np.sqrt(M)


def naive_sfft(g, N, M, d_t, d_f):
    """Direct quadruple-index sum, rows ordered by Doppler index -K//2 .. K-K//2-1."""
    K, L = g.shape
    out = np.zeros((K, L), dtype=complex)
    for i, k in enumerate(range(-(K // 2), K - K // 2)):
        for l in range(L):
            acc = 0j
            for n in range(K):
                for m in range(L):
                    acc += g[n, m] * np.exp(-2j * np.pi * n * k / K) * np.exp(2j * np.pi * m * l / L)
            out[i, l] = acc
    return out * d_t * d_f / np.sqrt(N * M)


class TestDft:
    def test_matches_definition(self):
        x = make_rng(1).standard_normal(12) + 1j * make_rng(2).standard_normal(12)
        np.testing.assert_allclose(dft(x), naive_dft(x), atol=1e-12)

    def test_delta_gives_flat_spectrum(self):
        x = np.zeros(8)
        x[0] = 1.0
        np.testing.assert_allclose(dft(x), np.full(8, 1 / np.sqrt(8)), atol=1e-15)

    def test_matrix_is_unitary_and_consistent(self):
        F = dft_matrix(16)
        np.testing.assert_allclose(F @ F.conj().T, np.eye(16), atol=1e-12)
        x = make_rng(3).standard_normal(16).astype(complex)
        np.testing.assert_allclose(F @ x, dft(x), atol=1e-12)

    def test_axis_argument(self):
        X = make_rng(4).standard_normal((5, 6))
        np.testing.assert_allclose(dft(X, axis=0)[:, 2], dft(X[:, 2]), atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            dft(np.zeros(0))
        with pytest.raises(InvalidArgumentError):
            idft(np.zeros((3, 0)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 64), st.integers(0, 2**31))
    def test_round_trip_and_parseval(self, M, seed):
        rng = make_rng(seed)
        x = rng.standard_normal(M) + 1j * rng.standard_normal(M)
        np.testing.assert_allclose(idft(dft(x)), x, atol=1e-12)
        assert np.isclose(np.linalg.norm(dft(x)), np.linalg.norm(x), rtol=1e-12)


class TestSfft:
    @pytest.mark.parametrize("N,M,d_t,d_f", [(16, 16, 4, 4), (20, 12, 4, 4), (12, 8, 4, 2), (6, 6, 2, 3)])
    def test_matches_direct_sum(self, N, M, d_t, d_f):
        rng = make_rng(5)
        g = rng.standard_normal((N // d_t, M // d_f)) + 1j * rng.standard_normal((N // d_t, M // d_f))
        np.testing.assert_allclose(sfft_pilot_grid(g, N, M, d_t, d_f), naive_sfft(g, N, M, d_t, d_f), atol=1e-12)

    def test_constant_grid_concentrates_at_origin(self):
        N = M = 64
        out = sfft_pilot_grid(np.ones((16, 16)), N, M, 4, 4)
        i0 = list(doppler_bins(16)).index(0)
        assert np.isclose(out[i0, 0], np.sqrt(N * M))
        out[i0, 0] = 0
        assert np.max(np.abs(out)) < 1e-10

    def test_inconsistent_shape_rejected(self):
        with pytest.raises(InvalidArgumentError):
            sfft_pilot_grid(np.ones((4, 4)), 64, 64, 4, 4)
        with pytest.raises(InvalidArgumentError):
            sfft_pilot_grid(np.ones((0, 4)), 0, 16, 4, 4)

    def test_doppler_bins(self):
        assert list(doppler_bins(4)) == [-2, -1, 0, 1]
        assert list(doppler_bins(5)) == [-2, -1, 0, 1, 2]


class TestSolveLinear:
    def test_matches_reference(self):
        rng = make_rng(6)
        A = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
        b = rng.standard_normal(10) + 0j
        x = solve_linear(A, b)
        np.testing.assert_allclose(A @ x, b, atol=1e-10)

    def test_stacked(self):
        rng = make_rng(7)
        A = rng.standard_normal((3, 5, 5)) + 5 * np.eye(5)
        b = rng.standard_normal((3, 5))
        x = solve_linear(A, b)
        for a, xi, bi in zip(A, x, b):
            np.testing.assert_allclose(a @ xi, bi, atol=1e-12)
        B = rng.standard_normal((3, 5, 2))
        X = solve_linear(A, B)
        assert X.shape == (3, 5, 2)
        np.testing.assert_allclose(A @ X, B, atol=1e-12)

    def test_singular_raises(self):
        A = np.array([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(SingularMatrixError):
            solve_linear(A, np.ones(2))
        with pytest.raises(SingularMatrixError):
            solve_linear(np.zeros((3, 3)), np.ones(3))

    def test_singular_error_is_a_linalg_error(self):
        with pytest.raises(np.linalg.LinAlgError):
            solve_linear(np.zeros((2, 2)), np.ones(2))

    def test_shape_errors(self):
        with pytest.raises(InvalidArgumentError):
            solve_linear(np.ones((2, 3)), np.ones(2))
        with pytest.raises(InvalidArgumentError):
            solve_linear(np.eye(3), np.ones(4))


class TestRandomness:
    def test_streams_reproducible_and_distinct(self):
        a = make_rng(42, 3, 1).standard_normal(5)
        b = make_rng(42, 3, 1).standard_normal(5)
        c = make_rng(42, 3, 2).standard_normal(5)
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)

    def test_noise_moments(self):
        w = gaussian_noise(200_000, 2.5, make_rng(0))
        assert abs(np.mean(np.abs(w) ** 2) - 2.5) < 0.03
        assert abs(np.mean(w.real**2) - np.mean(w.imag**2)) < 0.03
        assert abs(np.mean(w * w)) < 0.03  # circular symmetry

    def test_zero_variance_and_shape(self):
        w = gaussian_noise((3, 4), 0.0, make_rng(0))
        assert w.shape == (3, 4) and not np.any(w)

    def test_negative_variance_rejected(self):
        with pytest.raises(InvalidArgumentError):
            gaussian_noise(3, -1.0, make_rng(0))
