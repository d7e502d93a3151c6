"""
Complex numerical kernels shared by the simulator.

Unitary DFT pair, the pilot-grid SFFT, a checked dense solver and seeded
complex Gaussian noise. Everything here is a pure function of its inputs;
random state is always passed in explicitly.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy import linalg as sla

from .errors import InvalidArgumentError, SingularMatrixError


def dft(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unitary DFT, ``X[m] = M^-1/2 sum_l x[l] exp(-j 2 pi m l / M)``."""
    x = np.asarray(x, dtype=complex)
    if x.ndim == 0 or x.shape[axis] == 0:
        raise InvalidArgumentError("dft needs a non-empty input")
    return np.fft.fft(x, axis=axis, norm="ortho")


def idft(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unitary inverse DFT (``+j`` kernel, same ``M^-1/2`` factor)."""
    x = np.asarray(x, dtype=complex)
    if x.ndim == 0 or x.shape[axis] == 0:
        raise InvalidArgumentError("idft needs a non-empty input")
    return np.fft.ifft(x, axis=axis, norm="ortho")


def dft_matrix(M: int) -> np.ndarray:
    """The unitary ``M x M`` DFT matrix ``F`` with ``F @ x == dft(x)``."""
    m = np.arange(M)
    return np.exp(-2j * np.pi * np.outer(m, m) / M) / np.sqrt(M)


def doppler_bins(K: int) -> np.ndarray:
    """Doppler indices of one re-centred period, ``[-K//2, ..., K - K//2 - 1]``."""
    return np.arange(K) - K // 2


def sfft_pilot_grid(g: np.ndarray, N: int, M: int, d_t: int, d_f: int) -> np.ndarray:
    """
    Symplectic FFT of a pilot-subsampled grid.

    Parameters
    ----------
    g : ndarray, shape (N/d_t, M/d_f)
        Values at pilot resource elements, ``g[n', m']`` sitting on OFDM
        symbol ``n' d_t`` and subcarrier ``m' d_f``.
    N, M : int
        Full frame size (symbols, subcarriers).
    d_t, d_f : int
        Pilot spacings.

    Returns
    -------
    ndarray, shape (N/d_t, M/d_f)
        ``out[i, l]`` for Doppler index ``k = doppler_bins(N/d_t)[i]`` and delay
        index ``l``. DFT along time, IDFT along frequency, scaled by
        ``(d_t / sqrt(N)) (d_f / sqrt(M))``.
    """
    g = np.asarray(g, dtype=complex)
    if g.ndim != 2 or min(g.shape) < 1:
        raise InvalidArgumentError(f"pilot grid must be a non-empty matrix, got shape {g.shape}")
    K, L = g.shape
    if K * d_t != N or L * d_f != M:
        raise InvalidArgumentError(
            f"pilot grid {g.shape} inconsistent with N={N}, M={M}, d_t={d_t}, d_f={d_f}"
        )
    scale = d_t * d_f / np.sqrt(N * M)
    # fft: sum exp(-j 2 pi n' k / K); L * ifft: sum exp(+j 2 pi m' l / L)
    out = np.fft.fft(g, axis=0)
    out = np.fft.ifft(out, axis=1) * L
    return np.fft.fftshift(out * scale, axes=0)


def solve_linear(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Solve ``A x = b`` by LU with partial pivoting.

    ``A`` may be a single square matrix or a stack ``(..., n, n)``; ``b`` is
    ``(..., n)`` or ``(..., n, r)``. Raises :class:`SingularMatrixError` when
    the reciprocal condition number drops below machine epsilon.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise InvalidArgumentError(f"A must be square, got shape {A.shape}")
    n = A.shape[-1]
    vector_rhs = b.shape == A.shape[:-1]
    if not vector_rhs and b.shape[:-1] != A.shape[:-1]:
        raise InvalidArgumentError(f"b of shape {b.shape} does not match A of shape {A.shape}")
    if A.ndim == 2:
        return _solve_one(A, b)

    batch = A.shape[:-2]
    A_flat = A.reshape(-1, n, n)
    b_flat = b.reshape((-1,) + b.shape[len(batch):])
    out = np.stack([_solve_one(a, rhs) for a, rhs in zip(A_flat, b_flat)])
    return out.reshape(b.shape[: len(batch)] + out.shape[1:])


def _solve_one(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    dtype = np.result_type(A, b, float)
    A = A.astype(dtype, copy=False)
    if not np.all(np.isfinite(A)):
        raise InvalidArgumentError("matrix has non-finite entries")
    with warnings.catch_warnings():
        # exact singularity is reported below through rcond
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    gecon, = sla.get_lapack_funcs(("gecon",), (lu,))
    anorm = np.linalg.norm(A, 1)
    rcond, _ = gecon(lu, anorm, norm="1")
    if anorm == 0.0 or rcond < np.finfo(float).eps:
        raise SingularMatrixError(f"matrix is singular to working precision (rcond={rcond:.3e})")
    return sla.lu_solve((lu, piv), b.astype(dtype, copy=False), check_finite=False)


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """
    Independent generator for stream ``key`` under a master ``seed``.

    Streams are derived through :class:`numpy.random.SeedSequence` spawn
    keys, so ``make_rng(s, t)`` is the same no matter which worker or in
    which order trial ``t`` is evaluated.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def gaussian_noise(n, variance: float, rng: np.random.Generator) -> np.ndarray:
    """Circularly symmetric ``CN(0, variance)`` samples of shape ``n``."""
    if variance < 0:
        raise InvalidArgumentError(f"noise variance must be >= 0, got {variance}")
    shape = (n,) if np.isscalar(n) else tuple(n)
    z = rng.standard_normal(shape + (2,))
    return np.sqrt(variance / 2.0) * (z[..., 0] + 1j * z[..., 1])
