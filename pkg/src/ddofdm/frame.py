"""
Resource-grid construction and transmission.

Gray-mapped 4-QAM, the rectangular pilot lattice ``{(m' d_f, n' d_t)}``,
and the per-symbol matrix channel ``y^n = H^n x^n + w``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, OfdmConfig, path_bases
from .errors import InvalidArgumentError
from .numerics import gaussian_noise

_QAM4 = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)


@dataclass(frozen=True)
class PilotPattern:
    d_t: int
    d_f: int

    @classmethod
    def from_config(cls, cfg: OfdmConfig) -> "PilotPattern":
        return cls(cfg.d_t, cfg.d_f)

    def mask(self, M: int, N: int) -> np.ndarray:
        """Boolean ``(M, N)`` grid, True on pilot resource elements."""
        if M % self.d_f or N % self.d_t:
            raise InvalidArgumentError(f"pattern ({self.d_t}, {self.d_f}) does not tile a {M}x{N} grid")
        mask = np.zeros((M, N), dtype=bool)
        mask[:: self.d_f, :: self.d_t] = True
        return mask

    def positions(self, M: int, N: int) -> list:
        """``(m, n)`` pilot coordinates in row-major order of ``(n', m')``."""
        return [(mp * self.d_f, nq * self.d_t) for nq in range(N // self.d_t) for mp in range(M // self.d_f)]


@dataclass
class TfGrid:
    """``(M, N)`` complex symbols plus a pilot mask of the same shape."""

    data: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.data.shape != self.mask.shape:
            raise InvalidArgumentError("grid data and mask shapes differ")

    @property
    def pilots(self) -> np.ndarray:
        """Flat view of the pilot values, in row-major ``(m, n)`` order."""
        return self.data[self.mask]


def data_re_count(cfg: OfdmConfig) -> int:
    return cfg.M * cfg.N - cfg.pilot_count


def qam4_map(bits) -> np.ndarray:
    """Gray 4-QAM: ``00 -> (1+j)/sqrt2, 01 -> (1-j)/sqrt2, 10 -> (-1+j)/sqrt2, 11 -> (-1-j)/sqrt2``."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % 2:
        raise InvalidArgumentError(f"4-QAM needs an even bit count, got {bits.size}")
    if np.any((bits != 0) & (bits != 1)):
        raise InvalidArgumentError("bits must be 0 or 1")
    return _QAM4[2 * bits[0::2] + bits[1::2]]


def qam4_demap(symbols) -> np.ndarray:
    """Nearest-neighbour hard decision; the inverse of :func:`qam4_map`."""
    s = np.asarray(symbols).ravel()
    out = np.empty(2 * s.size, dtype=np.int8)
    out[0::2] = s.real < 0
    out[1::2] = s.imag < 0
    return out


def random_qam4(n: int, rng: np.random.Generator) -> np.ndarray:
    return _QAM4[rng.integers(0, 4, n)]


def build_grid(bits, pat: PilotPattern, cfg: OfdmConfig, rng: np.random.Generator) -> TfGrid:
    """
    Place random 4-QAM pilots on the lattice and mapped bits everywhere else.

    Data fill the non-pilot REs in column-major (symbol by symbol) order.
    All REs carry energy ``E_p``.
    """
    mask = pat.mask(cfg.M, cfg.N)
    n_data = int((~mask).sum())
    bits = np.asarray(bits).ravel()
    if bits.size != 2 * n_data:
        raise InvalidArgumentError(f"expected {2 * n_data} bits for {n_data} data REs, got {bits.size}")
    data = np.empty((cfg.M, cfg.N), dtype=complex)
    # boolean indexing on the transpose walks symbols first, then subcarriers
    data.T[mask.T] = random_qam4(int(mask.sum()), rng)
    data.T[~mask.T] = qam4_map(bits)
    return TfGrid(data * np.sqrt(cfg.E_p), mask)


def data_symbols(grid: TfGrid) -> np.ndarray:
    """Data REs in the order :func:`build_grid` filled them."""
    return grid.data.T[~grid.mask.T]


def noise_variance(snr_db: float, E_p: float = 1.0) -> float:
    """``sigma_w^2 = E_p 10^(-snr/10)`` (SNR is symbol energy over noise)."""
    return E_p * 10.0 ** (-snr_db / 10.0)


def apply_channel(x: np.ndarray, ch: ChannelRealization, cfg: OfdmConfig) -> np.ndarray:
    """Noise-free ``H^n x^n`` for every symbol of an ``(M, N)`` grid."""
    B, c = path_bases(ch, cfg)
    y = np.zeros_like(x, dtype=complex)
    for Bi, ci in zip(B, c):
        y += (Bi @ x) * ci[None, :]
    return y


def transmit(
    grid: TfGrid,
    ch: ChannelRealization,
    snr_db: float,
    cfg: OfdmConfig,
    rng: np.random.Generator,
) -> TfGrid:
    """Pass a grid through the channel and add ``CN(0, sigma_w^2)`` noise.

    ``snr_db = inf`` transmits noiselessly (the noise stream is still drawn
    so the generator advances identically).
    """
    y = apply_channel(grid.data, ch, cfg)
    var = 0.0 if np.isinf(snr_db) and snr_db > 0 else noise_variance(snr_db, cfg.E_p)
    y = y + gaussian_noise(y.shape, var, rng)
    return TfGrid(y, grid.mask.copy())


def grid_to_csv(grid: TfGrid) -> str:
    """CSV with header ``m,n,re,im,flag``; flag is ``pilot`` or ``data``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "n", "re", "im", "flag"])
    M, N = grid.data.shape
    for n in range(N):
        for m in range(M):
            v = grid.data[m, n]
            w.writerow([m, n, repr(float(v.real)), repr(float(v.imag)), "pilot" if grid.mask[m, n] else "data"])
    return buf.getvalue()


def grid_from_csv(text: str) -> TfGrid:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise InvalidArgumentError("empty grid CSV")
    M = max(int(r["m"]) for r in rows) + 1
    N = max(int(r["n"]) for r in rows) + 1
    data = np.zeros((M, N), dtype=complex)
    mask = np.zeros((M, N), dtype=bool)
    for r in rows:
        m, n = int(r["m"]), int(r["n"])
        data[m, n] = complex(float(r["re"]), float(r["im"]))
        if r["flag"] not in ("pilot", "data"):
            raise InvalidArgumentError(f"bad flag {r['flag']!r}")
        mask[m, n] = r["flag"] == "pilot"
    return TfGrid(data, mask)
