"""
Equalisation, hard-decision BER counting and classical CTF baselines.

DD-domain estimates are turned back into full ``M x M`` per-symbol channel
matrices (ICI included) and equalised with a matrix MMSE filter. The
classical baselines only know a per-RE CTF and use the scalar MMSE
equaliser.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import ChannelRealization, OfdmConfig, check_doppler_feasible, ici_gain, ici_matrix, sample_channel
from .ddest import CsfEstimate, PilotCtf
from .errors import InvalidArgumentError
from .frame import TfGrid, qam4_demap
from .numerics import make_rng, solve_linear

log = logging.getLogger(__name__)


@dataclass
class EqualizedGrid:
    symbols: np.ndarray
    mask: np.ndarray


@dataclass
class CtfEstimate:
    """Per-RE single-tap channel estimate, ``(M, N)``."""

    values: np.ndarray


@dataclass(frozen=True)
class BerStats:
    errors: int
    bits: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")


# ---------------------------------------------------------------------------
# DD-a-OFDM receiver
# ---------------------------------------------------------------------------


def csf_to_tf_matrices(est: CsfEstimate, cfg: OfdmConfig) -> np.ndarray:
    """Rebuild every ``H^n`` from a CSF estimate; shape ``(N, M, M)``.

    Estimated gains include the ``A[0,0]`` attenuation, which is divided
    out before the ICI matrices are applied.
    """
    M, N = cfg.M, cfg.N
    m = np.arange(M)
    n = np.arange(N)
    out = np.zeros((N, M, M), dtype=complex)
    for p in est.paths:
        kappa = p.k * cfg.T / cfg.T_sym
        h = p.h / complex(ici_gain(kappa, M, N))
        B = np.exp(-2j * np.pi * m * p.l / M)[:, None] * ici_matrix(kappa, M, N)
        out += (h * np.exp(2j * np.pi * n * p.k / N))[:, None, None] * B[None]
    return out


def csf_to_tf_matrix(est: CsfEstimate, n: int, cfg: OfdmConfig) -> np.ndarray:
    if not 0 <= n < cfg.N:
        raise InvalidArgumentError(f"symbol index {n} outside [0, {cfg.N})")
    M = cfg.M
    m = np.arange(M)
    out = np.zeros((M, M), dtype=complex)
    for p in est.paths:
        kappa = p.k * cfg.T / cfg.T_sym
        h = p.h / complex(ici_gain(kappa, M, cfg.N))
        out += h * np.exp(2j * np.pi * n * p.k / cfg.N) * np.exp(-2j * np.pi * m * p.l / M)[:, None] * ici_matrix(
            kappa, M, cfg.N
        )
    return out


def mmse_equalize(rx: TfGrid, H_hat, sigma_w2: float, E_p: float) -> EqualizedGrid:
    """
    Per-symbol matrix MMSE, ``x = H^H (H H^H + sigma_w^2/E_p I)^-1 y``.

    ``H_hat`` is an ``(N, M, M)`` array or a callable ``n -> (M, M)``.
    """
    M, N = rx.data.shape
    H = np.stack([H_hat(n) for n in range(N)]) if callable(H_hat) else np.asarray(H_hat)
    if H.shape != (N, M, M):
        raise InvalidArgumentError(f"channel matrices have shape {H.shape}, expected {(N, M, M)}")
    reg = H @ H.conj().transpose(0, 2, 1) + (sigma_w2 / E_p) * np.eye(M)
    z = solve_linear(reg, rx.data.T)
    x = np.einsum("nqp,nq->pn", H.conj(), z)
    return EqualizedGrid(x, rx.mask.copy())


def single_tap_equalize(rx: TfGrid, ctf: CtfEstimate, sigma_w2: float, E_p: float) -> EqualizedGrid:
    """Scalar MMSE per RE, ``h^* y / (|h|^2 + sigma_w^2/E_p)``."""
    h = ctf.values
    x = h.conj() * rx.data / (np.abs(h) ** 2 + sigma_w2 / E_p)
    return EqualizedGrid(x, rx.mask.copy())


def demap_and_count(eq: EqualizedGrid, tx_bits, mask: np.ndarray | None = None) -> BerStats:
    """Hard-decide data REs (pilots excluded) and count bit errors."""
    mask = eq.mask if mask is None else mask
    data = eq.symbols.T[~mask.T]
    tx_bits = np.asarray(tx_bits).ravel()
    if tx_bits.size != 2 * data.size:
        raise InvalidArgumentError(f"{tx_bits.size} reference bits for {data.size} data REs")
    errors = int(np.count_nonzero(qam4_demap(data) != tx_bits))
    return BerStats(errors, int(tx_bits.size))


# ---------------------------------------------------------------------------
# classical baselines
# ---------------------------------------------------------------------------


def _interp_axis(anchors: np.ndarray, spacing: int, length: int, axis: int) -> np.ndarray:
    """Piecewise-linear interpolation from anchors at ``0, spacing, 2 spacing, ...``; linear extrapolation at the end."""
    A = anchors.shape[axis]
    if A < 2:
        raise InvalidArgumentError("linear interpolation needs at least two pilots per axis")
    pos = np.arange(length)
    seg = np.minimum(pos // spacing, A - 2)
    frac = (pos - seg * spacing) / spacing
    lo = np.take(anchors, seg, axis=axis)
    hi = np.take(anchors, seg + 1, axis=axis)
    shape = [1] * anchors.ndim
    shape[axis] = length
    frac = frac.reshape(shape)
    return lo + (hi - lo) * frac


def baseline_linear_interp(ctf_pilot: PilotCtf, cfg: OfdmConfig) -> CtfEstimate:
    """Linear interpolation of pilot CTFs along time, then along frequency."""
    g = ctf_pilot.values.T  # (M/d_f, N/d_t)
    if g.shape != (cfg.L, cfg.K):
        raise InvalidArgumentError(f"pilot CTF shape {ctf_pilot.values.shape} does not match the pilot pattern")
    along_time = _interp_axis(g, cfg.d_t, cfg.N, axis=1)  # (L, N)
    full = _interp_axis(along_time, cfg.d_f, cfg.M, axis=0)  # (M, N)
    return CtfEstimate(full)


@dataclass(frozen=True)
class ChannelStatistics:
    """Channel-model parameters that determine the CTF correlation."""

    cfg: OfdmConfig
    P: int
    tau_max: float
    nu_max: float
    mode: str
    gain_model: str = "rayleigh"
    realizations: int = 10_000
    seed: int = 0

    def key(self) -> str:
        c = self.cfg
        text = (
            f"v1|M={c.M}|N={c.N}|df={c.delta_f!r}|Lcp={c.L_cp}|P={self.P}|tau={self.tau_max!r}|"
            f"nu={self.nu_max!r}|mode={self.mode}|gain={self.gain_model}|R={self.realizations}|seed={self.seed}"
        )
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class CtfCorrelation:
    """
    Empirical CTF correlation ``r(dm, dn) = E[h(m + dm, n + dn) h(m, n)^*]``.

    ``lags[dm + M - 1, dn + N - 1]``; the CTF is wide-sense stationary in
    both time and frequency under the path model, so this lag function
    fixes every entry of the pilot/full-grid correlation matrices.
    """

    lags: np.ndarray
    cfg: OfdmConfig

    def matrix(self, m_a, n_a, m_b, n_b) -> np.ndarray:
        M, N = self.cfg.M, self.cfg.N
        dm = np.subtract.outer(m_a, m_b) + M - 1
        dn = np.subtract.outer(n_a, n_b) + N - 1
        return self.lags[dm, dn]


def estimate_ctf_correlation(stats: ChannelStatistics) -> CtfCorrelation:
    """
    Average the CTF lag correlation over ``stats.realizations`` random channels.

    Each realisation contributes ``sum_i |h_i|^2 exp(j 2 pi dn k_i/N) exp(-j 2 pi dm l_i/M)``,
    the correlation of the ICI-free CTF conditioned on its path parameters.
    """
    cfg = stats.cfg
    M, N = cfg.M, cfg.N
    dm = np.arange(-(M - 1), M)
    dn = np.arange(-(N - 1), N)
    lags = np.zeros((2 * M - 1, 2 * N - 1), dtype=complex)
    batch = 1000
    for start in range(0, stats.realizations, batch):
        w, l, k = [], [], []
        for r in range(start, min(start + batch, stats.realizations)):
            ch = sample_channel(
                cfg, stats.P, stats.tau_max, stats.nu_max, stats.mode, make_rng(stats.seed, r), stats.gain_model
            )
            for p in ch.paths:
                w.append(abs(p.h) ** 2)
                l.append(p.l)
                k.append(p.k)
        w, l, k = np.array(w), np.array(l), np.array(k)
        U = np.exp(-2j * np.pi * np.outer(l, dm) / M) * w[:, None]
        V = np.exp(2j * np.pi * np.outer(k, dn) / N)
        lags += U.T @ V
    return CtfCorrelation(lags / stats.realizations, cfg)


def save_correlation(corr: CtfCorrelation, path: Path) -> None:
    """Text cache: a version line, ``rows cols``, then one row of ``re,im`` pairs per line."""
    rows, cols = corr.lags.shape
    lines = ["ddofdm-ctf-correlation v1", f"{rows} {cols}"]
    for row in corr.lags:
        lines.append(" ".join(f"{float(v.real)!r},{float(v.imag)!r}" for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)


def load_correlation(path: Path, cfg: OfdmConfig) -> CtfCorrelation:
    lines = path.read_text().splitlines()
    if not lines or lines[0] != "ddofdm-ctf-correlation v1":
        raise InvalidArgumentError(f"{path}: not a correlation cache file")
    rows, cols = map(int, lines[1].split())
    if (rows, cols) != (2 * cfg.M - 1, 2 * cfg.N - 1) or len(lines) != rows + 2:
        raise InvalidArgumentError(f"{path}: dimensions do not match the configuration")
    lags = np.empty((rows, cols), dtype=complex)
    for i, line in enumerate(lines[2:]):
        pairs = [tok.split(",") for tok in line.split()]
        lags[i] = [complex(float(a), float(b)) for a, b in pairs]
    return CtfCorrelation(lags, cfg)


def ctf_correlation(stats: ChannelStatistics, cache_dir: Path | None = None) -> CtfCorrelation:
    """Correlation for ``stats``, read from / written to ``cache_dir`` when given."""
    check_doppler_feasible(stats.nu_max, stats.cfg)
    if cache_dir is None:
        return estimate_ctf_correlation(stats)
    path = Path(cache_dir) / f"ctfcorr-{stats.key()}.txt"
    if path.exists():
        return load_correlation(path, stats.cfg)
    log.info("estimating CTF correlation from %d channels -> %s", stats.realizations, path)
    corr = estimate_ctf_correlation(stats)
    save_correlation(corr, path)
    return corr


class MmseCtfEstimator:
    """
    Linear MMSE interpolation of pilot CTFs to the full grid.

    ``vec(h) = R1 (R2 + sigma_w^2 E[x x^H]^-1)^-1 vec(h_pilot)`` with
    ``R1`` the full-grid/pilot and ``R2`` the pilot/pilot correlation.
    Filters are cached per noise level.
    """

    def __init__(self, corr: CtfCorrelation):
        cfg = corr.cfg
        self.cfg = cfg
        m_full, n_full = np.meshgrid(np.arange(cfg.M), np.arange(cfg.N), indexing="xy")
        # vec order: symbol-major, matching PilotCtf.values[n', m'].ravel()
        mf, nf = m_full.ravel(), n_full.ravel()
        mp, np_ = np.meshgrid(np.arange(cfg.L) * cfg.d_f, np.arange(cfg.K) * cfg.d_t, indexing="xy")
        mp, np_ = mp.ravel(), np_.ravel()
        self.R1 = corr.matrix(mf, nf, mp, np_)
        self.R2 = corr.matrix(mp, np_, mp, np_)
        self._filters: dict = {}

    def filter(self, sigma_w2: float, E_p: float) -> np.ndarray:
        key = (float(sigma_w2), float(E_p))
        if key not in self._filters:
            S = self.R2 + (sigma_w2 / E_p) * np.eye(self.R2.shape[0])
            self._filters[key] = solve_linear(S, self.R1.conj().T).conj().T
        return self._filters[key]

    def __call__(self, ctf_pilot: PilotCtf, sigma_w2: float, E_p: float) -> CtfEstimate:
        cfg = self.cfg
        if ctf_pilot.values.shape != (cfg.K, cfg.L):
            raise InvalidArgumentError(f"pilot CTF shape {ctf_pilot.values.shape} does not match the pilot pattern")
        h = self.filter(sigma_w2, E_p) @ ctf_pilot.values.ravel()
        return CtfEstimate(h.reshape(cfg.N, cfg.M).T.copy())


def baseline_mmse_ctf(ctf_pilot: PilotCtf, corr: CtfCorrelation, sigma_w2: float, E_p: float) -> CtfEstimate:
    return MmseCtfEstimator(corr)(ctf_pilot, sigma_w2, E_p)
