"""
Delay-Doppler channel estimation from scattered time-frequency pilots.

Pipeline: least-squares CTF at the pilot lattice -> SFFT onto one period of
the delay-Doppler plane -> path extraction by peak detection or by the
path-wise maximum-likelihood search. Row ``i`` of an observation holds
Doppler index ``k = i - K//2`` and column ``l`` holds delay index ``l``,
with ``K = N/d_t`` and ``L = M/d_f``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, OfdmConfig, _dirichlet, ici_gain
from .errors import InvalidArgumentError, TooManyPathsError
from .frame import PilotPattern, TfGrid
from .numerics import doppler_bins, sfft_pilot_grid, solve_linear


# ---------------------------------------------------------------------------
# sampling kernels
# ---------------------------------------------------------------------------


def r_delay(l_i, l, M: int, d_f: int):
    """Delay sampling term ``sum_m' (d_f/sqrt M) exp(-j 2 pi m' d_f (l_i - l) / M)``."""
    L = M // d_f
    x = np.asarray(l_i, dtype=float) - np.asarray(l, dtype=float)
    return (d_f / np.sqrt(M)) * L * _dirichlet(x, L) * np.exp(-1j * np.pi * x * (1 - 1 / L))


def r_doppler(k_i, k, N: int, d_t: int):
    """Doppler sampling term ``sum_n' (d_t/sqrt N) exp(+j 2 pi n' d_t (k_i - k) / N)``."""
    K = N // d_t
    x = np.asarray(k_i, dtype=float) - np.asarray(k, dtype=float)
    return (d_t / np.sqrt(N)) * K * _dirichlet(x, K) * np.exp(1j * np.pi * x * (1 - 1 / K))


def r_delay_deriv(l_i, l, M: int, d_f: int):
    """``d r_delay / d l_i``, evaluated from the defining sum."""
    L = M // d_f
    x = np.asarray(l_i, dtype=float) - np.asarray(l, dtype=float)
    mp = np.arange(L).reshape((L,) + (1,) * x.ndim)
    terms = (-2j * np.pi * mp / L) * np.exp(-2j * np.pi * mp * x / L)
    return (d_f / np.sqrt(M)) * terms.sum(axis=0)


def r_doppler_deriv(k_i, k, N: int, d_t: int):
    """``d r_doppler / d k_i``, evaluated from the defining sum."""
    K = N // d_t
    x = np.asarray(k_i, dtype=float) - np.asarray(k, dtype=float)
    nq = np.arange(K).reshape((K,) + (1,) * x.ndim)
    terms = (2j * np.pi * nq / K) * np.exp(2j * np.pi * nq * x / K)
    return (d_t / np.sqrt(N)) * terms.sum(axis=0)


def wrap_doppler(k, K: int):
    """Map Doppler indices into the period ``[-K/2, K/2)``."""
    return np.mod(np.asarray(k, dtype=float) + K / 2, K) - K / 2


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


@dataclass
class PilotCtf:
    """LS channel estimates at pilot REs, ``values[n', m']`` at ``(m' d_f, n' d_t)``."""

    values: np.ndarray


@dataclass
class PeriodicDdObservation:
    values: np.ndarray
    cfg: OfdmConfig
    sigma_v2: float | None = None

    def __post_init__(self):
        if self.values.shape != (self.cfg.K, self.cfg.L):
            raise InvalidArgumentError(
                f"observation shape {self.values.shape} != ({self.cfg.K}, {self.cfg.L})"
            )

    @property
    def k_bins(self) -> np.ndarray:
        return doppler_bins(self.cfg.K)

    def at(self, k: int, l: int) -> complex:
        """Entry at Doppler index ``k`` (any integer, taken periodically) and delay ``l``."""
        K = self.cfg.K
        return self.values[(k + K // 2) % K, l % self.cfg.L]


@dataclass(frozen=True)
class EstimatedPath:
    h: complex
    l: int
    k: float


@dataclass
class CsfEstimate:
    paths: list = field(default_factory=list)

    @property
    def P_hat(self) -> int:
        return len(self.paths)


# ---------------------------------------------------------------------------
# observation
# ---------------------------------------------------------------------------


def ls_pilot_ctf(rx: TfGrid, tx: TfGrid, pat: PilotPattern) -> PilotCtf:
    """Entrywise ``y / x`` on the pilot lattice."""
    x = tx.data[:: pat.d_f, :: pat.d_t]
    if np.any(x == 0):
        raise InvalidArgumentError("pilot symbols must be non-zero for LS estimation")
    y = rx.data[:: pat.d_f, :: pat.d_t]
    return PilotCtf((y / x).T.copy())


def dd_observation(ctf: PilotCtf, cfg: OfdmConfig, sigma_v2: float | None = None) -> PeriodicDdObservation:
    values = sfft_pilot_grid(ctf.values, cfg.N, cfg.M, cfg.d_t, cfg.d_f)
    return PeriodicDdObservation(values, cfg, sigma_v2)


def sigma_v2(ch: ChannelRealization, cfg: OfdmConfig, sigma_w2: float) -> float:
    """
    Variance of the equivalent DD-domain noise (ICI plus AWGN).

    Uses ``E{1/|x|^2} = 1/E_p``, exact for 4-QAM.
    """
    inv_x2 = 1.0 / cfg.E_p
    spread = cfg.d_t * cfg.d_f
    ici = sum(
        abs(p.h) ** 2 * (1.0 - abs(complex(ici_gain(p.kappa, cfg.M, cfg.N))) ** 2) for p in ch.paths
    )
    return float(ici * cfg.E_p * inv_x2 * spread + sigma_w2 * inv_x2 * spread)


def blind_sigma_v2(obs: PeriodicDdObservation) -> float:
    """Noise-floor estimate from the median bin energy (``median |v|^2 = sigma^2 ln 2``)."""
    return float(np.median(np.abs(obs.values) ** 2) / math.log(2.0))


def model_observation(paths, cfg: OfdmConfig) -> np.ndarray:
    """Noise-free ``sum_i h_i R_delay(l_i, l) R_Doppler(k_i, k)`` for ``(h, l, k)`` triples."""
    out = np.zeros((cfg.K, cfg.L), dtype=complex)
    for h, l, k in paths:
        out += h * _phi(l, k, cfg)
    return out


def _phi(l, k, cfg: OfdmConfig) -> np.ndarray:
    kb = doppler_bins(cfg.K)
    lb = np.arange(cfg.L)
    return np.outer(r_doppler(k, kb, cfg.N, cfg.d_t), r_delay(l, lb, cfg.M, cfg.d_f))


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def detection_threshold(obs: PeriodicDdObservation, sigmas: float = 3.0, p_fa: float = 0.01) -> float:
    """
    Magnitude threshold for path detection.

    ``sigmas * sigma_v``, raised where needed so that a pure-noise frame of
    ``K L`` bins produces any false alarm with probability at most ``p_fa``.
    """
    if obs.sigma_v2 is None:
        raise InvalidArgumentError("observation has no noise variance attached")
    n_bins = obs.values.size
    c = max(sigmas, math.sqrt(math.log(n_bins / p_fa)))
    return c * math.sqrt(obs.sigma_v2)


def estimate_path_count(obs: PeriodicDdObservation, sigmas: float = 3.0, p_fa: float = 0.01) -> int:
    """Number of delay columns whose strongest bin clears :func:`detection_threshold`.

    The threshold never drops below ``1e-8`` of the strongest bin, so
    rounding residue is not counted when ``sigma_v2`` is zero.
    """
    col_peak = np.abs(obs.values).max(axis=0)
    thr = max(detection_threshold(obs, sigmas, p_fa), 1e-8 * float(col_peak.max(initial=0.0)))
    return int(np.sum(col_peak > thr))


def peak_detect_estimate(obs: PeriodicDdObservation, P_hat: int) -> CsfEstimate:
    """
    Successive peak picking with fractional-Doppler interpolation.

    Each iteration takes the global peak ``(k0, l0)``, picks the stronger of
    its two Doppler neighbours ``k0'`` (ties go to ``k0 + 1``), sets
    ``k = k0 + |y(k0')| (k0' - k0) / (|y(k0)| + |y(k0')|)``, divides the peak
    by the sampling kernels to get the gain, and clears column ``l0``.
    """
    if P_hat < 0:
        raise InvalidArgumentError("P_hat must be non-negative")
    cfg = obs.cfg
    K = cfg.K
    work = obs.values.copy()
    nonzero_cols = int(np.sum(np.any(work != 0, axis=0)))
    if P_hat > nonzero_cols:
        raise TooManyPathsError(f"asked for {P_hat} paths but only {nonzero_cols} delay columns carry energy")

    paths = []
    for _ in range(P_hat):
        mag = np.abs(work)
        i0, l0 = np.unravel_index(np.argmax(mag), mag.shape)
        k0 = int(i0) - K // 2
        lo, hi = mag[(i0 - 1) % K, l0], mag[(i0 + 1) % K, l0]
        step, side = (1, hi) if hi >= lo else (-1, lo)
        denom = mag[i0, l0] + side
        k_frac = side * step / denom if denom > 0 else 0.0
        k_hat = float(wrap_doppler(k0 + k_frac, K))
        gain = work[i0, l0] / (r_delay(l0, l0, cfg.M, cfg.d_f) * r_doppler(k_hat, k0, cfg.N, cfg.d_t))
        paths.append(EstimatedPath(complex(gain), int(l0), k_hat))
        work[:, l0] = 0.0
    return CsfEstimate(paths)


def ml_objective(obs: PeriodicDdObservation, est: CsfEstimate) -> float:
    """Squared residual ``||y - sum_i h_i Phi_i||^2``."""
    resid = obs.values - model_observation([(p.h, p.l, p.k) for p in est.paths], obs.cfg)
    return float(np.vdot(resid, resid).real)


def _column_fit(r_col: np.ndarray, k: float, cfg: OfdmConfig):
    """Correlation ``Phi^H r`` for a path in this column and its derivative in ``k``."""
    kb = doppler_bins(cfg.K)
    s = math.sqrt(cfg.M)
    g = s * np.vdot(r_doppler(k, kb, cfg.N, cfg.d_t), r_col)
    dg = s * np.vdot(r_doppler_deriv(k, kb, cfg.N, cfg.d_t), r_col)
    return g, dg


def _refine_doppler(r_col: np.ndarray, k_int: int, cfg: OfdmConfig, num_iter: int) -> float:
    """Bisection on the sign of ``d|Phi^H r|^2 / dk`` over ``[k_int - 1/2, k_int + 1/2]``."""
    a, b = k_int - 0.5, k_int + 0.5
    for _ in range(num_iter):
        mid = 0.5 * (a + b)
        g, dg = _column_fit(r_col, mid, cfg)
        if (np.conj(g) * dg).real > 0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def _joint_gains(obs: PeriodicDdObservation, locs) -> np.ndarray:
    phis = np.array([_phi(l, k, obs.cfg).ravel() for l, k in locs])
    gram = phis.conj() @ phis.T
    rhs = phis.conj() @ obs.values.ravel()
    return solve_linear(gram, rhs)


def ml_estimate(
    obs: PeriodicDdObservation,
    P_hat: int,
    init: CsfEstimate | None = None,
    num_iter: int = 15,
    trace: list | None = None,
) -> CsfEstimate:
    """
    Path-wise maximum-likelihood CSF estimate.

    For each path in turn the other paths are subtracted, the delay column
    and integer Doppler bin maximising ``|Phi^H r|^2 / Phi^H Phi`` are
    found, the Doppler is refined by ``num_iter`` bisection steps within
    half a bin, and all gains are re-solved jointly from the normal
    equations. A candidate location only replaces the current one if it
    fits the residual at least as well, so the squared-error objective
    never increases. Paths occupy distinct delay columns.

    Parameters
    ----------
    init : CsfEstimate, optional
        Starting locations (e.g. the peak detector output). Missing paths
        are initialised greedily from the residual.
    trace : list, optional
        If given, the objective after every path update is appended.
    """
    if num_iter < 1:
        raise InvalidArgumentError("num_iter must be >= 1")
    if P_hat < 0:
        raise InvalidArgumentError("P_hat must be non-negative")
    if P_hat > obs.cfg.L:
        raise TooManyPathsError(f"{P_hat} paths exceed the {obs.cfg.L} delay columns")
    cfg = obs.cfg
    K, L = cfg.K, cfg.L
    y = obs.values

    locs = [(p.l % L, float(p.k)) for p in (init.paths[:P_hat] if init else [])]
    gains = np.zeros(0, dtype=complex)
    if locs:
        gains = _joint_gains(obs, locs)
    # greedy start for paths the initialisation did not supply
    while len(locs) < P_hat:
        resid = y - model_observation([(h, l, k) for h, (l, k) in zip(gains, locs)], cfg)
        mag = np.abs(resid)
        mag[:, [l for l, _ in locs]] = -1.0
        i0, l0 = np.unravel_index(np.argmax(mag), mag.shape)
        locs.append((int(l0), float(int(i0) - K // 2)))
        gains = _joint_gains(obs, locs)

    if trace is not None:
        trace.append(ml_objective(obs, _as_estimate(gains, locs)))

    for i in range(P_hat):
        others = [(h, l, k) for j, (h, (l, k)) in enumerate(zip(gains, locs)) if j != i]
        resid = y - model_observation(others, cfg)
        taken = {l for j, (l, _) in enumerate(locs) if j != i}

        mag = np.abs(resid)
        mag[:, sorted(taken)] = -1.0
        i0, l0 = np.unravel_index(np.argmax(mag), mag.shape)
        k_int = int(i0) - K // 2
        k_ref = _refine_doppler(resid[:, l0], k_int, cfg, num_iter)

        best_l, best_k = locs[i]
        best_fit = abs(_column_fit(resid[:, best_l], best_k, cfg)[0])
        for k_c in (float(k_int), k_ref):
            fit = abs(_column_fit(resid[:, l0], k_c, cfg)[0])
            if fit > best_fit:
                best_l, best_k, best_fit = int(l0), k_c, fit
        locs[i] = (best_l, float(wrap_doppler(best_k, K)))
        gains = _joint_gains(obs, locs)
        if trace is not None:
            trace.append(ml_objective(obs, _as_estimate(gains, locs)))

    return _as_estimate(gains, locs)


def _as_estimate(gains, locs) -> CsfEstimate:
    return CsfEstimate([EstimatedPath(complex(h), int(l), float(k)) for h, (l, k) in zip(gains, locs)])


# ---------------------------------------------------------------------------
# CSV fixtures
# ---------------------------------------------------------------------------


def observation_to_csv(obs: PeriodicDdObservation) -> str:
    c = obs.cfg
    sv = None if obs.sigma_v2 is None else float(obs.sigma_v2)
    buf = io.StringIO()
    buf.write(f"# N={c.N} M={c.M} d_t={c.d_t} d_f={c.d_f} sigma_v2={sv!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "l", "re", "im"])
    for i, k in enumerate(obs.k_bins):
        for l in range(c.L):
            v = obs.values[i, l]
            w.writerow([int(k), l, repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()


def observation_from_csv(text: str, cfg: OfdmConfig) -> PeriodicDdObservation:
    lines = text.splitlines()
    sigma = None
    if lines and lines[0].startswith("#"):
        meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
        sigma = None if meta.get("sigma_v2", "None") == "None" else float(meta["sigma_v2"])
        lines = lines[1:]
    values = np.zeros((cfg.K, cfg.L), dtype=complex)
    for row in csv.DictReader(lines):
        values[int(row["k"]) + cfg.K // 2, int(row["l"])] = complex(float(row["re"]), float(row["im"]))
    return PeriodicDdObservation(values, cfg, sigma)


def estimate_to_csv(est: CsfEstimate) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["h_re", "h_im", "l", "k"])
    for p in est.paths:
        w.writerow([repr(float(p.h.real)), repr(float(p.h.imag)), int(p.l), repr(float(p.k))])
    return buf.getvalue()


def estimate_from_csv(text: str) -> CsfEstimate:
    return CsfEstimate(
        [
            EstimatedPath(complex(float(r["h_re"]), float(r["h_im"])), int(r["l"]), float(r["k"]))
            for r in csv.DictReader(io.StringIO(text))
        ]
    )
