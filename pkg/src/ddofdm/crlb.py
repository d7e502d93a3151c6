"""
Cramer-Rao bounds for the delay-Doppler observation model.

Each path contributes ``s_i[k, l] = |h_i| exp(j phi_i) R_delay(l_i, l) R_Doppler(k_i, k)``
to an observation corrupted by white ``CN(0, sigma_v^2)`` noise. Parameters
are ordered ``(|h|, phi, k, l)`` per path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import OfdmConfig
from .ddest import r_delay, r_delay_deriv, r_doppler, r_doppler_deriv
from .errors import InvalidArgumentError, SingularMatrixError
from .numerics import doppler_bins


@dataclass(frozen=True)
class PathTheta:
    habs: float
    phi: float
    k: float
    l: float


@dataclass
class CrlbReport:
    crlb_habs: np.ndarray
    crlb_phi: np.ndarray
    crlb_k: np.ndarray
    crlb_l: np.ndarray
    sigma_v2: float


def signal_partials(theta: PathTheta, cfg: OfdmConfig) -> np.ndarray:
    """Analytic ``ds/dtheta`` over one DD period, shape ``(4, K, L)``."""
    kb = doppler_bins(cfg.K)[:, None]
    lb = np.arange(cfg.L)[None, :]
    rd = r_delay(theta.l, lb, cfg.M, cfg.d_f)
    rD = r_doppler(theta.k, kb, cfg.N, cfg.d_t)
    drd = r_delay_deriv(theta.l, lb, cfg.M, cfg.d_f)
    drD = r_doppler_deriv(theta.k, kb, cfg.N, cfg.d_t)
    ph = np.exp(1j * theta.phi)
    return np.stack(
        [
            ph * rd * rD,
            1j * theta.habs * ph * rd * rD,
            theta.habs * ph * rd * drD,
            theta.habs * ph * drd * rD,
        ]
    )


def signal(theta: PathTheta, cfg: OfdmConfig) -> np.ndarray:
    kb = doppler_bins(cfg.K)[:, None]
    lb = np.arange(cfg.L)[None, :]
    return theta.habs * np.exp(1j * theta.phi) * r_delay(theta.l, lb, cfg.M, cfg.d_f) * r_doppler(
        theta.k, kb, cfg.N, cfg.d_t
    )


def fisher_matrix(theta, cfg: OfdmConfig, sigma_v2: float) -> np.ndarray:
    """
    Fisher information ``(2/sigma_v^2) Re{sum (ds/dtheta_p)^* (ds/dtheta_q)}``.

    ``theta`` is a :class:`PathTheta` or a sequence of them; the result is
    ``4P x 4P``.
    """
    if sigma_v2 <= 0:
        raise InvalidArgumentError("sigma_v2 must be positive")
    paths = [theta] if isinstance(theta, PathTheta) else list(theta)
    D = np.concatenate([signal_partials(p, cfg).reshape(4, -1) for p in paths])
    return (2.0 / sigma_v2) * (D.conj() @ D.T).real


def crlb_closed_form(h_abs: float, cfg: OfdmConfig, sigma_v2: float) -> CrlbReport:
    """Single-path, on-grid bounds in closed form."""
    N, M, dt, df = cfg.N, cfg.M, cfg.d_t, cfg.d_f
    if N <= dt or M <= df:
        raise InvalidArgumentError("closed-form CRLB needs N > d_t and M > d_f")
    if h_abs <= 0:
        raise InvalidArgumentError("closed-form CRLB needs |h| > 0")
    s = sigma_v2 / (2.0 * h_abs**2)
    return CrlbReport(
        crlb_habs=np.array([sigma_v2 / (2.0 * N * M)]),
        crlb_phi=np.array([s * (7 * N * M + N * df + M * dt - 5 * dt * df) / (M * N * (N + dt) * (M + df))]),
        crlb_k=np.array([s * 3 * N / (np.pi**2 * M * (N**2 - dt**2))]),
        crlb_l=np.array([s * 3 * M / (np.pi**2 * N * (M**2 - df**2))]),
        sigma_v2=float(sigma_v2),
    )


def crlb_numerical(theta, cfg: OfdmConfig, sigma_v2: float) -> CrlbReport:
    """Diagonal of the inverse Fisher matrix, grouped per path."""
    info = fisher_matrix(theta, cfg, sigma_v2)
    cond = np.linalg.cond(info)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularMatrixError(f"Fisher matrix is singular (condition number {cond:.3e})")
    d = np.diag(np.linalg.inv(info)).reshape(-1, 4)
    return CrlbReport(d[:, 0].copy(), d[:, 1].copy(), d[:, 2].copy(), d[:, 3].copy(), float(sigma_v2))
