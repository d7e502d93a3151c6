"""
Linear time-varying multipath channels.

A channel is a short list of paths, each with a complex gain, an on-grid
delay and a (possibly fractional) Doppler shift. Per OFDM symbol ``n`` the
channel acts on the subcarrier vector through

    H^n = sum_i h_i exp(j 2 pi n k_i / N) diag(exp(-j 2 pi m l_i / M)) A_i

where ``A_i`` is the circulant inter-carrier interference matrix of path
``i``. Everything downstream (pilot observation, equalisation) works on this
discrete matrix model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

# relative slack when comparing against closed-form feasibility bounds
_BOUND_RTOL = 1e-9


@dataclass(frozen=True)
class OfdmConfig:
    """Frame numerology and pilot spacing.

    Attributes
    ----------
    M, N : int
        Number of subcarriers and OFDM symbols per frame.
    delta_f : float
        Subcarrier spacing in Hz; the useful symbol time is ``T = 1/delta_f``.
    L_cp : int
        Cyclic prefix length in delay samples.
    d_t, d_f : int
        Pilot spacing in symbols and subcarriers.
    E_p : float
        Energy of every pilot and data symbol.
    """

    M: int = 64
    N: int = 64
    delta_f: float = 15e3
    L_cp: int = 4
    d_t: int = 4
    d_f: int = 4
    E_p: float = 1.0

    def __post_init__(self):
        if self.M < 2 or self.N < 1:
            raise InvalidArgumentError(f"need M >= 2 and N >= 1, got M={self.M}, N={self.N}")
        if self.delta_f <= 0 or self.E_p <= 0:
            raise InvalidArgumentError("delta_f and E_p must be positive")
        if self.L_cp < 0:
            raise InvalidArgumentError("L_cp must be non-negative")
        if self.d_t < 1 or self.d_f < 1 or self.N % self.d_t or self.M % self.d_f:
            raise InvalidArgumentError(
                f"pilot spacing (d_t={self.d_t}, d_f={self.d_f}) must divide (N={self.N}, M={self.M})"
            )

    @property
    def T(self) -> float:
        """Useful OFDM symbol duration in seconds."""
        return 1.0 / self.delta_f

    @property
    def T_sym(self) -> float:
        """Symbol duration including the cyclic prefix."""
        return self.T * (self.M + self.L_cp) / self.M

    @property
    def K(self) -> int:
        """Doppler bins in one period of the pilot DD observation (``N/d_t``)."""
        return self.N // self.d_t

    @property
    def L(self) -> int:
        """Delay bins in one period of the pilot DD observation (``M/d_f``)."""
        return self.M // self.d_f

    @property
    def pilot_count(self) -> int:
        return self.K * self.L

    def max_alias_free_doppler(self) -> float:
        """Largest ``nu_max`` (Hz) whose Doppler support fits one DD period."""
        return 1.0 / (2 * self.d_t * self.T) - 1.0 / (self.N * self.T)

    def max_delay_index(self, tau_max: float) -> int:
        return int(math.floor(tau_max * self.M * self.delta_f * (1 + _BOUND_RTOL)))


@dataclass(frozen=True)
class ChannelPath:
    """One multipath component.

    ``l = tau M delta_f`` is always an integer here (on-grid delay);
    ``k = nu N T_sym`` is the Doppler index on the symbol grid and
    ``kappa = nu N T`` its counterpart on the useful-symbol time scale.
    """

    h: complex
    tau: float
    nu: float
    l: int
    k: float
    kappa: float

    @classmethod
    def from_indices(cls, h: complex, l: int, k: float, cfg: OfdmConfig) -> "ChannelPath":
        nu = k / (cfg.N * cfg.T_sym)
        return cls(
            h=complex(h),
            tau=l / (cfg.M * cfg.delta_f),
            nu=nu,
            l=int(l),
            k=float(k),
            kappa=nu * cfg.N * cfg.T,
        )


@dataclass(frozen=True)
class ChannelRealization:
    paths: tuple = field(default_factory=tuple)

    @property
    def P(self) -> int:
        return len(self.paths)

    @classmethod
    def from_indices(cls, triples, cfg: OfdmConfig) -> "ChannelRealization":
        """Build from ``(h, l, k)`` triples."""
        return cls(tuple(ChannelPath.from_indices(h, l, k, cfg) for h, l, k in triples))


def check_doppler_feasible(nu_max: float, cfg: OfdmConfig) -> None:
    bound = cfg.max_alias_free_doppler()
    if nu_max < 0 or nu_max > bound * (1 + _BOUND_RTOL):
        raise InvalidArgumentError(
            f"nu_max={nu_max} Hz outside the alias-free range [0, 1/(2 d_t T) - 1/(N T)] = [0, {bound:.6g}] Hz"
        )


def sample_channel(
    cfg: OfdmConfig,
    P: int,
    tau_max: float,
    nu_max: float,
    mode: str,
    rng: np.random.Generator,
    gain_model: str = "rayleigh",
) -> ChannelRealization:
    """
    Draw a random channel with ``P`` paths on distinct integer delays.

    Parameters
    ----------
    mode : {"on-grid-doppler", "off-grid-doppler"}
        On-grid mode snaps each Doppler index ``k`` to the nearest integer
        that still satisfies ``|nu| <= nu_max``.
    gain_model : {"rayleigh", "equal"}
        ``rayleigh`` draws gains i.i.d. ``CN(0, 1/P)``; ``equal`` gives every
        path magnitude ``1/sqrt(P)`` with a uniform random phase.

    Notes
    -----
    The random draws happen in a fixed order (gains, delays, Doppler
    fractions) and Doppler shifts are ``u * nu_max`` with ``u ~ U(-1, 1)``,
    so the same ``rng`` state gives matched channels across ``nu_max``.
    """
    if mode not in ("on-grid-doppler", "off-grid-doppler"):
        raise InvalidArgumentError(f"unknown Doppler mode {mode!r}")
    if gain_model not in ("rayleigh", "equal"):
        raise InvalidArgumentError(f"unknown gain model {gain_model!r}")
    if P < 0:
        raise InvalidArgumentError("path count must be non-negative")
    l_max = cfg.max_delay_index(tau_max)
    if tau_max < 0 or l_max > cfg.L_cp:
        raise InvalidArgumentError(
            f"tau_max={tau_max} s spans delay index {l_max} beyond the cyclic prefix L_cp={cfg.L_cp}"
        )
    if P > l_max + 1:
        raise InvalidArgumentError(f"{P} paths do not fit in {l_max + 1} distinct delay bins")
    check_doppler_feasible(nu_max, cfg)

    if gain_model == "rayleigh":
        z = rng.standard_normal((P, 2))
        gains = (z[:, 0] + 1j * z[:, 1]) * np.sqrt(0.5 / P) if P else np.zeros(0, complex)
    else:
        gains = np.exp(2j * np.pi * rng.random(P)) / np.sqrt(P) if P else np.zeros(0, complex)
    delays = rng.permutation(l_max + 1)[:P]
    u = rng.uniform(-1.0, 1.0, P)

    k_max = nu_max * cfg.N * cfg.T_sym
    k = u * k_max
    if mode == "on-grid-doppler":
        k_lim = math.floor(k_max * (1 + _BOUND_RTOL))
        k = np.clip(np.round(k), -k_lim, k_lim)
    return ChannelRealization.from_indices(zip(gains, delays, k), cfg)


def _dirichlet(x: np.ndarray, M: int) -> np.ndarray:
    """``sin(pi x) / (M sin(pi x / M))`` with its limits at ``x = jM``.

    Exactly zero at integers that are not multiples of ``M``.
    """
    x = np.asarray(x, dtype=float)
    den = M * np.sin(np.pi * x / M)
    near = np.abs(den) < 1e-12
    j = np.round(x / M)
    limit = np.cos(np.pi * j * M) / np.cos(np.pi * j)
    safe = np.where(near, 1.0, den)
    out = np.where(near, limit, np.sin(np.pi * x) / safe)
    return np.where((x == np.round(x)) & ~near, 0.0, out)


def ici_matrix(kappa: float, M: int, N: int) -> np.ndarray:
    """
    Circulant ICI matrix of a path with normalised Doppler ``kappa``.

    ``A[p, q] = D(q - p + kappa/N) exp(j pi (q - p + kappa/N)(1 - 1/M))``
    with ``D`` the Dirichlet kernel of length ``M``. Identity for
    ``kappa == 0``.
    """
    if M < 2:
        raise InvalidArgumentError("ici_matrix needs M >= 2")
    p = np.arange(M)
    x = (p[None, :] - p[:, None]) + kappa / N
    return _dirichlet(x, M) * np.exp(1j * np.pi * x * (1 - 1 / M))


def ici_gain(kappa, M: int, N: int):
    """The diagonal entry ``A[0, 0]`` (vectorised over ``kappa``)."""
    x = np.asarray(kappa, dtype=float) / N
    return _dirichlet(x, M) * np.exp(1j * np.pi * x * (1 - 1 / M))


def path_bases(ch: ChannelRealization, cfg: OfdmConfig):
    """
    Per-path symbol-independent matrices and per-symbol phases.

    Returns ``(B, c)`` with ``B[i] = diag(exp(-j 2 pi m l_i / M)) A_i`` of
    shape ``(P, M, M)`` and ``c[i, n] = h_i exp(j 2 pi n k_i / N)`` of shape
    ``(P, N)``, so that ``H^n = sum_i c[i, n] B[i]``.
    """
    M, N = cfg.M, cfg.N
    m = np.arange(M)
    n = np.arange(N)
    B = np.empty((ch.P, M, M), dtype=complex)
    c = np.empty((ch.P, N), dtype=complex)
    for i, path in enumerate(ch.paths):
        B[i] = np.exp(-2j * np.pi * m * path.l / M)[:, None] * ici_matrix(path.kappa, M, N)
        c[i] = path.h * np.exp(2j * np.pi * n * path.k / N)
    return B, c


def tf_channel_matrix(ch: ChannelRealization, n: int, cfg: OfdmConfig) -> np.ndarray:
    """The ``M x M`` subcarrier-domain channel matrix of OFDM symbol ``n``."""
    if not 0 <= n < cfg.N:
        raise InvalidArgumentError(f"symbol index {n} outside [0, {cfg.N})")
    B, c = path_bases(ch, cfg)
    if ch.P == 0:
        return np.zeros((cfg.M, cfg.M), dtype=complex)
    return np.einsum("i,ipq->pq", c[:, n], B)


def tf_channel_matrices(ch: ChannelRealization, cfg: OfdmConfig) -> np.ndarray:
    """All per-symbol channel matrices, shape ``(N, M, M)``."""
    B, c = path_bases(ch, cfg)
    if ch.P == 0:
        return np.zeros((cfg.N, cfg.M, cfg.M), dtype=complex)
    return np.einsum("in,ipq->npq", c, B)


def true_ctf(ch: ChannelRealization, cfg: OfdmConfig) -> np.ndarray:
    """Diagonal of every ``H^n`` as an ``(M, N)`` grid (the per-RE CTF incl. ``A[0,0]``)."""
    m = np.arange(cfg.M)[:, None]
    n = np.arange(cfg.N)[None, :]
    out = np.zeros((cfg.M, cfg.N), dtype=complex)
    for path in ch.paths:
        a00 = ici_gain(path.kappa, cfg.M, cfg.N)
        out += path.h * a00 * np.exp(2j * np.pi * (n * path.k / cfg.N - m * path.l / cfg.M))
    return out


def csf_ground_truth(ch: ChannelRealization, cfg: OfdmConfig) -> list:
    """``(h_tilde, l, k)`` per path, ``h_tilde = h A[0,0]``."""
    return [(p.h * complex(ici_gain(p.kappa, cfg.M, cfg.N)), p.l, p.k) for p in ch.paths]


def channel_to_text(ch: ChannelRealization) -> str:
    """One path per line: ``re(h) im(h) l k``."""
    return "".join(f"{float(p.h.real)!r} {float(p.h.imag)!r} {int(p.l):d} {float(p.k)!r}\n" for p in ch.paths)


def channel_from_text(text: str, cfg: OfdmConfig) -> ChannelRealization:
    triples = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 4:
            raise InvalidArgumentError(f"line {lineno}: expected 're im l k', got {line!r}")
        re, im, l, k = parts
        triples.append((complex(float(re), float(im)), int(l), float(k)))
    return ChannelRealization.from_indices(triples, cfg)
