"""
Experiment configuration and its flat ``key = value`` file format.

Example::

    scenario = ber_vs_snr
    M = 64
    N = 64
    nu_max = 937.5
    snr_db = 0, 5, 10, 15, 20, 25, 30, 35, 40
    trials = 200
    estimators = peak, ml, baseline-li, baseline-mmse, ideal

Lists are comma separated, ``#`` starts a comment. Unknown keys are
rejected.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..channel import OfdmConfig, check_doppler_feasible
from ..errors import ConfigError, InvalidArgumentError

SCENARIOS = ("mse_vs_snr", "ber_vs_snr", "doppler_sweep")
ESTIMATORS = ("peak", "ml", "baseline-li", "baseline-mmse", "ideal")
SPEED_OF_LIGHT = 299_792_458.0

_DEFAULT_TRIALS = {"mse_vs_snr": 2000, "ber_vs_snr": 200, "doppler_sweep": 200}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One Monte Carlo experiment.

    ``nu_max`` is a tuple: a single value for the SNR scenarios, the sweep
    values for ``doppler_sweep``. ``trials`` counts channel realisations
    (MSE) or frames (BER) per point.
    """

    scenario: str
    cfg: OfdmConfig = field(default_factory=OfdmConfig)
    P: int = 5
    tau_max: float = 4.17e-6
    nu_max: tuple = (937.5,)
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    trials: int = 0
    seed: int = 0
    estimators: tuple = ESTIMATORS
    doppler_mode: str = "on-grid-doppler"
    gain_model: str = "equal"
    num_iter: int = 15
    sigma_v_mode: str = "genie"
    stats_realizations: int = 10_000
    cache_dir: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {', '.join(SCENARIOS)}, got {self.scenario!r}")
        if self.trials == 0:
            object.__setattr__(self, "trials", _DEFAULT_TRIALS[self.scenario])
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_db:
            raise ConfigError("snr_db must list at least one value")
        if not self.nu_max:
            raise ConfigError("nu_max must list at least one value")
        if self.scenario == "doppler_sweep" and len(self.snr_db) != 1:
            raise ConfigError("doppler_sweep runs at exactly one snr_db value")
        if self.scenario != "doppler_sweep" and len(self.nu_max) != 1:
            raise ConfigError("only doppler_sweep accepts several nu_max values")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad or not self.estimators:
            raise ConfigError(f"unknown estimators {bad}; choose from {', '.join(ESTIMATORS)}")
        if self.doppler_mode not in ("on-grid-doppler", "off-grid-doppler"):
            raise ConfigError(f"doppler_mode must be on-grid-doppler or off-grid-doppler, got {self.doppler_mode!r}")
        if self.gain_model not in ("rayleigh", "equal"):
            raise ConfigError(f"gain_model must be rayleigh or equal, got {self.gain_model!r}")
        if self.sigma_v_mode not in ("genie", "blind"):
            raise ConfigError(f"sigma_v_mode must be genie or blind, got {self.sigma_v_mode!r}")
        if self.num_iter < 1 or self.workers < 1 or self.stats_realizations < 1:
            raise ConfigError("num_iter, workers and stats_realizations must be >= 1")
        if self.P < 1:
            raise ConfigError("P must be >= 1")
        l_max = self.cfg.max_delay_index(self.tau_max)
        if self.tau_max < 0 or l_max > self.cfg.L_cp:
            raise ConfigError(f"tau_max={self.tau_max} s exceeds the cyclic prefix of {self.cfg.L_cp} samples")
        if self.P > l_max + 1:
            raise ConfigError(f"P={self.P} paths do not fit in {l_max + 1} delay bins")
        for nu in self.nu_max:
            try:
                check_doppler_feasible(nu, self.cfg)
            except InvalidArgumentError as exc:
                raise ConfigError(str(exc)) from None

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_OFDM_KEYS = {"M": int, "N": int, "delta_f": float, "L_cp": int, "d_t": int, "d_f": int, "E_p": float}


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


_EXPERIMENT_KEYS = {
    "scenario": str,
    "P": int,
    "tau_max": float,
    "nu_max": _floats,
    "snr_db": _floats,
    "trials": int,
    "seed": int,
    "estimators": _names,
    "doppler_mode": str,
    "gain_model": str,
    "num_iter": int,
    "sigma_v_mode": str,
    "stats_realizations": int,
    "cache_dir": Path,
    "workers": int,
}
# alternative Doppler specification; nu_max wins when both are present
_MOBILITY_KEYS = {"speed": float, "carrier_freq": float}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse the flat ``key = value`` format into an :class:`ExperimentConfig`."""
    ofdm, exp, mobility = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        table = next((t for t in (_OFDM_KEYS, _EXPERIMENT_KEYS, _MOBILITY_KEYS) if key in t), None)
        if table is None:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        target = ofdm if table is _OFDM_KEYS else exp if table is _EXPERIMENT_KEYS else mobility
        if key in target:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            target[key] = table[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None

    if "scenario" not in exp:
        raise ConfigError(f"{source}: missing required key 'scenario'")
    if "nu_max" not in exp and mobility:
        if set(mobility) != set(_MOBILITY_KEYS):
            raise ConfigError(f"{source}: speed and carrier_freq must be given together")
        exp["nu_max"] = (mobility["speed"] * mobility["carrier_freq"] / SPEED_OF_LIGHT,)
    try:
        cfg = OfdmConfig(**ofdm)
    except (InvalidArgumentError, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return ExperimentConfig(cfg=cfg, **exp)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def pilot_overhead(ec: ExperimentConfig) -> dict:
    """
    Pilot cost of the TF-pilot scheme versus an embedded-pilot DD frame.

    ``dd_a_ofdm`` counts the lattice pilots ``NM/(d_t d_f)``; ``otfs_embedded``
    counts guard plus pilot REs ``4 (M/d_f)(N/d_t)`` an embedded-pilot frame
    needs for the same alias-free delay-Doppler region. The ``*_min``
    entries are the path-spread-limited counts ``(2 nu NT + 1)(tau M df + 1)``
    and ``(4 nu NT + 1)(2 tau M df + 1)`` for the largest configured ``nu_max``.
    """
    cfg = ec.cfg
    nu = max(ec.nu_max)
    kspan = nu * cfg.N * cfg.T_sym
    lspan = ec.tau_max * cfg.M * cfg.delta_f
    return {
        "dd_a_ofdm": cfg.M * cfg.N // (cfg.d_t * cfg.d_f),
        "otfs_embedded": 4 * (cfg.M // cfg.d_f) * (cfg.N // cfg.d_t),
        "dd_a_ofdm_min": math.ceil((2 * kspan + 1) * (lspan + 1)),
        "otfs_embedded_min": math.ceil((4 * kspan + 1) * (2 * lspan + 1)),
        "total_re": cfg.M * cfg.N,
    }
