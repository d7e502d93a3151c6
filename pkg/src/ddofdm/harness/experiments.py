"""
Seeded Monte Carlo drivers for the MSE, BER and Doppler-sweep experiments.

Every trial owns three generators derived from ``(seed, trial)``: one for
the channel, one for data and pilots, one for unit-variance noise. A trial
evaluates all SNR (or ``nu_max``) points of the experiment on the same
draws, so curves use common random numbers and a point's result never
depends on which worker ran it or in which order.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..channel import ChannelRealization, OfdmConfig, ici_gain, sample_channel, tf_channel_matrices
from ..crlb import crlb_closed_form
from ..ddest import (
    CsfEstimate,
    PeriodicDdObservation,
    blind_sigma_v2,
    dd_observation,
    estimate_path_count,
    ls_pilot_ctf,
    ml_estimate,
    peak_detect_estimate,
    sigma_v2,
    wrap_doppler,
)
from ..equalize import (
    ChannelStatistics,
    MmseCtfEstimator,
    baseline_linear_interp,
    csf_to_tf_matrices,
    ctf_correlation,
    demap_and_count,
    mmse_equalize,
    single_tap_equalize,
)
from ..errors import DdofdmError, InvalidArgumentError
from ..frame import PilotPattern, TfGrid, apply_channel, build_grid, data_re_count, noise_variance
from ..numerics import gaussian_noise, make_rng
from .config import ExperimentConfig

log = logging.getLogger(__name__)

METRICS = ("mse_k", "mse_habs", "mse_phi", "crlb_k", "crlb_habs", "crlb_phi", "ber")
CSV_HEADER = ("x", "scheme", "metric", "value", "trials", "stderr")

_STREAM_CHANNEL, _STREAM_DATA, _STREAM_NOISE = 0, 1, 2


@dataclass(frozen=True)
class CurvePoint:
    x: float
    scheme: str
    metric: str
    value: float
    trials: int
    stderr: float

    def __post_init__(self):
        if self.metric not in METRICS:
            raise InvalidArgumentError(f"unknown metric {self.metric!r}")
        if not self.value >= 0 or not self.stderr >= 0:
            raise InvalidArgumentError(f"negative or NaN value in {self}")


# ---------------------------------------------------------------------------
# per-trial building blocks
# ---------------------------------------------------------------------------


@dataclass
class _Frame:
    ch: ChannelRealization
    bits: np.ndarray
    tx: object
    clean: np.ndarray
    unit_noise: np.ndarray


def _draw_frame(ec: ExperimentConfig, trial: int, nu_max: float) -> _Frame:
    cfg = ec.cfg
    ch = sample_channel(
        cfg, ec.P, ec.tau_max, nu_max, ec.doppler_mode, make_rng(ec.seed, trial, _STREAM_CHANNEL), ec.gain_model
    )
    rng_data = make_rng(ec.seed, trial, _STREAM_DATA)
    bits = rng_data.integers(0, 2, 2 * data_re_count(cfg), dtype=np.int8)
    tx = build_grid(bits, PilotPattern.from_config(cfg), cfg, rng_data)
    clean = apply_channel(tx.data, ch, cfg)
    unit = gaussian_noise(clean.shape, 1.0, make_rng(ec.seed, trial, _STREAM_NOISE))
    return _Frame(ch, bits, tx, clean, unit)


def _received(frame: _Frame, sigma_w2: float):
    return TfGrid(frame.clean + math.sqrt(sigma_w2) * frame.unit_noise, frame.tx.mask.copy())


def _observation(ec: ExperimentConfig, frame: _Frame, rx, sigma_w2: float) -> PeriodicDdObservation:
    ctf = ls_pilot_ctf(rx, frame.tx, PilotPattern.from_config(ec.cfg))
    if ec.sigma_v_mode == "genie":
        return dd_observation(ctf, ec.cfg, sigma_v2(frame.ch, ec.cfg, sigma_w2))
    obs = dd_observation(ctf, ec.cfg)
    return PeriodicDdObservation(obs.values, ec.cfg, blind_sigma_v2(obs))


def _dd_estimates(ec: ExperimentConfig, obs: PeriodicDdObservation, want: set) -> dict:
    """Peak and ML estimates; a failing estimator maps to ``None``."""
    out = {}
    try:
        P_hat = min(estimate_path_count(obs), ec.cfg.L)
        peak = peak_detect_estimate(obs, P_hat)
    except (DdofdmError, np.linalg.LinAlgError) as exc:
        log.debug("peak detection failed: %s", exc)
        return {name: None for name in want & {"peak", "ml"}}
    if "peak" in want:
        out["peak"] = peak
    if "ml" in want:
        try:
            out["ml"] = ml_estimate(obs, P_hat, init=peak, num_iter=ec.num_iter)
        except (DdofdmError, np.linalg.LinAlgError) as exc:
            log.debug("ML estimation failed: %s", exc)
            out["ml"] = None
    return out


def _first_path_errors(est: CsfEstimate | None, ch: ChannelRealization, cfg: OfdmConfig, k_max: float) -> dict:
    """Squared errors of path 1, matched by delay bin; a miss costs the prior variance."""
    p = ch.paths[0]
    h_eff = p.h * complex(_a00(p.kappa, cfg))
    match = None if est is None else next((q for q in est.paths if q.l % cfg.L == p.l % cfg.L), None)
    if match is None:
        return {"mse_k": k_max**2 / 3.0, "mse_habs": abs(h_eff) ** 2, "mse_phi": math.pi**2 / 3.0}
    dk = float(wrap_doppler(match.k - p.k, cfg.K))
    dphi = math.remainder(np.angle(match.h) - np.angle(h_eff), 2 * math.pi)
    return {"mse_k": dk**2, "mse_habs": (abs(match.h) - abs(h_eff)) ** 2, "mse_phi": dphi**2}


def _a00(kappa: float, cfg: OfdmConfig):
    return ici_gain(kappa, cfg.M, cfg.N)


def _crlb_samples(frame: _Frame, cfg: OfdmConfig, sigma_w2: float) -> dict:
    p = frame.ch.paths[0]
    h_eff = abs(p.h * complex(_a00(p.kappa, cfg)))
    rep = crlb_closed_form(h_eff, cfg, sigma_v2(frame.ch, cfg, sigma_w2))
    return {"crlb_k": rep.crlb_k[0], "crlb_habs": rep.crlb_habs[0], "crlb_phi": rep.crlb_phi[0]}


class _BaselineCache:
    """Per-process MMSE-CTF estimators, one per ``nu_max``."""

    def __init__(self, correlations: dict):
        self.correlations = correlations
        self.estimators: dict = {}

    def get(self, nu: float) -> MmseCtfEstimator:
        if nu not in self.estimators:
            self.estimators[nu] = MmseCtfEstimator(self.correlations[nu])
        return self.estimators[nu]


def _ber_samples(ec: ExperimentConfig, frame: _Frame, sigma_w2: float, nu: float, baselines) -> dict:
    cfg = ec.cfg
    rx = _received(frame, sigma_w2)
    want = set(ec.estimators)
    out = {}
    estimates = {}
    if want & {"peak", "ml"}:
        estimates = _dd_estimates(ec, _observation(ec, frame, rx, sigma_w2), want)
    ctf = ls_pilot_ctf(rx, frame.tx, PilotPattern.from_config(cfg)) if want & {"baseline-li", "baseline-mmse"} else None

    for name in sorted(want):
        try:
            if name == "ideal":
                eq = mmse_equalize(rx, tf_channel_matrices(frame.ch, cfg), sigma_w2, cfg.E_p)
            elif name in ("peak", "ml"):
                if estimates[name] is None:
                    out[name] = None
                    continue
                eq = mmse_equalize(rx, csf_to_tf_matrices(estimates[name], cfg), sigma_w2, cfg.E_p)
            elif name == "baseline-li":
                eq = single_tap_equalize(rx, baseline_linear_interp(ctf, cfg), sigma_w2, cfg.E_p)
            else:
                eq = single_tap_equalize(rx, baselines.get(nu)(ctf, sigma_w2, cfg.E_p), sigma_w2, cfg.E_p)
        except (DdofdmError, np.linalg.LinAlgError) as exc:
            log.debug("%s equalisation failed: %s", name, exc)
            out[name] = None
            continue
        out[name] = demap_and_count(eq, frame.bits).ber
    return out


def _mse_samples(ec: ExperimentConfig, frame: _Frame, sigma_w2: float, nu: float) -> dict:
    """``{(scheme, metric): value}`` for one frame at one noise level."""
    cfg = ec.cfg
    rx = _received(frame, sigma_w2)
    k_max = nu * cfg.N * cfg.T_sym
    out = {}
    for metric, v in _crlb_samples(frame, cfg, sigma_w2).items():
        out[("crlb", metric)] = v
    want = set(ec.estimators) & {"peak", "ml"}
    if want:
        estimates = _dd_estimates(ec, _observation(ec, frame, rx, sigma_w2), want)
        for name, est in estimates.items():
            for metric, v in _first_path_errors(est, frame.ch, cfg, k_max).items():
                out[(name, metric)] = None if est is None else v
    return out


# ---------------------------------------------------------------------------
# trial functions (module level so worker processes can unpickle them)
# ---------------------------------------------------------------------------

_WORKER_STATE: dict = {}


def _init_worker(ec: ExperimentConfig, correlations: dict) -> None:
    _WORKER_STATE["ec"] = ec
    _WORKER_STATE["baselines"] = _BaselineCache(correlations)


def _trial(trial: int) -> dict:
    """All points of one trial: ``{(x, scheme, metric): value or None}``."""
    ec = _WORKER_STATE["ec"]
    baselines = _WORKER_STATE["baselines"]
    out = {}
    if ec.scenario == "doppler_sweep":
        snr = ec.snr_db[0]
        sigma_w2 = noise_variance(snr, ec.cfg.E_p)
        for nu in ec.nu_max:
            frame = _draw_frame(ec, trial, nu)
            samples = dict(_mse_samples(ec, frame, sigma_w2, nu))
            for name, v in _ber_samples(ec, frame, sigma_w2, nu, baselines).items():
                samples[(name, "ber")] = v
            out.update({(float(nu), s, m): v for (s, m), v in samples.items()})
        return out

    nu = ec.nu_max[0]
    frame = _draw_frame(ec, trial, nu)
    for snr in ec.snr_db:
        sigma_w2 = noise_variance(snr, ec.cfg.E_p)
        if ec.scenario == "mse_vs_snr":
            samples = _mse_samples(ec, frame, sigma_w2, nu)
        else:
            samples = {(s, "ber"): v for s, v in _ber_samples(ec, frame, sigma_w2, nu, baselines).items()}
        out.update({(float(snr), s, m): v for (s, m), v in samples.items()})
    return out


def _needs_baseline_stats(ec: ExperimentConfig) -> bool:
    return ec.scenario != "mse_vs_snr" and "baseline-mmse" in ec.estimators


def _correlations(ec: ExperimentConfig) -> dict:
    if not _needs_baseline_stats(ec):
        return {}
    out = {}
    for nu in ec.nu_max:
        stats = ChannelStatistics(
            ec.cfg, ec.P, ec.tau_max, nu, ec.doppler_mode, ec.gain_model, ec.stats_realizations, ec.seed
        )
        out[nu] = ctf_correlation(stats, ec.cache_dir)
    return out


def run_trials(ec: ExperimentConfig) -> list:
    """Run every trial and return the per-trial sample dicts in trial order."""
    correlations = _correlations(ec)
    trials = range(ec.trials)
    if ec.workers == 1:
        _init_worker(ec, correlations)
        return [_trial(t) for t in trials]
    chunk = max(1, ec.trials // (4 * ec.workers))
    with ProcessPoolExecutor(ec.workers, initializer=_init_worker, initargs=(ec, correlations)) as pool:
        return list(pool.map(_trial, trials, chunksize=chunk))


def aggregate(samples: list) -> list:
    """Mean and standard error per ``(x, scheme, metric)``; failed trials (``None``) are excluded."""
    values = defaultdict(list)
    failures = defaultdict(int)
    for trial in samples:
        for key, v in trial.items():
            if v is None:
                failures[key] += 1
            else:
                values[key].append(v)
    for key, n in sorted(failures.items()):
        log.warning("%s: %d failed trial(s) excluded", key, n)
    points = []
    for (x, scheme, metric), vals in values.items():
        a = np.asarray(vals, dtype=float)
        se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
        points.append(CurvePoint(x, scheme, metric, float(a.mean()), int(a.size), se))
    return sort_points(points)


def sort_points(points) -> list:
    return sorted(points, key=lambda p: (p.x, p.scheme, p.metric))


def run_mse_experiment(ec: ExperimentConfig) -> list:
    """MSE of the first path's Doppler, gain magnitude and phase, plus the averaged CRLB."""
    if ec.scenario != "mse_vs_snr":
        raise InvalidArgumentError(f"run_mse_experiment needs scenario mse_vs_snr, got {ec.scenario}")
    return aggregate(run_trials(ec))


def run_ber_experiment(ec: ExperimentConfig) -> list:
    """BER per scheme per SNR; the ideal-channel bound is always included."""
    if ec.scenario != "ber_vs_snr":
        raise InvalidArgumentError(f"run_ber_experiment needs scenario ber_vs_snr, got {ec.scenario}")
    if "ideal" not in ec.estimators:
        ec = ec.replace(estimators=tuple(ec.estimators) + ("ideal",))
    return aggregate(run_trials(ec))


def run_doppler_sweep(ec: ExperimentConfig) -> list:
    """CRLB, MSE and BER against ``nu_max`` at a single SNR."""
    if ec.scenario != "doppler_sweep":
        raise InvalidArgumentError(f"run_doppler_sweep needs scenario doppler_sweep, got {ec.scenario}")
    if len(ec.snr_db) != 1:
        raise InvalidArgumentError("a Doppler sweep runs at exactly one SNR")
    return aggregate(run_trials(ec))


def run_experiment(ec: ExperimentConfig) -> list:
    return {
        "mse_vs_snr": run_mse_experiment,
        "ber_vs_snr": run_ber_experiment,
        "doppler_sweep": run_doppler_sweep,
    }[ec.scenario](ec)


def emit_csv(points, path) -> None:
    """Write ``x,scheme,metric,value,trials,stderr`` rows in sorted order."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for p in sort_points(points):
                w.writerow([repr(float(p.x)), p.scheme, p.metric, repr(float(p.value)), p.trials, repr(float(p.stderr))])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return [
            CurvePoint(float(r["x"]), r["scheme"], r["metric"], float(r["value"]), int(r["trials"]), float(r["stderr"]))
            for r in csv.DictReader(fh)
        ]


def lookup(points, x: float, scheme: str, metric: str) -> CurvePoint:
    for p in points:
        if p.x == x and p.scheme == scheme and p.metric == metric:
            return p
    raise KeyError((x, scheme, metric))
