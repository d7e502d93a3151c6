"""
Command-line entry point.

    ddofdm run --config exp.cfg --out curves.csv [--seed S] [--workers W] [--trials T]
    ddofdm crlb --config exp.cfg
    ddofdm report-overhead --config exp.cfg

Exit status is 0 on success, 2 for configuration errors and 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from ..channel import ici_gain, sample_channel
from ..crlb import crlb_closed_form
from ..ddest import sigma_v2
from ..errors import ConfigError, SingularMatrixError
from ..frame import noise_variance
from ..numerics import make_rng
from .config import load_config, pilot_overhead
from .experiments import emit_csv, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("ddofdm")


def _cmd_run(args) -> int:
    ec = load_config(args.config)
    changes = {k: getattr(args, k) for k in ("seed", "workers", "trials") if getattr(args, k) is not None}
    if changes:
        ec = ec.replace(**changes)
    points = run_experiment(ec)
    emit_csv(points, args.out)
    log.info("wrote %d rows to %s", len(points), args.out)
    return EXIT_OK


def _cmd_crlb(args) -> int:
    """Closed-form bounds for path 1, averaged over ``trials`` channel draws."""
    ec = load_config(args.config)
    cfg = ec.cfg
    print("nu_max,snr_db,sigma_v2,crlb_habs,crlb_phi,crlb_k,crlb_l")
    for nu in ec.nu_max:
        channels = [
            sample_channel(cfg, ec.P, ec.tau_max, nu, ec.doppler_mode, make_rng(ec.seed, t, 0), ec.gain_model)
            for t in range(ec.trials)
        ]
        for snr in ec.snr_db:
            sw2 = noise_variance(snr, cfg.E_p)
            rows = []
            for ch in channels:
                p = ch.paths[0]
                s2 = sigma_v2(ch, cfg, sw2)
                r = crlb_closed_form(abs(p.h * complex(ici_gain(p.kappa, cfg.M, cfg.N))), cfg, s2)
                rows.append([s2, r.crlb_habs[0], r.crlb_phi[0], r.crlb_k[0], r.crlb_l[0]])
            m = np.mean(rows, axis=0)
            print(f"{nu:.12g},{snr:.12g}," + ",".join(f"{v:.6e}" for v in m))
    return EXIT_OK


def _cmd_overhead(args) -> int:
    ec = load_config(args.config)
    o = pilot_overhead(ec)
    cfg = ec.cfg
    print(f"frame: M={cfg.M} subcarriers x N={cfg.N} symbols = {o['total_re']} REs")
    print(f"DD-a-OFDM lattice pilots  NM/(d_t d_f)         = {o['dd_a_ofdm']} ({o['dd_a_ofdm'] / o['total_re']:.2%})")
    print(f"OTFS embedded pilot+guard 4(M/d_f)(N/d_t)      = {o['otfs_embedded']} ({o['otfs_embedded'] / o['total_re']:.2%})")
    print(f"spread-limited minimum at nu_max={max(ec.nu_max):g} Hz: DD-a-OFDM {o['dd_a_ofdm_min']}, OTFS {o['otfs_embedded_min']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddofdm", description="Delay-Doppler aided OFDM experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the configured experiment and write CSV curves")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--trials", type=int)
    run.set_defaults(func=_cmd_run)

    crlb = sub.add_parser("crlb", help="print averaged closed-form CRLBs")
    crlb.add_argument("--config", required=True)
    crlb.set_defaults(func=_cmd_crlb)

    over = sub.add_parser("report-overhead", help="compare pilot overhead with an embedded-pilot DD frame")
    over.add_argument("--config", required=True)
    over.set_defaults(func=_cmd_overhead)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularMatrixError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
