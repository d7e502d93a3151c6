"""
Delay-Doppler aided OFDM: channel simulation, delay-Doppler channel
estimation from scattered pilots, Cramer-Rao bounds, MMSE equalisation
and classical CTF baselines.
"""

from .channel import ChannelPath, ChannelRealization, OfdmConfig, sample_channel, tf_channel_matrix
from .crlb import CrlbReport, crlb_closed_form, crlb_numerical, fisher_matrix
from .ddest import CsfEstimate, PeriodicDdObservation, dd_observation, ls_pilot_ctf, ml_estimate, peak_detect_estimate
from .equalize import baseline_linear_interp, baseline_mmse_ctf, csf_to_tf_matrix, demap_and_count, mmse_equalize
from .errors import ConfigError, DdofdmError, InvalidArgumentError, SingularMatrixError, TooManyPathsError
from .frame import PilotPattern, TfGrid, build_grid, transmit

__version__ = "0.1.0"
