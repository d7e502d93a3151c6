"""Exception types raised by the simulator."""

import numpy as np


class DdofdmError(Exception):
    """Base class for all simulator errors."""


class InvalidArgumentError(DdofdmError, ValueError):
    """An argument violates an operation's precondition."""


class SingularMatrixError(DdofdmError, np.linalg.LinAlgError):
    """A linear system is singular to working precision."""


class TooManyPathsError(DdofdmError, ValueError):
    """More paths were requested than the observation can support."""


class ConfigError(DdofdmError, ValueError):
    """An experiment configuration file is malformed or inconsistent."""
