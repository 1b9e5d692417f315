"""Exception types shared across the sampler."""

import numpy as np


class ParameterError(ValueError):
    """A distribution parameter lies outside its domain."""


class ValidationError(ValueError):
    """Malformed input: wrong shape, out-of-range label, non-finite data."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization failed for a matrix that must be SPD."""

    def __init__(self, name, detail=""):
        self.name = name
        msg = f"matrix '{name}' is not symmetric positive definite"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SamplerError(RuntimeError):
    """A Gibbs step failed numerically.

    Carries the step name and (when known) the sweep index so callers can
    report where the chain died.
    """

    def __init__(self, step, cause, sweep=None):
        self.step = step
        self.sweep = sweep
        self.cause = cause
        where = f"step '{step}'" if sweep is None else f"sweep {sweep}, step '{step}'"
        super().__init__(f"{where}: {cause}")
