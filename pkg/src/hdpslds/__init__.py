"""Trajectory segmentation with a sticky HDP switching linear dynamical system."""

from .config import RunConfig
from .data import count_switches, generate_slds, hamming_error, toy_spec
from .gibbs import ModelState, initialize, log_joint, run_chain, sweep
from .stats import make_rng

__all__ = [
    "ModelState",
    "RunConfig",
    "count_switches",
    "generate_slds",
    "hamming_error",
    "initialize",
    "log_joint",
    "make_rng",
    "run_chain",
    "sweep",
    "toy_spec",
]
