"""Ultrametric Brownian sheets over the p-adic integers.

Exact p-adic arithmetic, Haar sampling on balls, the weight-tree
construction of Brownian motion indexed by Z_p^N, Riesz energies and
capacities, local time at 0, and random Mahler / van der Put series, with
statistical checks for each closed-form law.
"""
from .brownian import BrownianConfig, evaluate, evaluate_many, grid, hitting_prob_exact
from .gaussian import GaussianSpec, RngKey, sample, sample_batch
from .kernels import BACKEND
from .localtime import candidates, local_time_field, solve_survival
from .padic import BallAddress, PadicScalar, PadicVector, PrecisionError
from .potential import AtomicMeasure, KernelParams, capacity, energy, equilibrium, riesz_kernel
from .series import SeriesSpec, series_eval, series_sample
from .stats import TestReport

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AtomicMeasure", "BallAddress", "BrownianConfig", "GaussianSpec", "KernelParams",
    "PadicScalar", "PadicVector", "PrecisionError", "RngKey", "SeriesSpec", "TestReport",
    "candidates", "capacity", "energy", "equilibrium", "evaluate", "evaluate_many", "grid",
    "hitting_prob_exact", "local_time_field", "riesz_kernel", "sample", "sample_batch",
    "series_eval", "series_sample", "solve_survival",
]
