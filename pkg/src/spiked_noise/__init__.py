"""Noise and spiked covariance estimation in high dimensions."""

from __future__ import annotations

__version__ = "0.1.0"

from .asymptotics import RegimeParams, clt_constants, eigenvalue_limit, mp_inverse_moment, stieltjes_limits
from .benchmarks import BenchmarkEstimate, ledoit_wolf, stein_isotonized
from .errors import SpikedNoiseError
from .harness import ExperimentConfig, RiskReport, emit, run_risk_experiment, verify_stein_haff, verify_ure
from .model import ARModel, SampleSpec, SpikedModel, materialize, sample_covariance
from .noise import NoiseSolution, minimize_noise
from .spectra import SpectralData, decompose
from .spiked import SpikedEstimate, assemble, donoho_gavish_gamma, estimate_gammas, select_rank
from .ure import EstimatorProfile, UreValue, evaluate_F, evaluate_G, evaluate_ure, frobenius_loss, haff_loss

__all__ = [
    "__version__",
    "ARModel",
    "BenchmarkEstimate",
    "EstimatorProfile",
    "ExperimentConfig",
    "NoiseSolution",
    "RegimeParams",
    "RiskReport",
    "SampleSpec",
    "SpectralData",
    "SpikedEstimate",
    "SpikedModel",
    "SpikedNoiseError",
    "UreValue",
    "assemble",
    "clt_constants",
    "decompose",
    "donoho_gavish_gamma",
    "eigenvalue_limit",
    "emit",
    "estimate_gammas",
    "evaluate_F",
    "evaluate_G",
    "evaluate_ure",
    "frobenius_loss",
    "haff_loss",
    "ledoit_wolf",
    "materialize",
    "minimize_noise",
    "mp_inverse_moment",
    "run_risk_experiment",
    "sample_covariance",
    "select_rank",
    "stein_isotonized",
    "stieltjes_limits",
    "verify_stein_haff",
    "verify_ure",
]
