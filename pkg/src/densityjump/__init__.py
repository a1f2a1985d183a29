"""Jump-size estimation and continuity testing for densities on [0, inf)
with truncated gamma kernels and multiplicative bias correction."""

__version__ = "0.1.0"

from .bandwidth import BandwidthConfig, BandwidthSelection, power_curve, select_bandwidth, split_subsamples
from .errors import DensityJumpError
from .estim import (
    DensityCurve,
    JumpTestResult,
    Sample,
    Variant,
    density_curve,
    fhat_gamma,
    fhat_minus,
    fhat_plus,
    jump_estimate,
    jump_estimate_raw,
    jump_test,
    lambda_factor,
    mbc_estimate,
    variance_estimate,
)
from .kernels import KernelParams, gamma_kernel, trunc_kernel_minus, trunc_kernel_plus
from .simulate import CellResult, Cutoff, SimulationSpec, TargetDist, run_estimation_study, run_size_power_study

__all__ = [
    "BandwidthConfig", "BandwidthSelection", "CellResult", "Cutoff", "DensityCurve",
    "DensityJumpError", "JumpTestResult", "KernelParams", "Sample", "SimulationSpec",
    "TargetDist", "Variant", "density_curve", "fhat_gamma", "fhat_minus", "fhat_plus",
    "gamma_kernel", "jump_estimate", "jump_estimate_raw", "jump_test", "lambda_factor",
    "mbc_estimate", "power_curve", "run_estimation_study", "run_size_power_study",
    "select_bandwidth", "split_subsamples", "trunc_kernel_minus", "trunc_kernel_plus",
    "variance_estimate",
]
