"""Lagrangian particle simulator and verification suite for the generalized
(alpha) surface quasi-geostrophic equation, 0 < alpha < 1."""

__version__ = "0.1.0"

from .kernels import (
    KernelParams,
    eval_K,
    eval_K_reg,
    eval_image_kernel,
    eval_mollifier,
)
from .fields import (
    BubbleSpec,
    HolderEstimate,
    InitialData,
    RadialBump,
    ScalarField,
    eval_field,
    holder_seminorm_estimate,
    linf_norm,
    lp_norm,
    make_bump,
    make_initial_data,
    mollify,
    riesz_distance,
)
from .particles import (
    ParticleEnsemble,
    discretize,
    log_lipschitz_modulus,
    velocity_at,
    velocity_batch,
)
from .flow import (
    FlowState,
    Tracer,
    reverse_check,
    run,
    step_rk4,
    twin_run_distance,
)
from .analysis import (
    RunRecord,
    ScheduleParams,
    inflation_report,
    quadrant_integral,
    ratio_series,
    tn_schedule,
    velocity_residual,
    witness_quotient,
)
from .cli import ExperimentConfig, load_config, run_command, write_series

__all__ = [
    "KernelParams",
    "eval_K",
    "eval_K_reg",
    "eval_image_kernel",
    "eval_mollifier",
    "RadialBump",
    "BubbleSpec",
    "InitialData",
    "ScalarField",
    "HolderEstimate",
    "make_bump",
    "make_initial_data",
    "eval_field",
    "holder_seminorm_estimate",
    "linf_norm",
    "lp_norm",
    "riesz_distance",
    "mollify",
    "ParticleEnsemble",
    "discretize",
    "velocity_at",
    "velocity_batch",
    "log_lipschitz_modulus",
    "FlowState",
    "Tracer",
    "step_rk4",
    "run",
    "reverse_check",
    "twin_run_distance",
    "RunRecord",
    "ScheduleParams",
    "quadrant_integral",
    "velocity_residual",
    "ratio_series",
    "tn_schedule",
    "witness_quotient",
    "inflation_report",
    "ExperimentConfig",
    "load_config",
    "run_command",
    "write_series",
]
