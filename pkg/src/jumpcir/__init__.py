"""Positivity-preserving jump-adapted simulation of delay CIR/CEV models
with compensated-Poisson jumps, plus a Monte Carlo verification harness."""

__version__ = "0.1.0"

from .model import (DelayCoefficient, JumpCoefficient, ModelSpec, SchemeConfig,
                    eval_delay_coeff, eval_jump_coeff, load_model_file,
                    validate_assumption_b, validate_jump_step)
from .noise import (JumpAdaptedGrid, NoiseBundle, build_grid,
                    derive_path_stream, make_noise_bundle, sample_jump_times,
                    wiener_increments_for_grid)
from .scheme import (PositivityError, StepInputs, Trajectory, delay_lookup,
                     euler_maruyama_path, semi_discrete_diffusion_step, semi_discrete_inner,
                     compensated_jump_update, simulate_path, trajectory_to_csv)
from .analysis import (ConvergenceReport, MeanReversionReport, fit_rate,
                       mean_reversion_study, moment_study, ode_mean,
                       positivity_audit, strong_error_study)

__all__ = [
    "DelayCoefficient", "JumpCoefficient", "ModelSpec", "SchemeConfig",
    "eval_delay_coeff", "eval_jump_coeff", "load_model_file",
    "validate_assumption_b", "validate_jump_step",
    "JumpAdaptedGrid", "NoiseBundle", "build_grid", "derive_path_stream",
    "make_noise_bundle", "sample_jump_times", "wiener_increments_for_grid",
    "PositivityError", "StepInputs", "Trajectory", "delay_lookup",
    "euler_maruyama_path", "semi_discrete_diffusion_step", "semi_discrete_inner",
    "compensated_jump_update", "simulate_path", "trajectory_to_csv",
    "ConvergenceReport", "MeanReversionReport", "fit_rate",
    "mean_reversion_study", "moment_study", "ode_mean", "positivity_audit",
    "strong_error_study",
]
