"""Monte Carlo studies: coupled-reference strong error, convergence-rate
regression, mean reversion, moments and positivity auditing.

All studies are embarrassingly parallel over paths; results are stored by
path index, so they are independent of worker scheduling.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, SchemeConfig, delta_substeps
from .noise import (JumpAdaptedGrid, build_grid, derive_path_stream,
                    make_noise_bundle, sample_jump_times,
                    wiener_increments_for_grid)
from .scheme import PositivityError, euler_maruyama_path, simulate_path

__all__ = [
    "ConvergenceReport",
    "MeanReversionReport",
    "RateFit",
    "strong_error_study",
    "fit_rate",
    "mean_reversion_study",
    "moment_study",
    "positivity_audit",
    "ode_mean",
    "convergence_report_to_csv",
    "convergence_points_to_csv",
    "mean_reversion_report_to_csv",
]


def ode_mean(model: ModelSpec, t) -> np.ndarray:
    """Closed-form mean k1/k2 + (xi0 - k1/k2) * exp(-k2 t); the compensated
    jump term is a martingale and does not contribute."""
    xi0 = model.eval_initial_segment(0.0)
    level = model.k1 / model.k2
    return level + (xi0 - level) * np.exp(-model.k2 * np.asarray(t, dtype=float))


def theoretical_slope_lower_bound(model: ModelSpec) -> float:
    """Half the mean-square rate exponent: ((alpha-1/2) ^ gamma)/2 for
    alpha > 1/2 and ((1/2) ^ gamma)/2 at alpha = 1/2."""
    gamma = model.holder_gamma
    if model.alpha > 0.5:
        return min(model.alpha - 0.5, gamma) / 2.0
    return min(0.5, gamma) / 2.0


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residual: float


def fit_rate(deltas, errors) -> RateFit:
    """Ordinary least squares of log2(error) against log2(delta).

    Zero (or negative) errors are excluded with a warning; at least two
    usable points are required."""
    deltas = np.asarray(deltas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    usable = errors > 0
    if not np.all(usable):
        warnings.warn("excluding non-positive errors from the rate fit")
    x = np.log2(deltas[usable])
    y = np.log2(errors[usable])
    if x.size < 2:
        raise ValueError("rate fit needs at least two points with positive error")
    (slope, intercept), res = np.polyfit(x, y, 1), 0.0
    res = float(np.sum((y - (slope * x + intercept)) ** 2))
    return RateFit(slope=float(slope), intercept=float(intercept), residual=res)


@dataclass(frozen=True)
class ConvergenceReport:
    deltas: np.ndarray                 # strictly decreasing step sizes
    errors: np.ndarray                 # estimated endpoint L2 error per delta
    per_batch_errors: np.ndarray       # (n_deltas, M) batch mean squared errors
    error_stderr: np.ndarray           # normal-approximation stderr of errors
    per_rung_rates: np.ndarray         # log2(err_k / err_{k+1}); length n-1
    fitted_slope: float
    fit_intercept: float
    theoretical_slope_lower_bound: float
    included: np.ndarray               # bool mask of rungs used in the fit
    floor_estimate: float              # error at delta = 2 * ref_delta, or nan
    batches_M: int
    paths_per_batch_L: int
    ref_delta: float
    master_seed: int

    def __post_init__(self):
        ms = np.mean(self.per_batch_errors, axis=1)
        if not np.allclose(self.errors ** 2, ms, rtol=1e-12, atol=0):
            raise ValueError("estimator identity violated: errors**2 != mean batch MSE")


def _run_paths(worker, n_paths: int, threads) -> None:
    """Run worker(path_index) for all paths, optionally on a thread pool."""
    if threads is None or threads <= 1:
        for p in range(n_paths):
            worker(p)
        return
    chunk = max(1, n_paths // (threads * 8))
    starts = range(0, n_paths, chunk)

    def run_chunk(s):
        for p in range(s, min(s + chunk, n_paths)):
            worker(p)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(run_chunk, starts))


def _deterministic_node_indices(grid: JumpAdaptedGrid) -> np.ndarray:
    """Indices (into positive nodes) of the multiples of delta on [0, T]."""
    nodes = grid.positive_nodes
    n_det = grid.substeps * round(grid.horizon / grid.tau)
    targets = np.arange(n_det + 1) * grid.max_step
    idx = np.searchsorted(nodes, targets)
    idx = np.clip(idx, 0, nodes.size - 1)
    tol = 1e-12 * max(1.0, grid.horizon)
    left = np.maximum(idx - 1, 0)
    idx = np.where(np.abs(nodes[idx] - targets) <= tol, idx,
                   np.where(np.abs(nodes[left] - targets) <= tol, left, idx))
    if np.any(np.abs(nodes[idx] - targets) > tol):
        raise ValueError("deterministic node missing from grid")
    return idx


def strong_error_study(model: ModelSpec, config_base: SchemeConfig, deltas,
                       M: int, L: int, ref_delta: float, master_seed: int,
                       threads=None, sup_error: bool = False,
                       compute_floor: bool = True,
                       floor_multiplier: float = 10.0) -> ConvergenceReport:
    """Coupled-reference Monte Carlo estimate of the strong error.

    Each of the M*L paths draws one jump-time list and one fine Wiener path,
    shared by every step size and by the reference run.  The estimator is
    the endpoint L2 norm sqrt(mean |y_delta(T) - y_ref(T)|^2) (sup over
    common deterministic nodes instead when sup_error is set).  Rungs whose
    error is below floor_multiplier times the reference-floor estimate
    (the error at delta = 2*ref_delta) are excluded from the rate fit.
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size == 0 or M < 1 or L < 1:
        raise ValueError("need at least one delta and one path")
    if deltas.size > 1 and not np.all(np.diff(deltas) < 0):
        raise ValueError("deltas must be strictly decreasing")
    l_ref = delta_substeps(model, dataclasses.replace(config_base, delta=ref_delta))
    if l_ref & (l_ref - 1):
        raise ValueError("reference delta must be tau * 2**-e")
    ls = []
    for d in deltas:
        l = delta_substeps(model, dataclasses.replace(config_base, delta=d))
        if l_ref % l != 0:
            raise ValueError(f"ref_delta must refine delta={d}")
        ls.append(l)
    fine_exponent = int(round(math.log2(l_ref)))

    run_ls = list(ls)
    floor_l = None
    if compute_floor and l_ref // 2 >= 2 and (l_ref // 2) not in ls:
        floor_l = l_ref // 2
        run_ls.append(floor_l)

    n_paths = M * L
    sqerr = np.empty((len(run_ls), n_paths))
    configs = [dataclasses.replace(config_base, delta=model.tau / l) for l in run_ls]
    config_ref = dataclasses.replace(config_base, delta=ref_delta)

    def worker(p):
        bundle = make_noise_bundle(model, master_seed, p, fine_exponent)
        ref_traj = simulate_path(model, config_ref, bundle.grid, bundle.wiener_fine)
        z_ref = bundle.grid.zero_index
        for i, l in enumerate(run_ls):
            grid = build_grid(model.tau, model.horizon, l, bundle.jump_times)
            inc = wiener_increments_for_grid(bundle, grid)
            traj = simulate_path(model, configs[i], grid, inc)
            if sup_error:
                idx_c = _deterministic_node_indices(grid)
                # locate the coarse deterministic nodes in the fine grid
                fine_idx = np.searchsorted(bundle.grid.positive_nodes,
                                           grid.positive_nodes[idx_c])
                fine_idx = np.clip(fine_idx, 0, bundle.grid.positive_nodes.size - 1)
                diff = traj.post[grid.zero_index + idx_c] \
                    - ref_traj.post[z_ref + fine_idx]
                sqerr[i, p] = float(np.max(np.abs(diff))) ** 2
            else:
                sqerr[i, p] = (traj.terminal - ref_traj.terminal) ** 2

    _run_paths(worker, n_paths, threads)

    batch_ms = sqerr.reshape(len(run_ls), M, L).mean(axis=2)
    eps = np.sqrt(sqerr.mean(axis=1))
    # stderr of the mean-square, propagated through the square root
    ms_se = batch_ms.std(axis=1, ddof=1) / math.sqrt(M) if M > 1 else np.zeros(len(run_ls))
    with np.errstate(divide="ignore", invalid="ignore"):
        eps_se = np.where(eps > 0, ms_se / (2 * np.maximum(eps, 1e-300)), 0.0)

    if floor_l is not None:
        floor = float(eps[-1])
        eps_main = eps[: len(ls)]
        batch_main = batch_ms[: len(ls)]
        se_main = eps_se[: len(ls)]
    else:
        floor = float("nan")
        eps_main, batch_main, se_main = eps, batch_ms, eps_se

    included = np.ones(len(ls), dtype=bool)
    if floor_l is not None:
        included = eps_main >= floor_multiplier * floor
        if (included & (eps_main > 0)).sum() < 2:
            # floor exclusion left too few rungs; fall back to all of them
            warnings.warn("reference-floor exclusion left fewer than two rungs; "
                          "fitting over all rungs instead")
            included = np.ones(len(ls), dtype=bool)
    fitted_slope = float("nan")
    intercept = float("nan")
    pos = included & (eps_main > 0)
    if pos.sum() >= 2:
        fit = fit_rate(deltas[pos], eps_main[pos])
        fitted_slope, intercept = fit.slope, fit.intercept
    elif deltas.size >= 2:
        warnings.warn("too few rungs with positive error for a rate fit")

    with np.errstate(divide="ignore", invalid="ignore"):
        rates = np.log2(eps_main[:-1] / eps_main[1:]) / np.log2(deltas[:-1] / deltas[1:])

    return ConvergenceReport(
        deltas=deltas,
        errors=eps_main,
        per_batch_errors=batch_main,
        error_stderr=se_main,
        per_rung_rates=rates,
        fitted_slope=fitted_slope,
        fit_intercept=intercept,
        theoretical_slope_lower_bound=theoretical_slope_lower_bound(model),
        included=included,
        floor_estimate=floor,
        batches_M=M,
        paths_per_batch_L=L,
        ref_delta=ref_delta,
        master_seed=master_seed,
    )


@dataclass(frozen=True)
class MeanReversionReport:
    times: np.ndarray
    estimated_means: np.ndarray
    closed_form_means: np.ndarray
    standard_errors: np.ndarray
    theta_bound: float
    paths: int


def mean_reversion_study(model: ModelSpec, config: SchemeConfig, T_long: float,
                         paths: int, master_seed: int,
                         threads=None) -> MeanReversionReport:
    """Monte Carlo mean at every deterministic node against the closed-form
    mean curve; the terminal mean is comparable to the k1/(k2*theta) bound."""
    model = dataclasses.replace(model, horizon=T_long)
    l = delta_substeps(model, config)
    if config.delta * (1.0 - config.theta) >= 1.0 / model.k2:
        warnings.warn("delta*(1-theta) >= 1/k2: scheme mean-reversion bound not guaranteed")
    n_det = l * round(T_long / model.tau)
    times = np.arange(n_det + 1) * config.delta
    sums = np.zeros(n_det + 1)
    sumsq = np.zeros(n_det + 1)

    def worker(p):
        grid, dW = _draw_noise(model, master_seed, p, l)
        traj = simulate_path(model, config, grid, dW)
        vals = traj.post[grid.zero_index + _deterministic_node_indices(grid)]
        sums[:] += vals
        sumsq[:] += vals * vals

    # shared accumulators: run sequentially regardless of the threads hint
    for p in range(paths):
        worker(p)

    mean = sums / paths
    var = np.maximum(sumsq / paths - mean ** 2, 0.0)
    se = np.sqrt(var / paths) if paths > 1 else np.zeros_like(mean)
    theta_bound = math.inf if config.theta == 0 else model.k1 / (model.k2 * config.theta)
    return MeanReversionReport(
        times=times,
        estimated_means=mean,
        closed_form_means=ode_mean(model, times),
        standard_errors=se,
        theta_bound=theta_bound,
        paths=paths,
    )


def _draw_noise(model: ModelSpec, master_seed: int, path_index: int, l: int):
    """Single-resolution noise for audits (no coupling needed)."""
    rng_p = derive_path_stream(master_seed, path_index, "poisson")
    jumps = sample_jump_times(model.lam, model.horizon, rng_p)
    grid = build_grid(model.tau, model.horizon, l, jumps)
    dts = np.diff(grid.positive_nodes)
    rng_w = derive_path_stream(master_seed, path_index, "wiener")
    dW = rng_w.standard_normal(dts.size) * np.sqrt(dts)
    return grid, dW


def moment_study(model: ModelSpec, config: SchemeConfig, p_list, paths: int,
                 master_seed: int) -> dict:
    """Estimate sup over deterministic nodes of E[y_t**p] for each p.

    Only finiteness and stability are meaningful; the theoretical constants
    are not computable."""
    p_list = [float(p) for p in p_list]
    if any(p <= 0 for p in p_list):
        raise ValueError("moment orders must be positive")
    l = delta_substeps(model, config)
    n_det = l * round(model.horizon / model.tau)
    times = np.arange(n_det + 1) * config.delta
    sums = np.zeros((len(p_list), n_det + 1))
    sumsq = np.zeros((len(p_list), n_det + 1))

    for p_idx in range(paths):
        grid, dW = _draw_noise(model, master_seed, p_idx, l)
        traj = simulate_path(model, config, grid, dW)
        vals = traj.post[grid.zero_index + _deterministic_node_indices(grid)]
        for i, p in enumerate(p_list):
            vp = vals ** p
            sums[i] += vp
            sumsq[i] += vp * vp

    results = {}
    for i, p in enumerate(p_list):
        mean = sums[i] / paths
        var = np.maximum(sumsq[i] / paths - mean ** 2, 0.0)
        se = np.sqrt(var / paths) if paths > 1 else np.zeros_like(mean)
        k = int(np.argmax(mean))
        results[p] = {
            "sup_moment": float(mean[k]),
            "time_at_sup": float(times[k]),
            "stderr_at_sup": float(se[k]),
            "moments": mean,
            "stderrs": se,
            "times": times,
        }
    return results


def positivity_audit(model: ModelSpec, config: SchemeConfig, paths: int,
                     master_seed: int, scheme: str = "semi-discrete") -> dict:
    """Scan trajectories for sign violations and square-root clamps."""
    l = delta_substeps(model, config)
    min_value = math.inf
    negative_count = 0
    clamp_total = 0
    violations = 0
    for p in range(paths):
        grid, dW = _draw_noise(model, master_seed, p, l)
        if scheme == "semi-discrete":
            try:
                traj = simulate_path(model, config, grid, dW)
            except PositivityError:
                violations += 1
                negative_count += 1
                continue
            clamp_total += traj.clamp_count
        elif scheme == "euler-maruyama":
            traj = euler_maruyama_path(model, grid, dW)
            negative_count += traj.negative_count
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        body = traj.post[grid.zero_index:]
        min_value = min(min_value, float(body.min()))
        negative_count += int(np.sum(body <= 0)) if scheme == "semi-discrete" else 0
    return {
        "min_value": min_value,
        "negative_count": negative_count,
        "clamp_total": clamp_total,
        "violations": violations,
        "paths": paths,
    }


# ---------------------------------------------------------------------------
# CSV output

def convergence_report_to_csv(report: ConvergenceReport, path, tau: float = 1.0) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("delta_exponent,epsilon_hat,epsilon_hat_stderr,n_batches,n_paths\n")
        for d, e, se in zip(report.deltas, report.errors, report.error_stderr):
            exp = -math.log2(d / tau)
            fh.write(f"{exp:.17g},{e:.17g},{se:.17g},{report.batches_M},"
                     f"{report.batches_M * report.paths_per_batch_L}\n")


def convergence_points_to_csv(report: ConvergenceReport, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("log2_delta,log2_error\n")
        for d, e in zip(report.deltas, report.errors):
            if e > 0:
                fh.write(f"{math.log2(d):.17g},{math.log2(e):.17g}\n")


def mean_reversion_report_to_csv(report: MeanReversionReport, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("t,mc_mean,stderr,closed_form\n")
        for t, m, s, c in zip(report.times, report.estimated_means,
                              report.standard_errors, report.closed_form_means):
            fh.write(f"{t:.17g},{m:.17g},{s:.17g},{c:.17g}\n")
