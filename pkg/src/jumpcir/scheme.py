"""Steppers: the jump-adapted square-root-transform scheme and an explicit
Euler-Maruyama baseline.

Each diffusion step advances the value between adjacent grid nodes through
a squared-Gaussian update (nonnegative by construction), then applies the
compensated jump map y + g(y) * (dN - lam * dt) at the right node.  The
compensator acts at every node, so pre- and post-jump values differ even
where no jump fires; both are stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, SchemeConfig, delta_substeps
from .noise import JumpAdaptedGrid

__all__ = [
    "Trajectory",
    "StepInputs",
    "PositivityError",
    "semi_discrete_inner",
    "semi_discrete_diffusion_step",
    "compensated_jump_update",
    "delay_lookup",
    "simulate_path",
    "euler_maruyama_path",
    "trajectory_to_csv",
]


class PositivityError(RuntimeError):
    """The compensated jump update produced a nonpositive value, which means
    the configuration is outside the guaranteed step-size regime."""

    def __init__(self, y_minus, dt, jump_flag):
        self.y_minus = y_minus
        self.dt = dt
        self.jump_flag = jump_flag
        super().__init__(
            f"jump update left the positive half-line: y_minus={y_minus}, "
            f"dt={dt}, jump_flag={jump_flag}"
        )


@dataclass(frozen=True)
class Trajectory:
    """Scheme values at the grid nodes.

    pre and post are aligned with grid.nodes; on [-tau, 0] both hold the
    initial segment.  pre is the left limit before the jump map at each
    positive node, post the value after it.  negative_count is nonzero only
    for the Euler-Maruyama baseline.
    """

    grid: JumpAdaptedGrid
    pre: np.ndarray
    post: np.ndarray
    clamp_count: int
    negative_count: int = 0

    @property
    def terminal(self) -> float:
        return float(self.post[-1])

    @property
    def min_value(self) -> float:
        return float(self.post[self.grid.zero_index:].min())


@dataclass(frozen=True)
class StepInputs:
    """Inputs of one diffusion step over an interval of length dt."""

    y_current: float
    y_delayed: float
    dt: float
    dW: float
    jump_flag: bool = False

    def __post_init__(self):
        if self.y_current < 0 or self.y_delayed < 0:
            raise ValueError("state and delay values must be nonnegative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def _state_power(y: float, exponent: float) -> float:
    # 0**0 == 1 keeps the alpha = 1/2 branch continuous in y
    if y == 0.0 and exponent == 0.0:
        return 1.0
    return y ** exponent


def semi_discrete_inner(y: float, y_del: float, dt: float, model: ModelSpec,
                        config: SchemeConfig) -> float:
    """Under-root quantity of the diffusion step, clamped below at zero.

    Under the step-size conditions the raw value is nonnegative and the
    clamp never fires; use :func:`semi_discrete_inner_raw` to observe clamping.
    """
    return max(semi_discrete_inner_raw(y, y_del, dt, model, config), 0.0)


def semi_discrete_inner_raw(y: float, y_del: float, dt: float, model: ModelSpec,
                            config: SchemeConfig) -> float:
    k1, k2, k3 = model.k1, model.k2, model.k3
    theta, m = config.theta, config.m
    bb = model.delay_coeff(y_del)
    A = 1.0 + k2 * theta * dt
    B = bb / (1.0 + bb * dt ** m)
    return (y * (1.0 - k2 * dt / A) + k1 * dt / A
            - (k3 * k3 / (4.0 * A * A)) * B * B
            * _state_power(y, 2.0 * model.alpha - 1.0) * dt)


def semi_discrete_diffusion_step(inputs: StepInputs, model: ModelSpec,
                                 config: SchemeConfig) -> float:
    """Advance the diffusion part over one interval: the squared-Gaussian
    update (sqrt(inner) + c * dW)**2, nonnegative always."""
    inner = semi_discrete_inner(inputs.y_current, inputs.y_delayed, inputs.dt, model, config)
    c = _dw_coefficient(inputs.y_current, inputs.y_delayed, inputs.dt, model, config)
    z = math.sqrt(inner) + c * inputs.dW
    return z * z


def _dw_coefficient(y: float, y_del: float, dt: float, model: ModelSpec,
                    config: SchemeConfig) -> float:
    bb = model.delay_coeff(y_del)
    A = 1.0 + model.k2 * config.theta * dt
    B = bb / (1.0 + bb * dt ** config.m)
    return (model.k3 / (2.0 * A)) * B * _state_power(y, model.alpha - 0.5)


def compensated_jump_update(y_minus: float, dt: float, jump_flag: bool,
                            model: ModelSpec) -> float:
    """Compensated jump map y + g(y) * (dN - lam * dt); raises
    :class:`PositivityError` on a nonpositive result."""
    dN = 1.0 if jump_flag else 0.0
    y_plus = y_minus + model.jump_coeff(y_minus) * (dN - model.lam * dt)
    if y_plus <= 0.0:
        raise PositivityError(y_minus, dt, jump_flag)
    return y_plus


def delay_lookup(traj: Trajectory, t: float, model: ModelSpec) -> float:
    """Value of the trajectory at the delayed time t.

    For t <= 0 the initial segment is evaluated exactly; for t > 0 the
    post-jump value at the greatest simulated node <= t is returned."""
    if t <= 0.0:
        return model.eval_initial_segment(t)
    nodes = traj.grid.positive_nodes
    if t > nodes[-1] * (1.0 + 1e-12):
        raise ValueError(f"delay time {t} is beyond the simulated frontier {nodes[-1]}")
    idx = int(np.searchsorted(nodes, t, side="right")) - 1
    # snap forward when t sits within rounding distance of the next node
    tol = 1e-12 * max(1.0, traj.grid.horizon)
    if idx + 1 < nodes.size and nodes[idx + 1] - t <= tol:
        idx += 1
    return float(traj.post[traj.grid.zero_index + idx])


# ---------------------------------------------------------------------------
# path simulation

def _prepare_delay_tables(model: ModelSpec, grid: JumpAdaptedGrid):
    """Per-interval delay sources: initial-segment values where the delayed
    time is <= 0, otherwise the index of the greatest node <= t - tau."""
    nodes = grid.positive_nodes
    targets = nodes[:-1] - model.tau
    from_segment = targets <= 0.0
    segment_vals = np.zeros(targets.size)
    for k in np.nonzero(from_segment)[0]:
        segment_vals[k] = model.eval_initial_segment(max(targets[k], -model.tau))
    delay_idx = np.zeros(targets.size, dtype=np.int64)
    pos = targets > 0.0
    if np.any(pos):
        idx = np.searchsorted(nodes, targets[pos], side="right") - 1
        tol = 1e-12 * max(1.0, grid.horizon)
        nxt = np.minimum(idx + 1, nodes.size - 1)
        idx = np.where(nodes[nxt] - targets[pos] <= tol, nxt, idx)
        delay_idx[pos] = idx
    return from_segment, segment_vals, delay_idx


def _prefix_values(model: ModelSpec, grid: JumpAdaptedGrid) -> np.ndarray:
    return np.array([model.eval_initial_segment(max(t, -model.tau))
                     for t in grid.nodes[: grid.zero_index]])


def _kernel_codes(model: ModelSpec):
    """Map built-in descriptors to kernel codes, or None for custom ones."""
    from . import _kernels as K

    b_map = {"constant": (K.B_CONST, 0.0), "power": (K.B_POWER, model.delay_coeff.gamma)}
    g_map = {"zero": (K.G_ZERO, 0.0), "linear": (K.G_LINEAR, model.jump_coeff.scale),
             "sin": (K.G_SIN, model.jump_coeff.scale),
             "ratio": (K.G_RATIO, model.jump_coeff.scale)}
    if model.delay_coeff.kind not in b_map or model.jump_coeff.kind not in g_map:
        return None
    return b_map[model.delay_coeff.kind], g_map[model.jump_coeff.kind]


def simulate_path(model: ModelSpec, config: SchemeConfig, grid: JumpAdaptedGrid,
                  increments, jump_flags=None, use_kernel: bool = True) -> Trajectory:
    """Run the positivity-preserving scheme over the whole grid.

    increments holds one Wiener increment per interval of the grid on
    [0, T]; jump_flags defaults to the grid's per-node flags."""
    delta_substeps(model, config)
    if abs(grid.max_step - config.delta) > 1e-12 * config.delta:
        raise ValueError(
            f"grid step {grid.max_step} does not match config delta {config.delta}"
        )
    nodes = grid.positive_nodes
    n = nodes.size - 1
    increments = np.asarray(increments, dtype=float)
    if increments.size != n:
        raise ValueError(f"expected {n} increments, got {increments.size}")
    if jump_flags is None:
        jump_flags = grid.positive_jump_flags
    jump_flags = np.asarray(jump_flags, dtype=bool)
    if jump_flags.size != n + 1:
        raise ValueError("jump flags must align with the positive grid nodes")

    from_segment, segment_vals, delay_idx = _prepare_delay_tables(model, grid)
    y0 = model.eval_initial_segment(0.0)
    pre = np.empty(n + 1)
    post = np.empty(n + 1)

    codes = _kernel_codes(model) if use_kernel else None
    if codes is not None:
        from ._kernels import semi_discrete_kernel, STATUS_POSITIVITY

        (b_kind, b_gamma), (g_kind, g_scale) = codes
        status, clamps, bad = semi_discrete_kernel(
            nodes, jump_flags, increments, y0, from_segment, segment_vals,
            delay_idx, model.k1, model.k2, model.k3, model.alpha, model.lam,
            config.theta, config.m, b_kind, b_gamma, g_kind, g_scale, pre, post)
        if status == STATUS_POSITIVITY:
            dt = nodes[bad] - nodes[bad - 1]
            raise PositivityError(pre[bad], dt, bool(jump_flags[bad]))
    else:
        clamps = 0
        pre[0] = post[0] = y0
        for k in range(n):
            dt = nodes[k + 1] - nodes[k]
            y = post[k]
            y_del = segment_vals[k] if from_segment[k] else post[delay_idx[k]]
            raw = semi_discrete_inner_raw(y, y_del, dt, model, config)
            if raw < 0.0:
                raw = 0.0
                clamps += 1
            c = _dw_coefficient(y, y_del, dt, model, config)
            z = math.sqrt(raw) + c * increments[k]
            pre[k + 1] = z * z
            post[k + 1] = compensated_jump_update(pre[k + 1], dt, bool(jump_flags[k + 1]), model)

    prefix = _prefix_values(model, grid)
    return Trajectory(
        grid=grid,
        pre=np.concatenate([prefix, pre]),
        post=np.concatenate([prefix, post]),
        clamp_count=int(clamps),
    )


def euler_maruyama_path(model: ModelSpec, grid: JumpAdaptedGrid, increments,
                        jump_flags=None, use_kernel: bool = True) -> Trajectory:
    """Explicit Euler-Maruyama baseline; negative values are recorded in
    negative_count, never clamped or raised."""
    nodes = grid.positive_nodes
    n = nodes.size - 1
    increments = np.asarray(increments, dtype=float)
    if increments.size != n:
        raise ValueError(f"expected {n} increments, got {increments.size}")
    if jump_flags is None:
        jump_flags = grid.positive_jump_flags
    jump_flags = np.asarray(jump_flags, dtype=bool)

    from_segment, segment_vals, delay_idx = _prepare_delay_tables(model, grid)
    y0 = model.eval_initial_segment(0.0)
    pre = np.empty(n + 1)
    post = np.empty(n + 1)

    codes = _kernel_codes(model) if use_kernel else None
    if codes is not None:
        from ._kernels import euler_maruyama_kernel

        (b_kind, b_gamma), (g_kind, g_scale) = codes
        negatives, _ = euler_maruyama_kernel(
            nodes, jump_flags, increments, y0, from_segment, segment_vals,
            delay_idx, model.k1, model.k2, model.k3, model.alpha, model.lam,
            b_kind, b_gamma, g_kind, g_scale, pre, post)
    else:
        negatives = 0
        pre[0] = post[0] = y0
        for k in range(n):
            dt = nodes[k + 1] - nodes[k]
            x = post[k]
            x_del = segment_vals[k] if from_segment[k] else post[delay_idx[k]]
            bb = model.delay_coeff(abs(x_del))
            x_minus = x + (model.k1 - model.k2 * x) * dt \
                + model.k3 * bb * abs(x) ** model.alpha * increments[k]
            pre[k + 1] = x_minus
            dN = 1.0 if jump_flags[k + 1] else 0.0
            post[k + 1] = x_minus + model.jump_coeff(x_minus) * (dN - model.lam * dt)
            if post[k + 1] < 0.0:
                negatives += 1

    prefix = _prefix_values(model, grid)
    return Trajectory(
        grid=grid,
        pre=np.concatenate([prefix, pre]),
        post=np.concatenate([prefix, post]),
        clamp_count=0,
        negative_count=int(negatives),
    )


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write the [0, T] part as CSV with 17-significant-digit floats."""
    z = traj.grid.zero_index
    with open(path, "w", newline="") as fh:
        fh.write("t,y_pre,y_post,is_jump\n")
        for t, yp, ya, j in zip(traj.grid.nodes[z:], traj.pre[z:], traj.post[z:],
                                traj.grid.is_jump[z:]):
            fh.write(f"{t:.17g},{yp:.17g},{ya:.17g},{int(j)}\n")
