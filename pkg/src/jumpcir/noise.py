"""Reproducible driving noise and jump-adapted time grids.

The Wiener path of each Monte Carlo sample is generated once at the finest
resolution (reference grid plus jump times) and aggregated exactly onto any
coarser grid whose deterministic nodes it refines.  Jump times are shared
across all resolutions of the same path, so coupled-reference error
estimates compare solutions driven by identical noise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, _MULTIPLE_RTOL

__all__ = [
    "JumpAdaptedGrid",
    "NoiseBundle",
    "derive_path_stream",
    "sample_jump_times",
    "build_grid",
    "make_noise_bundle",
    "wiener_increments_for_grid",
    "dump_noise_bundle",
    "load_noise_bundle",
]

_PURPOSE_CODES = {"wiener": 0, "poisson": 1}

# absolute tolerance factor for merging a jump time into a deterministic node
_MERGE_TOL = 1e-15


@dataclass(frozen=True)
class JumpAdaptedGrid:
    """Time partition of [-tau, T]: an equidistant prefix of l+1 nodes on
    [-tau, 0], the multiples of delta = tau/l on [0, T], and every Poisson
    jump time inserted (or merged, within tolerance) as a flagged node."""

    nodes: np.ndarray      # strictly increasing, nodes[zero_index] == 0.0
    is_jump: np.ndarray    # bool, aligned with nodes; False on the prefix
    max_step: float
    tau: float
    substeps: int          # l, with delta == tau/l

    @property
    def zero_index(self) -> int:
        return self.substeps

    @property
    def positive_nodes(self) -> np.ndarray:
        """Nodes on [0, T] (starting at t = 0)."""
        return self.nodes[self.zero_index:]

    @property
    def positive_jump_flags(self) -> np.ndarray:
        return self.is_jump[self.zero_index:]

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    def jump_times(self) -> np.ndarray:
        return self.nodes[self.is_jump]


def derive_path_stream(master_seed: int, path_index: int, purpose: str) -> np.random.Generator:
    """Deterministic, collision-free per-path stream.

    Distinct (path_index, purpose) pairs map to distinct SeedSequence spawn
    keys, giving statistically independent streams; identical inputs give
    bit-identical streams.
    """
    code = _PURPOSE_CODES[purpose]
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(path_index, code))
    return np.random.Generator(np.random.PCG64(seq))


def sample_jump_times(lam: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Event times of a homogeneous Poisson process on (0, horizon],
    by cumulative exponential inter-arrival sampling."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if lam == 0:
        return np.empty(0)
    times = []
    t = rng.exponential(1.0 / lam)
    while t <= horizon:
        times.append(t)
        t += rng.exponential(1.0 / lam)
    return np.asarray(times)


def build_grid(tau: float, horizon: float, l: int, jump_times) -> JumpAdaptedGrid:
    """Superpose jump times onto the deterministic grid of step tau/l.

    A jump time within 1e-15 * horizon of a deterministic node is merged
    into that node (flagged), so zero-length intervals cannot occur.
    """
    if l < 2:
        raise ValueError("l must be an integer >= 2")
    ratio = horizon / tau
    n_tau = round(ratio)
    if n_tau < 1 or abs(ratio - n_tau) > _MULTIPLE_RTOL * max(1.0, ratio):
        raise ValueError("horizon must be a positive integer multiple of tau")
    jump_times = np.asarray(jump_times, dtype=float)
    if jump_times.size:
        if np.any(np.diff(jump_times) <= 0):
            raise ValueError("jump times must be strictly increasing")
        if jump_times[0] <= 0 or jump_times[-1] > horizon:
            raise ValueError("jump times must lie in (0, horizon]")

    delta = tau / l
    n_det = n_tau * l
    det = np.arange(-l, n_det + 1) * delta
    tol = _MERGE_TOL * horizon

    flags = np.zeros(det.size, dtype=bool)
    extra = []
    extra_pos = []
    for jt in jump_times:
        j = int(np.round(jt / delta))
        j = min(max(j, 0), n_det)
        if abs(jt - j * delta) <= tol:
            flags[l + j] = True
        else:
            extra.append(jt)
            extra_pos.append(np.searchsorted(det, jt))

    if extra:
        nodes = np.insert(det, extra_pos, extra)
        is_jump = np.insert(flags, extra_pos, True)
    else:
        nodes = det
        is_jump = flags
    return JumpAdaptedGrid(nodes=nodes, is_jump=is_jump, max_step=delta, tau=tau, substeps=l)


@dataclass(frozen=True)
class NoiseBundle:
    """Per-path driving noise: shared jump times plus Wiener increments at
    the finest resolution tau * 2**-fine_exponent (jump-adapted).

    A pure function of (master_seed, path_index, model, fine_exponent)."""

    master_seed: int
    path_index: int
    fine_exponent: int
    jump_times: np.ndarray
    grid: JumpAdaptedGrid          # fine jump-adapted grid
    wiener_fine: np.ndarray        # one increment per fine interval on [0, T]


def make_noise_bundle(model: ModelSpec, master_seed: int, path_index: int,
                      fine_exponent: int) -> NoiseBundle:
    """Draw jump times and fine-resolution Wiener increments for one path."""
    poisson_rng = derive_path_stream(master_seed, path_index, "poisson")
    jump_times = sample_jump_times(model.lam, model.horizon, poisson_rng)
    l_ref = 2 ** fine_exponent
    grid = build_grid(model.tau, model.horizon, l_ref, jump_times)
    dts = np.diff(grid.positive_nodes)
    wiener_rng = derive_path_stream(master_seed, path_index, "wiener")
    dW = wiener_rng.standard_normal(dts.size) * np.sqrt(dts)
    return NoiseBundle(
        master_seed=master_seed,
        path_index=path_index,
        fine_exponent=fine_exponent,
        jump_times=jump_times,
        grid=grid,
        wiener_fine=dW,
    )


def wiener_increments_for_grid(bundle: NoiseBundle, grid: JumpAdaptedGrid) -> np.ndarray:
    """Aggregate the bundle's fine increments onto a coarser compatible grid.

    Each coarse increment is the sum of the fine increments it spans,
    accumulated in index order, so partial Brownian sums agree across
    resolutions up to floating-point summation error.
    """
    l_fine = bundle.grid.substeps
    if l_fine % grid.substeps != 0:
        raise ValueError(
            f"coarse substep count {grid.substeps} does not divide fine count {l_fine}"
        )
    coarse_jumps = grid.jump_times()
    if coarse_jumps.size != bundle.jump_times.size or (
        coarse_jumps.size and not np.allclose(coarse_jumps, bundle.jump_times,
                                              rtol=0, atol=1e-12 * grid.horizon)
    ):
        raise ValueError("grid jump times do not match the noise bundle")

    fine_nodes = bundle.grid.positive_nodes
    coarse_nodes = grid.positive_nodes
    idx = np.searchsorted(fine_nodes, coarse_nodes)
    idx = np.clip(idx, 0, fine_nodes.size - 1)
    # snap to the nearest fine node within tolerance
    tol = 1e-12 * max(1.0, grid.horizon)
    left_ok = np.abs(fine_nodes[np.maximum(idx - 1, 0)] - coarse_nodes) <= tol
    idx = np.where(np.abs(fine_nodes[idx] - coarse_nodes) <= tol, idx,
                   np.where(left_ok, idx - 1, idx))
    if np.any(np.abs(fine_nodes[idx] - coarse_nodes) > tol):
        raise ValueError("coarse grid node is not a node of the fine grid")
    if idx.size == fine_nodes.size and np.all(idx == np.arange(idx.size)):
        return bundle.wiener_fine.copy()
    return np.add.reduceat(bundle.wiener_fine, idx[:-1])


# ---------------------------------------------------------------------------
# debug dump (flat little-endian record; not a stability-guaranteed format)

def dump_noise_bundle(bundle: NoiseBundle, path) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQQ", bundle.master_seed, bundle.path_index,
                             bundle.jump_times.size))
        fh.write(np.asarray(bundle.jump_times, "<f8").tobytes())
        fh.write(struct.pack("<Q", bundle.wiener_fine.size))
        fh.write(np.asarray(bundle.wiener_fine, "<f8").tobytes())


def load_noise_bundle(path) -> dict:
    """Read back a dumped record as a plain dict (no grid reconstruction)."""
    with open(path, "rb") as fh:
        seed, index, n_jumps = struct.unpack("<QQQ", fh.read(24))
        jumps = np.frombuffer(fh.read(8 * n_jumps), "<f8")
        (n_inc,) = struct.unpack("<Q", fh.read(8))
        incs = np.frombuffer(fh.read(8 * n_inc), "<f8")
    return {"master_seed": seed, "path_index": index,
            "jump_times": jumps, "wiener_fine": incs}
