"""Simulate and plot sample paths of the delayed CIR/CEV jump model.

One trajectory per benchmark parameterization (diffusion exponents 1/2,
0.7, 0.9), all driven by the same Wiener path and the same jump times so
the effect of the exponent is visible directly.  Saves a figure next to
this script.
"""

import dataclasses
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from jumpcir import (build_grid, load_model_file, make_noise_bundle,
                     simulate_path, wiener_increments_for_grid)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
NAMES = ["cir_jump_alpha05_gamma1.toml",
         "cir_jump_alpha07_gamma05.toml",
         "cir_jump_alpha09_gamma05.toml"]


def main():
    fig, ax = plt.subplots(figsize=(8, 4.5))

    # draw the noise once; the jump intensity is shared by all three models
    base, _, _ = load_model_file(CONFIGS / NAMES[0])
    bundle = make_noise_bundle(base, master_seed=2024, path_index=0,
                               fine_exponent=9)
    print(f"jump times: {[f'{t:.3f}' for t in bundle.jump_times]}")

    for name in NAMES:
        model, config, _ = load_model_file(CONFIGS / name)
        config = dataclasses.replace(config, delta=2.0 ** -9)
        grid = build_grid(model.tau, model.horizon, 2 ** 9, bundle.jump_times)
        inc = wiener_increments_for_grid(bundle, grid)
        traj = simulate_path(model, config, grid, inc)
        label = (rf"$\alpha$={model.alpha}, "
                 rf"$\gamma$={model.delay_coeff.gamma}")
        ax.plot(grid.positive_nodes, traj.post[grid.zero_index:], label=label)
        print(f"{name}: terminal {traj.terminal:.6f}, "
              f"min {traj.min_value:.6f}")

    for t in bundle.jump_times:
        ax.axvline(t, color="grey", ls=":", lw=0.8)
    ax.axhline(base.k1 / base.k2, color="k", ls="--", lw=0.8,
               label="long-run mean $k_1/k_2$")
    ax.set_xlabel("t")
    ax.set_ylabel("y(t)")
    ax.legend()
    fig.tight_layout()
    out = Path(__file__).with_suffix(".png")
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
