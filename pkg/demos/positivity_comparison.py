"""Positivity: the squared-Gaussian scheme vs. plain Euler-Maruyama.

The square-root diffusion leaves y = 0 absorbing in theory, but a naive
Euler-Maruyama step happily crosses zero, after which the sqrt in the
diffusion is undefined.  The semi-discrete step is a perfect square and
can never go negative.  This demo audits both integrators over the same
driving noise and step sizes and prints the violation counts.
"""

import dataclasses
from pathlib import Path

from jumpcir import SchemeConfig, load_model_file, positivity_audit

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    model, config, _ = load_model_file(CONFIGS / "cir_jump_alpha05_gamma1.toml")
    paths = 2000

    print(f"{paths} paths per cell; model k1={model.k1}, k2={model.k2}, "
          f"k3={model.k3}, alpha={model.alpha}\n")
    print(f"{'step':>8} {'EM negatives':>14} {'EM min':>12} "
          f"{'SD negatives':>14} {'SD min':>12}")
    for e in range(5, 9):
        cfg = dataclasses.replace(config, delta=2.0 ** -e)
        em = positivity_audit(model, cfg, paths=paths, master_seed=7,
                              scheme="euler-maruyama")
        sd = positivity_audit(model, cfg, paths=paths, master_seed=7)
        print(f"2^-{e:<5} {em['negative_count']:>14} {em['min_value']:>12.2e} "
              f"{sd['negative_count']:>14} {sd['min_value']:>12.2e}")

    print("\nThe semi-discrete column stays strictly positive at every "
          "step size; Euler-Maruyama needs ad-hoc truncation.")


if __name__ == "__main__":
    main()
