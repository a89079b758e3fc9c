import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jumpcir import (DelayCoefficient, JumpCoefficient, PositivityError,
                     SchemeConfig, StepInputs, build_grid,
                     compensated_jump_update, delay_lookup,
                     euler_maruyama_path, semi_discrete_diffusion_step,
                     semi_discrete_inner, simulate_path, trajectory_to_csv)
from jumpcir.analysis import _draw_noise, ode_mean
from jumpcir.noise import derive_path_stream, make_noise_bundle, sample_jump_times

from conftest import benchmark_model

# frozen from an independent high-precision evaluation of the under-root
# formula at k1=0.24, k2=3, k3=0.4, alpha=1/2, theta=1/2, b=1, m=1/4,
# y=1, dt=2**-5
INNER_GOLDEN = 0.91704665258088138084


class TestInner:
    def test_golden_value(self, model_cir, config32):
        v = semi_discrete_inner(1.0, 1.0, 2.0 ** -5, model_cir, config32)
        assert v == pytest.approx(INNER_GOLDEN, rel=1e-14)

    def test_deterministic_fixed_point(self):
        m = benchmark_model(k3=0.0, jump_coeff=JumpCoefficient("zero"))
        y_star = m.k1 / m.k2
        for theta in (0.0, 0.5, 1.0):
            for dt in (2.0 ** -5, 2.0 ** -8):
                cfg = SchemeConfig(delta=dt, theta=theta)
                v = semi_discrete_inner(y_star, 1.0, dt, m, cfg)
                assert v == pytest.approx(y_star, rel=1e-14)

    def test_zero_state_reduction(self):
        # y = 0 with alpha > 1/2 kills the first and third terms
        m = benchmark_model(alpha=0.7)
        cfg = SchemeConfig(delta=2.0 ** -5)
        dt = 2.0 ** -5
        v = semi_discrete_inner(0.0, 0.7, dt, m, cfg)
        expected = m.k1 * dt / (1.0 + m.k2 * cfg.theta * dt)
        assert v == pytest.approx(expected, rel=1e-14)


class TestDiffusionStep:
    def test_no_noise_theta_update(self):
        m = benchmark_model(k3=0.0, jump_coeff=JumpCoefficient("zero"))
        dt = 2.0 ** -5
        for theta in (0.0, 0.5, 1.0):
            cfg = SchemeConfig(delta=dt, theta=theta)
            y = 0.37
            out = semi_discrete_diffusion_step(
                StepInputs(y_current=y, y_delayed=1.0, dt=dt, dW=0.0), m, cfg)
            A = 1.0 + m.k2 * theta * dt
            assert out == pytest.approx(y * (1 - m.k2 * dt / A) + m.k1 * dt / A,
                                        rel=1e-14)

    def test_matches_theta_half_display(self, model_cir):
        # independent transcription of the scheme specialized to theta = 1/2
        # and b(x) = x**gamma (the experiment configuration)
        k1, k2, k3, gamma = 0.24, 3.0, 0.4, 1.0
        cfg = SchemeConfig(delta=2.0 ** -5, theta=0.5)

        def reference(y, ydel, dt, dw):
            bg = ydel ** gamma
            inner = (y * (1 - 2 * k2 * dt / (2 + k2 * dt))
                     + 2 * k1 * dt / (2 + k2 * dt)
                     - (k3 ** 2 / (2 + k2 * dt) ** 2)
                     * bg ** 2 / (1 + bg * dt ** 0.25) ** 2 * dt)
            z = math.sqrt(inner) + (k3 / (2 + k2 * dt)) \
                * bg / (1 + bg * dt ** 0.25) * dw
            return z * z

        rng = np.random.default_rng(0)
        for _ in range(100):
            y = rng.uniform(0.05, 3.0)
            ydel = rng.uniform(0.05, 3.0)
            dw = rng.normal(0, math.sqrt(2.0 ** -5))
            out = semi_discrete_diffusion_step(
                StepInputs(y_current=y, y_delayed=ydel, dt=2.0 ** -5, dW=dw),
                model_cir, cfg)
            assert out == pytest.approx(reference(y, ydel, 2.0 ** -5, dw),
                                        rel=1e-13)

    def test_squared_form_identity(self, model_cir, config32):
        # ((a + ch)^2 + (a - ch)^2)/2 - a^2 == (ch)^2
        dt = 2.0 ** -5
        base = semi_discrete_diffusion_step(
            StepInputs(1.0, 1.0, dt, 0.0), model_cir, config32)
        up = semi_discrete_diffusion_step(
            StepInputs(1.0, 1.0, dt, 0.1), model_cir, config32)
        down = semi_discrete_diffusion_step(
            StepInputs(1.0, 1.0, dt, -0.1), model_cir, config32)
        assert up != down
        c = (up - down) / (2 * 0.1 * 2 * math.sqrt(base))  # recover coefficient
        assert (up + down) / 2 - base == pytest.approx(c * c * 0.01, rel=1e-10)

    def test_no_delay_dependence_with_constant_b(self):
        m = benchmark_model(delay_coeff=DelayCoefficient("constant"))
        cfg = SchemeConfig(delta=2.0 ** -5)
        a = semi_discrete_diffusion_step(StepInputs(1.0, 0.2, 2.0 ** -5, 0.3), m, cfg)
        b = semi_discrete_diffusion_step(StepInputs(1.0, 5.7, 2.0 ** -5, 0.3), m, cfg)
        assert a == b

    @given(st.floats(min_value=0.0, max_value=10.0),
           st.floats(min_value=0.0, max_value=10.0),
           st.floats(min_value=-3.0, max_value=3.0))
    def test_always_nonnegative(self, y, ydel, dw):
        m = benchmark_model()
        cfg = SchemeConfig(delta=2.0 ** -5)
        out = semi_discrete_diffusion_step(
            StepInputs(y, ydel, 2.0 ** -5, dw), m, cfg)
        assert out >= 0.0


class TestJumpUpdate:
    def test_multiplicative_form(self, model_cir):
        # g(x) = 2x: y+ = y-(1 + 2(dN - lam*dt))
        dt = 2.0 ** -5
        y = 0.7
        out = compensated_jump_update(y, dt, True, model_cir)
        assert out == pytest.approx(y * (1 + 2 * (1 - dt)), rel=1e-14)

    def test_zero_coefficient_identity(self):
        m = benchmark_model(jump_coeff=JumpCoefficient("zero"))
        assert compensated_jump_update(0.9, 0.1, True, m) == 0.9
        assert compensated_jump_update(0.9, 0.1, False, m) == 0.9

    def test_compensator_only(self, model_cir):
        out = compensated_jump_update(1.0, 0.1, False, model_cir)
        assert out == pytest.approx(0.8, rel=1e-14)

    def test_positivity_violation_raises(self, model_cir):
        with pytest.raises(PositivityError) as exc:
            compensated_jump_update(1.0, 0.5, False, model_cir)  # 1 - 2*0.5 = 0
        assert exc.value.dt == 0.5


class TestDelayLookup:
    def _traj(self, model):
        grid, dW = _draw_noise(model, 3, 0, 8)
        cfg = SchemeConfig(delta=2.0 ** -3)
        return simulate_path(model, cfg, grid, dW)

    def test_segment_evaluation(self, model_cir):
        traj = self._traj(model_cir)
        assert delay_lookup(traj, -0.5, model_cir) == 1.0

    def test_node_hit(self, model_cir):
        traj = self._traj(model_cir)
        t = traj.grid.positive_nodes[3]
        idx = traj.grid.zero_index + 3
        assert delay_lookup(traj, t, model_cir) == traj.post[idx]

    def test_between_nodes_uses_left_node(self, model_cir):
        traj = self._traj(model_cir)
        nodes = traj.grid.positive_nodes
        t = (nodes[2] + nodes[3]) / 2
        assert delay_lookup(traj, t, model_cir) == traj.post[traj.grid.zero_index + 2]

    def test_beyond_frontier_rejected(self, model_cir):
        traj = self._traj(model_cir)
        with pytest.raises(ValueError):
            delay_lookup(traj, 2.0, model_cir)


class TestSimulatePath:
    def test_ode_reduction_and_order(self):
        m = benchmark_model(k3=0.0, lam=0.0, jump_coeff=JumpCoefficient("zero"))
        errors = []
        for e in (5, 6, 7):
            cfg = SchemeConfig(delta=2.0 ** -e, theta=0.5)
            grid = build_grid(1.0, 1.0, 2 ** e, [])
            traj = simulate_path(m, cfg, grid, np.zeros(2 ** e))
            errors.append(abs(traj.terminal - float(ode_mean(m, 1.0))))
        orders = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
        assert min(orders) >= 1.9  # trapezoidal superconvergence at theta=1/2

    def test_exact_fixed_point(self):
        m = benchmark_model(k3=0.0, lam=0.0, jump_coeff=JumpCoefficient("zero"),
                            initial_segment=lambda t: 0.08)
        cfg = SchemeConfig(delta=2.0 ** -5)
        grid = build_grid(1.0, 1.0, 32, [])
        traj = simulate_path(m, cfg, grid, np.zeros(32))
        assert np.allclose(traj.post, 0.08, rtol=1e-12)

    def test_all_positive_benchmark(self, model_cir):
        cfg = SchemeConfig(delta=2.0 ** -7)
        for p in range(20):
            grid, dW = _draw_noise(model_cir, 21, p, 2 ** 7)
            traj = simulate_path(model_cir, cfg, grid, dW)
            assert traj.min_value > 0
            assert traj.clamp_count == 0

    def test_single_jump_decomposition(self, model_cir):
        # one flagged node: multiplicative up-jump there, pure compensator drift
        # at every other node
        lam_small = benchmark_model(lam=1e-6)
        grid = build_grid(1.0, 1.0, 4, [0.6])
        rng = np.random.default_rng(5)
        dts = np.diff(grid.positive_nodes)
        dW = rng.standard_normal(dts.size) * np.sqrt(dts)
        traj = simulate_path(lam_small, SchemeConfig(delta=0.25), grid, dW)
        z = grid.zero_index
        for k in range(1, grid.positive_nodes.size):
            dt = grid.positive_nodes[k] - grid.positive_nodes[k - 1]
            pre = traj.pre[z + k]
            dN = 1.0 if grid.positive_jump_flags[k] else 0.0
            expected = pre * (1 + 2 * (dN - lam_small.lam * dt))
            assert traj.post[z + k] == pytest.approx(expected, rel=1e-13)
        jump_k = int(np.nonzero(grid.positive_jump_flags)[0][0])
        ratio = traj.post[z + jump_k] / traj.pre[z + jump_k]
        assert ratio == pytest.approx(3.0, abs=1e-5)  # 1 + 2(1 - lam*dt)

    def test_kernel_matches_python_loop(self, model_cev07):
        cfg = SchemeConfig(delta=2.0 ** -5)
        grid, dW = _draw_noise(model_cev07, 8, 0, 32)
        fast = simulate_path(model_cev07, cfg, grid, dW, use_kernel=True)
        slow = simulate_path(model_cev07, cfg, grid, dW, use_kernel=False)
        assert np.allclose(fast.post, slow.post, rtol=1e-14, atol=0)
        assert np.allclose(fast.pre, slow.pre, rtol=1e-14, atol=0)
        assert fast.clamp_count == slow.clamp_count

    def test_custom_coefficients_python_path(self):
        m = benchmark_model(
            delay_coeff=DelayCoefficient("custom", gamma=0.5,
                                         func=lambda x: math.sqrt(x) + 0.1),
            jump_coeff=JumpCoefficient("custom", lipschitz_L=0.5,
                                       func=lambda x: 0.5 * math.sin(x)))
        cfg = SchemeConfig(delta=2.0 ** -5)
        grid, dW = _draw_noise(m, 8, 1, 32)
        traj = simulate_path(m, cfg, grid, dW)
        assert traj.min_value > 0

    def test_prefix_reproduces_segment(self, model_cir):
        grid, dW = _draw_noise(model_cir, 8, 2, 16)
        traj = simulate_path(model_cir, SchemeConfig(delta=2.0 ** -4), grid, dW)
        assert np.all(traj.post[: grid.zero_index] == 1.0)


class TestEulerMaruyama:
    def test_ode_reduction_first_order(self):
        m = benchmark_model(k3=0.0, lam=0.0, jump_coeff=JumpCoefficient("zero"))
        errors = []
        for e in (6, 8):
            grid = build_grid(1.0, 1.0, 2 ** e, [])
            traj = euler_maruyama_path(m, grid, np.zeros(2 ** e))
            errors.append(abs(traj.terminal - float(ode_mean(m, 1.0))))
        order = math.log2(errors[0] / errors[1]) / 2
        assert 0.8 <= order <= 1.2

    def test_negative_paths_occur(self, model_cir):
        negative_paths = 0
        for p in range(2000):
            grid, dW = _draw_noise(model_cir, 31, p, 32)
            traj = euler_maruyama_path(model_cir, grid, dW)
            if traj.negative_count > 0:
                negative_paths += 1
        # the motivation for the square-root-transform scheme: plain
        # Euler-Maruyama does go negative on this model
        assert negative_paths > 0

    def test_refinement_self_consistency(self, model_cir):
        diffs = []
        for e in (5, 6):
            rms = 0.0
            for p in range(200):
                b = make_noise_bundle(model_cir, 13, p, 7)
                t_fine = euler_maruyama_path(model_cir, b.grid, b.wiener_fine).terminal
                g = build_grid(1.0, 1.0, 2 ** e, b.jump_times)
                from jumpcir import wiener_increments_for_grid
                inc = wiener_increments_for_grid(b, g)
                t_coarse = euler_maruyama_path(model_cir, g, inc).terminal
                rms += (t_fine - t_coarse) ** 2
            diffs.append(math.sqrt(rms / 200))
        assert diffs[1] < diffs[0]


class TestTrajectoryCsv:
    def test_roundtrip(self, model_cir, tmp_path):
        grid, dW = _draw_noise(model_cir, 8, 0, 8)
        traj = simulate_path(model_cir, SchemeConfig(delta=2.0 ** -3), grid, dW)
        path = tmp_path / "traj.csv"
        trajectory_to_csv(traj, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "t,y_pre,y_post,is_jump"
        z = grid.zero_index
        assert len(lines) - 1 == grid.nodes.size - z
        for i, line in enumerate(lines[1:]):
            t, yp, ya, j = line.split(",")
            assert float(t) == traj.grid.nodes[z + i]
            assert float(yp) == traj.pre[z + i]
            assert float(ya) == traj.post[z + i]
            assert int(j) == int(traj.grid.is_jump[z + i])
