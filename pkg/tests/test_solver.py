import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from helpers import (
    l2q_error,
    manufactured_exact,
    manufactured_forcing,
    unchecked_spec,
)
from memvisco.expressions import field_from_name
from memvisco.grid import Field, Grid
from memvisco.kernels import (
    ConstantKernel,
    PowerLawKernel,
    PronyKernel,
    translate,
)
from memvisco.solver import (
    CflViolation,
    KernelUnboundedError,
    ProblemSpec,
    SolverAbort,
    cfl_time_step,
    compute_stress,
    conv_weights,
    direct_weights,
    interval_weights,
    run,
    run_integral_volterra,
    run_integrodiff,
    stable_time_step,
    trajectory_distance,
)

PRONY = PronyKernel(g_inf=0.5, terms=((0.5, 2.0),))


def standing_wave_spec(n=49, cfl=0.5, horizon=1.0):
    g = Grid.line(n)
    k = ConstantKernel(1.0)
    dt = cfl_time_step(g, k, 1.0, cfl, horizon)
    x = g.axis_coordinates(0)
    return ProblemSpec(
        kernel=k,
        grid=g,
        horizon=horizon,
        dt=dt,
        eps=1.0,
        u0=Field(g, np.sin(np.pi * x)),
        u1=Field.zero(g),
    )


class TestTimeSteps:
    def test_stable_time_step_formula(self):
        g = Grid.line(19)
        assert stable_time_step(g, 4.0) == pytest.approx(g.h_min / 2.0)
        g3 = Grid.box(7)
        assert stable_time_step(g3, 1.0) == pytest.approx(g3.h_min / math.sqrt(3.0))

    def test_cfl_time_step_divides_horizon(self):
        g = Grid.line(23)
        dt = cfl_time_step(g, PRONY, 0.05, 0.5, 1.3)
        steps = 1.3 / dt
        assert abs(steps - round(steps)) < 1e-9
        assert dt <= 0.5 * stable_time_step(g, PRONY.modulus(0.05)) * (1 + 1e-12)


class TestProblemSpec:
    def test_rejects_nonintegral_step_count(self):
        g = Grid.line(9)
        with pytest.raises(ValueError, match="integer"):
            ProblemSpec(
                kernel=ConstantKernel(1.0), grid=g, horizon=1.0, dt=0.3,
                eps=1.0, u0=Field.zero(g), u1=Field.zero(g),
            )

    def test_cfl_violation_names_required_dt(self):
        g = Grid.line(99)
        with pytest.raises(CflViolation, match="required dt"):
            ProblemSpec(
                kernel=ConstantKernel(1.0), grid=g, horizon=1.0, dt=0.5,
                eps=1.0, u0=Field.zero(g), u1=Field.zero(g),
            )

    def test_integrodiff_needs_positive_eps(self):
        g = Grid.line(9)
        with pytest.raises(ValueError, match="eps"):
            ProblemSpec(
                kernel=PRONY, grid=g, horizon=1.0, dt=0.01,
                eps=0.0, u0=Field.zero(g), u1=Field.zero(g),
            )

    def test_volterra_accepts_zero_eps(self):
        g = Grid.line(9)
        spec = ProblemSpec(
            kernel=PowerLawKernel(c=1.0, alpha=0.5), grid=g, horizon=1.0,
            dt=0.1, eps=0.0, u0=Field.zero(g), u1=Field.zero(g),
            formulation="integral_volterra",
        )
        assert spec.n_steps == 10

    def test_data_must_live_on_grid(self):
        g = Grid.line(9)
        with pytest.raises(ValueError, match="grid"):
            ProblemSpec(
                kernel=ConstantKernel(1.0), grid=g, horizon=1.0, dt=0.01,
                eps=1.0, u0=Field.zero(Grid.line(11)), u1=Field.zero(g),
            )

    def test_fingerprint_sensitivity(self):
        a = standing_wave_spec()
        b = standing_wave_spec()
        assert a.fingerprint() == b.fingerprint()
        c = dataclasses.replace(a, dt=a.dt / 2)
        assert c.fingerprint() != a.fingerprint()


class TestProductQuadrature:
    @given(
        st.floats(0.05, 2.0),
        st.floats(-2.0, 2.0),
        st.floats(-2.0, 2.0),
        st.integers(2, 30),
    )
    def test_exact_for_linear_factor(self, tau, a, b, n):
        # weights integrate w(s) (a + b s) exactly when w = -d/ds e^{-s/tau}
        dt = 0.05
        modulus = lambda s: np.exp(-np.asarray(s) / tau)
        integral = lambda s: tau * (1.0 - np.exp(-np.asarray(s) / tau))
        left, right = interval_weights(modulus, integral, n, dt)
        samples = a + b * dt * np.arange(n + 1)
        got = float(np.sum(direct_weights(left, right, n) * samples))
        t = n * dt
        exact = quad(lambda s: (-1.0 / tau) * math.exp(-s / tau) * (a + b * s), 0, t)[0]
        assert got == pytest.approx(exact, rel=1e-9, abs=1e-12)

    @given(st.integers(1, 40))
    def test_weights_telescope(self, n):
        dt = 0.03
        k = PRONY
        left, right = interval_weights(k._modulus, k._integral, n, dt)
        total = float(np.sum(left) + np.sum(right))
        assert total == pytest.approx(k.modulus(n * dt) - k.modulus(0.0), abs=1e-12)

    def test_conv_weights_reverse_direct(self):
        # convolution weights are the direct weights seen from the far end
        k = PRONY
        left, right = interval_weights(k._modulus, k._integral, 6, 0.1)
        j = 5
        assert conv_weights(left, right, j) == pytest.approx(
            direct_weights(left, right, j)[::-1]
        )

    def test_history_window_truncates(self):
        k = PRONY
        left, right = interval_weights(k._modulus, k._integral, 10, 0.1)
        full = conv_weights(left, right, 8)
        cut = conv_weights(left, right, 8, max_intervals=3)
        assert np.all(cut[:5] == 0.0)
        assert cut[6:] == pytest.approx(full[6:])
        # the edge level keeps only the inside half of its subinterval
        assert cut[5] == pytest.approx(full[5] - left[3])


class TestIntegrodiff:
    def test_zero_data_stays_zero(self):
        g = Grid.line(19)
        spec = ProblemSpec(
            kernel=PRONY, grid=g, horizon=1.0, dt=0.02, eps=0.05,
            u0=Field.zero(g), u1=Field.zero(g),
        )
        traj = run(spec)
        assert np.all(traj.levels == 0.0)

    def test_level_zero_is_u0(self):
        spec = standing_wave_spec()
        traj = run(spec)
        assert np.array_equal(traj.levels[0], spec.u0.values)

    def test_startup_rule(self):
        g = Grid.line(19)
        x = g.axis_coordinates(0)
        u0 = Field(g, np.sin(np.pi * x))
        u1 = Field(g, 0.3 * np.sin(2 * np.pi * x))
        forcing = lambda grid, t: np.cos(np.pi * grid.axis_coordinates(0)) * (1.0 + t)
        spec = ProblemSpec(
            kernel=PRONY, grid=g, horizon=1.0, dt=0.02, eps=0.05,
            u0=u0, u1=u1, forcing=forcing,
        )
        traj = run(spec)
        from memvisco.grid import laplacian_array

        g_eps = PRONY.modulus(0.05)
        expected = (
            u0.values
            + 0.02 * u1.values
            + 0.5 * 0.02**2 * (g_eps * laplacian_array(g, u0.values) + forcing(g, 0.0))
        )
        assert traj.levels[1] == pytest.approx(expected, abs=1e-15)

    def test_elastic_standing_wave(self):
        spec = standing_wave_spec(n=49)
        traj = run(spec)
        x = spec.grid.axis_coordinates(0)
        exact = np.sin(np.pi * x)[None, :] * np.cos(np.pi * traj.times)[:, None]
        assert np.abs(traj.levels - exact).max() < 1e-3

    def test_constant_kernel_matches_plain_leapfrog(self):
        # the memory path must be exactly inert, not just small
        spec = standing_wave_spec(n=19, horizon=0.5)
        traj = run(spec)
        from memvisco.grid import laplacian_array

        g = spec.grid
        dt = spec.dt
        u_prev = spec.u0.values.copy()
        u_curr = u_prev + dt * spec.u1.values + 0.5 * dt**2 * laplacian_array(g, u_prev)
        manual = [u_prev, u_curr]
        for _ in range(spec.n_steps - 1):
            u_next = 2 * u_curr - u_prev + dt**2 * laplacian_array(g, u_curr)
            u_prev, u_curr = u_curr, u_next
            manual.append(u_curr)
        assert traj.levels == pytest.approx(np.array(manual), abs=1e-14)

    def test_manufactured_solution_second_order(self):
        errs = []
        for n in (24, 49):
            g = Grid.line(n)
            dt = cfl_time_step(g, PRONY, 0.05, 0.5, 1.0)
            x = g.axis_coordinates(0)
            spec = ProblemSpec(
                kernel=PRONY, grid=g, horizon=1.0, dt=dt, eps=0.05,
                u0=Field(g, np.sin(np.pi * x)), u1=Field.zero(g),
                forcing=manufactured_forcing(PRONY, 0.05),
            )
            traj = run(spec)
            errs.append(l2q_error(g, traj.levels, manufactured_exact(g, traj.times), traj.dt))
        order = math.log(errs[0] / errs[1]) / math.log(2.0)
        assert order > 1.8

    def test_history_window_equal_horizon_is_exact(self):
        g = Grid.line(19)
        base = ProblemSpec(
            kernel=PRONY, grid=g, horizon=1.0, dt=0.02, eps=0.05,
            u0=Field.zero(g),
            u1=field_from_name(g, "sin_pi_product", {"amplitude": 1.0}),
        )
        windowed = dataclasses.replace(base, history_window=1.0)
        assert np.array_equal(run(base).levels, run(windowed).levels)

    def test_short_history_window_stays_close_for_fast_decay(self):
        # kernel memory dies on the tau scale, so a few tau of history suffice
        k = PronyKernel(g_inf=0.5, terms=((0.5, 0.05),))
        g = Grid.line(19)
        dt = cfl_time_step(g, k, 0.05, 0.5, 1.0)
        base = ProblemSpec(
            kernel=k, grid=g, horizon=1.0, dt=dt, eps=0.05,
            u0=Field.zero(g),
            u1=field_from_name(g, "sin_pi_product", {"amplitude": 1.0}),
        )
        windowed = dataclasses.replace(base, history_window=0.4)
        d = trajectory_distance(run(base), run(windowed))
        assert d < 1e-4

    def test_abort_on_blowup(self):
        # highest grid mode under a far-too-large dt amplifies each step
        g = Grid.line(19)
        spec = unchecked_spec(
            kernel=ConstantKernel(1.0), grid=g, horizon=200.0, dt=2.0, eps=1.0,
            u0=Field(g, np.sin(19 * np.pi * g.axis_coordinates(0))), u1=Field.zero(g),
        )
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(SolverAbort, match="non-finite"):
                run_integrodiff(spec)

    def test_wrong_formulation_rejected(self):
        spec = standing_wave_spec()
        with pytest.raises(ValueError):
            run_integral_volterra(spec)


class TestVolterra:
    def test_zero_data_stays_zero(self):
        g = Grid.line(19)
        spec = ProblemSpec(
            kernel=PRONY, grid=g, horizon=1.0, dt=0.02, eps=0.05,
            u0=Field.zero(g), u1=Field.zero(g),
            formulation="integral_volterra",
        )
        traj = run(spec)
        assert np.all(traj.levels == 0.0)
        assert traj.correction_residuals is not None
        assert np.all(traj.correction_residuals == 0.0)

    def test_agrees_with_integrodiff(self):
        g = Grid.line(31)
        u1 = field_from_name(g, "sin_pi_product", {"amplitude": 1.0})
        spec_d = ProblemSpec(
            kernel=PRONY, grid=g, horizon=1.0, dt=0.005, eps=0.05,
            u0=Field.zero(g), u1=u1,
        )
        spec_i = dataclasses.replace(spec_d, formulation="integral_volterra")
        assert trajectory_distance(run(spec_d), run(spec_i)) < 5e-5

    def test_runs_at_zero_shift_for_singular_kernel(self):
        g = Grid.line(19)
        spec = ProblemSpec(
            kernel=PowerLawKernel(c=1.0, alpha=0.5), grid=g, horizon=0.5,
            dt=0.01, eps=0.0, u0=Field.zero(g),
            u1=field_from_name(g, "sin_pi_product", {"amplitude": 1.0}),
            formulation="integral_volterra",
        )
        traj = run(spec)
        assert np.all(np.isfinite(traj.levels))
        assert np.abs(traj.levels).max() > 0.0

    def test_zero_shift_is_limit_of_small_shifts(self):
        g = Grid.line(19)
        k = PowerLawKernel(c=1.0, alpha=0.5)
        u1 = field_from_name(g, "sin_pi_product", {"amplitude": 1.0})
        def solve(eps):
            return run(ProblemSpec(
                kernel=k, grid=g, horizon=0.5, dt=0.01, eps=eps,
                u0=Field.zero(g), u1=u1, formulation="integral_volterra",
            ))
        at_zero = solve(0.0)
        d_coarse = trajectory_distance(solve(2e-3), at_zero)
        d_fine = trajectory_distance(solve(5e-4), at_zero)
        # distance to the unshifted run shrinks like sqrt(eps)
        assert d_fine < d_coarse
        assert 1.5 < d_coarse / d_fine < 3.0
        assert d_fine < 5e-3

    def test_correction_residuals_shrink_with_dt(self):
        g = Grid.line(19)
        u1 = field_from_name(g, "sin_pi_product", {"amplitude": 1.0})
        def max_resid(dt):
            spec = ProblemSpec(
                kernel=PRONY, grid=g, horizon=0.5, dt=dt, eps=0.05,
                u0=Field.zero(g), u1=u1, formulation="integral_volterra",
            )
            return float(np.max(run(spec).correction_residuals))
        assert max_resid(0.005) < max_resid(0.01) / 3.0


class TestVelocities:
    def test_exact_on_linear_trajectory(self):
        from memvisco.solver import TrajectorySolution

        g = Grid.line(9)
        times = 0.25 * np.arange(5)
        ramp = np.outer(times, np.ones(9))
        traj = TrajectorySolution(
            grid=g, times=times, levels=2.0 * ramp + 1.0,
            formulation="integrodifferential", spec_fingerprint="",
        )
        assert traj.velocities() == pytest.approx(np.full((5, 9), 2.0), abs=1e-12)


class TestTrajectoryDistance:
    def test_requires_matching_grids(self):
        a = run(standing_wave_spec(n=19, horizon=0.5))
        b = run(standing_wave_spec(n=23, horizon=0.5))
        with pytest.raises(ValueError):
            trajectory_distance(a, b)

    def test_zero_against_itself(self):
        a = run(standing_wave_spec(n=19, horizon=0.5))
        assert trajectory_distance(a, a) == 0.0


class TestStress:
    def test_step_strain_tracks_modulus(self):
        dt = 0.01
        n = 200
        history = np.ones(n + 1)
        for j in (1, 50, 200):
            stress = compute_stress(PRONY, history[: j + 1], dt)
            assert stress == pytest.approx(PRONY.modulus(j * dt), abs=1e-12)

    def test_ramp_strain_integrates_modulus(self):
        k = PronyKernel(g_inf=0.0, terms=((1.0, 1.0),))
        dt = 0.01
        times = dt * np.arange(101)
        history = times.copy()
        for j in (10, 100):
            stress = compute_stress(k, history[: j + 1], dt)
            assert stress == pytest.approx(k.integral(j * dt), abs=1e-12)

    def test_constant_forever_returns_equilibrium(self):
        dt = 0.01
        history = np.full(151, 2.0)
        stress = compute_stress(PRONY, history, dt, past_value=2.0)
        assert stress == pytest.approx(PRONY.value_at_inf * 2.0, abs=1e-12)

    def test_classical_form_rejects_singular_kernel(self):
        k = PowerLawKernel(c=1.0, alpha=0.5)
        with pytest.raises(KernelUnboundedError):
            compute_stress(k, np.ones(11), 0.01)

    def test_integrated_form_handles_singular_kernel(self):
        k = PowerLawKernel(c=1.0, alpha=0.5)
        history = np.ones(11)
        stress = compute_stress(k, history, 0.01, form="integrated")
        assert stress == pytest.approx(k.modulus(0.1), abs=1e-10)

    def test_forms_agree_for_smooth_kernel(self):
        dt = 0.02
        times = dt * np.arange(51)
        history = np.sin(times)
        a = compute_stress(PRONY, history, dt, form="classical")
        b = compute_stress(PRONY, history, dt, form="integrated")
        assert a == pytest.approx(b, rel=1e-3, abs=1e-6)
