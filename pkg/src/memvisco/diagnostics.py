"""Energy bookkeeping, a-priori bound checks, and weak-form residuals.

The stored energy of a trajectory splits into kinetic, elastic, and memory
parts; its discrete time derivative has to match the forcing power plus two
nonpositive dissipation rates.  The residual of that balance is the primary
correctness signal for the integro-differential solver, since it probes the
solution and the kernel calculus together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from memvisco.grid import (
    Field,
    Grid,
    dirichlet_gradient_sq,
    inner_space,
    l2_space,
    l2_spacetime,
    trapezoid_weights,
)
from memvisco.kernels import RelaxationKernel, translate
from memvisco.solver import (
    ProblemSpec,
    TrajectorySolution,
    conv_weights,
    direct_weights,
    interval_weights,
    run_integrodiff,
    _cumulative_trapezoid,
    _forcing_values,
)

__all__ = [
    "EnergyLedger",
    "energy_ledger",
    "DecayReport",
    "check_energy_decay",
    "calibrate_decay_tolerance",
    "BoundReport",
    "check_energy_bound",
    "ModeTestFunction",
    "default_battery",
    "WeakResidualEntry",
    "weak_residual",
]


# ---------------------------------------------------------------------------
# energy ledger
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyLedger:
    """Per-level energy split and balance residual.

    stored = kinetic + elastic + memory.  The residual compares the
    centered time derivative of stored against forcing_power +
    rate_modulus + rate_curvature and is defined on interior levels
    1 .. n-1 (length n_levels - 2).
    """

    times: np.ndarray
    kinetic: np.ndarray
    elastic: np.ndarray
    memory: np.ndarray
    rate_modulus: np.ndarray
    rate_curvature: np.ndarray
    forcing_power: np.ndarray
    stored: np.ndarray
    residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))


def energy_ledger(
    traj: TrajectorySolution,
    kernel: RelaxationKernel,
    eps: float,
    forcing=None,
) -> EnergyLedger:
    """Assemble the energy balance for a trajectory of the shifted problem.

    All modulus evaluations use the shifted kernel G(eps + .); eps = 0 is
    accepted only when the unshifted modulus rate is integrable at 0.
    """
    if eps > 0:
        kk = translate(kernel, eps)
    elif kernel.rate_integrable_at_zero:
        kk = kernel
    else:
        raise ValueError("eps = 0 needs a modulus whose rate is integrable at 0")

    grid, dt = traj.grid, traj.dt
    J = traj.n_levels - 1
    u = traj.levels
    v = traj.velocities()
    times = traj.times

    g_now = kk.modulus(times)
    gdot_now = kk.modulus_dt(times)
    left_m, right_m = interval_weights(kk._modulus, kk._integral, J, dt)
    left_c, right_c = interval_weights(kk._modulus_dt, kk._modulus, J, dt)
    # constant kernel: moment weights are pure roundoff, skip the history sums
    weight_floor = 1e-13 * max(1.0, float(g_now[0]))
    memory_inert = (
        max(np.abs(left_m).max(initial=0.0), np.abs(right_m).max(initial=0.0))
        <= weight_floor
    )

    grad_sq = np.array([dirichlet_gradient_sq(grid, u[j]) for j in range(J + 1)])
    kinetic = np.array([0.5 * l2_space(grid, v[j]) ** 2 for j in range(J + 1)])
    elastic = 0.5 * g_now * grad_sq
    rate_modulus = 0.5 * gdot_now * grad_sq

    memory = np.zeros(J + 1)
    rate_curvature = np.zeros(J + 1)
    if not memory_inert:
        for j in range(1, J + 1):
            # phi(s_i) = |grad(u(t_j) - u(t_j - s_i))|^2, phi(0) = 0
            phi = np.empty(j + 1)
            phi[0] = 0.0
            for i in range(1, j + 1):
                phi[i] = dirichlet_gradient_sq(grid, u[j] - u[j - i])
            memory[j] = -0.5 * float(direct_weights(left_m, right_m, j) @ phi)
            rate_curvature[j] = -0.5 * float(direct_weights(left_c, right_c, j) @ phi)

    forcing_power = np.array(
        [
            inner_space(grid, _forcing_values(forcing, grid, times[j]), v[j])
            for j in range(J + 1)
        ]
    )

    stored = kinetic + elastic + memory
    residual = (stored[2:] - stored[:-2]) / (2 * dt) - (
        forcing_power[1:-1] + rate_modulus[1:-1] + rate_curvature[1:-1]
    )

    return EnergyLedger(
        times=times,
        kinetic=kinetic,
        elastic=elastic,
        memory=memory,
        rate_modulus=rate_modulus,
        rate_curvature=rate_curvature,
        forcing_power=forcing_power,
        stored=stored,
        residual=residual,
    )


@dataclass(frozen=True)
class DecayReport:
    passed: bool
    tolerance: float
    max_increase: float
    first_violation: int | None


def check_energy_decay(ledger: EnergyLedger, tol: float) -> DecayReport:
    """Unforced runs must not gain stored energy beyond the drift tolerance."""
    diffs = np.diff(ledger.stored)
    max_inc = float(np.max(diffs)) if diffs.size else 0.0
    bad = np.nonzero(diffs > tol)[0]
    return DecayReport(
        passed=bad.size == 0,
        tolerance=tol,
        max_increase=max_inc,
        first_violation=int(bad[0] + 1) if bad.size else None,
    )


def calibrate_decay_tolerance(spec: ProblemSpec, safety: float = 5.0) -> float:
    """Drift tolerance from a memory-free twin run at matched wave speed.

    Replaces the kernel by the constant G(eps): same grid, dt, and data, so
    the twin's worst per-step energy increase measures the pure
    discretization drift at this resolution.  Scales like dt^2 + h^2.
    """
    from memvisco.kernels import ConstantKernel

    twin = replace(spec, kernel=ConstantKernel(spec.kernel.modulus(spec.eps)), eps=1.0)
    ledger = energy_ledger(run_integrodiff(twin), twin.kernel, twin.eps, twin.forcing)
    drift = max(float(np.max(np.diff(ledger.stored))), 0.0)
    floor = 1e-13 * max(float(ledger.stored[0]), 1.0)
    return safety * drift + floor


# ---------------------------------------------------------------------------
# a-priori energy bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """gamma e^T C bound versus the discrete gradient + velocity energy."""

    passed: bool
    gamma: float
    data_constant: float
    bound: float
    lhs: np.ndarray
    max_ratio: float


def check_energy_bound(
    traj: TrajectorySolution,
    kernel: RelaxationKernel,
    eps: float,
    u1: Field,
    forcing=None,
    slack: float = 1e-9,
) -> BoundReport:
    """Check  0.5 |grad u|^2 + 0.5 |u_t|^2 <= gamma e^T C  at every level.

    gamma = max(1 / G(T + 1), 1) uses the unshifted modulus; requires
    eps <= 1 so the shifted modulus dominates G(T + 1) on the window.
    C = 0.5 |f|^2 (space-time) + 0.5 |u1|^2 (space).  Holds for zero
    initial displacement.
    """
    if eps > 1.0:
        raise ValueError(f"bound requires eps <= 1, got {eps}")
    grid, dt = traj.grid, traj.dt
    T = float(traj.times[-1])
    gamma = max(1.0 / kernel.modulus(T + 1.0), 1.0)

    f_levels = np.stack(
        [_forcing_values(forcing, grid, t) for t in traj.times]
    )
    c_data = 0.5 * l2_spacetime(grid, f_levels, dt) ** 2 + 0.5 * l2_space(grid, u1) ** 2
    bound = gamma * math.exp(T) * c_data

    v = traj.velocities()
    lhs = np.array(
        [
            0.5 * dirichlet_gradient_sq(grid, traj.levels[j])
            + 0.5 * l2_space(grid, v[j]) ** 2
            for j in range(traj.n_levels)
        ]
    )
    peak = float(np.max(lhs))
    if bound == 0.0:
        max_ratio = 0.0 if peak == 0.0 else math.inf
    else:
        max_ratio = peak / bound
    return BoundReport(
        passed=max_ratio <= 1.0 + slack,
        gamma=gamma,
        data_constant=c_data,
        bound=bound,
        lhs=lhs,
        max_ratio=max_ratio,
    )


# ---------------------------------------------------------------------------
# weak-form residual
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeTestFunction:
    """Separable test function: product of sine modes times a time profile.

    Vanishes on the box boundary for any positive mode numbers; the
    Laplacian is available analytically, which is what makes the
    integration-by-parts cross-check meaningful.
    """

    modes: tuple[int, ...]
    time_profile: str = "parabolic"  # parabolic | halfsine

    def __post_init__(self):
        if not all(isinstance(m, int) and m >= 1 for m in self.modes):
            raise ValueError("mode numbers must be positive integers")
        if self.time_profile not in ("parabolic", "halfsine"):
            raise ValueError(f"unknown time profile '{self.time_profile}'")

    @property
    def name(self) -> str:
        # no comma: the name lands in CSV columns as-is
        return f"modes={'x'.join(map(str, self.modes))} {self.time_profile}"

    def space_values(self, grid: Grid) -> np.ndarray:
        if len(self.modes) != grid.dim:
            raise ValueError("mode count does not match grid dimension")
        out = np.ones(grid.shape)
        for m, x, L in zip(self.modes, grid.mesh(), grid.extent):
            out = out * np.sin(m * np.pi * x / L)
        return out

    def space_boundary_max(self, grid: Grid) -> float:
        return 0.0  # sine products vanish identically on the box faces

    def laplace_factor(self, grid: Grid) -> float:
        return -sum((m * np.pi / L) ** 2 for m, L in zip(self.modes, grid.extent))

    def time_values(self, times: np.ndarray, horizon: float) -> np.ndarray:
        if self.time_profile == "parabolic":
            return 4.0 * times * (horizon - times) / horizon**2
        return np.sin(np.pi * times / horizon)

    def sup_laplacian(self, grid: Grid, horizon: float) -> float:
        return abs(self.laplace_factor(grid))  # time profiles peak at 1


def default_battery(grid: Grid) -> tuple[ModeTestFunction, ...]:
    if grid.dim == 1:
        mode_sets = [(1,), (2,), (3,)]
    else:
        mode_sets = [(1, 1, 1), (2, 1, 1), (1, 2, 1)]
    return tuple(
        ModeTestFunction(m, p) for m in mode_sets for p in ("parabolic", "halfsine")
    )


@dataclass(frozen=True)
class WeakResidualEntry:
    name: str
    direct: float  # memory term tested with the discrete laplacian of u
    moved: float  # memory term moved onto the test function


def weak_residual(
    traj: TrajectorySolution,
    kernel: RelaxationKernel,
    eps: float,
    u0: Field,
    u1: Field,
    forcing=None,
    battery=None,
) -> list[WeakResidualEntry]:
    """Integral-form defect tested against smooth battery functions.

    For each test function v the residual is

        int v (u - drive) dx dt,   drive = conv(Ksh, lap u) + u1 t + u0 + F2,

    once with the discrete Laplacian acting on u ('direct') and once with
    the convolution moved onto v via two integrations by parts ('moved').
    The two agree up to O(h^2) because the analytic Laplacian of v differs
    from the stencil by that amount.
    """
    grid, dt = traj.grid, traj.dt
    J = traj.n_levels - 1
    horizon = float(traj.times[-1])
    if battery is None:
        battery = default_battery(grid)
    for v in battery:
        if v.space_boundary_max(grid) > 1e-10:
            raise ValueError(f"test function {v.name} does not vanish on the boundary")

    kk = kernel if eps == 0.0 else translate(kernel, eps)
    left, right = interval_weights(kk._integral2, kk._integral3, J, dt)

    from memvisco.grid import laplacian_array

    lap = np.stack([laplacian_array(grid, traj.levels[j]) for j in range(J + 1)])
    flat = traj.levels.reshape(J + 1, -1)
    lap_flat = lap.reshape(J + 1, -1)

    conv_lap = np.zeros_like(flat)
    conv_u = np.zeros_like(flat)
    for j in range(1, J + 1):
        w = conv_weights(left, right, j)
        conv_lap[j] = w @ lap_flat[: j + 1]
        conv_u[j] = w @ flat[: j + 1]

    f_levels = np.stack([_forcing_values(forcing, grid, t) for t in traj.times])
    f_double = _cumulative_trapezoid(
        _cumulative_trapezoid(f_levels.reshape(J + 1, -1), dt), dt
    )
    ramp = (
        np.outer(traj.times, u1.values.ravel())
        + u0.values.ravel()[None, :]
        + f_double
    )

    defect_direct = flat - conv_lap - ramp
    defect_rest = flat - ramp

    wt = trapezoid_weights(J + 1, dt)
    vol = grid.cell_volume
    out = []
    for v in battery:
        vx = v.space_values(grid).ravel()
        vt = v.time_values(traj.times, horizon)
        lam = v.laplace_factor(grid)
        direct = vol * float(np.dot(wt * vt, defect_direct @ vx))
        moved = vol * float(
            np.dot(wt * vt, defect_rest @ vx) - lam * np.dot(wt * vt, conv_u @ vx)
        )
        out.append(WeakResidualEntry(name=v.name, direct=direct, moved=moved))
    return out
