"""Vanishing-shift studies: Cauchy distances, rates, kernel-swap residuals.

A geometric shift schedule eps_h = eps0 * ratio**h produces a family of
trajectories on a shared grid and time step; successive space-time
distances d_h must shrink, their log-log slope estimates the rate, and the
kernel-difference residual must sit below its analytic majorant at every
shift.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from memvisco.grid import trapezoid_weights
from memvisco.kernels import RelaxationKernel, kernel_diff_bound, translate
from memvisco.solver import (
    CflViolation,
    ProblemSpec,
    TrajectorySolution,
    conv_weights,
    interval_weights,
    run,
    stable_time_step,
    trajectory_distance,
)

__all__ = [
    "eps_schedule",
    "run_eps_sequence",
    "ConvergenceReport",
    "cauchy_report",
    "LemmaCheckEntry",
    "convergence_lemma_check",
]


def eps_schedule(eps0: float, ratio: float, count: int) -> np.ndarray:
    """Shifts eps0 * ratio**h for h = 0 .. count (count + 1 values)."""
    if not eps0 > 0:
        raise ValueError(f"eps0 must be positive, got {eps0}")
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    if count < 1:
        raise ValueError("need count >= 1")
    return eps0 * ratio ** np.arange(count + 1, dtype=float)


def run_eps_sequence(
    base: ProblemSpec,
    eps0: float,
    ratio: float,
    count: int,
    threads: int = 1,
) -> list[TrajectorySolution]:
    """Run the base problem at every shift of the schedule, shared dt.

    The time step must be stable at the smallest shift, where the
    instantaneous modulus peaks; that is checked up front so an infeasible
    dt fails before any work happens.
    """
    eps_values = eps_schedule(eps0, ratio, count)
    if base.formulation == "integrodifferential":
        limit = stable_time_step(base.grid, base.kernel.modulus(float(eps_values[-1])))
        if base.dt > limit * (1 + 1e-9):
            raise CflViolation(
                f"dt = {base.dt:.6g} unstable at the smallest shift "
                f"eps = {eps_values[-1]:.6g}; required dt <= {limit:.6g}"
            )
    specs = [replace(base, eps=float(e)) for e in eps_values]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, specs))
    return [run(s) for s in specs]


@dataclass(frozen=True)
class ConvergenceReport:
    """Successive distances, fitted rate, and kernel-difference bounds.

    passed is True when the distances decrease strictly and the last one
    sits below the tolerance; a run of exactly identical trajectories
    passes trivially (the shift machinery is the identity for constant
    kernels).
    """

    eps_values: np.ndarray
    distances: np.ndarray
    tail_distances: np.ndarray
    fitted_rate: float
    fit_intercept: float
    kernel_sup_bounds: np.ndarray
    monotone: bool
    first_nonmonotone: int | None
    tolerance: float
    passed: bool


def cauchy_report(
    trajectories: list[TrajectorySolution],
    eps_values,
    kernel: RelaxationKernel,
    tolerance: float,
) -> ConvergenceReport:
    eps_values = np.asarray(eps_values, dtype=float)
    if len(trajectories) < 3:
        raise ValueError(
            f"need at least 3 trajectories to assess a limit, got {len(trajectories)}"
        )
    if len(trajectories) != eps_values.size:
        raise ValueError("one shift value per trajectory required")

    d = np.array(
        [
            trajectory_distance(trajectories[h], trajectories[h + 1])
            for h in range(len(trajectories) - 1)
        ]
    )
    tail = np.array(
        [
            trajectory_distance(trajectories[h], trajectories[-1])
            for h in range(len(trajectories) - 1)
        ]
    )
    sup_bounds = np.array(
        [float(kernel_diff_bound(kernel, float(e), 0.0)) for e in eps_values]
    )

    all_zero = bool(np.all(d == 0.0))
    increases = np.nonzero(np.diff(d) >= 0.0)[0]
    monotone = increases.size == 0
    first_nonmonotone = None if monotone else int(increases[0]) + 1
    if all_zero or np.any(d == 0.0):
        rate, intercept = math.nan, math.nan
    else:
        rate, intercept = np.polyfit(np.log(eps_values[:-1]), np.log(d), 1)
    passed = all_zero or (monotone and float(d[-1]) <= tolerance)
    return ConvergenceReport(
        eps_values=eps_values,
        distances=d,
        tail_distances=tail,
        fitted_rate=float(rate),
        fit_intercept=float(intercept),
        kernel_sup_bounds=sup_bounds,
        monotone=monotone,
        first_nonmonotone=first_nonmonotone,
        tolerance=tolerance,
        passed=passed,
    )


# ---------------------------------------------------------------------------
# kernel-difference residual against its analytic majorant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LemmaCheckEntry:
    eps: float
    test_function: str
    residual: float
    majorant: float

    @property
    def within(self) -> bool:
        return abs(self.residual) <= self.majorant * (1 + 1e-9) + 1e-300


def convergence_lemma_check(
    kernel: RelaxationKernel,
    eps_values,
    battery,
    trajectories: list[TrajectorySolution],
) -> list[LemmaCheckEntry]:
    """Residual of swapping the shifted kernel for the unshifted one.

    For each shift and test function v:

        R = int_Q  lap v(x,t) * int_0^t [Ksh(s) - K(s)] u(t - s) ds  dx dt,

    where Ksh is the re-based integral of the shifted modulus; R must be
    dominated by  sup|lap v| * C * |Omega| * T * sup_s |Ksh - K|  with
    C = sup|u| / |Omega|.  Both sides vanish as the shift does, and both
    are exactly zero for constant kernels (the shift changes nothing).
    """
    eps_values = np.asarray(eps_values, dtype=float)
    if len(trajectories) != eps_values.size:
        raise ValueError("one shift value per trajectory required")

    out: list[LemmaCheckEntry] = []
    for e, traj in zip(eps_values, trajectories):
        grid, dt = traj.grid, traj.dt
        J = traj.n_levels - 1
        horizon = float(traj.times[-1])
        shifted = translate(kernel, float(e))

        def diff_antider(x, _s=shifted, _k=kernel):
            return _s._integral2(np.asarray(x, float)) - _k._integral2(
                np.asarray(x, float)
            )

        def diff_antider2(x, _s=shifted, _k=kernel):
            return _s._integral3(np.asarray(x, float)) - _k._integral3(
                np.asarray(x, float)
            )

        # sup_s |Ksh(s) - K(s)| on [0, horizon]: increasing in s, peak at s = horizon
        s_grid = np.linspace(0.0, horizon, 257)
        sup_diff = float(
            np.max(np.abs(shifted._integral(s_grid) - kernel._integral(s_grid)))
        )
        if sup_diff <= 1e-12 * max(1.0, float(kernel._integral(horizon))):
            # the shift changes nothing (constant kernel): identically zero
            for v in battery:
                out.append(LemmaCheckEntry(float(e), v.name, 0.0, 0.0))
            continue

        left, right = interval_weights(diff_antider, diff_antider2, J, dt)
        flat = traj.levels.reshape(J + 1, -1)
        conv = np.zeros_like(flat)
        for j in range(1, J + 1):
            conv[j] = conv_weights(left, right, j) @ flat[: j + 1]
        c_level = float(np.max(np.abs(traj.levels))) / grid.volume

        wt = trapezoid_weights(J + 1, dt)
        vol = grid.cell_volume
        for v in battery:
            vx = v.space_values(grid).ravel()
            vt = v.time_values(traj.times, horizon)
            lam = v.laplace_factor(grid)
            residual = vol * lam * float(np.dot(wt * vt, conv @ vx))
            majorant = (
                v.sup_laplacian(grid, horizon)
                * c_level
                * grid.volume
                * horizon
                * sup_diff
            )
            out.append(
                LemmaCheckEntry(
                    eps=float(e),
                    test_function=v.name,
                    residual=residual,
                    majorant=majorant,
                )
            )
    return out
