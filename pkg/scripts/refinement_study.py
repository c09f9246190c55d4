#!/usr/bin/env python3
"""Space-time refinement study against the elastic standing wave.

With a constant modulus the exact solution is sin(pi x) cos(pi t); the
observed max-norm error should drop by about 4x per joint halving.
"""

import numpy as np

from memvisco.expressions import field_from_name
from memvisco.grid import Field, Grid
from memvisco.kernels import ConstantKernel
from memvisco.solver import ProblemSpec, cfl_time_step, run

if __name__ == "__main__":
    kernel = ConstantKernel(1.0)
    prev = None
    for n in (49, 99, 199, 399):
        grid = Grid.line(n)
        dt = cfl_time_step(grid, kernel, 1.0, 0.5, 1.0)
        spec = ProblemSpec(
            kernel=kernel,
            grid=grid,
            horizon=1.0,
            dt=dt,
            eps=1.0,
            u0=field_from_name(grid, "sin_pi_product", {"amplitude": 1.0}),
            u1=Field.zero(grid),
        )
        traj = run(spec)
        x = grid.axis_coordinates(0)
        exact = np.sin(np.pi * x)[None, :] * np.cos(np.pi * traj.times)[:, None]
        err = float(np.abs(traj.levels - exact).max())
        ratio = "" if prev is None else f"  ratio {prev / err:.2f}"
        print(f"n={n:4d}  dt={dt:.6f}  max error {err:.3e}{ratio}")
        prev = err
