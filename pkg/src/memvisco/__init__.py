"""Wave propagation with viscoelastic memory kernels.

Simulates the motion of a medium whose stress depends on the full strain
history through a relaxation modulus, including moduli that blow up at
time zero. Shifted-kernel runs, energy accounting, and shift-sequence
convergence studies are the main entry points.
"""

__version__ = "0.1.0"

from memvisco.grid import Field, Grid, GridMismatchError
from memvisco.kernels import (
    AdmissibilityReport,
    ConstantKernel,
    IsotropicRelaxationTensor,
    KernelDomainError,
    KernelSum,
    PowerLawKernel,
    PronyKernel,
    RelaxationKernel,
    TranslatedKernel,
    check_admissibility,
    check_fading_memory,
    kernel_diff_bound,
    kernel_from_dict,
    translate,
)
from memvisco.solver import (
    CflViolation,
    KernelUnboundedError,
    ProblemSpec,
    SolverAbort,
    TrajectorySolution,
    cfl_time_step,
    compute_stress,
    run,
    stable_time_step,
    trajectory_distance,
)

__all__ = [
    "__version__",
    "AdmissibilityReport",
    "CflViolation",
    "ConstantKernel",
    "Field",
    "Grid",
    "GridMismatchError",
    "IsotropicRelaxationTensor",
    "KernelDomainError",
    "KernelSum",
    "KernelUnboundedError",
    "PowerLawKernel",
    "ProblemSpec",
    "PronyKernel",
    "RelaxationKernel",
    "SolverAbort",
    "TrajectorySolution",
    "TranslatedKernel",
    "cfl_time_step",
    "check_admissibility",
    "check_fading_memory",
    "compute_stress",
    "kernel_diff_bound",
    "kernel_from_dict",
    "run",
    "stable_time_step",
    "trajectory_distance",
    "translate",
]
