"""Shared test utilities: oracles, random generators, validation bypasses."""

from __future__ import annotations

import numpy as np

from memvisco.grid import Grid, trapezoid_weights
from memvisco.kernels import (
    ConstantKernel,
    KernelSum,
    PowerLawKernel,
    PronyKernel,
)
from memvisco.solver import ProblemSpec

# Populated by the acceptance tests, printed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def record(num: int, name: str, passed: bool, detail: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    line = f"criterion {num:02d} {name}: {verdict} ({detail})"
    ACCEPTANCE_LINES.append(line)
    assert passed, line


def unchecked_prony(g_inf: float, terms) -> PronyKernel:
    """Build a Prony kernel without invariant checks (negative controls)."""
    kernel = object.__new__(PronyKernel)
    object.__setattr__(kernel, "g_inf", float(g_inf))
    object.__setattr__(kernel, "terms", tuple((float(g), float(t)) for g, t in terms))
    return kernel


def random_prony(rng: np.random.Generator) -> PronyKernel:
    n_terms = int(rng.integers(1, 4))
    terms = tuple(
        (float(rng.uniform(0.05, 0.8)), float(rng.uniform(0.2, 3.0)))
        for _ in range(n_terms)
    )
    return PronyKernel(g_inf=float(rng.uniform(0.05, 1.0)), terms=terms)


def random_kernel(rng: np.random.Generator):
    """Admissible kernel from any family, weighted toward memory kernels."""
    kind = int(rng.integers(0, 4))
    if kind == 0:
        return ConstantKernel(float(rng.uniform(0.3, 2.0)))
    if kind == 1:
        return random_prony(rng)
    if kind == 2:
        return PowerLawKernel(
            c=float(rng.uniform(0.3, 1.5)), alpha=float(rng.uniform(0.15, 0.85))
        )
    return KernelSum(
        (
            PronyKernel(
                g_inf=float(rng.uniform(0.05, 0.5)),
                terms=((float(rng.uniform(0.1, 0.5)), float(rng.uniform(0.5, 2.0))),),
            ),
            PowerLawKernel(
                c=float(rng.uniform(0.2, 0.8)), alpha=float(rng.uniform(0.2, 0.8))
            ),
        )
    )


def prony_history_moment(kernel: PronyKernel, eps: float, t) -> np.ndarray:
    """Closed form of int_0^t d/dxi[G](eps+s) * (1+(t-s)^2) ds."""
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    for g, tau in kernel.terms:
        a = 1.0 / tau
        head = -np.expm1(-a * t) / a
        tail = t**2 / a - 2 * t / a**2 + 2 / a**3 - 2 * np.exp(-a * t) / a**3
        total += -g * a * np.exp(-eps * a) * (head + tail)
    return total


def manufactured_forcing(kernel: PronyKernel, eps: float):
    """Forcing that makes sin(pi x)(1+t^2) the exact solution in 1D."""
    g_eps = kernel.modulus(eps)

    def forcing(grid: Grid, t: float) -> np.ndarray:
        x = grid.axis_coordinates(0)
        moment = float(prony_history_moment(kernel, eps, t))
        return np.sin(np.pi * x) * (2.0 + np.pi**2 * (g_eps * (1 + t * t) + moment))

    return forcing


def manufactured_exact(grid: Grid, times: np.ndarray) -> np.ndarray:
    x = grid.axis_coordinates(0)
    return np.sin(np.pi * x)[None, :] * (1.0 + times**2)[:, None]


def l2q_error(grid: Grid, levels: np.ndarray, exact: np.ndarray, dt: float) -> float:
    diff = levels - exact
    per_level = np.sum(diff.reshape(len(levels), -1) ** 2, axis=1) * grid.cell_volume
    weights = trapezoid_weights(len(levels), dt)
    return float(np.sqrt(np.sum(weights * per_level)))


def unchecked_spec(**fields) -> ProblemSpec:
    """ProblemSpec without validation, for exercising solver abort paths."""
    spec = object.__new__(ProblemSpec)
    defaults = {
        "forcing": None,
        "formulation": "integrodifferential",
        "history_window": None,
    }
    for key, value in {**defaults, **fields}.items():
        object.__setattr__(spec, key, value)
    return spec
