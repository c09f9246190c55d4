"""Experiment orchestration and artifact output.

All data files are CSV with round-trip float formatting and no
timestamps, so identical configurations produce byte-identical outputs;
every file is written to a temporary name and atomically renamed.
"""

from __future__ import annotations

import csv
import json
import os
import time
from pathlib import Path

import numpy as np

from memvisco import __version__
from memvisco.config import ExperimentConfig
from memvisco.convergence import (
    cauchy_report,
    convergence_lemma_check,
    eps_schedule,
    run_eps_sequence,
)
from memvisco.diagnostics import (
    calibrate_decay_tolerance,
    check_energy_bound,
    check_energy_decay,
    default_battery,
    energy_ledger,
    weak_residual,
)
from memvisco.expressions import field_from_name
from memvisco.kernels import check_admissibility, check_fading_memory
from memvisco.solver import (
    CflViolation,
    ProblemSpec,
    SolverAbort,
    cfl_time_step,
    compute_stress,
    run,
)

__all__ = ["run_experiment"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    _write_atomic(path, "\n".join(lines) + "\n")


def _write_manifest(out_dir: Path, payload: dict) -> None:
    _write_atomic(out_dir / "manifest.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")


_PLOT_ENERGY = """\
#!/usr/bin/env python3
\"\"\"Plot the energy ledger produced by a single run.\"\"\"
import csv
from pathlib import Path

import matplotlib.pyplot as plt

rows = list(csv.DictReader(open(Path(__file__).parent / "energy.csv")))
t = [float(r["t"]) for r in rows]
fig, (ax0, ax1) = plt.subplots(2, 1, sharex=True, figsize=(7, 7))
for key in ("stored", "kinetic", "elastic", "memory"):
    ax0.plot(t, [float(r[key]) for r in rows], label=key)
ax0.set_ylabel("energy")
ax0.legend()
res = [(float(r["t"]), float(r["residual"])) for r in rows if r["residual"]]
if res:
    ax1.semilogy(*zip(*res), label="|balance residual|")
ax1.set_xlabel("t")
ax1.legend()
fig.savefig(Path(__file__).parent / "energy.png", dpi=150)
print("wrote energy.png")
"""

_PLOT_CONVERGENCE = """\
#!/usr/bin/env python3
\"\"\"Plot the shift-sequence distances on log-log axes.\"\"\"
import csv
from pathlib import Path

import matplotlib.pyplot as plt

rows = list(csv.DictReader(open(Path(__file__).parent / "convergence.csv")))
pairs = [(float(r["eps"]), float(r["distance_to_next"])) for r in rows if r["distance_to_next"]]
fig, ax = plt.subplots()
if pairs:
    ax.loglog(*zip(*pairs), "o-", label="successive distance")
sup = [(float(r["eps"]), float(r["kernel_sup_bound"])) for r in rows]
ax.loglog(*zip(*sup), "s--", label="kernel sup bound")
ax.set_xlabel("eps")
ax.legend()
fig.savefig(Path(__file__).parent / "convergence.png", dpi=150)
print("wrote convergence.png")
"""


def _resolve_dt(cfg: ExperimentConfig, eps_for_cfl: float) -> float:
    if cfg.dt is not None:
        return cfg.dt
    return cfl_time_step(cfg.grid, cfg.kernel, eps_for_cfl, cfg.cfl, cfg.horizon)


def _build_spec(cfg: ExperimentConfig, eps: float, dt: float) -> ProblemSpec:
    forcing = None if cfg.forcing is None or cfg.forcing.is_zero else cfg.forcing
    return ProblemSpec(
        kernel=cfg.kernel,
        grid=cfg.grid,
        horizon=cfg.horizon,
        dt=dt,
        eps=eps,
        u0=field_from_name(cfg.grid, cfg.u0_name, cfg.u0_params),
        u1=field_from_name(cfg.grid, cfg.u1_name, cfg.u1_params),
        forcing=forcing,
        formulation=cfg.formulation,
        history_window=cfg.history_window,
    )


def _export_trajectory(out_dir: Path, cfg: ExperimentConfig, traj) -> None:
    if cfg.export_format in ("csv", "both"):
        coords = traj.grid.node_coordinates()
        vel = traj.velocities()
        axis_names = ["x", "y", "z"][: traj.grid.dim]
        header = ["t", "node", *axis_names, "u", "u_t"]
        rows = []
        for j in range(0, traj.n_levels, cfg.snapshot_stride):
            flat_u = traj.levels[j].ravel()
            flat_v = vel[j].ravel()
            for node in range(coords.shape[0]):
                rows.append(
                    [traj.times[j], node, *coords[node], flat_u[node], flat_v[node]]
                )
        _write_csv(out_dir / "trajectory.csv", header, rows)
    if cfg.export_format in ("binary", "both"):
        np.save(out_dir / "trajectory.npy", traj.levels)
        np.save(out_dir / "times.npy", traj.times)


def _export_ledger(out_dir: Path, ledger) -> None:
    header = [
        "level",
        "t",
        "kinetic",
        "elastic",
        "memory",
        "rate_modulus",
        "rate_curvature",
        "forcing_power",
        "stored",
        "residual",
    ]
    n = ledger.times.size
    rows = []
    for j in range(n):
        res = ledger.residual[j - 1] if 1 <= j <= n - 2 else None
        rows.append(
            [
                j,
                ledger.times[j],
                ledger.kinetic[j],
                ledger.elastic[j],
                ledger.memory[j],
                ledger.rate_modulus[j],
                ledger.rate_curvature[j],
                ledger.forcing_power[j],
                ledger.stored[j],
                res,
            ]
        )
    _write_csv(out_dir / "energy.csv", header, rows)


def run_experiment(cfg: ExperimentConfig, out_dir, threads: int = 1) -> int:
    """Execute the configured mode; returns the process exit code."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    verdicts: dict = {}
    abort_info = None

    try:
        if cfg.mode == "single_run":
            exit_code = _run_single(cfg, out_dir, verdicts)
        elif cfg.mode == "eps_sequence":
            exit_code = _run_sequence(cfg, out_dir, verdicts, threads)
        elif cfg.mode == "admissibility":
            exit_code = _run_admissibility(cfg, out_dir, verdicts)
        else:
            exit_code = _run_stress(cfg, out_dir, verdicts)
    except (CflViolation, SolverAbort) as exc:
        abort_info = {"type": type(exc).__name__, "message": str(exc)}
        verdicts["aborted"] = True
        exit_code = 3

    manifest = {
        "tool": {"name": "memvisco", "version": __version__, "numpy": np.__version__},
        "mode": cfg.mode,
        "config": cfg.resolved,
        "defaults_applied": list(cfg.defaults_applied),
        "tolerances": cfg.tolerances,
        "threads": threads,
        "timing_seconds": round(time.perf_counter() - started, 6),
        "verdicts": verdicts,
        "abort": abort_info,
        "exit_code": exit_code,
    }
    _write_manifest(out_dir, manifest)
    return exit_code


def _run_single(cfg: ExperimentConfig, out_dir: Path, verdicts: dict) -> int:
    dt = _resolve_dt(cfg, cfg.eps)
    spec = _build_spec(cfg, cfg.eps, dt)
    traj = run(spec)
    _export_trajectory(out_dir, cfg, traj)
    verdicts["dt"] = dt
    verdicts["n_steps"] = spec.n_steps
    ok = True

    wants_ledger = (
        cfg.diagnostics["energy_ledger"]
        or cfg.diagnostics["energy_decay"]
    )
    if wants_ledger:
        ledger = energy_ledger(traj, cfg.kernel, cfg.eps, spec.forcing)
        _export_ledger(out_dir, ledger)
        _write_atomic(out_dir / "plot_energy.py", _PLOT_ENERGY)
        verdicts["max_energy_residual"] = ledger.max_residual
        if cfg.diagnostics["energy_decay"]:
            tol = calibrate_decay_tolerance(spec, cfg.tolerances["decay_safety"])
            decay = check_energy_decay(ledger, tol)
            verdicts["energy_decay"] = {
                "passed": decay.passed,
                "tolerance": decay.tolerance,
                "max_increase": decay.max_increase,
                "first_violation": decay.first_violation,
            }
            ok = ok and decay.passed

    if cfg.diagnostics["energy_bound"]:
        # The a priori estimate's data constant covers forcing and initial
        # velocity only, so it applies just to runs started from rest shape.
        if np.any(spec.u0.values != 0.0):
            verdicts["energy_bound"] = {"skipped": "nonzero initial displacement"}
        else:
            bound = check_energy_bound(
                traj, cfg.kernel, cfg.eps, spec.u1, spec.forcing
            )
            verdicts["energy_bound"] = {
                "passed": bound.passed,
                "gamma": bound.gamma,
                "bound": bound.bound,
                "max_ratio": bound.max_ratio,
            }
            ok = ok and bound.passed

    if cfg.diagnostics["weak_residual"]:
        entries = weak_residual(
            traj, cfg.kernel, cfg.eps, spec.u0, spec.u1, spec.forcing
        )
        _write_csv(
            out_dir / "weak_residuals.csv",
            ["test_function", "direct", "moved"],
            [[e.name, e.direct, e.moved] for e in entries],
        )
        worst = max(max(abs(e.direct), abs(e.moved)) for e in entries)
        verdicts["weak_residual_max"] = worst
        ok = ok and worst <= cfg.tolerances["weak_tol"]

    return 0 if ok else 1


def _run_sequence(cfg: ExperimentConfig, out_dir: Path, verdicts: dict, threads: int) -> int:
    eps_values = eps_schedule(cfg.eps0, cfg.ratio, cfg.count)
    dt = _resolve_dt(cfg, float(eps_values[-1]))
    base = _build_spec(cfg, float(eps_values[0]), dt)
    trajs = run_eps_sequence(base, cfg.eps0, cfg.ratio, cfg.count, threads=threads)
    report = cauchy_report(trajs, eps_values, cfg.kernel, cfg.tolerances["cauchy_tol"])

    rows = []
    for h, e in enumerate(eps_values):
        rows.append(
            [
                h,
                e,
                report.distances[h] if h < report.distances.size else None,
                report.tail_distances[h] if h < report.tail_distances.size else None,
                report.kernel_sup_bounds[h],
            ]
        )
    _write_csv(
        out_dir / "convergence.csv",
        ["h", "eps", "distance_to_next", "distance_to_finest", "kernel_sup_bound"],
        rows,
    )
    _write_atomic(out_dir / "plot_convergence.py", _PLOT_CONVERGENCE)
    verdicts["cauchy"] = {
        "passed": report.passed,
        "monotone": report.monotone,
        "fitted_rate": report.fitted_rate,
        "last_distance": float(report.distances[-1]),
        "tolerance": report.tolerance,
    }
    ok = report.passed
    print(
        f"cauchy verdict: monotone={report.monotone} "
        f"rate={report.fitted_rate:.4g} last_distance={report.distances[-1]:.4g} "
        f"passed={report.passed}"
    )

    if cfg.diagnostics["lemma_check"]:
        battery = default_battery(cfg.grid)
        entries = convergence_lemma_check(cfg.kernel, eps_values, battery, trajs)
        _write_csv(
            out_dir / "lemma.csv",
            ["eps", "test_function", "residual", "majorant"],
            [[e.eps, e.test_function, e.residual, e.majorant] for e in entries],
        )
        within = all(e.within for e in entries)
        verdicts["lemma_check"] = {"passed": within, "entries": len(entries)}
        ok = ok and within

    return 0 if ok else 1


def _run_admissibility(cfg: ExperimentConfig, out_dir: Path, verdicts: dict) -> int:
    report = check_admissibility(cfg.kernel, cfg.horizon, cfg.n_samples)
    _write_csv(
        out_dir / "admissibility.csv",
        ["t", "modulus", "modulus_dt", "modulus_dtt"],
        [
            [report.times[i], report.modulus_values[i], report.rate_values[i], report.curvature_values[i]]
            for i in range(report.times.size)
        ],
    )
    fade = check_fading_memory(cfg.kernel, history_norm_bound=1.0, tol=1e-3)
    verdicts["admissibility"] = {
        "passed": report.passed,
        "regime": report.regime,
        "modulus_positive": report.modulus_positive,
        "rate_nonpositive": report.rate_nonpositive,
        "curvature_nonnegative": report.curvature_nonnegative,
        "rate_integrable_at_zero": report.rate_integrable_at_zero,
        "integrable_on_window": report.integrable_on_window,
        "integrable_on_halfline": report.integrable_on_halfline,
        "fading_memory_shift_tol_1e-3": fade,
    }
    return 0 if report.passed else 1


def _run_stress(cfg: ExperimentConfig, out_dir: Path, verdicts: dict) -> int:
    dt = cfg.dt
    n = max(2, round(cfg.horizon / dt))
    times = dt * np.arange(n + 1)
    amp = cfg.strain_amplitude
    if cfg.strain == "step":
        history = np.full(n + 1, amp)
        past = 0.0
        reference = lambda t: cfg.kernel.modulus(t) * amp if t > 0 else None
    elif cfg.strain == "constant_forever":
        history = np.full(n + 1, amp)
        past = amp
        reference = lambda t: cfg.kernel.value_at_inf * amp
    else:  # ramp
        history = amp * times
        past = 0.0
        reference = lambda t: None

    form = "integrated" if cfg.kernel.singular_at_zero else "classical"
    rows = []
    worst = 0.0
    for j in range(1, n + 1):
        stress = compute_stress(cfg.kernel, history[: j + 1], dt, past, form=form)
        ref = reference(times[j])
        err = abs(stress - ref) if ref is not None else None
        if err is not None:
            worst = max(worst, err)
        rows.append([times[j], stress, ref, err])
    _write_csv(out_dir / "stress.csv", ["t", "stress", "reference", "abs_error"], rows)
    verdicts["stress"] = {"form": form, "max_abs_error": worst}
    return 0 if worst <= cfg.tolerances["stress_tol"] else 1
