"""Named closed-form initial data and forcing profiles.

Config files refer to these by name; everything vanishes on the Dirichlet
boundary except 'constant', which is intended for forcing terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from memvisco.grid import Field, Grid

__all__ = ["space_values", "field_from_name", "Forcing", "SPACE_NAMES", "FORCING_NAMES"]

SPACE_NAMES = ("zero", "constant", "sin_pi_product", "sine_mode", "bump")
FORCING_NAMES = ("zero", "constant", "sin_pi_product")


def _sin_product(grid: Grid, modes: tuple[int, ...]) -> np.ndarray:
    out = np.ones(grid.shape)
    for axis, (x, L) in enumerate(zip(grid.mesh(), grid.extent)):
        out = out * np.sin(modes[axis] * np.pi * x / L)
    return out


def _normalize_modes(grid: Grid, modes) -> tuple[int, ...]:
    if modes is None:
        return (1,) * grid.dim
    if np.ndim(modes) == 0:
        return (int(modes),) * grid.dim
    modes = tuple(int(m) for m in modes)
    if len(modes) != grid.dim:
        raise ValueError(f"need {grid.dim} mode numbers, got {len(modes)}")
    return modes


def space_values(grid: Grid, name: str, params: dict | None = None) -> np.ndarray:
    params = dict(params or {})
    if name == "zero":
        _reject_extras(name, params)
        return np.zeros(grid.shape)
    if name == "constant":
        value = float(params.pop("value", 1.0))
        _reject_extras(name, params)
        return np.full(grid.shape, value)
    if name == "sin_pi_product":
        amplitude = float(params.pop("amplitude", 1.0))
        _reject_extras(name, params)
        return amplitude * _sin_product(grid, (1,) * grid.dim)
    if name == "sine_mode":
        amplitude = float(params.pop("amplitude", 1.0))
        modes = _normalize_modes(grid, params.pop("modes", None))
        _reject_extras(name, params)
        return amplitude * _sin_product(grid, modes)
    if name == "bump":
        amplitude = float(params.pop("amplitude", 1.0))
        center = float(params.pop("center", 0.5))
        radius = float(params.pop("radius", 0.35))
        _reject_extras(name, params)
        r2 = np.zeros(grid.shape)
        for x, L in zip(grid.mesh(), grid.extent):
            r2 = r2 + ((x - center * L) / (radius * L)) ** 2
        out = np.zeros(grid.shape)
        inside = r2 < 1.0
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out
    raise ValueError(f"unknown space profile '{name}'; valid: {', '.join(SPACE_NAMES)}")


def _reject_extras(name: str, params: dict) -> None:
    if params:
        raise ValueError(f"profile '{name}' got unknown parameters: {', '.join(sorted(params))}")


def field_from_name(grid: Grid, name: str, params: dict | None = None) -> Field:
    return Field(grid, space_values(grid, name, params))


@dataclass(frozen=True)
class Forcing:
    """Space profile, optionally modulated in time by cos(omega t)."""

    name: str
    params: tuple[tuple[str, float], ...] = field(default=())

    def __post_init__(self):
        if self.name not in FORCING_NAMES:
            raise ValueError(
                f"unknown forcing '{self.name}'; valid: {', '.join(FORCING_NAMES)}"
            )
        object.__setattr__(
            self, "params", tuple(sorted((str(k), float(v)) for k, v in self.params))
        )

    @classmethod
    def from_dict(cls, name: str, params: dict | None = None) -> "Forcing":
        return cls(name, tuple((params or {}).items()))

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    def sample(self, grid: Grid, t: float) -> np.ndarray:
        params = dict(self.params)
        omega = params.pop("omega", 0.0)
        out = space_values(grid, self.name, params)
        if omega:
            out = out * np.cos(omega * t)
        return out
