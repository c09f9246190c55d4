"""Relaxation-modulus families for materials with memory.

Every family exposes the modulus G(t), its first two time derivatives, and
the antiderivative tower

    integral(x)  = int_0^x G,
    integral2(x) = int_0^x integral,
    integral3(x) = int_0^x integral2,

all in closed form.  Closed forms keep the product-quadrature weights and
the admissibility checks free of numerical integration error, including
for moduli that blow up at t = 0 (power laws with exponent in (0, 1)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "KernelDomainError",
    "RelaxationKernel",
    "ConstantKernel",
    "PronyKernel",
    "PowerLawKernel",
    "KernelSum",
    "TranslatedKernel",
    "translate",
    "kernel_diff_bound",
    "AdmissibilityReport",
    "check_admissibility",
    "check_fading_memory",
    "IsotropicRelaxationTensor",
    "kernel_from_dict",
]


class KernelDomainError(ValueError):
    """Kernel evaluated outside its time domain."""


class RelaxationKernel:
    """Base interface: pointwise modulus calculus plus its integrals.

    Pointwise evaluations accept scalars or arrays and reject negative
    times; families that are unbounded at t = 0 also reject t = 0.  The
    integral tower is defined for all x >= 0 even in the unbounded case.
    """

    # -- analytic structure flags ------------------------------------

    @property
    def singular_at_zero(self) -> bool:
        raise NotImplementedError

    @property
    def value_at_inf(self) -> float:
        """Equilibrium modulus, lim G(t) for t -> infinity."""
        raise NotImplementedError

    @property
    def rate_integrable_at_zero(self) -> bool:
        """Whether dG/dt is integrable on (0, 1]."""
        raise NotImplementedError

    @property
    def integrable_on_halfline(self) -> bool:
        """Whether G is integrable on (0, infinity)."""
        raise NotImplementedError

    # -- raw closed forms, array-in/array-out ------------------------

    def _modulus(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _modulus_dt(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _modulus_dtt(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _integral(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _integral2(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _integral3(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- validated public evaluations --------------------------------

    def _check_time(self, arr: np.ndarray) -> None:
        if np.any(arr < 0.0):
            raise KernelDomainError("modulus is defined for t >= 0 only")
        if self.singular_at_zero and np.any(arr == 0.0):
            raise KernelDomainError(
                f"modulus is unbounded at t = 0 ({self._singular_part()}); "
                "evaluate at t > 0 or use a translated kernel"
            )

    def _singular_part(self) -> str:
        return "power-law part"

    def _eval(self, t, fn, check):
        arr = np.asarray(t, dtype=float)
        check(arr)
        out = fn(arr)
        return float(out) if np.ndim(t) == 0 else out

    def modulus(self, t):
        return self._eval(t, self._modulus, self._check_time)

    def modulus_dt(self, t):
        return self._eval(t, self._modulus_dt, self._check_time)

    def modulus_dtt(self, t):
        return self._eval(t, self._modulus_dtt, self._check_time)

    def _check_span(self, arr: np.ndarray) -> None:
        if np.any(arr < 0.0):
            raise KernelDomainError("integrated modulus is defined for x >= 0 only")

    def integral(self, x):
        return self._eval(x, self._integral, self._check_span)

    def integral2(self, x):
        return self._eval(x, self._integral2, self._check_span)

    def integral3(self, x):
        return self._eval(x, self._integral3, self._check_span)


@dataclass(frozen=True)
class ConstantKernel(RelaxationKernel):
    """G(t) = g0.  The purely elastic degenerate member of the family."""

    g0: float

    def __post_init__(self):
        if not (self.g0 > 0 and math.isfinite(self.g0)):
            raise ValueError(f"g0 must be positive and finite, got {self.g0}")

    @property
    def singular_at_zero(self) -> bool:
        return False

    @property
    def value_at_inf(self) -> float:
        return self.g0

    @property
    def rate_integrable_at_zero(self) -> bool:
        return True

    @property
    def integrable_on_halfline(self) -> bool:
        return False

    def _modulus(self, t):
        return np.full_like(t, self.g0)

    def _modulus_dt(self, t):
        return np.zeros_like(t)

    def _modulus_dtt(self, t):
        return np.zeros_like(t)

    def _integral(self, x):
        return self.g0 * x

    def _integral2(self, x):
        return self.g0 * x * x / 2.0

    def _integral3(self, x):
        return self.g0 * x**3 / 6.0


@dataclass(frozen=True)
class PronyKernel(RelaxationKernel):
    """G(t) = g_inf + sum_i g_i exp(-t / tau_i)."""

    g_inf: float
    terms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "terms", tuple((float(g), float(tau)) for g, tau in self.terms)
        )
        if not (self.g_inf >= 0 and math.isfinite(self.g_inf)):
            raise ValueError(f"g_inf must be finite and >= 0, got {self.g_inf}")
        for g, tau in self.terms:
            if not (g > 0 and math.isfinite(g)):
                raise ValueError(f"term weight must be positive and finite, got {g}")
            if not (tau > 0 and math.isfinite(tau)):
                raise ValueError(f"relaxation time must be positive and finite, got {tau}")
        if self.g_inf == 0 and not self.terms:
            raise ValueError("kernel would be identically zero")

    @property
    def singular_at_zero(self) -> bool:
        return False

    @property
    def value_at_inf(self) -> float:
        return self.g_inf

    @property
    def rate_integrable_at_zero(self) -> bool:
        return True

    @property
    def integrable_on_halfline(self) -> bool:
        return self.g_inf == 0.0

    def _modulus(self, t):
        out = np.full_like(t, self.g_inf)
        for g, tau in self.terms:
            out += g * np.exp(-t / tau)
        return out

    def _modulus_dt(self, t):
        out = np.zeros_like(t)
        for g, tau in self.terms:
            out -= (g / tau) * np.exp(-t / tau)
        return out

    def _modulus_dtt(self, t):
        out = np.zeros_like(t)
        for g, tau in self.terms:
            out += (g / tau**2) * np.exp(-t / tau)
        return out

    def _integral(self, x):
        out = self.g_inf * x
        for g, tau in self.terms:
            out += g * tau * (-np.expm1(-x / tau))
        return out

    def _integral2(self, x):
        out = self.g_inf * x * x / 2.0
        for g, tau in self.terms:
            out += g * tau * (x - tau * (-np.expm1(-x / tau)))
        return out

    def _integral3(self, x):
        out = self.g_inf * x**3 / 6.0
        for g, tau in self.terms:
            out += g * tau * (x * x / 2.0 - tau * x + tau**2 * (-np.expm1(-x / tau)))
        return out


@dataclass(frozen=True)
class PowerLawKernel(RelaxationKernel):
    """G(t) = c * t**(-alpha) with 0 < alpha < 1.

    Unbounded at t = 0, and dG/dt is not integrable near 0; still G is
    integrable on any finite window, which is what the integral tower and
    the solvers rely on.
    """

    c: float
    alpha: float

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"c must be positive and finite, got {self.c}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must be in (0,1), got {self.alpha}")

    @property
    def singular_at_zero(self) -> bool:
        return True

    @property
    def value_at_inf(self) -> float:
        return 0.0

    @property
    def rate_integrable_at_zero(self) -> bool:
        return False

    @property
    def integrable_on_halfline(self) -> bool:
        return False

    def _singular_part(self) -> str:
        return f"power-law part c={self.c}, alpha={self.alpha}"

    def _modulus(self, t):
        with np.errstate(divide="ignore"):
            return self.c * t ** (-self.alpha)

    def _modulus_dt(self, t):
        with np.errstate(divide="ignore"):
            return -self.alpha * self.c * t ** (-self.alpha - 1.0)

    def _modulus_dtt(self, t):
        with np.errstate(divide="ignore"):
            return self.alpha * (self.alpha + 1.0) * self.c * t ** (-self.alpha - 2.0)

    def _integral(self, x):
        a = 1.0 - self.alpha
        return self.c * x**a / a

    def _integral2(self, x):
        a = 1.0 - self.alpha
        return self.c * x ** (a + 1.0) / (a * (a + 1.0))

    def _integral3(self, x):
        a = 1.0 - self.alpha
        return self.c * x ** (a + 2.0) / (a * (a + 1.0) * (a + 2.0))


@dataclass(frozen=True)
class KernelSum(RelaxationKernel):
    """Sum of kernels; at most one power-law part so closed forms stay simple."""

    parts: tuple[RelaxationKernel, ...]

    def __post_init__(self):
        flat: list[RelaxationKernel] = []
        for p in self.parts:
            if isinstance(p, KernelSum):
                flat.extend(p.parts)
            elif isinstance(p, (ConstantKernel, PronyKernel, PowerLawKernel)):
                flat.append(p)
            else:
                raise ValueError(f"unsupported summand type {type(p).__name__}")
        if not flat:
            raise ValueError("sum needs at least one part")
        n_power = sum(isinstance(p, PowerLawKernel) for p in flat)
        if n_power > 1:
            raise ValueError(f"at most one power-law part allowed, got {n_power}")
        object.__setattr__(self, "parts", tuple(flat))

    @property
    def singular_at_zero(self) -> bool:
        return any(p.singular_at_zero for p in self.parts)

    @property
    def value_at_inf(self) -> float:
        return sum(p.value_at_inf for p in self.parts)

    @property
    def rate_integrable_at_zero(self) -> bool:
        return all(p.rate_integrable_at_zero for p in self.parts)

    @property
    def integrable_on_halfline(self) -> bool:
        return all(p.integrable_on_halfline for p in self.parts)

    def _singular_part(self) -> str:
        for p in self.parts:
            if p.singular_at_zero:
                return p._singular_part()
        return "none"

    def _sum(self, fn_name, arg):
        out = getattr(self.parts[0], fn_name)(arg)
        for p in self.parts[1:]:
            out = out + getattr(p, fn_name)(arg)
        return out

    def _modulus(self, t):
        return self._sum("_modulus", t)

    def _modulus_dt(self, t):
        return self._sum("_modulus_dt", t)

    def _modulus_dtt(self, t):
        return self._sum("_modulus_dtt", t)

    def _integral(self, x):
        return self._sum("_integral", x)

    def _integral2(self, x):
        return self._sum("_integral2", x)

    def _integral3(self, x):
        return self._sum("_integral3", x)


@dataclass(frozen=True)
class TranslatedKernel(RelaxationKernel):
    """The shifted kernel t -> G(eps + t), bounded at t = 0 for eps > 0.

    The integral tower is re-based so that integral(0) = 0:

        integral(x)  = K(eps + x) - K(eps)
        integral2(x) = K2(eps + x) - K2(eps) - K(eps) x
        integral3(x) = K3(eps + x) - K3(eps) - K2(eps) x - K(eps) x^2 / 2

    with K, K2, K3 the tower of the base kernel.
    """

    base: RelaxationKernel
    eps: float

    def __post_init__(self):
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise KernelDomainError(f"shift must be positive and finite, got {self.eps}")
        if isinstance(self.base, TranslatedKernel):
            # collapse nested shifts
            object.__setattr__(self, "eps", self.eps + self.base.eps)
            object.__setattr__(self, "base", self.base.base)

    @property
    def singular_at_zero(self) -> bool:
        return False

    @property
    def value_at_inf(self) -> float:
        return self.base.value_at_inf

    @property
    def rate_integrable_at_zero(self) -> bool:
        return True

    @property
    def integrable_on_halfline(self) -> bool:
        return self.base.integrable_on_halfline

    def _modulus(self, t):
        return self.base._modulus(t + self.eps)

    def _modulus_dt(self, t):
        return self.base._modulus_dt(t + self.eps)

    def _modulus_dtt(self, t):
        return self.base._modulus_dtt(t + self.eps)

    def _integral(self, x):
        return self.base._integral(x + self.eps) - self.base._integral(
            np.asarray(self.eps, dtype=float)
        )

    def _integral2(self, x):
        e = np.asarray(self.eps, dtype=float)
        return (
            self.base._integral2(x + self.eps)
            - self.base._integral2(e)
            - self.base._integral(e) * x
        )

    def _integral3(self, x):
        e = np.asarray(self.eps, dtype=float)
        return (
            self.base._integral3(x + self.eps)
            - self.base._integral3(e)
            - self.base._integral2(e) * x
            - self.base._integral(e) * x * x / 2.0
        )


def translate(kernel: RelaxationKernel, eps: float) -> TranslatedKernel:
    """Shifted kernel G(eps + .) with a re-based integral tower."""
    return TranslatedKernel(kernel, float(eps))


def kernel_diff_bound(kernel: RelaxationKernel, eps: float, s) -> np.ndarray:
    """int_s^{s+eps} G(tau) dtau = K(s+eps) - K(s), per grid point.

    The quantity that controls how far the shifted problem sits from the
    unshifted one; nonincreasing in s, and -> 0 as eps -> 0.
    """
    if not eps > 0:
        raise KernelDomainError(f"shift must be positive, got {eps}")
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise KernelDomainError("grid points must be >= 0")
    out = kernel._integral(arr + eps) - kernel._integral(arr)
    return float(out) if np.ndim(s) == 0 else out


# ---------------------------------------------------------------------------
# admissibility and fading memory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityReport:
    """Sign conditions sampled on a log grid, plus analytic regime flags."""

    times: np.ndarray
    modulus_values: np.ndarray
    rate_values: np.ndarray
    curvature_values: np.ndarray
    modulus_positive: bool
    rate_nonpositive: bool
    curvature_nonnegative: bool
    bounded_at_zero: bool
    rate_integrable_at_zero: bool
    integrable_on_window: bool
    integrable_on_halfline: bool

    @property
    def passed(self) -> bool:
        return self.modulus_positive and self.rate_nonpositive and self.curvature_nonnegative

    @property
    def regime(self) -> str:
        """'classical' when the modulus is bounded at t = 0, else 'singular'."""
        return "classical" if self.bounded_at_zero else "singular"


def check_admissibility(
    kernel: RelaxationKernel, horizon: float, n_samples: int = 200
) -> AdmissibilityReport:
    """Sample G > 0, dG/dt <= 0, d2G/dt2 >= 0 on a log-spaced grid in (0, horizon].

    A failing kernel yields a failing report rather than an exception, so
    deliberately broken kernels can be inspected.
    """
    if not (horizon > 0 and math.isfinite(horizon)):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    times = np.geomspace(horizon * 1e-12, horizon, n_samples)
    g = kernel._modulus(times)
    gd = kernel._modulus_dt(times)
    gdd = kernel._modulus_dtt(times)
    return AdmissibilityReport(
        times=times,
        modulus_values=g,
        rate_values=gd,
        curvature_values=gdd,
        modulus_positive=bool(np.all(g > 0)),
        rate_nonpositive=bool(np.all(gd <= 0)),
        curvature_nonnegative=bool(np.all(gdd >= 0)),
        bounded_at_zero=not kernel.singular_at_zero,
        rate_integrable_at_zero=kernel.rate_integrable_at_zero,
        # G stays integrable on (0, horizon] for every family here; the
        # half-line question is the one that separates the families.
        integrable_on_window=True,
        integrable_on_halfline=kernel.integrable_on_halfline,
    )


def check_fading_memory(
    kernel: RelaxationKernel,
    history_norm_bound: float,
    tol: float,
    max_shift: float = 1e12,
) -> float:
    """Smallest shift a* past which bounded histories stop mattering.

    Uses the analytic tail int_a^inf |dG/dt| = G(a) - G(inf): returns the
    smallest a* with  history_norm_bound * (G(a*) - G(inf)) <= tol,  so any
    history bounded by history_norm_bound contributes less than tol beyond
    the shift.  Returns math.inf when no shift below max_shift achieves the
    tolerance.
    """
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if not history_norm_bound >= 0:
        raise ValueError("history bound must be nonnegative")
    g_inf = kernel.value_at_inf

    def tail(a: float) -> float:
        if a == 0.0 and kernel.singular_at_zero:
            return math.inf
        return history_norm_bound * (float(kernel._modulus(np.asarray(a, float))) - g_inf)

    lo = 1.0
    while tail(lo) <= tol:
        lo /= 2.0
        if lo < 1e-30:
            return 0.0
    hi = 2.0 * lo
    while tail(hi) > tol:
        hi *= 2.0
        if hi > max_shift:
            return math.inf
    return float(brentq(lambda a: tail(a) - tol, lo, hi, xtol=1e-15, rtol=8.9e-16))


# ---------------------------------------------------------------------------
# isotropic fourth-order form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsotropicRelaxationTensor:
    """Isotropic fourth-order relaxation form built from bulk/shear kernels.

    Acting on a symmetric 3x3 strain e at time t:

        apply(t, e) = lam(t) tr(e) I + 2 mu(t) e

    with mu the shear kernel and lam = bulk - (2/3) shear.  Minor and major
    symmetries hold by construction; the contraction apply(t,e):e is bounded
    below by coercivity_constant(t) * e:e.
    """

    bulk: RelaxationKernel
    shear: RelaxationKernel

    def lame_lambda(self, t: float) -> float:
        return self.bulk.modulus(t) - (2.0 / 3.0) * self.shear.modulus(t)

    def lame_mu(self, t: float) -> float:
        return self.shear.modulus(t)

    def apply(self, t: float, strain: np.ndarray) -> np.ndarray:
        e = np.asarray(strain, dtype=float)
        if e.shape != (3, 3):
            raise ValueError(f"strain must be 3x3, got shape {e.shape}")
        scale = max(1.0, float(np.max(np.abs(e))))
        if np.max(np.abs(e - e.T)) > 1e-12 * scale:
            raise ValueError("strain must be symmetric")
        lam = self.lame_lambda(t)
        mu = self.lame_mu(t)
        return lam * np.trace(e) * np.eye(3) + 2.0 * mu * e

    def coercivity_constant(self, t: float) -> float:
        """min(2 mu, 3 lam + 2 mu); positive whenever both kernels are."""
        lam = self.lame_lambda(t)
        mu = self.lame_mu(t)
        return min(2.0 * mu, 3.0 * lam + 2.0 * mu)


# ---------------------------------------------------------------------------
# construction from config mappings
# ---------------------------------------------------------------------------

_FAMILIES = ("constant", "prony", "powerlaw", "sum")


def kernel_from_dict(spec: dict) -> RelaxationKernel:
    """Build a kernel from a {'family': ..., ...} mapping (config layer)."""
    if "family" not in spec:
        raise ValueError("kernel mapping needs a 'family' key")
    family = str(spec["family"]).lower()
    known = {k for k in spec if k != "family"}

    def require(*names):
        missing = [n for n in names if n not in spec]
        if missing:
            raise ValueError(f"{family} kernel needs keys: {', '.join(missing)}")
        extra = known - set(names)
        if extra:
            raise ValueError(f"{family} kernel got unknown keys: {', '.join(sorted(extra))}")

    if family == "constant":
        require("g0")
        return ConstantKernel(g0=float(spec["g0"]))
    if family == "prony":
        require("g_inf", "terms")
        terms = tuple((float(g), float(tau)) for g, tau in spec["terms"])
        return PronyKernel(g_inf=float(spec["g_inf"]), terms=terms)
    if family == "powerlaw":
        require("c", "alpha")
        return PowerLawKernel(c=float(spec["c"]), alpha=float(spec["alpha"]))
    if family == "sum":
        require("parts")
        return KernelSum(parts=tuple(kernel_from_dict(p) for p in spec["parts"]))
    raise ValueError(f"unknown kernel family '{family}'; valid: {', '.join(_FAMILIES)}")
