"""Linear diffusion processes and their scale/variance functions.

All processes share the variance-exploding diffusion coefficient
``g(t) = sqrt(c) * k**t`` and differ in their drift:

* ``ouve`` -- Ornstein-Uhlenbeck drift ``gamma * (y - x)`` toward the noisy
  signal.  Shifting the state by ``x~ = x - y`` turns it into the linear form
  ``dx~ = -gamma * x~ dt + g dw``, so it is handled as a linear SDE with
  ``f(t) = -gamma`` and the mean is re-centred afterwards.
* ``sbve`` -- zero drift (``f = 0``), used by the Schroedinger bridge.
* ``linear`` -- generic drift ``f(t) * x`` with ``f`` given as a table of
  samples on ``[0, 1]`` (linearly interpolated) or as a callable.

For a linear SDE ``dx = f(t) x dt + g(t) dw`` the solution is
``x(t) = alpha(t) * (x(0) + beta(t))`` with ``alpha(t) = exp(int_0^t f)`` and
``beta`` a zero-mean Ito integral, so the marginal variance is
``alpha(t)**2 * int_0^t g(s)**2 / alpha(s)**2 ds``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DomainError, NumericError

__all__ = [
    "DiffusionCoeff",
    "ProcessSpec",
    "TimeGrid",
    "DEFAULT_GAMMA",
    "DEFAULT_K",
    "DEFAULT_C",
    "adaptive_simpson",
    "g_of",
    "f_of",
    "alpha_of",
    "sigma2_of",
    "sigma2_integral",
    "make_grid",
]

DEFAULT_GAMMA = 1.5
DEFAULT_K = 10.0
# sigma_min = 0.05 expressed as the scale of g(t) = sqrt(c) k^t
DEFAULT_C = 0.05**2 * 2.0 * math.log(10.0)

QUAD_ABS_TOL = 1e-10
QUAD_REL_TOL = 1e-13
QUAD_MAX_DEPTH = 40


@dataclass(frozen=True)
class DiffusionCoeff:
    """``g(t) = sqrt(c) * k**t``.

    ``c = 0`` is accepted as the deterministic limit (``g == 0``); it is only
    meaningful for ODE-limit checks.
    """

    c: float = DEFAULT_C
    k: float = DEFAULT_K

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c >= 0):
            raise DomainError(f"c must be >= 0, got {self.c}")
        if not (np.isfinite(self.k) and self.k > 1):
            raise DomainError(f"k must be > 1, got {self.k}")

    @property
    def log_k(self) -> float:
        return math.log(self.k)


FTable = tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class ProcessSpec:
    """Drift/diffusion definition of one of the supported processes."""

    kind: str = "ouve"
    gamma: float = DEFAULT_GAMMA
    coeff: DiffusionCoeff = field(default_factory=DiffusionCoeff)
    f_table: Optional[FTable] = None
    f_func: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.kind not in ("ouve", "sbve", "linear"):
            raise DomainError(f"unknown process kind {self.kind!r}")
        if self.kind == "ouve" and not (np.isfinite(self.gamma) and self.gamma > 0):
            raise DomainError(f"OUVE requires gamma > 0, got {self.gamma}")
        if self.kind == "linear":
            if (self.f_table is None) == (self.f_func is None):
                raise DomainError("linear process needs exactly one of f_table or f_func")
            if self.f_table is not None:
                nodes, values = (np.asarray(a, dtype=float) for a in self.f_table)
                if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 2:
                    raise DomainError("f_table must be two 1-D arrays of equal length >= 2")
                if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(values))):
                    raise DomainError("f_table must be finite")
                if np.any(np.diff(nodes) <= 0) or nodes[0] > 0 or nodes[-1] < 1:
                    raise DomainError("f_table nodes must be increasing and cover [0, 1]")
                object.__setattr__(self, "f_table", (nodes, values))

    @classmethod
    def ouve(cls, gamma: float = DEFAULT_GAMMA, c: float = DEFAULT_C, k: float = DEFAULT_K) -> "ProcessSpec":
        return cls("ouve", gamma, DiffusionCoeff(c, k))

    @classmethod
    def sbve(cls, c: float = DEFAULT_C, k: float = DEFAULT_K) -> "ProcessSpec":
        return cls("sbve", 0.0, DiffusionCoeff(c, k))

    @classmethod
    def linear(
        cls,
        f: Union[Callable[[float], float], FTable, float],
        c: float = DEFAULT_C,
        k: float = DEFAULT_K,
    ) -> "ProcessSpec":
        """Generic linear drift.  A float ``f`` builds a constant table."""
        if callable(f):
            return cls("linear", 0.0, DiffusionCoeff(c, k), f_func=f)
        if np.isscalar(f):
            f = (np.array([0.0, 1.0]), np.array([float(f), float(f)]))
        return cls("linear", 0.0, DiffusionCoeff(c, k), f_table=tuple(f))

    @property
    def c(self) -> float:
        return self.coeff.c

    @property
    def k(self) -> float:
        return self.coeff.k

    # dataclass eq/hash choke on ndarray fields
    def __eq__(self, other):
        if not isinstance(other, ProcessSpec):
            return NotImplemented
        if (self.kind, self.gamma, self.coeff, self.f_func) != (
            other.kind, other.gamma, other.coeff, other.f_func
        ):
            return False
        if self.f_table is None or other.f_table is None:
            return self.f_table is other.f_table
        return all(np.array_equal(a, b) for a, b in zip(self.f_table, other.f_table))

    __hash__ = object.__hash__


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_min = t_0 < ... < t_N = 1``."""

    n_steps: int
    t_min: float = 0.0

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not (0.0 <= self.t_min < 1.0):
            raise DomainError(f"t_min must lie in [0, 1), got {self.t_min}")

    @property
    def t_max(self) -> float:
        return 1.0

    @property
    def times(self) -> np.ndarray:
        ts = self.t_min + (1.0 - self.t_min) * np.arange(self.n_steps + 1) / self.n_steps
        ts[0], ts[-1] = self.t_min, 1.0
        return ts

    def __len__(self) -> int:
        return self.n_steps + 1


def make_grid(n_steps: int, t_min: float = 0.0) -> TimeGrid:
    return TimeGrid(n_steps, t_min)


def _check_time(t):
    ta = np.asarray(t, dtype=float)
    if not np.all((ta >= 0.0) & (ta <= 1.0)):
        raise DomainError(f"time must lie in [0, 1], got {t}")
    return ta


def adaptive_simpson(
    fn: Callable[[float], float],
    a: float,
    b: float,
    abs_tol: float = QUAD_ABS_TOL,
    rel_tol: float = QUAD_REL_TOL,
    max_depth: int = QUAD_MAX_DEPTH,
) -> float:
    """Adaptive Simpson quadrature with Richardson correction.

    The local tolerance is ``min(abs_tol, rel_tol * |estimate|)`` so small
    integrals are still resolved to high relative accuracy.
    """
    if a == b:
        return 0.0

    def val(x):
        v = float(fn(x))
        if not math.isfinite(v):
            raise NumericError(f"non-finite integrand value {v} at s={x}")
        return v

    fa, fm, fb = val(a), val(0.5 * (a + b)), val(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = min(abs_tol, rel_tol * abs(whole)) if whole != 0 else abs_tol

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = val(lm), val(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2, depth - 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2, depth - 1
        )

    return recurse(a, b, fa, fm, fb, whole, tol, max_depth)


def g_of(spec: ProcessSpec, t):
    """Diffusion coefficient ``sqrt(c) * k**t``."""
    ta = _check_time(t)
    out = math.sqrt(spec.c) * spec.k**ta
    return float(out) if out.ndim == 0 else out


def f_of(spec: ProcessSpec, t: float) -> float:
    """Scalar drift rate of the (shifted) linear form."""
    if spec.kind == "ouve":
        return -spec.gamma
    if spec.kind == "sbve":
        return 0.0
    if spec.f_func is not None:
        return float(spec.f_func(t))
    nodes, values = spec.f_table
    return float(np.interp(t, nodes, values))


def _int_f(spec: ProcessSpec, t: float) -> float:
    """``int_0^t f(s) ds`` for a scalar ``t``."""
    if spec.kind == "ouve":
        return -spec.gamma * t
    if spec.kind == "sbve":
        return 0.0
    if spec.f_func is not None:
        return adaptive_simpson(lambda s: f_of(spec, s), 0.0, t)
    # integral of the linear interpolant is exact via the trapezoid rule
    nodes, values = spec.f_table
    inner = nodes[(nodes > 0.0) & (nodes < t)]
    xs = np.concatenate(([0.0], inner, [t]))
    fs = np.interp(xs, nodes, values)
    return float(np.sum(0.5 * (fs[1:] + fs[:-1]) * np.diff(xs)))


def alpha_of(spec: ProcessSpec, t):
    """Scale ``alpha(t) = exp(int_0^t f(s) ds)``."""
    ta = _check_time(t)
    if spec.kind == "sbve":
        out = np.ones_like(ta)
    elif spec.kind == "ouve":
        out = np.exp(-spec.gamma * ta)
    else:
        out = np.vectorize(lambda s: math.exp(_int_f(spec, float(s))), otypes=[float])(ta)
        if not np.all(np.isfinite(out)):
            raise NumericError("alpha(t) is not finite")
    return float(out) if out.ndim == 0 else out


def _sigma2_integral_quad(spec: ProcessSpec, t: float, **quad_kw) -> float:
    c, k = spec.c, spec.k
    if spec.kind == "ouve":
        integrand = lambda s: c * k ** (2 * s) * math.exp(2 * spec.gamma * s)
    elif spec.kind == "sbve":
        integrand = lambda s: c * k ** (2 * s)
    else:
        integrand = lambda s: c * k ** (2 * s) * math.exp(-2.0 * _int_f(spec, s))
    return adaptive_simpson(integrand, 0.0, t, **quad_kw)


def sigma2_integral(spec: ProcessSpec, t, quadrature: bool = False):
    """Dimensionless variance ``int_0^t g(s)**2 / alpha(s)**2 ds``.

    This is the ``sigma_t**2`` that enters the bridge potentials.  Closed forms
    are used for ``ouve``/``sbve`` unless ``quadrature`` is set.
    """
    ta = _check_time(t)
    c, lk = spec.c, spec.coeff.log_k
    if quadrature or spec.kind == "linear":
        out = np.vectorize(lambda s: _sigma2_integral_quad(spec, float(s)), otypes=[float])(ta)
    elif spec.kind == "sbve":
        out = c * np.expm1(2.0 * lk * ta) / (2.0 * lk)
    else:
        rate = spec.gamma + lk
        out = c * np.expm1(2.0 * rate * ta) / (2.0 * rate)
    return float(out) if out.ndim == 0 else out


def sigma2_of(spec: ProcessSpec, t, quadrature: bool = False):
    """Marginal (perturbation-kernel) variance ``alpha(t)**2 * sigma2_integral``.

    For ``ouve`` this is ``c (k^{2t} - e^{-2 gamma t}) / (2 (gamma + ln k))``,
    for ``sbve`` ``c (k^{2t} - 1) / (2 ln k)``.
    """
    ta = _check_time(t)
    if quadrature or spec.kind == "linear":
        out = np.asarray(alpha_of(spec, ta)) ** 2 * np.asarray(sigma2_integral(spec, ta, quadrature=True))
    elif spec.kind == "sbve":
        out = np.asarray(sigma2_integral(spec, ta))
    else:
        c, lk, gm = spec.c, spec.coeff.log_k, spec.gamma
        # k^{2t} - e^{-2 gamma t} written via expm1 to avoid cancellation at small t
        out = c * np.exp(-2.0 * gm * ta) * np.expm1(2.0 * (gm + lk) * ta) / (2.0 * (gm + lk))
    return float(out) if np.ndim(out) == 0 else out

