"""Concave LWR flux functions and their convexity structure.

A flux ``f`` on ``[0, u_max]`` is admissible when it is C^2, strictly concave
and vanishes at both ends; it then has a unique maximizer ``u_hat``.

Besides the flux itself the controllers need two splittings of the density
domain, both driven by the sign of

    h_c(u) = (u - c) f''(u) + f'(u)

With ``c = u*`` the set ``h_c >= 0`` is where the Lyapunov rate is convex in
the left boundary value (``C_a``) and ``h_c <= 0`` where it is convex in the
right one (``C_b``). With ``c = 0`` the same construction gives the barrier
sets ``I_a`` and ``I_b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad
from scipy.optimize import brentq


Evaluator = Callable[[np.ndarray], np.ndarray]
Interval = Tuple[float, float]
IntervalSet = Tuple[Interval, ...]

BUILTIN_KINDS = ("greenshields", "sextic", "greenberg_log")

SCAN_POINTS = 2001
SPLIT_TOL = 1e-10


class FluxError(ValueError):
    """Raised when a flux cannot be built or violates the LWR assumptions."""


@dataclass(frozen=True)
class FluxModel:
    """An LWR flux with first and second derivatives and a primitive.

    All evaluators accept scalars or numpy arrays. ``F`` is normalized so that
    ``F(0) = 0``.
    """

    u_max: float
    f: Evaluator
    f_prime: Evaluator
    f_double_prime: Evaluator
    F: Evaluator
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    @cached_property
    def u_hat(self) -> float:
        return critical_density(self)

    @cached_property
    def f_max(self) -> float:
        return float(self.f(self.u_hat))

    def __repr__(self) -> str:
        extra = "".join(f", {k}={v!r}" for k, v in self.params.items())
        return f"FluxModel(kind={self.kind!r}, u_max={self.u_max!r}{extra})"


# ---------------------------------------------------------------------------
# construction


def _horner(poly: Polynomial) -> Evaluator:
    coefs = [float(c) for c in poly.coef[::-1]]

    # plain Horner keeps scalar calls in float arithmetic; arrays broadcast the same way
    def evaluate(u):
        if not isinstance(u, float):
            u = np.asarray(u, dtype=float)
        acc = 0.0 * u
        for c in coefs:
            acc = acc * u + c
        return acc

    return evaluate


def _polynomial_model(kind: str, poly: Polynomial, u_max: float, params: dict) -> FluxModel:
    d1 = poly.deriv()
    prim = poly.integ()  # lbnd=0, constant 0 -> F(0) = 0
    return FluxModel(
        u_max=u_max,
        f=_horner(poly),
        f_prime=_horner(d1),
        f_double_prime=_horner(d1.deriv()),
        F=_horner(prim),
        kind=kind,
        params=params,
    )


def _greenberg_model(u_max: float, eps: float) -> FluxModel:
    top = math.log(u_max + eps)

    def f(u):
        return u * (top - np.log(u + eps))

    def fp(u):
        return top - np.log(u + eps) - u / (u + eps)

    def fpp(u):
        w = u + eps
        return -1.0 / w - eps / (w * w)

    # with w = u + eps:  d/dw [w^2/2 ln w - w^2/4 - eps (w ln w - w)] = u ln(u + eps)
    def _h(w):
        lw = np.log(w)
        return 0.5 * w * w * lw - 0.25 * w * w - eps * (w * lw - w)

    h0 = float(_h(eps))

    def prim(u):
        return 0.5 * top * u * u - (_h(u + eps) - h0)

    return FluxModel(u_max, f, fp, fpp, prim, kind="greenberg_log", params={"epsilon": eps})


def construct_builtin(kind: str, u_max: float = 1.0, epsilon: Optional[float] = None) -> FluxModel:
    """Build one of the built-in fluxes and validate it.

    ``greenshields``: ``u (1 - u/u_max)``.
    ``sextic``: ``u (1 - u/u_max)(u^4 + 2u^3 + 3u^2 + 4u + 5)``.
    ``greenberg_log``: ``u log((u_max + eps) / (u + eps))``, needs ``epsilon > 0``.
    """
    if not u_max > 0:
        raise FluxError(f"u_max must be positive, got {u_max}")
    u_max = float(u_max)
    base = Polynomial([0.0, 1.0, -1.0 / u_max])  # u (1 - u/u_max)
    if kind == "greenshields":
        model = _polynomial_model(kind, base, u_max, {})
    elif kind == "sextic":
        model = _polynomial_model(kind, base * Polynomial([5.0, 4.0, 3.0, 2.0, 1.0]), u_max, {})
    elif kind == "greenberg_log":
        if epsilon is None or not epsilon > 0:
            raise FluxError(f"greenberg_log needs epsilon > 0, got {epsilon}")
        model = _greenberg_model(u_max, float(epsilon))
    else:
        raise FluxError(f"unknown flux kind {kind!r}; expected one of {BUILTIN_KINDS}")

    report = validate_flux(model)
    if not report.passed:
        raise FluxError(f"{kind} flux with u_max={u_max} is not admissible:\n{report}")
    return model


def _numeric_first(f: Evaluator, u_max: float) -> Evaluator:
    h = 1e-6 * u_max

    def fp(u):
        u = np.asarray(u, dtype=float)
        central = (f(u + h) - f(u - h)) / (2 * h)
        forward = (-3 * f(u) + 4 * f(u + h) - f(u + 2 * h)) / (2 * h)
        backward = (3 * f(u) - 4 * f(u - h) + f(u - 2 * h)) / (2 * h)
        return np.where(u - h < 0, forward, np.where(u + h > u_max, backward, central))

    return fp


def _numeric_second(f: Evaluator, u_max: float) -> Evaluator:
    h = 1e-4 * u_max

    def fpp(u):
        u = np.asarray(u, dtype=float)
        central = (f(u + h) - 2 * f(u) + f(u - h)) / (h * h)
        forward = (2 * f(u) - 5 * f(u + h) + 4 * f(u + 2 * h) - f(u + 3 * h)) / (h * h)
        backward = (2 * f(u) - 5 * f(u - h) + 4 * f(u - 2 * h) - f(u - 3 * h)) / (h * h)
        return np.where(u - h < 0, forward, np.where(u + h > u_max, backward, central))

    return fpp


def _quadrature_primitive(f: Evaluator) -> Evaluator:
    def scalar(x: float) -> float:
        return quad(lambda v: float(f(v)), 0.0, float(x), epsabs=1e-13, epsrel=1e-12, limit=200)[0]

    vec = np.vectorize(scalar, otypes=[float])

    def prim(u):
        out = vec(np.asarray(u, dtype=float))
        return out if out.ndim else float(out)

    return prim


def custom_flux(
    f: Evaluator,
    u_max: float,
    f_prime: Optional[Evaluator] = None,
    f_double_prime: Optional[Evaluator] = None,
    F: Optional[Evaluator] = None,
) -> FluxModel:
    """Wrap a user flux, filling missing derivatives and primitive numerically.

    No validation happens here; call :func:`validate_flux` on the result.
    """
    if not u_max > 0:
        raise FluxError(f"u_max must be positive, got {u_max}")

    def fv(u):
        return np.asarray(f(np.asarray(u, dtype=float)), dtype=float) * np.ones_like(u, dtype=float)

    return FluxModel(
        u_max=float(u_max),
        f=fv,
        f_prime=f_prime or _numeric_first(fv, u_max),
        f_double_prime=f_double_prime or _numeric_second(fv, u_max),
        F=F or _quadrature_primitive(fv),
        kind="custom",
    )


# ---------------------------------------------------------------------------
# validation


@dataclass
class Check:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: List[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"  [{mark}] {c.name:<22} residual={c.residual:.3e} {c.detail}".rstrip())
        return "\n".join(lines)


def validate_flux(model: FluxModel, samples: int = 1001) -> ValidationReport:
    """Check the LWR assumptions on a sample grid of ``[0, u_max]``.

    Never raises on a bad flux; failures are reported per check.
    """
    if samples < 10:
        raise ValueError("samples must be >= 10")
    um = model.u_max
    u = np.linspace(0.0, um, samples)
    checks = []

    with np.errstate(all="ignore"):
        ends = max(abs(float(model.f(0.0))), abs(float(model.f(um))))
        checks.append(Check("endpoint_zeros", ends <= 1e-12, ends))

        fpp = np.asarray(model.f_double_prime(u), dtype=float)
        worst = float(np.nanmax(fpp))
        checks.append(Check("strict_concavity", bool(np.all(fpp < 0)), worst, "max f''"))

        fp = np.asarray(model.f_prime(u), dtype=float)
        signs = np.sign(fp)
        nz = signs[signs != 0]
        changes = int(np.count_nonzero(np.diff(nz)))
        ok = changes == 1 and nz.size > 0 and nz[0] > 0 and nz[-1] < 0
        checks.append(Check("single_max", bool(ok), float(changes), "sign changes of f'"))

        h = 1e-5 * um
        inner = u[(u - h >= 0) & (u + h <= um)]
        fd = (np.asarray(model.f(inner + h)) - np.asarray(model.f(inner - h))) / (2 * h)
        res = float(np.nanmax(np.abs(fd - np.asarray(model.f_prime(inner))))) if inner.size else 0.0
        checks.append(Check("derivative_consistency", res <= 1e-5 * max(1.0, float(np.nanmax(np.abs(fp)))), res))

        step = 1e-4 * um
        inner = u[(u - step >= 0) & (u + step <= um)]
        fd = (np.asarray(model.F(inner + step)) - np.asarray(model.F(inner - step))) / (2 * step)
        res = float(np.nanmax(np.abs(fd - np.asarray(model.f(inner))))) if inner.size else 0.0
        checks.append(Check("primitive_consistency", res <= 1e-6, res))

    for c in checks:
        if not math.isfinite(c.residual):
            c.passed = False
    return ValidationReport(checks)


# ---------------------------------------------------------------------------
# structure


def critical_density(model: FluxModel) -> float:
    """The maximizer ``u_hat`` of ``f`` on ``(0, u_max)``."""
    if model.kind == "greenshields":
        return 0.5 * model.u_max
    fp = lambda v: float(model.f_prime(v))
    lo, hi = 0.0, model.u_max
    if not (fp(lo) > 0 > fp(hi)):
        raise FluxError("f' has no sign change on [0, u_max]; flux has no interior maximizer")
    return brentq(fp, lo, hi, xtol=1e-15)


@dataclass(frozen=True)
class IntervalPartition:
    """Split of ``[0, u_max]`` by the sign of ``(u - c) f''(u) + f'(u)``.

    ``left_set`` holds the intervals where the expression is ``>= 0`` and
    ``right_set`` those where it is ``<= 0``; shared endpoints belong to both.
    """

    shift_c: float
    left_set: IntervalSet
    right_set: IntervalSet
    split_point: Optional[float]

    def in_left(self, u: float, tol: float = 1e-9) -> bool:
        return in_intervals(u, self.left_set, tol)

    def in_right(self, u: float, tol: float = 1e-9) -> bool:
        return in_intervals(u, self.right_set, tol)


def in_intervals(u: float, intervals: Sequence[Interval], tol: float = 1e-9) -> bool:
    return any(lo - tol <= u <= hi + tol for lo, hi in intervals)


def interval_subset(inner: Sequence[Interval], outer: Sequence[Interval], tol: float = 1e-9) -> bool:
    """True when every interval of ``inner`` sits inside one interval of ``outer``."""
    return all(any(olo - tol <= lo and hi <= ohi + tol for olo, ohi in outer) for lo, hi in inner)


def _merge(pieces: List[Interval]) -> IntervalSet:
    out: List[Interval] = []
    for lo, hi in pieces:
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(hi, out[-1][1]))
        else:
            out.append((lo, hi))
    return tuple(out)


def convexity_split(model: FluxModel, shift_c: float = 0.0, scan_points: int = SCAN_POINTS) -> IntervalPartition:
    """Partition ``[0, u_max]`` by the sign of ``(u - shift_c) f'' + f'``.

    ``shift_c = u*`` yields ``(C_a, C_b)``, ``shift_c = 0`` yields ``(I_a, I_b)``.
    Sign changes are found on a uniform scan and polished by bisection.
    """
    um = model.u_max
    if not 0.0 <= shift_c <= um:
        raise FluxError(f"shift_c={shift_c} outside [0, {um}]")

    def h(v):
        return (v - shift_c) * model.f_double_prime(v) + model.f_prime(v)

    hs = lambda v: float(h(v))
    x = np.linspace(0.0, um, max(scan_points, 1000))
    hx = np.asarray(h(x), dtype=float)

    roots: List[float] = [float(v) for v in x[1:-1][hx[1:-1] == 0.0]]
    for i in np.flatnonzero(hx[:-1] * hx[1:] < 0.0):
        roots.append(brentq(hs, float(x[i]), float(x[i + 1]), xtol=SPLIT_TOL))
    roots.sort()

    cuts = [0.0] + roots + [um]
    left, right = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        mid = hs(0.5 * (lo + hi))
        if mid >= 0.0:
            left.append((lo, hi))
        if mid <= 0.0:
            right.append((lo, hi))
    left_set, right_set = _merge(left), _merge(right)

    if not left_set or not right_set:
        if hs(0.0) * hs(um) > 0.0 or not (left_set or right_set):
            raise FluxError(f"degenerate convexity split for shift_c={shift_c}: 0 and u_max on the same side")

    split = None
    if len(left_set) == 1 and len(right_set) == 1 and left_set[0][0] == 0.0 and right_set[0][1] == um:
        if left_set[0][1] == right_set[0][0]:
            split = left_set[0][1]
    return IntervalPartition(float(shift_c), left_set, right_set, split)
