"""Lyapunov and barrier functionals and their boundary-rate reductions.

``V = 1/2 int (u - u*)^2 dx`` measures distance to the target density and
``B = u_bar^2 - int u^2 dx`` is nonnegative on the safe set. Their time
derivatives reduce (up to nonpositive shock terms) to expressions in the two
boundary traces ``s = u(t, a)`` and ``z = u(t, b)``:

    g(s, z) = (s - u*) f(s) - (z - u*) f(z) - F(s) + F(z)
    k(s, z) = s f(s) - z f(z) - F(s) + F(z)

On smooth solutions ``dV/dt = g`` and ``dB/dt = -2 k``. The controllers
impose ``g <= -C`` with ``C = alpha(V)`` and ``k <= D`` with ``D = beta(B)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flux import FluxModel

_DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class ClassK:
    """Linear class-K function ``v -> gain * v``."""

    gain: float = 0.5
    form: str = "linear"

    def __post_init__(self):
        if not self.gain > 0:
            raise ValueError(f"class-K gain must be positive, got {self.gain}")
        if self.form != "linear":
            raise ValueError(f"unsupported class-K form {self.form!r}")

    def __call__(self, v):
        return self.gain * v


@dataclass(frozen=True)
class FunctionalSnapshot:
    t: float
    V: float
    B: float
    C: float
    D: float


def _cells(field):
    u = np.asarray(field.u, dtype=float)
    if u.size == 0:
        raise ValueError("empty density field")
    return u, field.grid.dx


def lyapunov_V(field, u_star: float) -> float:
    """Midpoint-rule ``1/2 sum (u_i - u*)^2 dx``."""
    u, dx = _cells(field)
    return 0.5 * float(np.sum((u - u_star) ** 2)) * dx


def barrier_B(field, u_bar: float) -> float:
    """Midpoint-rule ``u_bar^2 - sum u_i^2 dx``."""
    u, dx = _cells(field)
    return u_bar * u_bar - float(np.sum(u * u)) * dx


def _check_domain(model: FluxModel, *values):
    for v in values:
        arr = np.asarray(v, dtype=float)
        if np.any(arr < -_DOMAIN_TOL) or np.any(arr > model.u_max + _DOMAIN_TOL):
            raise ValueError(f"density outside [0, {model.u_max}]: {v}")


def rate_g(s, z, model: FluxModel, u_star: float):
    """Boundary-trace form of the Lyapunov rate; vectorizes over ``s`` and ``z``."""
    _check_domain(model, s, z)
    f, F = model.f, model.F
    return (s - u_star) * f(s) - (z - u_star) * f(z) - F(s) + F(z)


def rate_k(s, z, model: FluxModel):
    """Boundary-trace form of minus the barrier rate."""
    _check_domain(model, s, z)
    f, F = model.f, model.F
    return s * f(s) - z * f(z) - F(s) + F(z)


def decay_thresholds(V: float, B: float, alpha: ClassK, beta: ClassK) -> tuple[float, float]:
    """``(C, D) = (alpha(V), beta(max(B, 0)))``.

    A state already outside the safe set gets ``D = 0``, so the barrier
    constraint then asks for ``k <= 0``.
    """
    if V < 0:
        raise ValueError(f"V must be nonnegative, got {V}")
    return float(alpha(V)), float(beta(max(B, 0.0)))
