"""First-order Godunov finite volumes for ``u_t + f(u)_x = 0`` on ``[a, b]``.

Boundary data enter through one ghost cell per side, so a prescribed boundary
value only takes effect when the local Riemann problem lets it in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .flux import FluxModel

WAVE_SPEED_FLOOR = 1e-12
_RANGE_TOL = 1e-12


class CFLError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    a: float
    b: float
    n_cells: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if self.n_cells < 2:
            raise ValueError("need at least 2 cells")

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.a + (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass(frozen=True)
class DensityField:
    grid: Grid
    u: np.ndarray
    t: float = 0.0

    @property
    def mass(self) -> float:
        return float(np.sum(self.u)) * self.grid.dx


@dataclass(frozen=True)
class BoundaryInput:
    omega_a: float
    omega_b: float


def _check_range(model: FluxModel, *values):
    for v in values:
        arr = np.asarray(v, dtype=float)
        if np.any(arr < -_RANGE_TOL) or np.any(arr > model.u_max + _RANGE_TOL):
            raise ValueError(f"density outside [0, {model.u_max}]")


def demand(u, model: FluxModel):
    return model.f(np.minimum(u, model.u_hat))


def supply(u, model: FluxModel):
    return model.f(np.maximum(u, model.u_hat))


def godunov_flux(u_left, u_right, model: FluxModel, check: bool = True):
    """Exact Godunov flux ``min(demand(u_left), supply(u_right))`` for concave ``f``."""
    if check:
        _check_range(model, u_left, u_right)
    return np.minimum(demand(u_left, model), supply(u_right, model))


def max_wave_speed(field: DensityField, model: FluxModel, bc: Optional[BoundaryInput] = None) -> float:
    vals = [np.max(np.abs(model.f_prime(field.u)))]
    if bc is not None:
        vals.append(np.max(np.abs(model.f_prime(np.array([bc.omega_a, bc.omega_b])))))
    return max(float(max(vals)), WAVE_SPEED_FLOOR)


def cfl_dt(
    field: DensityField,
    model: FluxModel,
    cfl: float = 0.9,
    bc: Optional[BoundaryInput] = None,
    max_dt: float = math.inf,
) -> float:
    """Stable explicit step ``cfl dx / max |f'|``, capped at ``max_dt``."""
    if not 0 < cfl <= 1:
        raise ValueError(f"cfl must be in (0, 1], got {cfl}")
    return min(cfl * field.grid.dx / max_wave_speed(field, model, bc), max_dt)


def _update(u: np.ndarray, ghost_a: float, ghost_b: float, dt: float, dx: float, model: FluxModel):
    padded = np.concatenate(([ghost_a], u, [ghost_b]))
    fluxes = godunov_flux(padded[:-1], padded[1:], model, check=False)
    new = u - (dt / dx) * (fluxes[1:] - fluxes[:-1])
    return new, float(fluxes[0]), float(fluxes[-1])


def step(field: DensityField, bc: BoundaryInput, dt: float, model: FluxModel) -> DensityField:
    """One Godunov step with ghost cells ``omega_a`` / ``omega_b``."""
    new, _, _ = step_with_fluxes(field, bc, dt, model)
    return new


def step_with_fluxes(
    field: DensityField, bc: BoundaryInput, dt: float, model: FluxModel
) -> Tuple[DensityField, float, float]:
    """Like :func:`step` but also returns the boundary fluxes used (in, out)."""
    _check_range(model, bc.omega_a, bc.omega_b)
    limit = cfl_dt(field, model, 1.0, bc)
    if dt > limit * (1 + 1e-12):
        raise CFLError(f"dt={dt} exceeds CFL limit {limit}")
    u, f_in, f_out = _update(field.u, bc.omega_a, bc.omega_b, dt, field.grid.dx, model)
    return replace(field, u=u, t=field.t + dt), f_in, f_out


def riemann_exact(u_l: float, u_r: float, xi: float, model: FluxModel) -> float:
    """Self-similar entropy solution of the Riemann problem at ``xi = x / t``."""
    _check_range(model, u_l, u_r)
    if u_l == u_r:
        return u_l
    if u_l < u_r:
        speed = float(model.f(u_r) - model.f(u_l)) / (u_r - u_l)
        return u_l if xi < speed else u_r
    # rarefaction: f' decreasing, so f'(u_l) < f'(u_r)
    lo_speed, hi_speed = float(model.f_prime(u_l)), float(model.f_prime(u_r))
    if xi <= lo_speed:
        return u_l
    if xi >= hi_speed:
        return u_r
    return brentq(lambda v: float(model.f_prime(v)) - xi, u_r, u_l, xtol=1e-13)


def interface_state(u_l, u_r, model: FluxModel):
    """Riemann solution on ``x = 0``, vectorized; equals ``riemann_exact(u_l, u_r, 0)``.

    Its flux is the Godunov flux, so this is the density an interface admits.
    """
    u_l, u_r = np.broadcast_arrays(np.asarray(u_l, dtype=float), np.asarray(u_r, dtype=float))
    shock = u_l <= u_r
    w_shock = np.where(model.f(u_r) > model.f(u_l), u_l, u_r)
    w_fan = np.where(
        model.f_prime(u_l) >= 0, u_l, np.where(model.f_prime(u_r) <= 0, u_r, model.u_hat)
    )
    out = np.where(shock, w_shock, w_fan)
    return out if out.ndim else float(out)


def initial_profile(kind: str, grid: Grid, model: FluxModel, **params) -> DensityField:
    """Cell averages by midpoint sampling.

    ``paper_sinusoid``: ``0.1 - 0.1 sin(pi x)``; ``constant``: ``value``;
    ``riemann``: ``u_l`` left of ``x0`` (default 0), ``u_r`` right of it.
    """
    x = grid.centers
    if kind == "paper_sinusoid":
        u = 0.1 - 0.1 * np.sin(np.pi * x)
    elif kind == "constant":
        u = np.full(grid.n_cells, float(params.get("value", 0.0)))
    elif kind == "riemann":
        x0 = float(params.get("x0", 0.0))
        u = np.where(x < x0, float(params["u_l"]), float(params["u_r"]))
    else:
        raise ValueError(f"unknown initial profile {kind!r}")
    if np.any(u < 0) or np.any(u > model.u_max):
        raise ValueError(f"initial profile {kind!r} leaves [0, {model.u_max}]")
    return DensityField(grid, u.astype(float), 0.0)


def advance(
    field: DensityField,
    bc: BoundaryInput,
    duration: float,
    model: FluxModel,
    cfl: float = 0.9,
    max_dt: float = 0.015,
    free_a: bool = False,
    free_b: bool = False,
) -> Tuple[DensityField, float]:
    """Sub-cycle CFL-limited steps over ``duration`` with inputs held fixed.

    ``free_a`` / ``free_b`` replace the corresponding input by the adjacent
    cell (zero-gradient ghost) at every sub-step. Returns the new field and
    the net boundary inflow ``int (F_in - F_out) dt``.
    """
    t_end = field.t + duration
    remaining = duration
    net = 0.0
    while remaining > 0.0:
        cur = BoundaryInput(
            float(field.u[0]) if free_a else bc.omega_a,
            float(field.u[-1]) if free_b else bc.omega_b,
        )
        dt = cfl_dt(field, model, cfl, cur, max_dt)
        if dt >= remaining * (1 - 1e-12):
            dt = remaining
        field, f_in, f_out = step_with_fluxes(field, cur, dt, model)
        net += dt * (f_in - f_out)
        remaining = t_end - field.t
        if remaining < 1e-14 * max(1.0, abs(t_end)):
            break
    return replace(field, t=t_end), net
