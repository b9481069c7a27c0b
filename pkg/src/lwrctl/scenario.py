"""Closed-loop scenarios: configuration, simulation loop and the per-step log."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Union

import numpy as np
import yaml

from .controller import ControlDecision, solve_left, solve_right, solve_two_input
from .flux import BUILTIN_KINDS, FluxModel, construct_builtin, convexity_split
from .functionals import ClassK, barrier_B, decay_thresholds, lyapunov_V, rate_g, rate_k
from .solver import BoundaryInput, DensityField, Grid, advance, initial_profile, interface_state

log = logging.getLogger(__name__)

MODES = ("left", "right", "two_input", "none")


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


@dataclass
class ScenarioConfig:
    flux: str = "greenshields"
    u_max: float = 1.0
    epsilon: float = 0.1
    u_star: float = 1.0 / 3.0
    u_bar: float = 0.25
    kappa_V: float = 0.5
    kappa_B: float = 0.5
    a: float = -1.0
    b: float = 1.0
    n_cells: int = 200
    t_end: float = 15.0
    control_period: float = 0.015
    controller_mode: str = "left"
    cfl: float = 0.9
    initial: Union[str, Dict[str, Any]] = "paper_sinusoid"
    snapshot_times: List[float] = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0])
    out_dir: str = "out"

    def validate(self) -> "ScenarioConfig":
        def bad(name, why):
            raise ConfigError(f"{name}: {why}")

        if self.flux not in BUILTIN_KINDS:
            bad("flux", f"must be one of {BUILTIN_KINDS}, got {self.flux!r}")
        if not self.u_max > 0:
            bad("u_max", "must be positive")
        if self.flux == "greenberg_log" and not self.epsilon > 0:
            bad("epsilon", "must be positive for greenberg_log")
        if not 0 <= self.u_star <= self.u_max:
            bad("u_star", f"must lie in [0, u_max={self.u_max}], got {self.u_star}")
        if not self.u_bar > 0:
            bad("u_bar", "must be positive")
        for name in ("kappa_V", "kappa_B"):
            if not getattr(self, name) > 0:
                bad(name, "must be positive")
        if not self.a < self.b:
            bad("b", f"domain needs a < b, got [{self.a}, {self.b}]")
        if self.n_cells < 2:
            bad("n_cells", "must be >= 2")
        if not self.control_period > 0:
            bad("control_period", "must be positive")
        if not self.t_end >= self.control_period:
            bad("t_end", "must be >= control_period")
        if self.controller_mode not in MODES:
            bad("controller_mode", f"must be one of {MODES}, got {self.controller_mode!r}")
        if not 0 < self.cfl <= 1:
            bad("cfl", "must be in (0, 1]")
        kind, _ = self.initial_spec()
        if kind not in ("paper_sinusoid", "constant", "riemann"):
            bad("initial", f"unknown profile {kind!r}")
        return self

    def initial_spec(self):
        if isinstance(self.initial, str):
            return self.initial, {}
        params = dict(self.initial)
        kind = params.pop("kind", None)
        if kind is None:
            raise ConfigError("initial: mapping form needs a 'kind' key")
        return kind, params

    def build_flux(self) -> FluxModel:
        eps = self.epsilon if self.flux == "greenberg_log" else None
        return construct_builtin(self.flux, self.u_max, eps)


_TYPES = {"n_cells": int, "flux": str, "controller_mode": str, "out_dir": str}


def parse_config(text: str, **overrides) -> ScenarioConfig:
    """Parse a flat YAML (or JSON) mapping into a validated config.

    Missing keys take the default-scenario values; unknown keys are rejected.
    """
    try:
        raw = yaml.safe_load(text) if text and text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config document: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a key-value mapping")
    raw.update(overrides)
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")

    values = {}
    for key, val in raw.items():
        try:
            if key in _TYPES:
                if _TYPES[key] is int and (isinstance(val, bool) or float(val) != int(val)):
                    raise ValueError
                values[key] = _TYPES[key](val)
            elif key == "initial":
                if not isinstance(val, (str, dict)):
                    raise ValueError
                values[key] = val
            elif key == "snapshot_times":
                values[key] = [float(v) for v in (val if isinstance(val, list) else [val])]
            else:
                if isinstance(val, bool):
                    raise ValueError
                values[key] = float(val)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: invalid value {val!r}") from None
    return ScenarioConfig(**values).validate()


def load_config(path, **overrides) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), **overrides)


@dataclass
class StepRecord:
    t: float
    V: float
    B: float
    C: float
    D: float
    omega_a: Optional[float]
    omega_b: Optional[float]
    active: str
    feasible: bool
    violation: float
    # boundary pair (s, z) the certificate refers to: input where actuated,
    # cell trace where free, admitted interface state for a weak right input
    trace_a: float
    trace_b: float
    mass: float
    boundary_inflow: float


@dataclass
class TimeSeriesLog:
    config: ScenarioConfig
    rows: List[StepRecord] = field(default_factory=list)
    snapshots: Dict[float, DensityField] = field(default_factory=dict)
    infeasible_events: List[float] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def mass_residuals(self) -> np.ndarray:
        """``|mass(t) - mass(0) - inflow(0..t)|`` relative to the initial mass."""
        mass, inflow = self.column("mass"), self.column("boundary_inflow")
        scale = max(abs(mass[0]), np.finfo(float).tiny)
        return np.abs(mass - mass[0] - inflow) / scale


def _hold_window(model: FluxModel, grid: Grid, config: ScenarioConfig) -> int:
    """Cells that can reach a boundary during one hold period.

    A monotone scheme keeps each boundary cell within the range of the
    ``J + 1`` cells next to it after ``J`` sub-steps, and ``J`` is bounded
    using the fastest wave speed over the whole density range.
    """
    speeds = np.abs(model.f_prime(np.linspace(0.0, model.u_max, 2001)))
    dt_min = config.cfl * grid.dx / max(float(speeds.max()), 1e-12)
    return min(int(math.ceil(config.control_period / dt_min - 1e-12)) + 1, grid.n_cells)


def _K(model: FluxModel, u):
    return u * model.f(u) - model.F(u)


def _decide(mode, state, m, C, D, model, u_star, I_a, C_b):
    """Solve the step's program with barrier traces worst-cased over the hold window.

    Returns the decision (``None`` when uncontrolled) and the boundary pair
    ``(s, z)`` that the certificate refers to.
    """
    u = state.u
    s_tr, z_tr = float(u[0]), float(u[-1])
    if mode == "left":
        cells = u[-m:]
        z_bar = float(cells[np.argmin(_K(model, cells))])
        dec = solve_left(z_tr, C, D, model, u_star, I_a, z_barrier=z_bar)
        return dec, (dec.value, z_tr)
    if mode == "right":
        cells = u[:m]
        s_bar = float(cells[np.argmax(_K(model, cells))])
        dec = solve_right(s_tr, C, D, model, u_star, C_b, s_barrier=s_bar)
        return dec, (s_tr, dec.value)
    if mode == "two_input":
        cells = u[-m:]

        def admitted(wb):
            # g at the state the boundary admits; k worst-cased over the window
            states = np.append(interface_state(cells, wb, model), wb)
            return float(states[-2]), float(states[np.argmin(_K(model, states))])

        dec = solve_two_input(s_tr, z_tr, C, D, model, u_star, I_a, C_b, right_trace=admitted)
        return dec, (dec.omega_a, admitted(dec.omega_b)[0])
    return None, (s_tr, z_tr)


def run_scenario(config: ScenarioConfig) -> TimeSeriesLog:
    """Simulate the closed loop and log every control instant, ``t_end`` included.

    Inputs are held over each control period while the PDE is sub-cycled. In
    single-input modes the other end is a zero-gradient (free) boundary.
    An infeasible step still applies the solver's least-violating input.
    """
    config.validate()
    model = config.build_flux()
    grid = Grid(config.a, config.b, config.n_cells)
    kind, params = config.initial_spec()
    state = initial_profile(kind, grid, model, **params)
    I_a = convexity_split(model, 0.0).left_set
    C_b = convexity_split(model, config.u_star).right_set
    alpha, beta = ClassK(config.kappa_V), ClassK(config.kappa_B)
    mode = config.controller_mode
    period = config.control_period
    steps = int(math.floor(config.t_end / period + 1e-9))
    m = _hold_window(model, grid, config)

    out = TimeSeriesLog(config)
    pending = sorted(config.snapshot_times)
    inflow = 0.0
    for n in range(steps + 1):
        t = n * period
        state = DensityField(grid, state.u, t)
        V = lyapunov_V(state, config.u_star)
        B = barrier_B(state, config.u_bar)
        C, D = decay_thresholds(V, B, alpha, beta)
        dec, (s_tr, z_tr) = _decide(mode, state, m, C, D, model, config.u_star, I_a, C_b)
        if dec is None:
            wa = wb = None
            g = float(rate_g(s_tr, z_tr, model, config.u_star))
            k = float(rate_k(s_tr, z_tr, model))
            active, feasible, violation = "uncontrolled", False, max(g + C, k - D, 0.0)
        else:
            wa, wb = dec.omega_a, dec.omega_b
            active, feasible, violation = dec.active, dec.feasible, dec.violation
            if not feasible:
                out.infeasible_events.append(t)
                log.debug("t=%.3f: %s controller infeasible (violation %.3e)", t, mode, violation)

        out.rows.append(
            StepRecord(t, V, B, C, D, wa, wb, active, feasible, violation, s_tr, z_tr, state.mass, inflow)
        )
        while pending and pending[0] <= t + 0.5 * period:
            if pending[0] >= t - 0.5 * period:
                out.snapshots[pending[0]] = state
            pending.pop(0)
        if n == steps:
            break
        bc = BoundaryInput(wa if wa is not None else 0.0, wb if wb is not None else 0.0)
        state, net = advance(
            state, bc, period, model, config.cfl, max_dt=period, free_a=wa is None, free_b=wb is None
        )
        inflow += net
    if out.infeasible_events:
        log.info("%d of %d control steps infeasible", len(out.infeasible_events), len(out.rows))
    return out
