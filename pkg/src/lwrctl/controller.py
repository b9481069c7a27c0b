"""Single-boundary controllers that enforce stability and invariance together.

At a control instant the left controller picks ``omega_a`` in ``I_a`` with
the right trace ``z`` frozen, the right controller picks ``omega_b`` in
``C_b`` with the left trace ``s`` frozen. Both minimize the squared input
subject to

    g(., .) <= -C + tol      (Lyapunov decrease)
    k(., .) <= D + tol       (barrier invariance)

Neither program is solved by a generic optimizer. On the admissible sets the
one-dimensional restrictions ``p, l`` (left) and ``q, rho`` (right) are
piecewise monotone with known breakpoints:

* left:  ``p' = (s - u*) f'(s)`` changes sign at ``u*``; ``l' = s f'(s)``
  is nonnegative below ``u_hat``.
* right: ``q' = -(z - u*) f'(z)`` changes sign at ``min(u*, u_hat)`` and
  ``max(u*, u_hat)``; ``rho' = -z f'(z)`` changes sign at ``u_hat``.

So every active-constraint solution is a bracketed root on one monotone
segment, and the optimum is the smallest feasible one. When nothing is
feasible the decision carries the admissible input that minimizes the worst
constraint violation, flagged infeasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .flux import FluxModel, Interval
from .functionals import rate_g, rate_k
from .roots import find_root_monotone

CONSTRAINT_TOL = 1e-8
ROOT_TOL = 1e-10

INTERIOR = "interior_minimum"
STABILITY = "stability_active"
INVARIANCE = "invariance_active"
BOTH = "both_active"
INFEASIBLE = "infeasible"


@dataclass
class ControlDecision:
    side: str
    value: Union[float, Tuple[float, float]]
    active: str
    feasible: bool
    violation: float = 0.0
    candidates: List[float] = field(default_factory=list)

    @property
    def omega_a(self) -> Optional[float]:
        if self.side == "left":
            return self.value
        if self.side == "both":
            return self.value[0]
        return None

    @property
    def omega_b(self) -> Optional[float]:
        if self.side == "right":
            return self.value
        if self.side == "both":
            return self.value[1]
        return None


def _validate(trace: float, C: float, D: float, model: FluxModel):
    if not 0.0 <= trace <= model.u_max:
        raise ValueError(f"boundary trace {trace} outside [0, {model.u_max}]")
    if C < 0 or D < 0:
        raise ValueError(f"decay thresholds must be nonnegative, got C={C}, D={D}")


def _thresholds(C: float, D: float, tol: float) -> Tuple[float, float]:
    """Inflated right-hand sides of ``g <= -C`` and ``k <= D``; an infinite C or D drops that constraint."""
    tg = math.inf if math.isinf(C) else -C + tol
    return tg, D + tol


def _split(intervals: Sequence[Interval], breakpoints: Sequence[float]) -> List[Interval]:
    out = []
    for lo, hi in intervals:
        cuts = [lo] + sorted(b for b in breakpoints if lo < b < hi) + [hi]
        out.extend((c0, c1) for c0, c1 in zip(cuts[:-1], cuts[1:]) if c1 > c0)
    return out


def _restrict(model: FluxModel, u_star: float, trace: float, side: str, barrier_trace: Optional[float] = None):
    """``g`` and ``k`` with one argument frozen; no domain checks.

    ``k`` may freeze a different (more conservative) trace than ``g``.
    """
    f, F = model.f, model.F
    ft, Ft = float(f(trace)), float(F(trace))
    gt = (trace - u_star) * ft - Ft
    bt = trace if barrier_trace is None else barrier_trace
    kt = bt * float(f(bt)) - float(F(bt))
    if side == "left":
        return (lambda x: (x - u_star) * f(x) - F(x) - gt), (lambda x: x * f(x) - F(x) - kt)
    return (lambda x: gt - (x - u_star) * f(x) + F(x)), (lambda x: kt - x * f(x) + F(x))


def _classify(gv: float, kv: float, C: float, D: float, tol: float) -> str:
    on_g = not math.isinf(C) and gv >= -C - tol
    on_k = kv >= D - tol
    if on_g and on_k:
        return BOTH
    if on_g:
        return STABILITY
    if on_k:
        return INVARIANCE
    return INTERIOR


def _safety_first(gfun, kfun, intervals, g_breaks, k_breaks, tk) -> float:
    """Admissible point minimizing ``g`` subject to ``k <= tk``; minimizes ``k`` if that set is empty.

    Both functions are monotone between consecutive breakpoints, so the
    optimum sits at a breakpoint, an interval end or a root of ``k = tk``.
    """
    points = set()
    for lo, hi in _split(intervals, list(g_breaks) + list(k_breaks)):
        points.update((lo, hi))
    for lo, hi in _split(intervals, k_breaks):
        root = find_root_monotone(lambda v: float(kfun(v)), lo, hi, tk, ROOT_TOL)
        if root is not None:
            points.add(root)
    pts = sorted(points)
    safe = [x for x in pts if float(kfun(x)) <= tk]
    if safe:
        return min(safe, key=lambda x: (float(gfun(x)), x))
    return min(pts, key=lambda x: (float(kfun(x)), x))


def _solve_1d(
    side: str,
    gfun: Callable,
    kfun: Callable,
    intervals: Sequence[Interval],
    g_breaks: Sequence[float],
    k_breaks: Sequence[float],
    start: float,
    C: float,
    D: float,
    tol: float,
) -> ControlDecision:
    tg, tk = _thresholds(C, D, tol)

    def feasible(x):
        return float(gfun(x)) <= tg and float(kfun(x)) <= tk

    if feasible(start):
        return ControlDecision(side, start, INTERIOR, True)

    candidates: List[float] = []
    for lo, hi in _split(intervals, g_breaks):
        root = find_root_monotone(lambda v: float(gfun(v)), lo, hi, tg, ROOT_TOL)
        if root is not None and float(kfun(root)) <= tk:
            candidates.append(root)
    for lo, hi in _split(intervals, k_breaks):
        root = find_root_monotone(lambda v: float(kfun(v)), lo, hi, tk, ROOT_TOL)
        if root is not None and float(gfun(root)) <= tg:
            candidates.append(root)

    # later components of a non-contiguous admissible set may be feasible at their left end
    ends = [lo for lo, _ in _split(intervals, list(g_breaks) + list(k_breaks))]
    options = candidates + [e for e in ends if feasible(e)]
    if options:
        value = min(options, key=lambda v: (v * v, v))
        active = _classify(float(gfun(value)), float(kfun(value)), C, D, tol)
        return ControlDecision(side, value, active, True, 0.0, sorted(set(candidates)))

    value = _safety_first(gfun, kfun, intervals, g_breaks, k_breaks, tk)
    viol = max(float(gfun(value)) + C, float(kfun(value)) - D, 0.0)
    return ControlDecision(side, value, INFEASIBLE, False, viol, [])


def solve_left(
    z: float,
    C: float,
    D: float,
    model: FluxModel,
    u_star: float,
    I_a: Sequence[Interval],
    tol: float = CONSTRAINT_TOL,
    z_barrier: Optional[float] = None,
) -> ControlDecision:
    """Minimum-norm left input ``omega_a`` in ``I_a`` for right trace ``z``.

    ``p(s) = g(s, z)`` decreases up to ``u*`` and increases after it, so with
    ``u* >= u_2`` it is monotone on all of ``I_a``. ``l(s) = k(s, z)`` is
    nondecreasing on ``I_a``. ``u_hat`` is also used as a breakpoint so the
    segment logic stays valid if ``I_a`` is ever given pieces above it.

    ``z_barrier`` replaces ``z`` in the invariance constraint only; it shifts
    ``l`` by a constant and leaves the segment structure unchanged.
    """
    _validate(z, C, D, model)
    if z_barrier is not None:
        _validate(z_barrier, C, D, model)
    if not I_a:
        return ControlDecision("left", math.nan, INFEASIBLE, False, math.inf, [])
    gfun, kfun = _restrict(model, u_star, z, "left", z_barrier)
    u_hat = model.u_hat
    return _solve_1d("left", gfun, kfun, I_a, [u_star, u_hat], [u_hat], I_a[0][0], C, D, tol)


def solve_right(
    s: float,
    C: float,
    D: float,
    model: FluxModel,
    u_star: float,
    C_b: Sequence[Interval],
    tol: float = CONSTRAINT_TOL,
    s_barrier: Optional[float] = None,
) -> ControlDecision:
    """Minimum-norm right input ``omega_b`` in ``C_b`` for left trace ``s``.

    With ``delta = min(u*, u_hat)`` and ``gamma = max(u*, u_hat)``, ``q(z) = g(s, z)``
    increases on ``[u_1, delta)``, decreases on ``(delta, gamma)`` and increases
    again after ``gamma``; for ``u* = u_hat`` it increases throughout. ``rho(z)``
    decreases up to ``u_hat`` and increases after it. ``s_barrier`` plays the
    same role as ``z_barrier`` in :func:`solve_left`.
    """
    _validate(s, C, D, model)
    if s_barrier is not None:
        _validate(s_barrier, C, D, model)
    if not C_b:
        return ControlDecision("right", math.nan, INFEASIBLE, False, math.inf, [])
    gfun, kfun = _restrict(model, u_star, s, "right", s_barrier)
    u_hat = model.u_hat
    delta, gamma = min(u_star, u_hat), max(u_star, u_hat)
    return _solve_1d("right", gfun, kfun, C_b, [delta, gamma], [u_hat], C_b[0][0], C, D, tol)


# ---------------------------------------------------------------------------
# two-input baseline


def _separable(model: FluxModel, u_star: float, x):
    """Per-argument parts of ``g`` and ``k``: ``g(a, b) = G(a) - G(b)``, ``k = K(a) - K(b)``."""
    fx, Fx = model.f(x), model.F(x)
    return (x - u_star) * fx - Fx, x * fx - Fx


def _identity_trace(b):
    return b, b


def solve_two_input(
    s: float,
    z: float,
    C: float,
    D: float,
    model: FluxModel,
    u_star: float,
    I_a: Sequence[Interval],
    C_b: Sequence[Interval],
    tol: float = CONSTRAINT_TOL,
    coarse: int = 201,
    right_trace: Optional[Callable[[float], Tuple[float, float]]] = None,
) -> ControlDecision:
    """Minimize ``omega_a^2 + omega_b^2`` over ``I_a x C_b`` under both constraints.

    The current traces ``s`` and ``z`` are validated but do not enter the
    program: both boundary values are decision variables here.

    ``right_trace`` maps ``omega_b`` to the right trace used in ``g`` and the
    one used in ``k``; by default both are ``omega_b`` itself. In the closed
    loop it returns the state the boundary actually admits, since a weakly
    imposed ``omega_b`` often never reaches the domain.

    With identity traces, coordinate descent from ``(0, u_1)`` over the exact
    one-sided solvers runs first. A coarse grid over the box followed by a
    profile search in ``omega_b`` (inner ``omega_a`` from :func:`solve_left`)
    guards against descent stalls and is the only search for custom traces.
    """
    _validate(s, C, D, model)
    _validate(z, C, D, model)
    trace = right_trace or _identity_trace
    tg, tk = _thresholds(C, D, tol)

    def ok(a, b):
        zg, zk = trace(b)
        return float(rate_g(a, zg, model, u_star)) <= tg and float(rate_k(a, zk, model)) <= tk

    def finish(a, b, feasible, violation=0.0):
        zg, zk = trace(b)
        active = _classify(float(rate_g(a, zg, model, u_star)), float(rate_k(a, zk, model)), C, D, tol)
        return ControlDecision("both", (a, b), active if feasible else INFEASIBLE, feasible, violation)

    a0, b0 = I_a[0][0], C_b[0][0]
    if ok(a0, b0):
        return ControlDecision("both", (a0, b0), INTERIOR, True)

    found: List[Tuple[float, float]] = []
    if right_trace is None:
        a, b = a0, b0
        for _ in range(50):
            right = solve_right(a, C, D, model, u_star, C_b, tol)
            if not right.feasible:
                break
            left = solve_left(right.value, C, D, model, u_star, I_a, tol)
            if not left.feasible:
                found.append((a, right.value))
                break
            moved = abs(left.value - a) + abs(right.value - b)
            a, b = left.value, right.value
            found.append((a, b))
            if moved < 1e-13:
                break

    xa = np.concatenate([np.linspace(lo, hi, coarse) for lo, hi in I_a])
    xb = np.concatenate([np.linspace(lo, hi, coarse) for lo, hi in C_b])
    zb = np.array([trace(float(v)) for v in xb])
    Ga, Ka = _separable(model, u_star, xa)
    Gb, _ = _separable(model, u_star, zb[:, 0])
    _, Kb = _separable(model, u_star, zb[:, 1])
    g = Ga[:, None] - Gb[None, :]
    k = Ka[:, None] - Kb[None, :]
    mask = (g <= tg) & (k <= tk)
    if mask.any():
        obj = np.where(mask, xa[:, None] ** 2 + xb[None, :] ** 2, np.inf)
        j = int(np.unravel_index(np.argmin(obj), obj.shape)[1])
        lo_b, hi_b = xb[max(j - 2, 0)], xb[min(j + 2, xb.size - 1)]
        found.extend(_profile_search(C, D, model, u_star, I_a, lo_b, hi_b, tol, trace))

    found = [p for p in found if ok(*p)]
    if found:
        a, b = min(found, key=lambda p: (p[0] ** 2 + p[1] ** 2, p))
        return finish(a, b, True)

    # safety first: smallest g among grid pairs meeting the barrier constraint
    safe = k <= tk
    score = np.where(safe, g, np.inf) if safe.any() else k
    i, j = np.unravel_index(np.argmin(score), score.shape)
    viol = max(float(g[i, j]) + C, float(k[i, j]) - D, 0.0)
    return finish(float(xa[i]), float(xb[j]), False, viol)


def _profile_search(C, D, model, u_star, I_a, lo_b, hi_b, tol, trace, points=21):
    def inner(b):
        zg, zk = trace(b)
        dec = solve_left(zg, C, D, model, u_star, I_a, tol, z_barrier=zk)
        return dec.value if dec.feasible else None

    def cost(b):
        a = inner(b)
        return math.inf if a is None else a * a + b * b

    grid = np.linspace(lo_b, hi_b, points)
    costs = [cost(float(b)) for b in grid]
    i = int(np.argmin(costs))
    if not math.isfinite(costs[i]):
        return []
    b_best = float(grid[i])
    lo, hi = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, points - 1)])
    if hi > lo:
        res = minimize_scalar(cost, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if math.isfinite(res.fun) and res.fun < costs[i]:
            b_best = float(res.x)
    return [(inner(b_best), b_best)]


# ---------------------------------------------------------------------------
# brute-force references


class OracleGrid:
    """Cache of ``f`` and ``x f - F`` on a uniform grid over ``[0, u_max]``.

    Running many oracle scans for the same flux only pays for the flux
    evaluations once.
    """

    def __init__(self, model: FluxModel, resolution: int):
        self.model = model
        self.x = np.linspace(0.0, model.u_max, resolution)
        self.fx = model.f(self.x)
        self.kx = self.x * self.fx - model.F(self.x)

    def inside(self, lo: float, hi: float) -> slice:
        """Slice of grid points strictly inside ``(lo, hi)``."""
        i = int(np.searchsorted(self.x, lo, side="right"))
        j = int(np.searchsorted(self.x, hi, side="left"))
        return slice(i, max(i, j))


_CHUNK = 8192


def grid_scan_oracle(
    side: str,
    trace: float,
    C: float,
    D: float,
    model: FluxModel,
    u_star: float,
    intervals: Sequence[Interval],
    resolution: int = 100_000,
    tol: float = CONSTRAINT_TOL,
    grid: Optional[OracleGrid] = None,
) -> ControlDecision:
    """Brute-force reference for :func:`solve_left` / :func:`solve_right`.

    Walks the admissible intervals left to right on a uniform grid (plus the
    interval endpoints), stops at the first feasible point and bisects the
    feasibility indicator against its infeasible neighbour. Knows nothing
    about monotone segments.
    """
    if resolution < 1000:
        raise ValueError("resolution must be >= 1000")
    if grid is None or grid.x.size != resolution or grid.model is not model:
        grid = OracleGrid(model, resolution)
    f_t = float(model.f(trace))
    k_t = trace * f_t - float(model.F(trace))
    tg, tk = _thresholds(C, D, tol)

    # x f(x) - F(x) is the k-part; the g-part subtracts u* f(x)
    def values(fx, kx):
        if side == "left":
            k = kx - k_t
            g = k - u_star * (fx - f_t)
        else:
            k = k_t - kx
            g = k - u_star * (f_t - fx)
        return g, k

    def point(v):
        fv = model.f(np.array([v]))
        return values(fv, v * fv - model.F(np.array([v])))

    def point_ok(v):
        s, z = (v, trace) if side == "left" else (trace, v)
        return float(rate_g(s, z, model, u_star)) <= tg and float(rate_k(s, z, model)) <= tk

    def decide(value):
        s, z = (value, trace) if side == "left" else (trace, value)
        active = _classify(float(rate_g(s, z, model, u_star)), float(rate_k(s, z, model)), C, D, tol)
        return ControlDecision(side, value, active, True)

    def refine(bad, good):
        while good - bad > 1e-13:
            mid = 0.5 * (bad + good)
            if point_ok(mid):
                good = mid
            else:
                bad = mid
        return good

    best_x, best_viol = None, math.inf
    for lo, hi in sorted(intervals):
        g, k = point(lo)
        if g[0] <= tg and k[0] <= tk:
            return decide(float(lo))
        viol = max(g[0] + C, k[0] - D)
        if viol < best_viol:
            best_x, best_viol = float(lo), float(viol)
        prev = float(lo)
        sl = grid.inside(lo, hi)
        for start in range(sl.start, sl.stop, _CHUNK):
            stop = min(start + _CHUNK, sl.stop)
            g, k = values(grid.fx[start:stop], grid.kx[start:stop])
            ok = (g <= tg) & (k <= tk)
            if ok.any():
                j = int(np.argmax(ok))
                left = prev if j == 0 else float(grid.x[start + j - 1])
                return decide(refine(left, float(grid.x[start + j])))
            v = np.maximum(g + C, k - D)
            i = int(np.argmin(v))
            if v[i] < best_viol:
                best_x, best_viol = float(grid.x[start + i]), float(v[i])
            prev = float(grid.x[stop - 1])
        if hi > lo:
            g, k = point(hi)
            if g[0] <= tg and k[0] <= tk:
                return decide(refine(prev, float(hi)))
            viol = max(g[0] + C, k[0] - D)
            if viol < best_viol:
                best_x, best_viol = float(hi), float(viol)
    if best_x is None:
        return ControlDecision(side, math.nan, INFEASIBLE, False, math.inf)
    return ControlDecision(side, best_x, INFEASIBLE, False, max(best_viol, 0.0))


def grid_scan_two_input(
    C: float,
    D: float,
    model: FluxModel,
    u_star: float,
    I_a: Sequence[Interval],
    C_b: Sequence[Interval],
    resolution: int = 2000,
    tol: float = CONSTRAINT_TOL,
    zoom: bool = True,
) -> ControlDecision:
    """Dense 2-D scan of ``I_a x C_b``; optionally re-scans a small box around the best cell."""

    tg, tk = _thresholds(C, D, tol)

    def scan(xa, xb):
        A, Bm = xa[:, None], xb[None, :]
        ok = (rate_g(A, Bm, model, u_star) <= tg) & (rate_k(A, Bm, model) <= tk)
        if not ok.any():
            return None
        obj = np.where(ok, A * A + Bm * Bm, np.inf)
        i, j = np.unravel_index(np.argmin(obj), obj.shape)
        return i, j, float(obj[i, j])

    xa = np.concatenate([np.linspace(lo, hi, resolution) for lo, hi in I_a])
    xb = np.concatenate([np.linspace(lo, hi, resolution) for lo, hi in C_b])
    hit = scan(xa, xb)
    if hit is None:
        return ControlDecision("both", (math.nan, math.nan), INFEASIBLE, False, math.inf)
    i, j, _ = hit
    a, b = float(xa[i]), float(xb[j])
    if zoom:
        za = np.linspace(xa[max(i - 3, 0)], xa[min(i + 3, xa.size - 1)], resolution // 4)
        zb = np.linspace(xb[max(j - 3, 0)], xb[min(j + 3, xb.size - 1)], resolution // 4)
        za = za[[any(lo <= v <= hi for lo, hi in I_a) for v in za]]
        zb = zb[[any(lo <= v <= hi for lo, hi in C_b) for v in zb]]
        fine = scan(za, zb)
        if fine is not None and fine[2] < a * a + b * b:
            a, b = float(za[fine[0]]), float(zb[fine[1]])
    active = _classify(float(rate_g(a, b, model, u_star)), float(rate_k(a, b, model)), C, D, tol)
    return ControlDecision("both", (a, b), active, True)
