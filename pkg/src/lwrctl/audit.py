"""Randomized comparison of the case-analysis solvers against the grid oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .controller import OracleGrid, grid_scan_oracle, solve_left, solve_right
from .flux import FluxModel, convexity_split
from .functionals import rate_g, rate_k


@dataclass
class Mismatch:
    u_star: float
    trace: float
    C: float
    D: float
    solver: Optional[float]
    oracle: Optional[float]


@dataclass
class AuditResult:
    side: str
    samples: int
    feasible: int = 0
    max_value_gap: float = 0.0
    mismatches: List[Mismatch] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.mismatches


def oracle_audit(
    model: FluxModel,
    side: str,
    samples: int,
    seed: int = 0,
    resolution: int = 100_000,
    value_tol: float = 1e-6,
    u_star: Optional[float] = None,
) -> AuditResult:
    """Draw ``samples`` random programs and compare solver with oracle.

    Target density and trace are uniform on ``[0, u_max]`` (``u_star`` can
    be pinned); C and D are scaled to the rate magnitudes at the trace so
    that both feasible and infeasible instances are common.
    A mismatch is a feasibility disagreement or a value gap above
    ``value_tol`` on a feasible instance.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    rng = np.random.default_rng(seed)
    grid = OracleGrid(model, resolution)
    I_a = convexity_split(model, 0.0).left_set
    out = AuditResult(side, samples)
    for _ in range(samples):
        us = float(rng.uniform(0, model.u_max)) if u_star is None else u_star
        tr = float(rng.uniform(0, model.u_max))
        scale = abs(float(rate_g(0.0, tr, model, us))) + abs(float(rate_k(0.0, tr, model))) + 1e-3
        C = float(rng.uniform()) * scale * 0.5
        D = float(rng.uniform()) * scale * 0.5
        if side == "left":
            ivs = I_a
            dec = solve_left(tr, C, D, model, us, ivs)
        else:
            ivs = convexity_split(model, us).right_set
            dec = solve_right(tr, C, D, model, us, ivs)
        ref = grid_scan_oracle(side, tr, C, D, model, us, ivs, resolution, grid=grid)
        if dec.feasible != ref.feasible:
            out.mismatches.append(
                Mismatch(us, tr, C, D, dec.value if dec.feasible else None, ref.value if ref.feasible else None)
            )
        elif dec.feasible:
            out.feasible += 1
            gap = abs(dec.value - ref.value)
            out.max_value_gap = max(out.max_value_gap, gap)
            if gap > value_tol:
                out.mismatches.append(Mismatch(us, tr, C, D, dec.value, ref.value))
    return out
