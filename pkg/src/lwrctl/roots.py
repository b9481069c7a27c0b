"""Monotone root location that never lands on the wrong side of the target.

General-purpose root finding uses :func:`scipy.optimize.brentq`; only the
one-sided guarantee needed by the controllers lives here.
"""

from __future__ import annotations

from typing import Callable, Optional

Scalar = Callable[[float], float]

_MAX_ITER = 200


def find_root_monotone(
    fn: Scalar,
    lo: float,
    hi: float,
    target: float,
    tol: float = 1e-10,
) -> Optional[float]:
    """Locate ``x`` in ``[lo, hi]`` with ``fn(x) == target`` for monotone ``fn``.

    Returns ``None`` when ``fn(lo) - target`` and ``fn(hi) - target`` share a
    strict sign. The returned point is the bracket end on the side where
    ``fn(x) <= target``, so it never overshoots into ``fn > target``; the final
    bracket is at most ``tol`` wide.
    """
    if not lo < hi:
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    dlo = fn(lo) - target
    dhi = fn(hi) - target
    if dlo == 0.0:
        return lo
    if dhi == 0.0:
        return hi
    if dlo * dhi > 0.0:
        return None
    # keep a on the "<= target" side, b on the "> target" side
    a, b = (lo, hi) if dlo < 0.0 else (hi, lo)
    for _ in range(_MAX_ITER):
        if abs(b - a) <= tol:
            break
        mid = 0.5 * (a + b)
        dmid = fn(mid) - target
        if dmid == 0.0:
            return mid
        if dmid < 0.0:
            a = mid
        else:
            b = mid
    return a
