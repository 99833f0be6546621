"""Bracketed one-dimensional solvers shared by the risk-measure routines.

Two workhorses cover everything this package optimizes:

* :func:`bisect_nondecreasing` finds the root of a monotone scalar function.
  All first-order conditions in this package reduce to such a root because
  the objectives are concave with monotone derivatives.
* :func:`golden_section_max` maximizes a concave (or unimodal) function on a
  closed interval without derivatives, with :func:`expand_bracket_max`
  growing the interval first when no a-priori bracket is known.

Both stop on an interval-width tolerance and an iteration cap, and report
what they achieved so callers can surface residuals instead of silently
returning garbage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

__all__ = [
    "SolverError",
    "UnboundedObjective",
    "RootResult",
    "MaxResult",
    "bisect_nondecreasing",
    "golden_section_max",
    "expand_bracket_max",
]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi ~ 0.618
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0  # 1/phi^2 ~ 0.382

DEFAULT_MAX_ITER = 200


class SolverError(RuntimeError):
    """A scalar solver could not honor its contract."""


class UnboundedObjective(SolverError):
    """Bracket expansion hit its ceiling while the objective kept growing."""

    def __init__(self, message: str, side: str):
        super().__init__(message)
        self.side = side


@dataclass(frozen=True)
class RootResult:
    x: float
    f_value: float
    bracket_width: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class MaxResult:
    x: float
    value: float
    bracket_width: float
    iterations: int
    converged: bool


def bisect_nondecreasing(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    xtol: float,
    ftol: Optional[float] = None,
    max_iter: int = DEFAULT_MAX_ITER,
) -> RootResult:
    """Root of a nondecreasing function with f(lo) <= 0 <= f(hi).

    Bisection runs until the bracket is narrower than ``xtol`` and, when
    ``ftol`` is given, the midpoint residual |f| is below it too; it stops
    early once the midpoint can no longer be resolved in floating point.
    A sign pattern incompatible with a nondecreasing function raises
    :class:`SolverError`, since it means the supplied function violates the
    monotonicity this method relies on.
    """
    if not (lo <= hi):
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    slack = ftol if ftol is not None else 1e-9
    if lo == hi:
        return RootResult(lo, f(lo), 0.0, 0, True)
    flo = f(lo)
    fhi = f(hi)
    if not (math.isfinite(flo) and math.isfinite(fhi)):
        raise SolverError(f"non-finite values at the bracket ends: f({lo})={flo}, f({hi})={fhi}")
    if flo > slack or fhi < -slack:
        raise SolverError(
            "root not bracketed by a nondecreasing function: "
            f"f({lo})={flo}, f({hi})={fhi}"
        )
    if flo >= 0.0:
        return RootResult(lo, flo, 0.0, 0, True)
    if fhi <= 0.0:
        return RootResult(hi, fhi, 0.0, 0, True)

    iterations = 0
    while iterations < max_iter:
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            break  # bracket exhausted at floating point resolution
        fmid = f(mid)
        iterations += 1
        if not math.isfinite(fmid):
            raise SolverError(f"non-finite value f({mid})={fmid} during bisection")
        if fmid <= 0.0:
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
        if hi - lo <= xtol and (ftol is None or abs(fmid) <= ftol):
            break
    width = hi - lo
    # report the bracket end whose residual is smallest
    x, fx = (lo, flo) if abs(flo) <= abs(fhi) else (hi, fhi)
    resolved = not (lo < 0.5 * (lo + hi) < hi)  # cannot split further in float
    converged = resolved or (width <= xtol and (ftol is None or abs(fx) <= ftol))
    return RootResult(x, fx, width, iterations, converged)


def golden_section_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    xtol: float,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MaxResult:
    """Derivative-free maximization of a unimodal function on [lo, hi].

    Classic golden-section search; additionally tracks the best point seen
    (including the interval ends) so boundary maxima are reported exactly.
    """
    if not (lo <= hi):
        raise ValueError(f"invalid interval [{lo}, {hi}]")
    best_x, best_v = lo, f(lo)
    fhi = f(hi)
    if fhi > best_v:
        best_x, best_v = hi, fhi
    a, b = lo, hi
    h = b - a
    if h <= xtol:
        return MaxResult(best_x, best_v, h, 0, True)
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc = f(c)
    fd = f(d)
    iterations = 0
    while h > xtol and iterations < max_iter:
        if fc >= fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + INV_PHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = f(d)
        iterations += 1
    for x, v in ((c, fc), (d, fd)):
        if v > best_v:
            best_x, best_v = x, v
    return MaxResult(best_x, best_v, h, iterations, h <= xtol)


def expand_bracket_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    ceiling: float,
    grow: float = 2.0,
    min_lo: Optional[float] = None,
) -> tuple:
    """Grow [lo, hi] until a concave objective has an interior maximum.

    Each side is pushed outward (step doubling by default) while the end
    value keeps strictly improving on the interior probe; sustained growth
    past ``ceiling`` raises :class:`UnboundedObjective`, which callers
    interpret as a divergent supremum.  ``min_lo`` is a hard domain wall:
    the left end clamps there instead of expanding past it.

    Flat objectives are left alone: improvement below a small relative
    slack does not trigger expansion, so a constant function keeps its
    initial bracket instead of chasing rounding noise to the ceiling.
    """
    if not (lo < hi):
        raise ValueError(f"invalid interval [{lo}, {hi}]")
    span = hi - lo
    mid = 0.5 * (lo + hi)
    flo, fmid, fhi = f(lo), f(mid), f(hi)

    def improving(candidate: float, reference: float) -> bool:
        return candidate > reference + 1e-9 * (1.0 + abs(reference))

    step = span
    while improving(fhi, fmid):
        lo, flo = mid, fmid
        mid, fmid = hi, fhi
        step *= grow
        hi = hi + step
        if abs(hi) > ceiling:
            raise UnboundedObjective(
                f"objective still increasing at {hi:.3g}; supremum appears unbounded", "right"
            )
        fhi = f(hi)
    step = span
    while improving(flo, fmid):
        hi, fhi = mid, fmid
        mid, fmid = lo, flo
        step *= grow
        new_lo = lo - step
        if min_lo is not None:
            if lo <= min_lo:
                break
            new_lo = max(new_lo, min_lo)
        lo = new_lo
        if abs(lo) > ceiling:
            raise UnboundedObjective(
                f"objective still increasing at {lo:.3g}; supremum appears unbounded", "left"
            )
        flo = f(lo)
    return lo, hi
