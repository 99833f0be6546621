"""Conditional optimized certainty equivalents, primal side.

For a divergence generator phi with conjugate phi_star, the conditional
optimized certainty equivalent of a position x on an atom A is

    sup_a ( a - E[phi_star(a - x) | A] ),

maximized over scalars a (one per atom; jointly a G-measurable shift).  The
objective is concave with nonincreasing derivative 1 - E[phi_star'(a - x)|A],
and since phi_star' is nondecreasing with slope value 1 at the origin the
maximizer always lies in [min_A x, max_A x].  The solver bisects on that
derivative; generators carrying no conjugate derivative fall back to a
golden-section search on the objective itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .divergence import DivergenceGenerator
from .probspace import (
    ConditionalValue,
    FiniteProbabilitySpace,
    Partition,
    RandomVariable,
    _check_pair,
    _check_rv,
)
from .scalar_opt import DEFAULT_MAX_ITER, bisect_nondecreasing, golden_section_max

__all__ = ["OceSolution", "oce_primal", "i_phi", "entropic_risk"]


@dataclass(frozen=True)
class OceSolution:
    """Per-atom certainty equivalents with solver diagnostics.

    ``value[A]`` equals the objective evaluated at ``optimal_a[A]``;
    ``residuals[A]`` is the final bracket width, a bound on how far
    ``optimal_a[A]`` can sit from the true maximizer.
    """

    value: ConditionalValue
    optimal_a: ConditionalValue
    iterations: tuple
    residuals: np.ndarray


def _check_tol(tol: float) -> float:
    tol = float(tol)
    if not (tol > 0.0) or not np.isfinite(tol):
        raise ValueError(f"tol must be a positive finite number, got {tol!r}")
    return tol


def oce_primal(
    space: FiniteProbabilitySpace,
    g: Partition,
    gen: DivergenceGenerator,
    x: RandomVariable,
    tol: float = 1e-10,
    max_iter: int = DEFAULT_MAX_ITER,
) -> OceSolution:
    """Maximize a - E[phi_star(a - x) | G] atom by atom.

    The per-atom problems are independent (the computation is local to each
    atom), so this loop could run them in parallel; it runs them serially
    and in atom order for determinism.
    """
    _check_pair(space, g)
    _check_rv(space, x)
    tol = _check_tol(tol)
    values = np.empty(g.num_atoms)
    arg = np.empty(g.num_atoms)
    iters = []
    residuals = np.empty(g.num_atoms)
    for i, idx in enumerate(g.index_arrays()):
        w = space.probs[idx]
        w = w / w.sum()
        xa = x.values[idx]

        def objective(a):
            return a - float(w @ np.asarray(gen.phi_star(a - xa), dtype=float))

        lo, hi = float(xa.min()), float(xa.max())
        if gen.phi_star_prime is not None:

            def slope_gap(a):
                # derivative of the conjugate expectation minus one; the
                # bisection root is the stationary point of the objective
                return float(w @ np.asarray(gen.phi_star_prime(a - xa), dtype=float)) - 1.0

            root = bisect_nondecreasing(slope_gap, lo, hi, xtol=tol, ftol=tol, max_iter=max_iter)
            arg[i] = root.x
            residuals[i] = root.bracket_width
            iters.append(root.iterations)
        else:
            peak = golden_section_max(objective, lo, hi, xtol=tol, max_iter=max_iter)
            arg[i] = peak.x
            residuals[i] = peak.bracket_width
            iters.append(peak.iterations)
        values[i] = objective(arg[i])
    return OceSolution(
        value=ConditionalValue(values),
        optimal_a=ConditionalValue(arg),
        iterations=tuple(iters),
        residuals=residuals,
    )


def i_phi(
    space: FiniteProbabilitySpace,
    g: Partition,
    gen: DivergenceGenerator,
    x: RandomVariable,
) -> ConditionalValue:
    """Base concave functional -E[phi_star(-x) | G].

    This is the a = 0 slice of the certainty-equivalent objective; its
    translation completion is exactly :func:`oce_primal` (see the niveloid
    module).  It is concave, monotone, and never exceeds E[x | G].
    """
    _check_pair(space, g)
    _check_rv(space, x)
    star = np.asarray(gen.phi_star(-x.values), dtype=float)
    out = np.empty(g.num_atoms)
    for i, idx in enumerate(g.index_arrays()):
        p = space.probs[idx]
        out[i] = -float(p @ star[idx]) / float(p.sum())
    return ConditionalValue(out)


def entropic_risk(
    space: FiniteProbabilitySpace, g: Partition, x: RandomVariable
) -> ConditionalValue:
    """Conditional entropic risk -log E[exp(-x) | G], per atom.

    Closed form of the certainty equivalent for the relative-entropy
    generator; evaluated with a max-shifted log-sum-exp so large positions
    cannot overflow.
    """
    _check_pair(space, g)
    _check_rv(space, x)
    out = np.empty(g.num_atoms)
    for i, idx in enumerate(g.index_arrays()):
        w = space.probs[idx]
        w = w / w.sum()
        out[i] = -float(logsumexp(-x.values[idx], b=w))
    return ConditionalValue(out)
