"""Conditional optimized certainty equivalents, dual (measure) side.

The dual representation prices a position x by penalized expectation over
all measures nu that agree with the base measure on the partition:

    inf_nu ( E_nu[x | G] + D_phi(nu || mu)[A] ),

one infimum per atom A.  Writing the measure through its density y = dnu/dmu
turns each atom into the convex program

    minimize  sum_s w_s (x_s y_s + phi(y_s))   over  y >= 0, sum_s w_s y_s = 1

with w the conditional state probabilities.  Its KKT conditions say
y_s = phi_star'(lambda - x_s) for a scalar multiplier lambda, and the
feasibility map lambda -> sum_s w_s phi_star'(lambda - x_s) is nondecreasing
with value <= 1 at min_A x and >= 1 at max_A x, so the multiplier is found by
bisection.  By conjugate duality the optimal value coincides with the primal
certainty equivalent and the multiplier coincides with the primal maximizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .divergence import ConditionalDensity, DivergenceGenerator
from .oce import oce_primal, _check_tol
from .probspace import (
    ConditionalValue,
    FiniteProbabilitySpace,
    Partition,
    RandomVariable,
    _check_pair,
    _check_rv,
)
from .scalar_opt import DEFAULT_MAX_ITER, SolverError, bisect_nondecreasing

__all__ = ["DualSolution", "oce_dual", "duality_gap", "dual_bruteforce"]


@dataclass(frozen=True)
class DualSolution:
    """Per-atom dual values, the minimizing density, and diagnostics.

    ``optimal_density`` is renormalized atom by atom so it satisfies the
    conditional mean-one constraint exactly; ``multiplier`` is the KKT
    multiplier, which matches the primal maximizer.  ``residuals`` holds the
    final bisection bracket widths.
    """

    value: ConditionalValue
    optimal_density: ConditionalDensity
    multiplier: ConditionalValue
    iterations: tuple
    residuals: np.ndarray


def oce_dual(
    space: FiniteProbabilitySpace,
    g: Partition,
    gen: DivergenceGenerator,
    x: RandomVariable,
    tol: float = 1e-10,
    max_iter: int = DEFAULT_MAX_ITER,
) -> DualSolution:
    """Minimize the penalized expectation atom by atom.

    Atoms are independent convex programs; they are solved serially in atom
    order for determinism.  A single-state atom admits only the base
    measure, so there y = 1 and the value is x at that state.
    """
    _check_pair(space, g)
    _check_rv(space, x)
    tol = _check_tol(tol)
    if gen.phi_star_prime is None:
        raise ValueError(
            f"generator {gen.name!r} has no conjugate derivative; the dual solver needs one"
        )
    values = np.empty(g.num_atoms)
    lam = np.empty(g.num_atoms)
    iters = []
    residuals = np.empty(g.num_atoms)
    density = np.empty(space.num_states)
    for i, idx in enumerate(g.index_arrays()):
        w = space.probs[idx]
        w = w / w.sum()
        xa = x.values[idx]

        def feasibility_gap(t):
            # conditional mean of the candidate density minus one
            return float(w @ np.asarray(gen.phi_star_prime(t - xa), dtype=float)) - 1.0

        root = bisect_nondecreasing(
            feasibility_gap, float(xa.min()), float(xa.max()), xtol=tol, ftol=tol, max_iter=max_iter
        )
        y = np.asarray(gen.phi_star_prime(root.x - xa), dtype=float)
        mean = float(w @ y)
        if not (mean > 0.0) or not np.isfinite(mean):
            raise SolverError(
                f"atom A{i}: candidate density has conditional mean {mean!r}; "
                "the conjugate derivative looks invalid"
            )
        y = y / mean
        density[idx] = y
        values[i] = float(w @ (xa * y + np.asarray(gen.phi(y), dtype=float)))
        lam[i] = root.x
        residuals[i] = root.bracket_width
        iters.append(root.iterations)
    return DualSolution(
        value=ConditionalValue(values),
        optimal_density=ConditionalDensity(density),
        multiplier=ConditionalValue(lam),
        iterations=tuple(iters),
        residuals=residuals,
    )


def duality_gap(
    space: FiniteProbabilitySpace,
    g: Partition,
    gen: DivergenceGenerator,
    x: RandomVariable,
    tol: float = 1e-10,
) -> ConditionalValue:
    """Absolute difference between primal and dual values, per atom.

    Strong duality makes the true gap zero; what this measures is the
    combined numerical error of the two solvers, which is why it doubles as
    the package's self-check.
    """
    primal = oce_primal(space, g, gen, x, tol=tol)
    dual = oce_dual(space, g, gen, x, tol=tol)
    return ConditionalValue(np.abs(primal.value.values - dual.value.values))


def dual_bruteforce(
    space: FiniteProbabilitySpace,
    g: Partition,
    gen: DivergenceGenerator,
    x: RandomVariable,
    grid_n: int = 100,
) -> ConditionalValue:
    """Grid minimum of the dual objective over the feasible simplex.

    Test oracle, deliberately independent of the KKT solver: on each atom
    the feasible conditional measures form a simplex, which is swept with a
    barycentric grid of resolution 1/grid_n.  Only meant for tiny atoms;
    atoms with more than 3 states or a grid coarser than 100 are refused.
    """
    _check_pair(space, g)
    _check_rv(space, x)
    grid_n = int(grid_n)
    if grid_n < 100:
        raise ValueError(f"grid_n must be at least 100 to be trustworthy, got {grid_n}")
    out = np.empty(g.num_atoms)
    for i, idx in enumerate(g.index_arrays()):
        k = len(idx)
        if k > 3:
            raise ValueError(f"atom A{i} has {k} states; the brute-force grid handles at most 3")
        w = space.probs[idx]
        w = w / w.sum()
        xa = x.values[idx]
        if k == 1:
            q = np.array([[1.0]])
        elif k == 2:
            steps = np.arange(grid_n + 1) / grid_n
            q = np.stack([steps, 1.0 - steps], axis=1)
        else:
            ii, jj = np.meshgrid(np.arange(grid_n + 1), np.arange(grid_n + 1), indexing="ij")
            keep = ii + jj <= grid_n
            q = np.stack([ii[keep], jj[keep], grid_n - ii[keep] - jj[keep]], axis=1) / grid_n
        # q rows are conditional measure weights; densities are q / w
        obj = q @ xa + (w * np.asarray(gen.phi(q / w), dtype=float)).sum(axis=1)
        out[i] = float(obj.min())
    return ConditionalValue(out)
