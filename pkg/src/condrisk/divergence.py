"""Divergence generators and conditional phi-divergences.

A divergence generator is a continuous, strictly convex function phi >= 0 on
[0, inf) with phi(1) = 0 and superlinear growth.  Its convex conjugate

    phi_star(m) = sup_{t >= 0} (m t - phi(t))

is increasing and convex with phi_star(0) = 0 and slope 1 at the origin.
Given a measure nu that agrees with the base measure mu on a partition G and
is absolutely continuous with respect to it, the conditional divergence on an
atom A is

    D[A] = sum_{s in A} (p_s / mu(A)) * phi(nu_s / p_s),

the conditional expectation of phi composed with the density dnu/dmu.  The
variational (Donsker-Varadhan style) form replaces D by a supremum of
E_nu[z | G] - E_mu[phi_star(z) | G] over random variables z; this module also
builds the argument attaining that supremum.

Built-in generators: relative entropy ("kl"), Pearson chi-square ("chi2") and
the power family ("power:<alpha>", alpha > 1).  Their closed-form conjugates
are cross-checked against :func:`numeric_conjugate` in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import xlogy

from .probspace import (
    ConditionalValue,
    FiniteProbabilitySpace,
    Partition,
    RandomVariable,
    _as_float_vector,
    _check_pair,
    _check_rv,
)
from .scalar_opt import expand_bracket_max, golden_section_max

__all__ = [
    "DivergenceGenerator",
    "ConditionalDensity",
    "EquivalentConditionalMeasure",
    "builtin_generator",
    "generator_from_phi",
    "validate_generator",
    "numeric_conjugate",
    "check_density",
    "check_measure",
    "density_to_measure",
    "measure_to_density",
    "cond_divergence",
    "cond_expectation_under",
    "donsker_varadhan_value",
    "dv_optimal_argument",
]

# mass bookkeeping tolerance for densities and measures
MASS_TOL = 1e-10

# default expansion ceiling for the conjugate search; reaching it means the
# integrand m*t - phi(t) is still growing, i.e. phi fails superlinearity
DEFAULT_T_CAP = 1e12


@dataclass(frozen=True)
class DivergenceGenerator:
    """Generator phi together with its conjugate calculus.

    ``phi``, ``phi_star`` and ``phi_star_prime`` accept scalars or numpy
    arrays.  ``phi_star_prime`` is the nondecreasing right derivative of the
    conjugate (equivalently the argmax t of m t - phi(t)); it is what the
    certainty-equivalent solvers bisect on.  ``phi_prime`` is the right
    derivative of phi on (0, inf) and may be None for generators defined
    only through phi; ``has_closed_forms`` records whether the conjugate
    fields are analytic or numerically synthesized.
    """

    name: str
    phi: Callable
    phi_star: Callable
    phi_star_prime: Callable
    phi_prime: Optional[Callable] = None
    has_closed_forms: bool = True


def _kl_generator() -> DivergenceGenerator:
    return DivergenceGenerator(
        name="kl",
        phi=lambda t: xlogy(t, t) - np.asarray(t, dtype=float) + 1.0,
        phi_star=np.expm1,
        phi_star_prime=np.exp,
        phi_prime=np.log,
    )


def _chi2_generator() -> DivergenceGenerator:
    def phi_star(m):
        m = np.asarray(m, dtype=float)
        return np.where(m >= -2.0, m + 0.25 * m * m, -1.0)

    return DivergenceGenerator(
        name="chi2",
        phi=lambda t: (np.asarray(t, dtype=float) - 1.0) ** 2,
        phi_star=phi_star,
        phi_star_prime=lambda m: np.maximum(0.0, 1.0 + 0.5 * np.asarray(m, dtype=float)),
        phi_prime=lambda t: 2.0 * (np.asarray(t, dtype=float) - 1.0),
    )


def _power_generator(alpha: float) -> DivergenceGenerator:
    """Power family phi(t) = (t^a - a t + a - 1) / (a (a - 1)) for a > 1.

    The conjugate is ((1 + (a-1) m)_+^(a/(a-1)) - 1) / a, constant at -1/a
    below the kink m = -1/(a-1) where the maximizing t hits zero.
    """
    a = float(alpha)
    if not np.isfinite(a) or a <= 1.0:
        raise ValueError(f"power generator needs alpha > 1, got {alpha!r}")
    q = a / (a - 1.0)

    def phi(t):
        t = np.asarray(t, dtype=float)
        return (t**a - a * t + a - 1.0) / (a * (a - 1.0))

    def phi_star(m):
        u = np.maximum(0.0, 1.0 + (a - 1.0) * np.asarray(m, dtype=float))
        return (u**q - 1.0) / a

    def phi_star_prime(m):
        u = np.maximum(0.0, 1.0 + (a - 1.0) * np.asarray(m, dtype=float))
        return u ** (1.0 / (a - 1.0))

    def phi_prime(t):
        t = np.asarray(t, dtype=float)
        return (t ** (a - 1.0) - 1.0) / (a - 1.0)

    return DivergenceGenerator(
        name=f"power:{a:g}",
        phi=phi,
        phi_star=phi_star,
        phi_star_prime=phi_star_prime,
        phi_prime=phi_prime,
    )


def builtin_generator(spec: str) -> DivergenceGenerator:
    """Look up a built-in generator by name.

    Accepted forms: ``"kl"``, ``"chi2"`` and ``"power:<alpha>"`` with
    alpha > 1, e.g. ``"power:2"`` or ``"power:1.5"``.
    """
    text = str(spec).strip().lower()
    if text == "kl":
        return _kl_generator()
    if text == "chi2":
        return _chi2_generator()
    if text.startswith("power:"):
        try:
            alpha = float(text.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad power generator {spec!r}; expected power:<alpha> with alpha > 1") from None
        return _power_generator(alpha)
    raise ValueError(
        f"unknown generator {spec!r}; valid generators are 'kl', 'chi2', 'power:<alpha>'"
    )


def _map_scalar(fn, m):
    """Apply a float->float function over a scalar or array argument."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 0:
        return float(fn(float(arr)))
    flat = np.array([fn(float(v)) for v in arr.ravel()])
    return flat.reshape(arr.shape)


def _conjugate_search(phi, m: float, t_cap: float):
    """Maximize h(t) = m t - phi(t) over t >= 0; returns the solver result."""

    def h(t):
        return m * t - float(phi(t))

    lo, hi = expand_bracket_max(h, 0.0, 1.0, ceiling=t_cap, min_lo=0.0)
    xtol = 1e-9 * (1.0 + max(abs(lo), abs(hi)))
    return golden_section_max(h, lo, hi, xtol=xtol)


def numeric_conjugate(gen: DivergenceGenerator, m: float, *, t_cap: float = DEFAULT_T_CAP) -> float:
    """Conjugate value phi_star(m) computed by direct maximization.

    Serves as the independent route against which closed-form conjugates are
    verified.  Raises :class:`condrisk.scalar_opt.UnboundedObjective` when
    the bracket expansion exceeds ``t_cap``, which signals a generator
    violating superlinear growth.
    """
    return _conjugate_search(gen.phi, float(m), t_cap).value


def generator_from_phi(
    name: str,
    phi: Callable,
    phi_prime: Optional[Callable] = None,
    *,
    t_cap: float = DEFAULT_T_CAP,
) -> DivergenceGenerator:
    """Wrap a user-supplied phi, synthesizing the conjugate numerically.

    ``phi_star`` is the bracketed maximum of m t - phi(t) and
    ``phi_star_prime`` its maximizing t (the envelope derivative), so both
    stay consistent with each other by construction.
    """

    def phi_star(m):
        return _map_scalar(lambda mm: _conjugate_search(phi, mm, t_cap).value, m)

    def phi_star_prime(m):
        return _map_scalar(lambda mm: _conjugate_search(phi, mm, t_cap).x, m)

    return DivergenceGenerator(
        name=str(name),
        phi=phi,
        phi_star=phi_star,
        phi_star_prime=phi_star_prime,
        phi_prime=phi_prime,
        has_closed_forms=False,
    )


def validate_generator(
    gen: DivergenceGenerator,
    *,
    t_grid=None,
    m_grid=None,
    t_check: float = 1e6,
    conj_tol: float = 1e-8,
) -> None:
    """Spot-check the generator contract on a grid; raises on violation.

    Checked: phi(1) = 0, phi >= 0, strict midpoint convexity, superlinear
    growth up to ``t_check``, conjugate consistency with the direct
    maximization route, phi_star(0) = 0 and unit slope of phi_star at 0.
    A grid check cannot certify the contract everywhere, but it reliably
    rejects the common mistakes (wrong sign, missing normalization at 1,
    merely linear growth, mismatched conjugate).
    """
    if t_grid is None:
        t_grid = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, 41)])
    t_grid = np.asarray(t_grid, dtype=float)
    vals = np.asarray(gen.phi(t_grid), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{gen.name}: phi must be finite on [0, inf), got non-finite values")
    if abs(float(gen.phi(1.0))) > 1e-12:
        raise ValueError(f"{gen.name}: phi(1) must be 0, got {float(gen.phi(1.0))!r}")
    if np.any(vals < -1e-12):
        raise ValueError(f"{gen.name}: phi must be nonnegative")
    mids = 0.5 * (t_grid[:-1] + t_grid[1:])
    mid_vals = np.asarray(gen.phi(mids), dtype=float)
    chords = 0.5 * (vals[:-1] + vals[1:])
    slack = 1e-12 * (1.0 + np.abs(chords))
    if np.any(mid_vals > chords + slack):
        bad = int(np.argmax(mid_vals - chords))
        raise ValueError(f"{gen.name}: phi is not convex near t={mids[bad]:g}")
    # strictness is only decidable where curvature cannot hide below rounding;
    # admissible generators always have visible curvature at unit scale since
    # phi > 0 away from its minimum at 1
    window = (t_grid[:-1] >= 0.1) & (t_grid[1:] <= 10.0)
    if np.any(mid_vals[window] >= (chords - slack)[window]):
        rel = np.nonzero(window)[0]
        bad = int(rel[np.argmax((mid_vals - chords + slack)[window])])
        raise ValueError(f"{gen.name}: phi is not strictly convex near t={mids[bad]:g}")
    tail = np.geomspace(max(1.0, t_check / 1e4), t_check, 9)
    ratios = np.asarray(gen.phi(tail), dtype=float) / tail
    if np.any(np.diff(ratios) <= 0.0) or ratios[-1] < 2.0 * ratios[0]:
        raise ValueError(
            f"{gen.name}: phi(t)/t must keep growing (checked up to t={t_check:g}); "
            "the generator looks at most linear"
        )
    if m_grid is None:
        m_grid = np.linspace(-5.0, 5.0, 21)
    for m in np.asarray(m_grid, dtype=float):
        direct = numeric_conjugate(gen, m)
        stated = float(gen.phi_star(m))
        if abs(direct - stated) > conj_tol:
            raise ValueError(
                f"{gen.name}: phi_star({m:g})={stated!r} disagrees with direct "
                f"maximization {direct!r} beyond {conj_tol:g}"
            )
    if abs(float(gen.phi_star(0.0))) > 1e-10:
        raise ValueError(f"{gen.name}: phi_star(0) must be 0")
    # slope tolerance must absorb argmax extraction from a flat maximum,
    # which floating rounding in phi limits to about sqrt(eps)
    if abs(float(gen.phi_star_prime(0.0)) - 1.0) > 1e-6:
        raise ValueError(f"{gen.name}: phi_star must have slope 1 at the origin")
    d = np.asarray(gen.phi_star_prime(np.asarray(m_grid, dtype=float)), dtype=float)
    if np.any(d < -1e-12) or np.any(np.diff(d) < -1e-10):
        raise ValueError(f"{gen.name}: phi_star_prime must be nonnegative and nondecreasing")


@dataclass(frozen=True, eq=False)
class ConditionalDensity:
    """Nonnegative state vector with conditional mean one on every atom.

    Exactly the densities dnu/dmu of measures in the modelling class below;
    see :func:`check_density` for the contextual validation.
    """

    values: np.ndarray

    def __init__(self, values):
        vals = _as_float_vector(values, "conditional density")
        if np.any(vals < 0.0):
            raise ValueError("conditional density must be nonnegative")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    def __repr__(self) -> str:
        return f"ConditionalDensity({self.values.tolist()})"


@dataclass(frozen=True, eq=False)
class EquivalentConditionalMeasure:
    """Probability weights agreeing with the base measure on the partition.

    The measure is given by one nonnegative weight per state; restricted to
    the partition it must reproduce the base atom masses, which also forces
    total mass one.
    """

    weights: np.ndarray

    def __init__(self, weights):
        w = _as_float_vector(weights, "measure weights")
        if np.any(w < 0.0):
            raise ValueError("measure weights must be nonnegative")
        if abs(float(w.sum()) - 1.0) > MASS_TOL:
            raise ValueError(f"measure weights must sum to 1 within {MASS_TOL}, got {float(w.sum())!r}")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size

    def __repr__(self) -> str:
        return f"EquivalentConditionalMeasure({self.weights.tolist()})"


def check_density(
    space: FiniteProbabilitySpace, g: Partition, y: ConditionalDensity, tol: float = MASS_TOL
) -> None:
    """Validate that y has conditional mean one on every atom of g."""
    _check_pair(space, g)
    if len(y) != space.num_states:
        raise ValueError(f"density has length {len(y)}, expected {space.num_states}")
    for i, idx in enumerate(g.index_arrays()):
        mass = float(space.probs[idx] @ y.values[idx])
        base = float(space.probs[idx].sum())
        if abs(mass - base) > tol:
            raise ValueError(
                f"atom A{i}: density carries mass {mass!r} but the atom has mass {base!r} "
                f"(conditional mean {mass / base!r}, expected 1)"
            )


def check_measure(
    space: FiniteProbabilitySpace,
    g: Partition,
    nu: EquivalentConditionalMeasure,
    tol: float = MASS_TOL,
) -> None:
    """Validate that nu restricts to the base measure on the partition."""
    _check_pair(space, g)
    if len(nu) != space.num_states:
        raise ValueError(f"measure has length {len(nu)}, expected {space.num_states}")
    for i, idx in enumerate(g.index_arrays()):
        mass = float(nu.weights[idx].sum())
        base = float(space.probs[idx].sum())
        if abs(mass - base) > tol:
            raise ValueError(
                f"atom A{i}: measure mass {mass!r} differs from base mass {base!r} "
                f"by more than {tol}"
            )


def density_to_measure(
    space: FiniteProbabilitySpace, g: Partition, y: ConditionalDensity
) -> EquivalentConditionalMeasure:
    """Measure with weights p_s * y_s; inverse of :func:`measure_to_density`."""
    check_density(space, g, y)
    return EquivalentConditionalMeasure(space.probs * y.values)


def measure_to_density(
    space: FiniteProbabilitySpace, g: Partition, nu: EquivalentConditionalMeasure
) -> ConditionalDensity:
    """Density dnu/dmu with values nu_s / p_s; inverse of :func:`density_to_measure`."""
    check_measure(space, g, nu)
    return ConditionalDensity(nu.weights / space.probs)


def cond_divergence(
    space: FiniteProbabilitySpace,
    g: Partition,
    gen: DivergenceGenerator,
    nu: EquivalentConditionalMeasure,
) -> ConditionalValue:
    """Conditional phi-divergence of nu from the base measure, per atom."""
    check_measure(space, g, nu)
    y = nu.weights / space.probs
    phi_y = np.asarray(gen.phi(y), dtype=float)
    out = np.empty(g.num_atoms)
    for i, idx in enumerate(g.index_arrays()):
        p = space.probs[idx]
        out[i] = float(p @ phi_y[idx]) / float(p.sum())
    return ConditionalValue(out)


def cond_expectation_under(
    space: FiniteProbabilitySpace,
    g: Partition,
    nu: EquivalentConditionalMeasure,
    x: RandomVariable,
) -> ConditionalValue:
    """Conditional expectation of x under nu given the partition."""
    _check_pair(space, g)
    _check_rv(space, x)
    if len(nu) != space.num_states:
        raise ValueError(f"measure has length {len(nu)}, expected {space.num_states}")
    out = np.empty(g.num_atoms)
    for i, idx in enumerate(g.index_arrays()):
        w = nu.weights[idx]
        mass = float(w.sum())
        if mass <= 0.0:
            raise ValueError(f"atom A{i}: measure mass is zero, conditional expectation undefined")
        out[i] = float(w @ x.values[idx]) / mass
    return ConditionalValue(out)


def donsker_varadhan_value(
    space: FiniteProbabilitySpace,
    g: Partition,
    gen: DivergenceGenerator,
    nu: EquivalentConditionalMeasure,
    z: RandomVariable,
) -> ConditionalValue:
    """Variational lower bound E_nu[z | G] - E_mu[phi_star(z) | G].

    Never exceeds the conditional divergence, and attains it at the argument
    built by :func:`dv_optimal_argument` (for a strictly positive density).
    """
    check_measure(space, g, nu)
    _check_rv(space, z, "z")
    star = np.asarray(gen.phi_star(z.values), dtype=float)
    out = np.empty(g.num_atoms)
    for i, idx in enumerate(g.index_arrays()):
        w = nu.weights[idx]
        p = space.probs[idx]
        out[i] = float(w @ z.values[idx]) / float(w.sum()) - float(p @ star[idx]) / float(p.sum())
    return ConditionalValue(out)


def dv_optimal_argument(
    space: FiniteProbabilitySpace,
    g: Partition,
    gen: DivergenceGenerator,
    nu: EquivalentConditionalMeasure,
) -> RandomVariable:
    """Argument attaining the variational form: phi_prime at the density.

    States where the density equals 0 or 1 get argument 0; at density 1 this
    agrees with phi_prime(1) = 0, and at density 0 it keeps the argument
    finite (there the supremum is approached, not attained, unless the atom
    gives those states no weight under nu).
    """
    if gen.phi_prime is None:
        raise ValueError(f"generator {gen.name!r} has no phi_prime; cannot build the attaining argument")
    y = measure_to_density(space, g, nu).values
    z = np.zeros_like(y)
    inner = (y != 0.0) & (y != 1.0)
    if np.any(inner):
        z[inner] = np.asarray(gen.phi_prime(y[inner]), dtype=float)
    return RandomVariable(z)
