"""Finite probability spaces, partitions, and conditional operations.

Conventions
-----------
A finite probability space is a list of named states with strictly positive
probabilities summing to one.  A sub-sigma-algebra is represented by the
partition of the state set that generates it; its members are called atoms.

Random variables are real vectors indexed by state.  Conditional values
(conditional expectations, conditional norms, conditional risk numbers) are
real vectors indexed by atom; they stand for the G-measurable functions that
are constant on each atom.

All operations are pure functions of their inputs and are safe to call from
multiple threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from numbers import Real
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "FiniteProbabilitySpace",
    "Partition",
    "RandomVariable",
    "ConditionalValue",
    "atom_masses",
    "cond_expectation",
    "cond_sup_norm",
    "cond_p_norm",
    "embed",
    "restrict_mask",
]

# A probability vector may miss 1.0 by accumulated rounding up to this much;
# anything worse is treated as a modelling error rather than noise.
PROB_SUM_TOL = 1e-12


def _as_float_vector(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be a one-dimensional vector, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{what} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be finite, got {arr!r}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FiniteProbabilitySpace:
    """Finite state set with strictly positive probabilities.

    The probability vector is validated (positive entries, total within
    ``PROB_SUM_TOL`` of one) and then renormalized exactly once so that
    downstream identities can rely on an exact unit total.
    """

    state_names: tuple
    probs: np.ndarray

    def __init__(self, state_names: Sequence[str], probs):
        names = tuple(str(n) for n in state_names)
        if len(set(names)) != len(names):
            raise ValueError("state names must be distinct")
        arr = np.asarray(probs, dtype=float)
        if arr.ndim != 1 or arr.size != len(names):
            raise ValueError(
                f"probs must be a vector of length {len(names)}, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("probabilities must be finite")
        if np.any(arr <= 0.0):
            bad = [names[i] for i in np.nonzero(arr <= 0.0)[0]]
            raise ValueError(f"probabilities must be strictly positive, offending states: {bad}")
        total = float(arr.sum())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities must sum to 1 within {PROB_SUM_TOL}, got {total!r}")
        arr = arr / total
        arr.setflags(write=False)
        object.__setattr__(self, "state_names", names)
        object.__setattr__(self, "probs", arr)

    @property
    def num_states(self) -> int:
        return len(self.state_names)

    def index_of(self, name: str) -> int:
        try:
            return self.state_names.index(name)
        except ValueError:
            raise ValueError(f"unknown state name {name!r}") from None


@dataclass(frozen=True, eq=True)
class Partition:
    """Partition of the state index set; each member generates one atom.

    Atoms are nonempty, pairwise disjoint index tuples whose union is the
    full index range ``0..n-1``.  The generated sigma-algebra consists of
    all unions of atoms.
    """

    atoms: tuple

    def __init__(self, atoms: Iterable[Iterable[int]]):
        norm = []
        for atom in atoms:
            members = tuple(int(i) for i in atom)
            if not members:
                raise ValueError("atoms must be nonempty")
            norm.append(members)
        if not norm:
            raise ValueError("a partition needs at least one atom")
        flat = [i for atom in norm for i in atom]
        n = len(flat)
        if len(set(flat)) != n:
            raise ValueError("atoms must be pairwise disjoint")
        if set(flat) != set(range(n)):
            raise ValueError(
                "atoms must cover exactly the index range 0..n-1; "
                f"got indices {sorted(set(flat))}"
            )
        object.__setattr__(self, "atoms", tuple(norm))
        object.__setattr__(
            self, "_index_arrays", tuple(np.asarray(a, dtype=np.intp) for a in norm)
        )

    @property
    def num_states(self) -> int:
        return sum(len(a) for a in self.atoms)

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    def index_arrays(self) -> tuple:
        """Per-atom state indices as numpy integer arrays."""
        return self._index_arrays

    @classmethod
    def trivial(cls, num_states: int) -> "Partition":
        """Single atom containing every state (no information)."""
        return cls([tuple(range(num_states))])

    @classmethod
    def discrete(cls, num_states: int) -> "Partition":
        """One atom per state (full information)."""
        return cls([(i,) for i in range(num_states)])


class _VectorBase:
    """Shared elementwise arithmetic for state- and atom-indexed vectors.

    Operands must be scalars or vectors of the same kind and length; mixing
    state-indexed with atom-indexed vectors is a type error on purpose.
    """

    __slots__ = ()

    values: np.ndarray

    def _coerce(self, other):
        if isinstance(other, type(self)):
            if other.values.shape != self.values.shape:
                raise ValueError(
                    f"length mismatch: {self.values.size} vs {other.values.size}"
                )
            return other.values
        if isinstance(other, Real):
            return float(other)
        return NotImplemented

    def __add__(self, other):
        ov = self._coerce(other)
        if ov is NotImplemented:
            return NotImplemented
        return type(self)(self.values + ov)

    __radd__ = __add__

    def __sub__(self, other):
        ov = self._coerce(other)
        if ov is NotImplemented:
            return NotImplemented
        return type(self)(self.values - ov)

    def __rsub__(self, other):
        ov = self._coerce(other)
        if ov is NotImplemented:
            return NotImplemented
        return type(self)(ov - self.values)

    def __mul__(self, other):
        ov = self._coerce(other)
        if ov is NotImplemented:
            return NotImplemented
        return type(self)(self.values * ov)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(-self.values)

    def __len__(self) -> int:
        return self.values.size

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.values.tolist()})"


@dataclass(frozen=True, eq=False)
class RandomVariable(_VectorBase):
    """Real-valued function of the state, stored as a state-indexed vector."""

    values: np.ndarray

    def __init__(self, values):
        object.__setattr__(self, "values", _as_float_vector(values, "random variable"))


@dataclass(frozen=True, eq=False)
class ConditionalValue(_VectorBase):
    """G-measurable quantity, stored as an atom-indexed vector."""

    values: np.ndarray

    def __init__(self, values):
        object.__setattr__(self, "values", _as_float_vector(values, "conditional value"))


def _check_pair(space: FiniteProbabilitySpace, g: Partition) -> None:
    if g.num_states != space.num_states:
        raise ValueError(
            f"partition covers {g.num_states} states but the space has {space.num_states}"
        )


def _check_rv(space: FiniteProbabilitySpace, x: RandomVariable, what: str = "x") -> None:
    if len(x) != space.num_states:
        raise ValueError(f"{what} has length {len(x)}, expected {space.num_states}")


def _check_cv(g: Partition, a: ConditionalValue, what: str = "a") -> None:
    if len(a) != g.num_atoms:
        raise ValueError(f"{what} has length {len(a)}, expected {g.num_atoms} (one per atom)")


def atom_masses(space: FiniteProbabilitySpace, g: Partition) -> np.ndarray:
    """Probability mass of each atom, in atom order."""
    _check_pair(space, g)
    return np.array([space.probs[idx].sum() for idx in g.index_arrays()])


def atom_weights(space: FiniteProbabilitySpace, g: Partition, atom_index: int) -> np.ndarray:
    """Conditional probabilities of the states inside one atom (sum to 1)."""
    _check_pair(space, g)
    idx = g.index_arrays()[atom_index]
    p = space.probs[idx]
    return p / p.sum()


def cond_expectation(
    space: FiniteProbabilitySpace, g: Partition, x: RandomVariable
) -> ConditionalValue:
    """Conditional expectation of ``x`` given the partition.

    On each atom A the value is sum(p_s * x_s for s in A) / P(A), the
    probability-weighted average of x over A.
    """
    _check_pair(space, g)
    _check_rv(space, x)
    out = np.empty(g.num_atoms)
    for i, idx in enumerate(g.index_arrays()):
        p = space.probs[idx]
        out[i] = float(p @ x.values[idx]) / float(p.sum())
    return ConditionalValue(out)


def cond_sup_norm(
    space: FiniteProbabilitySpace, g: Partition, x: RandomVariable
) -> ConditionalValue:
    """Conditional sup norm: per-atom maximum of |x|.

    This is the essential supremum given the partition; every state inside
    an atom carries positive probability, so the plain maximum is exact.
    """
    _check_pair(space, g)
    _check_rv(space, x)
    ax = np.abs(x.values)
    return ConditionalValue([float(ax[idx].max()) for idx in g.index_arrays()])


def cond_p_norm(
    space: FiniteProbabilitySpace, g: Partition, x: RandomVariable, p: float
) -> ConditionalValue:
    """Conditional p-norm E[|x|^p | G]^(1/p) for p >= 1.

    ``p = inf`` is accepted and delegates to :func:`cond_sup_norm`, the
    limiting member of the same family.
    """
    _check_pair(space, g)
    _check_rv(space, x)
    p = float(p)
    if np.isnan(p) or p < 1.0:
        raise ValueError(f"p must satisfy p >= 1, got {p!r}")
    if np.isinf(p):
        return cond_sup_norm(space, g, x)
    ax = np.abs(x.values)
    out = np.empty(g.num_atoms)
    for i, idx in enumerate(g.index_arrays()):
        w = space.probs[idx]
        w = w / w.sum()
        out[i] = float(w @ ax[idx] ** p) ** (1.0 / p)
    return ConditionalValue(out)


def embed(g: Partition, a: ConditionalValue) -> RandomVariable:
    """Spread an atom-indexed vector out to a state-indexed one.

    The result is the G-measurable random variable that takes value a[i]
    on every state of atom i.
    """
    _check_cv(g, a)
    out = np.empty(g.num_states)
    for i, idx in enumerate(g.index_arrays()):
        out[idx] = a.values[i]
    return RandomVariable(out)


def restrict_mask(
    g: Partition, atom_index: int, x: RandomVariable, y: RandomVariable
) -> RandomVariable:
    """Splice two random variables along one atom: x on the atom, y elsewhere."""
    if not 0 <= atom_index < g.num_atoms:
        raise ValueError(f"atom_index {atom_index} out of range 0..{g.num_atoms - 1}")
    if len(x) != g.num_states or len(y) != g.num_states:
        raise ValueError(
            f"x and y must have length {g.num_states}, got {len(x)} and {len(y)}"
        )
    out = y.values.copy()
    idx = g.index_arrays()[atom_index]
    out[idx] = x.values[idx]
    return RandomVariable(out)
