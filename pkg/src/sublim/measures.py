"""Finitely supported measures, ambiguity sets, upper expectations and capacities.

Everything here lives on the finite algebra generated by the atoms of an
ambiguity set, so every supremum is a maximum over finitely many linear
expectations and every capacity identity is exactly computable.

Functions and events are evaluated atom by atom: in dimension 1 they receive
a Python float, in higher dimension a 1-D numpy array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from sublim.errors import EvaluationError, ParameterError

WEIGHT_TOL = 1e-12
TIGHTNESS_STEP = 0.5


def _as_atom_array(atoms) -> np.ndarray:
    arr = np.asarray(atoms, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ParameterError("atoms must be a nonempty list of points of a common dimension")
    return arr


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """A probability measure with finitely many atoms in R^d.

    Weights whose sum misses 1 by at most ``WEIGHT_TOL`` are renormalized;
    anything further off is rejected.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        try:
            atoms = _as_atom_array(self.atoms)
            weights = np.asarray(self.weights, dtype=float).reshape(-1)
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"malformed measure: {exc}") from None
        if weights.shape[0] != atoms.shape[0]:
            raise ParameterError(
                f"{atoms.shape[0]} atoms but {weights.shape[0]} weights"
            )
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise ParameterError("atoms and weights must be finite")
        if np.any(weights < 0):
            raise ParameterError("weights must be nonnegative")
        total = float(weights.sum())
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ParameterError(f"weights sum to {total!r}, not 1")
        weights = weights / total
        if np.unique(atoms, axis=0).shape[0] != atoms.shape[0]:
            raise ParameterError("atoms must be pairwise distinct")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __len__(self):
        return self.atoms.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def expectation(self, func) -> float:
        return float(self.weights @ evaluate_at_atoms(func, self.atoms))

    def __repr__(self):
        return f"DiscreteMeasure(atoms={self.atoms.tolist()}, weights={self.weights.tolist()})"


def rademacher(scale: float = 1.0) -> DiscreteMeasure:
    """Equal mass at -scale and +scale."""
    return DiscreteMeasure([-scale, scale], [0.5, 0.5])


def point_mass(point) -> DiscreteMeasure:
    return DiscreteMeasure([np.atleast_1d(np.asarray(point, dtype=float))], [1.0])


class AmbiguitySet:
    """A nonempty finite family of discrete measures on a common R^d.

    The union of all atoms (the support) is computed once; each member keeps
    an index map into it so functions and events are evaluated only once per
    distinct point.
    """

    def __init__(self, measures: Sequence[DiscreteMeasure]):
        measures = tuple(measures)
        if not measures:
            raise ParameterError("an ambiguity set needs at least one measure")
        dims = {m.dim for m in measures}
        if len(dims) != 1:
            raise ParameterError(f"measures have mixed dimensions {sorted(dims)}")
        self.measures = measures
        self.dim = dims.pop()
        stacked = np.concatenate([m.atoms for m in measures], axis=0)
        support, inverse = np.unique(stacked, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        support.setflags(write=False)
        self.support = support
        splits = np.cumsum([len(m) for m in measures])[:-1]
        self._index = tuple(np.split(inverse, splits))

    def __len__(self):
        return len(self.measures)

    def __iter__(self):
        return iter(self.measures)

    def __getitem__(self, i):
        return self.measures[i]

    def __repr__(self):
        return f"AmbiguitySet({list(self.measures)!r})"

    def expectations_from_support(self, values: np.ndarray) -> np.ndarray:
        """Linear expectations of every member, given values on ``support``."""
        return np.array([m.weights @ values[idx] for m, idx in zip(self.measures, self._index)])

    def mask(self, event) -> np.ndarray:
        return np.array([bool(event(_point(p))) for p in self.support], dtype=bool)


def _point(row: np.ndarray):
    return float(row[0]) if row.shape[0] == 1 else row.copy()


def evaluate_at_atoms(func, atoms: np.ndarray) -> np.ndarray:
    """Evaluate ``func`` at each row of ``atoms``; non-finite results raise."""
    out = np.empty(atoms.shape[0])
    for i, row in enumerate(atoms):
        p = _point(row)
        v = float(func(p))
        if not math.isfinite(v):
            raise EvaluationError(f"non-finite value {v!r} at atom {row.tolist()}", point=row.tolist())
        out[i] = v
    return out


@dataclass(frozen=True)
class RandomVariable:
    """A real function on R^d with optional sup-norm and Lipschitz bounds."""

    func: Callable
    bound: float | None = None
    lipschitz: float | None = None

    def __call__(self, x):
        return self.func(x)

    @staticmethod
    def constant(c: float) -> "RandomVariable":
        return RandomVariable(lambda x: c, bound=abs(c), lipschitz=0.0)


@dataclass(frozen=True)
class Event:
    """A Borel set given by a deterministic membership predicate."""

    contains: Callable
    label: str = field(default="", compare=False)

    def __call__(self, x) -> bool:
        return bool(self.contains(x))

    def __or__(self, other: "Event") -> "Event":
        return Event(lambda x: self(x) or other(x), f"({self.label} | {other.label})")

    @staticmethod
    def everything() -> "Event":
        return Event(lambda x: True, "everything")

    @staticmethod
    def empty() -> "Event":
        return Event(lambda x: False, "empty")

    @staticmethod
    def norm_greater(radius: float) -> "Event":
        return Event(lambda x: float(np.linalg.norm(np.atleast_1d(x))) > radius, f"|x|>{radius}")

    @staticmethod
    def norm_at_least(radius: float) -> "Event":
        return Event(lambda x: float(np.linalg.norm(np.atleast_1d(x))) >= radius, f"|x|>={radius}")

    @staticmethod
    def interval(lo: float, hi: float) -> "Event":
        return Event(lambda x: lo <= float(np.atleast_1d(x)[0]) <= hi, f"[{lo},{hi}]")

    @staticmethod
    def points(points) -> "Event":
        keys = {tuple(np.atleast_1d(np.asarray(p, dtype=float)).tolist()) for p in points}
        return Event(lambda x: tuple(np.atleast_1d(x).tolist()) in keys, "points")

    @staticmethod
    def union(events: Sequence["Event"]) -> "Event":
        events = tuple(events)
        return Event(lambda x: any(e(x) for e in events), "union")


def linear_expectations(P: AmbiguitySet, X) -> np.ndarray:
    """E_theta[X] for every member theta, in index order."""
    return P.expectations_from_support(evaluate_at_atoms(X, P.support))


def upper_expectation(P: AmbiguitySet, X) -> tuple[float, int]:
    """Return ``(max_theta E_theta[X], least maximizing index)``."""
    values = linear_expectations(P, X)
    k = int(np.argmax(values))
    return float(values[k]), k


@dataclass
class SublinearityReport:
    monotone: bool
    monotone_applicable: bool
    constant_preserving: bool
    subadditive: bool
    homogeneous: bool
    witnesses: dict

    @property
    def ok(self) -> bool:
        return self.monotone and self.constant_preserving and self.subadditive and self.homogeneous


def verify_sublinearity(P: AmbiguitySet, X, Y, lam: float, c: float, tol: float = 1e-10) -> SublinearityReport:
    if lam < 0:
        raise ParameterError("lambda must be nonnegative")
    x = evaluate_at_atoms(X, P.support)
    y = evaluate_at_atoms(Y, P.support)
    ex = float(P.expectations_from_support(x).max())
    ey = float(P.expectations_from_support(y).max())
    exy = float(P.expectations_from_support(x + y).max())
    elx = float(P.expectations_from_support(lam * x).max())
    ec = float(P.expectations_from_support(np.full_like(x, c)).max())
    applicable = bool(np.all(x >= y))
    return SublinearityReport(
        monotone=(not applicable) or ex >= ey - tol,
        monotone_applicable=applicable,
        constant_preserving=abs(ec - c) <= tol,
        subadditive=exy <= ex + ey + tol,
        homogeneous=abs(elx - lam * ex) <= tol,
        witnesses={"E[X]": ex, "E[Y]": ey, "E[X+Y]": exy, "E[lam X]": elx, "E[c]": ec},
    )


def _capacity_of_mask(P: AmbiguitySet, mask: np.ndarray) -> float:
    # summed weights can overshoot 1 by an ulp
    return min(1.0, float(P.expectations_from_support(mask.astype(float)).max()))


def capacity(P: AmbiguitySet, A) -> float:
    """c(A) = max_theta P_theta(A)."""
    return _capacity_of_mask(P, P.mask(A))


def polar_check(P: AmbiguitySet, A) -> bool:
    return capacity(P, A) == 0.0


@dataclass
class CapacityReport:
    capacities: list
    union_capacity: float
    envelope: list
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def capacity_properties_check(P: AmbiguitySet, events: Sequence, tol: float = 1e-10) -> CapacityReport:
    """Check monotonicity, subadditivity and continuity from below on ``events``.

    Inclusion between events is decided on the support of ``P``.
    """
    if not events:
        raise ParameterError("events must be nonempty")
    masks = [P.mask(A) for A in events]
    caps = [_capacity_of_mask(P, m) for m in masks]
    violations = []
    for i, mi in enumerate(masks):
        for j, mj in enumerate(masks):
            if i != j and not np.any(mi & ~mj) and caps[i] > caps[j] + tol:
                violations.append(f"monotonicity: A{i} within A{j} but c={caps[i]} > {caps[j]}")
    envelope, acc = [], np.zeros_like(masks[0])
    for m in masks:
        acc = acc | m
        envelope.append(_capacity_of_mask(P, acc))
    for n in range(len(masks)):
        if envelope[n] > sum(caps[: n + 1]) + tol:
            violations.append(f"subadditivity: c(B{n})={envelope[n]} > {sum(caps[: n + 1])}")
        if n and envelope[n] < envelope[n - 1] - tol:
            violations.append(f"envelope decreases at {n}: {envelope[n - 1]} -> {envelope[n]}")
    union_cap = capacity(P, Event.union(events))
    if abs(union_cap - envelope[-1]) > tol:
        violations.append(f"continuity from below: lim c(B_n)={envelope[-1]} != c(union)={union_cap}")
    return CapacityReport(caps, union_cap, envelope, violations)


def borel_cantelli_tail(P: AmbiguitySet, events: Sequence) -> list[float]:
    """Tail capacities t_n = c(A_n u A_{n+1} u ... u A_m), n = 1..m."""
    if not events:
        raise ParameterError("need at least one event")
    masks = [P.mask(A) for A in events]
    tails, acc = [], np.zeros_like(masks[0])
    for m in reversed(masks):
        acc = acc | m
        tails.append(_capacity_of_mask(P, acc))
    return tails[::-1]


class Tightness(NamedTuple):
    radius: float
    verified: bool


def tightness_radius(P: AmbiguitySet, eps: float, l: float) -> Tightness:
    """Smallest N on the 0.5-lattice with N^l > E[|x|^l]/eps, plus a direct check.

    ``verified`` is True when the capacity of {|x| > N} is below ``eps``.
    """
    if not (0 < eps <= 1):
        raise ParameterError(f"eps must lie in (0, 1], got {eps}")
    if not l > 0:
        raise ParameterError(f"l must be positive, got {l}")
    norms = np.linalg.norm(P.support, axis=1)
    moment = float(P.expectations_from_support(norms**l).max())
    target = moment / eps
    k = max(1, math.floor(target ** (1.0 / l) / TIGHTNESS_STEP))
    while (k * TIGHTNESS_STEP) ** l <= target:
        k += 1
    while k > 1 and ((k - 1) * TIGHTNESS_STEP) ** l > target:
        k -= 1
    radius = k * TIGHTNESS_STEP
    beyond = _capacity_of_mask(P, norms > radius)
    return Tightness(radius, beyond < eps)
