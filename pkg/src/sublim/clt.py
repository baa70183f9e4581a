"""Backward dynamic programming for E[phi(S_n / sqrt(n))] under i.i.d. ambiguity.

Independence is read sequentially: after each step the adversary picks the
next member measure knowing the path so far.  The value therefore solves the
nested recursion

    u_n = phi,   u_k(x) = max_theta sum_j w_{theta,j} u_{k+1}(x + a_{theta,j} / sqrt(n)),

and the answer is u_0(0).  ``clt_value_exact`` enumerates the reachable
lattice; ``clt_value_dp`` runs the same recursion on a uniform grid with
clamped linear interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from sublim.errors import (
    DomainError,
    EvaluationError,
    NumericError,
    ParameterError,
    StateSpaceError,
)
from sublim.measures import AmbiguitySet, DiscreteMeasure

MEAN_TOL = 1e-12
KEY_SCALE = 1e12
DEFAULT_STATE_CAP = 2_000_000
_CHUNK = 1 << 20


def _family(measures) -> AmbiguitySet:
    if isinstance(measures, AmbiguitySet):
        return measures
    return AmbiguitySet(list(measures))


class StepFamily:
    """Zero-mean ambiguity set on the real line: the law of one CLT increment."""

    def __init__(self, measures: AmbiguitySet | Sequence[DiscreteMeasure]):
        P = _family(measures)
        if P.dim != 1:
            raise ParameterError(f"a step family lives on R^1, got dimension {P.dim}")
        for i, m in enumerate(P):
            mu = float(m.mean()[0])
            if abs(mu) > MEAN_TOL:
                raise ParameterError(f"member {i} has mean {mu!r}; increments must be centred")
        self.P = P
        self.variances = tuple(float(m.weights @ m.atoms[:, 0] ** 2) for m in P)
        if max(self.variances) <= 0:
            raise ParameterError("at least one member must have positive variance")

    @property
    def sigma_min_sq(self) -> float:
        return min(self.variances)

    @property
    def sigma_max_sq(self) -> float:
        return max(self.variances)

    @property
    def max_abs_atom(self) -> float:
        return float(np.abs(self.P.support).max())

    def displacements(self, n: int):
        root = math.sqrt(n)
        return [(m.atoms[:, 0] / root, m.weights) for m in self.P]

    def __repr__(self):
        return f"StepFamily({list(self.P)!r})"


class DriftStepFamily:
    """Ambiguity set of joint (x, y) increments with centred x-marginals.

    Step n of the generalized sum moves by x / sqrt(n) + y / n.
    """

    def __init__(self, measures: AmbiguitySet | Sequence[DiscreteMeasure]):
        P = _family(measures)
        if P.dim != 2:
            raise ParameterError(f"a drift step family lives on R^2, got dimension {P.dim}")
        for i, m in enumerate(P):
            mu = float(m.mean()[0])
            if abs(mu) > MEAN_TOL:
                raise ParameterError(f"member {i} has x-mean {mu!r}; x increments must be centred")
        self.P = P
        self.means_y = tuple(float(m.mean()[1]) for m in P)
        self.variances_x = tuple(float(m.weights @ m.atoms[:, 0] ** 2) for m in P)

    @property
    def sigma_min_sq(self) -> float:
        return min(self.variances_x)

    @property
    def sigma_max_sq(self) -> float:
        return max(self.variances_x)

    @property
    def max_abs_atom(self) -> float:
        return float(np.abs(self.P.support).max())

    def x_marginal(self) -> StepFamily:
        members = []
        for m in self.P:
            xs, inv = np.unique(m.atoms[:, 0], return_inverse=True)
            members.append(DiscreteMeasure(xs, np.bincount(inv.reshape(-1), weights=m.weights)))
        return StepFamily(members)

    def displacements(self, n: int):
        root = math.sqrt(n)
        return [(m.atoms[:, 0] / root + m.atoms[:, 1] / n, m.weights) for m in self.P]


@dataclass(frozen=True, eq=False)
class ValueGrid:
    """Function values on a uniform grid; queries use clamped linear interpolation."""

    x_min: float
    x_max: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if not self.x_min < self.x_max:
            raise ParameterError("x_min must be below x_max")
        if values.shape[0] < 3:
            raise ParameterError("a value grid needs at least 3 nodes")
        if not np.all(np.isfinite(values)):
            raise NumericError("grid values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.values.shape[0])

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.values.shape[0] - 1)

    def __call__(self, x):
        out = np.interp(x, self.nodes, self.values)
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TestFunction:
    """A bounded test function on R with sup-norm ``bound`` and Lipschitz ``lipschitz``.

    ``func`` must accept numpy arrays.
    """

    __test__ = False  # not a pytest class

    func: Callable
    bound: float
    lipschitz: float
    label: str = field(default="phi", compare=False)

    def __call__(self, x):
        return _evaluate(self.func, x)

    def __add__(self, other: "TestFunction") -> "TestFunction":
        f, g = self.func, other.func
        return TestFunction(
            lambda x: _evaluate(f, x) + _evaluate(g, x),
            self.bound + other.bound,
            self.lipschitz + other.lipschitz,
            f"({self.label} + {other.label})",
        )

    def __neg__(self) -> "TestFunction":
        f = self.func
        return TestFunction(lambda x: -_evaluate(f, x), self.bound, self.lipschitz, f"-{self.label}")

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return self + (-other)

    def scale(self, c: float) -> "TestFunction":
        f = self.func
        return TestFunction(
            lambda x: c * _evaluate(f, x), abs(c) * self.bound, abs(c) * self.lipschitz, f"{c}*{self.label}"
        )

    @staticmethod
    def constant(c: float) -> "TestFunction":
        return TestFunction(lambda x: np.full(np.shape(x), float(c)), abs(c), 0.0, repr(c))


def _evaluate(func, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    try:
        out = np.asarray(func(x), dtype=float)
        if out.shape != x.shape:
            out = np.broadcast_to(out, x.shape).copy()
    except (TypeError, ValueError):
        out = np.array([float(func(float(v))) for v in x.reshape(-1)]).reshape(x.shape)
    bad = ~np.isfinite(out)
    if np.any(bad):
        where = float(x.reshape(-1)[np.argmax(bad.reshape(-1))])
        raise EvaluationError(f"non-finite function value at x={where!r}", point=where)
    return out


@dataclass(frozen=True)
class GridConfig:
    """Uniform grid for the DP engine.

    ``radius=None`` picks 6 sigma_max + max|atom|, widened when needed so the
    grid covers every position reachable in n steps.
    """

    dx: float = 0.01
    radius: float | None = None

    def __post_init__(self):
        if not self.dx > 0:
            raise ParameterError("dx must be positive")
        if self.radius is not None and not self.radius > 0:
            raise ParameterError("radius must be positive")


def _keys(pos: np.ndarray) -> np.ndarray:
    return np.rint(pos * KEY_SCALE).astype(np.int64)


def _exact(members, phi, n: int, cap: int) -> float:
    steps = np.unique(np.concatenate([d for d, _ in members]))
    levels = [np.zeros(1, dtype=np.int64)]
    total = 1
    for _ in range(n):
        pos = levels[-1] / KEY_SCALE
        parts = []
        rows = max(1, _CHUNK // steps.size)
        for start in range(0, pos.size, rows):
            block = pos[start : start + rows]
            parts.append(np.unique(_keys(block[:, None] + steps[None, :])))
        nxt = np.unique(np.concatenate(parts))
        total += nxt.size
        if total > cap:
            raise StateSpaceError(
                f"more than {cap} reachable states after {len(levels)} steps; use clt_value_dp instead"
            )
        levels.append(nxt)
    u = _evaluate(phi, levels[n] / KEY_SCALE)
    for k in range(n - 1, -1, -1):
        pos = levels[k] / KEY_SCALE
        best = None
        for disp, w in members:
            idx = np.searchsorted(levels[k + 1], _keys(pos[:, None] + disp[None, :]))
            v = u[idx] @ w
            best = v if best is None else np.maximum(best, v)
        u = best
    return float(u[0])


def clt_value_exact(F: StepFamily | DriftStepFamily, phi, n: int, cap: int = DEFAULT_STATE_CAP) -> float:
    """Exact nested-sup value of E[phi(S_n / sqrt n)] by lattice enumeration.

    Positions are identified after rounding to 1e-12, which recombines
    commensurate atoms. ``phi`` may be unbounded (polynomials are fine).
    """
    if n < 1:
        raise ParameterError("n must be at least 1")
    return _exact(F.displacements(n), phi, n, cap)


def _grid_radius(F, n: int, grid: GridConfig) -> float:
    spread = 6.0 * math.sqrt(F.sigma_max_sq) + F.max_abs_atom
    if grid.radius is not None:
        if grid.radius < spread:
            raise DomainError(f"grid radius {grid.radius} is below the required {spread:.6g}")
        return grid.radius
    reach = max(float(np.abs(d).max()) for d, _ in F.displacements(n)) * n
    return max(spread, reach)


def _dp(members, phi: TestFunction, n: int, radius: float, dx: float) -> ValueGrid:
    half = math.ceil(radius / dx - 1e-9)
    nodes = np.arange(-half, half + 1) * dx
    u = _evaluate(phi, nodes)
    for step in range(n):
        best = None
        for disp, w in members:
            v = np.zeros_like(u)
            for d, wj in zip(disp, w):
                v += wj * np.interp(nodes + d, nodes, u)
            best = v if best is None else np.maximum(best, v)
        if not np.all(np.isfinite(best)):
            raise NumericError(f"non-finite value in DP step {step}")
        u = best
    return ValueGrid(float(nodes[0]), float(nodes[-1]), u)


def _require_bounded(phi):
    if getattr(phi, "bound", None) is None or not math.isfinite(phi.bound):
        raise ParameterError("the grid engine needs a bounded TestFunction")


def clt_value_dp(F: StepFamily, phi: TestFunction, n: int, grid: GridConfig = GridConfig()) -> float:
    """Grid version of ``clt_value_exact`` for bounded phi."""
    if n < 1:
        raise ParameterError("n must be at least 1")
    _require_bounded(phi)
    radius = _grid_radius(F, n, grid)
    return _dp(F.displacements(n), phi, n, radius, grid.dx)(0.0)


def generalized_clt_value_dp(
    DF: DriftStepFamily, phi: TestFunction, n: int, grid: GridConfig = GridConfig()
) -> float:
    """Value of E[phi(sum_i X_i / sqrt n + Y_i / n)] on a grid."""
    if n < 1:
        raise ParameterError("n must be at least 1")
    _require_bounded(phi)
    radius = _grid_radius(DF, n, grid)
    return _dp(DF.displacements(n), phi, n, radius, grid.dx)(0.0)


@dataclass(frozen=True)
class Row:
    n: int
    value: float
    delta: float


@dataclass
class ConvergenceTable:
    """Values along n with successive gaps; the first row has delta 0."""

    rows: list

    def __post_init__(self):
        ns = [r.n for r in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ParameterError("n must be strictly increasing")

    @property
    def values(self) -> list[float]:
        return [r.value for r in self.rows]

    @property
    def deltas(self) -> list[float]:
        return [r.delta for r in self.rows]

    def to_csv(self) -> str:
        lines = ["n,value,delta"]
        lines += [f"{r.n},{r.value:.12g},{r.delta:.12g}" for r in self.rows]
        return "\n".join(lines) + "\n"


def clt_convergence_table(
    F: StepFamily, phi, n_list: Sequence[int], grid: GridConfig = GridConfig(), mode: str = "dp"
) -> ConvergenceTable:
    if not n_list:
        raise ParameterError("n_list must be nonempty")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ParameterError("n_list must be strictly increasing")
    if mode == "dp":
        values = [clt_value_dp(F, phi, n, grid) for n in n_list]
    elif mode == "exact":
        values = [clt_value_exact(F, phi, n) for n in n_list]
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    rows, prev = [], None
    for n, v in zip(n_list, values):
        rows.append(Row(int(n), v, 0.0 if prev is None else abs(v - prev)))
        prev = v
    return ConvergenceTable(rows)


@dataclass
class DominationReport:
    sup_values: list
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def domination_check(
    F: StepFamily,
    pairs: Sequence[tuple],
    n_list: Sequence[int],
    grid: GridConfig = GridConfig(),
    slack: float = 1e-9,
) -> DominationReport:
    """Check E_n[phi] - E_n[psi] <= E_n[phi - psi] <= sup_m E_m[phi - psi]."""
    if not pairs:
        raise ParameterError("pairs must be nonempty")
    sups, violations = [], []
    for k, (phi, psi) in enumerate(pairs):
        diff = phi - psi
        rows = [
            (n, clt_value_dp(F, phi, n, grid), clt_value_dp(F, psi, n, grid), clt_value_dp(F, diff, n, grid))
            for n in n_list
        ]
        sup = max(r[3] for r in rows)
        sups.append(sup)
        for n, vp, vq, vd in rows:
            if vp - vq > vd + slack:
                violations.append(f"pair {k}, n={n}: {vp} - {vq} > {vd}")
            if vd > sup + slack:
                violations.append(f"pair {k}, n={n}: {vd} exceeds sup {sup}")
    return DominationReport(sups, violations)


def _longest_window(values: np.ndarray, candidates: list[int], eps: float) -> list[int]:
    order = sorted(candidates, key=lambda i: (values[i], i))
    best = None
    hi = 0
    for lo in range(len(order)):
        hi = max(hi, lo)
        while hi + 1 < len(order) and values[order[hi + 1]] - values[order[lo]] <= eps:
            hi += 1
        chosen = sorted(order[lo : hi + 1])
        if best is None or len(chosen) > len(best) or (len(chosen) == len(best) and chosen < best):
            best = chosen
    return best


def diagonal_extract(tables: Sequence[Sequence[float]], eps: float) -> list[int]:
    """Greedy finite analogue of the diagonal subsequence argument.

    ``tables[i][j]`` is the value of distribution i on dictionary entry j.
    Entry by entry, keep the largest set of indices whose values lie within
    ``eps`` of each other (ties go to the lexicographically smallest index
    list). Returns indices in increasing order.
    """
    if not len(tables):
        raise ParameterError("need at least one table")
    if not eps > 0:
        raise ParameterError("eps must be positive")
    try:
        arr = np.asarray(tables, dtype=float)
    except ValueError:
        raise ParameterError("all tables must share the same dictionary length") from None
    if arr.ndim != 2:
        raise ParameterError("all tables must share the same dictionary length")
    keep = list(range(arr.shape[0]))
    for j in range(arr.shape[1]):
        keep = _longest_window(arr[:, j], keep, eps)
    return keep


def _chi_raw(x, L: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    a = np.abs(np.atleast_1d(x))
    s = (a - L) / L
    out = np.where(a <= L, 1.0, 0.0)
    mid = (a > L) & (a < 2 * L)
    sm = s[mid]
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - sm * sm))
    return out.reshape(x.shape)


def smooth_cutoff(x, L: float):
    """1 on [-L, L], 0 beyond 2L, smooth in between."""
    out = _chi_raw(x, L)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def _cutoff_slope() -> float:
    # max |d/ds exp(1 - 1/(1 - s^2))| on (0, 1); the x-slope is this over L
    s = np.linspace(0.0, 1.0, 400_001)[1:-1]
    q = 1.0 - s * s
    return float(np.max(np.exp(1.0 - 1.0 / q) * 2.0 * s / (q * q))) * 1.001


def dictionary_default(L: float, count: int) -> list[TestFunction]:
    """Constant 1 followed by cutoff cos/sin modes cos(k pi x / L) chi(x), k = 1..ceil(count/2)."""
    if not L > 0:
        raise ParameterError("L must be positive")
    if count < 1:
        raise ParameterError("count must be at least 1")
    out = [TestFunction.constant(1.0)]
    chi_lip = _cutoff_slope() / L
    for k in range(1, math.ceil(count / 2) + 1):
        w = k * math.pi / L
        lip = w + chi_lip
        out.append(TestFunction(lambda x, w=w: np.cos(w * x) * _chi_raw(x, L), 1.0, lip, f"cos{k}"))
        out.append(TestFunction(lambda x, w=w: np.sin(w * x) * _chi_raw(x, L), 1.0, lip, f"sin{k}"))
    return out
