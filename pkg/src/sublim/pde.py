"""Monotone explicit finite differences for the G-heat and G-HJB equations in 1-D.

    u_t = G(u_xx),            G(a) = (sigma_max^2 a^+ - sigma_min^2 a^-) / 2
    u_t = G(u_x, u_xx),       G(p, a) = max over (mu, sigma^2) of mu p + sigma^2 a / 2

Both schemes are explicit in time with a centred second difference; the drift
term is upwinded.  The time step keeps every node's own coefficient
nonnegative, so the update is monotone and obeys the discrete maximum
principle.  Boundary nodes copy their inner neighbour after every step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from sublim.clt import DriftStepFamily, StepFamily, TestFunction, ValueGrid
from sublim.errors import NumericError, ParameterError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GParams1D:
    """Variance interval and optional drift interval."""

    sigma_min_sq: float
    sigma_max_sq: float
    mu_min: float = 0.0
    mu_max: float = 0.0

    def __post_init__(self):
        if not 0 <= self.sigma_min_sq <= self.sigma_max_sq:
            raise ParameterError("need 0 <= sigma_min_sq <= sigma_max_sq")
        if not self.mu_min <= self.mu_max:
            raise ParameterError("need mu_min <= mu_max")
        if self.sigma_max_sq == 0 and self.mu_min == self.mu_max == 0:
            raise ParameterError("G would vanish identically")

    @property
    def has_drift(self) -> bool:
        return self.mu_min != 0 or self.mu_max != 0


def g_eval(G: GParams1D, a):
    """G(a) = (sigma_max^2 max(a, 0) - sigma_min^2 max(-a, 0)) / 2; vectorized."""
    a = np.asarray(a, dtype=float)
    out = (0.5 * G.sigma_max_sq) * np.maximum(a, 0.0) - (0.5 * G.sigma_min_sq) * np.maximum(-a, 0.0)
    return float(out) if out.ndim == 0 else out


def g_eval_trace(A, covariances: Sequence) -> float:
    """d-dimensional G(A) = max_theta tr(A Sigma_theta) / 2."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
        raise ParameterError("A must be a symmetric square matrix")
    return max(0.5 * float(np.trace(A @ np.asarray(S, dtype=float))) for S in covariances)


def g_from_family(F: StepFamily | DriftStepFamily) -> GParams1D:
    if isinstance(F, DriftStepFamily):
        log.info(
            "drift rectangle [%g, %g] x [%g, %g] ignores correlation between drift and variance; "
            "use gp_eval_family for the exact G(p, a)",
            min(F.means_y), max(F.means_y), F.sigma_min_sq, F.sigma_max_sq,
        )
        return GParams1D(F.sigma_min_sq, F.sigma_max_sq, min(F.means_y), max(F.means_y))
    return GParams1D(F.sigma_min_sq, F.sigma_max_sq)


def gp_eval(G: GParams1D, p: float, a: float) -> float:
    """Rectangle relaxation: sup over drift and variance intervals separately."""
    return G.mu_max * max(p, 0.0) - G.mu_min * max(-p, 0.0) + g_eval(G, a)


def gp_eval_family(DF: DriftStepFamily, p: float, a: float) -> float:
    """max_theta (p E_theta[Y] + a E_theta[X^2] / 2)."""
    return max(p * my + 0.5 * a * vx for my, vx in zip(DF.means_y, DF.variances_x))


@dataclass(frozen=True)
class PdeConfig:
    half_width: float
    dx: float
    T: float = 1.0
    gamma: float = 0.9
    snapshot_times: tuple = ()

    def __post_init__(self):
        if not (self.half_width > 0 and self.dx > 0 and self.T > 0):
            raise ParameterError("half_width, dx and T must be positive")
        if not 0 < self.gamma <= 1:
            raise ParameterError("gamma must lie in (0, 1]")
        cells = 2 * self.half_width / self.dx
        if abs(cells - round(cells)) > 1e-9:
            raise ParameterError(f"2 * half_width / dx = {cells!r} is not an integer")
        for t in self.snapshot_times:
            if not 0 <= t <= self.T:
                raise ParameterError(f"snapshot time {t} outside [0, {self.T}]")
        object.__setattr__(self, "snapshot_times", tuple(sorted(float(t) for t in self.snapshot_times)))

    @property
    def node_count(self) -> int:
        return int(round(2 * self.half_width / self.dx)) + 1

    def nodes(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.node_count)


@dataclass
class Solution:
    initial: TestFunction
    snapshots: list
    dt: float
    steps: int
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> ValueGrid:
        return self.snapshots[-1][1]

    def at(self, t: float) -> ValueGrid:
        return min(self.snapshots, key=lambda s: abs(s[0] - t))[1]

    def snapshot_tsv(self, k: int) -> str:
        grid = self.snapshots[k][1]
        return "".join(f"{x:.12g}\t{u:.12g}\n" for x, u in zip(grid.nodes, grid.values))


def _rate(G: GParams1D, dx: float, drift: bool) -> float:
    rate = G.sigma_max_sq / dx**2
    if drift:
        rate += max(abs(G.mu_min), abs(G.mu_max)) / dx
    return rate


def _step_count(G, dx, t, gamma, drift) -> int:
    if t == 0:
        return 0
    return max(1, math.ceil(t * _rate(G, dx, drift) / gamma - 1e-12))


def _step_gheat(u, dt, dx, G):
    d2 = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dx * dx)
    new = np.empty_like(u)
    new[1:-1] = u[1:-1] + dt * g_eval(G, d2)
    new[0] = new[1]
    new[-1] = new[-2]
    return new


def _step_ghjb(u, dt, dx, G):
    d2 = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dx * dx)
    fwd = (u[2:] - u[1:-1]) / dx
    bwd = (u[1:-1] - u[:-2]) / dx
    best = None
    for mu in (G.mu_min, G.mu_max):
        drift = mu * (fwd if mu > 0 else bwd)
        for s in (G.sigma_min_sq, G.sigma_max_sq):
            h = (0.5 * s) * d2 + drift
            best = h if best is None else np.maximum(best, h)
    new = np.empty_like(u)
    new[1:-1] = u[1:-1] + dt * best
    new[0] = new[1]
    new[-1] = new[-2]
    return new


def _march(u, G, dx, t, gamma, drift, stops=()):
    """Advance grid values by time t; also return copies at the requested step indices."""
    nsteps = _step_count(G, dx, t, gamma, drift)
    if nsteps == 0:
        return u.copy(), 0.0, 0, {k: u.copy() for k in stops if k == 0}
    dt = t / nsteps
    step = _step_ghjb if drift else _step_gheat
    saved = {k: u.copy() for k in stops if k == 0}
    for k in range(1, nsteps + 1):
        u = step(u, dt, dx, G)
        if not np.all(np.isfinite(u)):
            raise NumericError(f"non-finite value at step {k}")
        if k in stops:
            saved[k] = u.copy()
    return u, dt, nsteps, saved


def _solve(G, phi, config, drift):
    nodes = config.nodes()
    u0 = phi(nodes)
    nsteps = _step_count(G, config.dx, config.T, config.gamma, drift)
    dt = config.T / nsteps
    times = config.snapshot_times or (config.T,)
    stops = {t: min(nsteps, int(round(t / dt))) for t in times}
    _, dt, nsteps, saved = _march(u0, G, config.dx, config.T, config.gamma, drift, set(stops.values()))
    snaps = [(k * dt, ValueGrid(float(nodes[0]), float(nodes[-1]), saved[k])) for k in sorted(set(stops.values()))]
    return Solution(phi, snaps, dt, nsteps)


def solve_gheat(G: GParams1D, phi: TestFunction, config: PdeConfig) -> Solution:
    """Solve u_t = G(u_xx), u(0) = phi on [-L, L] with time step gamma dx^2 / sigma_max^2 (or smaller)."""
    if G.has_drift:
        raise ParameterError("solve_gheat takes no drift; use solve_ghjb")
    if G.sigma_max_sq <= 0:
        raise ParameterError("sigma_max_sq must be positive")
    return _solve(G, phi, config, drift=False)


def solve_ghjb(G: GParams1D, phi: TestFunction, config: PdeConfig) -> Solution:
    """Solve u_t = G(u_x, u_xx) by maximizing over the four corner controls."""
    return _solve(G, phi, config, drift=True)


def evolve(G: GParams1D, values: np.ndarray, dx: float, t: float, gamma: float = 0.9) -> np.ndarray:
    """Advance raw grid values by time t with the scheme matching ``G``."""
    if t < 0:
        raise ParameterError("t must be nonnegative")
    return _march(np.asarray(values, dtype=float), G, dx, t, gamma, G.has_drift)[0]


def _interior(config: PdeConfig) -> np.ndarray:
    return np.abs(config.nodes()) <= config.half_width / 2


def semigroup_check(G: GParams1D, phi: TestFunction, t: float, s: float, config: PdeConfig) -> float:
    """max over |x| <= L/2 of |evolve(evolve(phi, s), t) - evolve(phi, t + s)|."""
    if t < 0 or s < 0:
        raise ParameterError("t and s must be nonnegative")
    if t + s > config.T + 1e-12:
        raise ParameterError(f"t + s = {t + s} exceeds T = {config.T}")
    u0 = phi(config.nodes())
    two = evolve(G, evolve(G, u0, config.dx, s, config.gamma), config.dx, t, config.gamma)
    one = evolve(G, u0, config.dx, t + s, config.gamma)
    return float(np.max(np.abs(two - one)[_interior(config)]))


def stability_check(G: GParams1D, phi: TestFunction, a: float, b: float, config: PdeConfig) -> float:
    """E[phi(a xi + b xi')] against E[phi(sqrt(a^2 + b^2) xi)], through the semigroup with t=a^2, s=b^2."""
    if a < 0 or b < 0:
        raise ParameterError("a and b must be nonnegative")
    return semigroup_check(G, phi, a * a, b * b, config)


class HolderCheck(NamedTuple):
    lhs: float
    bound: float
    slack: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.bound + self.slack


def time_holder_check(G: GParams1D, phi: TestFunction, t: float, s: float, config: PdeConfig) -> HolderCheck:
    """|u(t+s) - u(t)| on the interior against Lip(phi) sigma_max sqrt(s)."""
    if not s > 0:
        raise ParameterError("s must be positive")
    if t < 0 or t + s > config.T + 1e-12:
        raise ParameterError("need 0 <= t and t + s <= T")
    ut = evolve(G, phi(config.nodes()), config.dx, t, config.gamma)
    uts = evolve(G, ut, config.dx, s, config.gamma)
    lhs = float(np.max(np.abs(uts - ut)[_interior(config)]))
    bound = phi.lipschitz * math.sqrt(G.sigma_max_sq) * math.sqrt(s)
    return HolderCheck(lhs, bound, 10 * config.dx * phi.lipschitz)


def gnormal_value(G: GParams1D, phi: TestFunction, config: PdeConfig) -> float:
    """E[phi(xi)] for G-normal xi, read off as u(1, 0)."""
    sol = solve_gheat(G, phi, replace(config, T=1.0, snapshot_times=(1.0,)))
    return sol.final(0.0)
