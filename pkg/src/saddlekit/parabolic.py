"""Semi-implicit evolution dv/dt + L v = f(v) with ODE barrier comparisons.

The stepping is (I + dt (L + b)) v_(k+1) = v_k + dt (f(v_k) + b v_k): the
linear part is implicit (unconditionally stable, the shift keeps the matrix
positive definite), the nonlinearity explicit.  Spatially constant states
with matching exterior data are annihilated by the discrete operator exactly,
so constant data evolves by the one-dimensional ODE alone; comparison with
the ODE trajectory is the computational shadow of the parabolic maximum
principle and of the bounded-entire-solution dichotomy (nonnegative bounded
states evolve to 0 or to 1).

On a truncated domain the exterior data is held at its initial value by
default; a time-dependent exterior (e.g. riding the ODE barrier itself) makes
the barrier comparison exact for the truncated problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import lu_factor, lu_solve

from .layer1d import Nonlinearity
from .operators import Operator1D

__all__ = [
    "EvolutionOperator1D",
    "EvolutionState",
    "evolve",
    "BarrierTrajectory",
    "ode_barrier",
    "discrete_barrier",
    "ComparisonReport",
    "barrier_comparison",
    "harnack_ratio",
]


class EvolutionOperator1D:
    """Affine spatial operator for evolutions on [-L, L].

    The exterior data beyond the grid is one of: a constant applied to both
    sides, a pair (c_left, c_right), a callable t -> c (both sides), or the
    string "extend", which continues the current edge values outward.  The
    "extend" mode makes spatially constant states exact equilibria of the
    spatial part, the truncated surrogate of constancy on the whole line.
    """

    def __init__(self, op: Operator1D, exterior=0.0):
        self.op = op
        self.exterior = exterior
        self.matrix = op.matrix()

    @property
    def x(self):
        return self.op.x

    def exterior_at(self, t: float, v: np.ndarray):
        if isinstance(self.exterior, str):
            if self.exterior != "extend":
                raise ValueError(f"unknown exterior mode {self.exterior!r}")
            return float(v[0]), float(v[-1])
        if callable(self.exterior):
            c = float(self.exterior(t))
            return c, c
        if np.isscalar(self.exterior):
            return float(self.exterior), float(self.exterior)
        cl, cr = self.exterior
        return float(cl), float(cr)

    def affine(self, t: float, v: np.ndarray) -> np.ndarray:
        cl, cr = self.exterior_at(t, v)
        return self.op.tail_vector(cl, cr)


@dataclass
class EvolutionState:
    operator: EvolutionOperator1D
    values: np.ndarray
    time: float
    dt: float
    history: list = field(default_factory=list)   # rows (t, min, max, |dv/dt|_inf)
    snapshots: dict = field(default_factory=dict)

    def record(self, rate: float):
        self.history.append((self.time, float(self.values.min()),
                             float(self.values.max()), rate))

    def history_csv(self, path):
        with open(path, "w") as f:
            f.write("t,min,max,rate\n")
            for row in self.history:
                f.write(",".join(f"{v:.17g}" for v in row) + "\n")


def evolve(eop: EvolutionOperator1D, nl: Nonlinearity, v0: np.ndarray, T: float,
           dt: float, b: float = None, record_every: int = 1,
           snapshot_times=(), blowup_factor: float = 10.0) -> EvolutionState:
    """Run the semi-implicit scheme from v0 up to time T with fixed step dt.

    Raises on blow-up (sup norm exceeding ``blowup_factor`` times the initial
    bound plus one).  Snapshot times are rounded to step boundaries.
    """
    v = np.asarray(v0, float).copy()
    n = len(v)
    if n != len(eop.x):
        raise ValueError("initial data does not match the grid")
    if b is None:
        bound = max(1.0, float(np.max(np.abs(v))))
        b = nl.shift_constant(bound)
    lu = lu_factor(np.eye(n) + dt * (eop.matrix + b * np.eye(n)))
    state = EvolutionState(operator=eop, values=v, time=0.0, dt=dt)
    state.record(np.nan)
    cap = blowup_factor * (float(np.max(np.abs(v))) + 1.0)
    steps = int(round(T / dt))
    snap = sorted(set(int(round(ts / dt)) for ts in snapshot_times))
    for k in range(1, steps + 1):
        g = eop.affine(state.time + dt, v)
        rhs = v + dt * (nl.f(v) + b * v - g)
        v_new = lu_solve(lu, rhs)
        rate = float(np.max(np.abs(v_new - v)) / dt)
        v = v_new
        state.values = v
        state.time = k * dt
        if np.max(np.abs(v)) > cap:
            raise ArithmeticError(f"evolution blow-up at t={state.time}")
        if k % record_every == 0 or k == steps:
            state.record(rate)
        if k in snap:
            state.snapshots[state.time] = v.copy()
    return state


@dataclass
class BarrierTrajectory:
    """High-accuracy trajectory of xi' = f(xi) from xi(0) = xi0."""

    xi0: float
    times: np.ndarray
    values: np.ndarray
    _dense: object = None

    def __call__(self, t):
        t = np.asarray(t, float)
        if self._dense is not None:
            out = self._dense(np.atleast_1d(t))
            return float(out[0]) if t.ndim == 0 else out
        out = np.interp(t, self.times, self.values)
        return float(out) if t.ndim == 0 else out


def discrete_barrier(nl: Nonlinearity, xi0: float, T: float, dt: float,
                     b: float = None) -> BarrierTrajectory:
    """Barrier under the same semi-implicit stepping as the evolutions.

    For spatially constant states the scheme reduces to the scalar recursion
    xi' = (xi + dt (f(xi) + b xi)) / (1 + dt b); comparing an evolution to
    this trajectory (same dt and shift) realizes the discrete comparison
    principle exactly, with no time-discretization slack.
    """
    if b is None:
        b = nl.shift_constant(max(1.0, abs(xi0)))
    steps = int(round(T / dt))
    vals = np.empty(steps + 1)
    vals[0] = xi0
    xi = xi0
    for k in range(1, steps + 1):
        xi = (xi + dt * (float(nl.f(np.array(xi))) + b * xi)) / (1.0 + dt * b)
        vals[k] = xi
    times = dt * np.arange(steps + 1)
    return BarrierTrajectory(xi0=xi0, times=times, values=vals)


def ode_barrier(nl: Nonlinearity, xi0: float, T: float, rtol: float = 1e-11) -> BarrierTrajectory:
    """Integrate the spatially free dynamics xi' = f(xi); for 0 < xi0 < 1 the
    trajectory increases monotonically to 1."""
    if not 0.0 < xi0 < 1.0:
        raise ValueError("barrier start must lie in (0, 1)")
    if float(nl.f(np.array(xi0))) <= 0.0:
        raise ValueError("nonlinearity not positive at the barrier start; "
                         "the admissibility hypotheses fail")
    sol = solve_ivp(lambda t, y: nl.f(y), (0.0, T), [xi0], rtol=rtol,
                    atol=1e-13, dense_output=True, method="RK45")
    if not sol.success:
        raise ArithmeticError(f"barrier integration failed: {sol.message}")
    traj = BarrierTrajectory(xi0=xi0, times=sol.t, values=sol.y[0])
    traj._dense = lambda t: sol.sol(np.atleast_1d(t))[0]
    return traj


@dataclass
class ComparisonReport:
    passed: bool
    worst_margin: float
    worst_time: float
    checked_times: int


def barrier_comparison(state: EvolutionState, barrier: BarrierTrajectory,
                       lower: bool = True, tol: float = 1e-8,
                       node_mask=None) -> ComparisonReport:
    """Check v(., t) >= xi(t) (or <= for an upper barrier) at recorded times.

    Only the min/max history is needed, so the check covers every recorded
    time at every node (optionally restricted to a node mask via snapshots).
    """
    worst = np.inf
    worst_t = np.nan
    cnt = 0
    for (t, vmin, vmax, _r) in state.history:
        if np.isnan(t):
            continue
        xi = float(barrier(t))
        if node_mask is not None and t in state.snapshots:
            vals = state.snapshots[t][node_mask]
            vmin, vmax = float(vals.min()), float(vals.max())
        elif node_mask is not None:
            continue
        margin = (vmin - xi) if lower else (xi - vmax)
        cnt += 1
        if margin < worst:
            worst, worst_t = margin, t
    return ComparisonReport(passed=bool(worst >= -tol), worst_margin=float(worst),
                            worst_time=float(worst_t), checked_times=cnt)


def harnack_ratio(values: np.ndarray, coords: np.ndarray, center, R: float,
                  residual: np.ndarray = None, residual_tol: float = 1e-4) -> float:
    """sup/inf of a positive (near-)solution over the ball B_R(center).

    ``coords`` has one row per node (any dimension); positivity is required
    on B_2R and, when a residual field is supplied, near-solution quality is
    enforced there.
    """
    coords = np.atleast_2d(np.asarray(coords, float))
    if coords.shape[0] != len(values):
        coords = coords.T
    center = np.atleast_1d(np.asarray(center, float))
    dist = np.sqrt(np.sum((coords - center[None, :]) ** 2, axis=1))
    outer = dist <= 2 * R
    if not np.any(outer):
        raise ValueError("no nodes inside B_2R")
    if np.any(values[outer] <= 0):
        raise ValueError("function must be positive on B_2R")
    if residual is not None and np.max(np.abs(residual[outer])) > residual_tol:
        raise ValueError("field is not a near-solution on B_2R")
    inner = dist <= R
    vals = values[inner]
    return float(vals.max() / vals.min())
