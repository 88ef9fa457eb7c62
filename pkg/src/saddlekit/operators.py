"""Discretization of the nonlocal operator on cone-odd and 1-D functions.

The doubly radial odd discretization lives on a triangular lattice
{(i h, j h) : 0 <= j < i, i h <= S_max} of the (s, t) quadrant.  Values on
the mirror triangle are the negatives by oddness and the diagonal carries an
implicit zero.  The nodal quadrature is exactly consistent with the full
plane lattice sum of (w(x) - w(y)) K(x - y): the orbit-averaged tables, the
lattice zero-order sums and the node measures reproduce it identically, and
the leading h^(2-2 gamma) defect of nodal quadrature at the kernel
singularity is removed by a second-difference correction whose constant is
the renormalized lattice second moment.

Apply and assembly share one set of tables, so the assembled matrix action
equals the operator application to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.linalg import lu_factor, lu_solve

from .kernels import RadialKernel, Kernel1D, sphere_area
from .radial_geometry import (AveragedKernelCache, QuadrantPoint,
                              lattice_second_moment_constant)

__all__ = [
    "TriangularGrid",
    "OddGridFunction",
    "OddOperator2D",
    "DirichletSystem",
    "Operator1D",
    "TorsionSolution",
    "solve_torsion",
    "apply_odd",
    "apply_1d",
]

SQ2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# grid and grid functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TriangularGrid:
    """Lattice nodes (i h, j h) with 0 <= j < i <= S_max / h, strictly in O."""

    h: float
    s_max: float
    m: int = 1

    i: np.ndarray = field(init=False, repr=False)
    j: np.ndarray = field(init=False, repr=False)
    s: np.ndarray = field(init=False, repr=False)
    t: np.ndarray = field(init=False, repr=False)
    measures: np.ndarray = field(init=False, repr=False)
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.h <= 0 or self.s_max <= self.h:
            raise ValueError("need 0 < h < s_max")
        imax = int(round(self.s_max / self.h))
        ii, jj = [], []
        for a in range(1, imax + 1):
            for b in range(a):
                ii.append(a)
                jj.append(b)
        i = np.array(ii, dtype=int)
        j = np.array(jj, dtype=int)
        s = i * self.h
        t = j * self.h
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "measures", self._node_measures(s, t))
        object.__setattr__(self, "index", {(a, b): n for n, (a, b) in enumerate(zip(ii, jj))})

    def _node_measures(self, s, t):
        """Cell measure of each node under the doubly radial volume element.

        For m = 1 a node represents its 2^(#nonzero coords) plane images, each
        with a plane cell of area h^2.  For m >= 2 the weight
        omega_{m-1}^2 (s t)^(m-1) is integrated exactly over the cell.
        """
        h = self.h
        if self.m == 1:
            return (2.0 - (t == 0)) * 2.0 * h * h
        w = sphere_area(self.m - 1) ** 2

        def coord_mass(c):
            lo = np.maximum(c - h / 2, 0.0)
            hi = c + h / 2
            return (hi ** self.m - lo ** self.m) / self.m

        return w * coord_mass(s) * coord_mass(t)

    @property
    def imax(self) -> int:
        return int(round(self.s_max / self.h))

    @property
    def n_nodes(self) -> int:
        return len(self.s)

    def node_point(self, n: int) -> QuadrantPoint:
        return QuadrantPoint(float(self.s[n]), float(self.t[n]))

    def cone_distances(self) -> np.ndarray:
        return (self.s - self.t) / SQ2

    def radii(self) -> np.ndarray:
        return np.hypot(self.s, self.t)

    def ball_mask(self, R: float) -> np.ndarray:
        return self.radii() <= R + 1e-12

    def boundary_layer_mask(self) -> np.ndarray:
        """Nodes within distance < h of the cone (first off-diagonal)."""
        return self.cone_distances() < self.h

    def interior_mask(self, R: float) -> np.ndarray:
        """Residual-certified nodes of a ball solve: inside B_{R-2h}, off the
        cone boundary layer."""
        return self.ball_mask(R - 2 * self.h) & ~self.boundary_layer_mask()

    def key(self):
        return (round(self.h, 12), round(self.s_max, 12), self.m)


EXTERIOR_KINDS = ("zero", "saddle_tail", "constant")


@dataclass
class OddGridFunction:
    """Values of a cone-odd doubly radial function on a triangular grid.

    Oddness is implicit: w(t, s) = -w(s, t) and w = 0 on the diagonal.  The
    exterior rule fixes values beyond the tabulated square: identically zero,
    the saddle tail sign(s - t), or a constant c on the O side (-c on I).
    """

    grid: TriangularGrid
    values: np.ndarray
    exterior: str = "zero"
    exterior_value: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError("values length does not match grid")
        if self.exterior not in EXTERIOR_KINDS:
            raise ValueError(f"unknown exterior rule {self.exterior!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    def copy(self, values=None) -> "OddGridFunction":
        return OddGridFunction(self.grid, self.values.copy() if values is None else values,
                               self.exterior, self.exterior_value)

    def lattice_value(self, a: int, b: int) -> float:
        """Value at lattice point (a h, b h) via the even axis reflections and
        the odd cone reflection; zero on the diagonal."""
        a, b = abs(a), abs(b)
        if a == b:
            return 0.0
        sign = 1.0
        if a < b:
            a, b = b, a
            sign = -1.0
        if a <= self.grid.imax:
            return sign * float(self.values[self.grid.index[(a, b)]])
        if self.exterior == "zero":
            return 0.0
        if self.exterior == "saddle_tail":
            return sign
        return sign * self.exterior_value

    def to_csv(self, path, meta: dict = None):
        meta = dict(meta or {})
        meta.setdefault("m", self.grid.m)
        meta.setdefault("h", self.grid.h)
        meta.setdefault("s_max", self.grid.s_max)
        meta.setdefault("exterior", self.exterior)
        with open(path, "w") as f:
            for k, v in meta.items():
                f.write(f"# {k}={v}\n")
            f.write("s,t,value\n")
            for s, t, v in zip(self.grid.s, self.grid.t, self.values):
                f.write(f"{s:.17g},{t:.17g},{v:.17g}\n")


# ---------------------------------------------------------------------------
# the 2-D cone-odd operator
# ---------------------------------------------------------------------------


class OddOperator2D:
    """Dense nodal discretization of the operator on cone-odd functions.

    Holds, for one (cache, grid) pair: the kernel-difference table D, the
    lattice zero-order sums, the plane tail masses beyond the tabulated
    square, and the second-difference correction constant.  Construction is
    single threaded; afterwards all applications and assemblies are read-only.
    """

    def __init__(self, cache: AveragedKernelCache, grid: TriangularGrid,
                 progress: Callable[[str], None] = None):
        if cache.m != grid.m:
            raise ValueError("cache and grid half-dimensions differ")
        self.cache = cache
        self.grid = grid
        g = grid
        kern = cache.kernel
        self.gamma = kern.order

        self.D, KBS = cache.difference_table(g.s, g.t)
        mu = g.measures
        self.D_mu_rowsum = self.D @ mu
        self.KBS_mu_rowsum = KBS @ mu
        del KBS

        # lattice zero-order term: star sums plus the diagonal lattice row,
        # exactly reproducing the plane lattice sum of K over the mirror side
        diag_c = np.arange(0, g.imax + 1) * g.h
        zol = np.empty(g.n_nodes)
        diag_measure = np.where(diag_c == 0, 1.0, 4.0) * g.h * g.h
        if g.m >= 2:
            w = sphere_area(g.m - 1) ** 2
            lo = np.maximum(diag_c - g.h / 2, 0.0)
            hi = diag_c + g.h / 2
            cm = (hi ** g.m - lo ** g.m) / g.m
            diag_measure = w * cm * cm
        for a in range(g.n_nodes):
            kd = cache.averaged_vec(g.s[a], g.t[a], diag_c, diag_c)
            zol[a] = self.KBS_mu_rowsum[a] + 0.5 * float(np.dot(kd, diag_measure))
        self.zero_order_lattice = zol

        # plane tail masses beyond the tabulated square
        box = (g.imax + 0.5) * g.h
        self.box = box
        if g.m == 1:
            from .radial_geometry import truncation_tail_masses
            self.tail_open, self.tail_mirror = truncation_tail_masses(
                kern, g.s, g.t, box)
        else:
            t_open = np.empty(g.n_nodes)
            t_mirror = np.empty(g.n_nodes)
            for a in range(g.n_nodes):
                p = g.node_point(a)
                t_open[a] = cache.region_mass(p, "open_outside_box", box)
                t_mirror[a] = cache.region_mass(p, "mirror_outside_box", box)
            self.tail_open = t_open
            self.tail_mirror = t_mirror

        # second-difference correction constant (renormalized lattice moment)
        kappa_eff = cache.plane_local_coefficient()
        self.C2 = 0.5 * kappa_eff * g.h ** (2 - 2 * self.gamma) * abs(
            lattice_second_moment_constant(self.gamma))

        # lattice neighborhood bookkeeping for the correction stencil
        self._nbr = self._build_neighbors()

    # -- neighbor resolution for the correction stencil ---------------------

    def _build_neighbors(self):
        """For each node, the four lattice neighbors as (kind, index, sign).

        kind 0: grid node (index into values, sign +-1 by odd reflection),
        kind 1: diagonal (value 0), kind 2: beyond grid (exterior rule).
        """
        g = self.grid
        out = np.zeros((g.n_nodes, 4, 3), dtype=np.int64)
        for a in range(g.n_nodes):
            i, j = int(g.i[a]), int(g.j[a])
            for q, (ni, nj) in enumerate(((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1))):
                ni2, nj2 = abs(ni), abs(nj)
                sign = 1
                if ni2 < nj2:
                    ni2, nj2 = nj2, ni2
                    sign = -1
                if ni2 == nj2:
                    out[a, q] = (1, 0, 0)
                elif ni2 <= g.imax:
                    out[a, q] = (0, g.index[(ni2, nj2)], sign)
                else:
                    out[a, q] = (2, 0, sign)
        return out

    def _exterior_lattice_value(self, w: OddGridFunction, sign: int) -> float:
        if w.exterior == "zero":
            return 0.0
        if w.exterior == "saddle_tail":
            return float(sign)
        return float(sign) * w.exterior_value

    # -- application ---------------------------------------------------------

    def apply(self, w: OddGridFunction) -> np.ndarray:
        """Operator values at every node (valid at interior, non-boundary-layer
        nodes; values in the cone layer and near the truncation carry larger
        quadrature error, as flagged by the grid masks)."""
        g = self.grid
        v = w.values
        mu = g.measures
        out = v * self.D_mu_rowsum - self.D @ (v * mu)
        out += 2.0 * v * self.zero_order_lattice
        out += self._tail_terms(v, w)
        out += self._correction_terms(v, w)
        return out

    def apply_at(self, w: OddGridFunction, node: int) -> float:
        return float(self.apply(w)[node])

    def _tail_terms(self, v, w: OddGridFunction) -> np.ndarray:
        if w.exterior == "zero":
            return v * (self.tail_open + self.tail_mirror)
        c = 1.0 if w.exterior == "saddle_tail" else w.exterior_value
        # (v - c) onto the O tail, (v + c) onto the mirror tail
        return v * (self.tail_open + self.tail_mirror) - c * (self.tail_open - self.tail_mirror)

    def _correction_terms(self, v, w: OddGridFunction) -> np.ndarray:
        g = self.grid
        h2 = g.h ** 2
        nb = self._nbr
        acc = -4.0 * v
        for q in range(4):
            kind = nb[:, q, 0]
            idx = nb[:, q, 1]
            sign = nb[:, q, 2].astype(float)
            vals = np.where(kind == 0, sign * v[idx], 0.0)
            if w.exterior != "zero":
                c = 1.0 if w.exterior == "saddle_tail" else w.exterior_value
                vals = np.where(kind == 2, sign * c, vals)
            acc = acc + vals
        return -(self.C2 / 2.0) * acc / h2

    # -- assembly ------------------------------------------------------------

    def assemble(self, unknown_mask: np.ndarray, shift=0.0) -> "DirichletSystem":
        """Dense system for (L + shift) on the unknown nodes; remaining grid
        nodes and the beyond-grid exterior enter through the right-hand side.

        ``shift`` may be a scalar b >= 0 or a per-node coefficient array c(x)
        added to the diagonal.
        """
        return DirichletSystem(self, np.asarray(unknown_mask, bool), shift)

    # -- diagnostics ----------------------------------------------------------

    def near_field_remainder_bound(self, w: OddGridFunction) -> float:
        """Crude bound h^(2-2 gamma) * max discrete second difference * kappa,
        the size of the neglected singular-cell remainder."""
        g = self.grid
        v = w.values
        nb = self._nbr
        acc = -4.0 * v
        for q in range(4):
            kind, idx, sign = nb[:, q, 0], nb[:, q, 1], nb[:, q, 2].astype(float)
            acc = acc + np.where(kind == 0, sign * v[idx], 0.0)
        d2 = np.max(np.abs(acc)) / g.h ** 2
        return float(self.cache.plane_local_coefficient()
                     * g.h ** (2 - 2 * self.gamma) * d2)


class DirichletSystem:
    """Dense linear system M v = rhs for the shifted operator on a node subset.

    The matrix rows act exactly like the operator application restricted to
    the unknowns; data nodes (grid nodes outside the unknown set) and the
    beyond-grid exterior contribute affinely and are folded into the right-
    hand side by :meth:`solve`.
    """

    def __init__(self, op: OddOperator2D, unknown_mask: np.ndarray, shift):
        self.op = op
        self.unknown_mask = unknown_mask
        self.unknown_idx = np.flatnonzero(unknown_mask)
        g = op.grid
        mu = g.measures
        n_u = len(self.unknown_idx)
        pos = -np.ones(g.n_nodes, dtype=int)
        pos[self.unknown_idx] = np.arange(n_u)
        self.pos = pos

        shift_arr = np.zeros(g.n_nodes) + shift
        self.shift = shift_arr

        M = -(op.D[np.ix_(self.unknown_idx, self.unknown_idx)]
              * mu[self.unknown_idx][None, :])
        diag = (op.D_mu_rowsum + 2.0 * op.zero_order_lattice
                + op.tail_open + op.tail_mirror + shift_arr)[self.unknown_idx]
        M[np.arange(n_u), np.arange(n_u)] += diag
        # correction stencil couplings
        c2h2 = op.C2 / 2.0 / g.h ** 2
        nb = op._nbr
        for row, a in enumerate(self.unknown_idx):
            M[row, row] += 4.0 * c2h2
            for q in range(4):
                kind, idx, sign = nb[a, q]
                if kind == 0 and pos[idx] >= 0:
                    M[row, pos[idx]] -= c2h2 * float(sign)
        self.matrix = M
        self._lu = None
        self.condition_warning = None

    def _factor(self):
        if self._lu is None:
            self._lu = lu_factor(self.matrix)
            # cheap condition estimate from the factor diagonal
            du = np.abs(np.diag(self._lu[0]))
            cond = float(du.max() / max(du.min(), 1e-300))
            if cond > 1e12:
                self.condition_warning = f"LU diagonal ratio {cond:.2e} exceeds 1e12"
        return self._lu

    def data_rhs(self, data: OddGridFunction) -> np.ndarray:
        """Affine contribution of data nodes and the exterior rule to L v."""
        op, g = self.op, self.op.grid
        mu = g.measures
        vals = data.values.copy()
        vals[self.unknown_idx] = 0.0
        rhs = op.D[self.unknown_idx] @ (vals * mu)
        c = {"zero": 0.0, "saddle_tail": 1.0, "constant": data.exterior_value}[data.exterior]
        if c != 0.0:
            rhs += c * (op.tail_open - op.tail_mirror)[self.unknown_idx]
        # correction stencil data couplings
        c2h2 = op.C2 / 2.0 / g.h ** 2
        nb = op._nbr
        for row, a in enumerate(self.unknown_idx):
            extra = 0.0
            for q in range(4):
                kind, idx, sign = nb[a, q]
                if kind == 0 and self.pos[idx] < 0:
                    extra += float(sign) * vals[idx]
                elif kind == 2:
                    extra += float(sign) * c
            rhs[row] += c2h2 * extra
        return rhs

    def solve(self, rhs_interior: np.ndarray, data: OddGridFunction,
              residual_tol: float = 1e-10) -> OddGridFunction:
        """Solve (L + shift) v = rhs on the unknowns with v = data elsewhere."""
        lu = self._factor()
        b = np.asarray(rhs_interior, float) + self.data_rhs(data)
        x = lu_solve(lu, b)
        res = np.max(np.abs(self.matrix @ x - b))
        scale = max(np.max(np.abs(b)), 1e-300)
        if res > residual_tol * scale:
            raise ArithmeticError(f"direct solve residual {res:.2e} exceeds "
                                  f"{residual_tol:.0e} * {scale:.2e}")
        out = data.copy()
        out.values[self.unknown_idx] = x
        return out

    def operator_values(self, w: OddGridFunction) -> np.ndarray:
        """(L + shift) w at the unknown nodes via the assembled rows.

        The data contribution enters the operator with the opposite sign of
        the right-hand-side fold used by :meth:`solve`.
        """
        return self.matrix @ w.values[self.unknown_idx] - self.data_rhs(w)


def apply_odd(cache_or_op, w: OddGridFunction, node: int) -> float:
    """Operator value at one node; accepts a prepared operator or a cache."""
    if isinstance(cache_or_op, OddOperator2D):
        return cache_or_op.apply_at(w, node)
    op = OddOperator2D(cache_or_op, w.grid)
    return op.apply_at(w, node)


# ---------------------------------------------------------------------------
# translation-invariant 1-D operator
# ---------------------------------------------------------------------------


class Operator1D:
    """Nodal discretization of L v(x) = PV int (v(x) - v(y)) k1(x - y) dy on a
    uniform grid over [-L, L], with segment-exact cell weights, constant tail
    data and the cell-paired second-moment correction.

    The action is affine in the tail values: L v = A v + g_left * c_left +
    g_right * c_right, which the parabolic stepping and the Dirichlet solves
    both consume.
    """

    def __init__(self, kernel1d: Kernel1D, L: float, h: float):
        if h <= 0 or L <= h:
            raise ValueError("need 0 < h < L")
        self.k1 = kernel1d
        self.L = L
        self.h = h
        n = int(round(2 * L / h)) + 1
        self.x = -L + np.arange(n) * h
        self.n = n
        self.W = kernel1d.cell_weights(h, n - 1)
        self.C2 = kernel1d.moment_mismatch(h, n - 1)
        edge = L + h / 2
        self.tail_right = np.array([kernel1d.integral(edge - xi) for xi in self.x])
        self.tail_left = np.array([kernel1d.integral(edge + xi) for xi in self.x])
        self._matrix = None

    def matrix(self) -> np.ndarray:
        """Dense matrix A with (L v)_i = (A v)_i + tails; rows sum to the
        exterior coupling so that constants with matching tails are killed."""
        if self._matrix is not None:
            return self._matrix
        n, h = self.n, self.h
        d = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
        A = -self.W[d]
        np.fill_diagonal(A, 0.0)
        rowsum = -A.sum(axis=1)
        A[np.arange(n), np.arange(n)] = rowsum + self.tail_left + self.tail_right
        c = self.C2 / 2.0 / h ** 2
        idx = np.arange(n)
        A[idx, idx] += 2.0 * c
        A[idx[:-1], idx[:-1] + 1] -= c
        A[idx[1:], idx[1:] - 1] -= c
        self._matrix = A
        return A

    def tail_vector(self, c_left: float, c_right: float) -> np.ndarray:
        """Affine part of L v from constant exterior data c_left, c_right."""
        g = -(c_left * self.tail_left + c_right * self.tail_right)
        c = self.C2 / 2.0 / self.h ** 2
        g[0] -= c * c_left
        g[-1] -= c * c_right
        return g

    def algebraic_tail_vector(self, amplitude: float, power: float) -> np.ndarray:
        """Extra affine part when the exterior data carries the algebraic
        correction sign(y) (1 - amplitude |y|^(-power)) instead of +-1.

        Returns the increment to add to ``tail_vector(-1, +1)``; the edge
        stencil data is adjusted consistently.
        """
        edge = self.L + self.h / 2
        q = np.empty(self.n)
        for i, xi in enumerate(self.x):
            fr = lambda y: y ** (-power) * self.k1(y - xi)
            fl = lambda y: y ** (-power) * self.k1(y + xi)
            qr = quad(fr, edge, np.inf, epsabs=0.0, epsrel=1e-9, limit=200)[0]
            ql = quad(fl, edge, np.inf, epsabs=0.0, epsrel=1e-9, limit=200)[0]
            q[i] = qr - ql
        g = amplitude * q
        # correction stencil sees the algebraic value at the first exterior node
        c = self.C2 / 2.0 / self.h ** 2
        delta = amplitude * (self.L + self.h) ** (-power)
        g[0] -= c * delta
        g[-1] += c * delta
        return g

    def apply(self, v: np.ndarray, c_left: float, c_right: float) -> np.ndarray:
        return self.matrix() @ v + self.tail_vector(c_left, c_right)

    def odd_fold(self):
        """Matrix and geometry of the operator restricted to odd functions.

        Unknowns are the values at x > 0; v(0) = 0 and v(-x) = -v(x), with
        tails (-c, +c).  Returns (x_pos, A_odd, g_unit) so that on the odd
        class L v = A_odd v_pos + g_unit * c.
        """
        A = self.matrix()
        n = self.n
        mid = n // 2
        if abs(self.x[mid]) > 1e-12:
            raise ValueError("odd fold requires a node at the origin")
        pos = np.arange(mid + 1, n)
        mir = 2 * mid - pos
        A_odd = A[np.ix_(pos, pos)] - A[np.ix_(pos, mir)]
        g_unit = self.tail_vector(-1.0, 1.0)[pos]
        return self.x[pos], A_odd, g_unit


def apply_1d(kernel1d: Kernel1D, v: np.ndarray, L: float, h: float,
             c_left: float = -1.0, c_right: float = 1.0) -> np.ndarray:
    """One-shot operator application on samples of v over [-L, L]."""
    op = Operator1D(kernel1d, L, h)
    if len(v) != op.n:
        raise ValueError("value array does not match the grid")
    return op.apply(np.asarray(v, float), c_left, c_right)


# ---------------------------------------------------------------------------
# torsion problem on balls: L phi = 1 in B_R, phi = 0 outside
# ---------------------------------------------------------------------------


@dataclass
class TorsionSolution:
    R: float
    r: np.ndarray
    phi: np.ndarray
    M_R: float
    dim: int

    def psi(self) -> np.ndarray:
        """1 - phi / M_R, the barrier profile tending to 0 as R grows."""
        return 1.0 - self.phi / self.M_R

    def interior_mask(self, margin: float = 0.1) -> np.ndarray:
        """Nodes at distance >= margin * R from the boundary, where the
        Holder boundary layer of the exact profile does not dominate."""
        return np.abs(self.r) <= self.R * (1 - margin)


def _ring_kernel(kernel: RadialKernel, r: float, rho: float, rel=1e-9) -> float:
    """J(r, rho): the (n-1)-sphere average coupling radii r and rho."""
    n = kernel.dim
    w = sphere_area(n - 2)

    def f(th):
        d = np.sqrt(max(r * r + rho * rho - 2 * r * rho * np.cos(th), 1e-300))
        return float(kernel.profile(np.asarray(d, float))) * np.sin(th) ** (n - 2)

    peak = min(max(abs(r - rho) / max(np.sqrt(r * rho), 1e-12), 1e-6), np.pi / 2)
    v = quad(f, 0.0, peak, epsabs=0.0, epsrel=rel, limit=200)[0]
    v += quad(f, peak, np.pi, epsabs=0.0, epsrel=rel, limit=200)[0]
    return rho ** (n - 1) * w * v


def solve_torsion(kernel: RadialKernel, R: float, n_cells: int = 400) -> TorsionSolution:
    """Radial Dirichlet solve of L phi = 1 in B_R with zero exterior data.

    n = 1 uses the even fold of the 1-D machinery (segment-exact weights);
    n >= 2 assembles the ring kernel by adaptive quadrature per node pair.
    """
    n = kernel.dim
    if n == 1:
        k1 = _kernel_as_1d(kernel)
        h = 2 * R / n_cells
        # staggered nodes so the origin and boundary are cell edges
        op = _StaggeredOperator1D(k1, R, n_cells)
        phi = np.linalg.solve(op.matrix, np.ones(n_cells))
        return TorsionSolution(R=R, r=op.x, phi=phi, M_R=float(phi.max()), dim=n)

    g = kernel.order
    h = R / n_cells
    r = (np.arange(n_cells) + 0.5) * h
    # angular factor is symmetric in (r, rho); J(r, rho) = rho^(n-1) * ang
    ang = np.zeros((n_cells, n_cells))
    for a in range(n_cells):
        for b in range(a + 1, n_cells):
            ang[a, b] = ang[b, a] = _ring_kernel(kernel, r[a], r[b]) / r[b] ** (n - 1)
    J = ang * (r[None, :] ** (n - 1))

    # the ring kernel behaves like kappa(r) |r - rho|^(-1-2g) at the
    # diagonal; the unit power profile supplies exact near-cell weights and
    # the lattice second-moment defect, row-scaled by the local coefficient
    from .kernels import tabulate_profile
    unit = tabulate_profile(lambda z: np.asarray(z, float) ** (-1 - 2 * g), g,
                            name="unit-power")
    c2_unit = unit.moment_mismatch(h, n_cells - 1)
    near = min(6, n_cells - 1)
    w_unit = unit.cell_weights(h, near)

    W = J * h
    A = np.zeros((n_cells, n_cells))
    for a in range(n_cells):
        kap = 0.0
        cnt = 0
        for sgn in (-1, 1):
            b = a + sgn
            if 0 <= b < n_cells:
                kap += J[a, b] * h ** (1 + 2 * g)
                cnt += 1
        kap /= max(cnt, 1)
        w_row = W[a].copy()
        for d in range(1, near + 1):
            for sgn in (-1, 1):
                b = a + sgn * d
                if 0 <= b < n_cells:
                    smooth = J[a, b] - kap * (d * h) ** (-1 - 2 * g)
                    w_row[b] = kap * w_unit[d] + smooth * h
        out_mass = quad(lambda rho: _ring_kernel(kernel, r[a], rho, rel=1e-7),
                        R, 4 * R, epsabs=0.0, epsrel=1e-7, limit=100)[0]
        out_mass += quad(lambda rho: _ring_kernel(kernel, r[a], rho, rel=1e-7),
                         4 * R, np.inf, epsabs=0.0, epsrel=1e-7, limit=100)[0]
        A[a] = -w_row
        A[a, a] = w_row.sum() - w_row[a] + out_mass
        corr = kap * c2_unit / 2.0 / h ** 2
        A[a, a] += 2 * corr
        if a > 0:
            A[a, a - 1] -= corr
        if a + 1 < n_cells:
            A[a, a + 1] -= corr
    phi = np.linalg.solve(A, np.ones(n_cells))
    return TorsionSolution(R=R, r=r, phi=phi, M_R=float(phi.max()), dim=n)


def _kernel_as_1d(kernel: RadialKernel) -> Kernel1D:
    from .kernels import tabulate_profile
    return tabulate_profile(kernel.profile, kernel.order, kernel.lam, kernel.Lam,
                            name=f"as1d({kernel.name})")


class _StaggeredOperator1D:
    """1-D operator on staggered nodes of (-R, R) with zero exterior; used by
    the torsion solve so the domain boundary falls on cell edges."""

    def __init__(self, k1: Kernel1D, R: float, n_cells: int):
        h = 2 * R / n_cells
        self.x = -R + (np.arange(n_cells) + 0.5) * h
        self.h = h
        W = k1.cell_weights(h, n_cells - 1)
        C2 = k1.moment_mismatch(h, n_cells - 1)
        n = n_cells
        d = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
        A = -W[d]
        np.fill_diagonal(A, 0.0)
        tail_r = np.array([k1.integral(R - xi) for xi in self.x])
        tail_l = np.array([k1.integral(R + xi) for xi in self.x])
        rowsum = -A.sum(axis=1)
        A[np.arange(n), np.arange(n)] = rowsum + tail_l + tail_r
        c = C2 / 2.0 / h ** 2
        idx = np.arange(n)
        A[idx, idx] += 2.0 * c
        A[idx[:-1], idx[:-1] + 1] -= c
        A[idx[1:], idx[1:] - 1] -= c
        self.matrix = A
