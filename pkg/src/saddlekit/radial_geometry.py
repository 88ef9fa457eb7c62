"""Simons-cone geometry: involution, orbit-averaged kernel, zero-order term.

Points of R^(2m) are tracked through their doubly radial coordinates
(s, t) = (|x'|, |x''|).  The cone is {s = t}, the open region O is {s > t},
its mirror I is {s < t}, and the involution swaps the two blocks.  For a
radial kernel the orbit average over rotations acting separately on the two
blocks reduces to a double angular integral with weight sin^(m-2); for m = 1
the rotation group is {+-1}^2 and the average is an exact 4-term sum.

All operations are pure; the cache tabulates once and is then safe to read
from concurrent contexts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import mpmath as mp
from scipy.integrate import quad
from scipy.special import roots_jacobi, beta as beta_fn

from .kernels import RadialKernel, sphere_area

__all__ = [
    "QuadrantPoint",
    "star",
    "cone_distance",
    "AveragedKernelCache",
    "kbar",
    "kernel_difference",
    "zero_order_coefficient",
    "lattice_second_moment_constant",
    "Arcs",
]

SQ2 = np.sqrt(2.0)


@dataclass(frozen=True)
class QuadrantPoint:
    """Doubly radial coordinates (s, t) = (|x'|, |x''|), both nonnegative."""

    s: float
    t: float

    def __post_init__(self):
        if self.s < 0 or self.t < 0:
            raise ValueError("quadrant coordinates must be nonnegative")

    def star(self) -> "QuadrantPoint":
        return QuadrantPoint(self.t, self.s)

    @property
    def cone_distance(self) -> float:
        """Signed distance to the cone {s = t}; positive in O."""
        return (self.s - self.t) / SQ2

    @property
    def radius(self) -> float:
        return float(np.hypot(self.s, self.t))

    def in_open_region(self) -> bool:
        return self.s > self.t


def star(p: QuadrantPoint) -> QuadrantPoint:
    """The block-swapping involution (s, t) -> (t, s)."""
    return p.star()


def cone_distance(s, t):
    return (np.asarray(s, float) - np.asarray(t, float)) / SQ2


# ---------------------------------------------------------------------------
# circular-arc boolean algebra (for exact angular measures at m = 1)
# ---------------------------------------------------------------------------


class Arcs:
    """Finite unions of arcs on the circle, stored as sorted [lo, hi) intervals
    in [0, 2 pi).  Supports intersection, union, complement and measure; used
    to evaluate the angular measure of half-plane intersections exactly.
    """

    TWO_PI = 2.0 * np.pi

    def __init__(self, intervals: Iterable[tuple] = ()):
        self.ivs = []
        for lo, hi in intervals:
            self._push(lo, hi)
        self._normalize()

    def _push(self, lo, hi):
        if hi - lo >= self.TWO_PI - 1e-15:
            self.ivs.append((0.0, self.TWO_PI))
            return
        lo = lo % self.TWO_PI
        hi = hi % self.TWO_PI
        if hi >= lo:
            if hi > lo:
                self.ivs.append((lo, hi))
        else:
            self.ivs.append((lo, self.TWO_PI))
            if hi > 0:
                self.ivs.append((0.0, hi))

    def _normalize(self):
        if not self.ivs:
            return
        self.ivs.sort()
        merged = [list(self.ivs[0])]
        for lo, hi in self.ivs[1:]:
            if lo <= merged[-1][1] + 1e-15:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        self.ivs = [(lo, hi) for lo, hi in merged]

    @classmethod
    def full(cls):
        return cls([(0.0, cls.TWO_PI)])

    @classmethod
    def empty(cls):
        return cls()

    @classmethod
    def cos_above(cls, q):
        """{theta : cos(theta) > q}."""
        if q >= 1.0:
            return cls.empty()
        if q <= -1.0:
            return cls.full()
        a = np.arccos(q)
        return cls([(-a, a)])

    @classmethod
    def sin_above(cls, q):
        """{theta : sin(theta) > q}."""
        if q >= 1.0:
            return cls.empty()
        if q <= -1.0:
            return cls.full()
        a = np.arcsin(q)
        return cls([(a, np.pi - a)])

    def complement(self) -> "Arcs":
        if not self.ivs:
            return Arcs.full()
        out = []
        prev = 0.0
        for lo, hi in self.ivs:
            if lo > prev:
                out.append((prev, lo))
            prev = hi
        if prev < self.TWO_PI:
            out.append((prev, self.TWO_PI))
        r = Arcs()
        r.ivs = out
        return r

    def intersect(self, other: "Arcs") -> "Arcs":
        out = []
        for a0, a1 in self.ivs:
            for b0, b1 in other.ivs:
                lo, hi = max(a0, b0), min(a1, b1)
                if hi > lo:
                    out.append((lo, hi))
        r = Arcs()
        r.ivs = out
        r._normalize()
        return r

    def union(self, other: "Arcs") -> "Arcs":
        r = Arcs()
        r.ivs = list(self.ivs) + list(other.ivs)
        r._normalize()
        return r

    @property
    def measure(self) -> float:
        return sum(hi - lo for lo, hi in self.ivs)


def _region_arcs(s, t, r, region: str, box: float = None) -> Arcs:
    """Arcs of directions theta for which (s + r cos, t + r sin) lies in a region.

    Regions are defined on the full plane through w = (w1, w2):
      "mirror"      : |w2| > |w1|          (the swapped side of the cone)
      "open"        : |w1| > |w2|
      "outside_box" : max(|w1|, |w2|) > box
    and the obvious intersections with the box complement.
    """
    # factor signs: |w2|^2 - |w1|^2 = f1 * f2 with
    #   f1 = (t - s) + sqrt2 r sin(theta - pi/4), f2 = (t + s) + sqrt2 r sin(theta + pi/4)
    def outside_box_arcs():
        # |w1| > box: cos > (box - s)/r or cos < (-box - s)/r (measure-equal)
        w1_out = Arcs.cos_above((box - s) / r).union(
            Arcs.cos_above((-box - s) / r).complement())
        w2_out = Arcs.sin_above((box - t) / r).union(
            Arcs.sin_above((-box - t) / r).complement())
        return w1_out.union(w2_out)

    if region in ("mirror", "open", "mirror_outside_box", "open_outside_box"):
        # |w2|^2 - |w1|^2 = f1 * f2 with
        #   f1 = (t - s) + sqrt2 r sin(theta - pi/4): f1 > 0 iff sin(theta') > q1
        #   f2 = (t + s) + sqrt2 r sin(theta + pi/4): f2 > 0 iff sin(theta'') > q2
        q1 = (s - t) / (SQ2 * r)
        q2 = -(s + t) / (SQ2 * r)
        f1_pos = Arcs.sin_above(q1)
        f1_pos = Arcs([(lo + np.pi / 4, hi + np.pi / 4) for lo, hi in f1_pos.ivs])
        f2_pos = Arcs.sin_above(q2)
        f2_pos = Arcs([(lo - np.pi / 4, hi - np.pi / 4) for lo, hi in f2_pos.ivs])
        inside_mirror = f1_pos.intersect(f2_pos).union(
            f1_pos.complement().intersect(f2_pos.complement()))
        base = inside_mirror if region.startswith("mirror") else inside_mirror.complement()
        if region.endswith("outside_box"):
            return base.intersect(outside_box_arcs())
        return base
    if region == "outside_box":
        return outside_box_arcs()
    raise ValueError(f"unknown region {region!r}")


def _polar_region_mass(kernel: RadialKernel, s, t, region: str, box: float = None,
                       rel: float = 1e-9) -> float:
    """int over a plane region of k(|x - w|) dw via exact angular arcs (m = 1)."""
    def ang(r):
        return _region_arcs(s, t, r, region, box).measure

    def f(r):
        return float(kernel.profile(np.asarray(r, float))) * r * ang(r)

    # onset radius: distance from x to the region
    if region == "mirror":
        r0 = (s - t) / SQ2
    else:
        r0 = max(box - max(s, t), 0.0)
    rx = float(np.hypot(s, t))
    splits = sorted({r0, (s + t) / SQ2, rx, (box or 0) + rx, 4 * (max(box or 0, rx) + 1.0)})
    splits = [r for r in splits if r >= r0]
    total = 0.0
    for a, b in zip(splits[:-1], splits[1:]):
        if b > a:
            total += quad(f, a, b, epsabs=0.0, epsrel=rel, limit=200)[0]
    total += quad(f, splits[-1], np.inf, epsabs=0.0, epsrel=rel, limit=200)[0]
    return total


# fixed Gauss-Legendre panel rule reused by the fast tail sweep
_GL4_X, _GL4_W = np.polynomial.legendre.leggauss(4)


def truncation_tail_masses(kernel: RadialKernel, s: np.ndarray, t: np.ndarray,
                           box: float, panels: int = 40) -> tuple:
    """Plane kernel masses of both cone sides beyond the tabulated square.

    Returns arrays (T_open, T_mirror) with, for every node x = (s_i, t_i),
    T_open = int over {|w1| > |w2|, outside box} of k(|x - w|) dw and
    T_mirror the mirror-side twin.  Uses exact angular arcs on fixed
    log-spaced Gauss panels plus an analytic power-law tail; both sides are
    evaluated from a shared arc decomposition at each radius.
    """
    s = np.asarray(s, float)
    t = np.asarray(t, float)
    n = len(s)
    k = kernel.profile
    n2g = 2 * kernel.order
    t_open = np.empty(n)
    t_mirror = np.empty(n)
    for a in range(n):
        sa, ta = s[a], t[a]
        r0 = max(box - max(sa, ta), 1e-12)
        r_far = 40.0 * (box + np.hypot(sa, ta))
        edges = np.geomspace(r0, r_far, panels + 1)
        acc_o = acc_m = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
            for xg, wg in zip(_GL4_X, _GL4_W):
                r = mid + half * xg
                out_box = _region_arcs(sa, ta, r, "outside_box", box)
                mirror = _region_arcs(sa, ta, r, "mirror")
                am = mirror.intersect(out_box).measure
                ao = out_box.measure - am
                kr = float(k(np.asarray(r, float))) * r * wg * half
                acc_o += kr * ao
                acc_m += kr * am
        kappa = float(k(np.asarray(r_far, float))) * r_far ** (2 + n2g)
        tail = np.pi * kappa * r_far ** (-n2g) / n2g
        t_open[a] = acc_o + tail
        t_mirror[a] = acc_m + tail
    return t_open, t_mirror


# ---------------------------------------------------------------------------
# lattice second-moment constant (quadrature defect of the nodal scheme)
# ---------------------------------------------------------------------------


def lattice_second_moment_constant(gamma: float) -> float:
    """Renormalized planar lattice sum Z(2 gamma) = 4 zeta(gamma) beta(gamma).

    This is the limit of sum_{0<|u|<=R, u in Z^2} |u|^(-2 gamma) minus the
    corresponding disc integral; it multiplies the h^(2-2 gamma) second-moment
    defect of nodal quadrature of the plane singular kernel.
    """
    x = gamma
    bet = 4.0 ** (-x) * (mp.zeta(x, 0.25) - mp.zeta(x, 0.75))
    return float(4.0 * mp.zeta(x) * bet)


# ---------------------------------------------------------------------------
# averaged kernel cache
# ---------------------------------------------------------------------------


class AveragedKernelCache:
    """Orbit-averaged kernel for doubly radial functions in R^(2m).

    For m = 1 the average over {+-1}^2 is the exact 4-term sign sum.  For
    m >= 2 it is a tensor Gauss-Jacobi rule in the two polar angles with
    weight sin^(m-2), refined by doubling until the relative change drops
    below ``rel_tol``.  Pairwise tables on a fixed grid are memoized by the
    grid's key, not by raw floats.
    """

    def __init__(self, kernel: RadialKernel, m: int, angular_nodes: int = 32,
                 max_angular_nodes: int = 1024, rel_tol: float = 1e-9):
        if m < 1:
            raise ValueError("half-dimension m must be >= 1")
        if kernel.dim != 2 * m:
            raise ValueError(f"kernel dimension {kernel.dim} != 2m = {2 * m}")
        self.kernel = kernel
        self.m = m
        self.rel_tol = rel_tol
        self.angular_nodes = angular_nodes
        self.max_angular_nodes = max_angular_nodes
        self._rules = {}
        self._tables = {}
        if m >= 2:
            alpha = (m - 3) / 2.0
            n = angular_nodes
            while n <= max_angular_nodes:
                x, w = roots_jacobi(n, alpha, alpha)
                self._rules[n] = (x, w / w.sum())
                n *= 2

    # -- pointwise averages -------------------------------------------------

    def averaged(self, x: QuadrantPoint, y: QuadrantPoint) -> float:
        """Orbit average of k(|Rx - y|); singular when the orbits touch."""
        v = self.averaged_vec(x.s, x.t, np.array([y.s]), np.array([y.t]))
        return float(v[0])

    def averaged_vec(self, s, t, sig, tau):
        """Vectorized averaged kernel at one source (s, t) against arrays (sig, tau)."""
        sig = np.asarray(sig, float)
        tau = np.asarray(tau, float)
        if self.m == 1:
            with np.errstate(divide="ignore"):
                k = self.kernel.profile
                out = 0.25 * (k(np.hypot(s - sig, t - tau)) + k(np.hypot(s - sig, t + tau))
                              + k(np.hypot(s + sig, t - tau)) + k(np.hypot(s + sig, t + tau)))
            return out
        return self._averaged_jacobi(s, t, sig, tau)

    def _averaged_jacobi(self, s, t, sig, tau):
        k = self.kernel.profile
        prev = None
        for n in sorted(self._rules):
            xa, wa = self._rules[n]
            # cos(alpha) nodes for both angles; tensor product
            ca = xa[:, None]
            cb = xa[None, :]
            wab = wa[:, None] * wa[None, :]
            out = np.empty_like(sig)
            flat_s, flat_t = np.ravel(sig), np.ravel(tau)
            res = np.empty(flat_s.shape)
            for i, (sg, tu) in enumerate(zip(flat_s, flat_t)):
                d2 = (s * s + sg * sg - 2 * s * sg * ca) + (t * t + tu * tu - 2 * t * tu * cb)
                d2 = np.maximum(d2, 1e-300)
                res[i] = float(np.sum(k(np.sqrt(d2)) * wab))
            out = res.reshape(np.shape(sig))
            if prev is not None:
                scale = np.maximum(np.abs(out), 1e-300)
                if np.max(np.abs(out - prev) / scale) < self.rel_tol:
                    return out
            prev = out
        return prev

    def averaged_star(self, x: QuadrantPoint, y: QuadrantPoint) -> float:
        return self.averaged(x, y.star())

    def kernel_difference(self, x: QuadrantPoint, y: QuadrantPoint) -> float:
        """kbar(x, y) - kbar(x, y*); positive for strictly sqrt-convex kernels
        whenever both points lie strictly in O."""
        if abs(x.s - y.s) < 1e-14 and abs(x.t - y.t) < 1e-14:
            raise ValueError("averaged kernel is singular at coinciding points")
        return self.averaged(x, y) - self.averaged_star(x, y)

    def kernel_difference_vec(self, s, t, sig, tau):
        return self.averaged_vec(s, t, sig, tau) - self.averaged_vec(s, t, tau, sig)

    # -- zero-order coefficient --------------------------------------------

    def zero_order_coefficient(self, x: QuadrantPoint, rel: float = 1e-9,
                               truncation: float = None) -> float:
        """A(x) = int over O of kbar(x, y*) dy, diverging like dist(x, cone)^(-2 gamma).

        For m = 1 the integral is evaluated exactly in polar form: A(x) equals
        the plane integral of k(|x - w|) over the mirror region {|w2| > |w1|},
        whose angular measure at radius r has a closed form.  For m >= 2 a
        nested adaptive quadrature in (sigma, tau) is used with an analytic
        power-law tail beyond the truncation radius.
        """
        if x.s <= x.t:
            raise ArithmeticError("zero-order coefficient diverges on the cone")
        if self.m == 1:
            s, t = x.s, x.t
            k = self.kernel.profile
            d1 = (s - t) / SQ2
            d2 = (s + t) / SQ2
            rx = x.radius

            def ang(r):
                q1 = min((s - t) / (SQ2 * r), 1.0)
                a = np.pi - 2.0 * np.arcsin(q1)
                if r > d2:
                    q2 = min((s + t) / (SQ2 * r), 1.0)
                    a += 2.0 * np.arccos(q2)
                return a

            f = lambda r: float(k(np.asarray(r, float))) * r * ang(r)
            out = 0.0
            if d2 > d1:
                out += quad(f, d1, d2, epsabs=0.0, epsrel=rel, limit=200)[0]
            if rx > d2:
                out += quad(f, d2, rx, epsabs=0.0, epsrel=rel, limit=200)[0]
            out += np.pi * quad(lambda r: float(k(np.asarray(r, float))) * r,
                                rx, np.inf, epsabs=0.0, epsrel=rel, limit=200)[0]
            return out
        return self._zero_order_quad(x, rel=rel, truncation=truncation)

    def _zero_order_quad(self, x: QuadrantPoint, rel: float = 1e-7,
                         truncation: float = None) -> float:
        """m >= 2 fallback: A(x) = int_{sigma > tau} kbar(x, (tau, sigma)) dmu."""
        m = self.m
        w_ang = sphere_area(m - 1) ** 2
        S = truncation if truncation is not None else max(64.0, 8.0 * x.radius)

        def inner(tau_v):
            g = lambda sg: float(self.averaged_vec(x.s, x.t, np.array([tau_v]),
                                                   np.array([sg]))[0]) * sg ** (m - 1)
            lo, hi = tau_v, S
            if hi <= lo:
                return 0.0
            mid = min(max(x.radius, 2 * lo), hi)
            v = quad(g, lo, mid, epsabs=0.0, epsrel=rel, limit=100)[0]
            if hi > mid:
                v += quad(g, mid, hi, epsabs=0.0, epsrel=rel, limit=100)[0]
            return v

        f = lambda tau_v: inner(tau_v) * tau_v ** (m - 1)
        half = (x.s + x.t) / 2
        v = quad(f, 0.0, half, epsabs=0.0, epsrel=rel, limit=100)[0]
        v += quad(f, half, S, epsabs=0.0, epsrel=rel, limit=100)[0]
        out = w_ang * v
        # analytic power-law tail beyond S: kbar(x, z) ~ k(|z|) far away, and
        # the mirror region carries half of every large sphere
        kappa = float(self.kernel.profile(np.asarray(S, float))) * S ** (
            self.kernel.dim + 2 * self.kernel.order)
        n2g = 2 * self.kernel.order
        out += 0.5 * sphere_area(2 * m - 1) * kappa * S ** (-n2g) / n2g
        return out

    # -- local singular coefficient of the averaged kernel ------------------

    def plane_local_coefficient(self) -> float:
        """kappa_eff with kbar(x, y) * measure ~ kappa_eff |z|^(-2-2 gamma) as y -> x.

        This is the coefficient seen by the (s, t)-plane lattice; it is
        position independent because the (s t)^(m-1) measure weight cancels
        the concentration of the angular average.
        """
        kappa0 = self.kernel.local_coefficient()
        if self.m == 1:
            return kappa0
        m, g = self.m, self.kernel.order
        norm = np.sqrt(np.pi) * gamma_ratio(m)       # int_0^pi sin^(m-2)
        j_ang = 0.5 * beta_fn((m - 1) / 2.0, (m - 1) / 2.0)
        j_rad = 0.5 * beta_fn(m - 1.0, g + 1.0)
        jm = j_ang * j_rad
        return kappa0 * (jm / norm ** 2) * sphere_area(m - 1) ** 2

    # -- pair tables on grids ------------------------------------------------

    def difference_table(self, s: np.ndarray, t: np.ndarray):
        """Row-streamed tables over all node pairs of a fixed grid.

        Returns (D, KBS_rows) where D = kbar(x, y) - kbar(x, y*) with the
        singular diagonal of the first term zeroed (principal value), and
        KBS_rows the full star-kernel table.  The downstream operator object
        is the memo: it is built once per grid and reused for every apply,
        assembly and eigensolve on that grid.
        """
        n = len(s)
        D = np.empty((n, n))
        KBS = np.empty((n, n))
        for a in range(n):
            kb = self.averaged_vec(s[a], t[a], s, t)
            kb[a] = 0.0
            kbs = self.averaged_vec(s[a], t[a], t, s)
            KBS[a] = kbs
            D[a] = kb - kbs
        return D, KBS

    def region_mass(self, x: QuadrantPoint, region: str, box: float = None) -> float:
        """Plane-region kernel masses used for truncation tails (m = 1 exact)."""
        if self.m == 1:
            return _polar_region_mass(self.kernel, x.s, x.t, region, box)
        return self._region_mass_quad(x, region, box)

    def _region_mass_quad(self, x: QuadrantPoint, region: str, box: float) -> float:
        # coarse log-radial midpoint rule with sampled angular indicator;
        # only used for m >= 2 truncation tails, which are small corrections
        nth = 720
        th = (np.arange(nth) + 0.5) * (2 * np.pi / nth)
        ct, st_ = np.cos(th), np.sin(th)
        m = self.m

        def ang_frac(r):
            w1 = x.s + r * ct
            w2 = x.t + r * st_
            if region == "open_outside_box":
                mask = (np.abs(w1) > np.abs(w2)) & (np.maximum(np.abs(w1), np.abs(w2)) > box)
            elif region == "mirror_outside_box":
                mask = (np.abs(w2) > np.abs(w1)) & (np.maximum(np.abs(w1), np.abs(w2)) > box)
            else:
                raise ValueError(region)
            if not np.any(mask):
                return 0.0
            # doubly radial measure correction relative to plane measure
            wgt = (np.abs(w1) * np.abs(w2)) ** (m - 1)
            return float(np.mean(np.where(mask, wgt, 0.0))) * 2 * np.pi

        k = self.kernel.profile
        r0 = max(box - x.radius, 1e-3)
        edges = np.geomspace(r0, 100 * box, 241)
        mids = np.sqrt(edges[1:] * edges[:-1])
        vals = np.array([float(k(np.asarray(r, float))) * r ** (2 * m - 1) * ang_frac(r)
                         for r in mids])
        out = float(np.sum(vals * np.diff(edges)))
        # fractional tail beyond the last edge
        kappa = float(k(np.asarray(edges[-1], float))) * edges[-1] ** (2 * m + 2 * self.kernel.order)
        out += 0.5 * sphere_area(2 * m - 1) / (2 * np.pi) * np.pi * kappa * edges[-1] ** (
            -2 * self.kernel.order) / (2 * self.kernel.order)
        return out


def gamma_ratio(m: int) -> float:
    """Gamma((m-1)/2) / Gamma(m/2)."""
    from scipy.special import gamma as G
    return float(G((m - 1) / 2.0) / G(m / 2.0))


def kernel_difference_scan(cache: AveragedKernelCache, n_pairs: int = 10000,
                           seed: int = 0, radius: float = 10.0):
    """Sign scan of the averaged-kernel difference over random pairs in O.

    Returns (min_value, argmin_pair, n_pairs).  For strictly sqrt-convex
    kernels the minimum stays positive; a negative sample certifies the loss
    of positivity for kernels violating the convexity condition.
    """
    rng = np.random.default_rng(seed)
    s1 = rng.uniform(0.0, radius, n_pairs)
    t1 = s1 * rng.uniform(0.0, 1.0, n_pairs) ** 2
    s2 = rng.uniform(0.0, radius, n_pairs)
    t2 = s2 * rng.uniform(0.0, 1.0, n_pairs) ** 2
    sep = np.hypot(s1 - s2, t1 - t2) > 1e-9
    s1, t1, s2, t2 = s1[sep], t1[sep], s2[sep], t2[sep]
    if cache.m == 1:
        k = cache.kernel.profile
        kb = 0.25 * (k(np.hypot(s1 - s2, t1 - t2)) + k(np.hypot(s1 - s2, t1 + t2))
                     + k(np.hypot(s1 + s2, t1 - t2)) + k(np.hypot(s1 + s2, t1 + t2)))
        kbs = 0.25 * (k(np.hypot(s1 - t2, t1 - s2)) + k(np.hypot(s1 - t2, t1 + s2))
                      + k(np.hypot(s1 + t2, t1 - s2)) + k(np.hypot(s1 + t2, t1 + s2)))
        d = kb - kbs
        a = int(np.argmin(d))
        return float(d[a]), ((float(s1[a]), float(t1[a])),
                             (float(s2[a]), float(t2[a]))), int(len(d))
    worst = np.inf
    worst_pair = None
    for a in range(len(s1)):
        d = float(cache.kernel_difference_vec(s1[a], t1[a],
                                              np.array([s2[a]]), np.array([t2[a]]))[0])
        if d < worst:
            worst = d
            worst_pair = ((float(s1[a]), float(t1[a])), (float(s2[a]), float(t2[a])))
    return worst, worst_pair, int(len(s1))


# -- convenience wrappers matching the operation-level API -------------------


def kbar(cache: AveragedKernelCache, x: QuadrantPoint, y: QuadrantPoint) -> float:
    if abs(x.s - y.s) < 1e-14 and abs(x.t - y.t) < 1e-14:
        raise ValueError("averaged kernel is singular at coinciding points")
    return cache.averaged(x, y)


def kernel_difference(cache: AveragedKernelCache, x: QuadrantPoint,
                      y: QuadrantPoint) -> float:
    if not (x.in_open_region() and y.in_open_region()):
        raise ValueError("kernel difference is defined for points in the open region")
    return cache.kernel_difference(x, y)


def zero_order_coefficient(cache: AveragedKernelCache, x: QuadrantPoint,
                           truncation: float = None) -> float:
    if not x.in_open_region():
        raise ArithmeticError("zero-order coefficient diverges on the cone")
    return cache.zero_order_coefficient(x, truncation=truncation)
