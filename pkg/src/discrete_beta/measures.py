"""Grid and atomic measures, log-energy quadrature, the circle pushforward and the Levy distance.

Energies use the midpoint rule between distinct cells and the exact
same-cell integral

    int_{cell} int_{cell} log|x-y|^{-1} dx dy = h^2 (3/2 - log h)

for the piecewise-constant density inside a cell.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _kernels
from .kernels import INF, inverse_stereo_array, stereo_array

SELF_CONST = 1.5
SUM_TOL = 1e-10
CAP_SLACK = 1e-12


class MeasureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Probability measure with constant density on each cell of a uniform grid.

    Cell ``a`` is ``[left + a h, left + (a+1) h]`` and carries mass ``weights[a]``.
    ``cap`` is an optional density bound (theta^{-1}).
    """

    left: float
    h: float
    weights: np.ndarray
    cap: Optional[float] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise MeasureError("weights must be a non-empty 1-d array")
        if not self.h > 0:
            raise MeasureError("cell width must be positive")
        if np.any(w < 0):
            raise MeasureError("negative cell mass")
        if abs(math.fsum(w) - 1.0) > SUM_TOL:
            raise MeasureError(f"total mass {math.fsum(w)!r} is not 1")
        if self.cap is not None and np.any(w > self.h * self.cap * (1 + CAP_SLACK)):
            raise MeasureError("density exceeds cap")
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.weights.size

    @property
    def right(self) -> float:
        return self.left + self.m * self.h

    @property
    def edges(self) -> np.ndarray:
        return self.left + self.h * np.arange(self.m + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.left + self.h * (np.arange(self.m) + 0.5)

    @property
    def density(self) -> np.ndarray:
        return self.weights / self.h

    def cdf(self, x):
        return np.interp(x, self.edges, np.concatenate([[0.0], np.cumsum(self.weights)]))

    def shifted(self, s: float) -> "GridMeasure":
        return GridMeasure(self.left + s, self.h, self.weights, self.cap)

    def with_cap(self, cap: Optional[float]) -> "GridMeasure":
        return GridMeasure(self.left, self.h, self.weights, cap)

    def support(self, tol: float = 0.0):
        """Outer edges of the cells carrying more than ``tol`` mass."""
        idx = np.nonzero(self.weights > tol)[0]
        return float(self.edges[idx[0]]), float(self.edges[idx[-1] + 1])

    @classmethod
    def from_density(cls, f: Callable, left: float, right: float, m: int, cap=None, normalize=True):
        """Midpoint sampling of a density on ``m`` cells of [left, right]."""
        h = (right - left) / m
        x = left + h * (np.arange(m) + 0.5)
        w = np.clip(np.asarray(f(x), dtype=float), 0, None) * h
        if normalize:
            w = w / math.fsum(w)
        if cap is not None:
            w = np.minimum(w, h * cap)
        return cls(left, h, w, cap)

    @classmethod
    def from_cdf(cls, cdf: Callable, left: float, right: float, m: int, cap=None):
        """Exact cell masses from a CDF, renormalised to the window."""
        edges = np.linspace(left, right, m + 1)
        w = np.diff(np.asarray(cdf(edges), dtype=float))
        w = np.clip(w, 0, None)
        w = w / math.fsum(w)
        h = (right - left) / m
        if cap is not None:
            w = np.minimum(w, h * cap)
        return cls(left, h, w, cap)

    @classmethod
    def uniform(cls, a: float, b: float, m: int, cap=None):
        return cls(a, (b - a) / m, np.full(m, 1.0 / m), cap)

    # -- plain-text exchange ------------------------------------------------

    def to_csv(self) -> str:
        cap = "" if self.cap is None else repr(float(self.cap))
        lines = ["left,h,cap", f"{float(self.left)!r},{float(self.h)!r},{cap}"]
        lines.extend(repr(float(v)) for v in self.weights)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "GridMeasure":
        rows = [r for r in text.splitlines() if r.strip()]
        if rows[0].replace(" ", "") != "left,h,cap":
            raise MeasureError("GridMeasure CSV must start with 'left,h,cap'")
        left, h, cap = rows[1].split(",")
        w = np.array([float(r) for r in rows[2:]])
        return cls(float(left), float(h), w, float(cap) if cap.strip() else None)

    def cdf_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,F\n")
        for x, f in zip(self.edges, np.concatenate([[0.0], np.cumsum(self.weights)])):
            buf.write(f"{float(x)!r},{min(float(f), 1.0)!r}\n")
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite sum of point masses."""

    locations: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        mass = np.asarray(self.masses, dtype=float)
        if loc.shape != mass.shape or loc.ndim != 1:
            raise MeasureError("locations and masses must be matching 1-d arrays")
        if np.any(mass <= 0):
            raise MeasureError("atom masses must be positive")
        if abs(math.fsum(mass) - 1.0) > 1e-12:
            raise MeasureError("atom masses must sum to 1")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "masses", mass)

    @property
    def atoms(self):
        return list(zip(self.locations.tolist(), self.masses.tolist()))

    def cdf(self, x):
        order = np.argsort(self.locations, kind="stable")
        xs = self.locations[order]
        cm = np.cumsum(self.masses[order])
        k = np.searchsorted(xs, x, side="right")
        return np.where(k > 0, cm[np.maximum(k - 1, 0)], 0.0)

    @classmethod
    def pooled(cls, locations) -> "AtomicMeasure":
        loc = np.asarray(locations, dtype=float).ravel()
        return cls(loc, np.full(loc.size, 1.0 / loc.size))


Measure = Union[GridMeasure, AtomicMeasure]


# ---------------------------------------------------------------------------
# Energies on the line
# ---------------------------------------------------------------------------


def _potential_values(v, x):
    vals = np.asarray(v(x), dtype=float)
    return np.broadcast_to(vals, np.shape(x))


def interaction(mu: GridMeasure, accel=None) -> float:
    """sum_{a != b} w_a w_b log|x_a - x_b|^{-1} + sum_a w_a^2 (3/2 - log h)."""
    w = mu.weights
    sq = math.fsum(w * w)
    # |x_a - x_b| = h |a - b| on the grid
    cross = -math.log(mu.h) * (1.0 - sq) - _kernels.lag_log_sum(w, accel)
    return cross + sq * (SELF_CONST - math.log(mu.h))


def energy(mu: GridMeasure, v: Callable, accel=None) -> float:
    """Weighted log-energy E_V of a grid measure."""
    x = mu.midpoints
    pos = mu.weights > 0
    vals = _potential_values(v, x[pos])
    if np.any(np.isposinf(vals)):
        return INF
    return interaction(mu, accel) + math.fsum(mu.weights[pos] * vals)


def kernel_matrix(x: np.ndarray, h: float) -> np.ndarray:
    """Dense log-kernel matrix on the grid with the exact diagonal."""
    d = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(d, 1.0)
    k = -np.log(d)
    np.fill_diagonal(k, SELF_CONST - math.log(h))
    return k


# ---------------------------------------------------------------------------
# Circle side
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SphereMeasure:
    """Measure on the circle: weighted points, each with an arclength (0 for true atoms), plus mass at the pole."""

    points: np.ndarray
    masses: np.ndarray
    arclength: np.ndarray
    mass_at_np: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 2)
        m = np.asarray(self.masses, dtype=float)
        ds = np.asarray(self.arclength, dtype=float)
        if p.shape[0] != m.size or ds.size != m.size:
            raise MeasureError("points, masses and arclengths must align")
        if np.any(m < 0) or self.mass_at_np < 0:
            raise MeasureError("negative mass")
        if abs(math.fsum(m) + self.mass_at_np - 1.0) > SUM_TOL:
            raise MeasureError("total mass is not 1")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "arclength", ds)

    def mix(self, other: "SphereMeasure", t: float) -> "SphereMeasure":
        """t * self + (1 - t) * other; both must live on the same points."""
        if self.points.shape != other.points.shape or not np.array_equal(self.points, other.points):
            raise MeasureError("mixing needs measures on a common set of points")
        return SphereMeasure(self.points, t * self.masses + (1 - t) * other.masses, self.arclength,
                             t * self.mass_at_np + (1 - t) * other.mass_at_np)


def pushforward(mu: Measure) -> SphereMeasure:
    """T_* mu: cells go to T(midpoint) with arclength h/(1 + x^2); atoms keep zero arclength."""
    if isinstance(mu, GridMeasure):
        x = mu.midpoints
        return SphereMeasure(stereo_array(x), mu.weights.copy(), mu.h / (1.0 + x * x), 0.0)
    return SphereMeasure(stereo_array(mu.locations), mu.masses.copy(), np.zeros(mu.masses.size), 0.0)


def _with_pole(nu: SphereMeasure):
    if nu.mass_at_np > 0:
        return (np.vstack([nu.points, [0.0, 1.0]]), np.append(nu.masses, nu.mass_at_np),
                np.append(nu.arclength, 0.0))
    return nu.points, nu.masses, nu.arclength


def mixed_energy(mu: SphereMeasure, nu: SphereMeasure, accel=None) -> float:
    """I(mu, nu) = iint log||x - y||^{-1} mu(dx) nu(dy) >= 0.

    Coincident points with positive arclength use the same-cell rule
    with that arclength; coincident true atoms give ``INF``.
    """
    p, m, ds_p = _with_pole(mu)
    q, n, ds_q = _with_pole(nu)
    total = _kernels.chord_cross(p, m, q, n, accel)
    # coincident pairs
    same = _coincident_pairs(p, q)
    extra = []
    for a, b in same:
        mass = m[a] * n[b]
        if mass == 0:
            continue
        ds = max(ds_p[a], ds_q[b])
        if ds <= 0:
            return INF
        extra.append(mass * (SELF_CONST - math.log(ds)))
    return total + math.fsum(extra)


def _coincident_pairs(p, q):
    if p is q or (p.shape == q.shape and np.array_equal(p, q)):
        return [(a, a) for a in range(p.shape[0])] + _dup_pairs(p)
    keys = {}
    for b, row in enumerate(map(tuple, q)):
        keys.setdefault(row, []).append(b)
    return [(a, b) for a, row in enumerate(map(tuple, p)) for b in keys.get(row, [])]


def _dup_pairs(p):
    # repeated points inside one array (rare: only at the pole or user input)
    seen = {}
    out = []
    for a, row in enumerate(map(tuple, p)):
        for b in seen.get(row, []):
            out.extend([(a, b), (b, a)])
        seen.setdefault(row, []).append(a)
    return out


def compactified_values(points: np.ndarray, v: Callable, tail_value: float) -> np.ndarray:
    x1, x2 = points[:, 0], points[:, 1]
    pole = (x1 == 0.0) & (x2 == 1.0)
    out = np.full(points.shape[0], float(tail_value))
    if np.any(~pole):
        y = inverse_stereo_array(points[~pole])
        out[~pole] = _potential_values(v, y) - np.log1p(y * y)
    return out


def energy_sphere(nu: SphereMeasure, v: Callable, tail_value: float, accel=None) -> float:
    """E_Vcal(nu) = I(nu, nu) + int Vcal dnu; ``INF`` when nu charges the pole."""
    if nu.mass_at_np > 0:
        return INF
    pos = nu.masses > 0
    if np.any(nu.arclength[pos] <= 0):
        return INF
    vals = compactified_values(nu.points[pos], v, tail_value)
    if np.any(np.isposinf(vals)):
        return INF
    return mixed_energy(nu, nu, accel) + math.fsum(nu.masses[pos] * vals)


def sphere_cdf_discrepancy(mu: SphereMeasure, nu: SphereMeasure, n_angles: int = 256) -> float:
    """Diagnostic stand-in for the Levy metric on the circle.

    Largest difference in mass over arcs {angle <= a} from the south
    pole, over a fixed set of cut angles. Not a metric on all of M(S);
    used for reporting only.
    """
    def angles(s):
        p, m, _ = _with_pole(s)
        return np.arctan2(p[:, 0], 0.5 - p[:, 1]), m

    cuts = np.linspace(-math.pi, math.pi, n_angles + 1)
    am, mm = angles(mu)
    an, mn = angles(nu)
    fm = np.array([mm[am <= c].sum() for c in cuts])
    fn = np.array([mn[an <= c].sum() for c in cuts])
    return float(np.max(np.abs(fm - fn)))


# ---------------------------------------------------------------------------
# Levy distance on the line
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseCDF:
    """CDF that is linear between knots and may jump at knots."""

    knots: np.ndarray
    left_vals: np.ndarray
    right_vals: np.ndarray

    def right(self, x):
        k = np.searchsorted(self.knots, x, side="right") - 1
        return self._eval(x, k)

    def left_limit(self, x):
        k = np.searchsorted(self.knots, x, side="left") - 1
        return self._eval(x, k)

    def _eval(self, x, k):
        x = np.asarray(x, dtype=float)
        k = np.asarray(k)
        n = self.knots.size
        out = np.empty(x.shape)
        below = k < 0
        above = k >= n - 1
        mid = ~below & ~above
        out[below] = 0.0
        out[above] = self.right_vals[-1]
        km = k[mid]
        x0, x1 = self.knots[km], self.knots[km + 1]
        f0, f1 = self.right_vals[km], self.left_vals[km + 1]
        out[mid] = f0 + (f1 - f0) * (x[mid] - x0) / (x1 - x0)
        return out


def cdf_of(mu: Measure) -> PiecewiseCDF:
    if isinstance(mu, GridMeasure):
        f = np.concatenate([[0.0], np.cumsum(mu.weights)])
        f[-1] = 1.0
        return PiecewiseCDF(mu.edges, f, f)
    order = np.argsort(mu.locations, kind="stable")
    xs, ms = mu.locations[order], mu.masses[order]
    knots, inv = np.unique(xs, return_inverse=True)
    jumps = np.zeros(knots.size)
    np.add.at(jumps, inv, ms)
    right = np.cumsum(jumps)
    right[-1] = 1.0
    left = right - jumps
    # constant between atoms: repeat values so that interpolation is flat
    return PiecewiseCDF(knots, left, right)


def _envelope_ok(fa: PiecewiseCDF, fb: PiecewiseCDF, delta: float, tol: float) -> bool:
    # fa(x - delta) - delta <= fb(x) for all x
    pts = np.concatenate([fb.knots, fa.knots + delta])
    r = fb.right(pts) - fa.right(pts - delta) + delta
    lft = fb.left_limit(pts) - fa.left_limit(pts - delta) + delta
    return min(r.min(), lft.min()) >= -tol


def levy_distance(mu: Measure, nu: Measure, tol: float = 1e-13) -> float:
    """Levy distance inf{d : F_mu(x-d) - d <= F_nu(x) <= F_mu(x+d) + d for all x}.

    Exact envelope checks at the breakpoints of both CDFs, bisection on d.
    """
    fa, fb = cdf_of(mu), cdf_of(nu)

    def ok(d):
        return _envelope_ok(fa, fb, d, 1e-15) and _envelope_ok(fb, fa, d, 1e-15)

    if ok(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Compact truncation with cap-preserving redeposit
# ---------------------------------------------------------------------------


def truncate_measure(mu: GridMeasure, a_n: float, b_n: float, eps: float) -> GridMeasure:
    """Restrict mu to [a_n, b_n] and spread the lost mass uniformly where density <= cap - eps.

    Cells are kept when their midpoint lies in [a_n, b_n]. The slack set is
    taken inside [a_n, b_n] so the output is supported there.
    """
    if mu.cap is None:
        raise MeasureError("truncation needs a capped measure")
    if not a_n < b_n:
        raise MeasureError("need a_n < b_n")
    x = mu.midpoints
    inside = (x >= a_n) & (x <= b_n)
    rho = 1.0 - math.fsum(mu.weights[inside])
    if rho <= 0.0 and np.all(inside | (mu.weights == 0)):
        return mu
    dens = mu.density
    slack = inside & (dens <= mu.cap - eps)
    slack_len = slack.sum() * mu.h
    if slack_len < eps:
        raise MeasureError(f"slack set has length {slack_len:g} < eps={eps:g}")
    add = rho / slack_len
    if add > eps:
        raise MeasureError(f"redeposit density {add:g} exceeds cap headroom eps={eps:g}")
    w = np.where(inside, mu.weights, 0.0) + np.where(slack, add * mu.h, 0.0)
    w = np.minimum(w, mu.h * mu.cap)
    w = w / math.fsum(w)
    return GridMeasure(mu.left, mu.h, w, mu.cap)
