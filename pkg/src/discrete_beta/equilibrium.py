"""Constrained energy minimisation over capped densities, its certificate, and reference densities.

The discrete problem on M cells of width h is the quadratic program

    minimise  w^T K w + v^T w   subject to  0 <= w <= h / theta,  sum(w) = 1,

with K the log-kernel matrix (exact diagonal) and v the potential at
the midpoints. The default solver is a primal-dual active-set method:
each step solves the equality-constrained problem on the current free
set, projects the candidate back onto the capped simplex and takes an
exact line-search step, so the objective never increases.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .kernels import INF
from .measures import (GridMeasure, AtomicMeasure, MeasureError, energy, kernel_matrix)

SAT_SLACK = 1e-8
BOUNDARY_MASS = 1e-6
ARMIJO_C = 1e-4


class ConvergenceError(RuntimeError):
    pass


class BoundaryMassWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EquilibriumProblem:
    """theta, domain Delta (may be infinite), finite window inside it, potential and cell count."""

    theta: float
    potential: Callable
    window: tuple
    domain: tuple = (-INF, INF)
    m: int = 2000

    def __post_init__(self):
        lo, hi = self.window
        dlo, dhi = self.domain
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
            raise ValueError("window must be a finite interval")
        if lo < dlo or hi > dhi:
            raise ValueError("window must lie inside the domain")
        if hi - lo < self.theta * (1 - 1e-12):
            raise ValueError("window shorter than theta: no capped probability density fits")
        if self.m < 2:
            raise ValueError("need at least two cells")

    @property
    def h(self) -> float:
        return (self.window[1] - self.window[0]) / self.m

    @property
    def cap(self) -> float:
        return 1.0 / self.theta

    def grid(self) -> np.ndarray:
        return self.window[0] + self.h * (np.arange(self.m) + 0.5)

    def open_edges(self) -> tuple:
        """Whether each window edge is artificial (strictly inside the domain)."""
        return self.window[0] > self.domain[0], self.window[1] < self.domain[1]

    def with_window(self, window) -> "EquilibriumProblem":
        return EquilibriumProblem(self.theta, self.potential, tuple(window), self.domain, self.m)


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    measure: GridMeasure
    c: float
    residual_support: float
    residual_offsupport: float
    f_value: float
    iterations: int
    converged: bool = True
    boundary_mass: float = 0.0
    boundary_ok: bool = True
    problem: Optional[EquilibriumProblem] = None
    history: tuple = ()

    def summary(self) -> str:
        return summary_text(self)


# ---------------------------------------------------------------------------
# Capped simplex projection
# ---------------------------------------------------------------------------


def project_capped_simplex(y: np.ndarray, cap: float, total: float = 1.0, tol: float = 1e-15) -> np.ndarray:
    """Euclidean projection onto {0 <= w <= cap, sum w = total} by bisection on the shift."""
    if cap * y.size < total * (1 - 1e-12):
        raise ValueError("capped simplex is empty")
    lo = float(np.min(y)) - cap
    hi = float(np.max(y))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = np.clip(y - mid, 0.0, cap).sum()
        if s > total:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    w = np.clip(y - 0.5 * (lo + hi), 0.0, cap)
    return _fix_sum(w, cap, total)


def _fix_sum(w, cap, total):
    # push the rounding residue into cells that have room for it
    r = total - math.fsum(w)
    if r > 0:
        room = cap - w
        idx = np.nonzero(room > 0)[0]
        w[idx] += r * room[idx] / room[idx].sum()
    elif r < 0:
        idx = np.nonzero(w > 0)[0]
        w[idx] += r * w[idx] / w[idx].sum()
    return np.clip(w, 0.0, cap)


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


def _objective(k, v, w):
    return float(w @ (k @ w) + v @ w)


def _line_step(k, v, w, d):
    # exact minimiser on [0, 1] of the quadratic along d, then an Armijo check
    g = 2.0 * (k @ w) + v
    slope = float(g @ d)
    if slope >= 0:
        return 0.0, slope
    curv = float(d @ (k @ d))
    alpha = 1.0 if curv <= 0 else min(1.0, -slope / (2.0 * curv))
    f0 = _objective(k, v, w)
    while alpha > 1e-12 and _objective(k, v, w + alpha * d) > f0 + ARMIJO_C * alpha * slope:
        alpha *= 0.5
    return alpha, slope


def _active_set(k, v, cap, w, max_iter, history):
    m = v.size
    lo = w <= 0
    up = w >= cap
    scale = 2.0 * float(np.median(np.diag(k)))
    scale = scale if scale > 0 else 1.0
    it = 0
    for it in range(1, max_iter + 1):
        free = ~(lo | up)
        fi = np.nonzero(free)[0]
        ui = np.nonzero(up)[0]
        if fi.size == 0:
            # every cell pinned: release the void ones and retry
            lo[:] = False
            continue
        a = np.empty((fi.size + 1, fi.size + 1))
        a[:-1, :-1] = 2.0 * k[np.ix_(fi, fi)]
        a[:-1, -1] = -1.0
        a[-1, :-1] = 1.0
        a[-1, -1] = 0.0
        rhs = np.empty(fi.size + 1)
        rhs[:-1] = -v[fi] - 2.0 * cap * k[np.ix_(fi, ui)].sum(axis=1)
        rhs[-1] = 1.0 - cap * ui.size
        try:
            sol = np.linalg.solve(a, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(a, rhs, rcond=None)[0]
        cand = np.zeros(m)
        cand[ui] = cap
        cand[fi] = sol[:-1]
        nu = sol[-1]
        mult = 2.0 * (k @ cand) + v - nu
        mult[free] = 0.0
        target = project_capped_simplex(cand, cap)
        alpha, _ = _line_step(k, v, w, target - w)
        if alpha > 0:
            w = np.clip(w + alpha * (target - w), 0.0, cap)
            w = _fix_sum(w, cap, 1.0)
        history.append(_objective(k, v, w))
        trial = cand - mult / scale
        new_up = trial > cap
        new_lo = (trial < 0) & ~new_up
        feasible = np.all(cand[free] >= -1e-14) and np.all(cand[free] <= cap * (1 + 1e-12))
        signs_ok = np.all(mult[lo] >= -1e-12) and np.all(mult[up] <= 1e-12)
        if feasible and signs_ok and np.array_equal(new_lo, lo) and np.array_equal(new_up, up):
            w = _fix_sum(np.clip(cand, 0.0, cap), cap, 1.0)
            history.append(_objective(k, v, w))
            return w, it, True
        lo, up = new_lo, new_up
    return w, it, False


def _projected_gradient(k, v, cap, w, max_iter, tol_fn, history):
    # accelerated projected gradient with restart; step from the Gershgorin bound on 2K
    lip = 2.0 * float(np.max(np.abs(k).sum(axis=1)))
    step = 1.0 / lip
    y, t_prev = w.copy(), 1.0
    f_prev = _objective(k, v, w)
    for it in range(1, max_iter + 1):
        g = 2.0 * (k @ y) + v
        w_new = project_capped_simplex(y - step * g, cap)
        f_new = _objective(k, v, w_new)
        if f_new > f_prev:
            # restart from the last accepted point without momentum
            y, t_prev = w.copy(), 1.0
            continue
        t = 0.5 * (1 + math.sqrt(1 + 4 * t_prev**2))
        y = w_new + (t_prev - 1) / t * (w_new - w)
        y = project_capped_simplex(y, cap)
        w, t_prev, f_prev = w_new, t, f_new
        history.append(f_new)
        if it % 50 == 0 and tol_fn(w):
            return w, it, True
    return w, max_iter, tol_fn(w)


def initial_point(problem: EquilibriumProblem) -> np.ndarray:
    m, cap = problem.m, problem.h * problem.cap
    return project_capped_simplex(np.full(m, 1.0 / m), cap)


def solve(
    problem: EquilibriumProblem,
    tol: float = 1e-3,
    max_iter: Optional[int] = None,
    method: str = "active-set",
    w0: Optional[np.ndarray] = None,
    boundary: str = "warn",
    max_extensions: int = 4,
) -> EquilibriumSolution:
    """Minimise the discretised energy and attach the variational certificate.

    ``boundary`` controls what happens when an artificial window edge
    carries more than 1e-6 mass: ``"warn"`` flags the solution,
    ``"strict"`` raises, ``"extend"`` doubles the window (same cell width)
    up to ``max_extensions`` times.
    """
    for _ in range(max_extensions + 1):
        sol = _solve_once(problem, tol, max_iter, method, w0)
        if sol.boundary_ok or boundary == "warn":
            if not sol.boundary_ok:
                warnings.warn(f"boundary cells carry mass {sol.boundary_mass:.3g} > {BOUNDARY_MASS:g}; "
                              "the window may be too small", BoundaryMassWarning, stacklevel=2)
            return sol
        if boundary == "strict":
            raise MeasureError(f"boundary cells carry mass {sol.boundary_mass:.3g}; enlarge the window")
        lo, hi = problem.window
        open_lo, open_hi = problem.open_edges()
        width = hi - lo
        new_lo = max(problem.domain[0], lo - width / 2) if open_lo else lo
        new_hi = min(problem.domain[1], hi + width / 2) if open_hi else hi
        factor = (new_hi - new_lo) / width
        problem = EquilibriumProblem(problem.theta, problem.potential, (new_lo, new_hi), problem.domain,
                                     int(round(problem.m * factor)))
        w0 = None
    raise MeasureError(f"boundary mass still {sol.boundary_mass:.3g} after {max_extensions} window extensions")


def _solve_once(problem, tol, max_iter, method, w0):
    x = problem.grid()
    h = problem.h
    cap = h * problem.cap
    k = kernel_matrix(x, h)
    v = np.asarray(problem.potential(x), dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("potential must be finite on the window")
    w = initial_point(problem) if w0 is None else project_capped_simplex(np.asarray(w0, float), cap)
    history = [_objective(k, v, w)]
    logv = np.log1p(x * x)

    def tol_ok(wc):
        rs, ro, _ = _residuals(_grid_ep(k, v, logv, wc), wc, cap, problem)
        return max(rs, ro) <= tol

    if method == "active-set":
        w, iters, done = _active_set(k, v, cap, w, max_iter or 200, history)
        if not (done and tol_ok(w)):
            # fall back to first-order steps from where the Newton phase stopped
            w, more, done = _projected_gradient(k, v, cap, w, 50000, tol_ok, history)
            iters += more
    elif method == "projected-gradient":
        w, iters, done = _projected_gradient(k, v, cap, w, max_iter or 50000, tol_ok, history)
    else:
        raise ValueError(f"unknown method {method!r}")

    ep = _grid_ep(k, v, logv, w)
    rs, ro, c = _residuals(ep, w, cap, problem)
    mu = GridMeasure(problem.window[0], h, w, problem.cap)
    bmass = _boundary_mass(w, problem)
    return EquilibriumSolution(
        measure=mu,
        c=c,
        residual_support=rs,
        residual_offsupport=ro,
        f_value=_objective(k, v, w),
        iterations=iters,
        converged=bool(done and max(rs, ro) <= tol),
        boundary_mass=bmass,
        boundary_ok=bmass <= BOUNDARY_MASS,
        problem=problem,
        history=tuple(history),
    )


def _boundary_mass(w, problem):
    open_lo, open_hi = problem.open_edges()
    return float(max(w[0] if open_lo else 0.0, w[-1] if open_hi else 0.0))


# ---------------------------------------------------------------------------
# Effective potential and certificate
# ---------------------------------------------------------------------------


def _grid_ep(k, v, logv, w):
    # cell-averaged effective potential: (K w)_a + V_a / 2 + (1/2) sum_b w_b log(1 + x_b^2)
    return k @ w + 0.5 * v + 0.5 * float(logv @ w)


def _log_antider(u):
    # G(u) = u - u log|u|, the antiderivative of -log|u|
    au = np.abs(u)
    return u - u * np.log(np.where(au > 0, au, 1.0))


def effective_potential(mu: GridMeasure, v: Callable, y):
    """int (log|x-y|^{-1} + log(1+x^2)/2) mu(dx) + V(y)/2.

    The log part is integrated exactly against the piecewise-constant
    density, so y may sit inside a charged cell.
    """
    y = np.asarray(y, dtype=float)
    edges = mu.edges
    dens = mu.density
    u = edges[None, :] - y.reshape(-1, 1)
    g = _log_antider(u)
    logpart = (g[:, 1:] - g[:, :-1]) @ dens
    x = mu.midpoints
    half = 0.5 * float(np.log1p(x * x) @ mu.weights)
    out = logpart + half + 0.5 * np.asarray(v(y), dtype=float).reshape(-1)
    return float(out[0]) if y.ndim == 0 else out.reshape(y.shape)


def _classify(w, cap):
    slack = SAT_SLACK * cap
    sat = w >= cap - slack
    void = w <= slack * 1e-6
    interior = ~sat & ~void
    return sat, void, interior


def _residuals(ep, w, cap, problem=None, region=None):
    sat, void, interior = _classify(w, cap)
    inner = np.ones(w.size, dtype=bool)
    # window edges are grid-ambiguous; always excluded
    inner[0] = inner[-1] = False
    if region is not None:
        inner &= region
    if np.any(interior & inner):
        c = float(np.mean(ep[interior & inner]))
    elif np.any(interior):
        c = float(np.mean(ep[interior]))
    else:
        hi = np.max(ep[sat]) if np.any(sat) else -INF
        lo = np.min(ep[void]) if np.any(void) else INF
        c = float(0.5 * (hi + lo)) if math.isfinite(hi) and math.isfinite(lo) else float(hi if math.isfinite(hi) else lo)
    charged = (w > 0) & ~void & inner
    room = ~sat & inner
    r_sup = float(np.max(np.clip(ep[charged] - c, 0, None), initial=0.0))
    r_off = float(np.max(np.clip(c - ep[room], 0, None), initial=0.0))
    return r_sup, r_off, c


def variational_residual(solution_or_measure, problem: EquilibriumProblem, exact: bool = False,
                         region: Optional[tuple] = None):
    """(r_support, r_offsupport, c) for a grid measure on the problem's grid.

    With ``exact=False`` the effective potential is the cell average used
    by the solver; ``exact=True`` evaluates it pointwise at midpoints.
    The first and last cells are left out of both maxima. ``region``
    restricts the cells entering c and the maxima to an interval.
    """
    mu = getattr(solution_or_measure, "measure", solution_or_measure)
    x = mu.midpoints
    if exact:
        ep = effective_potential(mu, problem.potential, x)
    else:
        k = kernel_matrix(x, mu.h)
        v = np.asarray(problem.potential(x), dtype=float)
        ep = _grid_ep(k, v, np.log1p(x * x), mu.weights)
    cap = mu.h / problem.theta
    mask = None if region is None else (x >= region[0]) & (x <= region[1])
    return _residuals(ep, mu.weights, cap, problem, mask)


def rate_function(mu, problem: EquilibriumProblem, f_theta: float, slack: float = 1e-9) -> float:
    """theta (E_V(mu) - F) on capped densities supported in the domain, ``INF`` otherwise."""
    if isinstance(mu, AtomicMeasure):
        return INF
    if np.any(mu.weights > mu.h / problem.theta * (1 + slack)):
        return INF
    lo, hi = mu.support()
    if lo < problem.domain[0] or hi > problem.domain[1]:
        return INF
    e = energy(mu, problem.potential)
    if not math.isfinite(e):
        return INF
    return problem.theta * (e - f_theta)


# ---------------------------------------------------------------------------
# Reference densities
# ---------------------------------------------------------------------------


def jack_support(theta: float, t: float):
    r = math.sqrt(t)
    return theta * (r - 1) ** 2, theta * (r + 1) ** 2


def jack_density(theta: float, t: float, x):
    """Equilibrium density of the Jack model, including the saturated stretch for t < 1."""
    x = np.asarray(x, dtype=float)
    a, b = jack_support(theta, t)
    out = np.zeros(x.shape)
    band = (x > a) & (x < b)
    xb = x[band]
    s = xb + theta * (t - 1)
    root = np.sqrt(np.maximum(4 * theta * t * xb - s * s, 0.0))
    # arccot in (0, pi): pi/2 - arctan
    out[band] = (0.5 * np.pi - np.arctan2(s, root)) / (theta * np.pi)
    if t < 1:
        out[(x >= 0) & (x <= a)] = 1.0 / theta
    return float(out) if out.ndim == 0 else out


def jack_cdf(theta: float, t: float, x, n_quad: int = 4001):
    """CDF of the Jack equilibrium by Gauss-Legendre quadrature of the density on subintervals."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    a, b = jack_support(theta, t)
    nodes, wts = np.polynomial.legendre.leggauss(64)
    # tabulate on a fine mesh of the band, then interpolate
    mesh = np.linspace(a, b, n_quad)
    cum = np.zeros(mesh.size)
    for i in range(1, mesh.size):
        lo, hi = mesh[i - 1], mesh[i]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        cum[i] = cum[i - 1] + half * float(wts @ jack_density(theta, t, mid + half * nodes))
    base = min(1.0, a / theta) if t < 1 else 0.0
    total = base + cum[-1]
    cdf_band = base + cum
    out = np.where(x <= 0, 0.0, np.where(x <= a, np.minimum(x, a) / theta if t < 1 else 0.0,
                                         np.interp(x, mesh, cdf_band)))
    out = np.where(x >= b, total, out)
    return out / total


def cauchy_density(x):
    x = np.asarray(x, dtype=float)
    out = 1.0 / (np.pi * (1.0 + x * x))
    return float(out) if out.ndim == 0 else out


def cauchy_cdf(x):
    x = np.asarray(x, dtype=float)
    out = 0.5 + np.arctan(x) / np.pi
    return float(out) if out.ndim == 0 else out


def reference_equilibrium(model: str, theta: float, t: Optional[float] = None):
    """(density, cdf, support-or-None) for the models with a closed form, else ``None``."""
    if model == "jack":
        return (lambda x: jack_density(theta, t, x), lambda x: jack_cdf(theta, t, x), jack_support(theta, t))
    if model == "cauchy" and 0.5 < theta <= math.pi:
        return cauchy_density, cauchy_cdf, None
    return None


# ---------------------------------------------------------------------------
# Plain-text summary
# ---------------------------------------------------------------------------


def summary_text(sol: EquilibriumSolution) -> str:
    """``{F_V_theta, c, residuals, iterations}`` in fixed order, then diagnostics."""
    lines = [
        "{",
        f'  "F_V_theta": {sol.f_value!r},',
        f'  "c": {sol.c!r},',
        f'  "residuals": [{sol.residual_support!r}, {sol.residual_offsupport!r}],',
        f'  "iterations": {sol.iterations}',
        "}",
    ]
    lo, hi = sol.measure.support(tol=1e-12)
    extra = [
        f"converged = {str(sol.converged).lower()}",
        f"support = {lo!r} {hi!r}",
        f"boundary_mass = {sol.boundary_mass!r}",
        f"boundary_ok = {str(sol.boundary_ok).lower()}",
        "boundary_cells_excluded = 2",
    ]
    return "\n".join(lines + extra) + "\n"
