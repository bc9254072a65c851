"""External potentials V (or V_N) at macroscopic coordinate x = ell / N.

A ``Potential`` is callable on scalars and numpy arrays. Each one also
carries a small integer ``kind`` plus parameter arrays so that jitted
kernels can evaluate it without calling back into Python.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from ._accel import njit
from .kernels import INF

KIND_PYTHON = -1
KIND_ZERO = 0
KIND_JACK_N = 1
KIND_JACK = 2
KIND_CAUCHY = 3
KIND_TABLE = 4


@dataclass(frozen=True)
class GrowthCert:
    """Witness for liminf theta N V_N(x) - (theta' + (N-1) theta) log(1+x^2) > -inf.

    ``floor_const`` may be left as ``None``; ``wellposedness_check`` then
    reports the floor it observes.
    """

    theta_prime: float
    floor_const: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Potential:
    func: Callable[[np.ndarray], np.ndarray]
    name: str
    kind: int = KIND_PYTHON
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))
    table_x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    table_y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tail_value: float = -INF
    growth_cert: Optional[GrowthCert] = None
    n: Optional[int] = None  # set for N-dependent V_N

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.asarray(self.func(xa), dtype=float)
        return float(out) if out.ndim == 0 else out

    @property
    def jittable(self) -> bool:
        return self.kind != KIND_PYTHON

    def kernel_args(self):
        return self.kind, self.params, self.table_x, self.table_y


@njit
def potential_eval(kind, params, tx, ty, x):
    """Scalar evaluation for jitted kernels; mirrors the numpy functions below."""
    if kind == 0:
        return 0.0
    if kind == 1:
        theta, t, n = params[0], params[1], params[2]
        ax = abs(x)
        return (math.lgamma(n * ax + 1.0) - n * ax * math.log(t * theta * n)) / (theta * n)
    if kind == 2:
        theta, t = params[0], params[1]
        ax = abs(x)
        if ax == 0.0:
            return 0.0
        return (ax * math.log(ax) - ax * math.log(math.e * t * theta)) / theta
    if kind == 3:
        return math.log1p(x * x)
    if kind == 4:
        coef = params[0]
        m = tx.shape[0]
        if x <= tx[0]:
            return ty[0] + coef * (math.log1p(x * x) - math.log1p(tx[0] * tx[0]))
        if x >= tx[m - 1]:
            return ty[m - 1] + coef * (math.log1p(x * x) - math.log1p(tx[m - 1] * tx[m - 1]))
        lo = 0
        hi = m - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if tx[mid] <= x:
                lo = mid
            else:
                hi = mid
        s = (x - tx[lo]) / (tx[hi] - tx[lo])
        return ty[lo] + s * (ty[hi] - ty[lo])
    return math.nan


def zero_potential() -> Potential:
    return Potential(func=lambda x: np.zeros_like(x), name="zero", kind=KIND_ZERO, tail_value=-INF)


def jack_potential(theta: float, t: float, n: int) -> Potential:
    """V_N(x) = (theta N)^{-1} [log G(N|x|+1) - N|x| log(t theta N)], even in x."""
    _check_jack(theta, t)
    if n < 1:
        raise ValueError("n must be a positive integer")

    def func(x):
        ax = np.abs(x)
        return (gammaln(n * ax + 1.0) - n * ax * math.log(t * theta * n)) / (theta * n)

    return Potential(
        func=func,
        name=f"jack_N(theta={theta:g},t={t:g},N={n})",
        kind=KIND_JACK_N,
        params=np.array([theta, t, float(n)]),
        tail_value=INF,
        growth_cert=GrowthCert(theta_prime=1.0),
        n=n,
    )


def jack_limit_potential(theta: float, t: float) -> Potential:
    """V(x) = theta^{-1} (|x| log|x| - |x| log(e t theta)), V(0) = 0."""
    _check_jack(theta, t)
    c = math.log(math.e * t * theta)

    def func(x):
        ax = np.abs(x)
        safe = np.where(ax > 0, ax, 1.0)
        return np.where(ax > 0, ax * np.log(safe) - ax * c, 0.0) / theta

    return Potential(
        func=func,
        name=f"jack(theta={theta:g},t={t:g})",
        kind=KIND_JACK,
        params=np.array([theta, t]),
        tail_value=INF,
        growth_cert=GrowthCert(theta_prime=1.0),
    )


def cauchy_potential(theta: Optional[float] = None) -> Potential:
    """V(x) = log(1 + x^2).

    The growth certificate uses theta' = theta, so it is only attached
    when the ensemble's theta is supplied.
    """
    cert = GrowthCert(theta_prime=theta, floor_const=0.0) if theta is not None else None
    return Potential(
        func=lambda x: np.log1p(x * x),
        name="cauchy",
        kind=KIND_CAUCHY,
        tail_value=0.0,
        growth_cert=cert,
    )


def table_potential(
    xs,
    ys,
    growth_cert: Optional[GrowthCert] = None,
    tail_coef: float = 2.0,
    name: str = "table",
) -> Potential:
    """Piecewise-linear potential through samples (xs, ys).

    Outside the sampled range V continues as y_end + tail_coef * (log(1+x^2) - log(1+x_end^2)).
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ValueError("table potential needs matching 1-d arrays with at least two samples")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("table abscissae must be strictly increasing")
    params = np.array([float(tail_coef)])

    def func(x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, xs, ys)
        left = x < xs[0]
        right = x > xs[-1]
        out = np.where(left, ys[0] + tail_coef * (np.log1p(x * x) - math.log1p(xs[0] ** 2)), out)
        out = np.where(right, ys[-1] + tail_coef * (np.log1p(x * x) - math.log1p(xs[-1] ** 2)), out)
        return out

    if tail_coef > 1:
        tail = INF
    elif tail_coef == 1:
        tail = min(ys[0] - math.log1p(xs[0] ** 2), ys[-1] - math.log1p(xs[-1] ** 2))
    else:
        tail = -INF
    return Potential(
        func=func,
        name=name,
        kind=KIND_TABLE,
        params=params,
        table_x=xs,
        table_y=ys,
        tail_value=tail,
        growth_cert=growth_cert,
    )


def python_potential(func: Callable, name: str = "custom", tail_value: float = -INF,
                     growth_cert: Optional[GrowthCert] = None) -> Potential:
    """Wrap an arbitrary vectorised callable; jitted kernels fall back to numpy for these."""
    return Potential(func=func, name=name, tail_value=tail_value, growth_cert=growth_cert)


def load_table(path) -> tuple:
    """Read a two-column ``x,V`` CSV (optional header) into arrays."""
    data = np.genfromtxt(path, delimiter=",", comments="#", dtype=float)
    if np.isnan(data[0]).any():
        data = data[1:]
    return data[:, 0].copy(), data[:, 1].copy()


def _check_jack(theta: float, t: float) -> None:
    if not (theta > 0 and t > 0):
        raise ValueError(f"Jack parameters must be positive, got theta={theta}, t={t}")
