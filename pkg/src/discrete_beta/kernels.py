"""Interaction weight, energy kernels and the stereographic compactification.

All functions here are pure. Diagonal singularities are returned as
``math.inf`` (``INF``), never as a large finite float, so that any sum
containing one is itself infinite.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.special import gammaln

from ._accel import njit

INF = math.inf
CIRCLE_TOL = 1e-12


class DomainError(ValueError):
    """Argument outside the domain of a kernel."""


# ---------------------------------------------------------------------------
# Q_theta
# ---------------------------------------------------------------------------


STIRLING_MIN = 10.0
# B_{2k} / (2k (2k-1)) for k = 1..8
_STIRLING = np.array([1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360, 1 / 156, -3617 / 122400])


@njit
def lgamma_diff_scalar(x, a, b):
    """log Gamma(x+a) - log Gamma(x+b) without cancellation for large x."""
    za = x + a
    zb = x + b
    if za < STIRLING_MIN or zb < STIRLING_MIN:
        return math.lgamma(za) - math.lgamma(zb)
    la = math.log1p(a / x)
    lb = math.log1p(b / x)
    out = (a - b) * math.log(x) + (za - 0.5) * la - (zb - 0.5) * lb - (a - b)
    ia = 1.0 / za
    ib = 1.0 / zb
    pa = ia
    pb = ib
    ia2 = ia * ia
    ib2 = ib * ib
    for k in range(_STIRLING.shape[0]):
        out += _STIRLING[k] * (pa - pb)
        pa *= ia2
        pb *= ib2
    return out


def lgamma_diff(x, a, b):
    """Vectorised ``lgamma_diff_scalar``."""
    x = np.asarray(x, dtype=float)
    za, zb = x + a, x + b
    big = (za >= STIRLING_MIN) & (zb >= STIRLING_MIN)
    out = np.empty(x.shape)
    out[~big] = gammaln(za[~big]) - gammaln(zb[~big])
    if np.any(big):
        xb = x[big]
        za_b, zb_b = za[big], zb[big]
        v = (a - b) * np.log(xb) + (za_b - 0.5) * np.log1p(a / xb) - (zb_b - 0.5) * np.log1p(b / xb) - (a - b)
        ia, ib = 1.0 / za_b, 1.0 / zb_b
        pa, pb = ia.copy(), ib.copy()
        for c in _STIRLING:
            v += c * (pa - pb)
            pa *= ia * ia
            pb *= ib * ib
        out[big] = v
    return out


@njit
def log_q_scalar(x, theta):
    # Gamma(x+1)/Gamma(x) = x exactly, so only one lgamma difference remains.
    return math.log(x) + lgamma_diff_scalar(x, theta, 1.0 - theta)


def log_q_theta(x, theta: float):
    """Logarithm of Q_theta(x) = G(x+1) G(x+theta) / (G(x) G(x+1-theta)).

    Works on scalars and arrays. Raises ``DomainError`` when any gamma
    argument is not positive.
    """
    if theta <= 0:
        raise DomainError(f"theta must be positive, got {theta}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0) or np.any(xa + 1.0 - theta <= 0):
        raise DomainError(f"log_q_theta needs x > 0 and x + 1 - theta > 0 (theta={theta})")
    out = np.log(xa) + lgamma_diff(xa, theta, 1.0 - theta)
    return float(out) if out.ndim == 0 else out


def q_theta_sandwich(x, theta: float):
    """Log of the lower and upper bounds on Q_theta(x), valid for x >= theta."""
    if theta <= 0:
        raise DomainError(f"theta must be positive, got {theta}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < theta):
        raise DomainError("sandwich bounds need x >= theta")
    centre = 2.0 * theta * np.log(xa)
    slack = (1.0 + theta) ** 3 / xa
    lo, hi = centre - slack, centre + slack
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


# ---------------------------------------------------------------------------
# Real-line kernel
# ---------------------------------------------------------------------------


def kernel_kv(x: float, y: float, potential: Callable[[float], float]) -> float:
    """log|x-y|^{-1} + V(x)/2 + V(y)/2, with ``INF`` on the diagonal."""
    if x == y:
        return INF
    return -math.log(abs(x - y)) + 0.5 * (float(potential(x)) + float(potential(y)))


# ---------------------------------------------------------------------------
# Stereographic map onto the circle of radius 1/2 centred at (0, 1/2)
# ---------------------------------------------------------------------------


class SpherePoint(NamedTuple):
    x1: float
    x2: float

    def on_circle(self, tol: float = CIRCLE_TOL) -> bool:
        return abs(self.x1 * self.x1 + (self.x2 - 0.5) ** 2 - 0.25) <= tol

    def is_north_pole(self) -> bool:
        return self.x1 == 0.0 and self.x2 == 1.0


NORTH_POLE = SpherePoint(0.0, 1.0)


def stereo(x: float) -> SpherePoint:
    """T(x) = (x/(1+x^2), x^2/(1+x^2)); never returns the north pole for finite x."""
    if not math.isfinite(x):
        raise DomainError("stereo needs a finite argument")
    d = 1.0 + x * x
    return SpherePoint(x / d, x * x / d)


def stereo_array(x):
    """Vectorised ``stereo``; returns an (n, 2) array."""
    x = np.asarray(x, dtype=float)
    d = 1.0 + x * x
    return np.stack([x / d, x * x / d], axis=-1)


def _check_on_circle(p: SpherePoint) -> None:
    if not SpherePoint(*p).on_circle():
        raise DomainError(f"point {tuple(p)} is not on the circle")


def inverse_stereo(p: SpherePoint) -> float:
    """T^{-1} for points other than the north pole.

    Uses x1/(1-x2) on the lower half and x2/x1 on the upper half; the
    second branch stays well conditioned near the pole.
    """
    p = SpherePoint(*p)
    _check_on_circle(p)
    if p.x2 <= 0.5:
        return p.x1 / (1.0 - p.x2)
    if p.x1 == 0.0:
        raise DomainError("the north pole has no preimage")
    return p.x2 / p.x1


def inverse_stereo_array(pts):
    pts = np.asarray(pts, dtype=float)
    x1, x2 = pts[..., 0], pts[..., 1]
    if np.any(np.abs(x1 * x1 + (x2 - 0.5) ** 2 - 0.25) > CIRCLE_TOL):
        raise DomainError("points off the circle")
    lower = x2 <= 0.5
    if np.any(~lower & (x1 == 0.0)):
        raise DomainError("the north pole has no preimage")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(lower, x1 / (1.0 - x2), x2 / np.where(x1 == 0.0, 1.0, x1))


def stereo_dist(x: float, y: float) -> float:
    """|x-y| / (sqrt(1+x^2) sqrt(1+y^2)), the chord length between T(x) and T(y)."""
    return abs(x - y) / (math.sqrt(1.0 + x * x) * math.sqrt(1.0 + y * y))


def compactified_potential(p: SpherePoint, potential: Callable[[float], float], tail_value: float) -> float:
    """V(T^{-1}p) - log(1 + (T^{-1}p)^2), and ``tail_value`` at the north pole."""
    p = SpherePoint(*p)
    _check_on_circle(p)
    if p.is_north_pole():
        return tail_value
    y = inverse_stereo(p)
    return float(potential(y)) - math.log1p(y * y)


def compactify(potential: Callable[[float], float], tail_value: float) -> Callable[[SpherePoint], float]:
    """Bind ``compactified_potential`` to a potential; returns a function on the circle."""
    return lambda p: compactified_potential(p, potential, tail_value)


def kernel_fv(
    x: SpherePoint,
    y: SpherePoint,
    vcal: Optional[Callable[[SpherePoint], float]] = None,
) -> float:
    """log||x-y||^{-1} + vcal(x)/2 + vcal(y)/2 on the circle; ``vcal=None`` means zero."""
    x, y = SpherePoint(*x), SpherePoint(*y)
    _check_on_circle(x)
    _check_on_circle(y)
    if x == y:
        return INF
    chord = math.hypot(x.x1 - y.x1, x.x2 - y.x2)
    if vcal is None:
        return -math.log(chord)
    return -math.log(chord) + 0.5 * vcal(x) + 0.5 * vcal(y)
