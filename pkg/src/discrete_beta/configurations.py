"""Particle configurations on the shifted lattice and their weights."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .kernels import INF
from .measures import AtomicMeasure, GridMeasure, MeasureError


class ConfigError(ValueError):
    pass


def _bound(v):
    if v is None:
        return None
    if isinstance(v, float) and math.isinf(v):
        return v
    if int(v) != v:
        raise ConfigError(f"lattice bound must be an integer or +-inf, got {v!r}")
    return int(v)


@dataclass(frozen=True)
class ParticleConfig:
    """lambda_1 >= ... >= lambda_N with lower <= lambda_N and lambda_1 <= upper.

    Positions ell_i = lambda_i + (N - i) theta are derived on demand.
    """

    theta: float
    lam: tuple
    lower: float = -INF
    upper: float = INF

    def __post_init__(self):
        lam = tuple(int(v) for v in self.lam)
        if any(int(a) != a for a in self.lam):
            raise ConfigError("lambda entries must be integers")
        if not lam:
            raise ConfigError("a configuration needs at least one particle")
        if not self.theta > 0:
            raise ConfigError("theta must be positive")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "lower", _bound(self.lower))
        object.__setattr__(self, "upper", _bound(self.upper))

    @property
    def n(self) -> int:
        return len(self.lam)

    def __str__(self):
        return to_line(self)


def validate(config: ParticleConfig) -> bool:
    """Exact check in lambda space; the theta shifts cancel in every gap condition."""
    lam = config.lam
    if any(lam[i] < lam[i + 1] for i in range(len(lam) - 1)):
        return False
    return config.lower <= lam[-1] and lam[0] <= config.upper


def _require_valid(config):
    if not validate(config):
        raise ConfigError(f"invalid configuration: {to_line(config)}")


def positions(config: ParticleConfig) -> np.ndarray:
    _require_valid(config)
    n = config.n
    return np.asarray(config.lam, dtype=float) + (n - 1 - np.arange(n)) * config.theta


def empirical_measure(config: ParticleConfig) -> AtomicMeasure:
    x = positions(config) / config.n
    return AtomicMeasure(x, np.full(config.n, 1.0 / config.n))


def _grid_quantiles(mu: GridMeasure, probs: np.ndarray) -> np.ndarray:
    """Smallest x with F(x) = p for the piecewise-linear grid CDF."""
    f = np.concatenate([[0.0], np.cumsum(mu.weights)])
    f[-1] = 1.0
    k = np.searchsorted(f, probs, side="left")  # first edge with F >= p
    k = np.clip(k, 1, mu.m)
    f0, f1 = f[k - 1], f[k]
    frac = np.where(f1 > f0, (probs - f0) / np.where(f1 > f0, f1 - f0, 1.0), 0.0)
    return mu.left + mu.h * (k - 1 + frac)


def quantile_config(mu: GridMeasure, n: int, theta: float) -> ParticleConfig:
    """Lattice configuration from the (i - 1/2)/N quantiles of a capped density.

    ell_i is the largest point of Z + (N-i) theta not above N y_{N-i+1}.
    """
    if mu.cap is None or mu.cap > 1.0 / theta * (1 + 1e-12):
        raise MeasureError("quantile construction needs density cap 1/theta")
    if not (math.isfinite(mu.left) and math.isfinite(mu.right)):
        raise MeasureError("quantile construction needs bounded support")
    probs = (np.arange(1, n + 1) - 0.5) / n
    y = _grid_quantiles(mu, probs)
    z = n * y[::-1] - (n - 1 - np.arange(n)) * theta
    eps = 1e-9 * np.maximum(1.0, np.abs(z))  # float noise guard before the floor
    lam = np.floor(z + eps).astype(np.int64)
    cfg = ParticleConfig(theta, tuple(lam.tolist()))
    if not validate(cfg):
        raise AssertionError(f"quantile configuration is not ordered: {lam.tolist()}")
    return cfg


def log_weight(config: ParticleConfig, potential: Callable, accel=None) -> float:
    """sum_{i<j} log Q_theta(ell_i - ell_j) - theta N sum_i V_N(ell_i / N)."""
    ell = positions(config)
    n, theta = config.n, config.theta
    vals = np.asarray(potential(ell / n), dtype=float)
    return _kernels.pair_log_q(ell, theta, accel) - theta * n * math.fsum(np.atleast_1d(vals))


def discrete_energy(config: ParticleConfig, potential: Callable, accel=None) -> float:
    """N^{-2} sum_{i != j} k_V(ell_i/N, ell_j/N)."""
    n = config.n
    if n == 1:
        return 0.0
    x = positions(config) / n
    vals = np.atleast_1d(np.asarray(potential(x), dtype=float))
    return (-2.0 * _kernels.pair_log_gap(x, accel) + (n - 1) * math.fsum(vals)) / n**2


# ---------------------------------------------------------------------------
# Line format: "N theta a b : l1 ... lN"
# ---------------------------------------------------------------------------


def _fmt_bound(v) -> str:
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return str(int(v))


def to_line(config: ParticleConfig) -> str:
    lam = " ".join(str(v) for v in config.lam)
    return f"{config.n} {float(config.theta)!r} {_fmt_bound(config.lower)} {_fmt_bound(config.upper)} : {lam}"


def from_line(line: str) -> ParticleConfig:
    head, _, tail = line.partition(":")
    parts = head.split()
    if len(parts) != 4 or not _:
        raise ConfigError(f"malformed configuration line: {line!r}")
    n = int(parts[0])
    bounds = [float(p) if "inf" in p else int(p) for p in parts[2:4]]
    lam = tuple(int(v) for v in tail.split())
    if len(lam) != n:
        raise ConfigError(f"expected {n} entries, got {len(lam)}")
    return ParticleConfig(float(parts[1]), lam, bounds[0], bounds[1])


def from_lambdas(theta: float, lam: Sequence[int], lower=-INF, upper=INF) -> ParticleConfig:
    return ParticleConfig(theta, tuple(lam), lower, upper)
