"""Finite-N experiments: scaled free energies, ball probabilities by enumeration, KS checks."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .configurations import ParticleConfig, empirical_measure
from .ensembles import (EnsembleSpec, JackParams, enumerate_states, jack_ensemble, jack_partition_closed,
                        partition_exact, _tail_bound, count_states, MAX_STATES, WindowError)
from .equilibrium import EquilibriumProblem, jack_cdf, jack_support, solve
from .measures import AtomicMeasure, GridMeasure, _envelope_ok, cdf_of, energy
from .potentials import jack_limit_potential


def scaled_log_partition(spec: EnsembleSpec, method: str = "exact") -> float:
    """log Z'_N = log Z_N - N(N-1) theta log N."""
    n = spec.n
    if method == "closed":
        if spec.model != "jack":
            raise ValueError("closed-form partition function is only known for the Jack model")
        log_z = jack_partition_closed(JackParams(spec.theta, spec.t), n)
    elif method == "exact":
        if n > 6:
            raise ValueError("exact enumeration needs N <= 6")
        log_z = partition_exact(spec).value
    else:
        raise ValueError(f"unknown method {method!r}")
    return log_z - n * (n - 1) * spec.theta * math.log(n)


def jack_equilibrium_energy(theta: float, t: float, how: str = "quadrature", m: int = 4000) -> float:
    """E_V of the Jack equilibrium, from the closed-form density or from the solver."""
    v = jack_limit_potential(theta, t)
    _, b = jack_support(theta, t)
    if how == "quadrature":
        mu = GridMeasure.from_cdf(lambda x: jack_cdf(theta, t, x), 0.0, b, m, cap=1.0 / theta)
        return energy(mu, v)
    if how == "solver":
        prob = EquilibriumProblem(theta, v, (0.0, b + 2.0 * theta), (0.0, math.inf), m)
        return solve(prob).f_value
    raise ValueError(f"unknown method {how!r}")


@dataclass
class ScanResult:
    rows: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ns = [r[0] for r in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("scan rows must have strictly increasing N")

    @property
    def gaps(self):
        return {r[0]: r[3] for r in self.rows}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("N,value,reference,gap,tail_bound\n")
        for n, value, ref, gap, tail in self.rows:
            buf.write(f"{n},{float(value)!r},{float(ref)!r},{float(gap)!r},{float(tail)!r}\n")
        return buf.getvalue()


def free_energy_scan(make_spec: Callable[[int], EnsembleSpec], n_list: Sequence[int], reference: float,
                     method: str = "closed") -> ScanResult:
    """Rows (N, N^-2 log Z'_N, -theta F, gap, tail bound) for each N.

    ``reference`` is F (the minimal energy); failures in a row are kept
    as NaN so the scan continues.
    """
    rows = []
    errors = {}
    theta = None
    for n in sorted(set(int(v) for v in n_list)):
        spec = make_spec(n)
        theta = spec.theta
        ref = -spec.theta * reference
        tail = 0.0
        try:
            if method == "exact" or (method == "auto" and spec.model != "jack"):
                res = partition_exact(spec)
                value = (res.value - n * (n - 1) * spec.theta * math.log(n)) / n**2
                tail = res.tail_bound / n**2
            else:
                value = scaled_log_partition(spec, "closed") / n**2
        except (ValueError, WindowError) as exc:
            errors[n] = str(exc)
            value = math.nan
        rows.append((n, value, ref, value - ref, tail))
    return ScanResult(rows, {"method": method, "theta": theta, "reference_F": reference, "errors": errors})


def jack_scan(theta: float, t: float, n_list: Sequence[int], reference: Optional[float] = None) -> ScanResult:
    if reference is None:
        reference = jack_equilibrium_energy(theta, t)
    res = free_energy_scan(lambda n: jack_ensemble(JackParams(theta, t), n), n_list, reference, "closed")
    res.meta.update(model="jack", t=t)
    return res


# ---------------------------------------------------------------------------
# Ball probabilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallProbability:
    log_prob: float
    tail_bound: float
    states: int


def ball_probability_exact(spec: EnsembleSpec, target, delta: float, window: tuple,
                           max_states: int = MAX_STATES) -> BallProbability:
    """log P(d(mu_N, target) < delta) by enumerating lambda in ``window``.

    Probabilities are normalised over the window; ``tail_bound`` bounds
    log Z_full - log Z_window, so the true log-probability lies in
    [log_prob - tail_bound, log_prob + tail_bound].
    """
    if spec.n > 4:
        raise ValueError("ball probabilities are enumerated for N <= 4 only")
    lo, hi = int(window[0]), int(window[1])
    states = count_states(lo, hi, spec.n)
    if states > max_states:
        raise WindowError(f"window has {states} states > {max_states}")
    lams, lw = enumerate_states(spec, lo, hi)
    log_z = float(logsumexp(lw))
    tail = _tail_bound(spec, lo, hi, log_z)
    if delta <= 0:
        return BallProbability(-math.inf, tail, states)
    ft = cdf_of(target)
    d = delta * (1 - 1e-12)  # strict inequality d < delta
    inside = np.zeros(len(lams), dtype=bool)
    shifts = spec.shifts
    for k, lam in enumerate(lams):
        x = (lam + shifts) / spec.n
        fa = cdf_of(AtomicMeasure(x, np.full(spec.n, 1.0 / spec.n)))
        inside[k] = _envelope_ok(fa, ft, d, 1e-15) and _envelope_ok(ft, fa, d, 1e-15)
    if not inside.any():
        return BallProbability(-math.inf, tail, states)
    return BallProbability(float(logsumexp(lw[inside]) - log_z), tail, states)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov against a reference CDF
# ---------------------------------------------------------------------------


def pooled_positions(samples) -> np.ndarray:
    """Rescaled positions ell_i / N pooled over configurations (or an array of them)."""
    if isinstance(samples, np.ndarray):
        return samples.ravel()
    out = []
    for cfg in samples:
        out.append(empirical_measure(cfg).locations)
    return np.concatenate(out)


def ks_compare(samples, reference_cdf: Callable) -> float:
    """sup_x |F_emp(x) - F_ref(x)| over the pooled empirical measure."""
    x = np.sort(pooled_positions(samples))
    if x.size == 0:
        raise ValueError("need at least one sample")
    f = np.clip(np.asarray(reference_cdf(x), dtype=float), 0.0, 1.0)
    n = x.size
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(n) / n
    return float(min(1.0, max(upper.max(), lower.max(), 0.0)))
