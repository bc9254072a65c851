"""Jack and Cauchy ensembles, partition functions, well-posedness and a Metropolis sampler."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from . import _kernels
from .configurations import ParticleConfig, log_weight, quantile_config, to_line, validate
from .kernels import INF
from .measures import GridMeasure
from .potentials import KIND_JACK_N, GrowthCert, Potential, cauchy_potential, jack_potential

MAX_STATES = 10**7
BIG = 2**62  # integer stand-in for an infinite lattice bound inside kernels


class WellposednessError(ValueError):
    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class JackParams:
    theta: float
    t: float

    def __post_init__(self):
        if not (self.theta > 0 and self.t > 0):
            raise ValueError(f"Jack parameters must be positive, got theta={self.theta}, t={self.t}")


@dataclass(frozen=True, eq=False)
class EnsembleSpec:
    """theta, N, lattice bounds (a_N, b_N) for lambda, and the potential V_N."""

    theta: float
    n: int
    potential: Potential
    lower: float = -INF
    upper: float = INF
    model: str = "custom"
    t: Optional[float] = None

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("N must be a positive integer")
        if self.lower > self.upper:
            raise ValueError("need lower <= upper")
        unbounded = math.isinf(self.lower) or math.isinf(self.upper)
        if unbounded and getattr(self.potential, "growth_cert", None) is None:
            raise ValueError("an unbounded lattice needs a potential with a growth certificate")

    @property
    def shifts(self) -> np.ndarray:
        return (self.n - 1 - np.arange(self.n)) * self.theta

    def config(self, lam) -> ParticleConfig:
        return ParticleConfig(self.theta, tuple(lam), self.lower, self.upper)

    def with_bounds(self, lower, upper) -> "EnsembleSpec":
        return EnsembleSpec(self.theta, self.n, self.potential, lower, upper, self.model, self.t)


def jack_ensemble(params: JackParams, n: int, upper=INF) -> EnsembleSpec:
    return EnsembleSpec(params.theta, n, jack_potential(params.theta, params.t, n), 0, upper, "jack", params.t)


def cauchy_ensemble(theta: float, n: int, lower=-INF, upper=INF) -> EnsembleSpec:
    return EnsembleSpec(theta, n, cauchy_potential(theta), lower, upper, "cauchy")


def jack_partition_closed(params: JackParams, n: int) -> float:
    """log Z_N for the Jack model.

    The power of t theta N is theta N(N-1)/2: the lattice shifts add
    theta N(N-1)/2 to sum(ell_i) on top of |lambda|.
    """
    th, t = params.theta, params.t
    i = np.arange(1, n + 1)
    return (-n * math.lgamma(th) + t * th * n * n + 0.5 * th * n * (n - 1) * math.log(t * th * n)
            + math.fsum(gammaln(i * th)))


# ---------------------------------------------------------------------------
# Well-posedness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    theta_prime: float
    floor: float
    declared: bool
    x_min: float


def _growth_samples():
    pos = np.logspace(-3, 12, 400)
    return np.concatenate([-pos[::-1], [0.0], pos])


def wellposedness_check(spec: EnsembleSpec) -> Certificate:
    """Check theta N V_N(x) - (theta' + (N-1) theta) log(1+x^2) >= floor on log-spaced x.

    With no declared floor the sampled minimum is returned, provided the
    expression is not still falling at the far ends. Raises
    ``WellposednessError`` naming an offending x.
    """
    if not (math.isinf(spec.lower) or math.isinf(spec.upper)):
        return Certificate(INF, 0.0, False, 0.0)  # finite state space
    cert = spec.potential.growth_cert
    if cert is None:
        raise WellposednessError("potential has no growth certificate")
    th, n = spec.theta, spec.n
    x = _growth_samples()
    lo, hi = spec.lower / n, spec.upper / n
    x = x[(x >= lo - 1) & (x <= hi + 1)]
    vals = th * n * np.asarray(spec.potential(x), dtype=float)
    coef = cert.theta_prime + (n - 1) * th
    logs = np.log1p(x * x)
    if not cert.theta_prime > 0.5:
        # test the weakest admissible exponent so a failure names a concrete x
        g = vals - (0.5 + (n - 1) * th) * logs
        bad = _falling_tail(x, g)
        where = bad if bad is not None else float(x[np.argmax(np.abs(x))])
        raise WellposednessError(
            f"growth exponent theta'={cert.theta_prime:g} must exceed 1/2; the weight is not summable "
            f"(theta N V_N - (1/2 + (N-1) theta) log(1+x^2) keeps falling at x={where:g})", where)
    g = vals - coef * logs
    tol = 1e-9 * (1.0 + np.abs(vals) + coef * logs)
    if cert.floor_const is not None:
        viol = np.nonzero(g < cert.floor_const - tol)[0]
        if viol.size:
            xv = float(x[viol[0]])
            raise WellposednessError(f"growth bound violated at x={xv:g}", xv)
        return Certificate(cert.theta_prime, cert.floor_const, True, float(x[np.argmin(g)]))
    bad = _falling_tail(x, g)
    if bad is not None:
        raise WellposednessError(f"growth bound has no floor: still decreasing at x={bad:g}", bad)
    k = int(np.argmin(g))
    return Certificate(cert.theta_prime, float(g[k]), False, float(x[k]))


def _falling_tail(x, g):
    # the minimum sits at an extreme sample and the values are still going down there
    order = np.argsort(np.abs(x))
    for side in (x > 0, x < 0):
        idx = np.nonzero(side)[0]
        if idx.size < 3:
            continue
        far = idx[np.argsort(np.abs(x[idx]))]
        if g[far[-1]] < g[far[-2]] - 1e-12 * (1 + abs(g[far[-2]])) and g[far[-1]] <= g.min() + 1e-12:
            return float(x[far[-1]])
    return None


# ---------------------------------------------------------------------------
# Exact partition function by enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionResult:
    """log Z over the window and a bound on log Z_full - value."""

    value: float
    tail_bound: float
    window: tuple
    states: int

    def __iter__(self):
        return iter((self.value, self.tail_bound))


def _decreasing_tuples(lo, hi, n):
    return itertools.combinations_with_replacement(range(hi, lo - 1, -1), n)


def count_states(lo: int, hi: int, n: int) -> int:
    return math.comb(hi - lo + n, n)


def _window_log_sum(spec, lo, hi, accel=None, chunk=200_000):
    it = _decreasing_tuples(lo, hi, spec.n)
    parts = []
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        lams = np.array(block, dtype=float)
        parts.append(logsumexp(_kernels.batch_log_weight(lams, spec.theta, spec.potential, accel)))
    return float(logsumexp(parts))


def _log_g(spec, ell):
    n, th = spec.n, spec.theta
    return (n - 1) * th * np.log1p(ell * ell) - th * n * np.asarray(spec.potential(ell / n), dtype=float)


def _sum_pair_const(spec):
    # sum_{i<j} (1+theta)^3 / ((j-i) theta): the sandwich slack summed over pairs
    n, th = spec.n, spec.theta
    k = np.arange(1, n)
    return (1 + th) ** 3 * float(np.sum((n - k) / (k * th)))


def _ray_log_tail(spec, shift, start, direction, explicit=10**6):
    """log of sum_{lambda} g(lambda + shift) over lambda = start, start+direction, ... within bounds."""
    bound = spec.upper if direction > 0 else spec.lower
    if direction * (bound - start) < 0:
        return -INF
    stop = start + direction * explicit
    if not math.isinf(bound):
        stop = bound if direction * (bound - stop) < 0 else stop
    lam = np.arange(start, stop + direction, direction, dtype=float)
    lg = _log_g(spec, lam + shift)
    head = float(logsumexp(lg)) if lam.size else -INF
    if not math.isinf(bound) and stop == bound:
        return head
    rem = _log_remainder(spec, lam[-1] + shift, direction, lg[-1])
    return float(np.logaddexp(head, rem))


def _log_remainder(spec, ell_last, direction, lg_last):
    """Rigorous bound on the sum of g beyond the last explicit lattice point."""
    n, th = spec.n, spec.theta
    pot = spec.potential
    if pot.kind == KIND_JACK_N and direction > 0 and ell_last >= 1:
        # g(l+1)/g(l) = ((1+(l+1)^2)/(1+l^2))^{(N-1)th} * t th N/(l+1), nonincreasing for l >= 1
        t = pot.params[1]
        r = ((1 + (ell_last + 1) ** 2) / (1 + ell_last**2)) ** ((n - 1) * th) * t * th * n / (ell_last + 1)
        if r < 1:
            return lg_last + math.log(r) - math.log1p(-r)
    cert = pot.growth_cert
    if cert is None or not cert.theta_prime > 0.5:
        return INF
    floor = cert.floor_const
    if floor is None:
        floor = wellposedness_check(spec).floor
    # g(l) <= N^{2(N-1)th} e^{-floor} (1 + (l/N)^2)^{-th'}; compare the sum with an integral
    u0 = abs(ell_last)
    tp = cert.theta_prime
    if u0 <= 0:
        return INF
    log_int = 2 * tp * math.log(n) + (1 - 2 * tp) * math.log(u0) - math.log(2 * tp - 1)
    return 2 * (n - 1) * th * math.log(n) - floor + log_int


def _tail_bound(spec, lo, hi, log_z_window):
    """Bound on log Z_full - log Z_window from the pair sandwich and a product of one-particle sums."""
    logs_all, logs_out = [], []
    for shift in spec.shifts:
        right_out = _ray_log_tail(spec, shift, hi + 1, +1)
        left_out = _ray_log_tail(spec, shift, lo - 1, -1)
        inside = float(logsumexp(_log_g(spec, np.arange(lo, hi + 1, dtype=float) + shift)))
        out = float(np.logaddexp(right_out, left_out))
        logs_out.append(out)
        logs_all.append(float(np.logaddexp(inside, out)))
    if all(v == -INF for v in logs_out):
        return 0.0
    c = _sum_pair_const(spec)
    total_all = sum(logs_all)
    terms = [c + lo_i + total_all - la_i for lo_i, la_i in zip(logs_out, logs_all)]
    log_tail = float(logsumexp(terms))
    ratio = log_tail - log_z_window
    if ratio > 700:
        return INF
    return math.log1p(math.exp(ratio))


def partition_exact(spec: EnsembleSpec, window: Optional[tuple] = None, tol: float = 1e-10,
                    max_states: int = MAX_STATES, accel=None) -> PartitionResult:
    """log Z by enumerating every weakly decreasing lambda in the window.

    Without a window one is grown from the lattice bounds until the tail
    bound drops below ``tol``.
    """
    if spec.n > 6:
        raise ValueError("exact enumeration is limited to N <= 6")
    if window is not None:
        lo, hi = _clip_window(spec, window)
        return _partition_in(spec, lo, hi, max_states, accel)
    lo, hi = _initial_window(spec)
    while True:
        res = _partition_in(spec, lo, hi, max_states, accel)
        if res.tail_bound <= tol:
            return res
        width = max(hi - lo, 4)
        new_lo = lo if not math.isinf(spec.lower) and lo == spec.lower else lo - width // 2
        new_hi = hi if not math.isinf(spec.upper) and hi == spec.upper else hi + width // 2
        new_lo, new_hi = _clip_window(spec, (new_lo, new_hi))
        if count_states(new_lo, new_hi, spec.n) > max_states:
            raise WindowError(f"tail bound {res.tail_bound:.3g} above tol {tol:g} with the largest window "
                              f"under {max_states} states ({lo}, {hi})")
        lo, hi = new_lo, new_hi


def _clip_window(spec, window):
    lo, hi = int(math.floor(window[0])), int(math.ceil(window[1]))
    lo = max(lo, spec.lower) if not math.isinf(spec.lower) else lo
    hi = min(hi, spec.upper) if not math.isinf(spec.upper) else hi
    if lo > hi:
        raise WindowError("window does not meet the lattice bounds")
    return int(lo), int(hi)


def _initial_window(spec):
    lo = spec.lower if not math.isinf(spec.lower) else -8 * spec.n
    hi = spec.upper if not math.isinf(spec.upper) else max(lo, 0) + 8 * spec.n
    if spec.model == "jack" and math.isinf(spec.upper):
        hi = int(math.ceil(spec.n * spec.theta * (math.sqrt(spec.t) + 1) ** 2)) + 10
    return _clip_window(spec, (lo, hi))


def _partition_in(spec, lo, hi, max_states, accel):
    states = count_states(lo, hi, spec.n)
    if states > max_states:
        raise WindowError(f"window ({lo}, {hi}) has {states} states > {max_states}")
    value = _window_log_sum(spec, lo, hi, accel)
    return PartitionResult(value, _tail_bound(spec, lo, hi, value), (lo, hi), states)


def enumerate_states(spec: EnsembleSpec, lo: int, hi: int, accel=None):
    """All lambda in the window (descending lexicographic) with their log-weights."""
    lams = np.array(list(_decreasing_tuples(lo, hi, spec.n)), dtype=np.int64)
    return lams, _kernels.batch_log_weight(lams.astype(float), spec.theta, spec.potential, accel)


# ---------------------------------------------------------------------------
# Metropolis sampler
# ---------------------------------------------------------------------------


def move_log_ratio(spec: EnsembleSpec, lam, i: int, sign: int) -> float:
    """log pi(y) - log pi(x) for the move lambda_i -> lambda_i + sign; ``-INF`` if y is not a state."""
    lam = np.asarray(lam, dtype=np.int64)
    new = lam[i] + sign
    n = lam.size
    if new < spec.lower or new > spec.upper:
        return -INF
    if (i > 0 and new > lam[i - 1]) or (i < n - 1 and new < lam[i + 1]):
        return -INF
    return float(_kernels.local_delta_np(lam.astype(float), i, float(new), spec.theta, spec.potential))


def log_acceptance(delta: float) -> float:
    """Metropolis acceptance min(1, pi(y)/pi(x)) in log form."""
    return min(0.0, delta)


def initial_state(spec: EnsembleSpec) -> np.ndarray:
    """Quantile configuration of the closed-form equilibrium when there is one, else the packed state."""
    from .equilibrium import cauchy_cdf, jack_cdf, jack_support

    n, th = spec.n, spec.theta
    mu = None
    if spec.model == "jack" and spec.t is not None:
        _, b = jack_support(th, spec.t)
        mu = GridMeasure.from_cdf(lambda x: jack_cdf(th, spec.t, x), 0.0, b, 4000, cap=1.0 / th)
    elif spec.model == "cauchy" and 0.5 < th <= math.pi:
        half = 2.0 * n + 10.0
        mu = GridMeasure.from_cdf(lambda x: 0.5 + np.arctan(x) / np.pi, -half, half, int(40 * half), cap=1.0 / th)
    if mu is not None:
        try:
            cfg = quantile_config(mu, n, th)
            cand = spec.config(cfg.lam)
            if validate(cand):
                return np.array(cand.lam, dtype=np.int64)
        except (ValueError, AssertionError):
            pass
    base = 0 if spec.lower <= 0 <= spec.upper else (spec.lower if not math.isinf(spec.lower) else spec.upper)
    return np.full(n, int(base), dtype=np.int64)


def mcmc_run(spec: EnsembleSpec, steps: int, burn_in: int = 0, seed: int = 0, thin: int = 1,
             start=None, accel=None, chunk: int = 1 << 16):
    """Run the chain and return (states, acceptance rate).

    ``states`` holds lambda after every ``thin``-th proposal following the
    burn-in. All randomness is drawn up front per chunk from a PCG64
    stream, so the numba and numpy paths see identical numbers.
    """
    if thin < 1 or steps < 0 or burn_in < 0:
        raise ValueError("need thin >= 1, steps >= 0 and burn_in >= 0")
    if math.isinf(spec.lower) or math.isinf(spec.upper):
        wellposedness_check(spec)
    n = spec.n
    lam = initial_state(spec) if start is None else np.array(start, dtype=np.int64)
    if not validate(spec.config(lam)):
        raise ValueError("start state is not a valid configuration")
    lower = -BIG if math.isinf(spec.lower) else int(spec.lower)
    upper = BIG if math.isinf(spec.upper) else int(spec.upper)
    rng = np.random.default_rng(seed)
    keep = steps // thin
    out = np.empty((keep, n), dtype=np.int64)
    scratch = np.empty((0, n), dtype=np.int64)
    accepted = 0
    total = 0

    def run(count, keep_every, first_keep, dest):
        idx = rng.integers(0, n, size=count)
        signs = rng.integers(0, 2, size=count) * 2 - 1
        logu = np.log(rng.random(count))
        return _kernels.mcmc_chunk(lam, spec.theta, lower, upper, idx, signs, logu, keep_every, first_keep,
                                   spec.potential, dest, accel)

    left = burn_in
    while left > 0:
        c = min(chunk, left)
        a, _ = run(c, 1, -1, scratch)
        accepted += a
        total += c
        left -= c
    per = max(1, chunk // thin) * thin
    done = stored = 0
    while done < keep * thin:
        c = min(per, keep * thin - done)
        a, s = run(c, thin, thin - 1, out[stored:])
        accepted += a
        total += c
        stored += s
        done += c
    rest = steps - keep * thin
    if rest:
        a, _ = run(rest, 1, -1, scratch)
        accepted += a
        total += rest
    return out, (accepted / total if total else 0.0)


def mcmc_sample(spec: EnsembleSpec, steps: int, burn_in: int = 0, seed: int = 0, thin: int = 1,
                start=None, accel=None) -> Iterator[ParticleConfig]:
    """Stream of retained configurations from ``mcmc_run``."""
    states, _ = mcmc_run(spec, steps, burn_in, seed, thin, start, accel)
    for row in states:
        yield spec.config(row.tolist())


def sample_header(spec: EnsembleSpec, seed: int, thin: int) -> str:
    t = "none" if spec.t is None else repr(float(spec.t))
    return f"# theta={float(spec.theta)!r} N={spec.n} t={t} seed={seed} thin={thin}"


def write_samples(fh, spec: EnsembleSpec, states, seed: int, thin: int) -> None:
    fh.write(sample_header(spec, seed, thin) + "\n")
    for row in states:
        fh.write(to_line(spec.config(row.tolist())) + "\n")


def read_samples(fh):
    from .configurations import from_line

    header = None
    configs = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            header = dict(kv.split("=", 1) for kv in line[1:].split())
            continue
        configs.append(from_line(line))
    return header, configs
