"""Property suites runnable from the command line.

Each check returns ``(ok, detail)``; ``detail`` carries the first
counterexample when a check fails.
"""

from __future__ import annotations

import math
from typing import Callable, Dict, List, Tuple

import numpy as np

from . import kernels
from .ensembles import (JackParams, cauchy_ensemble, jack_ensemble, jack_partition_closed, log_acceptance,
                        move_log_ratio, partition_exact, WellposednessError, wellposedness_check)
from .configurations import log_weight
from .equilibrium import EquilibriumProblem, cauchy_density, jack_density, solve
from .measures import GridMeasure, energy, energy_sphere, mixed_energy, pushforward
from .potentials import cauchy_potential, jack_limit_potential

Check = Callable[[], Tuple[bool, str]]


def check_sandwich(n: int = 10_000, seed: int = 0, log_q=None) -> Tuple[bool, str]:
    """log Q_theta(x) within 2 theta log x +- (1+theta)^3/x for x in [theta, 1e6]."""
    log_q = log_q or kernels.log_q_theta
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 4.0, n)
    theta = np.where(theta == 0.0, 4.0, theta)
    # half uniform, half log-uniform so small x is well covered
    u = rng.random(n)
    x = np.where(np.arange(n) % 2 == 0, theta + u * (1e6 - theta), theta * np.exp(u * np.log(1e6 / theta)))
    for xi, ti in zip(x, theta):
        v = log_q(float(xi), float(ti))
        lo, hi = kernels.q_theta_sandwich(float(xi), float(ti))
        if not (lo <= v <= hi):
            return False, f"x={xi!r} theta={ti!r} logQ={v!r} bounds=({lo!r}, {hi!r})"
    return True, f"{n} samples"


def _random_capped(rng, lo, hi, m, cap):
    # smooth positive bumps, clipped to the cap by projection
    from .equilibrium import project_capped_simplex

    x = lo + (hi - lo) * (np.arange(m) + 0.5) / m
    f = np.zeros(m)
    for _ in range(3):
        c, s = rng.uniform(lo, hi), rng.uniform(0.2, 1.0)
        f += rng.uniform(0.2, 1.0) * np.exp(-0.5 * ((x - c) / s) ** 2)
    w = f / f.sum()
    h = (hi - lo) / m
    return GridMeasure(lo, h, project_capped_simplex(w, h * cap), cap)


def check_identity(count: int = 100, m: int = 2000, seed: int = 1) -> Tuple[bool, str]:
    """E_V(mu) = E_Vcal(T_* mu) for capped measures on [-2, 2], Cauchy V."""
    rng = np.random.default_rng(seed)
    v = cauchy_potential(1.0)
    worst = 0.0
    for _ in range(count):
        mu = _random_capped(rng, -2.0, 2.0, m, 1.0)
        d = abs(energy(mu, v) - energy_sphere(pushforward(mu), v, v.tail_value))
        worst = max(worst, d)
        if d > 1e-3:
            return False, f"gap {d!r}"
    return True, f"max gap {worst:.3g}"


def check_energy_inequality(count: int = 1000, m: int = 200, seed: int = 2) -> Tuple[bool, str]:
    """2 I(mu, nu) <= I(mu, mu) + I(nu, nu) and convexity along mixtures."""
    rng = np.random.default_rng(seed)
    v = cauchy_potential(1.0)
    for k in range(count):
        mu = pushforward(_random_capped(rng, -3.0, 3.0, m, 1.0))
        nu = pushforward(_random_capped(rng, -3.0, 3.0, m, 1.0))
        imn, imm, inn = mixed_energy(mu, nu), mixed_energy(mu, mu), mixed_energy(nu, nu)
        if 2 * imn > imm + inn + 1e-9 or imn < 0:
            return False, f"pair {k}: 2I={2 * imn!r} > {imm + inn!r}"
        if k % 10 == 0:
            e0 = energy_sphere(mu, v, v.tail_value)
            e1 = energy_sphere(nu, v, v.tail_value)
            for t in np.linspace(0.1, 0.9, 9):
                et = energy_sphere(mu.mix(nu, t), v, v.tail_value)
                if et > t * e0 + (1 - t) * e1 + 1e-9:
                    return False, f"pair {k}, t={t:.1f}: convexity fails"
    return True, f"{count} pairs"


def check_detailed_balance(seed: int = 3, moves: int = 500) -> Tuple[bool, str]:
    rng = np.random.default_rng(seed)
    spec = jack_ensemble(JackParams(1.5, 0.7), 4)
    for _ in range(moves):
        lam = np.sort(rng.integers(0, 12, 4))[::-1]
        i = int(rng.integers(0, 4))
        sgn = int(rng.choice([-1, 1]))
        d = move_log_ratio(spec, lam, i, sgn)
        if not math.isfinite(d):
            continue
        back = lam.copy()
        back[i] += sgn
        d_back = move_log_ratio(spec, back, i, -sgn)
        lp_x = log_weight(spec.config(lam), spec.potential)
        lp_y = log_weight(spec.config(back), spec.potential)
        lhs = lp_x + log_acceptance(d)
        rhs = lp_y + log_acceptance(d_back)
        if abs(lhs - rhs) > 1e-9 * (1 + abs(lhs)):
            return False, f"lambda={lam.tolist()} i={i} sign={sgn}: {lhs!r} != {rhs!r}"
    return True, f"{moves} moves"


def check_cauchy_solver() -> Tuple[bool, str]:
    prob = EquilibriumProblem(1.0, cauchy_potential(1.0), (-8.0, 8.0), m=2000)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = solve(prob)
    x = sol.measure.midpoints
    core = np.abs(x) <= 5
    err = float(np.max(np.abs(sol.measure.density[core] - cauchy_density(x[core]))))
    res = max(sol.residual_support, sol.residual_offsupport)
    return err <= 2e-2 and res <= 5e-3, f"sup error {err:.3g}, residual {res:.3g}"


def check_jack_solver() -> Tuple[bool, str]:
    prob = EquilibriumProblem(1.0, jack_limit_potential(1.0, 1.0), (0.0, 6.0), (0.0, math.inf), 2000)
    sol = solve(prob)
    l1 = float(np.sum(np.abs(sol.measure.density - jack_density(1.0, 1.0, sol.measure.midpoints))) * prob.h)
    return l1 <= 2e-2, f"L1 error {l1:.3g}"


def check_partition() -> Tuple[bool, str]:
    worst = 0.0
    for n in (1, 2, 3):
        for th in (0.5, 1.0, 2.0):
            for t in (0.5, 1.0, 2.0):
                p = JackParams(th, t)
                c = jack_partition_closed(p, n)
                e = partition_exact(jack_ensemble(p, n)).value
                rel = abs(e - c) / max(abs(c), 1e-300)
                worst = max(worst, rel)
                if rel > 1e-6:
                    return False, f"N={n} theta={th} t={t}: exact {e!r} closed {c!r}"
    return True, f"max rel error {worst:.3g}"


def check_free_energy() -> Tuple[bool, str]:
    from .ldp import jack_scan

    res = jack_scan(1.0, 1.0, [4, 32])
    g4, g32 = abs(res.gaps[4]), abs(res.gaps[32])
    return g32 <= 0.1 and g32 < g4, f"gap N=4 {g4:.3g}, N=32 {g32:.3g}"


def check_wellposedness() -> Tuple[bool, str]:
    try:
        wellposedness_check(cauchy_ensemble(0.4, 2))
        return False, "theta=0.4 accepted"
    except WellposednessError:
        pass
    wellposedness_check(cauchy_ensemble(0.6, 2))
    return True, "0.4 refused, 0.6 accepted"


SUITES: Dict[str, List[Tuple[str, Check]]] = {
    "kernels": [("sandwich", check_sandwich), ("detailed-balance", check_detailed_balance),
                ("wellposedness", check_wellposedness)],
    "energy": [("compactification-identity", check_identity), ("energy-inequality", check_energy_inequality)],
    "equilibrium": [("cauchy-solver", check_cauchy_solver), ("jack-solver", check_jack_solver)],
    "ldp": [("jack-partition", check_partition), ("free-energy", check_free_energy)],
}


def run(suite: str, out=print) -> bool:
    names = list(SUITES) if suite == "all" else [suite]
    if any(n not in SUITES for n in names):
        raise KeyError(suite)
    all_ok = True
    first_fail = None
    for name in names:
        for label, fn in SUITES[name]:
            try:
                ok, detail = fn()
            except Exception as exc:  # report, do not crash the table
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            out(f"{'PASS' if ok else 'FAIL'}  {name:<12} {label:<28} {detail}")
            if not ok and first_fail is None:
                first_fail = f"{name}/{label}: {detail}"
            all_ok &= ok
    if first_fail:
        out(f"first counterexample: {first_fail}")
    return all_ok
