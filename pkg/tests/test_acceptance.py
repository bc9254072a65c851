"""Acceptance criteria 1-10, one test each.

Every test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary (see conftest.py) and when this file is run directly.
"""

import math
import time
import warnings

import numpy as np
import pytest

from discrete_beta.configurations import discrete_energy, empirical_measure, quantile_config, validate
from discrete_beta.ensembles import (JackParams, WellposednessError, cauchy_ensemble, enumerate_states, jack_ensemble,
                                     jack_partition_closed, mcmc_run, partition_exact, wellposedness_check)
from discrete_beta.equilibrium import (BoundaryMassWarning, EquilibriumProblem, cauchy_density, jack_cdf, jack_density,
                                       jack_support, project_capped_simplex, solve)
from discrete_beta.kernels import log_q_theta, q_theta_sandwich
from discrete_beta.ldp import jack_equilibrium_energy, jack_scan, ks_compare
from discrete_beta.measures import (GridMeasure, energy, energy_sphere, levy_distance, mixed_energy, pushforward,
                                    sphere_cdf_discrepancy)
from discrete_beta.potentials import cauchy_potential, jack_limit_potential, zero_potential

from oracles import poisson_pmf

RESULTS = {}


def record(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def random_capped(rng, lo, hi, m, cap):
    x = lo + (hi - lo) * (np.arange(m) + 0.5) / m
    f = np.zeros(m)
    for _ in range(3):
        c, s = rng.uniform(lo, hi), rng.uniform(0.2, 1.0)
        f += rng.uniform(0.2, 1.0) * np.exp(-0.5 * ((x - c) / s) ** 2)
    h = (hi - lo) / m
    return GridMeasure(lo, h, project_capped_simplex(f / f.sum(), h * cap), cap)


def test_criterion_01_cauchy_equilibrium():
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryMassWarning)
        sol = solve(EquilibriumProblem(1.0, cauchy_potential(), (-8.0, 8.0), m=2000))
    elapsed = time.perf_counter() - t0
    x = sol.measure.midpoints
    core = np.abs(x) <= 5
    err = float(np.max(np.abs(sol.measure.density[core] - cauchy_density(x[core]))))
    res = max(sol.residual_support, sol.residual_offsupport)
    ok = err <= 2e-2 and res <= 5e-3 and elapsed <= 120
    record(1, ok, f"sup error on [-5,5] {err:.2e} (<= 2e-2), residual {res:.2e} (<= 5e-3), {elapsed:.1f} s")


def test_criterion_02_jack_equilibrium():
    details, ok = [], True
    for t in (1.0, 4.0, 0.25):
        th = 1.0
        a, b = jack_support(th, t)
        prob = EquilibriumProblem(th, jack_limit_potential(th, t), (0.0, b + 2.0), (0.0, math.inf), 2000)
        sol = solve(prob)
        mu = sol.measure
        x = mu.midpoints
        l1 = float(np.sum(np.abs(mu.density - jack_density(th, t, x))) * mu.h)
        charged = np.nonzero(mu.weights > 1e-9)[0]
        upper = float(mu.edges[charged[-1] + 1])
        ok_t = l1 <= 2e-2 and abs(upper - b) <= 0.05
        if t < 1:
            sat = mu.weights >= mu.h * mu.cap * (1 - 1e-8)
            # saturated cells from the origin up to theta (sqrt t - 1)^2
            run = int(np.argmin(sat)) if not sat.all() else sat.size
            plateau_end = float(mu.edges[run])
            ok_t &= bool(sat[0]) and abs(plateau_end - a) <= 0.05
            details.append(f"t={t:g}: L1 {l1:.1e}, plateau [0,{plateau_end:.3f}] vs {a:g}, top {upper:.3f} vs {b:g}")
        else:
            lower = float(mu.edges[charged[0]])
            ok_t &= abs(lower - a) <= 0.05
            details.append(f"t={t:g}: L1 {l1:.1e}, support [{lower:.3f},{upper:.3f}] vs [{a:g},{b:g}]")
        ok &= ok_t
    record(2, ok, "; ".join(details))


def test_criterion_03_jack_partition():
    t0 = time.perf_counter()
    worst = 0.0
    for n in (1, 2, 3):
        for th in (0.5, 1.0, 2.0):
            for t in (0.5, 1.0, 2.0):
                p = JackParams(th, t)
                c = jack_partition_closed(p, n)
                e = partition_exact(jack_ensemble(p, n)).value
                worst = max(worst, abs(e - c) / abs(c))
    elapsed = time.perf_counter() - t0
    record(3, worst <= 1e-6 and elapsed <= 300, f"27 cases, max rel error {worst:.1e} (<= 1e-6), {elapsed:.1f} s")


def test_criterion_04_free_energy():
    ref = jack_equilibrium_energy(1.0, 1.0)
    res = jack_scan(1.0, 1.0, [4, 32], reference=ref)
    g4, g32 = abs(res.gaps[4]), abs(res.gaps[32])
    record(4, g32 <= 0.1 and g32 < g4, f"gap N=32 {g32:.4f} (<= 0.1), N=4 {g4:.4f}")


def test_criterion_05_sandwich():
    rng = np.random.default_rng(20)
    bad = 0
    first = None
    for _ in range(10_000):
        th = 4.0 * (1.0 - rng.random())  # (0, 4]
        x = th * math.exp(rng.random() * math.log(1e6 / th)) if rng.random() < 0.5 else rng.uniform(th, 1e6)
        lo, hi = q_theta_sandwich(x, th)
        if not lo <= log_q_theta(x, th) <= hi:
            bad += 1
            first = first or (x, th)
    record(5, bad == 0, f"10000 samples, {bad} violations" + (f", first x={first[0]!r} theta={first[1]!r}" if first
                                                                else ""))


def test_criterion_06_compactification_identity():
    rng = np.random.default_rng(21)
    v = cauchy_potential()
    worst = 0.0
    for _ in range(100):
        mu = random_capped(rng, -2.0, 2.0, 2000, 1.0)
        worst = max(worst, abs(energy(mu, v) - energy_sphere(pushforward(mu), v, 0.0)))
    record(6, worst <= 1e-3, f"100 measures, max |E_V - E_sphere| {worst:.2e} (<= 1e-3)")


def test_criterion_07_inequality_and_convexity():
    rng = np.random.default_rng(22)
    v = cauchy_potential()
    ineq = conv = strict = 0
    for _ in range(1000):
        mu = pushforward(random_capped(rng, -3.0, 3.0, 120, 1.0))
        nu = pushforward(random_capped(rng, -3.0, 3.0, 120, 1.0))
        imn = mixed_energy(mu, nu)
        if imn < 0 or 2 * imn > mixed_energy(mu, mu) + mixed_energy(nu, nu) + 1e-9:
            ineq += 1
        e0, e1 = energy_sphere(mu, v, 0.0), energy_sphere(nu, v, 0.0)
        far = sphere_cdf_discrepancy(mu, nu) > 0.01
        for t in np.linspace(0.1, 0.9, 9):
            gap = t * e0 + (1 - t) * e1 - energy_sphere(mu.mix(nu, t), v, 0.0)
            if gap < -1e-9:
                conv += 1
            elif far and gap <= 0:
                strict += 1
    record(7, ineq == conv == strict == 0,
           f"1000 pairs: {ineq} inequality, {conv} convexity, {strict} strictness violations")


def test_criterion_08_quantile_construction():
    rng = np.random.default_rng(23)
    invalid = 0
    for _ in range(1000):
        th = float(rng.uniform(0.1, 3.0))
        m = int(rng.integers(20, 200))
        h = rng.uniform(th, 20 * th) / m
        f = rng.random(m) ** 3
        mu = GridMeasure(rng.uniform(-5, 5), h, project_capped_simplex(f / f.sum(), h / th), 1 / th)
        invalid += not validate(quantile_config(mu, int(rng.integers(2, 65)), th))
    target = GridMeasure.from_cdf(lambda x: jack_cdf(1.0, 1.0, x), 0.0, 4.0, 4000, cap=1.0)
    d512 = levy_distance(target, empirical_measure(quantile_config(target, 512, 1.0)))
    uni = GridMeasure.uniform(0.0, 1.0, 4000, cap=1.0)
    e_ref = energy(uni, zero_potential())
    g128, g1024 = (abs(discrete_energy(quantile_config(uni, n, 1.0), zero_potential()) - e_ref) for n in (128, 1024))
    ok = invalid == 0 and d512 <= 0.05 and g1024 < 0.5 * g128
    record(8, ok, f"{invalid}/1000 invalid, Levy at N=512 {d512:.4f} (<= 0.05), "
                  f"energy gap N=1024 {g1024:.4f} < half of N=128 {g128:.4f}")


def test_criterion_09_mcmc():
    spec2 = jack_ensemble(JackParams(1.0, 1.0), 2).with_bounds(0, 8)
    lams, lw = enumerate_states(spec2, 0, 8)
    p = np.exp(lw - lw.max())
    p /= p.sum()
    states, _ = mcmc_run(spec2, 1_000_000, burn_in=10_000, seed=31)
    index = {tuple(r): k for k, r in enumerate(lams.tolist())}
    emp = np.bincount([index[tuple(r)] for r in states.tolist()], minlength=len(p)) / len(states)
    tv2 = 0.5 * float(np.abs(emp - p).sum())

    states1, _ = mcmc_run(jack_ensemble(JackParams(1.0, 1.0), 1), 100_000, burn_in=1000, seed=32)
    counts = np.bincount(states1[:, 0], minlength=40) / len(states1)
    pmf = np.array([poisson_pmf(k, 1.0) for k in range(counts.size)])
    tv1 = 0.5 * float(np.abs(counts - pmf).sum() + (1 - pmf.sum()))

    spec200 = jack_ensemble(JackParams(1.0, 1.0), 200)
    big, _ = mcmc_run(spec200, 1_000_000, burn_in=100_000, seed=33, thin=10_000)
    ks = ks_compare((big + spec200.shifts) / 200, lambda x: jack_cdf(1.0, 1.0, x))
    ok = len(lams) <= 50 and tv2 <= 0.02 and tv1 <= 0.02 and ks <= 0.05
    record(9, ok, f"N=2 ({len(lams)} states) TV {tv2:.4f}, N=1 Poisson TV {tv1:.4f}, N=200 KS {ks:.4f}")


def test_criterion_10_ill_posedness():
    try:
        wellposedness_check(cauchy_ensemble(0.4, 3))
        refused = False
    except WellposednessError:
        refused = True
    try:
        wellposedness_check(cauchy_ensemble(0.6, 3))
        accepted = True
    except WellposednessError:
        accepted = False
    record(10, refused and accepted, f"theta=0.4 refused: {refused}, theta=0.6 accepted: {accepted}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
