import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from discrete_beta.equilibrium import (BoundaryMassWarning, EquilibriumProblem, cauchy_cdf, cauchy_density,
                                       effective_potential, jack_cdf, jack_density, jack_support, project_capped_simplex,
                                       rate_function, reference_equilibrium, solve, variational_residual)
from discrete_beta.measures import AtomicMeasure, GridMeasure, MeasureError, energy, levy_distance
from discrete_beta.potentials import cauchy_potential, jack_limit_potential, zero_potential

from oracles import cauchy_ep_constant, jack_density_quad, uniform_ep


def quiet_solve(*args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryMassWarning)
        return solve(*args, **kw)


@pytest.fixture(scope="module")
def cauchy_sol():
    return quiet_solve(EquilibriumProblem(1.0, cauchy_potential(), (-8.0, 8.0), m=2000))


@pytest.fixture(scope="module")
def jack_sol():
    return solve(EquilibriumProblem(1.0, jack_limit_potential(1.0, 1.0), (0.0, 6.0), domain=(0.0, math.inf), m=1200))


class TestProjection:
    def test_feasible(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            y = rng.normal(size=40)
            w = project_capped_simplex(y, 0.05)
            assert abs(math.fsum(w) - 1) < 1e-12 and w.min() >= 0 and w.max() <= 0.05

    def test_is_euclidean_projection(self):
        # the projection beats random feasible points in distance to y
        rng = np.random.default_rng(1)
        y = rng.normal(size=10)
        w = project_capped_simplex(y, 0.3)
        for _ in range(200):
            z = project_capped_simplex(rng.normal(size=10), 0.3)
            assert np.sum((w - y) ** 2) <= np.sum((z - y) ** 2) + 1e-12

    def test_empty(self):
        with pytest.raises(ValueError):
            project_capped_simplex(np.zeros(3), 0.1)


class TestProblem:
    def test_window_shorter_than_theta(self):
        with pytest.raises(ValueError):
            EquilibriumProblem(2.0, zero_potential(), (0.0, 1.0))

    def test_window_outside_domain(self):
        with pytest.raises(ValueError):
            EquilibriumProblem(1.0, zero_potential(), (-1.0, 3.0), domain=(0.0, math.inf))


class TestSolve:
    def test_unique_feasible_point(self):
        p = EquilibriumProblem(0.5, cauchy_potential(), (2.0, 2.5), domain=(2.0, 2.5), m=50)
        sol = solve(p)
        assert np.allclose(sol.measure.density, 2.0, rtol=1e-12)
        assert sol.boundary_ok

    def test_cauchy_density(self, cauchy_sol):
        x = cauchy_sol.measure.midpoints
        inner = np.abs(x) <= 5
        err = np.abs(cauchy_sol.measure.density - cauchy_density(x))
        assert np.max(err[inner]) <= 5e-3
        # the artificial edges collect the mass the window cuts off
        assert np.max(err) > 0.1
        assert cauchy_sol.converged
        assert max(cauchy_sol.residual_support, cauchy_sol.residual_offsupport) <= 1e-3

    def test_cauchy_boundary_flagged(self):
        p = EquilibriumProblem(1.0, cauchy_potential(), (-8.0, 8.0), m=400)
        with pytest.warns(BoundaryMassWarning):
            sol = solve(p)
        assert not sol.boundary_ok
        with pytest.raises(MeasureError):
            solve(p, boundary="strict")

    def test_extend_window(self):
        p = EquilibriumProblem(1.0, jack_limit_potential(1.0, 1.0), (0.0, 3.0), domain=(0.0, math.inf), m=300)
        sol = solve(p, boundary="extend")
        assert sol.boundary_ok and sol.problem.window[1] > 3.0
        assert sol.problem.h == pytest.approx(p.h)

    def test_jack_support(self, jack_sol):
        lo, hi = jack_sol.measure.support(tol=1e-9)
        assert lo <= 0.02 and hi == pytest.approx(4.0, abs=0.03)

    def test_jack_compact_support(self, jack_sol):
        mu = jack_sol.measure
        assert math.fsum(mu.weights[mu.midpoints > 4.5]) <= 1e-4

    def test_feasibility_and_monotone_history(self, cauchy_sol):
        w = cauchy_sol.measure.weights
        assert w.min() >= 0 and w.max() <= cauchy_sol.measure.h * (1 + 1e-12)
        assert abs(math.fsum(w) - 1) <= 1e-10
        hist = np.array(cauchy_sol.history)
        assert np.all(np.diff(hist) <= 1e-12 * np.abs(hist[1:]))

    def test_projected_gradient_agrees(self):
        p = EquilibriumProblem(1.0, jack_limit_potential(1.0, 2.0), (0.0, 7.0), domain=(0.0, math.inf), m=300)
        a = solve(p)
        b = solve(p, method="projected-gradient")
        assert b.converged
        assert levy_distance(a.measure, b.measure) <= 2e-3

    def test_uniqueness_probe(self):
        p = EquilibriumProblem(1.0, cauchy_potential(), (-6.0, 6.0), domain=(-6.0, 6.0), m=600)
        a = solve(p)
        w0 = np.zeros(p.m)
        w0[-100:] = 1.0  # all mass at the right end
        b = solve(p, w0=w0)
        assert levy_distance(a.measure, b.measure) <= 2e-3

    def test_deterministic(self):
        p = EquilibriumProblem(1.5, cauchy_potential(), (-5.0, 5.0), domain=(-5.0, 5.0), m=300)
        a, b = solve(p), solve(p)
        assert np.array_equal(a.measure.weights, b.measure.weights) and a.iterations == b.iterations

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            solve(EquilibriumProblem(1.0, cauchy_potential(), (-2.0, 2.0), m=20), method="newton")

    def test_summary_key_order(self, cauchy_sol):
        text = cauchy_sol.summary()
        keys = [line.split(":")[0].strip().strip('"') for line in text.splitlines()[1:5]]
        assert keys == ["F_V_theta", "c", "residuals", "iterations"]


class TestEffectivePotential:
    def test_cauchy_constant(self):
        mu = GridMeasure.from_cdf(cauchy_cdf, -400, 400, 16000, cap=1.0)
        ys = np.array([-3.0, -0.7, 0.0, 1.1, 2.5])
        ep = effective_potential(mu, cauchy_potential(), ys)
        ref = cauchy_ep_constant()
        assert ref == pytest.approx(math.log(2), abs=1e-10)
        assert np.max(np.abs(ep - ref)) <= 5e-3

    def test_uniform_far_point(self):
        mu = GridMeasure.uniform(0, 1, 500)
        got = effective_potential(mu, zero_potential(), 10.0)
        assert got == pytest.approx(uniform_ep(10.0), abs=1e-6)

    def test_uniform_inside_cell(self):
        # y inside a charged cell: the log singularity is exact, the log(1+x^2) part is midpoint
        mu = GridMeasure.uniform(0, 1, 500)
        assert effective_potential(mu, zero_potential(), 0.3001) == pytest.approx(uniform_ep(0.3001), abs=1e-6)

    def test_linearity(self):
        a = GridMeasure.uniform(-1, 1, 40)
        b = GridMeasure.from_density(lambda x: np.exp(-x * x), -1, 1, 40)
        t = 0.3
        mix = GridMeasure(-1, a.h, t * a.weights + (1 - t) * b.weights)
        ys = np.linspace(-3, 3, 7)
        v = cauchy_potential()
        lhs = effective_potential(mix, v, ys)
        rhs = t * effective_potential(a, v, ys) + (1 - t) * effective_potential(b, v, ys)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-13, atol=1e-14)


class TestResidual:
    def test_solution_within_tol(self, cauchy_sol):
        rs, ro, c = variational_residual(cauchy_sol, cauchy_sol.problem)
        assert max(rs, ro) <= 1e-3
        assert c == pytest.approx(cauchy_sol.c)

    def test_wrong_measure(self):
        p = EquilibriumProblem(1.0, cauchy_potential(), (-8.0, 8.0), m=800)
        mu = GridMeasure(-8.0, p.h, np.where(np.abs(p.grid()) < 1, p.h / 2, 0.0), 1.0)
        _, ro, _ = variational_residual(mu, p)
        assert ro > 0.05

    def test_sampled_cauchy(self):
        # truncation shifts the potential near the window edges, so only a central region is certified
        p = EquilibriumProblem(1.0, cauchy_potential(), (-100.0, 100.0), m=2000)
        mu = GridMeasure.from_cdf(cauchy_cdf, -100, 100, 2000, cap=1.0)
        rs, ro, _ = variational_residual(mu, p, region=(-5.0, 5.0))
        assert max(rs, ro) <= 5e-3


class TestRate:
    def test_zero_at_minimiser(self, cauchy_sol):
        assert rate_function(cauchy_sol.measure, cauchy_sol.problem, energy(cauchy_sol.measure, cauchy_potential())) == 0.0

    def test_atomic_infinite(self, cauchy_sol):
        assert rate_function(AtomicMeasure([0.0, 1.0], [0.5, 0.5]), cauchy_sol.problem, cauchy_sol.f_value) == math.inf

    def test_over_cap_infinite(self, cauchy_sol):
        mu = GridMeasure.uniform(-0.25, 0.25, 10)
        assert rate_function(mu, cauchy_sol.problem, cauchy_sol.f_value) == math.inf

    def test_outside_domain_infinite(self, jack_sol):
        mu = GridMeasure.uniform(-2, 2, 40, cap=1.0)
        assert rate_function(mu, jack_sol.problem, jack_sol.f_value) == math.inf

    def test_uniform_under_cauchy(self, cauchy_sol):
        mu = GridMeasure.uniform(-1, 1, 2000, cap=1.0)
        val = rate_function(mu, cauchy_sol.problem, cauchy_sol.f_value)
        # E(uniform[-1,1]) = pi/2 - 1/2 and E(Cauchy) = log 2 in closed form
        assert val > 0
        assert val == pytest.approx(math.pi / 2 - 0.5 - math.log(2), abs=0.02)


class TestReferenceDensities:
    def test_jack_examples(self):
        assert jack_density(1.0, 1.0, 2.0) == pytest.approx(0.25, abs=1e-15)
        assert jack_density(1.0, 0.25, 0.1) == 1.0
        assert jack_density(1.0, 1.0, 4.5) == 0.0 and jack_density(1.0, 4.0, 0.5) == 0.0

    @pytest.mark.parametrize("theta,t", [(1.0, 1.0), (1.0, 4.0), (1.0, 0.25), (0.6, 2.5), (2.0, 0.5)])
    def test_jack_against_oracle_and_mass(self, theta, t):
        a, b = jack_support(theta, t)
        xs = np.linspace(-0.5, 12, 301)
        xs = xs[(xs != a) & (xs != b)]  # the oracle leaves the single points a, b undefined
        got = jack_density(theta, t, xs)
        ref = np.array([jack_density_quad(theta, t, x) for x in xs])
        np.testing.assert_allclose(got, ref, atol=1e-12)
        pts = [a] if a > 0 else None
        mass, _ = integrate.quad(lambda x: jack_density_quad(theta, t, x), 0, b, points=pts, limit=400,
                                 epsabs=1e-12)
        assert mass == pytest.approx(1.0, abs=1e-6)
        assert float(jack_cdf(theta, t, b + 1)[0]) == 1.0

    def test_cauchy(self):
        assert cauchy_density(0.0) == pytest.approx(1 / math.pi)
        edges = np.concatenate([-np.logspace(6, -2, 33), np.logspace(-2, 6, 33)])
        head = math.fsum(integrate.quad(cauchy_density, lo, hi, epsabs=1e-15)[0] for lo, hi in zip(edges, edges[1:]))
        tail = 2 * (0.5 - math.atan(1e6) / math.pi)
        assert head + tail == pytest.approx(1.0, abs=1e-9)

    def test_cauchy_cap(self):
        assert reference_equilibrium("cauchy", 3.0) is not None
        assert reference_equilibrium("cauchy", 3.2) is None
        assert reference_equilibrium("custom", 1.0) is None
