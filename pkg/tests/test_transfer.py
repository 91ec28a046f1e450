import math

import numpy as np
import pytest

from carpetdim import (Observable, branch_function, build_operator,
                       correlation_form, cylinder_mass, entropy, expectation,
                       make_sierpinski)


def bernoulli_system(spec, q):
    """Row-Bernoulli Gibbs system: potential g(i, z) = log q_i."""
    pot = Observable.from_function(spec.m, lambda i, z: np.full_like(z, math.log(q[i - 1])))
    return build_operator(spec, pot)


def test_pressure_constant_potential(S1):
    c = -0.37
    pot = Observable.constant(S1.m, c)
    sys = build_operator(S1, pot)
    assert sys.pressure == pytest.approx(math.log(2) + c, abs=1e-12)


def test_pressure_shift_invariance(S1eps):
    pot = Observable.from_function(S1eps.m, lambda i, z: -0.3 * i + 0.2 * np.sin(3 * z))
    c = 0.7341
    p0 = build_operator(S1eps, pot).pressure
    p1 = build_operator(S1eps, pot + c).pressure
    assert p1 - p0 == pytest.approx(c, abs=1e-10)


def test_bernoulli_gibbs(S1):
    q = (0.3, 0.7)
    sys = bernoulli_system(S1, q)
    assert sys.pressure == pytest.approx(0.0, abs=1e-12)
    ind1 = Observable.from_function(S1.m, lambda i, z: np.full_like(z, 1.0 if i == 1 else 0.0))
    assert sys.integrate(ind1) == pytest.approx(0.3, abs=1e-12)
    assert entropy(sys) == pytest.approx(-(0.3 * math.log(0.3) + 0.7 * math.log(0.7)), abs=1e-12)


def test_expectation_matches_quadrature(S1eps):
    pot = Observable.from_function(S1eps.m, lambda i, z: -0.5 * i + 0.1 * z ** 2)
    sys = build_operator(S1eps, pot)
    h = Observable.from_function(S1eps.m, lambda i, z: np.cos(i + z))
    assert expectation(sys, h) == pytest.approx(sys.integrate(h), abs=1e-10)


def test_cylinder_masses_bernoulli(S1):
    q = (0.4, 0.6)
    sys = bernoulli_system(S1, q)
    assert cylinder_mass(sys, (1,)) == pytest.approx(0.4, abs=1e-12)
    assert cylinder_mass(sys, (1, 2)) == pytest.approx(0.24, abs=1e-12)
    assert cylinder_mass(sys, (2, 2, 1)) == pytest.approx(0.6 * 0.6 * 0.4, abs=1e-12)


def test_cylinder_masses_partition(S1eps):
    pot = Observable.from_function(S1eps.m, lambda i, z: -0.2 * i + 0.05 * z)
    sys = build_operator(S1eps, pot)
    total = sum(cylinder_mass(sys, (i, j)) for i in (1, 2) for j in (1, 2))
    assert total == pytest.approx(1.0, abs=1e-11)


def test_branch_function_positive(S1eps):
    pot = Observable.from_function(S1eps.m, lambda i, z: -0.2 * i)
    sys = build_operator(S1eps, pot)
    obs = branch_function(sys, (1, 2, 1))
    assert np.all(obs.values > 0)


def test_correlation_form_independence(S1):
    q = (0.35, 0.65)
    sys = bernoulli_system(S1, q)
    ind1 = Observable.from_function(S1.m, lambda i, z: np.full_like(z, 1.0 if i == 1 else 0.0))
    # row indicators are i.i.d. under a Bernoulli state: only the n=0 term survives
    assert correlation_form(sys, ind1, ind1) == pytest.approx(q[0] * (1 - q[0]), abs=1e-8)


def test_correlation_form_constants(S1eps):
    pot = Observable.from_function(S1eps.m, lambda i, z: -0.4 * i + 0.1 * z)
    sys = build_operator(S1eps, pot)
    c = Observable.constant(S1eps.m, 2.5)
    h = Observable.from_function(S1eps.m, lambda i, z: np.sin(i * z))
    assert correlation_form(sys, c, h) == pytest.approx(0.0, abs=1e-10)
    assert correlation_form(sys, h, h) >= -1e-10


def test_correlation_form_is_pressure_hessian(S1eps):
    """sigma(h, h) equals the second derivative of s -> P(g + s h)."""
    g = Observable.from_function(S1eps.m, lambda i, z: -0.3 * i + 0.2 * z ** 2)
    h = Observable.from_function(S1eps.m, lambda i, z: np.cos(2 * z) * i)
    sys = build_operator(S1eps, g)
    s = 1e-4
    pp = build_operator(S1eps, g + s * h).pressure
    pm = build_operator(S1eps, g + (-s) * h).pressure
    fd = (pp - 2 * sys.pressure + pm) / s ** 2
    assert correlation_form(sys, h, h) == pytest.approx(fd, abs=1e-5)


def test_pressure_derivative_is_expectation(S1eps):
    """d/ds P(g + s h) = Gibbs expectation of h."""
    g = Observable.from_function(S1eps.m, lambda i, z: -0.3 * i + 0.2 * z ** 2)
    h = Observable.from_function(S1eps.m, lambda i, z: np.cos(2 * z) * i)
    sys = build_operator(S1eps, g)
    s = 1e-5
    fd = (build_operator(S1eps, g + s * h).pressure
          - build_operator(S1eps, g + (-s) * h).pressure) / (2 * s)
    assert sys.integrate(h) == pytest.approx(fd, abs=1e-9)


def test_k_refinement(S1eps):
    pot64 = Observable.from_function(S1eps.m, lambda i, z: -0.3 * i + 0.2 * np.sin(2 * z), K=64)
    pot128 = Observable.from_function(S1eps.m, lambda i, z: -0.3 * i + 0.2 * np.sin(2 * z), K=128)
    p64 = build_operator(S1eps, pot64).pressure
    p128 = build_operator(S1eps, pot128).pressure
    assert abs(p64 - p128) < 1e-10
