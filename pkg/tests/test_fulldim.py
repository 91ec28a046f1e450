import math

import numpy as np
import pytest

from carpetdim import (AFamily, DegenerateFamily, Observable, PhiFamily,
                       beta_of_t, build_operator, check_H_eps,
                       dimension_of_measure, fiber_weights, make_sierpinski,
                       measure_cylinder, pressure_curve, solve_full_dimension,
                       t_of_measure, t_range, uniqueness_certificate)

RHO = math.log(0.45) / math.log(0.2)
D_S1 = math.log(3 ** RHO + 2 ** RHO) / math.log(1 / 0.45)
LOG5 = math.log(5.0)


def bernoulli(spec, q):
    pot = Observable.from_function(spec.m, lambda i, z: np.full_like(z, math.log(q[i - 1])))
    return build_operator(spec, pot)


def test_a_family_s1(S1):
    af = AFamily(S1)
    assert af.log_a(1, 0.3, 0.5)[0] == pytest.approx(math.log(3 * 0.2 ** 0.5), abs=1e-12)
    assert af.dlog_a(2, 0.7, 0.9)[0] == pytest.approx(math.log(0.2), abs=1e-12)
    assert af.d2log_a(1, 0.1, 0.4)[0] == pytest.approx(0.0, abs=1e-14)
    w = af.fiber_weights(0.5, 1, 0.2)
    assert w == pytest.approx(np.full(3, 1 / 3), abs=1e-12)


def test_fiber_weights_t0_uniform(S1eps):
    af = AFamily(S1eps)
    for i, mi in ((1, 3), (2, 2)):
        w = af.fiber_weights(0.0, i, 0.37)
        assert w == pytest.approx(np.full(mi, 1 / mi), abs=1e-12)
        assert np.sum(af.fiber_weights(1.3, i, 0.9)) == pytest.approx(1.0, abs=1e-12)


def test_t_of_measure_s1(S1):
    af = AFamily(S1)
    for p1, p2 in ((0.5, 0.5), (0.0, 1.0), (0.55012, 0.44988)):
        expect = (p1 * math.log(3) + p2 * math.log(2)) / LOG5
        assert t_of_measure(af, bernoulli(S1, (max(p1, 1e-14), p2))) == pytest.approx(
            expect, abs=1e-9)


def test_t_range_s1(S1):
    tr = t_range(AFamily(S1), max_period=4)
    assert tr.t_lower == pytest.approx(math.log(2) / LOG5, abs=1e-9)
    assert tr.t_upper == pytest.approx(math.log(3) / LOG5, abs=1e-9)
    assert tr.outer_lower <= tr.t_lower + 1e-12
    assert tr.outer_upper >= tr.t_upper - 1e-12


def test_t_range_perturbed_widens_moderately(S1eps):
    tr = t_range(AFamily(S1eps), max_period=3)
    assert abs(tr.t_lower - math.log(2) / LOG5) < 0.05
    assert abs(tr.t_upper - math.log(3) / LOG5) < 0.05
    assert tr.outer_lower <= tr.t_lower + 1e-12
    assert tr.outer_upper >= tr.t_upper - 1e-12


def test_beta_of_t_matches_rho_at_star(S1, sol_S1):
    pf = PhiFamily(S1, sol_S1.D)
    beta, sys = beta_of_t(pf, sol_S1.t_star)
    assert beta == pytest.approx(sol_S1.rho_star, abs=1e-9)
    assert sys.integrate(pf.log_a_obs(sol_S1.t_star)) == pytest.approx(0.0, abs=1e-10)


def test_degenerate_trivial_carpet():
    triv = make_sierpinski(0.2, 0.45, (2, 2))
    sol = solve_full_dimension(triv)
    assert sol.degenerate
    # closed form: s* solves pressure of -s*psi = 0 => 2*0.45^s = 1
    s_star = math.log(2) / math.log(1 / 0.45)
    assert sol.D == pytest.approx(s_star + math.log(2) / math.log(5), abs=1e-9)
    pf = PhiFamily(triv, sol.D)
    with pytest.raises(DegenerateFamily):
        beta_of_t(pf, sol.t_star)


def test_solution_invariants(sol_S1, sol_S1eps):
    for sol in (sol_S1, sol_S1eps):
        assert abs(sol.P_at_star) <= 1e-9
        assert abs(sol.dPdt_at_star) <= 1e-9
        assert abs(sol.beta_star - sol.rho_star) <= 1e-8
        assert sol.t_range.t_lower < sol.t_star < sol.t_range.t_upper
        assert abs(sol.beta_residual) <= 1e-10


def test_check_h_eps(sol_S1):
    tr = sol_S1.t_range
    assert check_H_eps(sol_S1, tr, 0.05)
    assert not check_H_eps(sol_S1, tr, tr.span / 2)


def test_measure_cylinder_marginals(S1eps, sol_S1eps):
    from carpetdim import cylinder_mass
    for i in (1, 2):
        base = cylinder_mass(sol_S1eps.nu, (i,))
        split = sum(measure_cylinder(sol_S1eps, ((i, j),))
                    for j in range(1, len(S1eps.row(i).cells) + 1))
        assert split == pytest.approx(base, abs=1e-10)


def test_measure_shift_compatibility(S1eps, sol_S1eps):
    rng = np.random.default_rng(11)
    letters = S1eps.alphabet()
    for _ in range(20):
        n = int(rng.integers(1, 4))
        w = tuple(letters[k] for k in rng.integers(0, len(letters), size=n))
        lhs = sum(measure_cylinder(sol_S1eps, (ij,) + w) for ij in letters)
        assert lhs == pytest.approx(measure_cylinder(sol_S1eps, w), abs=1e-8)


def test_dimension_of_measure_suboptimal(S1):
    af = AFamily(S1)
    nu = bernoulli(S1, (0.5, 0.5))
    t = t_of_measure(af, nu)
    d = dimension_of_measure(S1, nu, t)
    expect = math.log(2) / math.log(1 / 0.45) + (0.5 * math.log(6)) / LOG5
    assert d == pytest.approx(expect, abs=1e-9)
    assert d < D_S1


def fd5(vals, h):
    """Fourth-order central first derivative from values at t-2h..t+2h."""
    m2, m1, p1, p2 = vals
    return (m2 - 8 * m1 + 8 * p1 - p2) / (12 * h)


def test_pressure_curve_fd(S1eps, sol_S1eps):
    pf = PhiFamily(S1eps, sol_S1eps.D)
    tr = sol_S1eps.t_range
    rng = np.random.default_rng(3)
    h = 1e-4
    for t in tr.t_lower + (0.1 + 0.8 * rng.random(4)) * tr.span:
        t = float(t)
        pt = pressure_curve(pf, t)
        stencil = [pressure_curve(pf, t + k * h) for k in (-2, -1, 1, 2)]
        assert pt.dPdt == pytest.approx(fd5([q.P for q in stencil], h), abs=1e-6)
        assert pt.d2Pdt2 == pytest.approx(fd5([q.dPdt for q in stencil], h), abs=1e-5)
        assert pt.beta_prime == pytest.approx(fd5([q.beta for q in stencil], h), abs=1e-5)


def test_uniqueness_certificate_grid(S1, sol_S1):
    rep = uniqueness_certificate(S1, grid=12)
    assert rep.unique and rep.concavity_ok and rep.h_eps_ok
    assert np.max(rep.d2Pdt2) < -1e-4
    assert len(rep.ts) == 12
    assert rep.gamma_witness > 0
    # dPdt and beta - rho both change sign across the stationary point
    assert rep.dPdt[0] > 0 > rep.dPdt[-1]
    diff = rep.beta - rep.rho
    assert np.min(diff) < 0 < np.max(diff)


def test_uniqueness_threads_agree(S1eps):
    a = uniqueness_certificate(S1eps, grid=8)
    b = uniqueness_certificate(S1eps, grid=8, threads=4)
    assert np.allclose(a.d2Pdt2, b.d2Pdt2, atol=1e-9)
    assert a.unique == b.unique
