"""Dimension machinery: fiber branch sums, the tilted potential family, the
joint solve for the dimension, the measure of full dimension, and the
concavity-based uniqueness certificate.

Notation used throughout: psi(i, z) = -log |b_i'(z)| is the vertical
contraction potential, phi((i,j), z) = -log |a_ij(z)| the horizontal one, and
for t >= 0 the fiber branch sum is A(i, z; t) = sum_j |a_ij(z)|^t.  The
tilted family is

    Phi_t = (t - D) * psi + beta(t) * log A(., .; t),

with beta(t) pinned by requiring log A to integrate to zero against the Gibbs
state of Phi_t.
"""
from __future__ import annotations

import dataclasses
import itertools
import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .carpet import CarpetSpec, holder_proxies, validate_carpet
from .coding import tail_coordinate
from .errors import (BracketFailure, DegenerateFamily, InvalidCarpet,
                     MalformedSpec, NoConvergence)
from .transfer import (DEFAULT_K, GibbsSystem, Observable, build_operator,
                       correlation_form, expectation, branch_function)
from .chebyshev import get_grid


class AFamily:
    """Closed-form evaluators for the fiber branch sum and its t-derivatives.

    Because the horizontal slopes do not depend on x, the branch sum is the
    one-step expression A(i, z; t) = sum_j |a_ij(z)|^t, and

        d/dt  log A = sum_j w_j log |a_ij(z)|          (minus the fiber mean of phi)
        d2/dt2 log A = fiber variance of log |a_ij(z)|  (>= 0)

    with fiber weights w_j proportional to |a_ij(z)|^t.
    """

    def __init__(self, spec: CarpetSpec):
        self.spec = spec

    def _log_slopes(self, row: int, z):
        """log |a_row,j(z)| stacked over j; shape (m_row, len(z))."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return np.array([np.log(np.abs(c.a_tilde(z))) for c in self.spec.row(row).cells])

    def log_a(self, row: int, z, t: float):
        return logsumexp(t * self._log_slopes(row, z), axis=0)

    def dlog_a(self, row: int, z, t: float):
        ls = self._log_slopes(row, z)
        w = np.exp(t * ls - logsumexp(t * ls, axis=0, keepdims=True))
        return np.sum(w * ls, axis=0)

    def d2log_a(self, row: int, z, t: float):
        ls = self._log_slopes(row, z)
        w = np.exp(t * ls - logsumexp(t * ls, axis=0, keepdims=True))
        mean = np.sum(w * ls, axis=0)
        return np.sum(w * (ls - mean) ** 2, axis=0)

    def fiber_weights(self, t: float, row: int, z):
        """Probability vector over the cells of a row, proportional to |slope|^t."""
        ls = self._log_slopes(row, z)
        w = np.exp(t * ls - logsumexp(t * ls, axis=0, keepdims=True))
        return w[:, 0] if np.isscalar(z) else w

    # Observables at collocation nodes -----------------------------------

    def log_a_obs(self, t: float, K: int = DEFAULT_K) -> Observable:
        return Observable.from_function(self.spec.m, lambda i, z: self.log_a(i, z, t), K)

    def dlog_a_obs(self, t: float, K: int = DEFAULT_K) -> Observable:
        return Observable.from_function(self.spec.m, lambda i, z: self.dlog_a(i, z, t), K)

    def d2log_a_obs(self, t: float, K: int = DEFAULT_K) -> Observable:
        return Observable.from_function(self.spec.m, lambda i, z: self.d2log_a(i, z, t), K)

    def phi_range(self, grid_points: int = 512):
        """(min, max) of phi = -log |a_ij(z)| over all cells and z."""
        z = np.linspace(0.0, 1.0, grid_points)
        lo, hi = math.inf, -math.inf
        for row in self.spec.rows:
            for c in row.cells:
                v = -np.log(np.abs(c.a_tilde(z)))
                lo = min(lo, float(np.min(v)))
                hi = max(hi, float(np.max(v)))
        return lo, hi


def a_family(spec: CarpetSpec) -> AFamily:
    return AFamily(spec)


def psi_observable(spec: CarpetSpec, K: int = DEFAULT_K) -> Observable:
    return Observable.from_function(
        spec.m, lambda i, z: -np.log(np.abs(spec.row(i).b.deriv()(z))), K)


def t_of_measure(af: AFamily, nu: GibbsSystem, tol: float = 1e-12,
                 t_max_search: float = 64.0) -> float:
    """Unique root of t -> integral of log A(., .; t) against nu (strictly decreasing)."""
    K = nu.grid.K

    def f(t):
        return nu.integrate(af.log_a_obs(t, K))

    f0 = f(0.0)
    if abs(f0) <= tol:
        return 0.0
    if f0 < 0:
        raise BracketFailure("branch-sum integral negative already at t = 0")
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > t_max_search:
            raise BracketFailure(f"no sign change up to t = {t_max_search}")
    return float(brentq(f, 0.0, hi, xtol=tol, rtol=8.9e-16))


@dataclasses.dataclass(frozen=True)
class TRange:
    t_lower: float        # min over scanned periodic orbits
    t_upper: float        # max over scanned periodic orbits
    outer_lower: float    # rigorous monotone-envelope bounds containing [t_lower, t_upper]
    outer_upper: float
    argmin_word: tuple
    argmax_word: tuple

    @property
    def span(self) -> float:
        return self.t_upper - self.t_lower


def _orbit_t(af: AFamily, word, outer, tol: float = 1e-13) -> float:
    """t(nu) for the uniform measure on the periodic orbit of a row word."""
    spec = af.spec
    q = len(word)
    if all(len(spec.row(i).cells) == 1 for i in word):
        return 0.0
    zs = []
    for k in range(q):
        shifted = word[k + 1:] + word[: k + 1]
        zs.append(tail_coordinate(spec, shifted, tol=1e-15).z)

    def g(t):
        return float(np.mean([af.log_a(word[k], zs[k], t)[0] for k in range(q)]))

    lo, hi = outer
    lo, hi = lo - 1e-9, hi + 1e-9
    glo, ghi = g(lo), g(hi)
    if glo < 0 or ghi > 0:
        # defensive widening; should not trigger for validated carpets
        lo, hi = 0.0, 64.0
    return float(brentq(g, lo, hi, xtol=tol, rtol=8.9e-16))


def _envelope_roots(af: AFamily, grid_points: int = 512):
    z = np.linspace(0.0, 1.0, grid_points)

    def env(t, kind):
        vals = [af.log_a(i, z, t) for i in range(1, af.spec.m + 1)]
        stacked = np.concatenate(vals)
        return float(np.min(stacked)) if kind == "min" else float(np.max(stacked))

    roots = []
    for kind in ("min", "max"):
        g = lambda t: env(t, kind)
        if g(0.0) <= 0.0:
            roots.append(0.0)
            continue
        hi = 1.0
        while g(hi) > 0:
            hi *= 2.0
            if hi > 1e6:
                raise BracketFailure("envelope root escaped to infinity")
        roots.append(float(brentq(g, 0.0, hi, xtol=1e-13)))
    return min(roots), max(roots)


def t_range(af: AFamily, max_period: int = 5) -> TRange:
    """Approximate [t_lower, t_upper] by scanning uniform measures on periodic
    row orbits of period <= max_period; the monotone-envelope roots give
    rigorous outer bounds that always contain the scanned optima."""
    if max_period < 1:
        raise MalformedSpec("max_period must be >= 1")
    outer = _envelope_roots(af)
    m = af.spec.m
    best_lo, best_hi = math.inf, -math.inf
    arg_lo = arg_hi = None
    seen = set()
    for p in range(1, max_period + 1):
        for word in itertools.product(range(1, m + 1), repeat=p):
            canon = min(word[k:] + word[:k] for k in range(p))
            if canon in seen:
                continue
            seen.add(canon)
            t = _orbit_t(af, word, outer)
            if t < best_lo:
                best_lo, arg_lo = t, word
            if t > best_hi:
                arg_hi = word
                best_hi = t
    return TRange(t_lower=best_lo, t_upper=best_hi,
                  outer_lower=outer[0], outer_upper=outer[1],
                  argmin_word=arg_lo, argmax_word=arg_hi)


class PhiFamily:
    """Evaluator for the tilted potential family at a candidate dimension D."""

    def __init__(self, spec: CarpetSpec, D_candidate: float, K: int = DEFAULT_K):
        self.spec = spec
        self.D = float(D_candidate)
        self.K = K
        self.af = AFamily(spec)
        self.psi = psi_observable(spec, K)
        self._loga_cache = {}

    def log_a_obs(self, t: float) -> Observable:
        if t not in self._loga_cache:
            if len(self._loga_cache) > 64:
                self._loga_cache.clear()
            self._loga_cache[t] = self.af.log_a_obs(t, self.K)
        return self._loga_cache[t]

    def system(self, t: float, beta: float) -> GibbsSystem:
        pot = (t - self.D) * self.psi + beta * self.log_a_obs(t)
        return build_operator(self.spec, pot)


def beta_of_t(pf: PhiFamily, t: float, tol: float = 1e-12, guess: float | None = None):
    """Solve for beta(t): the branch-sum integral vanishes at the Gibbs state.

    The integral is strictly increasing in beta (its beta-derivative is the
    asymptotic variance of log A), so a bracket plus Brent converges globally.
    Raises DegenerateFamily when that variance is numerically zero.
    """
    loga = pf.log_a_obs(t)
    cache = {}

    def F(beta):
        if beta not in cache:
            cache[beta] = pf.system(t, beta)
        return cache[beta].integrate(loga)

    b0 = 0.5 if guess is None else float(guess)
    f0 = F(b0)
    var = correlation_form(cache[b0], loga, loga, tol=1e-13)
    if var < 1e-12:
        raise DegenerateFamily(
            "branch sum is cohomologous to a constant; the tilt beta(t) is undefined")
    if abs(f0) < 1e-18:
        return b0, cache[b0]
    step = max(0.25, abs(f0) / var)
    lo, hi = b0, b0
    for _ in range(80):
        if f0 > 0:
            lo = lo - step
            if F(lo) < 0:
                break
        else:
            hi = hi + step
            if F(hi) > 0:
                break
        step *= 2.0
    else:
        raise BracketFailure("could not bracket beta(t)")
    if f0 > 0:
        hi = b0
    else:
        lo = b0
    beta = float(brentq(F, lo, hi, xtol=1e-13, rtol=8.9e-16))
    sys = cache.get(beta) or pf.system(t, beta)
    resid = sys.integrate(loga)
    if abs(resid) > max(tol, 1e-10):
        raise NoConvergence(f"beta residual {resid:.3e} exceeds tolerance")
    return beta, sys


@dataclasses.dataclass(frozen=True)
class PressurePoint:
    t: float
    P: float
    dPdt: float
    d2Pdt2: float
    beta: float
    beta_prime: float
    rho: float
    psi_mean: float    # integral of psi against the base Gibbs state
    phi_mean: float    # integral of phi against the full-shift measure
    system: GibbsSystem


def pressure_curve(pf: PhiFamily, t: float, tol: float = 1e-12,
                   beta_guess: float | None = None) -> PressurePoint:
    """Pressure of the tilted family at t, with first and second t-derivatives.

    First derivative: integral of psi minus beta(t) times the full-shift mean
    of phi.  Second derivative combines the implicit beta'(t) with the fiber
    variance term and two correlation forms against the t-derivative of the
    potential; all expectation derivatives use the asymptotic covariance.
    """
    beta, sys = beta_of_t(pf, t, tol=tol, guess=beta_guess)
    K = pf.K
    loga = pf.log_a_obs(t)
    dloga = pf.af.dlog_a_obs(t, K)
    d2loga = pf.af.d2log_a_obs(t, K)
    psi = pf.psi

    psi_mean = sys.integrate(psi)
    dloga_mean = sys.integrate(dloga)
    phi_mean = -dloga_mean
    P = sys.pressure
    dPdt = psi_mean + beta * dloga_mean

    qtol = min(tol, 1e-11)
    dF_dbeta = correlation_form(sys, loga, loga, qtol)
    if dF_dbeta < 1e-12:
        raise DegenerateFamily("branch sum is cohomologous to a constant")
    dF_dt = dloga_mean + correlation_form(sys, psi + beta * dloga, loga, qtol)
    beta_prime = -dF_dt / dF_dbeta

    phidot = psi + beta_prime * loga + beta * dloga
    d2Pdt2 = (beta_prime * dloga_mean
              + beta * sys.integrate(d2loga)
              + correlation_form(sys, phidot, psi, qtol)
              + beta * correlation_form(sys, phidot, dloga, qtol))
    rho = psi_mean / phi_mean
    return PressurePoint(t=t, P=P, dPdt=dPdt, d2Pdt2=d2Pdt2, beta=beta,
                         beta_prime=beta_prime, rho=rho, psi_mean=psi_mean,
                         phi_mean=phi_mean, system=sys)


@dataclasses.dataclass(frozen=True)
class FullDimSolution:
    D: float
    t_star: float
    beta_star: float
    rho_star: float
    nu: GibbsSystem
    t_range: TRange
    P_at_star: float
    dPdt_at_star: float
    beta_residual: float
    degenerate: bool = False
    K: int = DEFAULT_K


def _stationary_t(pf: PhiFamily, bracket, tol: float, t_guess=None, beta_guess=None):
    """Find the interior stationary point of t -> P(Phi_t) by safeguarded Newton."""
    lo, hi = bracket
    t = t_guess if t_guess is not None and lo < t_guess < hi else 0.5 * (lo + hi)
    beta = beta_guess
    pt = pressure_curve(pf, t, tol=tol, beta_guess=beta)
    slo = shi = None
    for _ in range(80):
        if abs(pt.dPdt) <= tol:
            return pt
        if pt.dPdt > 0:
            slo = pt.t
        else:
            shi = pt.t
        if pt.d2Pdt2 < 0:
            t_new = pt.t - pt.dPdt / pt.d2Pdt2
        else:
            t_new = None
        blo = slo if slo is not None else lo
        bhi = shi if shi is not None else hi
        if t_new is None or not (blo < t_new < bhi):
            t_new = 0.5 * (blo + bhi)
        pt = pressure_curve(pf, t_new, tol=tol, beta_guess=pt.beta)
    raise NoConvergence("stationary point of the pressure curve did not converge")


def _trivial_closed_form(spec: CarpetSpec, K: int):
    """Dimension for the exactly-constant trivial carpet (all rows alike)."""
    k = spec.m_list[0]
    cells = [c for row in spec.rows for c in row.cells]
    a_vals = {abs(c.a_tilde.coeffs[0]) for c in cells}
    all_const = all(c.a_tilde.is_constant() for c in cells)
    if not (all_const and len(a_vals) == 1 and len(set(spec.m_list)) == 1):
        raise DegenerateFamily(
            "branch sum degenerate but carpet is not exactly-constant trivial; "
            "no closed form applies")
    a = a_vals.pop()
    t_const = math.log(k) / math.log(1.0 / a)
    psi = psi_observable(spec, K)

    def g(s):
        return build_operator(spec, -s * psi).pressure

    s_star = float(brentq(g, 0.0, 4.0, xtol=1e-14))
    nu = build_operator(spec, -s_star * psi)
    af = AFamily(spec)
    tr = TRange(t_lower=t_const, t_upper=t_const,
                outer_lower=t_const, outer_upper=t_const,
                argmin_word=(1,), argmax_word=(1,))
    return FullDimSolution(D=s_star + t_const, t_star=t_const,
                           beta_star=math.nan, rho_star=math.nan, nu=nu,
                           t_range=tr, P_at_star=0.0, dPdt_at_star=0.0,
                           beta_residual=0.0, degenerate=True, K=K)


def solve_full_dimension(spec: CarpetSpec, tol: float = 1e-10, K: int = DEFAULT_K,
                         max_period: int = 4, bracket_inset: float = 0.04) -> FullDimSolution:
    """Joint solve for the dimension D and the stationary parameter t*.

    Outer safeguarded Newton on the candidate D: g(D) = max_t P(Phi_t^{(D)})
    is strictly decreasing with derivative -integral(psi) by a double envelope
    argument (both t and beta are stationary/defining at the inner solution).
    Inner solve finds the zero of dP/dt.  Returns the solved Gibbs data.
    """
    rep = validate_carpet(spec)
    if not rep.ok:
        raise InvalidCarpet("carpet failed validation:\n" + rep.summary())
    af = AFamily(spec)
    tr = t_range(af, max_period=max_period)
    span = tr.span
    if span < 1e-10:
        return _trivial_closed_form(spec, K)
    inset = bracket_inset * span
    bracket = (tr.t_lower + inset, tr.t_upper - inset)

    Dlo, Dhi = 1.0, 2.0
    D = 1.5
    t_guess = None
    beta_guess = None
    pt = None
    for it in range(200):
        pf = PhiFamily(spec, D, K)
        try:
            pt = _stationary_t(pf, bracket, tol, t_guess, beta_guess)
        except DegenerateFamily:
            return _trivial_closed_form(spec, K)
        t_guess, beta_guess = pt.t, pt.beta
        g = pt.P
        if abs(g) <= tol:
            break
        if g > 0:
            Dlo = max(Dlo, D)
        else:
            Dhi = min(Dhi, D)
        if Dhi <= Dlo:
            Dlo, Dhi = Dlo - 0.5, Dhi + 0.5
        D_new = D + g / pt.psi_mean  # Newton: g'(D) = -psi_mean < 0
        if not (Dlo < D_new < Dhi):
            D_new = 0.5 * (Dlo + Dhi)
            if it == 0:
                # bracket not yet two-sided; widen Newton-style anyway
                D_new = min(max(D + g / pt.psi_mean, 0.1), 2.5)
        D = D_new
    else:
        raise NoConvergence("dimension solve did not converge")

    return FullDimSolution(D=D, t_star=pt.t, beta_star=pt.beta, rho_star=pt.rho,
                           nu=pt.system, t_range=tr, P_at_star=pt.P,
                           dPdt_at_star=pt.dPdt,
                           beta_residual=pt.system.integrate(pf.log_a_obs(pt.t)),
                           degenerate=False, K=K)


def fiber_weights(af: AFamily, t: float, row: int, z):
    return af.fiber_weights(t, row, z)


def measure_cylinder(sol: FullDimSolution, word, tol: float = 1e-12) -> float:
    """Mass of a full-shift cylinder under the measure of full dimension.

    The measure disintegrates over the base Gibbs state with covariant fiber
    weights, so the mass is the base branch sum with the per-step fiber weight
    of each (i_k, j_k) multiplied in along the branch.
    """
    word = tuple((int(i), int(j)) for i, j in word)
    if not word:
        raise MalformedSpec("measure_cylinder needs a nonempty word")
    if sol.degenerate:
        raise DegenerateFamily("no full-shift Gibbs measure stored for the trivial carpet")
    af = AFamily(sol.nu.spec)
    cols = tuple(j for _, j in word)

    def fiber(k, i_k, zeta):
        return af.fiber_weights(sol.t_star, i_k, zeta)[cols[k] - 1]

    obs = branch_function(sol.nu, tuple(i for i, _ in word), fiber_factor=fiber)
    return expectation(sol.nu, obs, tol)


def dimension_of_measure(spec: CarpetSpec, nu: GibbsSystem, t: float,
                         tol: float = 1e-12) -> float:
    """Dimension of the relative equilibrium measure built over (nu, t).

    Uses the variational identity: the fiber entropy excess equals the
    branch-sum integral plus t times the full-shift mean of phi.
    """
    af = AFamily(spec)
    K = nu.grid.K
    psi = psi_observable(spec, K)
    loga = af.log_a_obs(t, K)
    dloga = af.dlog_a_obs(t, K)
    h_nu = nu.pressure - expectation(nu, nu.potential, tol)
    psi_mean = nu.integrate(psi)
    phi_mean = -nu.integrate(dloga)
    excess = nu.integrate(loga) + t * phi_mean
    return h_nu / psi_mean + excess / phi_mean


def check_H_eps(sol: FullDimSolution, tr: TRange, epsilon: float) -> bool:
    """True iff t* sits strictly inside the epsilon-shrunk parameter interval."""
    return tr.t_lower + epsilon < sol.t_star < tr.t_upper - epsilon


@dataclasses.dataclass(frozen=True)
class UniquenessReport:
    t_lower: float
    t_upper: float
    eps: float
    ts: np.ndarray
    P: np.ndarray
    dPdt: np.ndarray
    d2Pdt2: np.ndarray
    beta: np.ndarray
    beta_prime: np.ndarray
    rho: np.ndarray
    concavity_ok: bool
    h_eps_ok: bool
    gamma_witness: float
    phi_seminorm: float
    psi_seminorm: float
    unique: bool
    degenerate: bool
    solution: FullDimSolution


def uniqueness_certificate(spec: CarpetSpec, epsilon: float | None = None,
                           grid: int = 50, tol: float = 1e-8,
                           K: int = DEFAULT_K, solve_tol: float = 1e-10,
                           threads: int = 1) -> UniquenessReport:
    """Numerical uniqueness certificate: strict concavity of the pressure curve.

    Solves for D, sweeps the admissible t-interval shrunk by epsilon (default
    5% of its width), and certifies unique <=> all second derivatives below
    -tol and the stationary t* strictly inside the shrunk interval.  Also
    reports the witness gamma bounding phi, beta and beta', and derivative
    seminorm proxies of the two potentials.
    """
    sol = solve_full_dimension(spec, tol=solve_tol, K=K)
    tr = sol.t_range
    phi_s, psi_s = holder_proxies(spec)
    if sol.degenerate:
        empty = np.array([])
        return UniquenessReport(
            t_lower=tr.t_lower, t_upper=tr.t_upper, eps=0.0, ts=empty, P=empty,
            dPdt=empty, d2Pdt2=empty, beta=empty, beta_prime=empty, rho=empty,
            concavity_ok=True, h_eps_ok=True, gamma_witness=math.inf,
            phi_seminorm=phi_s, psi_seminorm=psi_s,
            unique=True, degenerate=True, solution=sol)

    eps = 0.05 * tr.span if epsilon is None else float(epsilon)
    if grid < 2 or tr.t_lower + eps >= tr.t_upper - eps:
        raise MalformedSpec("empty certificate interval")
    ts = np.linspace(tr.t_lower + eps, tr.t_upper - eps, grid)
    pf = PhiFamily(spec, sol.D, K)

    points = [None] * len(ts)
    if threads > 1:
        import concurrent.futures
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            futs = {ex.submit(pressure_curve, pf, float(t), 1e-12): i
                    for i, t in enumerate(ts)}
            for f in concurrent.futures.as_completed(futs):
                points[futs[f]] = f.result()
    else:
        guess = None
        for i, t in enumerate(ts):
            points[i] = pressure_curve(pf, float(t), 1e-12, beta_guess=guess)
            guess = points[i].beta

    P = np.array([p.P for p in points])
    dP = np.array([p.dPdt for p in points])
    d2P = np.array([p.d2Pdt2 for p in points])
    beta = np.array([p.beta for p in points])
    bprime = np.array([p.beta_prime for p in points])
    rho = np.array([p.rho for p in points])

    concavity_ok = bool(np.max(d2P) < -tol)
    h_eps_ok = check_H_eps(sol, tr, eps)
    phi_lo, phi_hi = pf.af.phi_range()
    gamma = max(1.0 / phi_lo, phi_hi, float(np.max(np.abs(beta))),
                float(np.max(np.abs(bprime)))) * (1.0 + 1e-12)
    return UniquenessReport(
        t_lower=tr.t_lower, t_upper=tr.t_upper, eps=eps, ts=ts, P=P, dPdt=dP,
        d2Pdt2=d2P, beta=beta, beta_prime=bprime, rho=rho,
        concavity_ok=concavity_ok, h_eps_ok=h_eps_ok, gamma_witness=gamma,
        phi_seminorm=phi_s, psi_seminorm=psi_s,
        unique=concavity_ok and h_eps_ok, degenerate=False, solution=sol)
