"""Thermodynamic formalism on the row shift: transfer operator, pressure, Gibbs states.

Observables live on the row shift in (first symbol, tail coordinate)
representation: m smooth components sampled at Chebyshev nodes.  The transfer
operator for a potential g acts by

    (L f)(j, z) = sum_i exp(g(i, b_j(z))) * f(i, b_j(z)),

which is discretized as a dense m*K x m*K collocation matrix.
"""
from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from .carpet import CarpetSpec
from .chebyshev import ChebGrid, get_grid
from .coding import _chain_points
from .errors import MalformedSpec, NoConvergence, NonPrimitive

DEFAULT_K = 64


@dataclasses.dataclass(frozen=True)
class Observable:
    """m component functions of the tail coordinate, sampled at Chebyshev nodes."""

    grid: ChebGrid
    values: np.ndarray  # shape (m, K)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.grid.K:
            raise MalformedSpec(f"observable values must be (m, {self.grid.K})")
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_function(cls, m: int, fn, K: int = DEFAULT_K) -> "Observable":
        """fn(i, z_array) -> array, with i the 1-based first symbol."""
        grid = get_grid(K)
        vals = np.array([np.broadcast_to(fn(i, grid.nodes), (K,)).astype(float)
                         for i in range(1, m + 1)])
        return cls(grid=grid, values=vals)

    @classmethod
    def constant(cls, m: int, c: float, K: int = DEFAULT_K) -> "Observable":
        return cls(grid=get_grid(K), values=np.full((m, K), float(c)))

    def eval(self, i: int, z):
        """Barycentric interpolation of component i (1-based) at points z."""
        scalar = np.isscalar(z)
        out = self.grid.eval_matrix(z) @ self.values[i - 1]
        return float(out[0]) if scalar else out

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _wrap(self, vals) -> "Observable":
        return Observable(grid=self.grid, values=vals)

    def __add__(self, other):
        if isinstance(other, Observable):
            return self._wrap(self.values + other.values)
        return self._wrap(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Observable):
            return self._wrap(self.values - other.values)
        return self._wrap(self.values - other)

    def __mul__(self, other):
        if isinstance(other, Observable):
            return self._wrap(self.values * other.values)
        return self._wrap(self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.values)


@dataclasses.dataclass(frozen=True)
class GibbsSystem:
    """Discretized transfer operator with its Perron eigen-data.

    pressure = log of the leading eigenvalue; right_values is the positive
    eigenfunction at nodes; left_weights is a signed quadrature representing
    the Gibbs measure: integrate(f) = sum(left_weights * right_values * f),
    normalized so the constant 1 integrates to 1.
    """

    spec: CarpetSpec
    potential: Observable
    grid: ChebGrid
    pressure: float
    right_values: np.ndarray   # (m, K), positive
    left_weights: np.ndarray   # (m, K)
    matrix: np.ndarray         # raw collocation matrix, (mK, mK)
    normalized_matrix: np.ndarray

    @property
    def m(self) -> int:
        return self.spec.m

    def right_eigen(self) -> Observable:
        return Observable(grid=self.grid, values=self.right_values)

    def _flat(self, obs) -> np.ndarray:
        v = obs.values if isinstance(obs, Observable) else np.asarray(obs, dtype=float)
        return v.reshape(-1)

    def integrate(self, obs) -> float:
        """Fast spectral quadrature of an observable against the Gibbs state."""
        return float(np.sum(self.left_weights * self.right_values
                            * (obs.values if isinstance(obs, Observable) else obs)))

    def iterate(self, values: np.ndarray) -> np.ndarray:
        """One application of the normalized operator (fixes constants)."""
        shape = values.shape
        return (self.normalized_matrix @ values.reshape(-1)).reshape(shape)


def build_operator(spec: CarpetSpec, potential: Observable, K: int | None = None) -> GibbsSystem:
    """Collocation discretization + dense Perron eigensolve.

    Raises NonPrimitive if the leading eigenvalue is not simple, real and
    positive within tolerance (impossible for a full shift with a finite
    potential, but checked defensively).
    """
    if K is not None and K != potential.grid.K:
        grid = get_grid(K)
        potential = Observable(grid=grid, values=np.array(
            [potential.eval(i, grid.nodes) for i in range(1, potential.m + 1)]))
    grid = potential.grid
    m, Kn = potential.m, grid.K
    if m != spec.m:
        raise MalformedSpec(f"potential has {m} components, carpet has {spec.m} rows")
    if not np.all(np.isfinite(potential.values)):
        raise MalformedSpec("potential is not finite at all nodes")

    M = np.zeros((m * Kn, m * Kn))
    for j in range(1, m + 1):
        pts = np.clip(spec.row(j).b(grid.nodes), 0.0, 1.0)
        E = grid.eval_matrix(pts)  # (K, K)
        rblock = slice((j - 1) * Kn, j * Kn)
        for i in range(1, m + 1):
            g = potential.eval(i, pts)  # (K,)
            M[rblock, (i - 1) * Kn: i * Kn] = np.exp(g)[:, None] * E

    vals, lvecs, rvecs = scipy.linalg.eig(M, left=True, right=True)
    order = np.argsort(-np.abs(vals))
    lead = vals[order[0]]
    second = np.abs(vals[order[1]]) if len(order) > 1 else 0.0
    if abs(lead.imag) > 1e-9 * abs(lead) or lead.real <= 0:
        raise NonPrimitive(f"leading eigenvalue {lead} is not real positive")
    if second >= abs(lead) * (1.0 - 1e-12):
        raise NonPrimitive("leading eigenvalue is not simple within tolerance")
    lam = lead.real

    h = rvecs[:, order[0]]
    h = np.real(h * np.exp(-1j * np.angle(h[np.argmax(np.abs(h))])))
    if h[np.argmax(np.abs(h))] < 0:
        h = -h
    if np.min(h) <= 0:
        raise NonPrimitive("Perron eigenfunction is not positive after cleanup")
    w = lvecs[:, order[0]]
    w = np.real(w * np.exp(-1j * np.angle(w[np.argmax(np.abs(w))])))
    s = float(w @ h)
    if s == 0.0:
        raise NonPrimitive("left/right eigenvector pairing is singular")
    w = w / s  # now sum(w * h) = 1

    hv = h.reshape(m, Kn)
    Mhat = (M * h[None, :] / h[:, None]) / lam
    return GibbsSystem(spec=spec, potential=potential, grid=grid,
                       pressure=float(np.log(lam)),
                       right_values=hv, left_weights=w.reshape(m, Kn),
                       matrix=M, normalized_matrix=Mhat)


def expectation(sys: GibbsSystem, h: Observable, tol: float = 1e-12,
                max_iter: int = 20000) -> float:
    """Integral of h against the Gibbs state, by iterating the normalized operator.

    The iterates of the normalized operator converge to the constant equal to
    the expectation; we stop when the spread of node values is below tol.
    """
    if tol <= 0:
        raise MalformedSpec("tol must be positive")
    v = h.values.reshape(-1).copy()
    for _ in range(max_iter):
        spread = float(np.max(v) - np.min(v))
        if spread < tol:
            return float(0.5 * (np.max(v) + np.min(v)))
        v = sys.normalized_matrix @ v
    raise NoConvergence(f"expectation spread {spread:.3e} > tol after {max_iter} iterations")


def entropy(sys: GibbsSystem, tol: float = 1e-12) -> float:
    """Metric entropy via h = P(g) - integral of g."""
    h = sys.pressure - expectation(sys, sys.potential, tol)
    if -tol < h < 0.0:
        h = 0.0
    return h


def branch_function(sys: GibbsSystem, row_word, fiber_factor=None) -> Observable:
    """n-fold normalized operator applied to the cylinder indicator, exactly.

    Only the single branch labelled by the word survives, giving the smooth
    function exp(Birkhoff sum - n*P) * h(i1, zeta_1) / h at each (j, z).  An
    optional fiber_factor(k, i_k, zeta_k) -> array multiplies in per-step
    fiber weights (used for cylinder masses of the full-shift measure).
    """
    row_word = tuple(int(i) for i in row_word)
    if not row_word:
        raise MalformedSpec("branch_function needs a nonempty word")
    grid = sys.grid
    n = len(row_word)
    vals = np.empty((sys.m, grid.K))
    for j in range(1, sys.m + 1):
        t0 = np.clip(sys.spec.row(j).b(grid.nodes), 0.0, 1.0)
        zetas = _chain_points(sys.spec, row_word, t0)
        s = np.zeros_like(t0)
        extra = np.ones_like(t0)
        for k, i_k in enumerate(row_word):
            s += sys.potential.eval(i_k, zetas[k])
            if fiber_factor is not None:
                extra = extra * fiber_factor(k, i_k, zetas[k])
        h_obs = sys.right_eigen()
        top = h_obs.eval(row_word[0], zetas[0])
        vals[j - 1] = np.exp(s - n * sys.pressure) * top / sys.right_values[j - 1] * extra
    return Observable(grid=grid, values=vals)


def cylinder_mass(sys: GibbsSystem, word, tol: float = 1e-12) -> float:
    """Gibbs mass of the row cylinder [i1 ... in]."""
    return expectation(sys, branch_function(sys, word), tol)


def _centered(sys: GibbsSystem, h: Observable) -> np.ndarray:
    return h.values - sys.integrate(h)


def _one_sided_series(sys: GibbsSystem, a_vals: np.ndarray, b_vals: np.ndarray,
                      tol: float, n_min: int = 1, max_iter: int = 5000):
    """sum_{n >= n_min} integral(a * Lhat^n(b - mean b)) against the Gibbs state.

    Truncates when sup|Lhat^n b~| falls below tol * (1 - r) / sup|a| with r the
    measured contraction ratio.  Raises NoConvergence if no spectral-gap
    contraction is observed.
    """
    wq = sys.left_weights * sys.right_values
    a = a_vals.reshape(-1)
    w = wq.reshape(-1)
    f = (b_vals - float(np.sum(wq * b_vals))).reshape(-1)
    sup_a = max(float(np.max(np.abs(a))), 1e-300)
    total = 0.0
    prev = float(np.max(np.abs(f)))
    ratio = 0.5
    for n in range(1, max_iter + 1):
        f = sys.normalized_matrix @ f
        f = f - float(np.sum(w * f))  # keep the iterate mean-free
        if n >= n_min:
            total += float(np.sum(w * a * f))
        cur = float(np.max(np.abs(f)))
        if prev > 0:
            r = cur / prev
            ratio = 0.5 * ratio + 0.5 * min(r, 0.999999)
        prev = cur
        if cur < tol * (1.0 - ratio) / sup_a:
            return total
        if n > 60 and ratio > 0.9999:
            raise NoConvergence("no spectral-gap contraction observed in correlation series")
    raise NoConvergence("correlation series did not truncate within the iteration budget")


def correlation_form(sys: GibbsSystem, h1: Observable, h2: Observable,
                     tol: float = 1e-11) -> float:
    """Asymptotic covariance of h1 and h2 under the Gibbs state.

    This is the bilinear form giving the derivative of Gibbs expectations and
    the second derivative of pressure:

        sigma(h1, h2) = Cov(h1, h2) + sum_{n>=1} [Cov(h1 o S^n, h2) + Cov(h2 o S^n, h1)],

    where Cov(h1 o S^n, h2) is evaluated by the duality with the normalized
    transfer operator.  For h1 = h2 this is the variance of the central limit
    theorem, hence nonnegative.
    """
    if tol <= 0:
        raise MalformedSpec("tol must be positive")
    c1 = _centered(sys, h1)
    c2 = _centered(sys, h2)
    cov0 = sys.integrate(Observable(grid=sys.grid, values=c1 * c2))
    return (cov0
            + _one_sided_series(sys, c1, c2, tol)
            + _one_sided_series(sys, c2, c1, tol))
