"""Level-n finite-dimensional variational problem.

Over a probability vector p on row words of length n, maximize

    lambda_n(p) + t_n(p)

where lambda_n is the entropy-over-log-contraction ratio built from the
certified vertical bounds beta_{i,n}, and t_n is the unique root in [0,1] of
sum_i p_i log(sum_j alpha_{ij,n}^t) = 0 built from the horizontal bounds
alpha_{ij,n}.  This gives dimension estimates independent of the transfer
operator route.
"""
from __future__ import annotations

import dataclasses
import itertools

import numpy as np

from .carpet import CarpetSpec
from .coding import composition_bounds
from .errors import IterationLimit, MalformedSpec, NoRootInUnitInterval


@dataclasses.dataclass
class LevelNProblem:
    n: int
    row_words: tuple            # all row words of length n, fixed order
    alpha: dict                 # full word -> certified horizontal bound
    beta: np.ndarray            # per row word, certified vertical bound
    p: np.ndarray               # probability vector over row_words
    cols: tuple                 # per row word, list of column-index tuples

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.shape != (len(self.row_words),):
            raise MalformedSpec("p must match the row-word table")
        if np.any(self.p < -1e-15) or abs(self.p.sum() - 1.0) > 1e-10:
            raise MalformedSpec("p must be a probability vector")
        if np.any(self.beta <= 0) or np.any(self.beta >= 1):
            raise MalformedSpec("beta table must lie in (0,1)")

    def alpha_rows(self):
        """List of alpha arrays, one per row word (over its column words)."""
        return [np.array([self.alpha[tuple(zip(w, js))] for js in self.cols[k]])
                for k, w in enumerate(self.row_words)]


def build_level_n(spec: CarpetSpec, n: int, p=None,
                  grid_points: int = 256) -> LevelNProblem:
    if n < 1:
        raise MalformedSpec("n must be >= 1")
    total = 1
    for _ in range(n):
        total *= spec.m
    if sum(np.prod([len(spec.row(i).cells) for i in w])
           for w in itertools.product(range(1, spec.m + 1), repeat=n)) > 4096:
        raise MalformedSpec("level-n table too large (> 4096 full words)")
    row_words = tuple(itertools.product(range(1, spec.m + 1), repeat=n))
    alpha = {}
    beta = np.empty(len(row_words))
    cols = []
    for k, w in enumerate(row_words):
        col_choices = tuple(itertools.product(
            *[range(1, len(spec.row(i).cells) + 1) for i in w]))
        cols.append(col_choices)
        b_val = None
        for js in col_choices:
            full = tuple(zip(w, js))
            a, b = composition_bounds(spec, full, grid_points)
            alpha[full] = a
            b_val = b
        beta[k] = b_val
    if p is None:
        p = np.full(len(row_words), 1.0 / len(row_words))
    return LevelNProblem(n=n, row_words=row_words, alpha=alpha, beta=beta,
                         p=np.asarray(p, dtype=float), cols=tuple(cols))


def lambda_n(prob: LevelNProblem) -> float:
    p = prob.p
    mask = p > 0
    if not mask.any():
        raise MalformedSpec("p has no positive entry")
    num = float(np.sum(p[mask] * np.log(p[mask])))
    den = float(np.sum(p * np.log(prob.beta)))
    return num / den


def _log_branch_sums(prob: LevelNProblem, t: float):
    """log(sum_j alpha_{ij}^t) per row word."""
    return np.array([float(np.log(np.sum(a ** t))) for a in prob.alpha_rows()])


def t_n_root(prob: LevelNProblem, tol: float = 1e-12) -> float:
    """Unique root in [0,1] of sum_i p_i log(sum_j alpha^t), by bisection."""
    f0 = float(prob.p @ _log_branch_sums(prob, 0.0))
    f1 = float(prob.p @ _log_branch_sums(prob, 1.0))
    if abs(f0) <= tol:
        return 0.0
    if f0 < 0 or f1 > tol:
        if f1 > tol:
            raise NoRootInUnitInterval(
                f"branch-sum mean still positive at t=1 ({f1:.3e})")
        raise NoRootInUnitInterval("branch-sum mean negative at t=0")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if float(prob.p @ _log_branch_sums(prob, mid)) > 0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    # Newton polish to machine precision (the bisection staircase otherwise
    # injects tol-sized noise into optimizer line searches)
    arows = prob.alpha_rows()
    for _ in range(3):
        f = float(prob.p @ _log_branch_sums(prob, t))
        df = float(prob.p @ np.array(
            [np.sum(a ** t * np.log(a)) / np.sum(a ** t) for a in arows]))
        t_new = min(max(t - f / df, 0.0), 1.0)
        if abs(t_new - t) < 1e-16:
            return t_new
        t = t_new
    return t


def bernoulli_weights_level_n(prob: LevelNProblem, word, t: float | None = None) -> float:
    """Weight of one level-n full word: p_i times the in-row alpha^t share."""
    word = tuple((int(i), int(j)) for i, j in word)
    if len(word) != prob.n:
        raise MalformedSpec(f"word must have length {prob.n}")
    w = tuple(i for i, _ in word)
    k = prob.row_words.index(w)
    if t is None:
        t = t_n_root(prob)
    a = np.array([prob.alpha[tuple(zip(w, js))] for js in prob.cols[k]])
    share = prob.alpha[word] ** t / float(np.sum(a ** t))
    return float(prob.p[k]) * share


def _objective_and_grad(prob: LevelNProblem, p: np.ndarray, tol: float):
    work = dataclasses.replace(prob, p=p)
    t = t_n_root(work, tol)
    lam = lambda_n(work)
    logb = np.log(prob.beta)
    num = float(np.sum(np.where(p > 0, p * np.log(np.maximum(p, 1e-300)), 0.0)))
    den = float(p @ logb)
    logp = np.log(np.maximum(p, 1e-300))
    glam = ((logp + 1.0) * den - num * logb) / den ** 2
    # implicit derivative of the root: dt/dp_i = -log A_i / sum_i' p_i' <log alpha>_i'
    logA = _log_branch_sums(work, t)
    means = np.array([float(np.sum(a ** t * np.log(a)) / np.sum(a ** t))
                      for a in prob.alpha_rows()])
    gt = -logA / float(p @ means)
    return lam + t, glam + gt, t


def optimize_level_n(spec: CarpetSpec, n: int, tol: float = 1e-8,
                     max_iter: int = 4000, seeds: int = 5):
    """Maximize lambda_n + t_n over the simplex by exponentiated-gradient
    ascent with implicit differentiation of t_n; multi-start (seeded Dirichlet
    draws plus uniform) and return the best (value, p_star, t_star)."""
    prob = build_level_n(spec, n)
    nwords = len(prob.row_words)
    rng = np.random.default_rng(0)
    starts = [np.full(nwords, 1.0 / nwords)]
    starts += [rng.dirichlet(np.ones(nwords)) for _ in range(seeds)]

    best = (-np.inf, None, None)
    for p0 in starts:
        p = np.maximum(p0, 1e-12)
        p /= p.sum()
        step = 1.0
        val, g, t = _objective_and_grad(prob, p, tol * 1e-3)
        for _ in range(max_iter):
            proj = g - float(p @ g)   # simplex-tangent gradient at p
            if float(np.max(np.abs(proj) * p)) <= tol:
                break
            q = p * np.exp(np.clip(step * proj, -50, 50))
            q /= q.sum()
            try:
                val_q, g_q, t_q = _objective_and_grad(prob, q, tol * 1e-3)
            except NoRootInUnitInterval:
                step *= 0.5
                continue
            if val_q >= val - 1e-15:
                p, val, g, t = q, val_q, g_q, t_q
                step = min(step * 1.3, 64.0)
            else:
                step *= 0.5
                if step < 1e-14:
                    break
        else:
            raise IterationLimit("exponentiated-gradient ascent hit max_iter")
        if val > best[0]:
            best = (val, p, t)
    return best
