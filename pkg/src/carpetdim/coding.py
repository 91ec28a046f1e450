"""Symbolic coding: words, tail coordinates, composition bounds, cylinder intervals.

Row words are tuples of 1-based row symbols; full words are tuples of (i, j)
pairs.  Infinite sequences are represented by eventually-periodic words: a
finite word is extended cyclically whenever more depth is needed.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .carpet import CarpetSpec
from .errors import MalformedSpec, NonContractive


@dataclasses.dataclass(frozen=True)
class TailCoordinate:
    z: float
    error_bound: float


def _certified_b_max(spec: CarpetSpec, grid_points: int = 256) -> float:
    y = np.linspace(0.0, 1.0, grid_points)
    h = y[1] - y[0]
    b_max = 0.0
    for row in spec.rows:
        db = row.b.deriv()
        b_max = max(b_max, float(np.max(np.abs(db(y)))) + db.lipschitz_bound() * h)
    return b_max


def tail_coordinate(spec: CarpetSpec, word, depth: int = 0, tol: float = 1e-12) -> TailCoordinate:
    """Point of the {b_i}-attractor coded by the word repeated cyclically.

    The truncation anchor is y = 1/2; the effective depth is raised until the
    contraction bound b_max^N drops below tol.
    """
    word = tuple(int(i) for i in word)
    if not word:
        raise MalformedSpec("tail_coordinate needs a nonempty word")
    if tol <= 0:
        raise MalformedSpec("tol must be positive")
    b_max = _certified_b_max(spec)
    if b_max >= 1.0:
        raise NonContractive(f"certified max |b'| = {b_max} >= 1")
    need = int(math.ceil(math.log(tol) / math.log(b_max))) + 1
    N = max(depth, len(word), need)
    z = 0.5
    for k in range(N - 1, -1, -1):
        z = float(spec.row(word[k % len(word)]).b(z))
    z = min(1.0, max(0.0, z))
    return TailCoordinate(z=z, error_bound=b_max ** N)


def _chain_points(spec: CarpetSpec, row_word, y):
    """Intermediate points z_k = b_{i_{k+1}} o ... o b_{i_n}(y), k = 1..n.

    y may be an array; returns a list of arrays, index 0 <-> k = 1.
    """
    n = len(row_word)
    pts = [None] * n
    cur = np.asarray(y, dtype=float)
    pts[n - 1] = cur
    for k in range(n - 1, 0, -1):
        cur = spec.row(row_word[k]).b(cur)
        pts[k - 1] = cur
    return pts


def composition_bounds(spec: CarpetSpec, word, grid_points: int = 256):
    """Certified upper bounds (alpha, beta) for the n-step contraction products.

    alpha bounds max over the square of the composed horizontal slope
    (the x-maximum is trivial: slopes do not depend on x), beta bounds
    max |d/dy of the composed row map|.  Grid maxima plus Lipschitz slack.
    """
    word = tuple((int(i), int(j)) for i, j in word)
    if not word:
        raise MalformedSpec("composition_bounds needs a nonempty word")
    rows = tuple(i for i, _ in word)
    y = np.linspace(0.0, 1.0, grid_points)
    h = y[1] - y[0]
    zs = _chain_points(spec, rows, y)

    alpha_prod = np.ones_like(y)
    beta_prod = np.ones_like(y)
    L_alpha = 0.0
    L_beta = 0.0
    for k, (i, j) in enumerate(word):
        cell = spec.cell(i, j)
        db = spec.row(i).b.deriv()
        alpha_prod *= np.abs(cell.a_tilde(zs[k]))
        beta_prod *= np.abs(db(zs[k]))
        # |dz_k/dy| = prod of later |b'| <= 1, and the other factors are < 1
        L_alpha += cell.a_tilde.lipschitz_bound()
        L_beta += db.lipschitz_bound()
    alpha = float(np.max(alpha_prod)) + L_alpha * h
    beta = float(np.max(beta_prod)) + L_beta * h
    return alpha, beta


def cylinder_interval(spec: CarpetSpec, word):
    """Exact endpoints of b_{i1} o ... o b_{in}([0,1])."""
    word = tuple(int(i) for i in word)
    if not word:
        raise MalformedSpec("cylinder_interval needs a nonempty word")
    lo, hi = 0.0, 1.0
    for i in reversed(word):
        b = spec.row(i).b
        e0, e1 = float(b(lo)), float(b(hi))
        lo, hi = (e0, e1) if e0 <= e1 else (e1, e0)
    return lo, hi


# --- CLI word serialization: "1 2 1" (row) and "1.1 2.2" (full) ---

def parse_row_word(text: str):
    try:
        return tuple(int(t) for t in text.split())
    except ValueError as e:
        raise MalformedSpec(f"bad row word {text!r}") from e


def parse_full_word(text: str):
    if not text.split():
        raise MalformedSpec("empty word")
    out = []
    for t in text.split():
        if "." not in t:
            raise MalformedSpec(f"bad full word symbol {t!r}, expected i.j")
        a, b = t.split(".", 1)
        try:
            out.append((int(a), int(b)))
        except ValueError as e:
            raise MalformedSpec(f"bad full word symbol {t!r}") from e
    return tuple(out)


def format_full_word(word) -> str:
    return " ".join(f"{i}.{j}" for i, j in word)
