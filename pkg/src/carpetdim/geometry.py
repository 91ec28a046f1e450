"""Geometric cross-checks: region rendering, Monte-Carlo box counting, and
the vertical-graph distortion propagation bound."""
from __future__ import annotations

import dataclasses
import itertools

import numpy as np

from .carpet import CarpetSpec, domination_constants
from .errors import MalformedSpec, TooDeep

BOUNDARY_POINTS = 16


@dataclasses.dataclass(frozen=True)
class Region:
    word: tuple                 # ((i1, j1), ..., (in, jn))
    x0: float
    y0: float
    x1: float
    y1: float
    left: np.ndarray            # (16, 2) polyline, left vertical boundary
    right: np.ndarray           # (16, 2) polyline, right vertical boundary


def _apply_map(spec: CarpetSpec, i: int, j: int, x, y):
    cell = spec.cell(i, j)
    return cell.a_tilde(y) * x + cell.u(y), spec.row(i).b(y)


def _region_for(spec: CarpetSpec, word) -> Region:
    y = np.linspace(0.0, 1.0, BOUNDARY_POINTS)
    xl = np.zeros_like(y)
    xr = np.ones_like(y)
    # compose innermost-first: image of the square under f_{i1 j1} o ... o f_{in jn}
    for i, j in reversed(word):
        xl, yl = _apply_map(spec, i, j, xl, y)
        xr, _ = _apply_map(spec, i, j, xr, y)
        y = yl
    x0 = float(min(xl.min(), xr.min()))
    x1 = float(max(xl.max(), xr.max()))
    return Region(word=tuple(word), x0=x0, y0=float(y[0]), x1=x1, y1=float(y[-1]),
                  left=np.column_stack([xl, y]), right=np.column_stack([xr, y]))


def render_regions(spec: CarpetSpec, depth: int):
    """All depth-n regions (images of the unit square), with 16-point
    polylines for the two curved vertical boundaries."""
    if depth < 1:
        raise MalformedSpec("depth must be >= 1")
    n_leaves = len(spec.alphabet()) ** depth
    if n_leaves > 10 ** 6:
        raise TooDeep(f"{n_leaves} regions at depth {depth} exceeds the 1e6 cap")
    return [_region_for(spec, w)
            for w in itertools.product(spec.alphabet(), repeat=depth)]


def regions_to_csv(regions) -> str:
    lines = ["word,x0,y0,x1,y1"]
    for r in regions:
        w = " ".join(f"{i}.{j}" for i, j in r.word)
        lines.append(f"{w},{r.x0!r},{r.y0!r},{r.x1!r},{r.y1!r}")
    return "\n".join(lines) + "\n"


def sample_points(spec: CarpetSpec, samples: int, depth: int, seed: int):
    """Points of the attractor via seeded random symbol strings of the given
    depth, evaluated by backward composition (vectorized over samples)."""
    rng = np.random.default_rng(seed)
    letters = spec.alphabet()
    idx = rng.integers(0, len(letters), size=(samples, depth))
    arr = np.array(letters)  # (L, 2)
    x = np.full(samples, 0.5)
    y = np.full(samples, 0.5)
    for k in range(depth - 1, -1, -1):
        ii = arr[idx[:, k], 0]
        jj = arr[idx[:, k], 1]
        xn = np.empty_like(x)
        yn = np.empty_like(y)
        for i in range(1, spec.m + 1):
            row = spec.row(i)
            sel_row = ii == i
            yn[sel_row] = row.b(y[sel_row])
            for j in range(1, len(row.cells) + 1):
                sel = sel_row & (jj == j)
                if not sel.any():
                    continue
                cell = row.cells[j - 1]
                xn[sel] = cell.a_tilde(y[sel]) * x[sel] + cell.u(y[sel])
        x, y = xn, yn
    return x, y


def box_count(spec: CarpetSpec, samples: int, depth: int, scales, seed: int):
    """Monte-Carlo box-counting estimate: least-squares slope of log N(r)
    against log(1/r) over the given scales.  Returns (estimate, counts)."""
    if samples < 10 ** 4:
        raise MalformedSpec("need at least 1e4 samples")
    x, y = sample_points(spec, samples, depth, seed)
    scales = [float(s) for s in scales]
    counts = []
    for r in scales:
        bx = np.minimum((x / r).astype(np.int64), int(1 / r))
        by = np.minimum((y / r).astype(np.int64), int(1 / r))
        counts.append(int(np.unique(bx * (int(1 / r) + 2) + by).size))
    logs = np.log(1.0 / np.array(scales))
    logn = np.log(np.array(counts, dtype=float))
    slope = float(np.polyfit(logs, logn, 1)[0])
    return slope, list(zip(scales, counts))


def vertical_graph_distortion_check(spec: CarpetSpec, trials: int, depth: int,
                                    seed: int, n_y: int = 64):
    """Propagate the derivative of vertical graphs x = F(y) through random
    composition chains and compare the max slope against the domination
    constant C.

    One application of f_ij maps the graph of F to the graph of
    G(y) = a_ij(F(z), z) with z = b_i^{-1}(y), so by the chain rule
    G'(y) = (a~_ij(z) F'(z) + a~_ij'(z) F(z) + u_ij'(z)) / b_i'(z).
    """
    if trials < 1:
        raise MalformedSpec("trials must be >= 1")
    dc = domination_constants(spec)
    rng = np.random.default_rng(seed)
    letters = spec.alphabet()
    max_seen = 0.0
    for _ in range(trials):
        which = rng.integers(0, len(letters), size=depth)
        for f0 in (0.0, 1.0):
            # track (y, F(y), F'(y)) triples on the evolving graph; each map
            # is evaluated at the pre-image coordinate, i.e. the current y
            y = np.linspace(0.0, 1.0, n_y)
            F = np.full(n_y, f0)
            Fp = np.zeros(n_y)
            for k in which:
                i, j = letters[k]
                cell = spec.cell(i, j)
                a = cell.a_tilde(y)
                Fp = (a * Fp + cell.a_tilde.deriv()(y) * F + cell.u.deriv()(y)) \
                    / spec.row(i).b.deriv()(y)
                F = a * F + cell.u(y)
                y = spec.row(i).b(y)
                max_seen = max(max_seen, float(np.max(np.abs(Fp))))
    ok = max_seen <= dc.C + 1e-9
    return max_seen, dc.C, ok
