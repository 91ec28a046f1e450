"""Carpet model: polynomials, hypothesis validation, constructors, perturbation, file I/O.

A carpet is an iterated function system f_ij(x, y) = (a_ij(y) * x + u_ij(y), b_i(y))
on the unit square, with m rows and m_i cells per row.  All one-dimensional
functions are polynomials in y, which gives exact derivatives and a decidable
grid-plus-Lipschitz-slack validation story.
"""
from __future__ import annotations

import dataclasses
import math
import re

import numpy as np

from .errors import InfeasibleLayout, MalformedSpec, PerturbationTooLarge

MAX_DEGREE = 16


@dataclasses.dataclass(frozen=True)
class Poly:
    """Polynomial c0 + c1*y + ... evaluated on [0, 1]."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if not c:
            raise MalformedSpec("polynomial needs at least one coefficient")
        if len(c) - 1 > MAX_DEGREE:
            raise MalformedSpec(f"polynomial degree {len(c) - 1} exceeds {MAX_DEGREE}")
        if not all(math.isfinite(x) for x in c):
            raise MalformedSpec("non-finite polynomial coefficient")
        object.__setattr__(self, "coeffs", c)

    def __call__(self, y):
        return np.polynomial.polynomial.polyval(y, self.coeffs)

    def deriv(self) -> "Poly":
        if len(self.coeffs) == 1:
            return Poly((0.0,))
        return Poly(tuple(k * c for k, c in enumerate(self.coeffs) if k > 0))

    def sup_bound(self) -> float:
        """Upper bound for sup_{[0,1]} |p| (coefficient sum)."""
        return sum(abs(c) for c in self.coeffs)

    def lipschitz_bound(self) -> float:
        """Upper bound for the Lipschitz constant of p on [0,1]."""
        return self.deriv().sup_bound()

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_constant(self) -> bool:
        return all(c == 0.0 for c in self.coeffs[1:])

    @staticmethod
    def const(c: float) -> "Poly":
        return Poly((c,))

    def __add__(self, other: "Poly") -> "Poly":
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [0.0] * (n - len(self.coeffs))
        b = list(other.coeffs) + [0.0] * (n - len(other.coeffs))
        return Poly(tuple(x + y for x, y in zip(a, b)))

    def __mul__(self, other):
        if isinstance(other, Poly):
            c = np.polynomial.polynomial.polymul(self.coeffs, other.coeffs)
            return Poly(tuple(c))
        return Poly(tuple(other * c for c in self.coeffs))

    __rmul__ = __mul__


@dataclasses.dataclass(frozen=True)
class CellSpec:
    a_tilde: Poly  # slope of x |-> a_tilde(y) x + u(y)
    u: Poly        # offset


@dataclasses.dataclass(frozen=True)
class RowSpec:
    b: Poly
    cells: tuple  # tuple[CellSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))


@dataclasses.dataclass(frozen=True)
class CarpetSpec:
    rows: tuple  # tuple[RowSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if not self.rows:
            raise MalformedSpec("carpet has no rows")
        if any(not r.cells for r in self.rows):
            raise MalformedSpec("carpet row with no cells")

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def m_list(self) -> tuple:
        return tuple(len(r.cells) for r in self.rows)

    def row(self, i: int) -> RowSpec:
        """1-based row access."""
        return self.rows[i - 1]

    def cell(self, i: int, j: int) -> CellSpec:
        """1-based cell access."""
        return self.rows[i - 1].cells[j - 1]

    def alphabet(self):
        """All (i, j) symbols, 1-based, row-major."""
        return [(i, j) for i in range(1, self.m + 1)
                for j in range(1, len(self.rows[i - 1].cells) + 1)]


@dataclasses.dataclass(frozen=True)
class Violation:
    hypothesis: str
    message: str
    y: float


@dataclasses.dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple
    grid_points: int

    def __bool__(self):
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return f"pass ({self.grid_points}-point grid, Lipschitz slack)"
        lines = [f"fail: {len(self.violations)} violation(s)"]
        for v in self.violations:
            lines.append(f"  ({v.hypothesis}) {v.message} at y={v.y:.6g}")
        return "\n".join(lines)


@dataclasses.dataclass(frozen=True)
class DominationConstants:
    lam: float  # max |a_tilde| / |b'| over the square, certified < 1
    C: float    # vertical-graph distortion bound


def _abs_lipschitz(p: Poly) -> float:
    # Lipschitz bound for y |-> |p(y)|
    return p.lipschitz_bound()


def validate_carpet(spec: CarpetSpec, grid_points: int = 256) -> ValidationReport:
    """Check the carpet hypotheses on a y-grid with derivative-slack margins.

    Each strict inequality must hold with margin >= L*h where h is the grid
    spacing and L a coefficient-based Lipschitz bound of the tested expression,
    so a passing report certifies the inequality on all of [0, 1].
    """
    if not isinstance(spec, CarpetSpec):
        raise MalformedSpec("not a CarpetSpec")
    if grid_points < 2:
        raise MalformedSpec("grid_points must be >= 2")

    viols = []
    y = np.linspace(0.0, 1.0, grid_points)
    h = y[1] - y[0]

    if spec.m < 2:
        viols.append(Violation("H2", f"need at least 2 rows, got {spec.m}", 0.0))
    if max(spec.m_list) < 2:
        viols.append(Violation("H3", "every fiber needs >= 2 points: some row must have >= 2 cells", 0.0))

    def first_bad(mask):
        return float(y[np.argmax(mask)])

    # (H2): {b_i} is a simple function system.
    images = []
    for i, row in enumerate(spec.rows, start=1):
        db = row.b.deriv()
        dv = np.abs(db(y))
        slack = _abs_lipschitz(db) * h
        if np.any(dv <= slack):
            viols.append(Violation("H2", f"|b_{i}'| not certified > 0", first_bad(dv <= slack)))
        if np.any(dv >= 1.0 - slack):
            viols.append(Violation("H2", f"|b_{i}'| not certified < 1", first_bad(dv >= 1.0 - slack)))
        lo, hi = sorted((float(row.b(0.0)), float(row.b(1.0))))
        if lo < -1e-15 or hi > 1.0 + 1e-15:
            viols.append(Violation("H2", f"b_{i}([0,1]) = [{lo:.6g},{hi:.6g}] not inside [0,1]", 0.0))
        images.append((lo, hi, i))
    images.sort()
    for (lo1, hi1, i1), (lo2, hi2, i2) in zip(images, images[1:]):
        if hi1 >= lo2:
            viols.append(Violation("H2", f"images of b_{i1} and b_{i2} overlap", 0.0))

    # (H3): each row's fiber maps form a simple function system, for every y.
    for i, row in enumerate(spec.rows, start=1):
        for j, cell in enumerate(row.cells, start=1):
            av = np.abs(cell.a_tilde(y))
            slack = _abs_lipschitz(cell.a_tilde) * h
            if np.any(av <= slack):
                viols.append(Violation("H3", f"|a_{i}{j}| not certified > 0", first_bad(av <= slack)))
            if np.any(av >= 1.0 - slack):
                viols.append(Violation("H3", f"|a_{i}{j}| not certified < 1", first_bad(av >= 1.0 - slack)))
        # image intervals at each grid y, with slack certification
        los, his = [], []
        for cell in row.cells:
            e0 = cell.u(y)
            e1 = cell.u(y) + cell.a_tilde(y)
            los.append(np.minimum(e0, e1))
            his.append(np.maximum(e0, e1))
        L_img = [cell.u.lipschitz_bound() + cell.a_tilde.lipschitz_bound() for cell in row.cells]
        for j, (lo, hi) in enumerate(zip(los, his), start=1):
            s = L_img[j - 1] * h
            # containment is non-strict; constants certify exactly (s = 0)
            if np.any(lo < -s - 1e-15) or np.any(hi > 1.0 + s + 1e-15):
                bad = (lo < -s - 1e-15) | (hi > 1.0 + s + 1e-15)
                viols.append(Violation("H3", f"cell ({i},{j}) image leaves [0,1]", first_bad(bad)))
        # pairwise disjointness at each y
        order = np.argsort([float(np.mean(l)) for l in los])
        for a, b in zip(order, order[1:]):
            gap = los[b] - his[a]
            s = (L_img[a] + L_img[b]) * h
            if np.any(gap <= s):
                viols.append(Violation(
                    "H3", f"cells ({i},{a + 1}) and ({i},{b + 1}) images not certified disjoint",
                    first_bad(gap <= s)))

    # (H4): horizontal contraction strictly dominated by vertical, pointwise.
    for i, row in enumerate(spec.rows, start=1):
        db = row.b.deriv()
        bv = np.abs(db(y))
        for j, cell in enumerate(row.cells, start=1):
            av = np.abs(cell.a_tilde(y))
            margin = bv - av
            slack = (_abs_lipschitz(db) + _abs_lipschitz(cell.a_tilde)) * h
            if np.any(margin <= slack):
                viols.append(Violation(
                    "H4", f"|a_{i}{j}| not certified < |b_{i}'|", first_bad(margin <= slack)))

    return ValidationReport(ok=not viols, violations=tuple(viols), grid_points=grid_points)


def domination_constants(spec: CarpetSpec, grid_points: int = 512) -> DominationConstants:
    """Certified upper bounds for the domination ratio and distortion constant.

    lam bounds max |a_tilde(y)| / |b_i'(y)|; C = (1-lam)^-1 * max |d_y a(x,y)| / |b'(y)|
    (maximum over x in {0,1}, since a is affine in x).  Grid maxima plus
    Lipschitz slack, so both are upper bounds of the true suprema.
    """
    y = np.linspace(0.0, 1.0, grid_points)
    h = y[1] - y[0]
    lam = 0.0
    dist = 0.0
    for row in spec.rows:
        db = row.b.deriv()
        bv = np.abs(db(y))
        L_b = _abs_lipschitz(db)
        b_min = float(np.min(bv)) - L_b * h
        if b_min <= 0:
            b_min = float(np.min(bv)) * 0.5  # defensive; validation already certifies > 0
        for cell in row.cells:
            av = np.abs(cell.a_tilde(y))
            ratio = float(np.max(av / bv))
            L_a = _abs_lipschitz(cell.a_tilde)
            a_max = float(np.max(av)) + L_a * h
            L_ratio = (L_a * float(np.max(bv)) + a_max * L_b) / (b_min * b_min)
            lam = max(lam, ratio + L_ratio * h)
            # d_y a(x,y) = a_tilde'(y) x + u'(y), extremal at x in {0,1}
            da, du = cell.a_tilde.deriv(), cell.u.deriv()
            for xv in (0.0, 1.0):
                g = np.abs(da(y) * xv + du(y))
                Lg = da.lipschitz_bound() + du.lipschitz_bound()
                g_max = float(np.max(g)) + Lg * h
                r = float(np.max(g / bv))
                Lr = (Lg * float(np.max(bv)) + g_max * L_b) / (b_min * b_min)
                dist = max(dist, r + Lr * h)
    C = dist / (1.0 - lam) if lam < 1.0 else math.inf
    return DominationConstants(lam=lam, C=C)


def make_sierpinski(a: float, b: float, m_list, gaps: str = "even") -> CarpetSpec:
    """Constant-slope carpet with strict, deterministically distributed gaps.

    Rows are flush against 0 and 1 with the leftover split evenly over the
    inner gaps.  Within a row, half the leftover goes to the inner gaps
    (evenly) and the other half to the margins in ratio 1 : m_i.
    """
    if gaps != "even":
        raise InfeasibleLayout(f"unknown layout rule {gaps!r}")
    m_list = tuple(int(x) for x in m_list)
    m = len(m_list)
    if not (0.0 < a < b < 1.0):
        raise InfeasibleLayout(f"need 0 < a < b < 1, got a={a}, b={b}")
    if m < 2:
        raise InfeasibleLayout("need at least 2 rows")
    if any(mi < 1 for mi in m_list):
        raise InfeasibleLayout("each row needs at least one cell")
    if max(m_list) < 2:
        raise InfeasibleLayout("some row must have at least 2 cells")
    if m * b >= 1.0:
        raise InfeasibleLayout(f"{m} rows of height {b} leave no room for gaps")

    row_gap = (1.0 - m * b) / (m - 1)
    rows = []
    for i, mi in enumerate(m_list):
        G = 1.0 - mi * a
        if G <= 0.0:
            raise InfeasibleLayout(f"{mi} cells of width {a} exceed [0,1]")
        v_i = i * (b + row_gap)
        if mi == 1:
            us = [G / 2.0]
        else:
            g0 = G / (2.0 * (mi + 1))
            gi = G / (2.0 * (mi - 1))
            us = [g0 + j * (a + gi) for j in range(mi)]
        cells = tuple(CellSpec(a_tilde=Poly.const(a), u=Poly.const(u)) for u in us)
        rows.append(RowSpec(b=Poly((v_i, b)), cells=cells))
    spec = CarpetSpec(tuple(rows))
    rep = validate_carpet(spec)
    if not rep.ok:
        raise InfeasibleLayout("layout fails validation: " + rep.summary())
    return spec


def holder_proxies(spec: CarpetSpec, grid_points: int = 512):
    """Derivative-based seminorm proxies of the two dimension potentials.

    Returns (phi_seminorm, psi_seminorm): grid maxima of |d/dy log|a_ij(y)|| and
    |d/dy log|b_i'(y)||.  Zero exactly for constant-slope carpets.
    """
    y = np.linspace(0.0, 1.0, grid_points)
    phi_s = 0.0
    psi_s = 0.0
    for row in spec.rows:
        db = row.b.deriv()
        psi_s = max(psi_s, float(np.max(np.abs(db.deriv()(y) / db(y)))))
        for cell in row.cells:
            da = cell.a_tilde
            phi_s = max(phi_s, float(np.max(np.abs(da.deriv()(y) / da(y)))))
    return phi_s, psi_s


@dataclasses.dataclass(frozen=True)
class PerturbResult:
    spec: CarpetSpec
    holder_proxy: float  # max |d/dy log a_ij| after perturbation
    attempts: int        # how many offset rescales were needed
    offset_scale: float  # final scale applied to the offset perturbations


def _random_bounded_poly(rng, degree: int) -> Poly:
    """Random polynomial with sup-norm exactly 1 on [0,1]."""
    c = rng.standard_normal(degree + 1)
    p = Poly(tuple(c))
    grid = np.linspace(0.0, 1.0, 512)
    s = float(np.max(np.abs(p(grid))))
    return Poly(tuple(x / s for x in c))


def perturb_carpet(spec: CarpetSpec, epsilon: float, seed: int,
                   degree: int = 4, attempts: int = 8) -> PerturbResult:
    """Multiply each slope by (1 + eps*q(y)) and shift each offset by eps*r(y).

    q, r are seeded random polynomials with sup-norm 1.  If validation fails,
    the offset perturbations are halved and retried; the slope factors are kept
    fixed, so slope-level violations (domination, sign) are not papered over.
    """
    if epsilon == 0.0:
        phi_s, _ = holder_proxies(spec)
        return PerturbResult(spec=spec, holder_proxy=phi_s, attempts=0, offset_scale=0.0)
    rng = np.random.default_rng(seed)
    qs, rs = [], []
    for row in spec.rows:
        qs.append([_random_bounded_poly(rng, degree) for _ in row.cells])
        rs.append([_random_bounded_poly(rng, degree) for _ in row.cells])
    for k in range(attempts):
        scale = 0.5 ** k
        rows = []
        for ri, row in enumerate(spec.rows):
            cells = []
            for ci, cell in enumerate(row.cells):
                one_plus = Poly.const(1.0) + epsilon * qs[ri][ci]
                new_a = cell.a_tilde * one_plus
                new_u = cell.u + (epsilon * scale) * rs[ri][ci]
                cells.append(CellSpec(a_tilde=new_a, u=new_u))
            rows.append(RowSpec(b=row.b, cells=tuple(cells)))
        cand = CarpetSpec(tuple(rows))
        if validate_carpet(cand).ok:
            phi_s, _ = holder_proxies(cand)
            return PerturbResult(spec=cand, holder_proxy=phi_s, attempts=k + 1, offset_scale=scale)
    raise PerturbationTooLarge(
        f"epsilon={epsilon} failed validation after {attempts} offset rescales")


def coefficient_distance(s1: CarpetSpec, s2: CarpetSpec) -> float:
    """Max abs difference between aligned polynomial coefficients of two carpets."""
    if s1.m_list != s2.m_list:
        raise MalformedSpec("carpets have different alphabets")

    def pdist(p: Poly, q: Poly) -> float:
        n = max(len(p.coeffs), len(q.coeffs))
        a = list(p.coeffs) + [0.0] * (n - len(p.coeffs))
        b = list(q.coeffs) + [0.0] * (n - len(q.coeffs))
        return max(abs(x - y) for x, y in zip(a, b))

    d = 0.0
    for r1, r2 in zip(s1.rows, s2.rows):
        d = max(d, pdist(r1.b, r2.b))
        for c1, c2 in zip(r1.cells, r2.cells):
            d = max(d, pdist(c1.a_tilde, c2.a_tilde), pdist(c1.u, c2.u))
    return d


# ---------------------------------------------------------------------------
# Carpet file format (line-oriented, '#' comments):
#   carpet v1
#   row <i> b: <c0> <c1> ...
#   cell <i> <j> a: <c0> ... ; u: <c0> ...

_FLOAT = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _parse_floats(tokens) -> Poly:
    vals = []
    for t in tokens:
        if not _FLOAT.match(t):
            raise MalformedSpec(f"bad number {t!r} in carpet file")
        vals.append(float(t))
    return Poly(tuple(vals))


def parse_carpet(text: str) -> CarpetSpec:
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines or lines[0] != "carpet v1":
        raise MalformedSpec("missing 'carpet v1' header")
    row_b = {}
    cells = {}
    for line in lines[1:]:
        parts = line.split()
        if parts[0] == "row":
            if len(parts) < 4 or parts[2] != "b:":
                raise MalformedSpec(f"bad row line: {line!r}")
            i = int(parts[1])
            row_b[i] = _parse_floats(parts[3:])
        elif parts[0] == "cell":
            if len(parts) < 5 or parts[3] != "a:":
                raise MalformedSpec(f"bad cell line: {line!r}")
            i, j = int(parts[1]), int(parts[2])
            rest = " ".join(parts[4:])
            if ";" not in rest:
                raise MalformedSpec(f"cell line missing ';': {line!r}")
            a_part, u_part = rest.split(";", 1)
            u_part = u_part.strip()
            if not u_part.startswith("u:"):
                raise MalformedSpec(f"cell line missing 'u:': {line!r}")
            a_poly = _parse_floats(a_part.split())
            u_poly = _parse_floats(u_part[2:].split())
            cells[(i, j)] = CellSpec(a_tilde=a_poly, u=u_poly)
        else:
            raise MalformedSpec(f"unknown directive {parts[0]!r}")
    if not row_b:
        raise MalformedSpec("carpet file has no rows")
    m = max(row_b)
    if sorted(row_b) != list(range(1, m + 1)):
        raise MalformedSpec("row indices must be 1..m without gaps")
    rows = []
    for i in range(1, m + 1):
        js = sorted(j for (ri, j) in cells if ri == i)
        if not js:
            raise MalformedSpec(f"row {i} has no cells")
        if js != list(range(1, len(js) + 1)):
            raise MalformedSpec(f"cell indices in row {i} must be 1..m_i")
        rows.append(RowSpec(b=row_b[i], cells=tuple(cells[(i, j)] for j in js)))
    return CarpetSpec(tuple(rows))


def format_carpet(spec: CarpetSpec) -> str:
    def fmt(p: Poly) -> str:
        return " ".join(repr(c) for c in p.coeffs)

    out = ["carpet v1"]
    for i, row in enumerate(spec.rows, start=1):
        out.append(f"row {i} b: {fmt(row.b)}")
    for i, row in enumerate(spec.rows, start=1):
        for j, cell in enumerate(row.cells, start=1):
            out.append(f"cell {i} {j} a: {fmt(cell.a_tilde)} ; u: {fmt(cell.u)}")
    return "\n".join(out) + "\n"


def read_carpet(path) -> CarpetSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_carpet(fh.read())


def write_carpet(spec: CarpetSpec, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_carpet(spec))
