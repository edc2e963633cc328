"""Piecewise-affine functions on the cable systems and exact mu-integration.

A level-n piecewise-affine (PA) function is determined by its values on the
level-n vertex set: it is affine in arclength along every level-n edge and,
on each subtree hanging off the level-n skeleton, constant equal to the value
at the attachment point.  Restricted to any deeper cell, such a function is
again PA of the lowest order, so a 5x5 refinement matrix per child digit
transports value quintuples (v1..v4, v5) down the cell tree; everything here
(evaluation, interpolation, pullback, integration) runs on that recursion.

Integrals against the self-similar measure mu are computed in closed form
for integer powers, using exact arm moments of the elementary tent profile;
sign-changing odd powers and non-integer powers fall back to certified
two-sided brackets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from vicsek.geometry import (
    OPPOSITE,
    CableGraph,
    address_digits,
    bfs_distance_units,
    build_graph,
    check_word,
    distance,
    word_index,
)

# ---------------------------------------------------------------------------
# Refinement matrices
# ---------------------------------------------------------------------------


def _refinement_matrices() -> dict[int, tuple[tuple[Fraction, ...], ...]]:
    """R_d maps a cell's value quintuple to the quintuple of child d.

    Central child: each corner moves 2/3 of the way toward the center,
    v'_j = (v_j + 2 v_5)/3, and keeps the center.  Corner child i: keeps its
    corner v_i, its opposite corner sits at arclength 2/3 along the arm,
    v' = (v_i + 2 v_5)/3, and its center and lateral corners sit at arclength
    1/3 (the laterals hang off the child's center), v' = (2 v_i + v_5)/3.
    """
    mats: dict[int, list[list[Fraction]]] = {}
    third = Fraction(1, 3)
    for d in range(1, 6):
        rows = [[Fraction(0)] * 5 for _ in range(5)]
        if d == 5:
            for j in range(4):
                rows[j][j] = third
                rows[j][4] = 2 * third
            rows[4][4] = Fraction(1)
        else:
            i = d - 1
            opp = OPPOSITE[d] - 1
            rows[i][i] = Fraction(1)
            rows[opp][i] = third
            rows[opp][4] = 2 * third
            for j in range(4):
                if j not in (i, opp):
                    rows[j][i] = 2 * third
                    rows[j][4] = third
            rows[4][i] = 2 * third
            rows[4][4] = third
        mats[d] = rows
    return {d: tuple(tuple(r) for r in rows) for d, rows in mats.items()}


REFINE = _refinement_matrices()
REFINE_F = {d: np.array(m, dtype=np.float64) for d, m in REFINE.items()}


def _apply_refine_exact(mat, v: tuple) -> tuple:
    return tuple(sum(row[j] * v[j] for j in range(5)) for row in mat)


# ---------------------------------------------------------------------------
# PA functions
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class PAFunction:
    """A level-n piecewise-affine function, stored by its vertex values.

    `values` follows the vertex order of build_graph(level); `exact_values`
    optionally carries the same data as rationals, and is propagated through
    every exact-preserving operation.
    """

    level: int
    values: np.ndarray
    exact_values: tuple | None = None

    # -- construction -------------------------------------------------------

    @staticmethod
    def from_vertex_values(level: int, values, exact=None) -> "PAFunction":
        arr = np.asarray(values, dtype=np.float64)
        g = build_graph(level)
        if arr.shape != (g.n_vertices,):
            raise ValueError(f"expected {g.n_vertices} vertex values, got {arr.shape}")
        if exact is not None:
            exact = tuple(Fraction(x) for x in exact)
            if len(exact) != g.n_vertices:
                raise ValueError("exact values must match the vertex count")
        return PAFunction(level, arr, exact)

    @staticmethod
    def from_key_values(corner_values, center_value) -> "PAFunction":
        """Level-0 PA function from four corner values and a center value."""
        vals = [Fraction(v) for v in corner_values] + [Fraction(center_value)]
        g = build_graph(0)
        out = np.empty(5, dtype=np.float64)
        exact = [None] * 5
        for j in range(1, 6):
            i = g.cell_vertices[0, j - 1]
            out[i] = float(vals[j - 1])
            exact[i] = vals[j - 1]
        return PAFunction(0, out, tuple(exact))

    @staticmethod
    def from_cell_values(level: int, quintuples: np.ndarray, exact_quintuples=None) -> "PAFunction":
        """Assemble vertex values from per-cell quintuples (continuity makes
        overlapping assignments agree)."""
        g = build_graph(level)
        vals = np.empty(g.n_vertices, dtype=np.float64)
        arr = np.asarray(quintuples, dtype=np.float64)
        for j in range(5):
            vals[g.cell_vertices[:, j]] = arr[:, j]
        exact = None
        if exact_quintuples is not None:
            ex = [None] * g.n_vertices
            for w in range(len(exact_quintuples)):
                for j in range(5):
                    ex[g.cell_vertices[w, j]] = Fraction(exact_quintuples[w][j])
            exact = tuple(ex)
        return PAFunction(level, vals, exact)

    # -- basic structure ------------------------------------------------------

    @property
    def graph(self) -> CableGraph:
        return build_graph(self.level)

    def is_exact(self) -> bool:
        return self.exact_values is not None

    def value_range(self) -> tuple[float, float]:
        return float(self.values.min()), float(self.values.max())

    # -- arithmetic -----------------------------------------------------------

    def _binary(self, other, op) -> "PAFunction":
        if isinstance(other, PAFunction):
            if other.level != self.level:
                lvl = max(self.level, other.level)
                return op(self.refine(lvl), other.refine(lvl))
            exact = None
            if self.exact_values is not None and other.exact_values is not None:
                exact = tuple(
                    op(a, b) for a, b in zip(self.exact_values, other.exact_values)
                )
            return PAFunction(self.level, op(self.values, other.values), exact)
        c = Fraction(other) if not isinstance(other, float) else other
        exact = None
        if self.exact_values is not None and not isinstance(other, float):
            exact = tuple(op(a, c) for a in self.exact_values)
        return PAFunction(self.level, op(self.values, float(c)), exact)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __mul__(self, scalar):
        return self._binary(scalar, lambda a, b: a * b)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    # -- refinement and evaluation ---------------------------------------------

    def cell_values(self, level: int, exact: bool = False):
        """Per-cell value quintuples (5^level, 5) at any level >= self.level.

        Column order is (q1, q2, q3, q4, q5).  The exact variant returns a
        list of tuples of Fractions.
        """
        n = self.level
        if level < n:
            raise ValueError(f"cell values need level >= {n}")
        g = self.graph
        if exact:
            if self.exact_values is None:
                raise ValueError("function carries no exact values")
            ev = self.exact_values
            V = [tuple(ev[g.cell_vertices[w, j]] for j in range(5)) for w in range(5**n)]
            for _ in range(n, level):
                V = [
                    _apply_refine_exact(REFINE[d], v)
                    for v in V
                    for d in range(1, 6)
                ]
            return V
        V = self.values[g.cell_vertices]
        for _ in range(n, level):
            new = np.empty((V.shape[0] * 5, 5), dtype=np.float64)
            for d in range(1, 6):
                new[d - 1::5] = V @ REFINE_F[d].T
            V = new
        return V

    def refine(self, level: int) -> "PAFunction":
        """The same function represented on the level-`level` vertex set."""
        if level == self.level:
            return self
        if level < self.level:
            raise ValueError("refinement level must be >= the current level")
        exact_q = self.cell_values(level, exact=True) if self.is_exact() else None
        return PAFunction.from_cell_values(level, self.cell_values(level), exact_q)

    def _descend(self, point, want_exact: bool):
        L = max(self.level, point.m)
        word, key = address_digits(point, L)
        g = self.graph
        base_cell = word_index(word[: self.level])
        if want_exact:
            v = tuple(
                self.exact_values[g.cell_vertices[base_cell, j]] for j in range(5)
            )
            for d in word[self.level:]:
                v = _apply_refine_exact(REFINE[d], v)
        else:
            v = self.values[g.cell_vertices[base_cell]]
            for d in word[self.level:]:
                v = REFINE_F[d] @ v
        return v[key - 1]

    def evaluate(self, point) -> float:
        return float(self._descend(point, False))

    def evaluate_exact(self, point) -> Fraction:
        if self.exact_values is None:
            raise ValueError("function carries no exact values")
        return self._descend(point, True)

    def evaluate_edge(self, level: int, edge_id: int, t) -> float:
        """Value at arclength fraction t in [0, 1] along a level-`level` edge
        (oriented rootward-to-leafward); exact affine interpolation."""
        if not 0 <= float(t) <= 1:
            raise ValueError("edge parameter must be in [0, 1]")
        if level < self.level:
            raise ValueError("edge evaluation needs level >= the function level")
        f = self.refine(level) if level > self.level else self
        g = f.graph
        lo, hi = int(g.edges_lo[edge_id]), int(g.edges_hi[edge_id])
        return (1.0 - float(t)) * float(f.values[lo]) + float(t) * float(f.values[hi])

    # -- restriction / pullback -------------------------------------------------

    def pullback(self, word) -> "PAFunction":
        """The composition f . Psi_w, a PA function of level max(n-|w|, 0)."""
        word = check_word(word)
        k = len(word)
        L = max(self.level, k)
        span = 5 ** (L - k)
        base = word_index(word) * span
        V = self.cell_values(L)[base:base + span]
        exact_q = None
        if self.is_exact():
            exact_q = self.cell_values(L, exact=True)[base:base + span]
        return PAFunction.from_cell_values(L - k, V, exact_q)

    def restrict(self, word) -> "PAFunction":
        """Alias of pullback: the restriction to cell w in cell coordinates."""
        return self.pullback(word)

    def mean(self) -> float:
        """Integral of f against mu (exact 7-point rule per cell)."""
        V = self.cell_values(self.level)
        per_cell = (V[:, :4].sum(axis=1) + 3.0 * V[:, 4]) / 7.0
        return float(per_cell.mean() if len(per_cell) else 0.0)

    def mean_exact(self) -> Fraction:
        V = self.cell_values(self.level, exact=True)
        n_cells = 5**self.level
        total = Fraction(0)
        for v in V:
            total += (v[0] + v[1] + v[2] + v[3] + 3 * v[4]) / 7
        return total / n_cells


def interpolate(f: PAFunction, level: int) -> PAFunction:
    """Piecewise-affine interpolation of f on the level-`level` skeleton."""
    return f.refine(level)


def cross_function() -> PAFunction:
    """The mean-zero level-0 PA function with value 1 at corners q2 and q4,
    -1 at q1 and q3, and 0 at the center: +1 tents on one diagonal's arms,
    -1 tents on the other's.  Every edge carries a unit increment, so all its
    discrete p-energies equal 4 at every level."""
    return PAFunction.from_key_values([-1, 1, -1, 1], 0)


def tent_bouquet() -> PAFunction:
    """The level-0 PA function equal to 1 at all four corners and 0 at the
    center (the common tent profile on every arm, mean 4/7)."""
    return PAFunction.from_key_values([1, 1, 1, 1], 0)


def random_pa(level: int, seed: int = 0) -> PAFunction:
    """A PA function with independent uniform [0,1) vertex values."""
    g = build_graph(level)
    rng = np.random.default_rng(seed)
    vals = rng.random(g.n_vertices)
    exact = tuple(Fraction(float(v)) for v in vals)
    return PAFunction(level, vals, exact)


def vertex_hat(level: int, vertex_id: int) -> PAFunction:
    """The level-n hat: 1 at one vertex, 0 at every other level-n vertex."""
    g = build_graph(level)
    vals = np.zeros(g.n_vertices)
    vals[vertex_id] = 1.0
    exact = tuple(
        Fraction(1) if i == vertex_id else Fraction(0) for i in range(g.n_vertices)
    )
    return PAFunction(level, vals, exact)


def distance_function(level: int, source=None) -> PAFunction:
    """The geodesic distance to `source` (default: the center of K), which is
    affine on every level-m edge and hence an exact level-m PA function."""
    g = build_graph(level)
    if source is None:
        units = g.depth
    else:
        units = bfs_distance_units(g, g.index_of(source))
    den = 3**level
    vals = units.astype(np.float64) / float(den)
    exact = tuple(Fraction(int(u), den) for u in units)
    return PAFunction(level, vals, exact)


# ---------------------------------------------------------------------------
# Cell functions and edge densities
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class CellFunction:
    """A function constant on each level-m cell (cells in word order)."""

    level: int
    values: np.ndarray

    def mu_integral(self) -> float:
        return float(self.values.mean())

    def value_at(self, word) -> float:
        return float(self.values[word_index(check_word(word))])


def anchor_cell_function(f: PAFunction, level: int) -> CellFunction:
    """Sample f at each level-m cell's attachment vertex."""
    from vicsek.geometry import anchor_keys

    V = f.cell_values(level)
    keys = anchor_keys(level).astype(np.int64)
    vals = V[np.arange(V.shape[0]), keys - 1]
    return CellFunction(level, vals)


@dataclass(eq=False)
class EdgeDensity:
    """An edgewise-constant density on the level-m skeleton, stored per edge
    in the edge order of build_graph(level)."""

    level: int
    values: np.ndarray

    @property
    def graph(self) -> CableGraph:
        return build_graph(self.level)

    def nu_norm(self, p: float) -> float:
        """(integral of |g|^p dnu)^(1/p) over the level-m skeleton."""
        w = 3.0 ** -self.level
        if math.isinf(p):
            return float(np.abs(self.values).max())
        return float((w * (np.abs(self.values) ** p).sum()) ** (1.0 / p))

    def nu_integral_abs(self, p: float) -> float:
        w = 3.0 ** -self.level
        return float(w * (np.abs(self.values) ** p).sum())


def weak_gradient(f: PAFunction) -> EdgeDensity:
    """The edgewise slope of f on its own skeleton, oriented rootward to
    leafward: (f(hi) - f(lo)) / 3^-n on each level-n edge."""
    g = f.graph
    scale = float(3**f.level)
    slopes = (f.values[g.edges_hi] - f.values[g.edges_lo]) * scale
    return EdgeDensity(f.level, slopes)


def reconstruct(density: EdgeDensity, base_value: float = 0.0) -> PAFunction:
    """Integrate an edge density along the tree from the root: the unique PA
    function with the given slopes and f(root) = base_value."""
    g = density.graph
    vals = np.empty(g.n_vertices, dtype=np.float64)
    vals[g.root] = base_value
    length = 3.0 ** -density.level
    order = np.argsort(g.depth, kind="stable")
    max_depth = int(g.depth.max())
    start = np.searchsorted(g.depth[order], np.arange(max_depth + 2))
    for d in range(1, max_depth + 1):
        verts = order[start[d]:start[d + 1]]
        vals[verts] = vals[g.parent[verts]] + density.values[g.parent_edge[verts]] * length
    return PAFunction(density.level, vals)


# ---------------------------------------------------------------------------
# Exact integration against mu
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def arm_moment(ell: int) -> Fraction:
    """M_l: the mu-integral of e^l over one arm subtree, where e is the
    elementary tent (1 at the arm's corner, 0 at the center, affine along
    the arm, constant on hanging subtrees).

    Self-similarity of the arm (corner child + rescaled arm of the central
    child) gives, with E_l the integral of (e . psi_corner)^l over all of K,

        M_l (1 - 3^-l / 5) = E_l / 5,
        E_l = sum_s C(l,s) (2/3)^(l-s) [3^-s (1 + (-1)^s) + 2*delta_s0] M_s.

    Base value M_0 = 1/4 (the mass of one arm subtree).
    """
    if ell == 0:
        return Fraction(1, 4)
    rhs = Fraction(0)
    for s in range(ell):
        coeff = Fraction(1 + (-1) ** s, 3**s) + (2 if s == 0 else 0)
        rhs += math.comb(ell, s) * Fraction(2, 3) ** (ell - s) * coeff * arm_moment(s)
    # Move the s = ell term (present only for even ell) to the left side.
    lhs = 1 - Fraction(1, 5 * 3**ell)
    if ell % 2 == 0:
        lhs -= Fraction(2, 5 * 3**ell)
    return rhs / 5 / lhs


def cell_power_integral(quintuple, p: int) -> Fraction:
    """Exact integral of f^p over one cell (normalized cell measure), where f
    is the PA function with the given value quintuple (q1..q4, q5).

    Decomposes f = v5 + sum_i d_i e_i with arm tents of disjoint supports:
    the integral is sum_i sum_l C(p,l) v5^(p-l) d_i^l M_l.
    """
    if p < 0 or p != int(p):
        raise ValueError("power must be a nonnegative integer")
    v = [Fraction(x) for x in quintuple]
    v5 = v[4]
    total = Fraction(0)
    for i in range(4):
        d = v[i] - v5
        for ell in range(p + 1):
            total += math.comb(p, ell) * v5 ** (p - ell) * d**ell * arm_moment(ell)
    return total


@dataclass(frozen=True)
class IntegralEstimate:
    """A certified integral value: |true - value| <= error; `exact` is set
    when the computation was closed-form rational."""

    value: float
    error: float
    exact: Fraction | None = None

    def __float__(self) -> float:
        return self.value


def _abs_power_cell(v: tuple, p: int, depth: int, cap: int) -> tuple[Fraction, Fraction]:
    """(value, error) for the integral of |f|^p over one cell, exact except
    on sign-straddling cells below the recursion cap."""
    lo = min(v)
    hi = max(v)
    if lo >= 0:
        return cell_power_integral(v, p), Fraction(0)
    if hi <= 0:
        return cell_power_integral(tuple(-x for x in v), p), Fraction(0)
    if depth >= cap:
        bound = max(-lo, hi) ** p
        return bound / 2, bound / 2
    val = Fraction(0)
    err = Fraction(0)
    for d in range(1, 6):
        child_val, child_err = _abs_power_cell(
            _apply_refine_exact(REFINE[d], v), p, depth + 1, cap
        )
        val += child_val
        err += child_err
    return val / 5, err / 5


def _bracket_integral(f: PAFunction, p: float, level: int) -> IntegralEstimate:
    """Two-sided quadrature of the integral of |f|^p from exact per-cell
    ranges at a fixed level."""
    V = f.cell_values(level)
    lo_all = V.min(axis=1)
    hi_all = V.max(axis=1)
    abs_lo = np.where(lo_all > 0, lo_all, np.where(hi_all < 0, -hi_all, 0.0))
    abs_hi = np.maximum(np.abs(lo_all), np.abs(hi_all))
    lower = float((abs_lo**p).mean())
    upper = float((abs_hi**p).mean())
    return IntegralEstimate((lower + upper) / 2, (upper - lower) / 2)


def mu_integral(
    f: PAFunction,
    p=2,
    absolute: bool = True,
    tol: float = 1e-12,
    method: str = "auto",
    level: int | None = None,
) -> IntegralEstimate:
    """Integral of |f|^p (or f^p with absolute=False) against mu.

    method="auto": integer p by closed form per cell (sign-straddling cells
    for odd powers recurse until machine-negligible, with certified error);
    non-integer p by a two-sided bracket from exact per-cell ranges, refined
    until `tol` or the level cap.  method="quadrature": the bracket at one
    fixed level (default f.level + 4), for cross-checking the closed form.
    """
    if p < 0:
        raise ValueError("power must be nonnegative")
    if method == "quadrature":
        if not absolute:
            raise ValueError("quadrature brackets are for absolute integrands")
        return _bracket_integral(f, float(p), f.level + 4 if level is None else level)
    if method != "auto":
        raise ValueError(f"unknown integration method: {method!r}")
    if float(p).is_integer():
        p = int(p)
        if not f.is_exact():
            f = PAFunction(
                f.level, f.values, tuple(Fraction(float(x)) for x in f.values)
            )
        V = f.cell_values(f.level, exact=True)
        n_cells = 5**f.level
        even = p % 2 == 0
        total = Fraction(0)
        err = Fraction(0)
        # Straddling cells shrink geometrically; 30 extra levels leave an
        # error below 5^-30 per straddling branch.
        cap = 30
        for v in V:
            if not absolute or even:
                total += cell_power_integral(v, p)
            else:
                cv, ce = _abs_power_cell(v, p, 0, cap)
                total += cv
                err += ce
        total /= n_cells
        err /= n_cells
        return IntegralEstimate(float(total), float(err), None if err else total)
    # Non-integer power: bracket |f|^p by exact per-cell ranges.
    if not absolute:
        raise ValueError("signed integrals need an integer power")
    m = f.level
    while True:
        best = _bracket_integral(f, float(p), m)
        if best.error <= tol or m >= f.level + 9 or 5**m > 2_000_000:
            return best
        m += 1


# ---------------------------------------------------------------------------
# The Cantor edge function
# ---------------------------------------------------------------------------


def _cantor_value(t: Fraction) -> Fraction:
    """The classical Cantor function at a rational t in [0, 1], exactly.

    Walks the ternary digits; a repeating remainder means the remaining
    contributions form a geometric series, summed in closed form.
    """
    if t <= 0:
        return Fraction(0)
    if t >= 1:
        return Fraction(1)
    result = Fraction(0)
    half = Fraction(1, 2)
    seen: dict[Fraction, tuple[Fraction, Fraction]] = {}
    while True:
        if t in seen:
            prev_result, prev_half = seen[t]
            ratio = half / prev_half
            return (result - ratio * prev_result) / (1 - ratio)
        seen[t] = (result, half)
        t *= 3
        digit = int(t)  # floor for t >= 0
        t -= digit
        if digit == 1:
            return result + half
        result += half * (digit // 2)
        if t == 0:
            return result
        half /= 2


@dataclass(frozen=True)
class CantorEdgeFunction:
    """The Cantor (devil's staircase) profile carried by the arm from the
    center of K to corner q2, constant on subtrees hanging off that arm.

    Values are exact: f(x) = C(t(x)) where t is the arclength projection of
    x onto the carrying arm, measured from the center, and C is the Cantor
    function.  Its level-m interpolations have total variation exactly 1 with
    slope support of length (2/3)^m: bounded variation but no p-integrable
    upgrade for p > 1, since the discrete p-energies grow like (3/2)^((p-1)m).
    """

    corner: int = 2

    def projection_parameter(self, x) -> Fraction:
        """Arclength position of x's projection onto the carrying arm."""
        from vicsek.geometry import CENTER, LatticePoint

        end = LatticePoint.key_point(self.corner)
        d_center = distance(x, CENTER)
        d_end = distance(x, end)
        return (d_center + 1 - d_end) / 2

    def value(self, x) -> Fraction:
        return _cantor_value(self.projection_parameter(x))

    def as_pa(self, level: int) -> PAFunction:
        """The level-m interpolation, with exact vertex values."""
        from vicsek.geometry import LatticePoint

        g = build_graph(level)
        end = g.index_of(LatticePoint.key_point(self.corner))
        d_center = g.depth
        d_end = bfs_distance_units(g, end)
        t_units = (d_center + 3**level - d_end) // 2
        cache: dict[int, Fraction] = {}
        exact = []
        den = 3**level
        for u in t_units:
            u = int(u)
            got = cache.get(u)
            if got is None:
                got = _cantor_value(Fraction(u, den))
                cache[u] = got
            exact.append(got)
        vals = np.array([float(x) for x in exact])
        return PAFunction(level, vals, tuple(exact))

    @staticmethod
    def discrete_energy(p: float, level: int) -> float:
        """Closed form for the level-m discrete p-energy, (3/2)^((p-1)m):
        the 2^m increments of size 2^-m sit on distinct level-m edges."""
        return (3.0 / 2.0) ** ((p - 1) * level)

    def arm_energy(self, p: int, level: int) -> Fraction:
        """The level-m discrete p-energy, exactly, for integer p >= 1.

        Only the carrying arm contributes (hanging subtrees are constant),
        so the energy is 3^((p-1)m) times the sum of the p-th powers of the
        one-dimensional Cantor increments along the arm.  This stays cheap
        at depths where assembling the full level-m interpolation would
        not be.
        """
        if int(p) != p or p < 1:
            raise ValueError("the exact arm energy needs an integer p >= 1")
        n = 3**level
        vals = [_cantor_value(Fraction(i, n)) for i in range(n + 1)]
        total = sum((b - a) ** int(p) for a, b in zip(vals[:-1], vals[1:]))
        return Fraction(3) ** ((int(p) - 1) * level) * total

    @staticmethod
    def slope_support_length(level: int) -> Fraction:
        """nu-length of the level-m edges carrying nonzero slope, (2/3)^m."""
        return Fraction(2, 3) ** level
