"""Discrete p-energies on the cable systems.

The level-m energy of a function f is

    E_p^m(f) = (1/2) * 3^((p-1) m) * sum over ordered adjacent pairs (x, y)
               of V_m of |f(x) - f(y)|^p,

i.e. each undirected level-m edge counted twice and halved, and
E_inf^m(f) = 3^m * max over adjacent pairs |f(x) - f(y)|.  Restricted
energies E_{A,p}^m keep the pairs with both endpoints in A (closed balls by
exact geodesic distance, or cells); they are nondecreasing in m on such
convex regions.  For a level-n PA function the unrestricted sequence is
constant in m >= n (each refinement splits a difference delta into three
differences delta/3 on edges of a third the length), which identifies the
limit energy with the nu-integral of |df|^p over the skeleton.

Everything works on per-cell value quintuples, so unrestricted energies at
deep levels never materialize a vertex graph; the streamed variant shards
the cell tree across processes by address prefix with a fixed reduction
order, so results are byte-identical for every worker count.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from vicsek.functions import REFINE_F, EdgeDensity, PAFunction, weak_gradient
from vicsek.geometry import (
    LatticePoint,
    bfs_distance_units,
    build_graph,
    check_word,
    max_level,
    word_index,
)

__all__ = [
    "EnergyScan",
    "Region",
    "cell_energies",
    "discrete_energy",
    "discrete_energy_restricted",
    "energy_infty",
    "energy_limit",
    "energy_sup_scan",
    "gradient_norm",
    "self_similarity_check",
    "stream_energy",
]


def _check_power(p) -> float:
    p = float(p)
    if not (p >= 1):
        raise ValueError("the energy power must satisfy p >= 1")
    return p


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """A convex region of K: the whole space, a closed geodesic ball, or a
    cell.  Vertex membership is decided by exact rational comparisons."""

    kind: str
    center: LatticePoint | None = None
    radius: Fraction | None = None
    word: tuple | None = None

    @staticmethod
    def whole() -> "Region":
        return Region("whole")

    @staticmethod
    def ball(center: LatticePoint, radius) -> "Region":
        radius = Fraction(radius)
        if radius < 0:
            raise ValueError("ball radius must be nonnegative")
        return Region("ball", center=center, radius=radius)

    @staticmethod
    def cell(word) -> "Region":
        return Region("cell", word=check_word(word))

    @property
    def resolution(self) -> int:
        """The minimum level at which the region is vertex-resolved."""
        if self.kind == "ball":
            return self.center.m
        if self.kind == "cell":
            return len(self.word)
        return 0

    def describe(self) -> str:
        if self.kind == "ball":
            x, y = self.center.floats()
            return f"ball(({x:.6g},{y:.6g}),r={float(self.radius):.6g})"
        if self.kind == "cell":
            return "cell(" + "".join(str(d) for d in self.word) + ")" if self.word else "cell(root)"
        return "whole"

    def _center_index(self, g) -> int:
        try:
            return g.index_of(self.center)
        except KeyError:
            raise ValueError(
                "the ball center must be a vertex at the working level"
            ) from None

    def _check_resolved(self, g) -> None:
        if g.level < self.resolution:
            raise ValueError(
                f"level {g.level} does not resolve this region "
                f"(needs level >= {self.resolution})"
            )

    def vertex_mask(self, g) -> np.ndarray:
        """Boolean membership of each level-m vertex in the closed region."""
        self._check_resolved(g)
        if self.kind == "whole":
            return np.ones(g.n_vertices, dtype=bool)
        if self.kind == "cell":
            span = 5 ** (g.level - len(self.word))
            base = word_index(self.word) * span
            ids = np.unique(g.cell_vertices[base:base + span])
            mask = np.zeros(g.n_vertices, dtype=bool)
            mask[ids] = True
            return mask
        units = bfs_distance_units(g, self._center_index(g))
        # units / 3^m <= radius, exactly in integers.
        num, den = self.radius.numerator, self.radius.denominator
        return units * den <= num * 3**g.level

    def edge_overlap_units(self, g) -> np.ndarray:
        """nu-length of each level-m edge's intersection with the region, in
        units of 3^-m (for balls this is the exact partial overlap)."""
        self._check_resolved(g)
        if self.kind == "whole":
            return np.ones(g.n_edges, dtype=np.float64)
        if self.kind == "cell":
            span = 5 ** (g.level - len(self.word))
            base = word_index(self.word) * span
            out = np.zeros(g.n_edges, dtype=np.float64)
            out[(g.edge_cell >= base) & (g.edge_cell < base + span)] = 1.0
            return out
        units = bfs_distance_units(g, self._center_index(g))
        r_units = float(self.radius) * 3**g.level
        near = np.minimum(units[g.edges_lo], units[g.edges_hi]).astype(np.float64)
        return np.clip(r_units - near, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Whole-space energies via cell quintuples
# ---------------------------------------------------------------------------


def _quintuple_energy_sum(V: np.ndarray, p: float):
    """sum over cells of sum_i |V[:, i] - V[:, 4]|^p (no level prefactor)."""
    diffs = np.abs(V[:, :4] - V[:, 4:5])
    if math.isinf(p):
        return float(diffs.max()) if diffs.size else 0.0
    if p == 1.0:
        return float(diffs.sum())
    if p == 2.0:
        return float((diffs * diffs).sum())
    return float((diffs**p).sum())


def discrete_energy(f: PAFunction, p=2, level: int | None = None, exact: bool = False):
    """E_p^m(f) at level m (default: the function's own level).

    With exact=True (integer p or p = inf, exact function values) the result
    is a Fraction.
    """
    p = _check_power(p)
    m = f.level if level is None else int(level)
    if m < f.level:
        raise ValueError("energy level must be >= the function level")
    if exact:
        V = f.cell_values(m, exact=True)
        if math.isinf(p):
            diff = max(
                (abs(v[i] - v[4]) for v in V for i in range(4)), default=Fraction(0)
            )
            return 3**m * diff
        if p != int(p):
            raise ValueError("exact energies need an integer power")
        q = int(p)
        total = sum(abs(v[i] - v[4]) ** q for v in V for i in range(4))
        return Fraction(3) ** ((q - 1) * m) * total
    V = f.cell_values(m)
    s = _quintuple_energy_sum(V, p)
    if math.isinf(p):
        return 3.0**m * s
    return 3.0 ** ((p - 1) * m) * s


def energy_infty(f: PAFunction, level: int | None = None, region: Region | None = None) -> float:
    """E_inf^m(f) = 3^m max |increment|, optionally over edges inside a
    region; for PA functions this is the Lipschitz constant on the region."""
    m = f.level if level is None else int(level)
    if region is None or region.kind == "whole":
        return float(discrete_energy(f, math.inf, m))
    g = build_graph(m)
    fm = f.refine(m)
    mask = region.vertex_mask(g)
    keep = mask[g.edges_lo] & mask[g.edges_hi]
    if not keep.any():
        return 0.0
    diffs = np.abs(fm.values[g.edges_hi[keep]] - fm.values[g.edges_lo[keep]])
    return float(3.0**m * diffs.max())


def cell_energies(f: PAFunction, p=2, level: int | None = None) -> np.ndarray:
    """Per-cell energy contributions at level m (they sum to E_p^m)."""
    p = _check_power(p)
    if math.isinf(p):
        raise ValueError("per-cell energies need a finite power")
    m = f.level if level is None else int(level)
    V = f.cell_values(m)
    diffs = np.abs(V[:, :4] - V[:, 4:5])
    return 3.0 ** ((p - 1) * m) * (diffs**p).sum(axis=1)


# ---------------------------------------------------------------------------
# Restricted energies and gradient norms
# ---------------------------------------------------------------------------


def discrete_energy_restricted(
    f: PAFunction, p=2, level: int | None = None, region: Region | None = None
) -> float:
    """E_{A,p}^m(f): the sum over edges with both endpoints in A (closed
    membership), nondecreasing in m for the convex regions used here."""
    p = _check_power(p)
    region = region if region is not None else Region.whole()
    m = f.level if level is None else int(level)
    if m < max(f.level, region.resolution):
        raise ValueError("energy level must resolve both the function and the region")
    if region.kind == "whole":
        return float(discrete_energy(f, p, m))
    g = build_graph(m)
    mask = region.vertex_mask(g)
    keep = mask[g.edges_lo] & mask[g.edges_hi]
    # Edge e joins q5 of cell e//4 to corner e%4+1, so the quintuple diffs
    # flatten straight into edge order.
    V = f.cell_values(m)
    diffs = np.abs(V[:, :4] - V[:, 4:]).reshape(-1)[keep]
    if math.isinf(p):
        return float(3.0**m * diffs.max()) if diffs.size else 0.0
    return float(3.0 ** ((p - 1) * m) * (diffs**p).sum())


def gradient_norm(density: EdgeDensity, p=2, region: Region | None = None) -> float:
    """integral over A of |g|^p dnu for an edgewise-constant density; ball
    regions weight each edge by its exact partial nu-overlap."""
    p = _check_power(p)
    g = density.graph
    if math.isinf(p):
        if region is None or region.kind == "whole":
            return float(np.abs(density.values).max())
        w = region.edge_overlap_units(g)
        vals = np.abs(density.values[w > 0])
        return float(vals.max()) if vals.size else 0.0
    if region is None or region.kind == "whole":
        return density.nu_integral_abs(p)
    w = region.edge_overlap_units(g)
    return float(3.0**-g.level * (w * np.abs(density.values) ** p).sum())


def energy_limit(f: PAFunction, p=2, region: Region | None = None) -> float:
    """The limit energy E_{A,p}(f) of a PA function, exactly.

    Unrestricted and cell-restricted energies are level-stable, so the
    level-max(n, resolution) value is the limit; ball restrictions converge
    to the nu-integral of |df|^p over A intersect S, computed here through
    the exact partial edge overlaps.
    """
    p = _check_power(p)
    region = region if region is not None else Region.whole()
    if region.kind == "ball":
        m = max(f.level, region.resolution)
        return gradient_norm(weak_gradient(f.refine(m)), p, region)
    m = max(f.level, region.resolution)
    if math.isinf(p):
        return energy_infty(f, m, region)
    return discrete_energy_restricted(f, p, m, region)


def self_similarity_check(f: PAFunction, p=2, level: int | None = None, exact: bool = False):
    """(lhs, rhs, relative gap) for the decomposition

        E_p^(m+1)(f) = 3^(p-1) * sum over children of E_p^m(f . psi_i);

    both sides are assembled through independent code paths.
    """
    p = _check_power(p)
    if math.isinf(p):
        raise ValueError("the self-similarity identity is for finite powers")
    m = f.level if level is None else int(level)
    lhs = discrete_energy(f, p, m + 1, exact=exact)
    parts = [
        discrete_energy(f.pullback((d,)), p, m, exact=exact) for d in range(1, 6)
    ]
    factor = Fraction(3) ** (int(p) - 1) if exact else 3.0 ** (p - 1)
    rhs = factor * sum(parts)
    denom = max(abs(float(lhs)), abs(float(rhs)), 1e-300)
    gap = abs(float(lhs) - float(rhs)) / denom
    return lhs, rhs, gap


# ---------------------------------------------------------------------------
# Level scans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyScan:
    """Level-by-level energies with a divergence verdict.

    `growth` is the fitted per-level multiplier exp(slope) of a log-linear
    fit (1.0 when the scan never exceeded the divergence ratio)."""

    p: float
    levels: tuple[int, ...]
    values: tuple[float, ...]
    growth: float
    divergent: bool

    @property
    def ratio(self) -> float:
        first = self.values[0]
        return math.inf if first == 0 else self.values[-1] / first


def energy_sup_scan(
    family, p=2, levels=None, divergence_ratio: float = 10.0
) -> EnergyScan:
    """Scan E_p^m over a level range and classify boundedness.

    `family` is either a PA function (scanned through its refinements, hence
    constant) or a callable m -> PAFunction giving the level-m interpolant of
    a target function; bounded scans witness membership in the p-energy
    space, divergent ones exclude it and report the fitted growth rate.
    """
    p = _check_power(p)
    if isinstance(family, PAFunction):
        f = family
        if levels is None:
            levels = range(f.level, min(f.level + 5, max_level()) + 1)
        family = f.refine
        base = f.level
    else:
        base = 0
        if levels is None:
            levels = range(0, min(6, max_level()) + 1)
    levels = tuple(int(m) for m in levels)
    if not levels:
        raise ValueError("the level range is empty")
    if min(levels) < base:
        raise ValueError("scan levels must be >= the function level")
    vals = tuple(float(discrete_energy(family(m), p, m)) for m in levels)
    divergent = vals[0] == 0 and vals[-1] > 0 or (
        vals[0] > 0 and vals[-1] / vals[0] > divergence_ratio
    )
    growth = 1.0
    if divergent:
        positive = [(m, v) for m, v in zip(levels, vals) if v > 0]
        if len(positive) >= 2:
            xs = np.array([m for m, _ in positive], dtype=np.float64)
            ys = np.log([v for _, v in positive])
            growth = math.exp(float(np.polyfit(xs, ys, 1)[0]))
    return EnergyScan(p, levels, vals, growth, divergent)


# ---------------------------------------------------------------------------
# Streamed deep-level energies
# ---------------------------------------------------------------------------


def _expand_block(args) -> float:
    """Energy sum of one prefix block: expand a quintuple `sub` levels down
    and accumulate the unnormalized difference sum."""
    quintuple, sub, p = args
    V = np.asarray(quintuple, dtype=np.float64).reshape(1, 5)
    for _ in range(sub):
        new = np.empty((V.shape[0] * 5, 5), dtype=np.float64)
        for d in range(1, 6):
            new[d - 1::5] = V @ REFINE_F[d].T
        V = new
    return _quintuple_energy_sum(V, p)


def _tree_reduce(parts: list[float]) -> float:
    """Fixed-shape pairwise summation, independent of how the parts were
    produced."""
    parts = list(parts)
    if not parts:
        return 0.0
    while len(parts) > 1:
        nxt = [
            parts[i] + parts[i + 1] if i + 1 < len(parts) else parts[i]
            for i in range(0, len(parts), 2)
        ]
        parts = nxt
    return parts[0]


def stream_energy(
    f: PAFunction,
    p=2,
    level: int | None = None,
    workers: int = 1,
    block_level: int | None = None,
) -> float:
    """E_p^m by sharding the cell tree into 5^j prefix blocks.

    Blocks are expanded independently (optionally by a process pool) and
    combined with a fixed pairwise reduction, so the result is byte-identical
    for every worker count.  Peak memory is one block, not the whole level.
    """
    p = _check_power(p)
    m = f.level if level is None else int(level)
    if m < f.level:
        raise ValueError("energy level must be >= the function level")
    if block_level is None:
        block_level = max(f.level, min(4, m))
    j = min(max(block_level, f.level), m)
    blocks = f.cell_values(j)
    sub = m - j
    tasks = [(tuple(map(float, q)), sub, p) for q in blocks]
    if workers <= 1:
        parts = [_expand_block(t) for t in tasks]
    else:
        with multiprocessing.Pool(processes=workers) as pool:
            parts = pool.map(_expand_block, tasks, chunksize=max(1, len(tasks) // (4 * workers)))
    if math.isinf(p):
        return 3.0**m * (max(parts) if parts else 0.0)
    total = _tree_reduce(parts)
    return 3.0 ** ((p - 1) * m) * total
