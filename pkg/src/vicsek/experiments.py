"""Inequality verification experiments on the cable-system hierarchy.

Each operation here checks a scale of analytic statements numerically:
Morrey-type pointwise bounds and Poincare inequalities with their sharp
central-ball constants, ball-maximal functions of the weak gradient with
strong/weak norm scans, the averaging interpolants built from cell means,
and upper bounds for the interpolation K-functional compared against the
double-integral energies.  Every reported quantity is either exact or
carries a certified error bound.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from vicsek.energy import Region, discrete_energy, energy_limit
from vicsek.functions import (
    CellFunction,
    PAFunction,
    anchor_cell_function,
    cross_function,
    distance_function,
    mu_integral,
    random_pa,
    weak_gradient,
)
from vicsek.geometry import (
    CENTER,
    DIM_H,
    OPPOSITE,
    address_digits,
    alpha_p,
    anchor_keys,
    ball_volume,
    ball_volume_bulk,
    build_graph,
    cell_map,
    cell_words,
    edge_mass_bulk,
    edge_mass_profiles,
    key_distance_tensor,
    max_level,
    pairwise_distance_units,
)
from vicsek.ks import ks_energy

#: mu-moments of the arclength coordinate over one arm subtree (moment 0..2).
_ARM_M0 = 0.25
_ARM_M1 = 1.0 / 7.0
_ARM_M2 = 2.0 / 21.0


# ---------------------------------------------------------------------------
# Power-law fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    """A least-squares power law value = constant * scale^exponent.

    `residual` is the maximum absolute log-deviation of the samples from
    the fitted line; `points` keeps the (scale, value) samples.
    """

    exponent: float
    constant: float
    residual: float
    points: tuple

    def __post_init__(self):
        if len(self.points) < 4:
            raise ValueError("power-law fits need at least 4 sample points")


def fit_loglog(points) -> FitResult:
    """Fit value = C * scale^a through (scale, value) samples, in log-log."""
    pts = tuple((float(s), float(v)) for s, v in points)
    if len(pts) < 4:
        raise ValueError("power-law fits need at least 4 sample points")
    if any(s <= 0 or v <= 0 for s, v in pts):
        raise ValueError("log-log fits need positive scales and values")
    xs = np.log([s for s, _ in pts])
    ys = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(xs, ys, 1)
    residual = float(np.abs(ys - (slope * xs + intercept)).max())
    return FitResult(float(slope), float(math.exp(intercept)), residual, pts)


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _vertex_values(f: PAFunction, g) -> np.ndarray:
    """Values of f at every vertex of graph g (level >= f.level)."""
    V = f.cell_values(g.level)
    vals = np.empty(g.n_vertices, dtype=np.float64)
    for j in range(5):
        vals[g.cell_vertices[:, j]] = V[:, j]
    return vals


def _check_finite_power(p) -> float:
    p = float(p)
    if math.isinf(p) or p < 1:
        raise ValueError("these experiments need a finite power p >= 1")
    return p


def _cell_integrals(f, level: int, exact: bool = False):
    """mu-integral of f over each level-`level` cell, in cell order.

    Piecewise-affine inputs use the exact per-arm moments; cell functions
    must already resolve the requested level and aggregate their masses.
    """
    if isinstance(f, PAFunction):
        L = max(f.level, level)
        if exact:
            V = f.cell_values(L, exact=True)
            means = np.array(
                [(v[0] + v[1] + v[2] + v[3] + 3 * v[4]) / 7 for v in V],
                dtype=object,
            )
            for _ in range(L - level):
                means = means.reshape(-1, 5).sum(axis=1) / 5
            return means * Fraction(1, 5**level)
        V = f.cell_values(L)
        means = (V[:, :4].sum(axis=1) + 3.0 * V[:, 4]) / 7.0
        for _ in range(L - level):
            means = means.reshape(-1, 5).mean(axis=1)
        return means * 5.0**-level
    if isinstance(f, CellFunction):
        if f.level < level:
            raise ValueError(
                f"cell resolution {f.level} does not reach level {level}"
            )
        means = np.asarray(f.values, dtype=np.float64)
        for _ in range(f.level - level):
            means = means.reshape(-1, 5).mean(axis=1)
        return means * 5.0**-level
    raise TypeError("expected a PAFunction or a CellFunction")


def _edge_slope_table(f: PAFunction, m: int) -> np.ndarray:
    """(5^m, 4) table of the weak-gradient density on level-m edges.

    Each radial edge refines into three radial sub-edges carrying the same
    density (one in the corner child's outer arm, one in its inner arm, one
    in the center child); lateral sub-edges start hanging subtrees where a
    level-n PA function is constant, so their density is zero.
    """
    if m < f.level:
        raise ValueError("the slope table level must be at least f.level")
    g = f.graph
    table = np.zeros((5**f.level, 4), dtype=np.float64)
    table[g.edge_cell, g.edge_corner - 1] = weak_gradient(f).values
    for j in range(f.level, m):
        nxt = np.zeros((5**j, 5, 4), dtype=np.float64)
        nxt[:, 4, :] = table
        for d in range(1, 5):
            nxt[:, d - 1, d - 1] = table[:, d - 1]
            nxt[:, d - 1, OPPOSITE[d] - 1] = table[:, d - 1]
        table = nxt.reshape(-1, 4)
    return table


# ---------------------------------------------------------------------------
# Morrey estimate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MorreyReport:
    """Largest sampled value of |f(x)-f(y)|^p / (d(x,y)^(p-1) E_{A,p}(f))."""

    p: float
    region: Region
    energy: float
    n_pairs: int
    max_ratio: float
    worst_pair: tuple | None

    def __float__(self) -> float:
        return self.max_ratio


def morrey_check(
    f: PAFunction,
    region: Region | None = None,
    p=2,
    pairs=None,
    n_pairs: int = 1000,
    seed: int = 0,
) -> MorreyReport:
    """Sample the pointwise-difference bound on a convex region.

    The bound states |f(x)-f(y)|^p <= d(x,y)^(p-1) E_{A,p}(f) for x, y in a
    convex region A.  `pairs` may give explicit point pairs; otherwise pairs
    are drawn uniformly from the region's vertices at the working level.
    Coincident pairs contribute ratio 0, as does a constant function.
    """
    p = _check_finite_power(p)
    region = Region.whole() if region is None else region
    level = max(f.level, region.resolution)
    g = build_graph(level)
    energy = energy_limit(f, p, region)
    vals = _vertex_values(f, g)
    if pairs is not None:
        xs = np.array([g.index_of(a) for a, _ in pairs], dtype=np.int64)
        ys = np.array([g.index_of(b) for _, b in pairs], dtype=np.int64)
    else:
        ids = np.nonzero(region.vertex_mask(g))[0]
        rng = np.random.default_rng(seed)
        xs = rng.choice(ids, size=n_pairs)
        ys = rng.choice(ids, size=n_pairs)
    D = g.key_distances()
    dmat = pairwise_distance_units(
        g.vert_word[xs], g.vert_key[xs], D[xs],
        g.vert_word[ys], g.vert_key[ys], D[ys], level,
    )
    d = np.diagonal(dmat) * 3.0**-level
    num = np.abs(vals[xs] - vals[ys]) ** p
    ratio = np.zeros(len(xs))
    live = (d > 0) & (energy > 0)
    ratio[live] = num[live] / (d[live] ** (p - 1) * energy)
    worst = None
    if len(xs):
        i = int(np.argmax(ratio))
        worst = (g.point(xs[i]).floats(), g.point(ys[i]).floats())
    return MorreyReport(
        p=p,
        region=region,
        energy=float(energy),
        n_pairs=len(xs),
        max_ratio=float(ratio.max()) if len(xs) else 0.0,
        worst_pair=worst,
    )


# ---------------------------------------------------------------------------
# Poincare inequality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoincareReport:
    """Both sides of the mean-value Poincare inequality on a region.

    lhs averages |f - mean|^p over the region; rhs is diam^(p-1) times the
    restricted limit energy.  scaled_ratio divides the un-averaged integral
    by r^(p alpha_p) E instead, the ball-scaled form whose sharp central
    constant is 2/21 at p = 2.
    """

    p: float
    region: Region
    mean: float
    lhs: float
    lhs_error: float
    rhs: float
    energy: float
    ratio: float
    scaled_ratio: float
    ok: bool


def _central_word(region: Region):
    """The cell word equal to the region, when one exists."""
    if region.kind == "cell":
        return region.word
    if region.kind == "ball" and region.center == CENTER:
        r = region.radius
        if r.numerator == 1:
            n = round(math.log(r.denominator) / math.log(3))
            if 3**n == r.denominator:
                return (5,) * n
    return None


def _ball_geometry(region: Region, level: int):
    """Distance from the ball center to every level-`level` cell, in units.

    Returns (dmin, num, den) with dmin integer distances to the cells'
    nearest points and num/den the radius scaled by 3^level.
    """
    digits, key = address_digits(region.center, level)
    xw = np.array([digits], dtype=np.uint8).reshape(1, level)
    xk = np.array([key], dtype=np.uint8)
    xD = key_distance_tensor(xw, xk, level)
    words = cell_words(level)
    n_cells = words.shape[0]
    dmin = None
    for kappa in range(1, 6):
        keys = np.full(n_cells, kappa, dtype=np.uint8)
        D = key_distance_tensor(words, keys, level)
        row = pairwise_distance_units(xw, xk, xD, words, keys, D, level)[0]
        dmin = row if dmin is None else np.minimum(dmin, row)
    scaled = region.radius * 3**level
    return dmin, scaled.numerator, scaled.denominator


def poincare_check(f: PAFunction, region: Region, p=2) -> PoincareReport:
    """Check avg_A |f - avg_A f|^p dmu <= diam(A)^(p-1) E_{A,p}(f).

    Cells and central triadic balls (which coincide with central cells) are
    evaluated through exact pullbacks; other vertex-centered triadic balls
    use a certified cell-decomposition quadrature.  Ball diameters are
    bounded by 2r, which can only weaken the reported ratio.
    """
    p = _check_finite_power(p)
    if region.kind == "whole":
        region = Region.cell(())
    energy = energy_limit(f, p, region)
    word = _central_word(region)
    if word is not None:
        n = len(word)
        pb = f.pullback(word)
        if pb.is_exact():
            mean_c = pb.mean_exact()
        else:
            mean_c = pb.mean()
        est = mu_integral(pb - mean_c, p)
        lhs, lhs_err = est.value, est.error
        diam = 2.0 * 3.0**-n
        rhs = diam ** (p - 1) * energy
        mu_a = 5.0**-n
        r_pow = 5.0**-n * 3.0 ** (-n * (p - 1))
        ratio = lhs / rhs if rhs > 0 else 0.0
        scaled = (lhs * mu_a) / (r_pow * energy) if energy > 0 else 0.0
        ok = rhs == 0 or lhs <= rhs * (1 + 1e-12) + lhs_err
        return PoincareReport(
            p, region, float(mean_c), lhs, lhs_err, rhs, energy, ratio, scaled, ok
        )
    if region.kind != "ball":
        raise ValueError("poincare_check needs a ball or cell region")
    r = region.radius
    if r <= 0:
        raise ValueError("the ball must have positive radius")
    level = max(f.level, region.resolution) + 2
    if level > max_level():
        raise ValueError(f"level {level} exceeds the configured maximum")
    if (r * 3**level).denominator != 1:
        raise ValueError("quadrature needs a triadic radius")
    dmin, num, den = _ball_geometry(region, level)
    full = (dmin + 2) * den <= num
    partial = ~full & (dmin * den < num)
    if not full.any() and not partial.any():
        raise ValueError("the ball has no mass at the working level")
    V = f.cell_values(level)
    w_cell = 5.0**-level
    mu_ball = float(ball_volume(region.center, r))
    cm = (V[:, :4].sum(axis=1) + 3.0 * V[:, 4]) / 7.0
    lo_cell = V.min(axis=1)
    hi_cell = V.max(axis=1)
    int_full = float(cm[full].sum()) * w_cell
    t_part = mu_ball - float(full.sum()) * w_cell
    if partial.any():
        int_lo = int_full + t_part * min(float(lo_cell[partial].min()), 0.0)
        int_hi = int_full + t_part * max(float(hi_cell[partial].max()), 0.0)
    else:
        int_lo = int_hi = int_full
    mean_c = (int_lo + int_hi) / 2 / mu_ball
    c_err = (int_hi - int_lo) / 2 / mu_ball
    b = V[:, 4] - mean_c
    dlt = V[:, :4] - V[:, 4:5]
    if p == 2.0:
        cell_int = b * b + 2.0 * _ARM_M1 * b * dlt.sum(axis=1) + _ARM_M2 * (dlt * dlt).sum(axis=1)
        cell_err = np.zeros_like(cell_int)
    else:
        a_vals = b[:, None] + dlt
        arm_hi = np.maximum(np.abs(a_vals), np.abs(b)[:, None])
        straddle = (a_vals * b[:, None]) < 0
        arm_lo = np.where(straddle, 0.0, np.minimum(np.abs(a_vals), np.abs(b)[:, None]))
        hi_int = _ARM_M0 * (arm_hi**p).sum(axis=1)
        lo_int = _ARM_M0 * (arm_lo**p).sum(axis=1)
        cell_int = (hi_int + lo_int) / 2
        cell_err = (hi_int - lo_int) / 2
    lhs_int = float(cell_int[full].sum()) * w_cell
    lhs_err = float(cell_err[full].sum()) * w_cell
    sup_h = float(np.maximum(np.abs(lo_cell - mean_c), np.abs(hi_cell - mean_c)).max())
    if partial.any():
        lhs_err += t_part * float(
            np.maximum(np.abs(lo_cell[partial] - mean_c), np.abs(hi_cell[partial] - mean_c)).max()
        ) ** p
    # first-order sensitivity of the integral to the mean estimate
    lhs_err += p * (sup_h + c_err) ** (p - 1) * c_err * mu_ball
    lhs = lhs_int / mu_ball
    lhs_error = lhs_err / mu_ball
    diam = min(2.0 * float(r), 2.0)
    rhs = diam ** (p - 1) * energy
    ratio = lhs / rhs if rhs > 0 else 0.0
    r_pow = float(r) ** (p * alpha_p(p))
    scaled = lhs_int / (r_pow * energy) if energy > 0 else 0.0
    ok = rhs == 0 or lhs <= rhs * (1 + 1e-12) + lhs_error
    return PoincareReport(
        p, region, mean_c, lhs, lhs_error, rhs, energy, ratio, scaled, ok
    )


# ---------------------------------------------------------------------------
# Sharpness of the ball-scaled Poincare exponent
# ---------------------------------------------------------------------------


def sharpness_fit(p=2, n_range=range(1, 6), f: PAFunction | None = None) -> FitResult:
    """Fit the decay of the central-ball integral of |f|^p against r = 3^-n.

    For the alternating cross the integral over B(center, 3^-n) is exactly
    5^-n 3^-np times the global integral, so the fitted exponent is
    p + log5/log3 and the fitted constant recovers the global integral.
    """
    p = _check_finite_power(p)
    f = cross_function() if f is None else f
    pts = []
    for n in n_range:
        pb = f.pullback((5,) * int(n))
        est = mu_integral(pb, p)
        pts.append((3.0 ** -int(n), est.value * 5.0 ** -int(n)))
    return fit_loglog(pts)


# ---------------------------------------------------------------------------
# Ball maximal function of the weak gradient
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaximalReport:
    """Grid maximal function g_f over a set of evaluation points.

    g_f(x) maximizes mu(B(x,r))^(-1/p) (integral over B(x,r) of |df|^p
    dnu)^(1/p) over the radius grid.  strong_norm is the p-th power mean of
    g_f over the points (the L^p norm against the uniform point measure,
    raised to p); weak_norm is sup over a geometric lambda-grid of lambda^p
    times the fraction of points with g_f > lambda.  Chebyshev gives
    weak_norm <= strong_norm always.
    """

    p: float
    level: int
    r_grid: tuple
    g_values: np.ndarray
    strong_norm: float
    weak_norm: float
    lambda_grid: tuple
    lusin_constant: float | None
    anchor_points: tuple | None = None


def maximal_function(
    f: PAFunction,
    anchors=None,
    p=2,
    r_grid=None,
    m: int | None = None,
    lusin_pairs: int = 512,
    seed: int = 0,
) -> MaximalReport:
    """Evaluate the ball maximal function of |df| at level-m resolution.

    anchors=None evaluates at every level-m cell attachment point, so the
    norms are exact norms against the anchor measure; an explicit list of
    lattice points evaluates there instead.  The radius grid must be
    triadic at level m; the default is 3^-j for j = 0..m-1.  The report
    also records the smallest constant C with |f(x)-f(y)| <= C d(x,y)^alpha
    (g(x)+g(y)) over sampled point pairs, alpha the critical exponent.
    """
    p = _check_finite_power(p)
    if not isinstance(f, PAFunction):
        raise TypeError("maximal functions need a piecewise-affine input")
    if m is None:
        m = max(f.level, 3)
        if anchors is not None:
            m = max([m] + [a.m for a in anchors])
    m = int(m)
    if m < f.level:
        raise ValueError("the resolution must be at least f.level")
    if m > max_level():
        raise ValueError(f"level {m} exceeds the configured maximum")
    slopes = _edge_slope_table(f, m)
    mass = np.abs(slopes) ** p * 3.0**-m
    profiles = edge_mass_profiles(mass, m)
    if anchors is None:
        words = cell_words(m)
        keys = anchor_keys(m)
        pts = None
    else:
        rows = []
        ks = []
        for a in anchors:
            digits, key = address_digits(a, m)
            rows.append(digits)
            ks.append(key)
        words = np.array(rows, dtype=np.uint8).reshape(len(rows), m)
        keys = np.array(ks, dtype=np.uint8)
        pts = tuple(anchors)
    D = key_distance_tensor(words, keys, m)
    if r_grid is None:
        grid = tuple(Fraction(1, 3**j) for j in range(m)) or (Fraction(1),)
    else:
        grid = tuple(Fraction(r) for r in r_grid)
    units = []
    for r in grid:
        u = r * 3**m
        if u.denominator != 1 or u <= 0:
            raise ValueError(f"radius {r} is not triadic at level {m}")
        units.append(int(u))
    gp = np.zeros(words.shape[0])
    for u in units:
        inside = edge_mass_bulk(words, keys, m, u, profiles, D)
        vol = ball_volume_bulk(words, keys, m, u, D)
        gp = np.maximum(gp, inside / vol)
    g_values = gp ** (1.0 / p)
    strong = float(gp.mean())
    positive = g_values[g_values > 0]
    if positive.size:
        lam = np.geomspace(float(positive.min()), float(g_values.max()), 32)
        weak = float(max(lv**p * float((g_values > lv).mean()) for lv in lam))
        lam_grid = tuple(float(lv) for lv in lam)
    else:
        weak = 0.0
        lam_grid = ()
    lusin = None
    n_pts = words.shape[0]
    if lusin_pairs and n_pts > 1:
        rng = np.random.default_rng(seed)
        k = min(lusin_pairs, n_pts * (n_pts - 1))
        xs = rng.integers(0, n_pts, size=k)
        ys = rng.integers(0, n_pts, size=k)
        dmat = pairwise_distance_units(
            words[xs], keys[xs], D[xs], words[ys], keys[ys], D[ys], m
        )
        d = np.diagonal(dmat) * 3.0**-m
        if pts is None:
            fv = anchor_cell_function(f, m).values
        else:
            fv = np.array([f.evaluate(a) for a in pts])
        den = d ** alpha_p(p) * (g_values[xs] + g_values[ys])
        live = (d > 0) & (den > 0)
        if live.any():
            lusin = float((np.abs(fv[xs] - fv[ys])[live] / den[live]).max())
    return MaximalReport(
        p=p,
        level=m,
        r_grid=tuple(float(r) for r in grid),
        g_values=g_values,
        strong_norm=strong,
        weak_norm=weak,
        lambda_grid=lam_grid,
        lusin_constant=lusin,
        anchor_points=pts,
    )


def gradient_scaling_fit(p=2, k_range=range(2, 7)) -> FitResult:
    """Decay of the cross maximal function into a hanging branch.

    The evaluation point at step k sits at geodesic distance 3^-k from the
    level-0 skeleton (along the branch attached at the midpoint of one
    arm); self-similarity of the branch makes g scale like the distance to
    the power (1 - log5/log3)/2.
    """
    f = cross_function()
    pts = []
    for k in k_range:
        k = int(k)
        word = (2,) + (5,) * (k - 1)
        x = cell_map(word).key_points()[0]
        rep = maximal_function(f, anchors=[x], p=p, m=k + 1, lusin_pairs=0)
        pts.append((3.0**-k, float(rep.g_values[0])))
    return fit_loglog(pts)


@dataclass(frozen=True)
class HajlaszReport:
    """Strong norms and weak quasinorms of g_f across resolutions.

    Divergence of the strong norm with bounded weak quasinorm is the
    numerical signature that no L^p Hajlasz gradient exists for the tested
    function.
    """

    p: float
    levels: tuple
    strong: tuple
    weak: tuple

    @property
    def increments(self) -> tuple:
        return tuple(
            b - a for a, b in zip(self.strong[:-1], self.strong[1:])
        )

    @property
    def weak_band(self) -> float:
        lo = min(self.weak)
        return max(self.weak) / lo if lo > 0 else math.inf


def hajlasz_divergence(f: PAFunction, p=2, m_range=range(3, 8)) -> HajlaszReport:
    """Scan strong and weak maximal-function norms over resolutions."""
    levels = tuple(int(v) for v in m_range)
    if not levels:
        raise ValueError("the resolution range is empty")
    strong = []
    weak = []
    for m in levels:
        rep = maximal_function(f, p=p, m=m, lusin_pairs=0)
        strong.append(rep.strong_norm)
        weak.append(rep.weak_norm)
    return HajlaszReport(float(p), levels, tuple(strong), tuple(weak))


# ---------------------------------------------------------------------------
# Averaging interpolants
# ---------------------------------------------------------------------------


def phi_n(f, n: int, exact: bool | None = None) -> PAFunction:
    """The level-n averaging interpolant of f.

    Each level-n vertex v receives the mu-average of f over the union of
    the level-(n+1) cells containing v (its averaging star; one cell for
    outer corners and cell centers, two for shared corners), and the result
    interpolates these values piecewise-affinely.  The hat functions used
    for the interpolation form a partition of unity, so a constant comes
    back unchanged; cell-function inputs must resolve level n+2.
    """
    n = int(n)
    if n < 0:
        raise ValueError("the interpolant level must be nonnegative")
    if isinstance(f, CellFunction) and f.level < n + 2:
        raise ValueError(
            f"cell resolution {f.level} cannot build the level-{n} "
            f"interpolant (needs at least {n + 2})"
        )
    use_exact = (
        isinstance(f, PAFunction) and f.is_exact() if exact is None else bool(exact)
    )
    ints = _cell_integrals(f, n + 1, exact=use_exact)
    g1 = build_graph(n + 1)
    gn = build_graph(n)
    counts = np.zeros(g1.n_vertices, dtype=np.int64)
    if use_exact:
        sums = np.full(g1.n_vertices, Fraction(0), dtype=object)
        for w in range(5 ** (n + 1)):
            for j in range(5):
                vid = g1.cell_vertices[w, j]
                counts[vid] += 1
                sums[vid] += ints[w]
    else:
        sums = np.zeros(g1.n_vertices, dtype=np.float64)
        for j in range(5):
            vids = g1.cell_vertices[:, j]
            np.add.at(counts, vids, 1)
            np.add.at(sums, vids, ints)
    vals = np.empty(gn.n_vertices, dtype=np.float64)
    exact_vals = [None] * gn.n_vertices if use_exact else None
    for i in range(gn.n_vertices):
        vid = g1.index_of(gn.point(i))
        if use_exact:
            fr = sums[vid] * 5 ** (n + 1) / counts[vid]
            exact_vals[i] = fr
            vals[i] = float(fr)
        else:
            vals[i] = sums[vid] * 5.0 ** (n + 1) / counts[vid]
    return PAFunction.from_vertex_values(n, vals, exact_vals)


def interpolant_sup_errors(f: PAFunction, n_range=range(0, 4)) -> tuple:
    """Sup-norm distance from f to its averaging interpolants over the
    level-(n+2) vertices, one value per n."""
    out = []
    for n in n_range:
        n = int(n)
        diff = f - phi_n(f, n)
        level = max(diff.level, n + 2)
        out.append(float(np.abs(diff.cell_values(level)).max()))
    return tuple(out)


# ---------------------------------------------------------------------------
# K-functional upper bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KFuncReport:
    """Upper K-functional bounds against double-integral energies.

    For each grid radius, k_values holds the best candidate value of
    ||f-h||_p + r^alpha E_p(h)^(1/p) over the averaging interpolants near
    the radius scale and the constant decomposition; e_values holds
    E_p(f,r)^(1/p).  The true K-functional is an infimum over all
    decompositions, so k_values only bounds it from above; comparability
    shows up as a bounded ratio band.
    """

    p: float
    theta: float
    r_grid: tuple
    e_values: tuple
    e_errors: tuple
    k_values: tuple
    ratios: tuple
    decompositions: tuple

    def __post_init__(self):
        if any(k < 0 for k in self.k_values):
            raise ValueError("K-functional bounds must be nonnegative")

    @property
    def band(self) -> float:
        live = [r for r in self.ratios if r > 0 and math.isfinite(r)]
        return max(live) / min(live) if live else math.nan


def k_functional_scan(
    f: PAFunction,
    p=2,
    r_grid=None,
    alpha: float | None = None,
    n_max: int = 4,
    margin: int = 1,
) -> KFuncReport:
    """Scan K_up(f, r^alpha) / E_p(f, r)^(1/p) over a triadic radius grid.

    Candidate decompositions f = g + h take h to be an averaging
    interpolant with scale near r (n within one level of -log3 r, capped at
    n_max) or the constant mean; K_up minimizes ||g||_p + r^alpha
    E_p(h)^(1/p) over them.  alpha defaults to the critical exponent
    alpha_p; theta records alpha / alpha_p.
    """
    p = _check_finite_power(p)
    if not isinstance(f, PAFunction):
        raise TypeError("K-functional scans need a piecewise-affine input")
    ap = alpha_p(p)
    a = ap if alpha is None else float(alpha)
    grid = tuple(
        Fraction(r) for r in (r_grid if r_grid is not None else
                              [Fraction(2, 3**k) for k in range(5)])
    )
    if not grid or any(r <= 0 or r > 2 for r in grid):
        raise ValueError("grid radii must lie in (0, 2]")
    mean_c = f.mean_exact() if f.is_exact() else f.mean()
    mean_norm = mu_integral(f - mean_c, p).value ** (1.0 / p)
    cache: dict[int, tuple[float, float]] = {}

    def candidate(n: int) -> tuple[float, float]:
        if n not in cache:
            phi = phi_n(f, n)
            g_norm = mu_integral(f - phi, p).value ** (1.0 / p)
            h_sem = float(discrete_energy(phi, p, level=n)) ** (1.0 / p)
            cache[n] = (g_norm, h_sem)
        return cache[n]

    e_vals, e_errs, k_vals, ratios, decos = [], [], [], [], []
    for r in grid:
        t = float(r) ** a
        best_k = mean_norm
        best = {"kind": "mean", "n": None, "g_norm": mean_norm, "h_seminorm": 0.0}
        n0 = round(-math.log(float(r)) / math.log(3.0))
        for n in sorted({min(max(v, 0), n_max) for v in (n0 - 1, n0, n0 + 1)}):
            g_norm, h_sem = candidate(n)
            k = g_norm + t * h_sem
            if k < best_k:
                best_k = k
                best = {"kind": "interpolant", "n": n, "g_norm": g_norm, "h_seminorm": h_sem}
        mk = f.level
        while Fraction(1, 3**mk) > r / 3:
            mk += 1
        mk = min(mk + max(int(margin), 0), max_level())
        est = ks_energy(f, r, p, m=mk)
        e_val = est.value ** (1.0 / p)
        e_vals.append(e_val)
        e_errs.append(est.error)
        k_vals.append(best_k)
        if e_val > 0:
            ratios.append(best_k / e_val)
        else:
            ratios.append(0.0 if best_k == 0 else math.inf)
        decos.append(best)
    return KFuncReport(
        p=p,
        theta=a / ap,
        r_grid=tuple(float(r) for r in grid),
        e_values=tuple(e_vals),
        e_errors=tuple(e_errs),
        k_values=tuple(k_vals),
        ratios=tuple(ratios),
        decompositions=tuple(decos),
    )


# ---------------------------------------------------------------------------
# Experiment runner
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentResult:
    """One experiment's values, the bounds they were checked against, and
    the overall verdict."""

    name: str
    parameters: dict
    values: dict
    bounds: dict
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "parameters": self.parameters,
            "values": self.values,
            "bounds": self.bounds,
            "passed": self.passed,
        }


def _exp_morrey(quick: bool) -> ExperimentResult:
    corners = cell_map(()).key_points()
    pair = morrey_check(
        cross_function(), p=2, pairs=[(corners[0], corners[1])]
    )
    n_funcs = 20 if quick else 100
    n_pairs = 200 if quick else 1000
    worst = 0.0
    for s in range(n_funcs):
        f = random_pa(1 + s % 3, seed=s)
        rep = morrey_check(f, p=2, n_pairs=n_pairs, seed=s)
        worst = max(worst, rep.max_ratio)
    values = {"cross_pair_ratio": pair.max_ratio, "max_random_ratio": worst}
    bounds = {"cross_pair_ratio": 0.5, "max_random_ratio": 1.0 + 1e-12}
    passed = abs(pair.max_ratio - 0.5) <= 1e-12 and worst <= 1.0 + 1e-12
    return ExperimentResult(
        "morrey",
        {"p": 2, "functions": n_funcs, "pairs": n_pairs},
        values,
        bounds,
        passed,
    )


def _exp_poincare(quick: bool) -> ExperimentResult:
    f = cross_function()
    target = 2.0 / 21.0
    central = []
    for n in range(1, 6):
        rep = poincare_check(f, Region.ball(CENTER, Fraction(1, 3**n)), p=2)
        central.append(rep.scaled_ratio)
    dev = max(abs(v - target) for v in central)
    n_funcs = 10 if quick else 50
    rng = np.random.default_rng(2)
    worst = 0.0
    ok = True
    g2 = build_graph(2)
    for s in range(n_funcs):
        h = random_pa(1 + s % 2, seed=100 + s)
        vid = int(rng.integers(0, g2.n_vertices))
        k = int(rng.integers(1, 3))
        region = Region.ball(g2.point(vid), Fraction(1, 3**k))
        try:
            rep = poincare_check(h, region, p=2)
        except ValueError:
            continue
        ok = ok and rep.ok
        worst = max(worst, (rep.ratio - rep.lhs_error / rep.rhs) if rep.rhs > 0 else 0.0)
    values = {
        "central_ratios": central,
        "central_max_deviation": dev,
        "max_random_ratio": worst,
    }
    bounds = {"central_ratio": target, "central_tolerance": 1e-9, "ratio": 1.0}
    passed = dev <= 1e-9 and ok
    return ExperimentResult(
        "poincare", {"p": 2, "functions": n_funcs}, values, bounds, passed
    )


def _exp_sharpness(quick: bool) -> ExperimentResult:
    fit2 = sharpness_fit(p=2)
    fit1 = sharpness_fit(p=1)
    values = {
        "exponent_p2": fit2.exponent,
        "constant_p2": fit2.constant,
        "residual_p2": fit2.residual,
        "exponent_p1": fit1.exponent,
        "residual_p1": fit1.residual,
    }
    bounds = {
        "exponent_p2": 2 + DIM_H,
        "exponent_p1": 1 + DIM_H,
        "residual": 1e-6,
    }
    passed = (
        abs(fit2.exponent - (2 + DIM_H)) <= 1e-6
        and abs(fit1.exponent - (1 + DIM_H)) <= 1e-6
        and fit2.residual <= 1e-6
        and fit1.residual <= 1e-6
    )
    return ExperimentResult(
        "sharpness", {"n_range": [1, 5]}, values, bounds, passed
    )


def _exp_maximal(quick: bool) -> ExperimentResult:
    ks = range(2, 6) if quick else range(2, 7)
    fit = gradient_scaling_fit(p=2, k_range=ks)
    target = (1 - DIM_H) / 2
    rep = maximal_function(cross_function(), p=2, m=4)
    values = {
        "scaling_exponent": fit.exponent,
        "chebyshev_gap": rep.strong_norm - rep.weak_norm,
        "lusin_constant": rep.lusin_constant,
    }
    bounds = {"scaling_exponent": target, "tolerance": 0.15, "chebyshev_gap": 0.0}
    passed = abs(fit.exponent - target) <= 0.15 and rep.weak_norm <= rep.strong_norm + 1e-12
    return ExperimentResult(
        "maximal", {"p": 2, "k_range": [min(ks), max(ks)]}, values, bounds, passed
    )


def _exp_hajlasz(quick: bool) -> ExperimentResult:
    m_range = range(3, 7) if quick else range(3, 8)
    rep = hajlasz_divergence(cross_function(), p=2, m_range=m_range)
    inc = rep.increments
    increasing = all(v > 0 for v in inc)
    steady = all(b >= 0.4 * a for a, b in zip(inc[:-1], inc[1:]))
    band = rep.weak_band
    values = {
        "levels": list(rep.levels),
        "strong": list(rep.strong),
        "weak": list(rep.weak),
        "weak_band": band,
    }
    bounds = {"increment_factor": 0.4, "weak_band": 4.0}
    passed = increasing and steady and band <= 4.0
    return ExperimentResult(
        "hajlasz", {"p": 2, "m_range": [min(m_range), max(m_range)]}, values, bounds, passed
    )


def _exp_interpolant(quick: bool) -> ExperimentResult:
    one = PAFunction.from_key_values([1, 1, 1, 1], 1)
    part = phi_n(one, 2)
    rng = np.random.default_rng(5)
    g4 = build_graph(4)
    ids = rng.integers(0, g4.n_vertices, size=1000)
    part_dev = max(
        abs(part.evaluate_exact(g4.point(int(i))) - 1) for i in ids
    )
    f = cross_function()
    p2 = phi_n(f, 2)
    sup_v2 = float(np.abs((f - p2).cell_values(2)).max())
    lip = distance_function(0)
    errs = interpolant_sup_errors(lip, range(0, 4))
    decay_ok = all(b <= a / 2 for a, b in zip(errs[:-1], errs[1:]))
    values = {
        "partition_deviation": float(part_dev),
        "cross_sup_v2": sup_v2,
        "lipschitz_sup_errors": list(errs),
    }
    bounds = {"partition_deviation": 0.0, "cross_sup_v2": 2 * 3.0**-2, "decay_factor": 2.0}
    passed = part_dev == 0 and sup_v2 <= 2 * 3.0**-2 and decay_ok
    return ExperimentResult("interpolant", {"n": 2}, values, bounds, passed)


def _exp_kfunc(quick: bool) -> ExperimentResult:
    funcs = {
        "cross": cross_function(),
        "random_a": random_pa(2, seed=11),
        "random_b": random_pa(3, seed=12),
    }
    bands = {}
    ok = True
    cross_r2 = None
    for name, f in funcs.items():
        rep = k_functional_scan(f, p=2)
        bands[name] = rep.band
        ok = ok and all(math.isfinite(v) and v > 0 for v in rep.ratios)
        ok = ok and rep.band <= 400.0
        if name == "cross":
            cross_r2 = rep.k_values[0]
    limit = math.sqrt(8.0 / 21.0)
    values = {"bands": bands, "cross_k_at_2": cross_r2}
    bounds = {"band": 400.0, "cross_k_at_2": limit}
    passed = ok and cross_r2 <= limit + 1e-9
    return ExperimentResult("kfunctional", {"p": 2}, values, bounds, passed)


_EXPERIMENTS = {
    "morrey": _exp_morrey,
    "poincare": _exp_poincare,
    "sharpness": _exp_sharpness,
    "maximal": _exp_maximal,
    "hajlasz": _exp_hajlasz,
    "interpolant": _exp_interpolant,
    "kfunctional": _exp_kfunc,
}


def experiment_names() -> tuple:
    return tuple(sorted(_EXPERIMENTS))


def _run_one(args) -> ExperimentResult:
    name, quick = args
    return _EXPERIMENTS[name](quick)


def run_all(
    names=None, quick: bool = False, workers: int = 1
) -> list[ExperimentResult]:
    """Run the named experiments (default: all), sorted by name.

    Each experiment is a pure function of its parameters, so the runner
    may fan out to worker processes; results are merged in name order
    regardless of completion order.
    """
    chosen = sorted(_EXPERIMENTS if names is None else names)
    unknown = [n for n in chosen if n not in _EXPERIMENTS]
    if unknown:
        raise ValueError(f"unknown experiments: {', '.join(unknown)}")
    jobs = [(n, quick) for n in chosen]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    return results
