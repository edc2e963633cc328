"""Exact geometry of the Vicsek fractal and its cable-system approximations.

The Vicsek set K is the attractor of five similarities of ratio 1/3 on the
unit square: four fix a corner, one fixes the center.  The level-m cable
system is a tree with 4*5^m + 1 vertices and 4*5^m edges of geodesic length
3^-m; every vertex has coordinates (a, b) / (2*3^m) with integer a, b, so all
structural predicates (dedup, membership, adjacency) are exact.

Distances are geodesic (tree) distances, not Euclidean ones.  They are exact
rationals with denominator 3^m; this module computes them three independent
ways (breadth-first search on the explicit graph, scalar recursive descent
through the cell address tree, and a vectorized integer engine for bulk
queries) so the routes can be cross-checked.
"""

from __future__ import annotations

import math
import os
import struct
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

# ---------------------------------------------------------------------------
# Constants and static tables
# ---------------------------------------------------------------------------

#: Hausdorff dimension of K for the geodesic metric, log 5 / log 3.
DIM_H = math.log(5.0) / math.log(3.0)

#: Geodesic diameter of K (corner to opposite corner through the center).
DIAMETER = 2.0

#: Hard cap on explicit graph construction, overridable via VICSEK_MAX_LEVEL.
DEFAULT_MAX_LEVEL = 10

#: Diagonally opposite corner index; corners 1,2,3,4 sit TL,TR,BR,BL.
OPPOSITE = (0, 3, 4, 1, 2)
OPPOSITE6 = np.array([0, 3, 4, 1, 2, 0], dtype=np.int64)  # index 5 unused

#: Fixed-point numerators over denominator 2 in the unit-square frame:
#: q1=(0,1), q2=(1,1), q3=(1,0), q4=(0,0), q5=(1/2,1/2).
KEY_NUM = ((0, 0), (0, 2), (2, 2), (2, 0), (0, 0), (1, 1))

#: Geodesic distance between key points of one cell, in units of one edge
#: length at the cell's level: 1 from center to corner, 2 between corners.
K2K = tuple(
    tuple(0 if i == j else (1 if 5 in (i, j) else 2) for j in range(6))
    for i in range(6)
)
K2K_ARR = np.array(K2K, dtype=np.int64)


def _child_key_tables() -> tuple[np.ndarray, np.ndarray]:
    """Exit-key and offset tables to push a key-point distance one level down.

    For a point inside child c of a cell, the distance to the parent cell's
    key point kappa equals the distance to key point e of child c plus a
    fixed offset o counted in child edge lengths:

        c == 5:      e = kappa, o = 0 if kappa == 5 else 2
        kappa == c:  e = c, o = 0
        kappa == 5:  e = opposite(c), o = 1
        otherwise:   e = opposite(c), o = 4
    """
    exit_key = [[0] * 6 for _ in range(6)]
    offset = [[0] * 6 for _ in range(6)]
    for c in range(1, 6):
        for kappa in range(1, 6):
            if c == 5:
                exit_key[c][kappa] = kappa
                offset[c][kappa] = 0 if kappa == 5 else 2
            elif kappa == c:
                exit_key[c][kappa] = c
                offset[c][kappa] = 0
            elif kappa == 5:
                exit_key[c][kappa] = OPPOSITE[c]
                offset[c][kappa] = 1
            else:
                exit_key[c][kappa] = OPPOSITE[c]
                offset[c][kappa] = 4
    return np.array(exit_key, dtype=np.int64), np.array(offset, dtype=np.int64)


EXIT_KEY, EXIT_OFFSET = _child_key_tables()

#: Offsets (in child-span units) of the five subcells inside a cell's square.
CHILD_OFF = ((0, 0), (0, 2), (2, 2), (2, 0), (0, 0), (1, 1))


class AddressError(ValueError):
    """A word has digits outside 1..5, or a point does not lie where claimed."""


class ResourceLimitError(RuntimeError):
    """A requested construction exceeds the configured level budget."""


def max_level() -> int:
    """Graph-construction level cap (VICSEK_MAX_LEVEL env var, default 10)."""
    raw = os.environ.get("VICSEK_MAX_LEVEL", "")
    try:
        return int(raw) if raw else DEFAULT_MAX_LEVEL
    except ValueError:
        return DEFAULT_MAX_LEVEL


def check_word(word) -> tuple:
    word = tuple(int(d) for d in word)
    if any(d < 1 or d > 5 for d in word):
        raise AddressError(f"address digits must be in 1..5, got {word}")
    return word


# ---------------------------------------------------------------------------
# Lattice points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticePoint:
    """A point (a, b) / (2*3^m) of the triadic lattice, in canonical form.

    Canonical means m is minimal: a and b are not both divisible by 3 unless
    m == 0.  Equality and hashing therefore agree with geometric equality.
    """

    a: int
    b: int
    m: int

    @staticmethod
    def make(a: int, b: int, m: int) -> "LatticePoint":
        if m < 0:
            raise ValueError("scale must be nonnegative")
        while m > 0 and a % 3 == 0 and b % 3 == 0:
            a //= 3
            b //= 3
            m -= 1
        return LatticePoint(a, b, m)

    @staticmethod
    def key_point(j: int) -> "LatticePoint":
        if not 1 <= j <= 5:
            raise AddressError(f"key index must be in 1..5, got {j}")
        qa, qb = KEY_NUM[j]
        return LatticePoint.make(qa, qb, 0)

    def at_scale(self, level: int) -> tuple[int, int]:
        """Numerators over 2*3^level; requires level >= self.m."""
        if level < self.m:
            raise ValueError(f"point needs scale >= {self.m}, got {level}")
        f = 3 ** (level - self.m)
        return self.a * f, self.b * f

    def coords(self) -> tuple[Fraction, Fraction]:
        den = 2 * 3**self.m
        return Fraction(self.a, den), Fraction(self.b, den)

    def floats(self) -> tuple[float, float]:
        den = 2.0 * 3.0**self.m
        return self.a / den, self.b / den


CENTER = LatticePoint.key_point(5)
CORNERS = tuple(LatticePoint.key_point(j) for j in range(1, 5))


# ---------------------------------------------------------------------------
# Addresses and cell maps
# ---------------------------------------------------------------------------


def word_index(word) -> int:
    """Lexicographic index of a word among all words of its length."""
    idx = 0
    for d in word:
        idx = idx * 5 + (d - 1)
    return idx


def index_word(idx: int, length: int) -> tuple:
    digits = []
    for _ in range(length):
        digits.append(idx % 5 + 1)
        idx //= 5
    return tuple(reversed(digits))


@dataclass(frozen=True)
class CellMap:
    """The similarity Psi_w mapping K onto the cell with address w.

    Psi_w(z) = z / 3^n + t with n = len(w); the translation t has exact
    numerators (tx, ty) over 2*3^n, built by t(w . c) = 3 t(w) + 2 q_c.
    """

    word: tuple
    tx: int
    ty: int

    @staticmethod
    def for_word(word) -> "CellMap":
        word = check_word(word)
        tx = ty = 0
        for d in word:
            qa, qb = KEY_NUM[d]
            tx = 3 * tx + 2 * qa
            ty = 3 * ty + 2 * qb
        return CellMap(word, tx, ty)

    @property
    def level(self) -> int:
        return len(self.word)

    def apply(self, p: LatticePoint) -> LatticePoint:
        n = self.level
        f = 3**p.m
        return LatticePoint.make(p.a + self.tx * f, p.b + self.ty * f, p.m + n)

    def key_points(self) -> tuple:
        return tuple(self.apply(LatticePoint.key_point(j)) for j in range(1, 6))

    def invert(self, p: LatticePoint) -> LatticePoint:
        """Preimage of a point of this cell under Psi_w."""
        n = self.level
        level = max(p.m, n)
        pa, pb = p.at_scale(level)
        f = 3 ** (level - n)
        a = pa - self.tx * f
        b = pb - self.ty * f
        span = 2 * 3 ** (level - n)
        if not (0 <= a <= span and 0 <= b <= span):
            raise AddressError(f"{p} is not in cell {self.word}")
        return LatticePoint.make(a, b, level - n)


def cell_map(word) -> CellMap:
    return CellMap.for_word(word)


def address_digits(p: LatticePoint, level: int) -> tuple[tuple, int]:
    """Leaf word of length `level` containing p, and p's key index in it.

    Points shared by two cells are assigned deterministically (lowest digit
    wins).  Raises AddressError if p does not lie on the fractal or is not a
    key point of its leaf (i.e. not a vertex of V_j for some j <= level).
    """
    if level < p.m:
        raise AddressError(f"point at scale {p.m} needs level >= {p.m}")
    A, B = p.at_scale(level)
    x0 = y0 = 0
    digits = []
    for k in range(level):
        span = 2 * 3 ** (level - k - 1)  # numerator span of one child
        placed = False
        for c in range(1, 6):
            ox, oy = CHILD_OFF[c]
            cx = x0 + ox * span
            cy = y0 + oy * span
            if cx <= A <= cx + span and cy <= B <= cy + span:
                digits.append(c)
                x0, y0 = cx, cy
                placed = True
                break
        if not placed:
            raise AddressError(f"point {p} is not on the fractal")
    for j in range(1, 6):
        ox, oy = KEY_NUM[j]
        if A == x0 + ox and B == y0 + oy:
            return tuple(digits), j
    raise AddressError(f"point {p} is not a vertex at level {level}")


# ---------------------------------------------------------------------------
# Exact scalar geodesic distances
# ---------------------------------------------------------------------------


def _down_units(digits, key, level, kfrom, target_key) -> int:
    """Distance, in units of 3^-level, from the point described by
    (digits, key) to key point `target_key` of its level-`kfrom` ancestor."""
    kappa = target_key
    units = 0
    for k in range(kfrom, level):
        c = digits[k]
        units += int(EXIT_OFFSET[c][kappa]) * 3 ** (level - k - 1)
        kappa = int(EXIT_KEY[c][kappa])
    return units + K2K[key][kappa]


def distance_units(x: LatticePoint, y: LatticePoint, level: int | None = None) -> tuple[int, int]:
    """Exact geodesic distance as (units, L): d = units * 3^-L."""
    L = max(x.m, y.m)
    if level is not None:
        L = max(L, level)
    wx, kx = address_digits(x, L)
    wy, ky = address_digits(y, L)
    split = L
    for i in range(L):
        if wx[i] != wy[i]:
            split = i
            break
    if split == L:
        return K2K[kx][ky], L
    ca, cb = wx[split], wy[split]
    if ca != 5 and cb != 5:
        u = _down_units(wx, kx, L, split + 1, OPPOSITE[ca])
        v = _down_units(wy, ky, L, split + 1, OPPOSITE[cb])
        return u + v + 2 * 3 ** (L - split - 1), L
    if ca == 5:
        u = _down_units(wx, kx, L, split + 1, cb)
        v = _down_units(wy, ky, L, split + 1, OPPOSITE[cb])
        return u + v, L
    u = _down_units(wx, kx, L, split + 1, OPPOSITE[ca])
    v = _down_units(wy, ky, L, split + 1, ca)
    return u + v, L


def distance(x: LatticePoint, y: LatticePoint) -> Fraction:
    """Exact geodesic distance between two lattice points of K."""
    units, L = distance_units(x, y)
    return Fraction(units, 3**L)


def segment_projection(x: LatticePoint, u: LatticePoint, v: LatticePoint) -> tuple[Fraction, Fraction]:
    """(d*, t*) for the geodesic segment [u, v] in a tree: d* is the distance
    from x to the segment, t* the arclength position of the nearest point
    measured from u: with L = d(u,v),

        d* = (d(x,u) + d(x,v) - L) / 2,   t* = (d(x,u) - d(x,v) + L) / 2.
    """
    du = distance(x, u)
    dv = distance(x, v)
    length = distance(u, v)
    return (du + dv - length) / 2, (du - dv + length) / 2


# ---------------------------------------------------------------------------
# Cable graph
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class CableGraph:
    """Explicit level-m cable system: a tree with 4*5^m+1 vertices and 4*5^m
    edges of length 3^-m.

    Vertices are sorted lexicographically by their exact numerators at scale
    m, edges by (owning cell, corner index).  Every edge joins the center of
    its owning cell to one of that cell's four corners; it is stored oriented
    rootward (`lo` is the endpoint nearer the center of K).
    """

    level: int
    coords: np.ndarray        # (N, 2) int64 numerators over 2*3^m
    edges_lo: np.ndarray      # (E,) int64 vertex ids, rootward endpoint
    edges_hi: np.ndarray      # (E,) int64 vertex ids, leafward endpoint
    edge_cell: np.ndarray     # (E,) int64 owning-cell word index
    edge_corner: np.ndarray   # (E,) int64 corner key 1..4 within the cell
    cell_vertices: np.ndarray  # (5^m, 5) int64 vertex ids of (q1..q4, q5)
    vert_word: np.ndarray     # (N, m) uint8 leaf word of each vertex
    vert_key: np.ndarray      # (N,) uint8 key index 1..5 inside the leaf
    depth: np.ndarray         # (N,) int64 edge count to the root
    parent: np.ndarray        # (N,) int64 rootward neighbor (-1 at root)
    parent_edge: np.ndarray   # (N,) int64 edge id to parent (-1 at root)
    root: int = 0
    _packed: np.ndarray = field(repr=False, default=None)
    _key_dist: np.ndarray = field(repr=False, default=None)
    _bfs_cache: dict = field(repr=False, default=None)

    # -- basic accessors ----------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return int(self.coords.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edges_lo.shape[0])

    @property
    def edge_length(self) -> Fraction:
        return Fraction(1, 3**self.level)

    def point(self, i: int) -> LatticePoint:
        return LatticePoint.make(int(self.coords[i, 0]), int(self.coords[i, 1]), self.level)

    def _pack_stride(self) -> np.int64:
        return np.int64(4 * 3**self.level + 1)

    @property
    def packed_coords(self) -> np.ndarray:
        if self._packed is None:
            self._packed = self.coords[:, 0] * self._pack_stride() + self.coords[:, 1]
        return self._packed

    def index_of(self, p: LatticePoint) -> int:
        A, B = p.at_scale(self.level)
        key = np.int64(A) * self._pack_stride() + np.int64(B)
        pos = int(np.searchsorted(self.packed_coords, key))
        if pos >= self.n_vertices or self.packed_coords[pos] != key:
            raise KeyError(f"{p} is not a vertex at level {self.level}")
        return pos

    def neighbors(self, i: int) -> list[int]:
        out = [int(v) for v in self.edges_hi[np.nonzero(self.edges_lo == i)[0]]]
        out += [int(v) for v in self.edges_lo[np.nonzero(self.edges_hi == i)[0]]]
        return sorted(out)

    # -- metric -------------------------------------------------------------

    def distance_units(self, i: int, j: int) -> int:
        units, _ = distance_units(self.point(i), self.point(j), self.level)
        return units

    def distance(self, i: int, j: int) -> Fraction:
        return Fraction(self.distance_units(i, j), 3**self.level)

    def geodesic_path(self, i: int, j: int) -> tuple[list[int], list[int]]:
        """Vertex and edge id sequences of the unique tree path from i to j."""
        ui, uj = int(i), int(j)
        left_v, left_e = [ui], []
        right_v, right_e = [uj], []
        di, dj = int(self.depth[ui]), int(self.depth[uj])
        while di > dj:
            left_e.append(int(self.parent_edge[ui]))
            ui = int(self.parent[ui])
            left_v.append(ui)
            di -= 1
        while dj > di:
            right_e.append(int(self.parent_edge[uj]))
            uj = int(self.parent[uj])
            right_v.append(uj)
            dj -= 1
        while ui != uj:
            left_e.append(int(self.parent_edge[ui]))
            ui = int(self.parent[ui])
            left_v.append(ui)
            right_e.append(int(self.parent_edge[uj]))
            uj = int(self.parent[uj])
            right_v.append(uj)
        verts = left_v + right_v[-2::-1]
        edges = left_e + right_e[::-1]
        return verts, edges

    def orient(self, i: int, j: int) -> tuple[int, int]:
        """Order an adjacent vertex pair as (rootward, leafward)."""
        if self.depth[i] == self.depth[j]:
            raise ValueError("adjacent vertices differ in depth by exactly 1")
        return (int(i), int(j)) if self.depth[i] < self.depth[j] else (int(j), int(i))

    # -- bulk distance engine -------------------------------------------------

    def key_distances(self) -> np.ndarray:
        """(N, 6, m+1) tensor: D[v, kappa, l] is the distance, in units of
        3^-m, from vertex v to key point kappa of its level-l ancestor cell
        (column 0 of axis 1 is unused padding)."""
        if self._key_dist is None:
            self._key_dist = key_distance_tensor(self.vert_word, self.vert_key, self.level)
        return self._key_dist


def key_distance_tensor(words: np.ndarray, keys: np.ndarray, level: int) -> np.ndarray:
    """Distances from points to all key points of all their ancestor cells.

    words is (N, level) uint8, keys (N,) with values 1..5.  Built by the
    downward recurrence D[., kappa, l] = D[., e, l+1] + o * 3^(level-l-1)
    with (e, o) from the child-key tables.
    """
    n = words.shape[0]
    D = np.zeros((n, 6, level + 1), dtype=np.int64)
    D[:, :, level] = K2K_ARR[keys.astype(np.int64)]
    rows = np.arange(n)
    for ell in range(level - 1, -1, -1):
        c = words[:, ell].astype(np.int64)
        unit = 3 ** (level - ell - 1)
        for kappa in range(1, 6):
            e = EXIT_KEY[c, kappa]
            o = EXIT_OFFSET[c, kappa]
            D[:, kappa, ell] = D[rows, e, ell + 1] + o * unit
    return D


def pairwise_distance_units(
    wa: np.ndarray, ka: np.ndarray, Da: np.ndarray,
    wb: np.ndarray, kb: np.ndarray, Db: np.ndarray,
    level: int,
) -> np.ndarray:
    """All-pairs geodesic distances (units of 3^-level) between two vertex
    families given by leaf words, key indices and key-distance tensors.

    Splits each pair at the first differing address digit: two corner
    children connect through the central sibling (two extra child edges),
    a center/corner pair meets at the shared gateway corner.
    """
    na, nb = wa.shape[0], wb.shape[0]
    ka64 = ka.astype(np.int64)
    kb64 = kb.astype(np.int64)
    if level == 0:
        return K2K_ARR[ka64[:, None], kb64[None, :]].copy()
    neq = wa[:, None, :] != wb[None, :, :]
    split = np.argmax(neq, axis=2)
    same_leaf = ~neq.any(axis=2)
    rows_a = np.arange(na)[:, None]
    rows_b = np.arange(nb)[None, :]
    ca = wa[rows_a, split].astype(np.int64)
    cb = wb[rows_b, split].astype(np.int64)
    lvl1 = split + 1
    a_center = ca == 5
    b_center = cb == 5
    both_corner = ~(a_center | b_center)
    term_a = np.where(
        a_center,
        Da[rows_a, np.where(a_center, cb, 0), lvl1],
        Da[rows_a, OPPOSITE6[ca], lvl1],
    )
    term_b = np.where(
        b_center,
        Db[rows_b, np.where(b_center, ca, 0), lvl1],
        Db[rows_b, OPPOSITE6[cb], lvl1],
    )
    bridge = np.where(both_corner, 2 * 3 ** (level - 1 - split), 0)
    out = term_a + term_b + bridge
    if same_leaf.any():
        out = np.where(same_leaf, K2K_ARR[ka64[:, None], kb64[None, :]], out)
    return out


# ---------------------------------------------------------------------------
# Graph construction
# ---------------------------------------------------------------------------


def cell_words(level: int) -> np.ndarray:
    """(5^level, level) uint8 array of all words in lexicographic order."""
    n_cells = 5**level
    digits = np.zeros((n_cells, level), dtype=np.uint8)
    for k in range(level):
        block = 5 ** (level - k - 1)
        digits[:, k] = np.repeat(np.tile(np.arange(1, 6, dtype=np.uint8), 5**k), block)
    return digits


def cell_translations(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Numerators (over 2*3^level) of Psi_w(0) for all words, lexicographic."""
    tx = np.zeros(1, dtype=np.int64)
    ty = np.zeros(1, dtype=np.int64)
    qa = np.array([KEY_NUM[c][0] for c in range(1, 6)], dtype=np.int64)
    qb = np.array([KEY_NUM[c][1] for c in range(1, 6)], dtype=np.int64)
    for _ in range(level):
        tx = (3 * tx[:, None] + 2 * qa[None, :]).ravel()
        ty = (3 * ty[:, None] + 2 * qb[None, :]).ravel()
    return tx, ty


def build_graph(level: int) -> CableGraph:
    """Construct the level-m cable system with exact integer coordinates."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    cap = max_level()
    if level > cap:
        raise ResourceLimitError(
            f"level {level} exceeds the cap {cap} (set VICSEK_MAX_LEVEL to raise it)"
        )
    return _build_graph_cached(level)


@lru_cache(maxsize=None)
def _build_graph_cached(level: int) -> CableGraph:
    n_cells = 5**level
    digits = cell_words(level)
    tx, ty = cell_translations(level)

    qa_all = np.array([KEY_NUM[j][0] for j in range(1, 6)], dtype=np.int64)
    qb_all = np.array([KEY_NUM[j][1] for j in range(1, 6)], dtype=np.int64)
    px = tx[:, None] + qa_all[None, :]
    py = ty[:, None] + qb_all[None, :]
    stride = np.int64(4 * 3**level + 1)
    flat = (px * stride + py).ravel()
    uniq, first_idx, inv = np.unique(flat, return_index=True, return_inverse=True)
    cell_vertices = inv.reshape(n_cells, 5).astype(np.int64)
    n_verts = uniq.shape[0]
    coords = np.empty((n_verts, 2), dtype=np.int64)
    coords[:, 0] = uniq // stride
    coords[:, 1] = uniq % stride
    vert_word = digits[first_idx // 5] if level > 0 else np.zeros((n_verts, 0), dtype=np.uint8)
    vert_key = (first_idx % 5 + 1).astype(np.uint8)

    centers = np.repeat(cell_vertices[:, 4], 4)
    corners = cell_vertices[:, :4].ravel()
    edge_cell = np.repeat(np.arange(n_cells, dtype=np.int64), 4)
    edge_corner = np.tile(np.arange(1, 5, dtype=np.int64), n_cells)

    # Breadth-first search from the root (the center of K) for depths/parents.
    root_key = np.int64(3**level) * stride + np.int64(3**level)
    root = int(np.searchsorted(uniq, root_key))
    n_edges = centers.shape[0]
    head = np.concatenate([centers, corners])
    tail = np.concatenate([corners, centers])
    eid = np.concatenate([np.arange(n_edges), np.arange(n_edges)])
    order = np.argsort(head, kind="stable")
    head_s, tail_s, eid_s = head[order], tail[order], eid[order]
    starts = np.searchsorted(head_s, np.arange(n_verts + 1))
    depth = np.full(n_verts, -1, dtype=np.int64)
    parent = np.full(n_verts, -1, dtype=np.int64)
    parent_edge = np.full(n_verts, -1, dtype=np.int64)
    depth[root] = 0
    frontier = np.array([root], dtype=np.int64)
    d = 0
    while frontier.size:
        d += 1
        counts = starts[frontier + 1] - starts[frontier]
        idx = np.concatenate([np.arange(starts[v], starts[v + 1]) for v in frontier])
        nxt, via = tail_s[idx], eid_s[idx]
        src = np.repeat(frontier, counts)
        fresh = depth[nxt] < 0
        nxt, via, src = nxt[fresh], via[fresh], src[fresh]
        uniq_next, uidx = np.unique(nxt, return_index=True)
        depth[uniq_next] = d
        parent[uniq_next] = src[uidx]
        parent_edge[uniq_next] = via[uidx]
        frontier = uniq_next
    if (depth < 0).any():
        raise RuntimeError("cable graph is not connected")

    swap = depth[centers] > depth[corners]
    lo = np.where(swap, corners, centers).astype(np.int64)
    hi = np.where(swap, centers, corners).astype(np.int64)
    if not (np.abs(depth[lo] - depth[hi]) == 1).all():
        raise RuntimeError("edge endpoints must differ in depth by 1")

    return CableGraph(
        level=level,
        coords=coords,
        edges_lo=lo,
        edges_hi=hi,
        edge_cell=edge_cell,
        edge_corner=edge_corner,
        cell_vertices=cell_vertices,
        vert_word=vert_word,
        vert_key=vert_key,
        depth=depth,
        parent=parent,
        parent_edge=parent_edge,
        root=root,
    )


def bfs_distance_units(g: CableGraph, source: int) -> np.ndarray:
    """Independent oracle: BFS distance in edge units from `source` to all.

    Results are memoized per graph (bounded, read-only arrays) since ball
    regions query the same few centers at every level.
    """
    cache = g._bfs_cache
    if cache is None:
        cache = {}
        g._bfs_cache = cache
    hit = cache.get(int(source))
    if hit is not None:
        return hit
    n = g.n_vertices
    head = np.concatenate([g.edges_lo, g.edges_hi])
    tail = np.concatenate([g.edges_hi, g.edges_lo])
    order = np.argsort(head, kind="stable")
    head_s, tail_s = head[order], tail[order]
    starts = np.searchsorted(head_s, np.arange(n + 1))
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = deque([int(source)])
    while frontier:
        v = frontier.popleft()
        for k in range(int(starts[v]), int(starts[v + 1])):
            w = int(tail_s[k])
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                frontier.append(w)
    dist.flags.writeable = False
    if len(cache) >= 32:
        cache.pop(next(iter(cache)))
    cache[int(source)] = dist
    return dist


# ---------------------------------------------------------------------------
# Cell anchors
# ---------------------------------------------------------------------------


def anchor_keys(level: int) -> np.ndarray:
    """Key index (1..5) of each level-m cell's attachment vertex, in
    lexicographic cell order.

    The attachment vertex of a cell is the point through which geodesics
    from the center of K enter the cell.  Recursion over the last digit c:
    a(w.5) = a(w); for c <= 4, a(w.c) = c if a(w) == c else opposite(c).
    """
    keys = np.array([5], dtype=np.uint8)
    for _ in range(level):
        prev = keys
        keys = np.empty(prev.shape[0] * 5, dtype=np.uint8)
        for c in range(1, 5):
            keys[c - 1::5] = np.where(prev == c, c, OPPOSITE[c]).astype(np.uint8)
        keys[4::5] = prev
    return keys


def anchor_vertex_ids(g: CableGraph) -> np.ndarray:
    """Vertex id of each level-m cell's attachment vertex."""
    keys = anchor_keys(g.level).astype(np.int64)
    return g.cell_vertices[np.arange(5**g.level), keys - 1]


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------


def alpha_p(p: float) -> float:
    """Critical smoothness exponent 1 - 1/p + dim_H/p."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if math.isinf(p):
        return 1.0
    return 1.0 - 1.0 / p + DIM_H / p


@dataclass(frozen=True)
class MeasureContext:
    """Exact masses of the self-similar measure mu and the length measure nu.

    mu gives each level-n cell mass 5^-n (the normalized dim_H-dimensional
    measure); nu restricted to the level-m skeleton gives each edge its
    length 3^-m.  nu is singular with respect to mu.
    """

    dim_h: float = DIM_H
    diameter: float = DIAMETER

    @staticmethod
    def mu_cell(word) -> Fraction:
        return Fraction(1, 5 ** len(check_word(word)))

    @staticmethod
    def nu_edge(level: int) -> Fraction:
        return Fraction(1, 3**level)

    @staticmethod
    def nu_skeleton(level: int) -> Fraction:
        """Total length of the level-m cable system: 4 * (5/3)^m."""
        return Fraction(4 * 5**level, 3**level)

    @staticmethod
    def alpha(p: float) -> float:
        return alpha_p(p)


# ---------------------------------------------------------------------------
# Ball volumes
# ---------------------------------------------------------------------------

_PSI_MEMO: dict[Fraction, Fraction] = {}
_CHI_MEMO: dict[Fraction, Fraction] = {}


def corner_profile(rho: Fraction) -> Fraction:
    """mu-fraction of K within geodesic distance rho of a corner of K.

    Self-similar recursion over the five subcells as seen from the corner:
    the corner child is entered immediately, the central child after 2/3,
    the three far corner children after 4/3:

        psi(rho) = [psi(3 rho) + psi(3 rho - 2) + 3 psi(3 rho - 4)] / 5,

    with psi = 0 on (-inf, 0] and 1 on [2, inf).  rho = 1 is the unique
    self-referential argument; the equation then solves to psi(1) = 1/4.
    Arguments must have 3-power denominators for the recursion to close.
    """
    if rho <= 0:
        return Fraction(0)
    if rho >= 2:
        return Fraction(1)
    if rho == 1:
        return Fraction(1, 4)
    got = _PSI_MEMO.get(rho)
    if got is None:
        if rho.denominator % 3 != 0:
            raise ValueError("corner_profile needs arguments with 3-power denominators")
        got = (
            corner_profile(3 * rho)
            + corner_profile(3 * rho - 2)
            + 3 * corner_profile(3 * rho - 4)
        ) / 5
        _PSI_MEMO[rho] = got
    return got


def center_profile(rho: Fraction) -> Fraction:
    """mu-fraction of K within geodesic distance rho of the center of K.

    chi(rho) = [chi(3 rho) + 4 psi(3 rho - 1)] / 5, with chi = 1 on [1, inf).
    """
    if rho <= 0:
        return Fraction(0)
    if rho >= 1:
        return Fraction(1)
    got = _CHI_MEMO.get(rho)
    if got is None:
        got = (center_profile(3 * rho) + 4 * corner_profile(3 * rho - 1)) / 5
        _CHI_MEMO[rho] = got
    return got


def _exponent_of_three(n: int) -> int:
    e = 0
    while n % 3 == 0:
        n //= 3
        e += 1
    return e


def ball_volume(center: LatticePoint, r) -> Fraction:
    """Exact mu-measure of the closed geodesic ball B(center, r).

    Decomposes K along the address of the center: at each level the siblings
    of the center's cell are seen through a gateway corner at an exactly
    known distance, and their content is a corner profile of the remaining
    radius.  Requires a radius with 3-power denominator (the natural radii
    of the construction); ball_cells gives two-sided bounds otherwise.
    """
    r = Fraction(r)
    if r <= 0:
        return Fraction(0)
    if r >= 2:
        return Fraction(1)
    e3 = _exponent_of_three(r.denominator)
    if r.denominator != 3**e3:
        raise ValueError("exact ball volumes need radii with 3-power denominators")
    level = max(center.m, e3) + 1
    digits, key = address_digits(center, level)
    total = Fraction(0)
    for ell in range(level):
        cx = digits[ell]
        scale = Fraction(1, 3 ** (ell + 1))
        weight = Fraction(1, 5 ** (ell + 1))
        if cx == 5:
            # Siblings are the four corner children, entered at the central
            # child's corners.
            for c in range(1, 5):
                d_entry = Fraction(_down_units(digits, key, level, ell + 1, c), 3**level)
                total += weight * corner_profile((r - d_entry) / scale)
        else:
            d_gate = Fraction(
                _down_units(digits, key, level, ell + 1, OPPOSITE[cx]), 3**level
            )
            # Central sibling through the gateway corner...
            total += weight * corner_profile((r - d_gate) / scale)
            # ...and the three far corner siblings two child edges beyond it.
            total += 3 * weight * corner_profile((r - d_gate) / scale - 2)
    leaf_rho = r * 3**level
    if key == 5:
        total += Fraction(1, 5**level) * center_profile(leaf_rho)
    else:
        total += Fraction(1, 5**level) * corner_profile(leaf_rho)
    return total


@lru_cache(maxsize=8)
def profile_tables(scale_exp: int) -> tuple[np.ndarray, np.ndarray]:
    """Float tables of the corner/center profiles on the grid u / 3^scale_exp.

    The corner profile solves a fixed-point equation with contraction factor
    3/5 in the sup norm, so plain iteration converges geometrically; the
    center profile then follows by one downward sweep.
    """
    J = 3**scale_exp
    n = 2 * J + 1
    u = np.arange(n)
    lo3, mid3, hi3 = 3 * u, 3 * u - 2 * J, 3 * u - 4 * J

    def clamped(tab: np.ndarray, idx: np.ndarray) -> np.ndarray:
        return np.where(idx <= 0, 0.0, np.where(idx >= 2 * J, 1.0, tab[np.clip(idx, 0, 2 * J)]))

    psi = np.linspace(0.0, 1.0, n)
    for _ in range(130):
        psi = (clamped(psi, lo3) + clamped(psi, mid3) + 3.0 * clamped(psi, hi3)) / 5.0
    psi[0], psi[-1] = 0.0, 1.0
    chi = np.ones(n)
    chi[0] = 0.0
    for uu in range(J - 1, 0, -1):
        c3 = 1.0 if 3 * uu >= J else chi[3 * uu]
        arg = 3 * uu - J
        pv = 0.0 if arg <= 0 else (1.0 if arg >= 2 * J else psi[arg])
        chi[uu] = (c3 + 4.0 * pv) / 5.0
    return psi, chi


def ball_volume_bulk(
    words: np.ndarray,
    keys: np.ndarray,
    level: int,
    r_units: int,
    key_dist: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorized ball volumes mu(B(x, r)) for many vertex centers x.

    words/keys describe vertices as in CableGraph; r_units is the radius in
    units of 3^-level.  Same decomposition as ball_volume, evaluated against
    the profile tables; float output accurate to ~1e-14.
    """
    psi_tab, chi_tab = profile_tables(level)
    J = 3**level
    n = words.shape[0]
    D = key_distance_tensor(words, keys, level) if key_dist is None else key_dist
    rows = np.arange(n)
    total = np.zeros(n, dtype=np.float64)

    def psi_at(idx: np.ndarray) -> np.ndarray:
        return np.where(idx <= 0, 0.0, np.where(idx >= 2 * J, 1.0, psi_tab[np.clip(idx, 0, 2 * J)]))

    for ell in range(level):
        cx = words[:, ell].astype(np.int64)
        weight = 5.0 ** -(ell + 1)
        mult = 3 ** (ell + 1)
        center_mask = cx == 5
        if center_mask.any():
            acc = np.zeros(n)
            for c in range(1, 5):
                d_entry = D[rows, c, ell + 1]
                acc += psi_at((r_units - d_entry) * mult)
            total += np.where(center_mask, weight * acc, 0.0)
        if not center_mask.all():
            d_gate = D[rows, OPPOSITE6[cx], ell + 1]
            idx1 = (r_units - d_gate) * mult
            contrib = weight * (psi_at(idx1) + 3.0 * psi_at(idx1 - 2 * J))
            total += np.where(center_mask, 0.0, contrib)
    leaf_idx = r_units * J  # leaf profile argument is r / 3^-level, on the u/J grid
    if leaf_idx <= 0:
        leaf_psi = leaf_chi = 0.0
    else:
        leaf_psi = 1.0 if leaf_idx >= 2 * J else float(psi_tab[leaf_idx])
        leaf_chi = 1.0 if leaf_idx >= J else float(chi_tab[leaf_idx])
    total += 5.0 ** -level * np.where(keys == 5, leaf_chi, leaf_psi)
    return total


def edge_mass_profiles(mass: np.ndarray, level: int) -> list[np.ndarray]:
    """Corner-anchored cumulative edge-mass profiles of every cell subtree.

    mass is (5^level, 4): an arbitrary nonnegative weight per edge, indexed
    by (cell, corner) as in CableGraph.edge_cell/edge_corner.  The returned
    list has one array per word length l = 0..level; entry l has shape
    (5^l, 4, 2*3^(level-l)) and stores, for each cell w and corner kappa,
    H[w, kappa-1, t] = total weight of the edges inside w whose nearer
    endpoint is at distance <= t (units of 3^-level) from corner kappa of w.

    Built bottom-up with the child-key tables: the distance from a parent
    corner to anything inside child c equals a fixed gateway offset plus the
    distance from the child's exit corner.
    """
    if mass.shape != (5**level, 4):
        raise ValueError("mass must have shape (5^level, 4)")
    leaf = np.empty((5**level, 4, 2), dtype=np.float64)
    leaf[:, :, 0] = mass
    leaf[:, :, 1] = mass.sum(axis=1, keepdims=True)
    tables = [leaf]
    for ell in range(level - 1, -1, -1):
        unit = 3 ** (level - ell - 1)
        child = tables[-1].reshape(5**ell, 5, 4, -1)
        span = child.shape[-1]
        acc = np.zeros((5**ell, 4, 3 * span), dtype=np.float64)
        for c in range(1, 6):
            for kappa in range(1, 5):
                e = int(EXIT_KEY[c, kappa])
                o = int(EXIT_OFFSET[c, kappa]) * unit
                seg = child[:, c - 1, e - 1, :]
                acc[:, kappa - 1, o : o + span] += seg
                acc[:, kappa - 1, o + span :] += seg[:, -1:]
        tables.append(acc)
    tables.reverse()
    return tables


def edge_mass_bulk(
    words: np.ndarray,
    keys: np.ndarray,
    level: int,
    r_units: int,
    profiles: list[np.ndarray],
    key_dist: np.ndarray | None = None,
) -> np.ndarray:
    """Per-center sums of edge masses over edges inside closed balls.

    For each center x described by (words, keys) rows, returns the total
    weight of the level-m edges that lie entirely inside the closed ball
    B(x, r_units * 3^-level), an edge counting as inside when its nearer
    endpoint is at distance <= r_units - 1.  profiles comes from
    edge_mass_profiles on the same weights; the decomposition over sibling
    subtrees mirrors ball_volume_bulk.
    """
    n = words.shape[0]
    D = key_distance_tensor(words, keys, level) if key_dist is None else key_dist
    rows = np.arange(n)
    total = np.zeros(n, dtype=np.float64)
    reach = r_units - 1
    if reach < 0:
        return total
    prefix = np.zeros(n, dtype=np.int64)

    def lookup(table: np.ndarray, cells: np.ndarray, kappa: np.ndarray, rho: np.ndarray) -> np.ndarray:
        span = table.shape[-1]
        vals = table[cells, kappa - 1, np.clip(rho, 0, span - 1)]
        return np.where(rho < 0, 0.0, vals)

    for ell in range(level):
        cx = words[:, ell].astype(np.int64)
        table = profiles[ell + 1]
        center_mask = cx == 5
        if center_mask.any():
            for c in range(1, 5):
                d_entry = D[rows, c, ell + 1]
                sib = prefix * 5 + (c - 1)
                vals = lookup(table, sib, np.full(n, OPPOSITE[c]), reach - d_entry)
                total += np.where(center_mask, vals, 0.0)
        if not center_mask.all():
            d_gate = D[rows, OPPOSITE6[cx], ell + 1]
            cx_safe = np.where(center_mask, 1, cx)
            vals = lookup(table, prefix * 5 + 4, cx_safe, reach - d_gate)
            far = reach - d_gate - 2 * 3 ** (level - ell - 1)
            for s in range(1, 5):
                sib = prefix * 5 + (s - 1)
                hit = (~center_mask) & (cx != s)
                vals += np.where(hit, lookup(table, sib, np.full(n, OPPOSITE[s]), far), 0.0)
            total += np.where(center_mask, 0.0, vals)
        prefix = prefix * 5 + (cx - 1)
    leaf = profiles[level]
    k64 = keys.astype(np.int64)
    own_corner = lookup(leaf, prefix, np.where(k64 == 5, 1, k64), np.full(n, min(reach, 1)))
    total += np.where(k64 == 5, leaf[prefix, 0, 1], own_corner)
    return total


# ---------------------------------------------------------------------------
# Ball cell classification
# ---------------------------------------------------------------------------


@dataclass
class BallApprox:
    """Level-m cell classification of a closed geodesic ball.

    `inner` cells lie entirely inside the ball and `boundary` cells are
    undecided; everything else is outside up to a mu-null contact point.
    mu_lo = |inner| 5^-m and mu_hi = (|inner| + |boundary|) 5^-m bracket
    mu(B).  Cells whose intersection with the closed ball is a single
    gateway vertex are excluded from `boundary` (they carry no measure), so
    triadic radii around vertices classify sharply.
    """

    center: LatticePoint
    radius: Fraction
    level: int
    inner: list
    boundary: list
    mu_lo: Fraction
    mu_hi: Fraction
    exact: Fraction | None = None

    @property
    def mu_mid(self) -> float:
        if self.exact is not None:
            return float(self.exact)
        return float((self.mu_lo + self.mu_hi) / 2)

    @property
    def mu_halfwidth(self) -> float:
        if self.exact is not None:
            return 0.0
        return float((self.mu_hi - self.mu_lo) / 2)


def ball_cells(center: LatticePoint, r, level: int) -> BallApprox:
    """Classify level-m cells against the closed ball B(center, r), exactly.

    For a center outside a cell, the nearest point of the cell is its
    gateway corner and the farthest is 2*3^-m beyond it, both exact; for a
    center inside, the cell diameter bounds the farthest point.  All
    comparisons are closed inequalities on rationals.
    """
    r = Fraction(r)
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0:  # a single point is mu-null
        return BallApprox(center, r, level, [], [], Fraction(0), Fraction(0), Fraction(0))
    c_digits, _ = address_digits(center, max(center.m, level))
    inner: list[tuple] = []
    boundary: list[tuple] = []

    def gateway_distance(word: tuple) -> Fraction:
        cm = CellMap.for_word(word)
        return min(
            distance(center, cm.apply(LatticePoint.key_point(j))) for j in range(1, 5)
        )

    def visit(word: tuple) -> None:
        k = len(word)
        diam = Fraction(2, 3**k)
        inside = c_digits[:k] == word
        if inside:
            far = diam
        else:
            g = gateway_distance(word)
            if g > r:
                return  # entirely outside
            if g == r:
                return  # meets the closed ball in one vertex: mu-null
            far = g + diam
        if far <= r:
            base = word_index(word) * 5 ** (level - k)
            inner.extend(index_word(base + t, level) for t in range(5 ** (level - k)))
            return
        if k == level:
            boundary.append(word)
            return
        for c in range(1, 6):
            visit(word + (c,))

    visit(())
    mu_lo = Fraction(len(inner), 5**level)
    mu_hi = Fraction(len(inner) + len(boundary), 5**level)
    exact = None
    try:
        exact = ball_volume(center, r)
    except ValueError:
        pass
    return BallApprox(center, r, level, inner, boundary, mu_lo, mu_hi, exact)


# ---------------------------------------------------------------------------
# Binary graph cache
# ---------------------------------------------------------------------------

CACHE_MAGIC = b"VCSK1"


def save_graph(g: CableGraph, path: str) -> None:
    """Write the exact graph structure: magic, (level, n_vertices, n_edges)
    header, canonical (a, b, m) vertex triples, then (lo, hi, cell) edges.
    All integers are little-endian 64-bit."""
    n = g.n_vertices
    a = g.coords[:, 0].copy()
    b = g.coords[:, 1].copy()
    m = np.full(n, g.level, dtype=np.int64)
    while True:
        red = (m > 0) & (a % 3 == 0) & (b % 3 == 0)
        if not red.any():
            break
        a[red] //= 3
        b[red] //= 3
        m[red] -= 1
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<QQQ", g.level, n, g.n_edges))
        fh.write(np.stack([a, b, m], axis=1).astype("<i8").tobytes())
        fh.write(
            np.stack([g.edges_lo, g.edges_hi, g.edge_cell], axis=1).astype("<i8").tobytes()
        )


def load_graph(path: str) -> CableGraph:
    """Load a cached graph; the stored exact integers must round-trip against
    a fresh reconstruction, which is returned."""
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != CACHE_MAGIC:
            raise ValueError(f"bad cache magic {magic!r}")
        level, n, e = struct.unpack("<QQQ", fh.read(24))
        triples = np.frombuffer(fh.read(24 * n), dtype="<i8").reshape(n, 3)
        erec = np.frombuffer(fh.read(24 * e), dtype="<i8").reshape(e, 3)
    g = build_graph(int(level))
    if g.n_vertices != n or g.n_edges != e:
        raise ValueError("cache header does not match the reconstruction")
    f = 3 ** (level - triples[:, 2])
    if not (
        np.array_equal(triples[:, 0] * f, g.coords[:, 0])
        and np.array_equal(triples[:, 1] * f, g.coords[:, 1])
    ):
        raise ValueError("cached vertex coordinates do not round-trip")
    if not (
        np.array_equal(erec[:, 0], g.edges_lo)
        and np.array_equal(erec[:, 1], g.edges_hi)
        and np.array_equal(erec[:, 2], g.edge_cell)
    ):
        raise ValueError("cached edge records do not round-trip")
    return g
