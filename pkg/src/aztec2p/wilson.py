"""Biased random walks, loop erasure and Wilson's algorithm.

South forests are weighted a^2 per north step and 1 per south step (the
north forest is the mirror image), so paths drift towards their sinks.
The smooth phase is sampled by running Wilson's algorithm rooted at
infinity on a finite box; a walk leaving the box is absorbed there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from .lattice import DIRS, Direction, LatticeError, TemperleyGraph
from .sampler import ResourceError, as_seed
from .temperley import OrientedForest, backbone, winding


@dataclass(frozen=True)
class BiasedWalkParams:
    direction: Direction
    a: float

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if not self.a > 0:
            raise LatticeError("a must be positive")

    def weights(self) -> np.ndarray:
        north = DIRS[:, 1] > 0
        a2 = self.a**2
        if self.direction == Direction.S:
            return np.where(north, a2, 1.0)
        return np.where(north, 1.0, a2)

    def probabilities(self) -> np.ndarray:
        w = self.weights()
        return w / w.sum()

    def drift(self) -> float:
        """Mean vertical displacement per step, in units of one diagonal step."""
        p = self.probabilities()
        return float(np.sum(p * DIRS[:, 1]))


def biased_walk(params: BiasedWalkParams, start, steps: int, seed=0) -> np.ndarray:
    rng = as_seed(seed).generator()
    codes = rng.choice(4, size=steps, p=params.probabilities())
    moves = 2 * DIRS[codes]
    out = np.empty((steps + 1, 2), dtype=np.int64)
    out[0] = start
    out[1:] = np.asarray(start) + np.cumsum(moves, axis=0)
    return out


def loop_erase(walk) -> list:
    """Chronological loop erasure."""
    walk = [tuple(int(c) for c in v) for v in walk]
    if not walk:
        raise LatticeError("empty walk")
    out: list = []
    pos: dict = {}
    for v in walk:
        k = pos.get(v)
        if k is None:
            pos[v] = len(out)
            out.append(v)
        else:
            for u in out[k + 1 :]:
                del pos[u]
            del out[k + 1 :]
    return out


# --- Wilson core ---------------------------------------------------------------

# nbr[v, d]: target index, -1 for a step that leaves the box (absorbed at
# infinity), -2 for a missing edge (probability zero)


@numba.njit(cache=True)
def _wilson(nbr, cum, in_tree, code, order, rng):
    for s in order:
        u = s
        while not in_tree[u]:
            r = rng.random()
            d = 0
            while d < 3 and r >= cum[u, d]:
                d += 1
            code[u] = d
            t = nbr[u, d]
            if t < 0:
                break
            u = t
        u = s
        while not in_tree[u]:
            in_tree[u] = True
            t = nbr[u, code[u]]
            if t < 0:
                break
            u = t
    return code


def _cumulative(w: np.ndarray) -> np.ndarray:
    w = np.where(np.isnan(w), 0.0, w)
    tot = w.sum(axis=1, keepdims=True)
    tot[tot == 0] = 1.0
    c = np.cumsum(w / tot, axis=1)
    c[:, -1] = np.where(c[:, -1] > 0, 1.0, 0.0)
    return c


def _graph_arrays(g: TemperleyGraph):
    V = len(g.vertices)
    nbr = np.full((V, 4), -2, dtype=np.int64)
    for i, v in enumerate(g.vertices):
        for d in range(4):
            u = g.neighbor(v, d)
            if u is not None:
                nbr[i, d] = g.index[u]
    return nbr


def boustrophedon(verts: np.ndarray) -> np.ndarray:
    """Rows from top to bottom, alternating left-right direction."""
    ys = -verts[:, 1]
    rank = np.unique(ys, return_inverse=True)[1]
    xs = np.where(rank % 2 == 0, verts[:, 0], -verts[:, 0])
    return np.lexsort((xs, ys))


def wilson_forest(
    g: TemperleyGraph,
    fixed: OrientedForest | None = None,
    seed=0,
    order=None,
    a: float | None = None,
) -> OrientedForest:
    """Sample from Forest(G | fixed): walks run until they hit a sink or the fixed part.

    The fixed part keeps its own edges.  Step weights come from ``g`` unless
    ``a`` is given.
    """
    V = len(g.vertices)
    nbr = _graph_arrays(g)
    if a is None:
        w = g.weights
    else:
        p = BiasedWalkParams(g.direction, a).weights()
        w = np.where(nbr >= 0, p[None, :], np.nan)
    cum = _cumulative(w)
    in_tree = np.zeros(V, dtype=np.bool_)
    parent = np.full(V, -1, dtype=np.int64)
    for s in g.sinks:
        in_tree[g.index[s]] = True
    if fixed is not None:
        if fixed.graph.direction != g.direction or fixed.graph.n != g.n:
            raise LatticeError("fixed forest lives on a different graph")
        vs = fixed_vertices(fixed)
        in_tree[vs] = True
        parent[vs] = fixed.parent[vs]
    free = ~in_tree
    dead = free & (np.nansum(np.where(np.isnan(w), 0, w), axis=1) == 0)
    if dead.any():
        raise LatticeError("vertex without outgoing edges")
    _check_reachable(nbr, in_tree)
    if order is None:
        order = boustrophedon(g.vertices)
    order = np.asarray(order, dtype=np.int64)
    code = np.full(V, -1, dtype=np.int64)
    rng = as_seed(seed).generator()
    _wilson(nbr, cum, in_tree, code, order, rng)
    idx = np.nonzero(free)[0]
    parent[idx] = nbr[idx, code[idx]]
    return OrientedForest(g, parent, g.a if a is None else float(a))


def fixed_vertices(f: OrientedForest) -> np.ndarray:
    """Vertices carrying an edge of ``f`` or being a root reached by one."""
    has = f.parent >= 0
    touched = np.zeros(len(f.parent), dtype=bool)
    touched[has] = True
    touched[f.parent[has]] = True
    return np.nonzero(touched)[0]


def _check_reachable(nbr: np.ndarray, in_tree: np.ndarray) -> None:
    V = len(in_tree)
    src, dst = np.nonzero(nbr >= 0)
    tgt = nbr[src, dst]
    # reverse graph: from absorbing set back to everything that can reach it
    root = V
    rows = list(tgt) + [root] * int(in_tree.sum())
    cols = list(src) + list(np.nonzero(in_tree)[0])
    A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(V + 1, V + 1)).tocsr()
    order = breadth_first_order(A, root, directed=True, return_predecessors=False)
    if len(order) != V + 1:
        raise LatticeError("some vertex cannot reach a sink")


def backbone_forest(f: OrientedForest) -> OrientedForest:
    """The union of the backbone paths, as a partial parent map."""
    paths, _ = backbone(f)
    g = f.graph
    par = np.full(len(g.vertices), -1, dtype=np.int64)
    for p in paths:
        ids = [g.index[(int(x), int(y))] for x, y in p.vertices]
        for i, j in zip(ids, ids[1:]):
            par[i] = j
    return OrientedForest(g, par, f.a)


def complete_forest(f: OrientedForest, seed=0, a: float | None = None) -> OrientedForest:
    """Resample everything off the backbone of ``f`` by Wilson's algorithm."""
    from .temperley import temperley_graph

    g = temperley_graph(f.direction, f.n)
    return wilson_forest(g, backbone_forest(f), seed=seed, a=f.a if a is None else a)


# --- smooth phase ---------------------------------------------------------------


@dataclass(frozen=True)
class SmoothWindow:
    half_width: int
    a: float
    margin: int | None = None
    accuracy: float = 1e-3

    def __post_init__(self):
        if self.half_width < 1:
            raise LatticeError("half_width must be positive")
        if self.margin is None:
            m = 8 * math.ceil(math.log(self.half_width / self.accuracy))
            object.__setattr__(self, "margin", m)
        if self.margin < 1:
            raise LatticeError("margin must be at least 1")

    @property
    def box(self) -> int:
        return self.half_width + self.margin


def _box_vertices(R: int, residue: int) -> np.ndarray:
    pts = [
        (x, y)
        for x in range(-R - 1, R + 2)
        for y in range(-R - 1, R + 2)
        if x % 2 and (x + y) % 4 == residue
    ]
    return np.array(pts, dtype=np.int64)


@dataclass(frozen=True)
class SmoothSample:
    """South tree and dual north tree on a box, with dimers on the inner window."""

    window: SmoothWindow
    south: np.ndarray = field(repr=False)  # coordinates of south vertices
    south_code: np.ndarray = field(repr=False)  # step code per south vertex
    north: np.ndarray = field(repr=False)
    north_code: np.ndarray = field(repr=False)
    south_index: dict = field(repr=False)

    def white(self):
        """White vertices of the inner window and their dimer direction codes."""
        W = self.window.half_width
        xs = np.concatenate([self.south, self.north])
        cs = np.concatenate([self.south_code, self.north_code])
        keep = (np.abs(xs[:, 0]) <= W) & (np.abs(xs[:, 1]) <= W)
        return xs[keep], cs[keep]

    def dimer_at(self, v) -> int:
        v = (int(v[0]), int(v[1]))
        if v in self.south_index:
            return int(self.south_code[self.south_index[v]])
        hit = np.nonzero((self.north[:, 0] == v[0]) & (self.north[:, 1] == v[1]))[0]
        if not len(hit):
            raise LatticeError(f"{v} is not a white vertex of the box")
        return int(self.north_code[hit[0]])

    def path(self, v) -> list:
        """South-tree path from v until it leaves the box."""
        v = (int(v[0]), int(v[1]))
        out = [v]
        while v in self.south_index:
            d = int(self.south_code[self.south_index[v]])
            v = (v[0] + 2 * int(DIRS[d, 0]), v[1] + 2 * int(DIRS[d, 1]))
            out.append(v)
            if len(out) > 4 * len(self.south_code):
                raise LatticeError("cycle in the south tree")
        return out

    def is_matching(self) -> bool:
        """Every black vertex of the inner window is covered exactly once."""
        W = self.window.half_width
        xs, cs = self.white()
        b = xs + DIRS[cs]
        inner = (np.abs(b[:, 0]) <= W - 1) & (np.abs(b[:, 1]) <= W - 1)
        bs = b[inner]
        uniq, cnt = np.unique(bs, axis=0, return_counts=True)
        want = [
            (x, y)
            for x in range(-W + 1, W)
            for y in range(-W + 1, W)
            if x % 2 == 0 and y % 2
        ]
        return bool(np.all(cnt == 1)) and len(uniq) == len(want)


def _orient_dual(N, rows, cols, used) -> np.ndarray:
    """Orient the dual forest out of the box, preferring exits through the top.

    Components reaching the top rows are rooted there; the rest are rooted
    on the side columns.  A root steps out of the box across an unused edge.
    """
    V = len(N)
    root = V
    top_y = N[:, 1].max() - 2
    side_x = np.abs(N[:, 0]).max() - 2
    ncode = np.full(V, -1, dtype=np.int64)
    reached = np.zeros(V, dtype=bool)
    for contacts in (N[:, 1] >= top_y, np.abs(N[:, 0]) >= side_x):
        seeds = np.nonzero(contacts & ~reached)[0]
        r = list(rows) + [root] * len(seeds)
        c = list(cols) + list(seeds)
        A = coo_matrix((np.ones(len(r)), (r, c)), shape=(V + 1, V + 1)).tocsr()
        order, pred = breadth_first_order(A, root, directed=False, return_predecessors=True)
        new = np.zeros(V, dtype=bool)
        new[order[order < V]] = True
        new &= ~reached
        inner = new & (pred[:V] >= 0) & (pred[:V] != root)
        delta = (N[pred[:V][inner]] - N[inner]) // 2
        cc = np.full(len(delta), -1, dtype=np.int64)
        for d in range(4):
            cc[(delta[:, 0] == DIRS[d, 0]) & (delta[:, 1] == DIRS[d, 1])] = d
        ncode[inner] = cc
        for i in np.nonzero(new & (pred[:V] == root))[0]:
            x, y = int(N[i, 0]), int(N[i, 1])
            prefer = (0, 1, 3, 2) if x > 0 else (1, 0, 2, 3)
            for d in prefer:
                if (x + int(DIRS[d, 0]), y + int(DIRS[d, 1])) not in used:
                    ncode[i] = d
                    break
        reached |= new
    return ncode


def sample_smooth_phase(w: SmoothWindow, seed=0) -> SmoothSample:
    R = w.box
    S = _box_vertices(R, 1)
    sidx = {(int(x), int(y)): i for i, (x, y) in enumerate(S)}
    V = len(S)
    nbr = np.full((V, 4), -1, dtype=np.int64)
    for i, (x, y) in enumerate(S):
        for d in range(4):
            u = (int(x) + 2 * int(DIRS[d, 0]), int(y) + 2 * int(DIRS[d, 1]))
            nbr[i, d] = sidx.get(u, -1)
    p = BiasedWalkParams(Direction.S, w.a).probabilities()
    cum = np.tile(np.cumsum(p), (V, 1))
    cum[:, -1] = 1.0
    code = np.full(V, -1, dtype=np.int64)
    rng = as_seed(seed).generator()
    _wilson(nbr, cum, np.zeros(V, dtype=np.bool_), code, boustrophedon(S), rng)

    # dual tree: north edges not crossing a used south edge, oriented north
    N = _box_vertices(R, 3)
    nidx = {(int(x), int(y)): i for i, (x, y) in enumerate(N)}
    used = set()
    for i, (x, y) in enumerate(S):
        d = int(code[i])
        used.add((int(x) + int(DIRS[d, 0]), int(y) + int(DIRS[d, 1])))
    rows, cols = [], []
    for i, (x, y) in enumerate(N):
        for d in (0, 1):
            u = (int(x) + 2 * int(DIRS[d, 0]), int(y) + 2 * int(DIRS[d, 1]))
            j = nidx.get(u)
            mid = (int(x) + int(DIRS[d, 0]), int(y) + int(DIRS[d, 1]))
            if j is not None and mid not in used:
                rows.append(i)
                cols.append(j)
    ncode = _orient_dual(N, rows, cols, used)
    return SmoothSample(w, S, code.astype(np.int8), N, ncode.astype(np.int8), sidx)


def smooth_height(s: SmoothSample, f) -> int:
    """-4 times the winding of the south-tree path from the vertex below an a-face."""
    f = (int(f[0]), int(f[1]))
    if (f[0] + f[1]) % 4 != 2 or f[0] % 2 == 0:
        raise LatticeError(f"{f} is not an a-face")
    p = s.path((f[0], f[1] - 1))
    if p[-1][1] >= int(s.south[:, 1].min()):
        raise ResourceError("path left the box sideways or north; enlarge the margin")
    return -4 * winding(p, f)


@numba.njit(cache=True)
def _first_steps(cum, count, horizon, sgn, rng):
    # first step of the loop erasure = the step taken after the last visit to
    # the start; walk until the walk is `horizon` rows past the start
    out = np.empty(count, dtype=np.int64)
    for k in range(count):
        x = 0
        y = 0
        last = -1
        while sgn * y > -horizon:
            r = rng.random()
            d = 0
            while d < 3 and r >= cum[d]:
                d += 1
            if x == 0 and y == 0:
                last = d
            if d == 0:
                x += 1
                y += 1
            elif d == 1:
                x -= 1
                y += 1
            elif d == 2:
                x -= 1
                y -= 1
            else:
                x += 1
                y -= 1
        out[k] = last
    return out


def smooth_first_step_law(
    a: float, count: int, seed=0, horizon: int = 60, direction=Direction.S
) -> np.ndarray:
    """Empirical law of the dimer direction at a white vertex in the smooth phase.

    The vertex is the first one handled by Wilson's algorithm rooted at
    infinity, so its dimer is the first step of a loop-erased biased walk.
    The walk is stopped ``horizon`` diagonal rows past the start in its drift
    direction; returning from there has probability about a^(2 horizon).
    """
    direction = Direction(direction)
    p = BiasedWalkParams(direction, a).probabilities()
    cum = np.cumsum(p)
    cum[-1] = 1.0
    rng = as_seed(seed).generator()
    sgn = 1 if direction == Direction.S else -1
    steps = _first_steps(cum, count, horizon, sgn, rng)
    return np.bincount(steps, minlength=4) / count


# --- parabolic regions ----------------------------------------------------------


@dataclass(frozen=True)
class ParabolicRegion:
    alpha: float
    direction: Direction = Direction.S

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if not self.alpha > 0:
            raise LatticeError("alpha must be positive")

    def contains(self, pts, origin=(0, 0)) -> np.ndarray:
        P = np.atleast_2d(np.asarray(pts, dtype=np.float64)) - np.asarray(origin, dtype=np.float64)
        x, y = P[:, 0], P[:, 1]
        if self.direction == Direction.N:
            y = -y
        ym = np.maximum(-y, 0.0)
        bound = (self.alpha + np.log(ym + 1)) * np.sqrt(ym + 1)
        return (y <= self.alpha) & (np.abs(x) <= bound)


def parabola_event(path, region: ParabolicRegion, origin=None) -> bool:
    path = np.asarray(path)
    if origin is None:
        origin = path[0]
    return bool(np.all(region.contains(path, origin)))


__all__ = [
    "BiasedWalkParams",
    "ParabolicRegion",
    "SmoothSample",
    "SmoothWindow",
    "backbone_forest",
    "biased_walk",
    "complete_forest",
    "loop_erase",
    "parabola_event",
    "sample_smooth_phase",
    "smooth_first_step_law",
    "smooth_height",
    "wilson_forest",
]
