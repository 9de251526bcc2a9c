"""Temperley's bijection between dimer covers and dimer-compatible forests.

A south (north) forest lives on the extended south (north) vertex set; each
non-sink vertex w points to w + 2e where {w, w + e} is its dimer.  The two
graphs are planar duals: the edge of one graph through a black vertex b
crosses exactly one edge of the other graph, also through b.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from .heights import HeightField, boundary_grid
from .lattice import (
    DIRS,
    Direction,
    LatticeError,
    TemperleyGraph,
    boundary_label,
    build_temperley_graph,
    label_vertex,
    white_index,
)
from .sampler import DimerConfig

_GRAPHS: dict = {}


def temperley_graph(direction, n: int) -> TemperleyGraph:
    """Cached graph with unit weights; forests only need the geometry."""
    key = (Direction(direction), n)
    if key not in _GRAPHS:
        _GRAPHS[key] = build_temperley_graph(key[0], n, 1.0)
    return _GRAPHS[key]


def other(direction) -> Direction:
    return Direction.N if Direction(direction) == Direction.S else Direction.S


@dataclass(frozen=True)
class OrientedForest:
    """Parent pointers over ``graph.vertices``; -1 marks a root."""

    graph: TemperleyGraph = field(repr=False)
    parent: np.ndarray = field(repr=False)
    a: float = 1.0

    @property
    def direction(self) -> Direction:
        return self.graph.direction

    @property
    def n(self) -> int:
        return self.graph.n

    def coord(self, i: int) -> tuple[int, int]:
        v = self.graph.vertices[i]
        return int(v[0]), int(v[1])

    def step_codes(self) -> np.ndarray:
        """Direction code of each vertex's outgoing step, -1 at roots."""
        verts = self.graph.vertices
        out = np.full(len(verts), -1, dtype=np.int8)
        has = self.parent >= 0
        delta = (verts[self.parent[has]] - verts[has]) // 2
        code = np.full(len(delta), -1, dtype=np.int8)
        for d in range(4):
            code[(delta[:, 0] == DIRS[d, 0]) & (delta[:, 1] == DIRS[d, 1])] = d
        out[has] = code
        return out

    def edges(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        return [(self.coord(i), self.coord(p)) for i, p in enumerate(self.parent) if p >= 0]

    def edge_set(self) -> frozenset:
        return frozenset(frozenset(e) for e in self.edges())

    def path(self, v) -> list[tuple[int, int]]:
        """Vertices from v to its root."""
        i = self.graph.index[(int(v[0]), int(v[1]))]
        out = [self.coord(i)]
        seen = {i}
        while self.parent[i] >= 0:
            i = int(self.parent[i])
            if i in seen:
                raise LatticeError(f"cycle through {self.coord(i)}")
            seen.add(i)
            out.append(self.coord(i))
        return out

    def roots(self) -> np.ndarray:
        """Root index per vertex via pointer doubling; -1 where a cycle is hit."""
        V = len(self.parent)
        r = np.where(self.parent >= 0, self.parent, np.arange(V))
        for _ in range(max(1, int(np.ceil(np.log2(V + 1))) + 1)):
            r = r[r]
        return np.where(self.parent[r] < 0, r, -1)

    def __eq__(self, other):
        return (
            isinstance(other, OrientedForest)
            and self.direction == other.direction
            and self.n == other.n
            and np.array_equal(self.parent, other.parent)
        )

    __hash__ = None


@dataclass(frozen=True)
class BackbonePath:
    kind: str
    index: int
    vertices: np.ndarray = field(repr=False)
    endpoint: tuple

    @property
    def source(self) -> tuple[int, int]:
        return int(self.vertices[0, 0]), int(self.vertices[0, 1])

    @property
    def sink(self) -> tuple[int, int]:
        return int(self.vertices[-1, 0]), int(self.vertices[-1, 1])


@dataclass(frozen=True)
class SplitPoint:
    I: int
    free_endpoint: tuple | None = None


@dataclass(frozen=True)
class DCFReport:
    valid: bool
    violations: tuple = ()

    def __bool__(self) -> bool:
        return self.valid

    def items(self) -> set:
        return {v[0] for v in self.violations}


# --- forward map ----------------------------------------------------------------


def forest(d: DimerConfig, direction) -> OrientedForest:
    g = temperley_graph(direction, d.n)
    n = d.n
    verts = g.vertices
    inside = np.abs(verts[:, 0]) <= n
    wi = white_index(n, verts[inside, 0], verts[inside, 1])
    codes = d.dirs[wi].astype(np.int64)
    targets = verts[inside] + 2 * DIRS[codes]
    parent = np.full(len(verts), -1, dtype=np.int64)
    off, grid = _index_grid(g)
    parent[inside] = grid[targets[:, 0] + off, targets[:, 1] + off]
    return OrientedForest(g, parent, d.a)


_GRIDS: dict = {}


def _index_grid(g: TemperleyGraph):
    """Dense coordinate -> vertex index table (-1 off the vertex set)."""
    key = (g.direction, g.n)
    if key not in _GRIDS:
        off = g.n + 3
        grid = np.full((2 * off + 1, 2 * off + 1), -1, dtype=np.int64)
        v = g.vertices
        grid[v[:, 0] + off, v[:, 1] + off] = np.arange(len(v))
        _GRIDS[key] = (off, grid)
    return _GRIDS[key]


def south_forest(d: DimerConfig) -> OrientedForest:
    return forest(d, Direction.S)


def north_forest(d: DimerConfig) -> OrientedForest:
    return forest(d, Direction.N)


# --- validation -----------------------------------------------------------------


def validate_dcf(f: OrientedForest) -> DCFReport:
    """Check the three defining conditions; violations are tagged (i)-(iii)."""
    g = f.graph
    verts = g.vertices
    par = np.asarray(f.parent)
    problems = []
    if len(par) != len(verts):
        return DCFReport(False, (("i", "parent array does not span the vertex set"),))
    sink = np.abs(verts[:, 0]) == g.n + 1
    for i in np.nonzero(~sink & (par < 0))[0][:3]:
        problems.append(("i", f"vertex {f.coord(i)} has no outgoing edge"))
    for i in np.nonzero(sink & (par >= 0))[0][:3]:
        problems.append(("ii", f"sink {f.coord(i)} has an outgoing edge"))
    has = par >= 0
    if np.any(par[has] >= len(verts)):
        problems.append(("i", "parent index out of range"))
        return DCFReport(False, tuple(problems))
    delta = verts[par[has]] - verts[has]
    ok_step = (np.abs(delta[:, 0]) == 2) & (np.abs(delta[:, 1]) == 2)
    for i in np.nonzero(has)[0][~ok_step][:3]:
        problems.append(("i", f"edge from {f.coord(i)} is not a graph edge"))
    if problems:
        return DCFReport(False, tuple(problems))
    roots = f.roots()
    cyc = roots < 0
    if cyc.any():
        i = int(np.nonzero(cyc)[0][0])
        problems.append(("ii", f"component of {f.coord(i)} has a cycle and no sink"))
        return DCFReport(False, tuple(problems))
    for v in g.sources:
        s = f.coord(roots[g.index[v]])
        if abs(s[0] - v[0]) != abs(s[1] - v[1]):
            problems.append(("iii", f"source {v} drains to {s}, outside its cross"))
    return DCFReport(not problems, tuple(problems))


def theta(f: OrientedForest) -> dict:
    """Map each source to the sink of its component."""
    roots = f.roots()
    g = f.graph
    return {v: f.coord(roots[g.index[v]]) for v in g.sources}


# --- duality and inverse --------------------------------------------------------


def _dual_edges(f: OrientedForest, g2: TemperleyGraph):
    g = f.graph
    used = set()
    for i, p in enumerate(f.parent):
        if p >= 0:
            used.add(frozenset((f.coord(i), f.coord(int(p)))))
    rows, cols = [], []
    for u in g2.index:
        for d in (0, 1):
            w = g2.neighbor(u, d)
            if w is None:
                continue
            m = (u[0] + int(DIRS[d, 0]), u[1] + int(DIRS[d, 1]))
            r = DIRS[(d + 1) % 4]
            p = (m[0] + int(r[0]), m[1] + int(r[1]))
            q = (m[0] - int(r[0]), m[1] - int(r[1]))
            if p not in g.index or q not in g.index:
                raise LatticeError(f"edge {u}-{w} has no dual partner")
            if frozenset((p, q)) not in used:
                rows.append(g2.index[u])
                cols.append(g2.index[w])
    return rows, cols


def orient(g: TemperleyGraph, rows, cols, a: float = 1.0) -> OrientedForest:
    """Orient an undirected spanning forest towards its sinks.

    Raises if the edge set is not a forest with one sink per component.
    """
    V = len(g.vertices)
    sinks = [g.index[s] for s in g.sinks]
    root = V
    r = list(rows) + [root] * len(sinks)
    c = list(cols) + sinks
    A = coo_matrix((np.ones(len(r)), (r, c)), shape=(V + 1, V + 1)).tocsr()
    order, pred = breadth_first_order(A, root, directed=False, return_predecessors=True)
    if len(order) != V + 1 or len(rows) != V - len(sinks):
        raise LatticeError("edge set is not a forest with one sink per component")
    parent = pred[:V].astype(np.int64)
    parent[parent == root] = -1
    return OrientedForest(g, parent, a)


def dual_forest(f: OrientedForest) -> OrientedForest:
    rep = validate_dcf(f)
    if not rep:
        raise LatticeError(f"not a dimer-compatible forest: {rep.violations}")
    g2 = temperley_graph(other(f.direction), f.n)
    rows, cols = _dual_edges(f, g2)
    return orient(g2, rows, cols, f.a)


def inverse_temperley(f: OrientedForest, direction=None) -> DimerConfig:
    if direction is not None and Direction(direction) != f.direction:
        raise LatticeError("forest direction does not match")
    dual = dual_forest(f)
    n = f.n
    dirs = np.full(n * (n + 1), -1, dtype=np.int8)
    for h in (f, dual):
        verts = h.graph.vertices
        inside = np.abs(verts[:, 0]) <= n
        wi = white_index(n, verts[inside, 0], verts[inside, 1])
        dirs[wi] = h.step_codes()[inside]
    if np.any(dirs < 0):
        raise LatticeError("forest pair leaves a white vertex unmatched")
    d = DimerConfig(n, f.a, dirs)
    if not d.is_valid():
        raise LatticeError("forest pair does not give a perfect matching")
    return d


# --- backbone -------------------------------------------------------------------


def split_point(f: OrientedForest) -> int:
    """Number of south sources (north sources for a north forest) draining west."""
    th = theta(f)
    g = f.graph
    if f.direction == Direction.S:
        return sum(1 for v in g.south if th[v][0] < 0)
    return sum(1 for v in g.north if th[v][0] > 0)


def theta_table(direction, n: int, I: int) -> dict:
    """Forced endpoints (by label) given the split point; free entries omitted."""
    m = n // 2
    out = {}
    if Direction(direction) == Direction.S:
        for j in range(1, m + 1):
            out[("S", j)] = ("E", j) if j > I else ("W", j)
            if j < I:
                out[("N", j)] = ("E", j + 1)
            elif j > I:
                out[("N", j)] = ("W", j)
    else:
        for j in range(1, m + 1):
            out[("N", j)] = ("E", j) if j <= I else ("W", j)
            if j > I:
                out[("S", j)] = ("E", j)
            elif j < I:
                out[("S", j)] = ("W", j + 1)
    return out


def dual_free_endpoint(sfree: tuple | None) -> tuple | None:
    """Dual forest's free endpoint given the primal one (labels)."""
    if sfree is None:
        return None
    side, j = sfree
    return ("E", j) if side == "W" else ("W", j)


def backbone(f: OrientedForest):
    """Backbone paths ordered left to right within each side, and the split point."""
    g = f.graph
    letter = f.direction.value
    paths = []
    for side, seq in (("S", g.south), ("N", g.north)):
        kind = letter + ("-" if side == "S" else "+")
        ordered = seq if side == "S" else tuple(reversed(seq))
        for v in ordered:
            vs = np.array(f.path(v), dtype=np.int64)
            end = boundary_label(g, (int(vs[-1, 0]), int(vs[-1, 1])))
            paths.append(BackbonePath(kind, boundary_label(g, v)[1], vs, end))
    I = split_point(f)
    free = None
    if I > 0:
        src = ("N", I) if f.direction == Direction.S else ("S", I)
        v = label_vertex(g, *src)
        free = (src, boundary_label(g, theta(f)[v]))
    return paths, SplitPoint(I, free)


def check_theta(f: OrientedForest) -> bool:
    """Endpoints of all sources agree with the forced table for the split point."""
    g = f.graph
    I = split_point(f)
    th = theta(f)
    table = theta_table(f.direction, f.n, I)
    for (side, j), want in table.items():
        v = label_vertex(g, side, j)
        if boundary_label(g, th[v]) != want:
            return False
    if I > 0:
        side = "N" if f.direction == Direction.S else "S"
        got = boundary_label(g, th[label_vertex(g, side, I)])
        allowed = {("W", I), ("E", I + 1)}
        if f.direction == Direction.N:
            allowed = {("E", I), ("W", I + 1)}
        if got not in allowed:
            return False
    return True


# --- winding and heights --------------------------------------------------------


def winding(path, anchor) -> int:
    """Right-to-left minus left-to-right crossings of the ray above ``anchor``.

    The ray is taken just right of the vertical line through the anchor, so a
    vertex lying on the line counts as being on its left.
    """
    P = np.asarray(path, dtype=np.float64)
    if len(P) < 2:
        return 0
    ax, ay = float(anchor[0]), float(anchor[1])
    x0, y0 = P[:-1, 0], P[:-1, 1]
    x1, y1 = P[1:, 0], P[1:, 1]
    rightward = (x0 <= ax) & (ax < x1)
    leftward = (x1 <= ax) & (ax < x0)
    cross = rightward | leftward
    with np.errstate(divide="ignore", invalid="ignore"):
        yc = y0 + (ax - x0) * (y1 - y0) / (x1 - x0)
    above = cross & (yc > ay)
    return int(np.sum(above & leftward) - np.sum(above & rightward))


def turn_count(path) -> int:
    """Left turns minus right turns along a lattice path with diagonal steps."""
    P = np.asarray(path, dtype=np.int64)
    if len(P) < 3:
        return 0
    s = np.diff(P, axis=0)
    cross = s[:-1, 0] * s[1:, 1] - s[:-1, 1] * s[1:, 0]
    return int(np.sum(np.sign(cross)))


# faces around a white vertex counterclockwise; the edge between ring faces k
# and k+1 has direction code k
_RING = np.array([(1, 0), (0, 1), (-1, 0), (0, -1)], dtype=np.int64)


def _ring_offsets(code: np.ndarray) -> np.ndarray:
    """Ring face heights minus the vertex height, 4 * value (integers)."""
    code = np.asarray(code)
    k = np.arange(4)
    step = np.where(k[None, :] == code[:, None], -3, 1)
    rel = np.zeros((len(code), 4), dtype=np.int64)
    for t in range(1, 4):
        rel[:, t] = rel[:, t - 1] + step[:, t - 1]
    return 4 * rel - rel.sum(axis=1, keepdims=True)


def vertex_heights(f: OrientedForest) -> np.ndarray:
    """Four times the vertex heights of all non-sink vertices, by turn counting.

    A vertex whose step enters a sink gets its height from the boundary face
    beside it; every other vertex v satisfies h(v) = h(p) - turn at p, with p
    its parent.
    """
    g = f.graph
    n = g.n
    verts = g.vertices
    codes = f.step_codes().astype(np.int64)
    par = f.parent
    V = len(verts)
    h4 = np.zeros(V, dtype=np.int64)
    done = np.abs(verts[:, 0]) == n + 1
    bnd = boundary_grid(n)
    m = n + 1
    base = (~done) & done[np.maximum(par, 0)] & (par >= 0)
    idx = np.nonzero(base)[0]
    if len(idx):
        x, y = verts[idx, 0], verts[idx, 1]
        fx = np.where(x > 0, x + 1, x - 1)
        known = bnd[fx + m, y + m].astype(np.int64)
        # position of that face in the ring: (1,0) is slot 0, (-1,0) slot 2
        slot = np.where(x > 0, 0, 2)
        off = _ring_offsets(codes[idx])
        h4[idx] = 4 * known - off[np.arange(len(idx)), slot]
        done = done.copy()
        done[idx] = True
    pending = np.nonzero(~done)[0]
    while len(pending):
        p = par[pending]
        ready = done[p]
        if not ready.any():
            raise LatticeError("forest has a component without a sink")
        i = pending[ready]
        pp = par[i]
        cin = codes[i]
        cout = codes[pp]
        turn = np.where(cout == (cin + 1) % 4, 1, np.where(cout == (cin + 3) % 4, -1, 0))
        h4[i] = h4[pp] - 4 * turn
        done[i] = True
        pending = pending[~ready]
    return h4


def reconstruct_height(f: OrientedForest) -> HeightField:
    """Face heights from turn counts along forest paths and the boundary."""
    rep = validate_dcf(f)
    if not rep:
        raise LatticeError(f"not a dimer-compatible forest: {rep.violations}")
    g = f.graph
    n = g.n
    m = n + 1
    h4 = vertex_heights(f)
    vals = boundary_grid(n)
    verts = g.vertices
    inside = np.nonzero(np.abs(verts[:, 0]) <= n)[0]
    off = _ring_offsets(f.step_codes()[inside].astype(np.int64))
    face4 = h4[inside, None] + off
    if np.any(face4 % 4):
        raise LatticeError("non-integer face height")
    face = face4 // 4
    for k in range(4):
        fx = verts[inside, 0] + _RING[k, 0]
        fy = verts[inside, 1] + _RING[k, 1]
        cur = vals[fx + m, fy + m]
        fixed = cur != HeightField.MISSING
        if np.any(cur[fixed] != face[fixed, k]):
            raise LatticeError("forest heights disagree with the boundary")
        vals[fx[~fixed] + m, fy[~fixed] + m] = face[~fixed, k]
    return HeightField(n, vals)


def face_height_by_winding(f: OrientedForest, face, I: int | None = None) -> int:
    """-4 Wind + 4 I - n - 1 for an a-face, using the path from the vertex below it.

    Exact whenever that path merges into the split backbone path.
    """
    if f.direction != Direction.S:
        raise LatticeError("defined for south forests")
    if I is None:
        I = split_point(f)
    v0 = (int(face[0]), int(face[1]) - 1)
    return -4 * winding(f.path(v0), face) + 4 * I - f.n - 1


def joins_backbone(f: OrientedForest, v, path_index: int) -> bool:
    """Whether the forest path from v merges into the south backbone path of that index."""
    g = f.graph
    if path_index < 1:
        return False
    bb = set(map(tuple, f.path(label_vertex(g, "S", path_index))))
    return any(u in bb for u in f.path(v))


__all__ = [
    "BackbonePath",
    "DCFReport",
    "OrientedForest",
    "SplitPoint",
    "backbone",
    "check_theta",
    "dual_forest",
    "face_height_by_winding",
    "forest",
    "inverse_temperley",
    "joins_backbone",
    "north_forest",
    "orient",
    "reconstruct_height",
    "south_forest",
    "split_point",
    "theta",
    "theta_table",
    "turn_count",
    "validate_dcf",
    "vertex_heights",
    "winding",
]
