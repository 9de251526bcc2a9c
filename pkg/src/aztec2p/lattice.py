"""Geometry of the two-periodic Aztec diamond in the rotated frame.

Vertices are integer points with x+y odd, faces are points with x+y even.
White vertices have odd x (classes N and S), black vertices have even x
(classes E and W).  The two diagonal unit steps are e1 = (1, 1) and
e2 = (-1, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from enum import Enum

import numpy as np

E1 = (1, 1)
E2 = (-1, 1)

# Direction codes used everywhere a vertex has to point at a neighbour:
# 0 -> +e1, 1 -> +e2, 2 -> -e1, 3 -> -e2.
DIRS = np.array([(1, 1), (-1, 1), (-1, -1), (1, -1)], dtype=np.int64)
OPPOSITE = np.array([2, 3, 0, 1], dtype=np.int64)


class LatticeError(ValueError):
    """Raised for coordinates of the wrong kind or invalid sizes."""


class VertexClass(str, Enum):
    N = "N"
    S = "S"
    E = "E"
    W = "W"


class FaceClass(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    OTHER = "other"


class Gauge(str, Enum):
    TWO_PERIODIC = "two-periodic"
    N_WEIGHTS = "N-weights"
    S_WEIGHTS = "S-weights"


def is_vertex(x: int, y: int) -> bool:
    return (x + y) % 2 == 1


def is_face(x: int, y: int) -> bool:
    return (x + y) % 2 == 0


def classify_vertex(v) -> VertexClass:
    x, y = int(v[0]), int(v[1])
    if not is_vertex(x, y):
        raise LatticeError(f"{(x, y)} is not a vertex")
    r = (x + y) % 4
    if x % 2:
        return VertexClass.S if r == 1 else VertexClass.N
    return VertexClass.W if r == 1 else VertexClass.E


def classify_face(f) -> FaceClass:
    x, y = int(f[0]), int(f[1])
    if not is_face(x, y):
        raise LatticeError(f"{(x, y)} is not a face")
    r = (x + y) % 4
    if x % 2:
        return FaceClass.A if r == 2 else FaceClass.B
    return FaceClass.C if r == 0 else FaceClass.OTHER


_A_OFFSET = {
    VertexClass.S: (0, 1),
    VertexClass.N: (0, -1),
    VertexClass.W: (1, 0),
    VertexClass.E: (-1, 0),
}


def a_face_of(v) -> tuple[int, int]:
    """The unique a-face adjacent to vertex ``v``."""
    dx, dy = _A_OFFSET[classify_vertex(v)]
    return int(v[0]) + dx, int(v[1]) + dy


def vertex_class_array(x, y) -> np.ndarray:
    """Vectorised class codes: 0=N, 1=S, 2=E, 3=W."""
    x = np.asarray(x)
    y = np.asarray(y)
    r = np.mod(x + y, 4)
    odd = np.mod(x, 2) == 1
    return np.where(odd, np.where(r == 1, 1, 0), np.where(r == 1, 3, 2))


def is_a_face_array(x, y) -> np.ndarray:
    x = np.asarray(x)
    y = np.asarray(y)
    return (np.mod(x, 2) == 1) & (np.mod(x + y, 4) == 2)


# --- index maps -------------------------------------------------------------
#
# White vertices of the size-n diamond: x odd in [-n+1, n-1], y even in
# [-n, n].  Black vertices: x even in [-n, n], y odd in [-n+1, n-1].
# Both are stored row-major over their own (n, n+1) / (n+1, n) boxes.


def white_shape(n: int) -> tuple[int, int]:
    return n, n + 1


def black_shape(n: int) -> tuple[int, int]:
    return n + 1, n


def white_coords(n: int) -> np.ndarray:
    xs = np.arange(-n + 1, n, 2)
    ys = np.arange(-n, n + 1, 2)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def black_coords(n: int) -> np.ndarray:
    xs = np.arange(-n, n + 1, 2)
    ys = np.arange(-n + 1, n, 2)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def white_index(n: int, x, y):
    return ((np.asarray(x) + n - 1) // 2) * (n + 1) + (np.asarray(y) + n) // 2


def black_index(n: int, x, y):
    return ((np.asarray(x) + n) // 2) * n + (np.asarray(y) + n - 1) // 2


def in_diamond(n: int, x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    return (np.abs(x) <= n) & (np.abs(y) <= n)


def bounded_faces(n: int) -> np.ndarray:
    """Faces strictly inside (-n, n)^2; all four corners are in the diamond."""
    pts = [(x, y) for x in range(-n + 1, n) for y in range(-n + 1, n) if (x + y) % 2 == 0]
    return np.array(pts, dtype=np.int64)


def closed_faces(n: int) -> np.ndarray:
    """Faces adjacent to at least one vertex of the diamond."""
    m = n + 1
    pts = [
        (x, y)
        for x in range(-m, m + 1)
        for y in range(-m, m + 1)
        if (x + y) % 2 == 0 and not (abs(x) == m and abs(y) == m)
    ]
    return np.array(pts, dtype=np.int64)


def face_shape(n: int) -> tuple[int, int]:
    """Dense storage box for faces: all (x, y) in [-n-1, n+1]^2."""
    return 2 * n + 3, 2 * n + 3


def boundary_height(n: int, f) -> int | None:
    """Deterministic height of a boundary face, or None for interior faces."""
    i, j = int(f[0]), int(f[1])
    if j in (-n, -n - 1):
        return i
    if i in (-n, -n - 1):
        return j
    if j in (n, n + 1):
        return -i
    if i in (n, n + 1):
        return -j
    return None


# --- the weighted graph -----------------------------------------------------


def _edge_weights(n: int, a: float, gauge: Gauge, wx, wy, d) -> np.ndarray:
    dx = DIRS[d, 0]
    dy = DIRS[d, 1]
    if gauge == Gauge.TWO_PERIODIC:
        near_a = is_a_face_array(wx + dx, wy) | is_a_face_array(wx, wy + dy)
        return np.where(near_a, a, 1.0)
    cls = vertex_class_array(wx, wy)
    if gauge == Gauge.S_WEIGHTS:
        heavy = (cls == 1) & (d <= 1)
    else:
        heavy = (cls == 0) & (d >= 2)
    return np.where(heavy, a * a, 1.0)


@dataclass(frozen=True)
class AztecGraph:
    n: int
    a: float
    gauge: Gauge
    white: np.ndarray = field(repr=False)
    black: np.ndarray = field(repr=False)
    edge_white: np.ndarray = field(repr=False)
    edge_black: np.ndarray = field(repr=False)
    edge_dir: np.ndarray = field(repr=False)
    edge_weight: np.ndarray = field(repr=False)

    @property
    def num_vertices(self) -> int:
        return len(self.white) + len(self.black)

    def weight_table(self) -> np.ndarray:
        """Weights indexed by (white index, direction); NaN for missing edges."""
        t = np.full((len(self.white), 4), np.nan)
        t[self.edge_white, self.edge_dir] = self.edge_weight
        return t

    @cached_property
    def edge_lookup(self) -> dict:
        return {
            (tuple(self.white[w]), tuple(self.black[b])): wt
            for w, b, wt in zip(self.edge_white, self.edge_black, self.edge_weight)
        }

    def face_weight(self, f) -> float:
        """Alternating product of the four edge weights around a bounded face."""
        fx, fy = int(f[0]), int(f[1])
        ring = [(fx + 1, fy), (fx, fy + 1), (fx - 1, fy), (fx, fy - 1)]
        lookup = self.edge_lookup
        ws = []
        for k in range(4):
            p, q = ring[k], ring[(k + 1) % 4]
            w, b = (p, q) if p[0] % 2 else (q, p)
            ws.append(lookup[(w, b)])
        return ws[0] * ws[2] / (ws[1] * ws[3])


def check_size(n: int) -> None:
    if n <= 0 or n % 4:
        raise LatticeError(f"size must be a positive multiple of 4, got {n}")


def build_aztec(n: int, a: float, gauge: Gauge | str = Gauge.TWO_PERIODIC) -> AztecGraph:
    check_size(n)
    if not 0 < a <= 1:
        raise LatticeError(f"weight a must lie in (0, 1], got {a}")
    gauge = Gauge(gauge)
    white = white_coords(n)
    black = black_coords(n)
    ew, eb, ed = [], [], []
    for d in range(4):
        tx = white[:, 0] + DIRS[d, 0]
        ty = white[:, 1] + DIRS[d, 1]
        ok = in_diamond(n, tx, ty)
        idx = np.nonzero(ok)[0]
        ew.append(idx)
        eb.append(black_index(n, tx[ok], ty[ok]))
        ed.append(np.full(len(idx), d))
    ew = np.concatenate(ew)
    eb = np.concatenate(eb)
    ed = np.concatenate(ed)
    wt = _edge_weights(n, a, gauge, white[ew, 0], white[ew, 1], ed)
    return AztecGraph(n, float(a), gauge, white, black, ew, eb, ed, wt.astype(float))


# --- Temperley graphs -------------------------------------------------------


class Direction(str, Enum):
    S = "S"
    N = "N"


@dataclass(frozen=True)
class TemperleyGraph:
    """Graph on the extended south (or north) vertex set with steps 2e1, 2e2.

    ``parent``-style arrays elsewhere use the order of ``vertices``.  Directed
    weights are stored per vertex and direction code (NaN where the step
    leaves the vertex set).
    """

    direction: Direction
    n: int
    a: float
    vertices: np.ndarray = field(repr=False)
    index: dict = field(repr=False)
    weights: np.ndarray = field(repr=False)
    east: tuple = ()
    west: tuple = ()
    south: tuple = ()
    north: tuple = ()

    @property
    def sinks(self) -> tuple:
        return self.east + self.west

    @property
    def sources(self) -> tuple:
        return self.south + self.north

    def is_sink(self, v) -> bool:
        return abs(int(v[0])) == self.n + 1

    def neighbor(self, v, d: int):
        u = (int(v[0]) + 2 * int(DIRS[d, 0]), int(v[1]) + 2 * int(DIRS[d, 1]))
        return u if u in self.index else None

    def step_weight(self, d: int) -> float:
        """Directed weight of a step with direction code ``d``."""
        north_step = DIRS[d, 1] > 0
        if self.direction == Direction.S:
            return self.a**2 if north_step else 1.0
        return 1.0 if north_step else self.a**2

    def edges(self):
        """Undirected edges as sorted coordinate pairs."""
        out = []
        for v in self.vertices:
            v = (int(v[0]), int(v[1]))
            for d in (0, 1):
                u = self.neighbor(v, d)
                if u is not None:
                    out.append((v, u))
        return out


def extended_vertices(direction, n: int) -> np.ndarray:
    """The extended vertex set of the south (or north) Temperley graph."""
    direction = Direction(direction)
    r = 1 if direction == Direction.S else 3
    pts = [
        (x, y)
        for x in range(-n - 1, n + 2)
        for y in range(-n, n + 1)
        if x % 2 and (x + y) % 4 == r
    ]
    return np.array(pts, dtype=np.int64)


def build_temperley_graph(direction, n: int, a: float) -> TemperleyGraph:
    check_size(n)
    direction = Direction(direction)
    verts = extended_vertices(direction, n)
    index = {(int(x), int(y)): i for i, (x, y) in enumerate(verts)}
    g = TemperleyGraph(direction, n, float(a), verts, index, np.empty(0))
    w = np.full((len(verts), 4), np.nan)
    for i, v in enumerate(verts):
        if g.is_sink(v):
            continue
        for d in range(4):
            if g.neighbor(v, d) is not None:
                w[i, d] = g.step_weight(d)
    east = tuple(sorted(((n + 1, y) for (x, y) in index if x == n + 1), key=lambda p: -p[1]))
    west = tuple(sorted(((-n - 1, y) for (x, y) in index if x == -n - 1), key=lambda p: p[1]))
    south = tuple(sorted(((x, -n) for (x, y) in index if y == -n and abs(x) <= n)))
    north = tuple(sorted(((x, n) for (x, y) in index if y == n and abs(x) <= n), key=lambda p: -p[0]))
    return TemperleyGraph(direction, n, float(a), verts, index, w, east, west, south, north)


def boundary_label(g: TemperleyGraph, v) -> tuple[str, int]:
    """Label of a boundary vertex: side letter and 1-based index.

    For the south graph the labels are v_j^E (north to south), v_j^S and
    v_j^W (west to east / south to north) and v_j^N (east to west).  The north
    graph uses the interleaved w-labels, indexed the same way.
    """
    v = (int(v[0]), int(v[1]))
    for side, seq in (("E", g.east), ("S", g.south), ("W", g.west), ("N", g.north)):
        if v in seq:
            return side, seq.index(v) + 1
    raise LatticeError(f"{v} is not a boundary vertex of the {g.direction.value} graph")


def label_vertex(g: TemperleyGraph, side: str, j: int) -> tuple[int, int]:
    seq = {"E": g.east, "S": g.south, "W": g.west, "N": g.north}[side]
    return seq[j - 1]
