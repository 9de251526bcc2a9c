"""Dimer configurations, exhaustive enumeration and exact sampling.

The sampler is weighted domino shuffling.  The order-k diamond (vertices
with |x|, |y| <= k) is cut into k^2 cells: the faces f with both coordinates
of parity k+1 and |f_i| <= k-1.  Every edge is a side of exactly one cell.
Urban renewal on all cells turns the order-k graph into the order-(k-1) one,
whose cells are the faces of the other parity; the side X of the new cell g
gets weight w_X(g + d_X) / Delta(g + d_X), with d_X the unit diagonal
pointing towards X and Delta = w_NE w_SW + w_NW w_SE.  Sampling runs the
renewal backwards, growing the diamond one order at a time.

Two-periodic weights stay periodic under renewal, so each order only needs
the weights of the 16 face residues mod 4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .lattice import (
    DIRS,
    Gauge,
    LatticeError,
    _edge_weights,
    black_index,
    check_size,
    in_diamond,
    white_coords,
)


class ResourceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RandomSeed:
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def spawn(self, count: int) -> list["RandomSeed"]:
        """Seeds on ``count`` consecutive streams starting at this one."""
        return [RandomSeed(self.seed, self.stream + i) for i in range(count)]


def as_seed(seed) -> RandomSeed:
    if isinstance(seed, RandomSeed):
        return seed
    if isinstance(seed, tuple):
        return RandomSeed(*seed)
    return RandomSeed(int(seed))


@dataclass(frozen=True)
class DimerConfig:
    """A perfect matching, stored as one direction code per white vertex.

    ``dirs[i]`` is the direction code (see ``lattice.DIRS``) from the i-th
    white vertex of ``lattice.white_coords(n)`` to its partner.
    """

    n: int
    a: float
    dirs: np.ndarray = field(repr=False)
    seed: RandomSeed | None = None

    @property
    def white(self) -> np.ndarray:
        return white_coords(self.n)

    def partners(self) -> np.ndarray:
        return self.white + DIRS[self.dirs]

    def pairs(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        w = self.white
        b = self.partners()
        return [((int(p[0]), int(p[1])), (int(q[0]), int(q[1]))) for p, q in zip(w, b)]

    def matched(self) -> dict:
        out = {}
        for w, b in self.pairs():
            out[w] = b
            out[b] = w
        return out

    def black_dirs(self) -> np.ndarray:
        """Direction code from each black vertex (``black_coords`` order) to its partner."""
        n = self.n
        b = self.partners()
        out = np.full((n + 1) * n, -1, dtype=np.int8)
        out[black_index(n, b[:, 0], b[:, 1])] = (self.dirs + 2) % 4
        return out

    def is_valid(self) -> bool:
        n = self.n
        if self.dirs.shape != (n * (n + 1),):
            return False
        b = self.partners()
        if not np.all(in_diamond(n, b[:, 0], b[:, 1])):
            return False
        idx = black_index(n, b[:, 0], b[:, 1])
        return len(np.unique(idx)) == n * (n + 1)

    def __eq__(self, other):
        return (
            isinstance(other, DimerConfig)
            and self.n == other.n
            and np.array_equal(self.dirs, other.dirs)
        )

    def __hash__(self):
        return hash((self.n, self.dirs.tobytes()))

    def key(self) -> bytes:
        return self.dirs.astype(np.int8).tobytes()


def config_weight(d: DimerConfig, gauge=Gauge.TWO_PERIODIC, a: float | None = None) -> float:
    a = d.a if a is None else a
    w = d.white
    wt = _edge_weights(d.n, a, Gauge(gauge), w[:, 0], w[:, 1], d.dirs.astype(np.int64))
    return float(np.prod(wt))


def config_log_weight(d: DimerConfig, gauge=Gauge.TWO_PERIODIC) -> float:
    w = d.white
    wt = _edge_weights(d.n, d.a, Gauge(gauge), w[:, 0], w[:, 1], d.dirs.astype(np.int64))
    return float(np.sum(np.log(wt)))


# --- enumeration ------------------------------------------------------------


@dataclass(frozen=True)
class Enumeration:
    n: int
    a: float
    dirs: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.weights)

    def __iter__(self):
        for row, wt in zip(self.dirs, self.weights):
            yield DimerConfig(self.n, self.a, row), float(wt)

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def index(self) -> dict:
        return {row.astype(np.int8).tobytes(): i for i, row in enumerate(self.dirs)}


def enumerate_tilings(n: int, a: float, gauge=Gauge.TWO_PERIODIC) -> Enumeration:
    """All perfect matchings of the size-n diamond by backtracking.

    Vertices are processed in lexicographic order; the smallest unmatched
    vertex is always matched next, to a larger neighbour.
    """
    if n <= 0 or n % 2:
        raise LatticeError("enumeration needs a positive even size")
    if n > 6:
        raise ResourceError(f"size {n} is too large to enumerate")
    verts = sorted((x, y) for x in range(-n, n + 1) for y in range(-n, n + 1) if (x + y) % 2)
    pos = {v: i for i, v in enumerate(verts)}
    nbrs = []
    for x, y in verts:
        nb = []
        for dx, dy in DIRS:
            u = (x + int(dx), y + int(dy))
            if u in pos and pos[u] > pos[(x, y)]:
                nb.append(pos[u])
        nbrs.append(nb)
    white = white_coords(n)
    wpos = {(int(x), int(y)): i for i, (x, y) in enumerate(white)}
    used = [False] * len(verts)
    partner = [-1] * len(verts)
    found = []

    def rec(i):
        while i < len(verts) and used[i]:
            i += 1
        if i == len(verts):
            found.append(list(partner))
            return
        used[i] = True
        for j in nbrs[i]:
            if not used[j]:
                used[j] = True
                partner[i], partner[j] = j, i
                rec(i + 1)
                used[j] = False
        used[i] = False
        partner[i] = -1

    rec(0)
    dirs = np.empty((len(found), len(white)), dtype=np.int8)
    for k, part in enumerate(found):
        for i, v in enumerate(verts):
            if v[0] % 2:
                u = verts[part[i]]
                d = (u[0] - v[0], u[1] - v[1])
                dirs[k, wpos[v]] = _DIR_CODE[d]
    wt = _edge_weights(
        n, a, Gauge(gauge), white[None, :, 0], white[None, :, 1], dirs.astype(np.int64)
    )
    weights = np.prod(wt, axis=1)
    order = np.lexsort(dirs.T[::-1])
    return Enumeration(n, float(a), dirs[order], weights[order])


_DIR_CODE = {(int(dx), int(dy)): k for k, (dx, dy) in enumerate(DIRS)}


# --- domino shuffling -------------------------------------------------------

NE, NW, SW, SE = 0, 1, 2, 3
_SIDE_STEP = np.array([(1, 1), (-1, 1), (-1, -1), (1, -1)])


def _initial_pattern(a: float, gauge: Gauge) -> np.ndarray:
    """Side weights of the top-order cells (odd faces), keyed by residues mod 4.

    Entries for even residues are placeholders and never read.
    """
    pat = np.ones((4, 4, 4))
    for i in (1, 3):
        for j in (1, 3):
            # white end of each side and the direction code to its black end
            ends = [((i, j + 1), 3), ((i, j + 1), 2), ((i, j - 1), 1), ((i, j - 1), 0)]
            for s, ((wx, wy), d) in enumerate(ends):
                pat[i, j, s] = _edge_weights(
                    0, a, gauge, np.array(wx), np.array(wy), np.array(d)
                )
    return pat


def _reduce_pattern(pat: np.ndarray) -> np.ndarray:
    delta = pat[..., NE] * pat[..., SW] + pat[..., NW] * pat[..., SE]
    out = np.empty_like(pat)
    for s in range(4):
        dx, dy = _SIDE_STEP[s]
        src = np.roll(np.roll(pat[..., s] / delta, -dx, axis=0), -dy, axis=1)
        out[..., s] = src
    return out / out.max()


def creation_tables(n: int, a: float, gauge=Gauge.TWO_PERIODIC) -> np.ndarray:
    """P(create the NE+SW pair) per order k = 1..n, keyed by face residues."""
    gauge = Gauge(gauge)
    pat = _initial_pattern(a, gauge)
    tables = np.empty((n + 1, 4, 4))
    for k in range(n, 0, -1):
        delta = pat[..., NE] * pat[..., SW] + pat[..., NW] * pat[..., SE]
        tables[k] = pat[..., NE] * pat[..., SW] / delta
        pat = _reduce_pattern(pat)
    tables[0] = np.nan
    return tables


@numba.njit(cache=True)
def _grow(prev, k, table, u):
    cur = np.zeros((k, k), dtype=np.uint8)
    for p in range(k):
        for q in range(k):
            ne = 0
            nw = 0
            sw = 0
            se = 0
            if p < k - 1 and q < k - 1:
                ne = (prev[p, q] >> SW) & 1
            if p >= 1 and q < k - 1:
                nw = (prev[p - 1, q] >> SE) & 1
            if p >= 1 and q >= 1:
                sw = (prev[p - 1, q - 1] >> NE) & 1
            if p < k - 1 and q >= 1:
                se = (prev[p, q - 1] >> NW) & 1
            cnt = ne + nw + sw + se
            if cnt == 0:
                fx = (2 * p - k + 1) % 4
                fy = (2 * q - k + 1) % 4
                if u[p, q] < table[fx, fy]:
                    cur[p, q] = (1 << NE) | (1 << SW)
                else:
                    cur[p, q] = (1 << NW) | (1 << SE)
            elif cnt == 1:
                if ne:
                    cur[p, q] = 1 << SW
                elif nw:
                    cur[p, q] = 1 << SE
                elif sw:
                    cur[p, q] = 1 << NE
                else:
                    cur[p, q] = 1 << NW
    return cur


@numba.njit(cache=True)
def _shuffle_flat(n, tables, u):
    cells = np.zeros((0, 0), dtype=np.uint8)
    off = 0
    for k in range(1, n + 1):
        cells = _grow(cells, k, tables[k], u[off : off + k * k].reshape((k, k)))
        off += k * k
    return cells


def shuffle_cells(n: int, a: float, seed, gauge=Gauge.TWO_PERIODIC) -> np.ndarray:
    """Cell bitmasks of an exact sample of the order-n diamond.

    Uniforms are drawn one order at a time, which is the same stream as one
    long draw; ``sample_batch`` relies on that.
    """
    rng = as_seed(seed).generator()
    tables = creation_tables(n, a, gauge)
    cells = np.zeros((0, 0), dtype=np.uint8)
    for k in range(1, n + 1):
        u = rng.random((k, k))
        cells = _grow(cells, k, tables[k], u)
    return cells


def cells_to_dirs(n: int, cells: np.ndarray) -> np.ndarray:
    """Convert top-order cell bitmasks (n even) to white direction codes."""
    dirs = np.full(n * (n + 1), -1, dtype=np.int8)
    p, q = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    fx = 2 * p - n + 1
    fy = 2 * q - n + 1
    # side -> (white offset from the cell centre, direction code)
    spec = {NE: ((0, 1), 3), NW: ((0, 1), 2), SW: ((0, -1), 1), SE: ((0, -1), 0)}
    for s, ((ox, oy), d) in spec.items():
        on = (cells >> s) & 1 == 1
        wx = fx[on] + ox
        wy = fy[on] + oy
        idx = ((wx + n - 1) // 2) * (n + 1) + (wy + n) // 2
        dirs[idx] = d
    return dirs


def sample(n: int, a: float, seed=0, gauge=Gauge.TWO_PERIODIC) -> DimerConfig:
    check_size(n)
    if not 0 < a <= 1:
        raise LatticeError(f"weight a must lie in (0, 1], got {a}")
    seed = as_seed(seed)
    cells = shuffle_cells(n, a, seed, gauge)
    dirs = cells_to_dirs(n, cells)
    d = DimerConfig(n, float(a), dirs, seed)
    if (dirs < 0).any() or not d.is_valid():
        raise AssertionError("shuffling produced an invalid matching")
    return d


def sample_many(n: int, a: float, count: int, seed=0) -> list[DimerConfig]:
    """``count`` samples on consecutive streams starting at ``seed``."""
    base = as_seed(seed)
    dirs = sample_batch(n, a, count, base)
    return [
        DimerConfig(n, float(a), row, RandomSeed(base.seed, base.stream + i))
        for i, row in enumerate(dirs)
    ]


def sample_batch(n: int, a: float, count: int, seed=0, gauge=Gauge.TWO_PERIODIC) -> np.ndarray:
    """Direction-code rows for ``count`` samples; row i equals the sample on stream+i.

    Meant for small n where per-call overhead dominates.
    """
    check_size(n)
    base = as_seed(seed)
    tables = creation_tables(n, a, gauge)
    total = n * (n + 1) * (2 * n + 1) // 6
    out = np.empty((count, n * (n + 1)), dtype=np.int8)
    for i in range(count):
        u = RandomSeed(base.seed, base.stream + i).generator().random(total)
        out[i] = cells_to_dirs(n, _shuffle_flat(n, tables, u))
    return out


def classical_count(n: int) -> int:
    """Number of tilings of the order-n diamond, 2^(n(n+1)/2)."""
    return 2 ** (n * (n + 1) // 2)


__all__ = [
    "DimerConfig",
    "Enumeration",
    "RandomSeed",
    "ResourceError",
    "classical_count",
    "config_weight",
    "enumerate_tilings",
    "sample",
    "sample_batch",
    "sample_many",
]
