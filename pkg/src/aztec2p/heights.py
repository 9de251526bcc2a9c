"""Height functions on faces.

Going counterclockwise around a white vertex (clockwise around a black one)
the height goes up by 1 across an empty edge and down by 3 across a dimer.
Equivalently, stepping between adjacent faces across an edge with the white
endpoint on the left changes the height by 1 - 4 * [dimer].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np

from .lattice import (
    DIRS,
    LatticeError,
    a_face_of,
    boundary_height,
    classify_vertex,
    VertexClass,
)
from .sampler import DimerConfig


@dataclass(frozen=True)
class HeightField:
    """Heights on the closed face set, stored densely over [-n-1, n+1]^2.

    Entries that are not faces of the closed face set hold ``MISSING``.
    """

    n: int
    values: np.ndarray = field(repr=False)

    MISSING = np.iinfo(np.int32).min

    def __call__(self, f) -> int:
        x, y = int(f[0]), int(f[1])
        m = self.n + 1
        if abs(x) > m or abs(y) > m:
            raise LatticeError(f"face {(x, y)} outside the closed face set")
        v = int(self.values[x + m, y + m])
        if v == self.MISSING:
            raise LatticeError(f"{(x, y)} is not a face of the closed face set")
        return v

    def faces(self):
        m = self.n + 1
        xs, ys = np.nonzero(self.values != self.MISSING)
        return np.stack([xs - m, ys - m], axis=1)

    def with_value(self, f, value: int) -> "HeightField":
        vals = self.values.copy()
        m = self.n + 1
        vals[int(f[0]) + m, int(f[1]) + m] = value
        return HeightField(self.n, vals)

    def __eq__(self, other):
        return isinstance(other, HeightField) and self.n == other.n and np.array_equal(
            self.values, other.values
        )

    __hash__ = None


@dataclass(frozen=True)
class Mollifier:
    offsets: tuple

    def __post_init__(self):
        for u in self.offsets:
            if u[0] % 2 or u[1] % 2:
                raise LatticeError(f"mollifier offset {u} is not in (2Z)^2")


def log_spaced_mollifier(n: int, count: int) -> Mollifier:
    """Column offsets 2 floor(l log^2 n) e2 for l = 0..count."""
    L = math.log(n) ** 2
    offs = []
    for ell in range(count + 1):
        s = 2 * math.floor(ell * L)
        offs.append((-s, s))
    return Mollifier(tuple(offs))


def _boundary_grid(n: int) -> np.ndarray:
    m = n + 1
    vals = np.full((2 * m + 1, 2 * m + 1), HeightField.MISSING, dtype=np.int32)
    for x in range(-m, m + 1):
        for y in range(-m, m + 1):
            if (x + y) % 2 or (abs(x) == m and abs(y) == m):
                continue
            bh = boundary_height(n, (x, y))
            if bh is not None:
                vals[x + m, y + m] = bh
    return vals


_BOUNDARY_CACHE: dict[int, np.ndarray] = {}


def boundary_grid(n: int) -> np.ndarray:
    if n not in _BOUNDARY_CACHE:
        _BOUNDARY_CACHE[n] = _boundary_grid(n)
    return _BOUNDARY_CACHE[n].copy()


@numba.njit(cache=True)
def _fill_interior(vals, dirs, n):
    m = n + 1
    for y in range(-n + 1, n):
        for x in range(-n + 1, n):
            if (x + y) % 2:
                continue
            # step from (x-1, y-1) to (x, y) across the edge {(x, y-1), (x-1, y)}
            h = vals[x - 1 + m, y - 1 + m]
            if x % 2 == 0:
                wx, wy, code, sgn = x - 1, y, 3, 1
            else:
                wx, wy, code, sgn = x, y - 1, 1, -1
            wi = ((wx + n - 1) // 2) * (n + 1) + (wy + n) // 2
            dimer = 1 if dirs[wi] == code else 0
            vals[x + m, y + m] = h + sgn * (1 - 4 * dimer)
    return vals


def height_field(d: DimerConfig) -> HeightField:
    n = d.n
    vals = boundary_grid(n)
    _fill_interior(vals, d.dirs.astype(np.int8), n)
    return HeightField(n, vals)


# --- validation and reconstruction ---------------------------------------------

# faces around a white vertex, counterclockwise, and the direction code of the
# edge crossed going from face k to face k+1
_WHITE_RING = ((1, 0), (0, 1), (-1, 0), (0, -1))
_WHITE_EDGE = (0, 1, 2, 3)
# faces around a black vertex, clockwise, and crossed edge codes (from black)
_BLACK_RING = ((1, 0), (0, -1), (-1, 0), (0, 1))
_BLACK_EDGE = (3, 2, 1, 0)


def _ring_steps(h: HeightField, v, ring):
    vals = [h((v[0] + dx, v[1] + dy)) for dx, dy in ring]
    return [vals[(k + 1) % 4] - vals[k] for k in range(4)]


def validate_height(h: HeightField, report: bool = False):
    """Check boundary values and the increment rule around every vertex."""
    n = h.n
    problems = []
    ref = boundary_grid(n)
    mask = ref != HeightField.MISSING
    if not np.array_equal(h.values[mask], ref[mask]):
        problems.append("boundary values differ")
    m = n + 1
    faces = np.zeros_like(ref, dtype=bool)
    for x in range(-m, m + 1):
        for y in range(-m, m + 1):
            if (x + y) % 2 == 0 and not (abs(x) == m and abs(y) == m):
                faces[x + m, y + m] = True
    if np.any(h.values[faces] == HeightField.MISSING):
        problems.append("missing face heights")
        return (False, problems) if report else False
    V = h.values.astype(np.int64)
    # white vertices: x odd, y even; black: x even, y odd
    for parity, ring in ((1, _WHITE_RING), (0, _BLACK_RING)):
        xs = np.arange(-n + parity * 1 if parity else -n, n + 1)
        xs = xs[np.mod(xs, 2) == parity]
        ys = np.arange(-n, n + 1)
        ys = ys[np.mod(ys, 2) == 1 - parity]
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        ring_vals = [V[X + dx + m, Y + dy + m] for dx, dy in ring]
        steps = np.stack([ring_vals[(k + 1) % 4] - ring_vals[k] for k in range(4)])
        ok = np.all((steps == 1) | (steps == -3), axis=0) & (np.sum(steps == -3, axis=0) == 1)
        if not ok.all():
            bad = np.argwhere(~ok)[0]
            problems.append(
                f"increment rule fails at vertex {(int(X[tuple(bad)]), int(Y[tuple(bad)]))}"
            )
    valid = not problems
    return (valid, problems) if report else valid


def config_from_heights(h: HeightField, a: float = 1.0) -> DimerConfig:
    """Read the dimer at each white vertex off the -3 step of its ring."""
    n = h.n
    from .lattice import white_coords

    wht = white_coords(n)
    dirs = np.empty(len(wht), dtype=np.int8)
    for i, (x, y) in enumerate(wht):
        steps = _ring_steps(h, (x, y), _WHITE_RING)
        k = steps.index(-3)
        dirs[i] = _WHITE_EDGE[k]
    return DimerConfig(n, a, dirs)


def height_at_vertex(h: HeightField, v) -> Fraction:
    """Average height of the four faces around an interior vertex."""
    x, y = int(v[0]), int(v[1])
    classify_vertex((x, y))
    try:
        vals = [h((x + dx, y + dy)) for dx, dy in _WHITE_RING]
    except LatticeError as exc:
        raise LatticeError(f"vertex {(x, y)} is missing a face") from exc
    return Fraction(sum(vals), 4)


def dimer_direction_from_vertex_height(h: HeightField, v) -> int:
    """Recover the dimer at a vertex from its average height.

    The offset of the vertex average from the height of its a-face takes one
    of four values, one per incident edge.
    """
    x, y = int(v[0]), int(v[1])
    cls = classify_vertex((x, y))
    af = a_face_of((x, y))
    rel = height_at_vertex(h, (x, y)) - h(af)
    white = cls in (VertexClass.N, VertexClass.S)
    ring = _WHITE_RING if white else _BLACK_RING
    edges = _WHITE_EDGE if white else _BLACK_EDGE
    k0 = ring.index((af[0] - x, af[1] - y))
    table = {}
    for j in range(4):
        # dimer on the edge between ring faces j and j+1
        hs = [0] * 4
        for t in range(1, 4):
            k = (k0 + t - 1) % 4
            hs[t] = hs[t - 1] + (-3 if k == j else 1)
        table[Fraction(sum(hs), 4)] = edges[j]
    return table[rel]


def vertex_height_table(cls: VertexClass) -> dict:
    """Average-height offsets from the a-face height, per dimer direction code."""
    probe = {
        VertexClass.S: (1, 0),
        VertexClass.N: (1, 2),
        VertexClass.E: (2, 1),
        VertexClass.W: (0, 1),
    }[cls]
    white = cls in (VertexClass.N, VertexClass.S)
    ring = _WHITE_RING if white else _BLACK_RING
    edges = _WHITE_EDGE if white else _BLACK_EDGE
    af = a_face_of(probe)
    k0 = ring.index((af[0] - probe[0], af[1] - probe[1]))
    out = {}
    for j in range(4):
        hs = [0] * 4
        for t in range(1, 4):
            k = (k0 + t - 1) % 4
            hs[t] = hs[t - 1] + (-3 if k == j else 1)
        out[edges[j]] = Fraction(sum(hs), 4)
    return out


def central_height(h: HeightField, radius: int | None = None) -> int:
    """Nearest integer to the mean height over faces with sup-norm <= radius.

    Halves round up, matching the interval (H' - 1/2, H' + 1/2].
    """
    n = h.n
    if radius is None:
        radius = math.floor(n**0.75)
    if radius < 0:
        raise LatticeError("empty window")
    m = n + 1
    r = min(radius, m)
    sub = h.values[m - r : m + r + 1, m - r : m + r + 1].astype(np.int64)
    ok = sub != HeightField.MISSING
    cnt = int(ok.sum())
    if cnt == 0:
        raise LatticeError("empty window")
    s = int(sub[ok].sum())
    return (2 * s + cnt) // (2 * cnt)


def central_height_of_values(mean: Fraction) -> int:
    """Unique integer in (mean - 1/2, mean + 1/2]."""
    return math.floor(mean + Fraction(1, 2))


def nearest_face(p) -> tuple[int, int]:
    """Nearest face to a point; ties go to the lexicographically smallest."""
    px, py = float(p[0]), float(p[1])
    best = None
    for x in range(math.floor(px) - 1, math.floor(px) + 3):
        for y in range(math.floor(py) - 1, math.floor(py) + 3):
            if (x + y) % 2:
                continue
            d = (x - px) ** 2 + (y - py) ** 2
            key = (d, x, y)
            if best is None or key < best:
                best = key
    return best[1], best[2]


def mollified_height(h: HeightField, phi: Mollifier, v) -> Fraction:
    total = 0
    for u in phi.offsets:
        f = nearest_face((float(v[0]) + u[0], float(v[1]) + u[1]))
        try:
            total += h(f)
        except LatticeError as exc:
            raise LatticeError(f"mollifier window leaves the domain at {f}") from exc
    return Fraction(total, len(phi.offsets))


__all__ = [
    "HeightField",
    "Mollifier",
    "log_spaced_mollifier",
    "central_height",
    "config_from_heights",
    "dimer_direction_from_vertex_height",
    "height_at_vertex",
    "height_field",
    "mollified_height",
    "validate_height",
    "DIRS",
]
