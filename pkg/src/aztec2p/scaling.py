"""Scaling constants, the rough-smooth curve, regions and backbone path statistics.

Coordinates are those of the diamond (vertices in [-n, n]^2); the limit
curve lives in the unit square, scaled by n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, newton

from .heights import central_height, height_field
from .lattice import DIRS, Direction, LatticeError, label_vertex
from .sampler import DimerConfig, as_seed, sample
from .temperley import OrientedForest, south_forest, split_point


class DomainError(ValueError):
    pass


# --- constants ------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFrame:
    a: float
    c: float
    xi_c: float
    c0: float
    lambda1: float
    lambda2: float


def scaling_frame(a: float) -> ScalingFrame:
    if not 0 < a < 1:
        raise DomainError("a must lie in (0, 1); the smooth region degenerates at a = 1")
    c = a / (1 + a * a)
    d = 1 - 2 * c
    c0 = d ** (2 / 3) / (2 * c * (1 + c)) ** (1 / 3)
    return ScalingFrame(
        a=a,
        c=c,
        xi_c=-0.5 * math.sqrt(d),
        c0=c0,
        lambda1=math.sqrt(d) / (2 * c0),
        lambda2=d**1.5 / (2 * c * c0 * c0),
    )


def scaling_frame_expanded(a: float) -> ScalingFrame:
    """Same constants with c0 substituted in; a second coding for cross-checks."""
    if not 0 < a < 1:
        raise DomainError("a must lie in (0, 1)")
    c = (a * a * a + a) / (1 + a * a) ** 2
    d = (1 - a) ** 2 / (1 + a * a)
    k = 2 * c * (1 + c)
    return ScalingFrame(
        a=a,
        c=c,
        xi_c=-math.sqrt(d / 4),
        c0=math.exp((2 * math.log(d) - math.log(k)) / 3),
        lambda1=0.5 * d ** (1 / 2 - 2 / 3) * k ** (1 / 3),
        lambda2=d ** (3 / 2 - 4 / 3) * k ** (2 / 3) / (2 * c),
    )


# --- limit curve ----------------------------------------------------------------


def limit_curve_residual(x1, x2, a: float):
    """Polynomial whose zero set is the pair of limit curves (rough-smooth inside)."""
    c = a / (1 + a * a)
    X = np.asarray(x1, dtype=float) ** 2
    Y = np.asarray(x2, dtype=float) ** 2
    val = (
        64 * c**6 * (X - 1) * (Y - 1)
        - (X * X + (Y - 1) ** 2 - 2 * X * (1 + Y)) ** 2
        - 16 * c**4 * (3 * (Y - 1) ** 2 + X * (-6 + 27 * Y - 20 * Y * Y) + X * X * (3 - 20 * Y + 16 * Y * Y))
        - 4
        * c**2
        * (
            3 * (Y - 1) ** 3
            + X**3 * (3 + 8 * Y)
            + X * X * (-9 + 13 * Y - 16 * Y * Y)
            + X * (9 - 30 * Y + 13 * Y * Y + 8 * Y**3)
        )
    )
    return val if np.ndim(val) else float(val)


def _first_root(fn, lo: float, hi: float, steps: int = 4000) -> float:
    """First sign change of fn scanning from hi down to lo, refined."""
    s = np.linspace(hi, lo, steps + 1)
    v = fn(s)
    sg = np.sign(v)
    idx = np.nonzero(sg[:-1] * sg[1:] <= 0)[0]
    if not len(idx):
        raise DomainError("no bracket found for the limit curve")
    i = int(idx[0])
    if v[i] == 0:
        return float(s[i])
    r = brentq(lambda z: float(fn(np.array(z))), s[i + 1], s[i], xtol=1e-15, rtol=1e-15)
    try:
        r2 = newton(lambda z: float(fn(np.array(z))), r, tol=1e-15, maxiter=20)
        if abs(r2 - r) < 1e-9:
            r = r2
    except RuntimeError:
        pass
    return float(r)


@lru_cache(maxsize=32)
def curve_extent(a: float) -> float:
    """alpha with (-alpha, 0) on the rough-smooth curve."""
    return -_first_root(lambda s: limit_curve_residual(s, 0.0 * s, a), -1.0, 0.0)


@lru_cache(maxsize=200_000)
def _curve_point(t: float, a: float) -> tuple[float, float]:
    al = curve_extent(a)
    if abs(t) > al + 1e-12:
        raise DomainError(f"|t| = {abs(t):.4g} exceeds the curve extent {al:.4g}")
    t = max(-al, min(al, t))
    if abs(abs(t) - al) < 1e-12:
        return (-al, 0.0) if t > 0 else (0.0, -al)
    hi = -abs(t) / 2
    sig = _first_root(lambda s: limit_curve_residual(s - t / 2, s + t / 2, a), -1.0 + abs(t) / 2, hi)
    return sig - t / 2, sig + t / 2


def limit_curve_point(t: float, a: float) -> np.ndarray:
    """Point of the third-quadrant rough-smooth curve with v . e2 = t."""
    return np.array(_curve_point(float(t), float(a)))


# --- coordinate maps ---------------------------------------------------------------


def beta_map(n: int, t: float, x: float, a: float) -> np.ndarray:
    return n * limit_curve_point(t / n, a) + x * np.array([1.0, 1.0])


def beta_inverse(n: int, p, a: float) -> tuple[np.ndarray, np.ndarray]:
    """(t, x) with beta_n(t, x) = p; t is exact, x measured along e1."""
    P = np.atleast_2d(np.asarray(p, dtype=float))
    t = P[:, 1] - P[:, 0]
    al = curve_extent(a) * n
    x = np.full(len(P), np.nan)
    ok = np.abs(t) <= al
    for i in np.nonzero(ok)[0]:
        q = n * limit_curve_point(t[i] / n, a)
        x[i] = ((P[i, 0] - q[0]) + (P[i, 1] - q[1])) / 2
    return t, x


def gamma_map(n: int, t: float, x: float, a: float) -> np.ndarray:
    return n * limit_curve_point(t / n, a) + np.array([x, 0.0])


def nearest_a_face(p) -> tuple[int, int]:
    """Nearest a-face to a point; ties go to the lexicographically smallest."""
    px, py = float(p[0]), float(p[1])
    # a-faces are (1, 1) + i (2, 2) + j (2, -2)
    u = (px - 1 + py - 1) / 4
    v = (px - 1 - (py - 1)) / 4
    best = None
    for i in range(math.floor(u) - 1, math.floor(u) + 3):
        for j in range(math.floor(v) - 1, math.floor(v) + 3):
            x, y = 1 + 2 * i + 2 * j, 1 + 2 * i - 2 * j
            key = ((x - px) ** 2 + (y - py) ** 2, x, y)
            if best is None or key < best:
                best = key
    return best[1], best[2]


def gamma_hat(n: int, t: float, x: float, frame: ScalingFrame) -> tuple[int, int]:
    """Scaled point rounded to the nearest a-face, then shifted by -(1, 1)."""
    T = 2 ** (1 / 3) * frame.lambda2 * n ** (2 / 3) * t
    X = 2 ** (5 / 3) * frame.lambda1 * n ** (1 / 3) * x
    if abs(T) > curve_extent(frame.a) * n:
        raise DomainError("t outside the curve's range")
    f = nearest_a_face(gamma_map(n, T, X, frame.a))
    return f[0] - 1, f[1] - 1


# --- regions -----------------------------------------------------------------------


_REGIONS = ("RS_n", "RS_n*", "PRS_n*", "Meso_n", "Cap", "Cross")


@dataclass(frozen=True)
class RegionSpec:
    """A named region near the south-west rough-smooth boundary.

    ``gamma_a`` is the unspecified positive constant in the outer extent of
    the large smooth coupling set; it only matters for ``Cross``.
    """

    name: str
    n: int
    a: float
    gamma_a: float = 0.0
    bounds: tuple = field(init=False)

    def __post_init__(self):
        if self.name not in _REGIONS:
            raise DomainError(f"unknown region {self.name!r}")
        n = self.n
        L = math.log(n)
        if self.name == "RS_n":
            b = ((-(n**0.75), n**0.75), (-(n**0.5) * L**1.5, 2 * n ** (1 / 3) * L**2))
        elif self.name == "RS_n*":
            b = ((-2 * n**0.75, 2 * n**0.75), (-(n**0.5) * L**1.5, 2 * n ** (1 / 3) * L**2))
        elif self.name == "PRS_n*":
            b = ((-2 * n**0.75, 2 * n**0.75), (-(n**0.5) * L**2, n**0.75))
        elif self.name == "Meso_n":
            b = ((-(n**0.75), n**0.75), (-(n**0.5), n**0.5))
        elif self.name == "Cap":
            b = ((-(n ** (5 / 6)), n ** (5 / 6)), (-(n**0.5) * L**2, 2 * n ** (1 / 3) * L**2))
        else:
            far = n * (math.hypot(*limit_curve_point(0.0, self.a)) + self.gamma_a)
            b = (
                (-(n ** (5 / 6)), n ** (5 / 6)),
                (n ** (6 / 7), far),
                (n ** (1 / 3) * L**2, 2 * n ** (6 / 7)),
            )
        # round outward to lattice units
        out = tuple((math.floor(lo), math.ceil(hi)) for lo, hi in b)
        object.__setattr__(self, "bounds", out)

    def contains(self, pts) -> np.ndarray:
        P = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.name == "Meso_n":
            xc = scaling_frame(self.a).xi_c * self.n
            q = P - xc
            u = (q[:, 0] - q[:, 1]) / math.sqrt(2)
            w = (q[:, 0] + q[:, 1]) / math.sqrt(2)
            (u0, u1), (w0, w1) = self.bounds
            return (u >= u0) & (u <= u1) & (w >= w0) & (w <= w1)
        if self.name == "Cross":
            out = np.zeros(len(P), dtype=bool)
            for k in range(4):
                Q = _rotate(P, -k)
                out |= self._in_beta(Q, self.bounds[0], self.bounds[1])
                out |= self._in_beta(Q, self.bounds[0], self.bounds[2])
            return out
        return self._in_beta(P, self.bounds[0], self.bounds[1])

    def _in_beta(self, P, tb, xb) -> np.ndarray:
        t, x = beta_inverse(self.n, P, self.a)
        ok = ~np.isnan(x)
        return ok & (t >= tb[0]) & (t <= tb[1]) & (x >= xb[0]) & (x < xb[1] if self.name == "Cross" else x <= xb[1])


def _rotate(P, quarter_turns: int) -> np.ndarray:
    k = quarter_turns % 4
    Q = np.array(P, dtype=float)
    for _ in range(k):
        Q = np.stack([-Q[:, 1], Q[:, 0]], axis=1)
    return Q


def _beta_box(n: int, a: float, tb, xb, samples: int) -> np.ndarray:
    al = curve_extent(a) * n
    t0, t1 = max(tb[0], -al), min(tb[1], al)
    ts = np.linspace(t0, t1, samples)
    lower = np.array([beta_map(n, t, xb[0], a) for t in ts])
    upper = np.array([beta_map(n, t, xb[1], a) for t in ts[::-1]])
    return np.concatenate([lower, upper])


def region_polygons(region: RegionSpec, samples: int = 33) -> list[np.ndarray]:
    """Outlines of the region, for drawing; boxes are mapped edge by edge."""
    n, a = region.n, region.a
    if region.name == "Meso_n":
        (u0, u1), (w0, w1) = region.bounds
        r = 1 / math.sqrt(2)
        c = scaling_frame(a).xi_c * n
        corners = [(u0, w0), (u1, w0), (u1, w1), (u0, w1)]
        return [np.array([(c + r * (w + u), c + r * (w - u)) for u, w in corners])]
    if region.name == "Cross":
        out = []
        for xb in region.bounds[1:]:
            if xb[1] <= xb[0]:
                continue
            base = _beta_box(n, a, region.bounds[0], xb, samples)
            out.extend(_rotate(base, k) for k in range(4))
        return out
    return [_beta_box(n, a, region.bounds[0], region.bounds[1], samples)]


# --- backbone statistics -------------------------------------------------------------


def height_match_check(d: DimerConfig, f: OrientedForest | None = None) -> bool:
    """Whether the central height equals 4 I - n - 1 for the south split point I."""
    f = f if f is not None else south_forest(d)
    return central_height(height_field(d)) == 4 * split_point(f) - d.n - 1


def height_match_frequency(n: int, a: float, count: int, seed=0) -> float:
    seeds = as_seed(seed).spawn(count)
    hits = sum(height_match_check(sample(n, a, seed=s)) for s in seeds)
    return hits / count


def south_path(f: OrientedForest, i: int) -> np.ndarray:
    """Backbone path of the south forest from the i-th south source (1-based)."""
    if f.direction != Direction.S:
        raise LatticeError("expected a south forest")
    if not 1 <= i <= f.n // 2:
        raise LatticeError(f"path index {i} out of range")
    v = label_vertex(f.graph, "S", i)
    return np.array(f.path(v), dtype=np.int64)


def backtrack_stat(path, region: RegionSpec | None = None) -> float:
    """sup of w1 - v1 over ordered pairs v before w on the path, both in region.

    Returns -inf when fewer than two path vertices lie in the region.
    """
    P = np.asarray(path, dtype=float)
    if region is not None:
        P = P[region.contains(P)]
    if len(P) < 2:
        return -math.inf
    x = P[:, 0]
    prev_min = np.minimum.accumulate(x)[:-1]
    return float(np.max(x[1:] - prev_min))


def backtrack_bound(n: int, k: int) -> float:
    return (2 * k + 1) * n**0.25 * math.log(n) ** 2


@dataclass(frozen=True)
class BacktrackRun:
    n: int
    stats: np.ndarray  # runs x (k = 0..kmax)
    bounds: np.ndarray

    def within(self) -> np.ndarray:
        """Fraction of runs inside the bound, per k."""
        return np.mean(self.stats < self.bounds[None, :], axis=0)


def backtrack_runs(n: int, a: float, runs: int, kmax: int = 3, seed=0) -> BacktrackRun:
    region = RegionSpec("RS_n*", n, a)
    stats = np.full((runs, kmax + 1), -math.inf)
    for r, s in enumerate(as_seed(seed).spawn(runs)):
        f = south_forest(sample(n, a, seed=s))
        I = split_point(f)
        for k in range(kmax + 1):
            if I - k >= 1:
                stats[r, k] = backtrack_stat(south_path(f, I - k), region)
    bounds = np.array([backtrack_bound(n, k) for k in range(kmax + 1)])
    return BacktrackRun(n, stats, bounds)


# --- Airy path extraction -------------------------------------------------------------


@dataclass(frozen=True)
class AiryPaths:
    times: np.ndarray
    upper: np.ndarray  # (count, len(times)); A_i^{n,+}
    lower: np.ndarray  # A_i^{n,-}


def extract_airy_paths(
    f: OrientedForest, frame: ScalingFrame, times, count: int = 1, region: RegionSpec | None = None
) -> AiryPaths:
    """Largest and smallest scaled x at which the rounded point lies on a path.

    For each scaled time t the point moves along a horizontal line through
    the curve point; an a-face f is hit when its cell |dx| + |dy| <= 2 meets
    the line, and is on the path when the south vertex f - (0, 1) is.
    Absent paths give -inf / +inf.  The default window is ``Cap``; the
    mesoscopic window is narrower than the fluctuations at desk sizes.
    """
    n = f.n
    times = np.asarray(times, dtype=float)
    region = region or RegionSpec("Cap", n, frame.a)
    I = split_point(f)
    sT = 2 ** (1 / 3) * frame.lambda2 * n ** (2 / 3)
    sX = 2 ** (5 / 3) * frame.lambda1 * n ** (1 / 3)
    up = np.full((count, len(times)), -math.inf)
    lo = np.full((count, len(times)), math.inf)
    for i in range(1, count + 1):
        j = I + 1 - i
        if j < 1:
            continue
        faces = south_path(f, j) + np.array([0, 1])
        faces = faces[region.contains(faces)]
        if not len(faces):
            continue
        for k, t in enumerate(times):
            base = gamma_map(n, sT * t, 0.0, frame.a)
            dy = np.abs(faces[:, 1] - base[1])
            hit = dy <= 2
            if not hit.any():
                continue
            half = 2 - dy[hit]
            fx = faces[hit, 0]
            up[i - 1, k] = (np.max(fx + half) - base[0]) / sX
            lo[i - 1, k] = (np.min(fx - half) - base[0]) / sX
    return AiryPaths(times, up, lo)


def top_path_samples(n: int, a: float, count: int, seed=0, t: float = 0.0) -> np.ndarray:
    frame = scaling_frame(a)
    out = np.empty(count)
    for r, s in enumerate(as_seed(seed).spawn(count)):
        f = south_forest(sample(n, a, seed=s))
        out[r] = extract_airy_paths(f, frame, [t]).upper[0, 0]
    return out


# --- onions ---------------------------------------------------------------------------


def _crossings(P: np.ndarray, center, r1: float, r2: float):
    """Segments of the path inside the box that go from one vertical side to
    the other.  Returns (start, end, side) with side +1 when starting right.

    A vertex touches a side when it is within one step (2 units) of it.
    """
    q = P - np.asarray(center, dtype=float)
    inside = (np.abs(q[:, 0]) <= r1) & (np.abs(q[:, 1]) <= r2)
    side = np.where(q[:, 0] >= r1 - 2, 1, np.where(q[:, 0] <= -r1 + 2, -1, 0))
    out = []
    last_side, last_idx = 0, -1
    for k in range(len(P)):
        if not inside[k]:
            last_side, last_idx = 0, -1
            continue
        sd = int(side[k])
        if sd == 0:
            continue
        if last_side == -sd:
            out.append((last_idx, k, last_side))
        last_side, last_idx = sd, k
    return out


def _point_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x0, y0 = poly[:, 0][None, :], poly[:, 1][None, :]
    x1, y1 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    crosses = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    inside = np.sum(crosses & (x < xint), axis=1) % 2 == 1
    # count points on the polygon's vertices as inside
    on = np.any((x == x0) & (y == y0), axis=1)
    return inside | on


@dataclass(frozen=True)
class OnionReport:
    found: bool
    layers: int  # fewest paths entering an enclosed region; 0 if none found
    path_index: int | None = None


def onion_detect(paths, r1: float, r2: float, center) -> OnionReport:
    """Look for one path crossing the box B_{r1, r2}(center) in both directions.

    ``paths`` is a list of vertex arrays.  For each pair of opposite
    crossings of one path, the region between them (closed up along the box
    sides) is formed and the number of distinct paths entering it counted.
    """
    if r1 < 1 or r2 < 1:
        raise DomainError("r1 and r2 must be at least 1")
    arrs = [np.asarray(p, dtype=float) for p in paths]
    best = None
    for pi, P in enumerate(arrs):
        cr = _crossings(P, center, r1, r2)
        for u in range(len(cr)):
            for v in range(u + 1, len(cr)):
                if cr[u][2] == cr[v][2]:
                    continue
                s1, t1, _ = cr[u]
                s2, t2, _ = cr[v]
                poly = np.concatenate([P[s1 : t1 + 1], P[s2 : t2 + 1]])
                layers = 0
                for Q in arrs:
                    if np.any(_point_in_polygon(Q, poly)):
                        layers += 1
                if best is None or layers < best[0]:
                    best = (layers, pi)
    if best is None:
        return OnionReport(False, 0)
    return OnionReport(True, best[0], best[1])


def onion_scan(paths, r1: float, r2: float, centers) -> list[OnionReport]:
    return [onion_detect(paths, r1, r2, c) for c in centers]


__all__ = [
    "AiryPaths",
    "BacktrackRun",
    "DIRS",
    "OnionReport",
    "RegionSpec",
    "ScalingFrame",
    "backtrack_bound",
    "backtrack_runs",
    "backtrack_stat",
    "beta_inverse",
    "beta_map",
    "curve_extent",
    "extract_airy_paths",
    "gamma_hat",
    "gamma_map",
    "height_match_check",
    "height_match_frequency",
    "limit_curve_point",
    "limit_curve_residual",
    "nearest_a_face",
    "onion_detect",
    "region_polygons",
    "scaling_frame",
    "scaling_frame_expanded",
    "south_path",
    "top_path_samples",
]
