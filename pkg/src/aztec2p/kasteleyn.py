"""Kasteleyn matrix of the two-periodic Aztec diamond and dense statistics.

Rows are black vertices (``lattice.black_coords`` order), columns white
vertices (``lattice.white_coords`` order).  Weights: ``a`` on a-face edges,
``b`` on b-face edges; ``K_{1/a,1}`` is the reciprocal model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .lattice import (
    DIRS,
    LatticeError,
    black_coords,
    black_index,
    boundary_height,
    check_size,
    in_diamond,
    white_coords,
    white_index,
)


class NumericError(ArithmeticError):
    pass


def k_entry(bx: int, by: int, d: int, a: float, b: float = 1.0) -> complex:
    """K(x, x + step) for a black vertex x and direction code d from it."""
    east = (bx + by) % 4 == 3
    if east:
        return (1j * b, a, 1j * a, b)[d]
    return (1j * a, b, 1j * b, a)[d]


@dataclass(frozen=True)
class KasteleynSystem:
    n: int
    a: float
    b: float
    K: np.ndarray = field(repr=False)

    @cached_property
    def inverse(self) -> np.ndarray:
        return invert_K_direct(self)

    @cached_property
    def det(self) -> complex:
        return complex(np.linalg.det(self.K))

    def log_abs_det(self) -> float:
        return float(np.linalg.slogdet(self.K)[1])

    def widx(self, v) -> int:
        return int(white_index(self.n, v[0], v[1]))

    def bidx(self, v) -> int:
        return int(black_index(self.n, v[0], v[1]))

    def kinv(self, w, bl) -> complex:
        """K^{-1}(w, b) for a white and a black vertex."""
        return complex(self.inverse[self.widx(w), self.bidx(bl)])

    def k(self, bl, w) -> complex:
        return complex(self.K[self.bidx(bl), self.widx(w)])


def build_K(n: int, a: float, b: float = 1.0) -> KasteleynSystem:
    check_size(n)
    if a <= 0 or b <= 0:
        raise LatticeError("weights must be positive")
    blk = black_coords(n)
    K = np.zeros((len(blk), n * (n + 1)), dtype=complex)
    for i, (x, y) in enumerate(blk):
        for d in range(4):
            wx, wy = x + DIRS[d, 0], y + DIRS[d, 1]
            if in_diamond(n, wx, wy):
                K[i, white_index(n, wx, wy)] = k_entry(int(x), int(y), d, a, b)
    return KasteleynSystem(n, float(a), float(b), K)


def partition_function(n: int, a: float, b: float = 1.0) -> float:
    return float(np.exp(build_K(n, a, b).log_abs_det()))


def invert_K_direct(sys: KasteleynSystem) -> np.ndarray:
    """Dense inverse, indexed (white, black)."""
    if sys.n > 24:
        raise NumericError("dense inverse is limited to n <= 24")
    try:
        inv = np.linalg.inv(sys.K)
    except np.linalg.LinAlgError as exc:
        raise NumericError("Kasteleyn matrix is singular") from exc
    return inv


def _split(edge):
    p, q = edge
    p = (int(p[0]), int(p[1]))
    q = (int(q[0]), int(q[1]))
    return (q, p) if p[0] % 2 else (p, q)


def edge_probability(sys: KasteleynSystem, edges) -> float:
    """Probability that all listed edges are dimers.

    Each edge is a pair of vertices in either order.  Edges sharing a vertex
    give 0.
    """
    pairs = [_split(e) for e in edges]
    verts = [v for pr in pairs for v in pr]
    if len(set(verts)) < len(verts):
        return 0.0
    r = len(pairs)
    L = np.empty((r, r), dtype=complex)
    for i, (bi, wi) in enumerate(pairs):
        kb = sys.k(bi, wi)
        if kb == 0:
            raise LatticeError(f"{(bi, wi)} is not an edge")
        for j, (bj, wj) in enumerate(pairs):
            L[i, j] = kb * sys.kinv(wj, bi)
    val = np.linalg.det(L)
    return float(val.real)


def edge_probabilities(sys: KasteleynSystem) -> np.ndarray:
    """Single-edge probabilities as a (white, direction) table; NaN off-graph."""
    n = sys.n
    wht = white_coords(n)
    out = np.full((len(wht), 4), np.nan)
    inv = sys.inverse
    for d in range(4):
        bx = wht[:, 0] + DIRS[d, 0]
        by = wht[:, 1] + DIRS[d, 1]
        ok = in_diamond(n, bx, by)
        wi = np.nonzero(ok)[0]
        bi = black_index(n, bx[ok], by[ok])
        out[wi, d] = (sys.K[bi, wi] * inv[wi, bi]).real
    return out


def _crossing(f, g):
    """Edge separating adjacent faces f, g and the sign of white-on-left."""
    fx, fy = f
    dx, dy = g[0] - fx, g[1] - fy
    p = (fx + dx, fy)
    q = (fx, fy + dy)
    w, bl = (p, q) if p[0] % 2 else (q, p)
    mx, my = (p[0] + q[0]) / 2, (p[1] + q[1]) / 2
    # left of travel direction (dx, dy) is (-dy, dx)
    side = (w[0] - mx) * (-dy) + (w[1] - my) * dx
    return w, bl, 1 if side > 0 else -1


def south_face_path(n: int, f) -> list[tuple[int, int]]:
    """Faces from ``f`` straight down to the south boundary row."""
    x, y = int(f[0]), int(f[1])
    path = [(x, y)]
    while boundary_height(n, (x, y)) is None:
        x += -1 if x > 0 else 1
        y -= 1
        path.append((x, y))
    return path


def expected_height(sys: KasteleynSystem, f) -> float:
    """E h(f) by telescoping from the boundary along ``south_face_path``."""
    n = sys.n
    path = south_face_path(n, f)[::-1]
    h = float(boundary_height(n, path[0]))
    probs = edge_probabilities(sys)
    for g0, g1 in zip(path, path[1:]):
        w, bl, sgn = _crossing(g0, g1)
        d = _dir_code(bl[0] - w[0], bl[1] - w[1])
        p = probs[int(white_index(n, w[0], w[1])), d]
        h += sgn * (1.0 - 4.0 * p)
    return h


def height_difference_sum(sys: KasteleynSystem, k: int, ell: int) -> float:
    """E h(-n+2k+2l, -n+2l) - E h(-n+2k, -n) as a sum of diagonal edge terms."""
    n = sys.n
    total = 0.0
    for s in range(ell):
        for eps in (0, 1):
            w = (-n + 2 * k + 2 * s + 1, -n + 2 * s + 2 * eps)
            bl = (-n + 2 * k + 2 * s + 2 * eps, -n + 2 * s + 1)
            p = edge_probability(sys, [(w, bl)])
            total += (-1) ** eps * (p - 0.25)
    return 4.0 * total


_DIR_LOOKUP = {(int(dx), int(dy)): c for c, (dx, dy) in enumerate(DIRS)}


def _dir_code(dx: int, dy: int) -> int:
    return _DIR_LOOKUP[(int(dx), int(dy))]


# --- special functions ------------------------------------------------------------


class DomainError(ValueError):
    pass


def c_const(a: float) -> float:
    return a / (1.0 + a * a)


def _log_upper(z):
    """Logarithm with argument in (-pi/2, 3pi/2]."""
    z = np.asarray(z, dtype=complex)
    ang = np.angle(z)
    ang = np.where(ang <= -np.pi / 2, ang + 2 * np.pi, ang)
    return np.log(np.abs(z)) + 1j * ang


def _on_cut(w, a: float):
    w = np.asarray(w, dtype=complex)
    r = np.sqrt(2 * c_const(a))
    return (np.abs(w.real) < 1e-14) & (np.abs(w.imag) <= r)


def sqrt_branch(w, a: float):
    """sqrt(w^2 + 2c) with the cut on i[-sqrt(2c), sqrt(2c)]."""
    if np.any(_on_cut(w, a)):
        raise DomainError("evaluation on the branch cut")
    r = np.sqrt(2 * c_const(a))
    w = np.asarray(w, dtype=complex)
    out = np.exp(0.5 * _log_upper(w + 1j * r) + 0.5 * _log_upper(w - 1j * r))
    return out if out.ndim else complex(out)


def G_func(w, a: float):
    r = np.sqrt(2 * c_const(a))
    out = (np.asarray(w, dtype=complex) - sqrt_branch(w, a)) / r
    return out if np.ndim(out) else complex(out)


def F_s(w, s: int, a: float, method: str = "trapezoid", nodes: int = 512):
    """(1/2 pi i) of u^s / (1 + a^2 + a w (u + 1/u)) du/u over the unit circle.

    ``method="residue"`` uses the inner pole of the denominator instead of
    quadrature; both agree wherever the unit circle is pole-free.
    """
    w = np.asarray(w, dtype=complex)
    A = 1.0 + a * a
    lim = A / (2 * a)
    bad = (np.abs(w.imag) < 1e-14) & (np.abs(w.real) >= lim)
    if np.any(bad):
        raise NumericError(
            f"pole on the unit circle for real |w| >= {lim:.6g}; move w off the real axis"
        )
    if method == "residue":
        B = 2 * a * w
        R = np.sqrt(A * A - B * B)
        rho = -B / (A + R)
        out = rho ** abs(int(s)) / R
    elif method == "trapezoid":
        wf = w.reshape(-1, 1)

        def quad(M):
            u = np.exp(2j * np.pi * np.arange(M) / M)
            return (u**s / (A + a * wf * (u + 1 / u))).mean(axis=1)

        M = nodes
        prev = quad(M)
        while True:
            M *= 2
            cur = quad(M)
            if np.max(np.abs(cur - prev), initial=0.0) < 1e-14:
                break
            if M >= 1 << 16:
                raise NumericError("F_s quadrature stalled; pole too close to the unit circle")
            prev = cur
        out = cur.reshape(w.shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out if out.ndim else complex(out)


def F_s_closed(omega, s: int, a: float):
    """Closed form of F_s at w = i omega / sqrt(2c)."""
    om = np.asarray(omega, dtype=complex)
    k = abs(int(s))
    out = (1j**k) * G_func(1 / om, a) ** k / ((1 + a * a) * om * sqrt_branch(1 / om, a))
    return out if np.ndim(out) else complex(out)


def s_func(u, a: float):
    """sqrt(1 + c^2 (u - 1/u)^2), principal branch."""
    c = c_const(a)
    u = np.asarray(u, dtype=complex)
    out = np.sqrt(1 + c * c * (u - 1 / u) ** 2)
    return out if out.ndim else complex(out)


def mu_func(u, a: float):
    return 1 - s_func(u, a)


def c_tilde(u1, u2, a: float):
    return 2 * (1 + a * a) + a * (u1 + 1 / u1) * (u2 + 1 / u2)


def _nu(u):
    return (u + 1 / u) / 2


# --- the Y rational functions --------------------------------------------------------


def _f_ab(a, b, u, v):
    p = 2 * a * a * u * v + 2 * b * b * u * v
    q = a * b * (u * u - 1) * (v * v - 1)
    return (p - q) * (p + q)


def _y00(i: int, j: int, a, b, u, v):
    f = _f_ab(a, b, u, v)
    u2, v2 = u * u, v * v
    if (i, j) == (0, 0):
        num = (
            2 * a**7 * u2 * v2
            - a**5 * b**2 * (1 + u2 * u2 + u2 * v2 - u2 * u2 * v2 + v2 * v2 - u2 * v2 * v2)
            - a**3
            * b**4
            * (1 + 3 * u2 + 3 * v2 + 2 * u2 * v2 + u2 * u2 * v2 + u2 * v2 * v2 - u2 * u2 * v2 * v2)
            - a * b**6 * (1 + v2 + u2 + 3 * u2 * v2)
        )
        return num / (4 * (a * a + b * b) ** 2 * f)
    if (i, j) == (0, 1):
        return (
            a * (b * b + a * a * u2) * (2 * a * a * v2 + b * b * (1 + v2 - u2 + u2 * v2))
        ) / (4 * (a * a + b * b) * f)
    if (i, j) == (1, 0):
        return (
            a * (b * b + a * a * v2) * (2 * a * a * u2 + b * b * (1 - v2 + u2 + u2 * v2))
        ) / (4 * (a * a + b * b) * f)
    return a * (2 * a * a * u2 * v2 + b * b * (-1 + v2 + u2 + u2 * v2)) / (4 * f)


def y_rational(e1: int, e2: int, i: int, j: int, u, v, a: float, b: float = 1.0):
    """The rational building blocks; the three other index pairs reduce to (0, 0)."""
    if (e1, e2) == (0, 0):
        return _y00(i, j, a, b, u, v)
    if (e1, e2) == (0, 1):
        return _y00(i, j, b, a, u, 1 / v) / v**2
    if (e1, e2) == (1, 0):
        return _y00(i, j, b, a, 1 / u, v) / u**2
    return _y00(i, j, a, b, 1 / u, 1 / v) / (u**2 * v**2)


def Y_func(e1: int, e2: int, g1: int, g2: int, u1, u2, a: float):
    u1 = np.asarray(u1, dtype=complex)
    u2 = np.asarray(u2, dtype=complex)
    sign = (-1) ** (e1 * e2 + g1 * (1 + e2) + g2 * (1 + e1))
    val = (
        (1 + a * a) ** 2
        * sign
        * s_func(-1j * u1, a) ** g1
        * s_func(-1j * u2, a) ** g2
        * y_rational(e1, e2, g1, g2, -1j * u1, -1j * u2, a)
        * u1**e1
        * u2**e2
    )
    return val if np.ndim(val) else complex(val)


def inversion_blocks(a: float, u1, u2) -> tuple:
    """Coefficients of 1, s1 s2, s1, s2 in the paired integrand, where
    s_j = s(-i u_j) and s_j^2 is reduced to 1 - c^2 (u_j + 1/u_j)^2.

    The integrand pairs the (0,0) and (1,1) Y sums through the ratio
    F_{t+1}/F_t = -(1 - s)/(c (u + 1/u)); each coefficient should be
    unchanged by a -> 1/a.
    """
    u1 = np.asarray(u1, dtype=complex)
    u2 = np.asarray(u2, dtype=complex)
    c = c_const(a)
    p1, p2 = u1 + 1 / u1, u2 + 1 / u2
    q = (1 - c * c * p1 * p1, 1 - c * c * p2 * p2)
    uu = u1 * u2
    z1, z2 = -1j * u1, -1j * u2
    coef = {}

    def add(i, j, v):
        f = q[0] ** (i // 2) * q[1] ** (j // 2)
        key = (i % 2, j % 2)
        coef[key] = coef.get(key, 0) + f * v

    for g1 in (0, 1):
        for g2 in (0, 1):
            add(g1, g2, c * c * p1 * p2 * (-1) ** (g1 + g2) * y_rational(0, 0, g1, g2, z1, z2, a))
            y11 = y_rational(1, 1, g1, g2, z1, z2, a)
            for i in (0, 1):
                for j in (0, 1):
                    add(g1 + i, g2 + j, -uu * (-1) ** (i + j) * y11)
    return tuple(a * coef[k] for k in ((0, 0), (1, 1), (1, 0), (0, 1)))


def F_ratio(u, a: float):
    """F_{t+1}(nu(u)) / F_t(nu(u)) for t >= 0, in terms of s(-iu)."""
    u = np.asarray(u, dtype=complex)
    return -(1 - s_func(-1j * u, a)) / (c_const(a) * (u + 1 / u))


# --- contour integrals ---------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    """Periodic trapezoid on a circle; nodes are doubled until two successive
    values agree to ``tol``."""

    nodes: int = 256
    radius: float = 1.0
    tol: float = 1e-10
    max_nodes: int = 8192

    def __post_init__(self):
        if self.nodes < 4 or self.radius <= 0:
            raise ValueError("bad quadrature spec")


def _circle(M: int, r: float) -> np.ndarray:
    return r * np.exp(2j * np.pi * (np.arange(M) + 0.5) / M)


def _converge(fn, quad: QuadratureSpec):
    M = quad.nodes
    prev = fn(M)
    while M < quad.max_nodes:
        M *= 2
        cur = fn(M)
        if np.max(np.abs(np.asarray(cur) - np.asarray(prev))) < quad.tol:
            return cur
        prev = cur
    raise NumericError(f"quadrature did not settle below {quad.tol} with {M} nodes")


def _eps_white(v) -> int:
    return 0 if (int(v[0]) + int(v[1])) % 4 == 1 else 1


_eps_black = _eps_white


def _h(e1: int, e2: int) -> int:
    return e1 * (1 - e2) + e2 * (1 - e1)


def _gauge(ex: int, ey: int) -> complex:
    # the contour formulas invert a Kasteleyn matrix that differs from build_K
    # by the vertex gauge -i (-1)^(ex + ey); undo it
    return 1j * (-1) ** (ex + ey)


def _fullplane_raw(a: float, x, y, M: int) -> complex:
    ex, ey = _eps_white(x), _eps_black(y)
    h = _h(ex, ey)
    u = _circle(M, 1.0)
    U1, U2 = u[:, None], u[None, :]
    p1 = (int(x[0]) - int(y[0]) + 1) // 2
    p2 = (int(x[1]) - int(y[1]) + 1) // 2
    num = a**ey * U2 ** (1 - h) + a ** (1 - ey) * U1 * U2**h
    val = (num / (c_tilde(U1, U2, a) * U1**p1 * U2**p2)).mean()
    return complex(-(1j ** (1 + h)) * val)


def fullplane_kernel(x, y, a: float, quad: QuadratureSpec | None = None) -> complex:
    """Smooth-phase inverse Kasteleyn entry for white x and black y, in the
    gauge of ``build_K`` (so K(b, w) times this sums to 1 around w)."""
    quad = quad or QuadratureSpec(nodes=64)
    raw = _converge(lambda M: _fullplane_raw(a, x, y, M), quad)
    return raw * _gauge(_eps_white(x), _eps_black(y))


def fullplane_edge_probability(w, d: int, a: float, quad: QuadratureSpec | None = None) -> float:
    """Smooth-phase probability of the edge from white w in direction d."""
    bx, by = int(w[0]) + int(DIRS[d, 0]), int(w[1]) + int(DIRS[d, 1])
    kval = k_entry(bx, by, (d + 2) % 4, a)
    return float((kval * fullplane_kernel(w, (bx, by), a, quad)).real)



@lru_cache(maxsize=64)
def _b_grid(e1: int, e2: int, a: float, m: int, M: int, r: float):
    c = c_const(a)
    u = _circle(M, r)
    U1, U2 = u[:, None], u[None, :]
    s1, s2 = s_func(-1j * U1, a), s_func(-1j * U2, a)
    power = (U1**2 * U2**2 * (1 + s1) ** 2 * (1 + s2) ** 2 / (4 * c * c)) ** m
    ysum = sum(Y_func(e1, e2, g1, g2, U1, U2, a) for g1 in (0, 1) for g2 in (0, 1))
    A = 1 + a * a
    nu = _nu(u)
    R = np.sqrt(A * A - (2 * a * nu) ** 2)
    rho = -2 * a * nu / (A + R)
    return u, power * ysum, rho, R


def _b_raw(e1, e2, a, x1, x2, y1, y2, m, M, r) -> complex:
    if x2 % 2 or y1 % 2 or (x1 - 1) % 2 or (y2 - 1) % 2:
        raise LatticeError("B coordinates have the wrong parities")
    u, core, rho, R = _b_grid(e1, e2, float(a), int(m), int(M), float(r))
    f1 = rho ** abs(x2 // 2) / R
    f2 = rho ** abs(y1 // 2) / R
    w1 = f1 / u ** ((x1 - 1) // 2)
    w2 = f2 / u ** ((y2 - 1) // 2)
    val = (w1[:, None] * core * w2[None, :]).mean()
    return complex(-(1j ** (e1 + e2 + 1)) * val)


def B_integral(
    e1: int, e2: int, a: float, x1: int, x2: int, y1: int, y2: int, m: int,
    quad: QuadratureSpec | None = None,
) -> complex:
    """Boundary correction integral over |u1| = |u2| = r with a < r < 1/a.

    Coordinates are the shifted ones (n + x1 etc.); ``m = n / 4``.
    """
    quad = quad or QuadratureSpec()
    lo, hi = min(a, 1 / a), max(a, 1 / a)
    if not lo < quad.radius < hi:
        raise DomainError(f"radius {quad.radius} outside ({lo:.4g}, {hi:.4g})")
    return _converge(lambda M: _b_raw(e1, e2, a, x1, x2, y1, y2, m, M, quad.radius), quad)


def K_inverse_formula(n: int, a: float, x, y, quad: QuadratureSpec | None = None) -> complex:
    """K^{-1}(x, y) for white x and black y from the contour-integral formula."""
    if n % 4:
        raise LatticeError("the contour formula needs n divisible by 4")
    if not (in_diamond(n, x[0], x[1]) and in_diamond(n, y[0], y[1])):
        raise LatticeError("vertices outside the diamond")
    if int(x[0]) % 2 == 0 or int(y[0]) % 2:
        raise LatticeError("expected a white then a black vertex")
    m = n // 4
    e1, e2 = _eps_white(x), _eps_black(y)
    x1, x2 = int(x[0]), int(x[1])
    y1, y2 = int(y[0]), int(y[1])
    fp = _converge(lambda M: _fullplane_raw(a, x, y, M), QuadratureSpec(nodes=64))
    t = B_integral(e1, e2, a, n + x1, n + x2, n + y1, n + y2, m, quad)
    t4 = B_integral(1 - e1, 1 - e2, a, n - x1, n - x2, n - y1, n - y2, m, quad)
    t2 = B_integral(1 - e1, e2, 1 / a, n - x1, n + x2, n - y1, n + y2, m, quad)
    t3 = B_integral(e1, 1 - e2, 1 / a, n + x1, n - x2, n + y1, n - y2, m, quad)
    corr = t - (1j / a) * (-1) ** (e1 + e2) * (t2 + t3) + t4
    return (fp - corr) * _gauge(e1, e2)
