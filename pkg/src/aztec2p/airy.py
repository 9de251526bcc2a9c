"""Extended Airy kernel, the GUE Tracy-Widom law, and a KS harness for top paths.

Airy function values come from ``scipy.special.airy``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats
from scipy.special import airy

from .kasteleyn import NumericError


@dataclass(frozen=True)
class AiryKernelSpec:
    """Quadrature settings.

    ``panel_nodes`` Gauss-Legendre nodes per unit panel of the lambda
    integral, extended until the integrand drops below ``tail``.
    ``nystrom_nodes`` and ``span`` set the Fredholm grid on [s, s + span].
    """

    panel_nodes: int = 16
    tail: float = 1e-12
    max_cutoff: float = 400.0
    nystrom_nodes: int = 64
    span: float = 16.0
    stable_tol: float = 1e-5


@lru_cache(maxsize=None)
def _gl(m: int):
    return np.polynomial.legendre.leggauss(m)


def ai(x):
    return airy(x)[0]


def stationary_kernel(x, y):
    """(Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y), with the diagonal limit Ai'^2 - x Ai^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ax, apx, _, _ = airy(x)
    ay, apy, _, _ = airy(y)
    d = x - y
    same = np.abs(d) < 1e-10
    with np.errstate(divide="ignore", invalid="ignore"):
        off = (ax * apy - apx * ay) / d
    diag = apx**2 - x * ax**2
    return np.where(same, diag, off)


def _phi(t1, z1, t2, z2):
    if not t1 < t2:
        return 0.0
    dt = t2 - t1
    return math.exp(-((z1 - z2) ** 2) / (4 * dt) - dt * (z1 + z2) / 2 + dt**3 / 12) / math.sqrt(
        4 * math.pi * dt
    )


def _lambda_integral(t1, z1, t2, z2, spec: AiryKernelSpec) -> float:
    x, w = _gl(spec.panel_nodes)
    x = (x + 1) / 2
    w = w / 2
    total = 0.0
    lo = 0.0
    # the integrand only starts its superexponential decay once both
    # arguments are positive
    start_decay = max(0.0, -z1, -z2)
    while True:
        lam = lo + x
        vals = np.exp(-lam * (t1 - t2)) * ai(z1 + lam) * ai(z2 + lam)
        total += float(np.dot(w, vals))
        lo += 1.0
        edge = math.exp(-lo * (t1 - t2)) * abs(ai(z1 + lo) * ai(z2 + lo))
        if lo > start_decay and edge < spec.tail * max(1.0, abs(total)):
            return total
        if lo > spec.max_cutoff:
            raise NumericError("lambda integral tail did not converge")


def airy_kernel(t1, z1, t2, z2, spec: AiryKernelSpec | None = None) -> float:
    """The extended Airy kernel: the lambda integral of Airy products minus the heat term."""
    spec = spec or AiryKernelSpec()
    return _lambda_integral(float(t1), float(z1), float(t2), float(z2), spec) - _phi(
        float(t1), float(z1), float(t2), float(z2)
    )


def _nystrom_det(s: float, m: int, span: float, kernel) -> float:
    x, w = _gl(m)
    pts = s + (x + 1) * span / 2
    wt = w * span / 2
    sw = np.sqrt(wt)
    K = kernel(pts[:, None], pts[None, :])
    return float(np.linalg.det(np.eye(m) - sw[:, None] * K * sw[None, :]))


def _span_for(s: float, spec: AiryKernelSpec) -> float:
    # the upper end sits where Ai is negligible regardless of s
    return max(spec.span, spec.span - s)


def fredholm_gap(s: float, spec: AiryKernelSpec | None = None, kernel=None) -> float:
    """det(I - K) on L^2(s, inf), the GUE Tracy-Widom distribution function.

    Checked against the same computation at twice the node count; a
    disagreement beyond ``stable_tol`` raises ``NumericError``.
    """
    spec = spec or AiryKernelSpec()
    kernel = kernel or stationary_kernel
    span = _span_for(float(s), spec)
    d1 = _nystrom_det(float(s), spec.nystrom_nodes, span, kernel)
    d2 = _nystrom_det(float(s), 2 * spec.nystrom_nodes, span, kernel)
    if abs(d1 - d2) > spec.stable_tol:
        raise NumericError(f"Fredholm determinant unstable under grid doubling at s={s}")
    return min(1.0, max(0.0, d2))


class TracyWidom2:
    """Tabulated F2 with linear interpolation, for CDF and inverse-CDF use."""

    def __init__(self, lo: float = -9.0, hi: float = 5.0, step: float = 0.02, spec=None):
        self.grid = np.arange(lo, hi + step / 2, step)
        vals = np.array([fredholm_gap(s, spec) for s in self.grid])
        self.values = np.maximum.accumulate(vals)

    def cdf(self, s):
        return np.interp(s, self.grid, self.values, left=0.0, right=1.0)

    def ppf(self, u):
        return np.interp(u, self.values, self.grid)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return self.ppf(rng.random(count))

    def moments(self) -> tuple[float, float]:
        dens = np.gradient(self.values, self.grid)
        mean = np.trapezoid(self.grid * dens, self.grid)
        var = np.trapezoid((self.grid - mean) ** 2 * dens, self.grid)
        return float(mean), float(var)


@lru_cache(maxsize=1)
def tw2_table() -> TracyWidom2:
    return TracyWidom2()


@dataclass(frozen=True)
class KSReport:
    statistic: float
    pvalue: float
    count: int
    band: float = 0.25

    @property
    def accepted(self) -> bool:
        return self.statistic < self.band


def top_path_test(samples, band: float = 0.25) -> KSReport:
    """KS distance between samples of A_1^{n,+}(0) and F2."""
    x = np.asarray(samples, dtype=float)
    if len(x) < 100:
        raise ValueError("need at least 100 samples")
    res = stats.kstest(x, tw2_table().cdf)
    return KSReport(float(res.statistic), float(res.pvalue), len(x), band)


def ks_trend(samples_by_n: dict, batches: int = 5) -> dict:
    """Median KS over ``batches`` equal splits of each sample set."""
    table = tw2_table()
    out = {}
    for n, xs in sorted(samples_by_n.items()):
        parts = np.array_split(np.asarray(xs, dtype=float), batches)
        ks = [stats.kstest(p, table.cdf).statistic for p in parts]
        out[n] = float(np.median(ks))
    return out


def is_monotone_decreasing(trend: dict) -> bool:
    vals = [trend[k] for k in sorted(trend)]
    return all(b < a for a, b in zip(vals, vals[1:]))


__all__ = [
    "AiryKernelSpec",
    "KSReport",
    "TracyWidom2",
    "airy_kernel",
    "fredholm_gap",
    "is_monotone_decreasing",
    "ks_trend",
    "stationary_kernel",
    "top_path_test",
    "tw2_table",
]
