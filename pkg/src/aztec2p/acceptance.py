"""The acceptance checks, one function per criterion.

Each check returns a ``CriterionResult``; ``run`` collects them.  The CLI's
``verify`` command and the test suite both call into this module.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .heights import height_field
from .kasteleyn import (
    QuadratureSpec,
    K_inverse_formula,
    _eps_black,
    _eps_white,
    build_K,
    edge_probabilities,
    expected_height,
    fullplane_edge_probability,
    height_difference_sum,
)
from .lattice import Direction, black_coords, white_coords
from .sampler import enumerate_tilings, sample_batch, sample_many
from .temperley import (
    dual_forest,
    inverse_temperley,
    north_forest,
    reconstruct_height,
    south_forest,
    validate_dcf,
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict, repr=False)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(number: int, name: str):
    def wrap(fn):
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            passed, detail, data = fn(*args, **kwargs)
            return CriterionResult(number, name, bool(passed), detail, time.perf_counter() - t0, data)

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


# --- 1-3: exhaustive and bijective -------------------------------------------------


def _enumeration_edge_freq(en) -> np.ndarray:
    p = en.probabilities
    out = np.zeros((en.dirs.shape[1], 4))
    for d in range(4):
        out[:, d] = p @ (en.dirs == d)
    return out


@_timed(1, "exhaustive oracle n=4")
def criterion_1(a_values=(0.3, 0.5, 1.0)):
    notes, ok = [], True
    for a in a_values:
        en = enumerate_tilings(4, a)
        K = build_K(4, a)
        z = abs(K.det)
        rel = abs(en.weights.sum() - z) / z
        probs = edge_probabilities(K)
        freq = _enumeration_edge_freq(en)
        mask = ~np.isnan(probs)
        err = float(np.max(np.abs(probs[mask] - freq[mask])))
        good = len(en) == 1024 and rel < 1e-10 and err < 1e-10 and np.all(freq[~mask] == 0)
        ok &= good
        notes.append(f"a={a}: count={len(en)} relZ={rel:.1e} edge={err:.1e}")
    return ok, "; ".join(notes), {}


def _tv_noise_floor(p: np.ndarray, N: int, reps: int, rng) -> float:
    tv = [0.5 * np.abs(rng.multinomial(N, p) / N - p).sum() for _ in range(reps)]
    return float(np.mean(tv))


@_timed(2, "sampler exactness n=4")
def criterion_2(N: int = 200_000, a: float = 0.5, seed: int = 20240):
    en = enumerate_tilings(4, a)
    idx = en.index()
    batch = sample_batch(4, a, N, seed=seed)
    keys = np.ascontiguousarray(batch.astype(np.int8))
    counts = np.zeros(len(en))
    view = keys.view(np.dtype((np.void, keys.shape[1])))[:, 0]
    uniq, cnt = np.unique(view, return_counts=True)
    for u, c in zip(uniq, cnt):
        counts[idx[u.tobytes()]] = c
    p = en.probabilities
    chi = stats.chisquare(counts, N * p)
    tv = 0.5 * np.abs(counts / N - p).sum()
    floor = _tv_noise_floor(p, N, 50, np.random.default_rng(seed))
    passed = chi.pvalue > 1e-4 and tv <= 0.01
    detail = f"chi2 p={chi.pvalue:.3g} (>1e-4), TV={tv:.4f} (<=0.01; multinomial noise floor {floor:.4f})"
    return passed, detail, {"pvalue": chi.pvalue, "tv": tv, "floor": floor}


def _round_trip(d) -> bool:
    for f in (south_forest(d), north_forest(d)):
        if not validate_dcf(f):
            return False
        g = dual_forest(f)
        if not validate_dcf(g) or g.direction == f.direction:
            return False
        if dual_forest(g).edge_set() != f.edge_set():
            return False
        if inverse_temperley(f) != d or inverse_temperley(g) != d:
            return False
    return True


@_timed(3, "Temperley bijection")
def criterion_3(count: int = 1000, seed: int = 3):
    en = enumerate_tilings(4, 0.5)
    small = sum(_round_trip(d) for d, _ in en)
    big = sum(_round_trip(d) for d in sample_many(32, 0.5, count, seed=seed))
    passed = small == len(en) == 1024 and big == count
    return passed, f"n=4: {small}/{len(en)}, n=32: {big}/{count}", {}


# --- 4-7: heights and exact kernels ------------------------------------------------


@_timed(4, "height-winding reconstruction")
def criterion_4(count: int = 1000, seed: int = 4):
    good = sum(
        reconstruct_height(south_forest(d)) == height_field(d)
        for d in sample_many(32, 0.5, count, seed=seed)
    )
    return good == count, f"{good}/{count} exact at n=32", {}


SYMMETRY_FACES = ((2, 0), (0, 2), (2, 2), (4, 0), (2, -2))


@_timed(5, "expected-height symmetry")
def criterion_5(a: float = 0.5, faces=SYMMETRY_FACES):
    worst, notes = 0.0, []
    for n in (4, 8):
        K = build_K(n, a)
        e0 = abs(expected_height(K, (0, 0)))
        worst = max(worst, e0)
        for i, j in faces:
            diff = abs(expected_height(K, (i, j)) + expected_height(K, (-i, j)))
            worst = max(worst, diff)
            if diff > 1e-8:
                notes.append(f"n={n} ({i},{j}): |E+E'|={diff:.3g}")
    passed = worst <= 1e-8
    detail = f"max deviation {worst:.3g}" + ("; " + ", ".join(notes) if notes else "")
    return passed, detail, {}


def formula_entries(n: int, per_class: int = 3):
    """White/black pairs near the centre, ``per_class`` for each parity pair."""
    W = white_coords(n)
    B = black_coords(n)
    W = W[np.argsort(np.abs(W).sum(axis=1), kind="stable")]
    B = B[np.argsort(np.abs(B).sum(axis=1), kind="stable")]
    out = []
    for e1 in (0, 1):
        for e2 in (0, 1):
            ws = [tuple(map(int, w)) for w in W if _eps_white(w) == e1][: per_class + 1]
            bs = [tuple(map(int, b)) for b in B if _eps_black(b) == e2][: per_class + 1]
            pairs = [(ws[k], bs[(k + 1) % len(bs)]) for k in range(per_class)]
            out.extend(pairs)
    return out


@_timed(6, "explicit inverse formula n=8")
def criterion_6(n: int = 8, a: float = 0.5):
    K = build_K(n, a)
    entries = formula_entries(n)
    err = drift = 0.0
    for x, y in entries:
        v1 = K_inverse_formula(n, a, x, y, QuadratureSpec(nodes=128))
        v2 = K_inverse_formula(n, a, x, y, QuadratureSpec(nodes=256))
        err = max(err, abs(v1 - K.kinv(x, y)))
        drift = max(drift, abs(v1 - v2))
    classes = {(_eps_white(x), _eps_black(y)) for x, y in entries}
    passed = err < 1e-6 and drift < 1e-8 and len(classes) == 4 and len(entries) >= 10
    return passed, f"{len(entries)} entries, 4 parity classes, max|formula-dense|={err:.2e}, doubling drift={drift:.2e}", {}


DIFFERENCE_KL = ((1, 2), (2, 3), (3, 1))


@_timed(7, "a -> 1/a invariance n=8")
def criterion_7(n: int = 8, a: float = 0.5, pairs=DIFFERENCE_KL):
    Ka, Kr = build_K(n, a), build_K(n, 1 / a)
    notes, worst = [], 0.0
    for k, ell in pairs:
        u, v = height_difference_sum(Ka, k, ell), height_difference_sum(Kr, k, ell)
        worst = max(worst, abs(u - v))
        notes.append(f"(k,l)=({k},{ell}): {u:.6g} vs {v:.6g}")
    return worst <= 1e-8, "; ".join(notes), {}


# --- 8-10: Monte Carlo at moderate n -------------------------------------------------


@_timed(8, "height matching n=128")
def criterion_8(count: int = 200, seed: int = 8):
    from .scaling import height_match_frequency

    freq = height_match_frequency(128, 0.5, count, seed=seed)
    return freq >= 0.90, f"frequency {freq:.3f} over {count} samples (>=0.90)", {"freq": freq}


def _window_fractions(batch: np.ndarray, n: int, half: int):
    """Per-sample direction fractions at S and N white vertices of the window."""
    W = white_coords(n)
    inwin = (np.abs(W[:, 0]) <= half) & (np.abs(W[:, 1]) <= half)
    out = {}
    for cls, res in (("S", 1), ("N", 3)):
        sel = inwin & ((W[:, 0] + W[:, 1]) % 4 == res)
        sub = batch[:, sel]
        out[cls] = np.stack([(sub == d).mean(axis=1) for d in range(4)], axis=1)
    return out


SMOOTH_SITES = {"S": (1, 0), "N": (1, 2)}


@_timed(9, "smooth-phase consistency")
def criterion_9(walks: int = 100_000, aztec: int = 2000, half: int = 8, a: float = 0.5, seed: int = 9):
    from .wilson import smooth_first_step_law

    exact = {c: np.array([fullplane_edge_probability(v, d, a) for d in range(4)]) for c, v in SMOOTH_SITES.items()}
    # walk streams start after the ones the Aztec batch uses
    wil = {
        c: smooth_first_step_law(a, walks, seed=(seed, aztec + k), direction=Direction(c))
        for k, c in enumerate(("S", "N"))
    }
    z_wilson = max(
        float(np.max(np.abs(wil[c] - exact[c]) / np.sqrt(exact[c] * (1 - exact[c]) / walks))) for c in exact
    )
    batch = sample_batch(128, a, aztec, seed=seed)
    fr = _window_fractions(batch, 128, half)
    z_exact = z_cross = 0.0
    for c in exact:
        m = fr[c].mean(axis=0)
        se = fr[c].std(axis=0, ddof=1) / math.sqrt(aztec)
        z_exact = max(z_exact, float(np.max(np.abs(m - exact[c]) / se)))
        sw = np.sqrt(wil[c] * (1 - wil[c]) / walks)
        z_cross = max(z_cross, float(np.max(np.abs(m - wil[c]) / np.hypot(se, sw))))
    passed = z_wilson <= 3 and z_exact <= 3 and z_cross <= 3
    detail = (
        f"Wilson vs kernel max z={z_wilson:.2f}; n=128 window vs kernel max z={z_exact:.2f}; "
        f"window vs Wilson max z={z_cross:.2f} (all <=3)"
    )
    return passed, detail, {"exact": exact, "wilson": wil}


@_timed(10, "backtrack band n=256")
def criterion_10(runs: int = 100, seed: int = 10):
    from .scaling import backtrack_runs

    br = backtrack_runs(256, 0.5, runs, kmax=3, seed=seed)
    frac = br.within()
    passed = bool(np.all(frac >= 0.95))
    worst = np.max(np.where(np.isfinite(br.stats), br.stats, -np.inf), axis=0)
    detail = "within-bound fraction per k=0..3: " + ", ".join(f"{f:.2f}" for f in frac)
    detail += "; max stat " + ", ".join(f"{w:g}/{b:.0f}" for w, b in zip(worst, br.bounds))
    return passed, detail, {}


# --- 11: Airy numerics ---------------------------------------------------------------

F2_FIXTURE = Path(__file__).with_name("data") / "f2_oracle.json"


def f2_oracle() -> dict:
    import json

    return json.loads(F2_FIXTURE.read_text())


@_timed(11, "Airy numerics and top-path KS")
def criterion_11(count: int = 200, sizes=(128, 256, 512), seed: int = 11):
    from .airy import AiryKernelSpec, airy_kernel, fredholm_gap, ks_trend, stationary_kernel, top_path_test
    from .scaling import top_path_samples

    fine = AiryKernelSpec(panel_nodes=64)
    zs = np.linspace(-6, 4, 11)
    kern = max(abs(airy_kernel(0, z, 0, z) - airy_kernel(0, z, 0, z, fine)) for z in zs)
    closed = max(abs(airy_kernel(0, z, 0, z) - float(stationary_kernel(z, z))) for z in zs)
    oracle = f2_oracle()
    f2 = max(abs(fredholm_gap(s) - v) for s, v in zip(oracle["s"], oracle["F2"]))
    # disjoint stream blocks keep the sizes independent
    samples = {n: top_path_samples(n, 0.5, count, seed=(seed, k * count)) for k, n in enumerate(sizes)}
    ks = top_path_test(samples[max(sizes)])
    trend = ks_trend(samples)
    vals = [trend[n] for n in sorted(trend)]
    monotone = all(b < a for a, b in zip(vals, vals[1:]))
    passed = kern < 1e-8 and closed < 1e-8 and f2 < 1e-4 and ks.accepted and monotone
    detail = (
        f"kernel diag vs 4x quadrature {kern:.1e}, vs closed form {closed:.1e}; F2 vs oracle {f2:.1e}; "
        f"KS(n={max(sizes)}, N={count})={ks.statistic:.3f} (<0.25); median batch KS "
        + " > ".join(f"{trend[n]:.3f}@{n}" for n in sorted(trend))
        + (" monotone" if monotone else " not monotone")
    )
    return passed, detail, {"samples": samples, "trend": trend}


# --- 12: determinism -----------------------------------------------------------------


DETERMINISM_RUNS = (
    ["sample", "--n", "16", "--a", "0.5", "--seed", "7", "--out", "{d}/t.json"],
    ["sample", "--n", "16", "--a", "0.5", "--seed", "7", "--out", "{d}/t.npz"],
    ["render", "{d}/t.json", "--out", "{d}/t.svg", "--forests", "--backbone", "--region", "RS_n"],
    ["forest", "{d}/t.json", "--direction", "S", "--out", "{d}/f.json"],
    ["kernel", "--n", "8", "--a", "0.5", "--method", "both", "--entries", "4"],
    ["stats", "--check", "heightmatch", "--n", "16", "--a", "0.5", "--samples", "5", "--seed", "2", "--out", "{d}/h.csv"],
    ["stats", "--check", "airy", "--n", "32", "--a", "0.5", "--samples", "4", "--seed", "2", "--out", "{d}/a.csv"],
    ["stats", "--check", "backtrack", "--n", "32", "--a", "0.5", "--samples", "4", "--seed", "2"],
    ["stats", "--check", "onion", "--n", "32", "--a", "0.5", "--samples", "3", "--seed", "2"],
    ["airy", "--s", "-2", "--s", "0", "--out", "{d}/f2.csv"],
)


@_timed(12, "CLI determinism")
def criterion_12(runs=DETERMINISM_RUNS):
    from click.testing import CliRunner

    from .cli import main, replay_manifest

    bad = []
    with tempfile.TemporaryDirectory() as d:
        runner = CliRunner()
        for k, argv in enumerate(runs):
            argv = [s.format(d=d) for s in argv]
            man = f"{d}/run{k}.manifest.json"
            res = runner.invoke(main, ["--manifest", man, *argv])
            if res.exit_code != 0:
                bad.append(f"{argv[0]} exited {res.exit_code}: {res.output.strip()[-200:]}")
                continue
            ok, why = replay_manifest(man)
            if not ok:
                bad.append(f"{' '.join(argv[:3])}: {why}")
    passed = not bad
    detail = f"{len(runs) - len(bad)}/{len(runs)} runs replayed bit-identically"
    if bad:
        detail += "; " + "; ".join(bad)
    return passed, detail, {}


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
}


@_timed(0, "quick n=4 suite")
def quick_suite():
    """Exhaustive n=4 checks: oracle, bijection and the height identities."""
    parts = [criterion_1()]
    en = enumerate_tilings(4, 0.5)
    trips = sum(_round_trip(d) for d, _ in en)
    recon = sum(reconstruct_height(south_forest(d)) == height_field(d) for d, _ in en)
    K = build_K(4, 0.5)
    sym = max(abs(expected_height(K, (i, j)) + expected_height(K, (-i, j))) for i, j in SYMMETRY_FACES)
    passed = parts[0].passed and trips == recon == 1024 and sym <= 1e-8
    detail = f"{parts[0].detail}; round trips {trips}/1024; height reconstruction {recon}/1024; symmetry max {sym:.3g}"
    return passed, detail, {}


def run(numbers=None, quick: bool = False, echo=print) -> list[CriterionResult]:
    if quick:
        res = [quick_suite()]
    else:
        res = []
        for k in numbers or sorted(CRITERIA):
            r = CRITERIA[k]()
            res.append(r)
            if echo:
                echo(r.line())
        return res
    if echo:
        for r in res:
            echo(r.line())
    return res
