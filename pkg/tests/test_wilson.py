import itertools
import math

import numpy as np
import pytest

from aztec2p.kasteleyn import build_K, edge_probabilities, fullplane_edge_probability
from aztec2p.lattice import DIRS, Direction, LatticeError, white_index
from aztec2p.sampler import ResourceError, sample, sample_many
from aztec2p.temperley import (
    OrientedForest,
    inverse_temperley,
    south_forest,
    temperley_graph,
    validate_dcf,
)
from aztec2p.wilson import (
    BiasedWalkParams,
    ParabolicRegion,
    SmoothWindow,
    backbone_forest,
    biased_walk,
    boustrophedon,
    complete_forest,
    fixed_vertices,
    loop_erase,
    parabola_event,
    sample_smooth_phase,
    smooth_first_step_law,
    smooth_height,
    wilson_forest,
)


def test_loop_erase_cases():
    assert loop_erase([(0, 0)]) == [(0, 0)]
    assert loop_erase([(0, 0), (2, 2), (0, 0), (2, -2)]) == [(0, 0), (2, -2)]
    walk = [(0, 0), (2, 2), (4, 0), (2, 2), (4, 4), (2, 2), (0, 4)]
    assert loop_erase(walk) == [(0, 0), (2, 2), (0, 4)]
    with pytest.raises(LatticeError):
        loop_erase([])


def test_loop_erased_walk_is_simple():
    w = biased_walk(BiasedWalkParams(Direction.S, 0.8), (1, 0), 400, seed=3)
    le = loop_erase(w)
    assert len(set(le)) == len(le)
    assert le[0] == (1, 0) and le[-1] == tuple(w[-1])
    assert all(abs(p[0] - q[0]) == 2 and abs(p[1] - q[1]) == 2 for p, q in zip(le, le[1:]))


def test_walk_drift():
    p = BiasedWalkParams(Direction.S, 0.5)
    assert p.drift() == pytest.approx((0.5 - 2) / 2.5)
    assert BiasedWalkParams(Direction.N, 0.5).drift() == pytest.approx(-p.drift())
    with pytest.raises(LatticeError):
        BiasedWalkParams(Direction.S, 0.0)


def _brute_conditional(g, fixed, a):
    """All completions of a fixed partial forest with their weights."""
    fixed_ids = set(fixed_vertices(fixed).tolist()) | {g.index[s] for s in g.sinks}
    free = [i for i in range(len(g.vertices)) if i not in fixed_ids]
    wts = BiasedWalkParams(g.direction, a).weights()
    choices = []
    for i in free:
        opts = []
        for d in range(4):
            u = g.neighbor(g.vertices[i], d)
            if u is not None:
                opts.append((g.index[u], wts[d]))
        choices.append(opts)
    law = {}
    for pick in itertools.product(*choices):
        par = fixed.parent.copy()
        for i, (j, _) in zip(free, pick):
            par[i] = j
        f = OrientedForest(g, par, a)
        if (f.roots() < 0).any():
            continue
        law[par.tobytes()] = math.prod(w for _, w in pick)
    tot = sum(law.values())
    return {k: v / tot for k, v in law.items()}


@pytest.mark.parametrize("reverse", [False, True])
def test_wilson_matches_brute_force(reverse):
    a = 0.5
    g = temperley_graph(Direction.S, 4)
    fixed = backbone_forest(south_forest(sample(4, a, seed=0)))
    law = _brute_conditional(g, fixed, a)
    order = boustrophedon(g.vertices)
    if reverse:
        order = order[::-1]
    N = 20000
    counts: dict = {}
    for k in range(N):
        f = wilson_forest(g, fixed, seed=(77, k), order=order, a=a)
        key = f.parent.tobytes()
        counts[key] = counts.get(key, 0) + 1
    assert set(counts) <= set(law)
    for key, p in law.items():
        se = math.sqrt(p * (1 - p) / N)
        assert abs(counts.get(key, 0) / N - p) <= 4 * se + 1e-12


def test_completion_keeps_backbone_and_is_dcf():
    for d in sample_many(16, 0.5, 5, seed=5):
        s = south_forest(d)
        c = complete_forest(s, seed=1)
        assert validate_dcf(c)
        bb = backbone_forest(s)
        vs = fixed_vertices(bb)
        has = bb.parent[vs] >= 0
        assert np.array_equal(c.parent[vs[has]], s.parent[vs[has]])


def test_completed_marginals_match_kernel():
    n, a, N = 8, 0.5, 1500
    probs = edge_probabilities(build_K(n, a))
    counts = np.zeros_like(probs)
    # the completion must not reuse the sampler's streams (88, k)
    for k, d in enumerate(sample_many(n, a, N, seed=88)):
        dd = inverse_temperley(complete_forest(south_forest(d), seed=(1088, k)))
        counts[np.arange(len(dd.dirs)), dd.dirs] += 1
    ok = ~np.isnan(probs)
    p = probs[ok]
    se = np.sqrt(p * (1 - p) / N)
    z = np.abs(counts[ok] / N - p) / np.where(se > 0, se, 1)
    assert z.max() <= 4.5


def test_unreachable_and_wrong_graph():
    g = temperley_graph(Direction.S, 4)
    other = south_forest(sample(8, 0.5, seed=1))
    with pytest.raises(LatticeError):
        wilson_forest(g, other)


def test_smooth_window_defaults():
    w = SmoothWindow(6, 0.5)
    assert w.margin == 8 * math.ceil(math.log(6 / 1e-3))
    with pytest.raises(LatticeError):
        SmoothWindow(0, 0.5)


@pytest.fixture(scope="module")
def smooth_samples():
    w = SmoothWindow(4, 0.5)
    return [sample_smooth_phase(w, seed=(5, k)) for k in range(150)]


def test_smooth_samples_are_matchings(smooth_samples):
    assert all(s.is_matching() for s in smooth_samples)


def test_smooth_paths_exit_bottom_and_height_is_centered(smooth_samples):
    hs = np.array([smooth_height(s, (1, 1)) for s in smooth_samples])
    assert np.all(hs % 4 == 0)
    se = hs.std(ddof=1) / math.sqrt(len(hs)) if hs.std() > 0 else 1.0
    assert abs(hs.mean()) <= 4 * se
    pos, neg = int(np.sum(hs > 0)), int(np.sum(hs < 0))
    if pos + neg:
        assert abs(pos - neg) <= 4 * math.sqrt(pos + neg)


def test_smooth_height_rejects_non_a_face(smooth_samples):
    with pytest.raises(LatticeError):
        smooth_height(smooth_samples[0], (0, 0))


def test_smooth_marginals_match_full_plane(smooth_samples):
    a = 0.5
    exact = np.array([fullplane_edge_probability((1, 0), d, a) for d in range(4)])
    codes = np.array([s.dimer_at((1, 0)) for s in smooth_samples])
    N = len(codes)
    freq = np.bincount(codes, minlength=4) / N
    se = np.sqrt(exact * (1 - exact) / N)
    assert np.all(np.abs(freq - exact) <= 4 * se)


@pytest.mark.parametrize("direction,site", [("S", (1, 0)), ("N", (1, 2))])
def test_first_step_law(direction, site):
    a, N = 0.5, 30000
    exact = np.array([fullplane_edge_probability(site, d, a) for d in range(4)])
    freq = smooth_first_step_law(a, N, seed=4, direction=direction)
    se = np.sqrt(exact * (1 - exact) / N)
    assert np.all(np.abs(freq - exact) <= 4 * se)


def test_parabola_event():
    r = ParabolicRegion(2.0)
    straight_down = [(0, -k) for k in range(50)]
    assert parabola_event(straight_down, r)
    wide = [(0, 0), (0, -1), (40, -2)]
    assert not parabola_event(wide, r)
    up = [(0, 0), (0, 5)]
    assert not parabola_event(up, r)
    # north paths open upwards
    assert parabola_event([(0, 0), (0, 5)], ParabolicRegion(2.0, Direction.N))
    assert not parabola_event([(0, 0), (0, -5)], ParabolicRegion(2.0, Direction.N))
    with pytest.raises(LatticeError):
        ParabolicRegion(0)


def test_resource_error_when_box_too_small():
    w = SmoothWindow(2, 0.95, margin=1)
    hit = False
    for k in range(40):
        s = sample_smooth_phase(w, seed=k)
        try:
            smooth_height(s, (1, 1))
        except ResourceError:
            hit = True
            break
    assert hit
