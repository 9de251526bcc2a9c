import numpy as np
import pytest

from aztec2p.heights import height_field
from aztec2p.lattice import Direction, LatticeError, is_a_face_array
from aztec2p.sampler import sample, sample_many
from aztec2p.temperley import (
    OrientedForest,
    backbone,
    check_theta,
    dual_forest,
    face_height_by_winding,
    inverse_temperley,
    joins_backbone,
    north_forest,
    reconstruct_height,
    south_forest,
    split_point,
    temperley_graph,
    theta_table,
    turn_count,
    validate_dcf,
    winding,
)


def _graph_edges(g):
    count = 0
    for v in g.index:
        for d in (0, 1):
            if g.neighbor(v, d) is not None:
                count += 1
    return count


def test_round_trip_all_n4(enum4):
    for d, _ in enum4:
        s = south_forest(d)
        assert validate_dcf(s)
        assert inverse_temperley(s) == d
        assert inverse_temperley(north_forest(d)) == d


def test_round_trip_n32():
    for d in sample_many(32, 0.5, 50, seed=32):
        assert inverse_temperley(south_forest(d)) == d


def test_edge_counts(enum4):
    n = 4
    gs = temperley_graph(Direction.S, n)
    gn = temperley_graph(Direction.N, n)
    for d, _ in list(enum4)[:50]:
        s = south_forest(d)
        nf = north_forest(d)
        es, en = len(s.edges()), len(nf.edges())
        assert es == len(gs.vertices) - len(gs.sinks)
        assert en == len(gn.vertices) - len(gn.sinks)
        # every edge of either graph is in exactly one of the two forests
        assert es + en == _graph_edges(gs) == _graph_edges(gn)


def test_dual_is_north_forest_and_involution():
    for d in sample_many(16, 0.5, 10, seed=3):
        s = south_forest(d)
        nf = dual_forest(s)
        assert nf == north_forest(d)
        assert dual_forest(nf) == s


def test_invalid_forests():
    d = sample(8, 0.5, seed=4)
    s = south_forest(d)
    g = s.graph
    # a sink with an outgoing edge
    par = s.parent.copy()
    sink = g.index[g.east[0]]
    par[sink] = g.index[g.neighbor(g.east[0], 1) or g.neighbor(g.east[0], 2)]
    rep = validate_dcf(OrientedForest(g, par, s.a))
    assert not rep and "ii" in rep.items()
    # a two-cycle
    par = s.parent.copy()
    i = next(k for k in range(len(par)) if par[k] >= 0 and par[par[k]] >= 0)
    par[par[i]] = i
    rep = validate_dcf(OrientedForest(g, par, s.a))
    assert not rep and "ii" in rep.items()
    with pytest.raises(LatticeError):
        dual_forest(OrientedForest(g, par, s.a))


def test_source_leaving_its_cross():
    # rerouting the first south source sometimes sends it to a sink outside its cross
    n = 8
    found = False
    for d in sample_many(n, 0.5, 30, seed=6):
        s = south_forest(d)
        g = s.graph
        v = g.south[0]
        i = g.index[v]
        for code in range(4):
            u = g.neighbor(v, code)
            if u is None or g.index[u] == s.parent[i]:
                continue
            par = s.parent.copy()
            par[i] = g.index[u]
            rep = validate_dcf(OrientedForest(g, par, s.a))
            if not rep and "iii" in rep.items():
                found = True
                break
        if found:
            break
    assert found


def test_theta_table_and_check():
    n = 16
    for d in sample_many(n, 0.5, 20, seed=7):
        for f in (south_forest(d), north_forest(d)):
            assert check_theta(f)
            I = split_point(f)
            assert 0 <= I <= n // 2
            table = theta_table(f.direction, n, I)
            # every source but the free one is forced
            assert len(table) == n - (1 if I > 0 else 0)


def test_backbone_interlacing():
    n = 16
    for d in sample_many(n, 0.5, 10, seed=8):
        paths, sp = backbone(south_forest(d))
        assert len(paths) == n
        south = [p for p in paths if p.kind == "S-"]
        # paths from the south row end at distinct sinks, ordered along the boundary
        ends = [p.sink for p in south]
        assert len(set(ends)) == len(ends)
        assert sp.I == split_point(south_forest(d))


def test_winding_cases():
    square = [(0, 0), (2, 0), (2, 2), (0, 2), (-2, 2), (-2, 0), (0, 0)]
    assert winding(square, (0.5, 1)) == 1
    assert winding(square[::-1], (0.5, 1)) == -1
    assert winding(square, (5, 1)) == 0
    assert winding([(0, 0)], (1, 1)) == 0
    line = [(-4, 4), (4, 4)]
    assert winding(line, (0, 0)) == -1
    assert winding(line[::-1], (0, 0)) == 1


def test_turn_count():
    assert turn_count([(0, 0), (2, 2), (0, 4)]) == 1
    assert turn_count([(0, 0), (2, 2), (4, 0)]) == -1
    assert turn_count([(0, 0), (2, 2), (4, 4)]) == 0
    loop = [(0, 0), (2, 2), (0, 4), (-2, 2), (0, 0), (2, 2)]
    assert turn_count(loop) == 4


def test_reconstruct_height():
    for d in sample_many(16, 0.5, 10, seed=9):
        h = height_field(d)
        assert np.array_equal(reconstruct_height(south_forest(d)).values, h.values)
        assert np.array_equal(reconstruct_height(north_forest(d)).values, h.values)


def test_height_by_winding_on_backbone():
    n = 16
    checked = 0
    for d in sample_many(n, 0.5, 10, seed=10):
        s = south_forest(d)
        h = height_field(d)
        I = split_point(s)
        if I < 1:
            continue
        for x in range(-n + 1, n, 2):
            for y in range(-n + 2, n):
                if not is_a_face_array(np.array([x]), np.array([y]))[0]:
                    continue
                if not joins_backbone(s, (x, y - 1), I):
                    continue
                assert face_height_by_winding(s, (x, y), I) == h((x, y))
                checked += 1
    assert checked > 0


def test_zero_winding_faces_on_split_path():
    n = 16
    for d in sample_many(n, 0.5, 10, seed=12):
        s = south_forest(d)
        h = height_field(d)
        I = split_point(s)
        if I < 1:
            continue
        path = s.path(s.graph.south[I - 1])
        for v in path[:-1]:
            face = (v[0], v[1] + 1)
            if abs(face[1]) >= n or not is_a_face_array(np.array([face[0]]), np.array([face[1]]))[0]:
                continue
            if winding(s.path(v), face) == 0:
                assert h(face) == 4 * I - n - 1


def test_direction_mismatch():
    d = sample(4, 0.5, seed=1)
    with pytest.raises(LatticeError):
        inverse_temperley(south_forest(d), Direction.N)
    with pytest.raises(LatticeError):
        face_height_by_winding(north_forest(d), (1, 1))
