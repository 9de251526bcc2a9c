from fractions import Fraction

import numpy as np
import pytest

from aztec2p.heights import (
    HeightField,
    Mollifier,
    log_spaced_mollifier,
    central_height,
    central_height_of_values,
    config_from_heights,
    dimer_direction_from_vertex_height,
    height_at_vertex,
    height_field,
    mollified_height,
    validate_height,
    vertex_height_table,
)
from aztec2p.lattice import LatticeError, VertexClass
from aztec2p.sampler import sample, sample_many


@pytest.fixture(scope="module")
def h16():
    return height_field(sample(16, 0.5, seed=5))


def test_boundary_rows(h16):
    n = 16
    for i in range(-n, n + 1, 2):
        assert h16((i, -n)) == i
        assert h16((i, n)) == -i


def test_adjacent_faces_differ_by_one_or_three(h16):
    v = h16.values.astype(np.int64)
    ok = v != HeightField.MISSING
    m = h16.n + 1
    for dx, dy in ((1, 1), (1, -1)):
        a = v[max(0, -dx) : 2 * m + 1 - max(0, dx), max(0, -dy) : 2 * m + 1 - max(0, dy)]
        b = v[max(0, dx) :, max(0, dy) :][: a.shape[0], : a.shape[1]]
        both = ok[max(0, -dx) : 2 * m + 1 - max(0, dx), max(0, -dy) : 2 * m + 1 - max(0, dy)] & (
            ok[max(0, dx) :, max(0, dy) :][: a.shape[0], : a.shape[1]]
        )
        assert set(np.unique(np.abs(a - b)[both])) <= {1, 3}


def test_validate(h16):
    assert validate_height(h16)
    bumped = h16.with_value((1, 1), h16((1, 1)) + 1)
    ok, why = validate_height(bumped, report=True)
    assert not ok and why


def test_all_zero_interior_fails():
    n = 8
    h = height_field(sample(n, 0.5, seed=1))
    vals = h.values.copy()
    m = n + 1
    interior = np.zeros_like(vals, dtype=bool)
    interior[2 : 2 * m - 1, 2 : 2 * m - 1] = True
    vals[interior & (vals != HeightField.MISSING)] = 0
    assert not validate_height(HeightField(n, vals))


def test_config_round_trip():
    for d in sample_many(8, 0.5, 10, seed=2):
        assert config_from_heights(height_field(d), d.a) == d


def test_vertex_height_values():
    # south vertex whose a-face sits at height 1
    table = vertex_height_table(VertexClass.S)
    assert 1 + table[0] == Fraction(5, 2)
    assert 1 + table[1] == Fraction(-1, 2)
    assert sorted(table.values()) == [Fraction(-3, 2), Fraction(-1, 2), Fraction(1, 2), Fraction(3, 2)]


def test_vertex_heights_recover_tiling():
    d = sample(8, 0.5, seed=11)
    h = height_field(d)
    for (x, y), code in zip(d.white, d.dirs):
        assert dimer_direction_from_vertex_height(h, (x, y)) == code
        assert height_at_vertex(h, (x, y)).denominator in (1, 2, 4)


def test_central_height_rules():
    assert central_height_of_values(Fraction(0)) == 0
    assert central_height_of_values(Fraction(1, 2)) == 1
    assert central_height_of_values(Fraction(-1, 2)) == 0
    n = 8
    vals = np.full((2 * n + 3, 2 * n + 3), HeightField.MISSING, dtype=np.int32)
    for x in range(-n - 1, n + 2):
        for y in range(-n - 1, n + 2):
            if (x + y) % 2 == 0:
                vals[x + n + 1, y + n + 1] = 0
    assert central_height(HeightField(n, vals), radius=2) == 0


def test_central_height_window_average_half():
    n = 8
    vals = np.full((2 * n + 3, 2 * n + 3), HeightField.MISSING, dtype=np.int32)
    vals[n + 1, n + 1] = 0
    vals[n + 2, n + 2] = 1
    # window of radius 1 holds faces (0,0),(1,1),(-1,-1),(1,-1),(-1,1)
    vals[n, n] = 0
    vals[n + 2, n] = 1
    vals[n, n + 2] = 1
    h = HeightField(n, vals)
    # mean 3/5 -> 1
    assert central_height(h, radius=1) == 1


def test_central_height_small_at_n128():
    hs = [central_height(height_field(d)) for d in sample_many(128, 0.5, 200, seed=128)]
    frac = np.mean(np.abs(hs) <= np.log(128))
    assert frac >= 0.95


def test_mollifiers(h16):
    assert mollified_height(h16, Mollifier(((0, 0),)), (1, 1)) == h16((1, 1))
    m = log_spaced_mollifier(64, 2)
    assert m.offsets[0] == (0, 0) and all(o[0] == -o[1] for o in m.offsets)
    with pytest.raises(LatticeError):
        Mollifier(((1, 0),))
    with pytest.raises(LatticeError):
        mollified_height(h16, Mollifier(((0, 40),)), (1, 1))


def test_mollified_constant_field():
    n = 8
    vals = np.full((2 * n + 3, 2 * n + 3), HeightField.MISSING, dtype=np.int32)
    for x in range(-n - 1, n + 2):
        for y in range(-n - 1, n + 2):
            if (x + y) % 2 == 0:
                vals[x + n + 1, y + n + 1] = 7
    h = HeightField(n, vals)
    assert mollified_height(h, Mollifier(((0, 0), (2, 2), (-2, 0))), (0.2, 0.1)) == 7


def test_missing_face_errors(h16):
    with pytest.raises(LatticeError):
        h16((1, 0))
    with pytest.raises(LatticeError):
        h16((40, 0))
