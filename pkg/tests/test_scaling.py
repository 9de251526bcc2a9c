import math

import numpy as np
import pytest

from aztec2p.lattice import FaceClass, classify_face
from aztec2p.sampler import sample, sample_many
from aztec2p.scaling import (
    DomainError,
    RegionSpec,
    backtrack_bound,
    backtrack_stat,
    beta_inverse,
    beta_map,
    curve_extent,
    extract_airy_paths,
    gamma_hat,
    gamma_map,
    height_match_check,
    height_match_frequency,
    limit_curve_point,
    limit_curve_residual,
    nearest_a_face,
    onion_detect,
    region_polygons,
    scaling_frame,
    scaling_frame_expanded,
    south_path,
    top_path_samples,
)
from aztec2p.temperley import north_forest, south_forest


@pytest.mark.parametrize("a", [0.1, 0.3, 0.5, 0.8, 0.95])
def test_two_codings_of_the_constants(a):
    f, g = scaling_frame(a), scaling_frame_expanded(a)
    for name in ("c", "xi_c", "c0", "lambda1", "lambda2"):
        assert getattr(f, name) == pytest.approx(getattr(g, name), rel=1e-12)


def test_frame_values_and_domain():
    f = scaling_frame(0.5)
    assert f.c == pytest.approx(0.4)
    assert f.xi_c == pytest.approx(-0.5 * math.sqrt(0.2))
    assert scaling_frame(0.999).xi_c == pytest.approx(0.0, abs=1e-3)
    for bad in (0.0, 1.0, 1.5, -0.2):
        with pytest.raises(DomainError):
            scaling_frame(bad)
        with pytest.raises(DomainError):
            scaling_frame_expanded(bad)


@pytest.mark.parametrize("a", [0.3, 0.5, 0.7])
def test_curve_points_solve_the_polynomial(a):
    al = curve_extent(a)
    for t in np.linspace(-0.95 * al, 0.95 * al, 9):
        p = limit_curve_point(t, a)
        assert p[1] - p[0] == pytest.approx(t, abs=1e-12)
        assert abs(limit_curve_residual(p[0], p[1], a)) < 1e-10
        # reflection across the diagonal
        q = limit_curve_point(-t, a)
        assert q == pytest.approx(p[::-1], abs=1e-10)


def test_curve_centre_is_the_critical_point():
    for a in (0.3, 0.5):
        f = scaling_frame(a)
        assert limit_curve_point(0.0, a) == pytest.approx([f.xi_c, f.xi_c], abs=1e-12)


def test_curve_point_is_inner_root():
    # the chosen root is the sign change closest to the origin along the diagonal
    a = 0.5
    for t in (0.0, 0.2):
        p = limit_curve_point(t, a)
        s = np.linspace(p[0] + t / 2 + 1e-6, -t / 2 - 1e-9, 2000)
        vals = limit_curve_residual(s - t / 2, s + t / 2, a)
        assert np.all(np.sign(vals) == np.sign(vals[0]))


def test_curve_extent_errors():
    a = 0.5
    with pytest.raises(DomainError):
        limit_curve_point(curve_extent(a) + 0.01, a)


def test_beta_round_trip():
    n, a = 256, 0.5
    for t, x in ((0.0, 0.0), (12.0, -5.0), (-30.0, 7.5)):
        p = beta_map(n, t, x, a)
        tt, xx = beta_inverse(n, p, a)
        assert tt[0] == pytest.approx(t) and xx[0] == pytest.approx(x)
        assert gamma_map(n, t, x, a) == pytest.approx(beta_map(n, t, 0, a) + [x, 0])


def test_nearest_a_face():
    assert nearest_a_face((1, 1)) == (1, 1)
    assert nearest_a_face((1.4, 0.9)) == (1, 1)
    assert nearest_a_face((3, 3)) == (3, 3)
    # a tie between (1, 1) and (3, -1) goes to the smaller x
    assert nearest_a_face((2, 0)) == (1, 1)
    f = nearest_a_face((-17.3, 40.2))
    assert classify_face(f) == FaceClass.A


def test_gamma_hat_lands_next_to_an_a_face():
    f = scaling_frame(0.5)
    for n in (64, 256):
        for t, x in ((0, 0), (0.5, 0.3), (-1.0, -2.0)):
            p = gamma_hat(n, t, x, f)
            assert classify_face((p[0] + 1, p[1] + 1)) == FaceClass.A
    with pytest.raises(DomainError):
        gamma_hat(64, 1e6, 0, f)


def test_height_match_small_sizes():
    # exhaustive n=4 is reported, not required: the rule is asymptotic
    assert height_match_frequency(32, 0.5, 30, seed=1) >= 0.8
    d = sample(16, 0.5, seed=3)
    assert height_match_check(d) == height_match_check(d, south_forest(d))


def test_backtrack_stat_cases():
    assert backtrack_stat([(0, 0)]) == -math.inf
    down = [(x, -x) for x in range(0, -20, -2)]
    assert backtrack_stat(down) <= 0
    # go left 4 then come back right 7
    zig = [(0, 0), (-2, 2), (-4, 4), (-2, 6), (0, 8), (3, 10)]
    assert backtrack_stat(zig) == 7
    assert backtrack_bound(256, 1) == pytest.approx(3 * 4 * math.log(256) ** 2)


def test_south_path_checks():
    d = sample(16, 0.5, seed=2)
    f = south_forest(d)
    p = south_path(f, 1)
    assert p[0, 1] == -16 and abs(p[-1, 0]) == 17
    with pytest.raises(Exception):
        south_path(f, 0)
    with pytest.raises(Exception):
        south_path(north_forest(d), 1)


def test_regions_nest_and_draw():
    n, a = 256, 0.5
    rs = RegionSpec("RS_n", n, a)
    rs_star = RegionSpec("RS_n*", n, a)
    pts = np.array([beta_map(n, t, x, a) for t in np.linspace(-60, 60, 13) for x in np.linspace(-60, 60, 13)])
    assert np.all(rs_star.contains(pts)[rs.contains(pts)])
    assert rs.contains(pts).any()
    for name in ("RS_n", "RS_n*", "PRS_n*", "Meso_n", "Cap", "Cross"):
        polys = region_polygons(RegionSpec(name, n, a))
        assert polys and all(p.shape[1] == 2 and len(p) >= 4 for p in polys)
    with pytest.raises(DomainError):
        RegionSpec("nowhere", n, a)


@pytest.fixture(scope="module")
def forests128():
    return [south_forest(d) for d in sample_many(128, 0.5, 6, seed=17)]


def test_airy_paths_are_ordered(forests128):
    frame = scaling_frame(0.5)
    times = np.linspace(-1, 1, 5)
    for f in forests128:
        ap = extract_airy_paths(f, frame, times, count=3)
        for i in range(2):
            ok = np.isfinite(ap.upper[i]) & np.isfinite(ap.upper[i + 1])
            assert np.all(ap.upper[i][ok] >= ap.upper[i + 1][ok])
        ok = np.isfinite(ap.upper) & np.isfinite(ap.lower)
        assert np.all(ap.upper[ok] >= ap.lower[ok])


def test_airy_path_time_grid_consistency(forests128):
    frame = scaling_frame(0.5)
    coarse = np.array([-0.5, 0.0, 0.5])
    fine = np.linspace(-0.5, 0.5, 9)
    for f in forests128:
        a = extract_airy_paths(f, frame, coarse).upper[0]
        b = extract_airy_paths(f, frame, fine).upper[0]
        assert np.array_equal(a, b[[0, 4, 8]])


@pytest.mark.slow
def test_top_path_location_n512():
    xs = top_path_samples(512, 0.5, 30, seed=51)
    assert np.all(np.isfinite(xs))
    assert -3 <= xs.mean() <= 1


def _onion_path():
    left_to_right = [(x, -4) for x in range(-12, 13, 2)]
    up = [(12, y) for y in range(-2, 5, 2)]
    right_to_left = [(x, 4) for x in range(10, -13, -2)]
    return np.array(left_to_right + up + right_to_left)


def test_onion_detects_a_u_turn():
    rep = onion_detect([_onion_path()], 10, 10, (0, 0))
    assert rep.found and rep.layers == 1 and rep.path_index == 0


def test_onion_ignores_parallel_crossings():
    a = np.array([(x, -4) for x in range(-12, 13, 2)])
    b = np.array([(x, 4) for x in range(-12, 13, 2)])
    assert not onion_detect([a, b], 10, 10, (0, 0)).found
    with pytest.raises(DomainError):
        onion_detect([a], 0.5, 10, (0, 0))


def test_onion_layers_count_enclosed_paths():
    inner = np.array([(x, 0) for x in range(-6, 7, 2)])
    rep = onion_detect([_onion_path(), inner], 10, 10, (0, 0))
    assert rep.found and rep.layers == 2
