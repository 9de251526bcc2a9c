import json
import math
from importlib import resources

import numpy as np
import pytest
from scipy.special import gamma

from aztec2p.airy import (
    AiryKernelSpec,
    TracyWidom2,
    airy_kernel,
    ai,
    fredholm_gap,
    is_monotone_decreasing,
    ks_trend,
    stationary_kernel,
    top_path_test,
    tw2_table,
)
from aztec2p.kasteleyn import NumericError


def test_airy_at_zero():
    assert ai(0.0) == pytest.approx(3 ** (-2 / 3) / gamma(2 / 3), rel=1e-14)


@pytest.mark.parametrize("z", [-6.0, -2.5, 0.0, 1.0, 4.0])
def test_equal_time_kernel_matches_closed_form(z):
    assert airy_kernel(0, z, 0, z) == pytest.approx(float(stationary_kernel(z, z)), abs=1e-11)
    assert airy_kernel(0.3, z, 0.3, z + 0.5) == pytest.approx(float(stationary_kernel(z, z + 0.5)), abs=1e-11)


def test_stationary_kernel_symmetric_and_continuous():
    x, y = 0.7, -1.2
    assert stationary_kernel(x, y) == pytest.approx(stationary_kernel(y, x))
    assert stationary_kernel(x, x + 1e-7) == pytest.approx(stationary_kernel(x, x), abs=1e-6)


def test_kernel_quadrature_refinement():
    fine = AiryKernelSpec(panel_nodes=64)
    for args in ((0.0, -1.0, 0.5, 0.3), (0.5, 0.3, 0.0, -1.0), (-0.2, 2.0, 0.4, 1.0)):
        assert airy_kernel(*args) == pytest.approx(airy_kernel(*args, spec=fine), abs=1e-12)


def test_kernel_time_order():
    # for t1 >= t2 there is no heat term; for t1 < t2 it is subtracted
    assert airy_kernel(0.5, 0.0, 0.0, 0.0) > 0
    k_lt = airy_kernel(0.0, 0.0, 0.5, 0.0)
    k_gt = airy_kernel(0.5, 0.0, 0.0, 0.0)
    assert k_lt != pytest.approx(k_gt)


def test_kernel_decay():
    vals = [abs(airy_kernel(0, z, 0, z)) for z in (2.0, 4.0, 6.0, 8.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-8


def test_f2_limits_and_monotonicity():
    s = np.linspace(-6, 3, 10)
    v = np.array([fredholm_gap(x) for x in s])
    assert np.all(np.diff(v) > 0)
    assert fredholm_gap(-9.0) < 1e-6
    assert fredholm_gap(6.0) > 1 - 1e-8


def test_f2_matches_fixture():
    doc = json.loads(resources.files("aztec2p").joinpath("data/f2_oracle.json").read_text())
    for s, val in zip(doc["s"], doc["F2"]):
        assert fredholm_gap(s) == pytest.approx(val, abs=1e-10)
    assert fredholm_gap(0.0) == pytest.approx(0.9693728, abs=1e-6)


def test_grid_doubling_is_within_tolerance():
    spec = AiryKernelSpec()
    for s in (-5.0, -1.77, 1.0):
        assert abs(fredholm_gap(s, spec) - fredholm_gap(s, AiryKernelSpec(nystrom_nodes=128))) < spec.stable_tol


def test_unstable_grid_raises():
    with pytest.raises(NumericError):
        fredholm_gap(-8.0, AiryKernelSpec(nystrom_nodes=4, stable_tol=1e-12))


def test_tw2_moments():
    mean, var = tw2_table().moments()
    assert mean == pytest.approx(-1.7711, abs=2e-3)
    assert var == pytest.approx(0.8132, abs=5e-3)


def test_tw2_table_inverse():
    t = tw2_table()
    for u in (0.05, 0.5, 0.95):
        assert t.cdf(t.ppf(u)) == pytest.approx(u, abs=1e-9)
    assert isinstance(t, TracyWidom2)


def test_ks_on_exact_draws_is_small():
    rng = np.random.default_rng(7)
    N = 2000
    x = tw2_table().sample(N, rng)
    rep = top_path_test(x)
    assert rep.statistic <= 1.36 / math.sqrt(N)
    assert rep.accepted
    shifted = top_path_test(x + 1.0)
    assert not shifted.accepted


def test_ks_needs_enough_samples():
    with pytest.raises(ValueError):
        top_path_test(np.zeros(50))


def test_ks_trend_detects_improvement():
    rng = np.random.default_rng(3)
    t = tw2_table()
    data = {n: t.sample(500, rng) + shift for n, shift in ((1, 1.0), (2, 0.5), (3, 0.0))}
    trend = ks_trend(data)
    assert is_monotone_decreasing(trend)
    assert not is_monotone_decreasing({1: 0.1, 2: 0.2})
