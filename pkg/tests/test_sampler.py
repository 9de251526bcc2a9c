import numpy as np
import pytest
from scipy import stats

from aztec2p.kasteleyn import partition_function
from aztec2p.lattice import Gauge, LatticeError
from aztec2p.sampler import (
    DimerConfig,
    RandomSeed,
    ResourceError,
    classical_count,
    config_weight,
    enumerate_tilings,
    sample,
    sample_batch,
    sample_many,
)


def test_enumeration_count(enum4):
    assert len(enum4) == 1024 == classical_count(4)
    assert len(np.unique(enum4.dirs, axis=0)) == 1024


def test_enumeration_n2():
    assert len(enumerate_tilings(2, 0.5)) == classical_count(2) == 8


def test_uniform_weights(enum4_uniform):
    assert np.all(enum4_uniform.weights == 1.0)


def test_weights_sum_to_partition_function(enum4):
    z = partition_function(4, 0.5)
    assert abs(enum4.weights.sum() - z) / z < 1e-10


def test_config_weight_matches_enumeration(enum4):
    for k in range(0, 1024, 97):
        d = DimerConfig(4, 0.5, enum4.dirs[k])
        assert config_weight(d) == pytest.approx(enum4.weights[k])


def test_minimum_weight_is_a_power(enum4):
    wmin = enum4.weights.min()
    k = np.log(wmin) / np.log(0.5)
    assert k == pytest.approx(round(k))
    assert wmin < 1


def test_gauge_covariance(enum4):
    ratios = [
        config_weight(d, Gauge.S_WEIGHTS) / config_weight(d) for d, _ in enum4
    ]
    assert np.ptp(ratios) < 1e-12 * max(ratios)


def test_enumeration_limits():
    with pytest.raises(ResourceError):
        enumerate_tilings(8, 0.5)
    with pytest.raises(LatticeError):
        enumerate_tilings(3, 0.5)


def test_sample_valid_and_seeded():
    d1 = sample(16, 0.5, seed=3)
    d2 = sample(16, 0.5, seed=3)
    d3 = sample(16, 0.5, seed=4)
    assert d1.is_valid() and d1 == d2 and d1 != d3


def test_streams_match_batches():
    many = sample_many(8, 0.5, 4, seed=RandomSeed(9, 2))
    for k, d in enumerate(many):
        assert d == sample(8, 0.5, seed=RandomSeed(9, 2 + k))


def test_sample_rejects_bad_input():
    with pytest.raises(LatticeError):
        sample(6, 0.5)
    with pytest.raises(LatticeError):
        sample(8, 0.0)


def test_uniform_law_small_n(enum4_uniform):
    # every tiling within 4 sigma of 1/1024 at N = 200 000
    N = 200_000
    batch = sample_batch(4, 1.0, N, seed=77)
    idx = enum4_uniform.index()
    keys = np.ascontiguousarray(batch.astype(np.int8))
    counts = np.zeros(1024)
    for row in keys:
        counts[idx[row.tobytes()]] += 1
    p = 1 / 1024
    sigma = np.sqrt(N * p * (1 - p))
    assert np.all(np.abs(counts - N * p) <= 4 * sigma)
    assert stats.chisquare(counts).pvalue > 1e-4


def test_weighted_law_chi_square(enum4):
    N = 50_000
    batch = sample_batch(4, 0.5, N, seed=78)
    idx = enum4.index()
    counts = np.zeros(1024)
    for row in np.ascontiguousarray(batch.astype(np.int8)):
        counts[idx[row.tobytes()]] += 1
    assert stats.chisquare(counts, N * enum4.probabilities).pvalue > 1e-4


def test_tv_within_noise_floor(enum4):
    # TV is compared with the spread of TV for exact multinomial draws
    N = 50_000
    p = enum4.probabilities
    batch = sample_batch(4, 0.5, N, seed=79)
    idx = enum4.index()
    counts = np.zeros(1024)
    for row in np.ascontiguousarray(batch.astype(np.int8)):
        counts[idx[row.tobytes()]] += 1
    tv = 0.5 * np.abs(counts / N - p).sum()
    rng = np.random.default_rng(0)
    ref = [0.5 * np.abs(rng.multinomial(N, p) / N - p).sum() for _ in range(200)]
    assert tv <= np.quantile(ref, 0.999)


@pytest.mark.slow
def test_large_sample_is_perfect_matching():
    d = sample(1200, 0.5, seed=7)
    assert d.is_valid()
    assert len(d.dirs) == 1200 * 1201
