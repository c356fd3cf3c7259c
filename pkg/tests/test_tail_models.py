import math

import numpy as np
import pytest
from scipy import stats as sps

from clusterlab import rng as _rng
from clusterlab.functionals import ei, length_gt, length_pow, tmax_pow
from clusterlab.generators import GeneratorModel
from clusterlab.tail_models import (
    RejectionBudgetExceeded,
    candidate_theta,
    cluster_index,
    empirical_tail_path_oracle,
    limiting_length_pmf,
    sample_tail_path,
    sample_Z,
    tail_model,
)

IID = GeneratorModel("iid_pareto", 1.0)
MM = GeneratorModel("moving_max", 1.0, weights=(1.0, 1.0))
AR = GeneratorModel("ar1", 1.0, phi=0.5)


def test_exact_theta():
    assert tail_model(IID).theta_exact == 1.0
    assert tail_model(MM).theta_exact == 0.5
    assert tail_model(AR).theta_exact == 0.5
    assert tail_model(GeneratorModel("moving_max", 2.0, weights=(1.0, 2.0))).theta_exact == pytest.approx(0.8)


def test_iid_path_single_spike():
    tm = tail_model(IID, horizon=5)
    w = sample_tail_path(tm, 1)
    x = w.values[:, 0]
    assert x.shape[0] == 11 and np.count_nonzero(x) == 1 and x[5] > 1


def test_mm_path_patterns():
    tm = tail_model(MM)
    paths, h = tm.sample_paths(10_000, _rng.stream(2, _rng.PATHS))
    assert h == 1
    nz = (paths != 0).sum(axis=1)
    assert set(np.unique(nz)) <= {1, 2}
    # equal weights: the neighbor equals Y_0 on one side
    assert np.all((paths[:, 0] == paths[:, 1]) | (paths[:, 2] == paths[:, 1]))


def test_ar1_path_ratios():
    tm = tail_model(AR)
    paths, h = tm.sample_paths(2000, _rng.stream(3, _rng.PATHS))
    fwd = paths[:, h:]
    np.testing.assert_allclose(fwd[:, 1:] / fwd[:, :-1], 0.5, rtol=1e-12)


def test_y0_is_pareto():
    for m in (IID, MM, AR):
        paths, h = tail_model(m).sample_paths(20_000, _rng.stream(4, _rng.PATHS))
        assert np.all(paths[:, h] > 1)
        assert sps.kstest(paths[:, h], "pareto", args=(1.0,)).pvalue > 1e-3


@pytest.mark.parametrize("m", [IID, MM, AR])
def test_candidate_theta(m):
    est = candidate_theta(tail_model(m), 200_000, 5)
    assert abs(est.value - tail_model(m).theta_exact) < 4 * est.std_error + 1e-12


def test_cluster_index_values():
    tm = tail_model(IID, horizon=3)
    assert cluster_index(tm, length_pow(1.7), 1000, 6).value == 1.0
    assert cluster_index(tm, length_gt(1), 1000, 6).value == 0.0
    for m in (MM, AR):
        ci = cluster_index(tail_model(m), ei(), 200_000, 7)
        assert abs(ci.value - 0.5) < 4 * ci.std_error
    # MM(1,1): every cluster has length 2
    ci = cluster_index(tail_model(MM), length_pow(1), 100_000, 8)
    assert abs(ci.value - 1.0) < 4 * ci.std_error + 0.01


def test_cluster_index_preconditions():
    with pytest.raises(ValueError, match="shift invariant"):
        cluster_index(tail_model(MM), tmax_pow(1), 10, 1)


def test_sample_Z():
    paths, h, acc = sample_Z(tail_model(IID, horizon=2), 1000, 9)
    assert acc == 1.0
    for m in (MM, AR):
        tm = tail_model(m)
        paths, h, acc = sample_Z(tm, 50_000, 10)
        assert abs(acc - tm.theta_exact) < 0.01
        assert np.all(paths[:, :h].max(axis=1) <= 1.0)
    with pytest.raises(RejectionBudgetExceeded, match="rate"):
        sample_Z(tail_model(MM), 100_000, 11, max_trials=1000)


def test_Z_matches_cluster_index():
    tm = tail_model(AR)
    q = 1
    paths, h, acc = sample_Z(tm, 100_000, 12)
    from clusterlab.core import block_stats

    st = block_stats(np.ascontiguousarray(paths).ravel(), paths.shape[1], 1.0)
    pz = (st.length > q).mean()
    ci = cluster_index(tm, length_gt(q), 200_000, 13)
    se_z = math.sqrt(pz * (1 - pz) / paths.shape[0]) * tm.theta_exact
    assert abs(pz * tm.theta_exact - ci.value) < 3 * math.hypot(se_z, ci.std_error)


@pytest.mark.parametrize("weights", [(1.0, 1.0), (1.0, 0.5), (1.0, 2.0, 0.5)])
def test_length_pmf_is_proper(weights):
    res = limiting_length_pmf(tail_model(GeneratorModel("moving_max", 1.0, weights=weights)), 200_000, 14)
    assert abs(res["sum"] - 1.0) < 3 * res["sum_se"]


def test_length_pmf_ar1_uses_forward_theta_when_needed():
    res = limiting_length_pmf(tail_model(AR), 100_000, 15)
    assert res["theta"] == 0.5
    assert res["pmf"][0] == pytest.approx(0.5, abs=0.02)


def test_empirical_oracle_ar1_ratio():
    u = AR.level_for(1e-3)
    win = empirical_tail_path_oracle(AR, u, 1, 10**6, 16)
    big = win[:, 1] > 5
    assert np.median(win[big, 2] / win[big, 1]) == pytest.approx(0.5, abs=0.05)


def test_empirical_oracle_mm_neighbor():
    u = MM.level_for(1e-3)
    win = empirical_tail_path_oracle(MM, u, 1, 2 * 10**6, 17)
    assert abs((win[:, 2] > 1).mean() - 0.5) < 0.05


def test_empirical_oracle_iid_neighbors_small():
    win = empirical_tail_path_oracle(IID, 1e4, 1, 10**6, 18)
    assert np.all(win[:, 0] < 0.1) or (win[:, 0] < 0.1).mean() > 0.99


def test_empirical_oracle_error():
    with pytest.raises(ValueError, match="lower u"):
        empirical_tail_path_oracle(IID, 1e15, 1, 1000, 1)
