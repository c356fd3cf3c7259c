import math

import numpy as np
import pytest

from clusterlab import iid_oracle as oracle
from clusterlab.core import BlockScheme, FixedLevel, OrderStatistic, Window
from clusterlab.estimators import (
    MCEstimate,
    anticlustering_diagnostic,
    block_cluster_measure,
    empirical_cluster_measure,
    empirical_cluster_measure_rescaled,
    extremal_index_estimator,
    joint_jump_moment,
    jump_time_law,
    normalization,
)
from clusterlab.functionals import ei, length_pow, sum_ind, tmax_pow
from clusterlab.generators import GeneratorModel, generate

IID = GeneratorModel("iid_pareto", 1.0)
MM = GeneratorModel("moving_max", 1.0, weights=(1.0, 1.0))


def test_normalization():
    assert normalization("rw", 10, 0.01) == pytest.approx(0.1)
    assert normalization("r_pow_w", 10, 0.01, 1) == pytest.approx(1.0)
    assert normalization("r_pow_w2", 10, 0.01, 1) == pytest.approx(0.1)
    assert normalization("n_rpow_w", 10, 0.01, 1, n=100) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        normalization("rw", 10, 0.0)
    with pytest.raises(ValueError):
        normalization("zz", 10, 0.1)
    with pytest.raises(ValueError):
        normalization("nw", 10, 0.1)


def test_mc_estimate_from_sums():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    est = MCEstimate.from_sums(x.sum(), (x * x).sum(), 4, 0)
    assert est.value == 2.5
    assert est.std_error == pytest.approx(x.std(ddof=1) / 2)


def test_block_measure_iid_ei():
    r, w = 20, 1e-4
    est = block_cluster_measure(IID, ei(), r, IID.level_for(w), 10**7, seed=1)
    exact = oracle.prob_any(r, w) / (r * w)
    assert abs(est.value - exact) < 4 * est.std_error
    assert abs(est.value - 1.0) < 0.02


def test_block_measure_iid_length_small_and_large():
    r, w = 20, 1e-5
    est = block_cluster_measure(IID, length_pow(1), r, IID.level_for(w), 10**7, seed=2)
    assert abs(est.value - 1.0) < 4 * est.std_error + 0.001
    r, w = 10**4, 1e-6
    est = block_cluster_measure(IID, length_pow(1), r, IID.level_for(w), 10**8, "r_pow_w2", seed=3, gamma=1)
    exact = oracle.length_moment(r, w, 1) / (r**3 * w * w)
    assert abs(est.value - exact) < 4 * est.std_error
    assert abs(exact - 1 / 6) < 0.01


def test_block_measure_full_simulation_matches_fast_path():
    r, w = 10, 0.01
    u = IID.level_for(w)
    fast = block_cluster_measure(IID, length_pow(1), r, u, 200_000, seed=4)
    slow = block_cluster_measure(IID, length_pow(1) * sum_ind(0.5), r, u, 200_000, seed=4)
    assert abs(fast.value - slow.value) < 4 * math.hypot(fast.std_error, slow.std_error)


def test_block_measure_mm():
    r, w = 50, 1e-4
    est = block_cluster_measure(MM, ei(), r, MM.level_for(w), 2_000_000, seed=5)
    assert abs(est.value - 0.5) < 4 * est.std_error + 0.01


def test_jump_law_iid():
    law = jump_time_law(IID, 200, IID.level_for(2.5e-4), 100_000, 6)
    assert law.ks_first < 0.02 and law.ks_last < 0.02
    assert abs(law.first.mean() - 0.5) < 0.01
    grid, F = law.ecdf("last")
    assert F[0] == 0.0 and F[-1] == 1.0


def test_jump_law_exact_benchmark():
    r, w = 10, 0.3
    law = jump_time_law(IID, r, IID.level_for(w), 200_000, 7)
    _, exact = oracle.enumerate_patterns(r, w, lambda s: s.first.astype(float))
    assert abs(law.first.mean() * r - exact) < 4 * law.first.std() * r / math.sqrt(200_000)


def test_jump_law_mm_rejection():
    law = jump_time_law(MM, 20, MM.level_for(1e-3), 2000, 8)
    assert law.first.shape[0] == 2000


def test_joint_moments_iid():
    r, w = 10, 0.3
    est = joint_jump_moment(IID, (1, 1, "product"), r, IID.level_for(w), 500_000, 9)
    exact = oracle.joint_product_moment(r, w, 1, 1) / (r**3 * w)
    assert abs(est.value - exact) < 4 * est.std_error
    est = joint_jump_moment(IID, (1, 0, "diff"), r, IID.level_for(w), 500_000, 10)
    exact = oracle.joint_diff_moment(r, w, 1) / (r**2 * w)
    assert abs(est.value - exact) < 4 * est.std_error
    est = joint_jump_moment(IID, (1, 1, "product"), 1000, IID.level_for(1e-7), 10**7, 11)
    assert abs(est.value - 1 / 3) < 4 * est.std_error + 0.003
    with pytest.raises(ValueError):
        joint_jump_moment(IID, (1, 1, "ratio"), 10, 10.0, 100, 1)


def test_empirical_measure_by_hand():
    x = Window(np.array([2.0, 0, 0, 0, 0, 3.0]))
    sch = BlockScheme(6, 3, FixedLevel(1.0), w=0.25)
    assert empirical_cluster_measure(x, ei(), sch) == pytest.approx(4 / 3)
    assert empirical_cluster_measure(Window(np.zeros(6)), ei(), sch) == 0.0
    assert extremal_index_estimator(Window(np.zeros(6)), sch) == 0.0


def test_rescaled_gamma_zero_is_plain():
    x = generate(MM, 10_000, 12).norms()
    sch = BlockScheme(10_000, 10, FixedLevel(MM.level_for(0.01)), w=0.01)
    assert empirical_cluster_measure_rescaled(x, tmax_pow(0), sch) == empirical_cluster_measure(x, ei(), sch)
    with pytest.raises(ValueError):
        empirical_cluster_measure_rescaled(x, length_pow(1), sch)


def test_order_statistic_scheme():
    x = generate(IID, 100_000, 13).norms()
    sch = BlockScheme(100_000, 10, OrderStatistic(100))
    v = empirical_cluster_measure(x, ei(), sch)
    # exactly 100 exceedances over the k-th largest value, k/n used as w
    assert 0.9 <= v <= 1.0


def test_estimators_on_series_handles():
    n, r, w = 10**6, 100, 1e-3
    h = generate(IID, n, 14)
    sch = BlockScheme(n, r, FixedLevel(IID.level_for(w)), w=w)
    assert abs(empirical_cluster_measure(h, ei(), sch) - 1.0) < 0.15
    assert abs(empirical_cluster_measure_rescaled(h, tmax_pow(1), sch) - 0.5) < 0.1
    assert abs(extremal_index_estimator(h, sch) - 1.0) < 0.15
    with pytest.raises(ValueError):
        extremal_index_estimator(h, sch, gamma=-1)


def test_estimators_scale_invariant():
    x = generate(MM, 20_000, 15).norms()
    u = MM.level_for(0.01)
    a = extremal_index_estimator(x, BlockScheme(20_000, 20, FixedLevel(u), w=0.01))
    b = extremal_index_estimator(x * 3.0, BlockScheme(20_000, 20, FixedLevel(u * 3.0), w=0.01))
    assert a == b


def test_anticlustering_iid_exact():
    r, w, ell, g = 20, 0.05, 3, 1.0
    est = anticlustering_diagnostic(IID, g, ell, r, IID.level_for(w), 200_000, 16)
    exact = w * sum(i**g for i in range(ell, r + 1))
    assert abs(est.value - exact) < 4 * est.std_error


def test_anticlustering_mm_beyond_range():
    r, w = 10, 0.02
    est = anticlustering_diagnostic(MM, 0.0, 2, r, MM.level_for(w), 200_000, 17)
    assert abs(est.value - w * (r - 1)) < 4 * est.std_error
    with pytest.raises(ValueError):
        anticlustering_diagnostic(MM, 0.0, 0, r, 10.0, 10, 1)


def test_anticlustering_vanishes_small_blocks():
    est = anticlustering_diagnostic(IID, 0.0, 1, 10, IID.level_for(1e-4), 100_000, 18)
    assert est.value < 0.01
