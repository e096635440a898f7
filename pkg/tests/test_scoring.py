from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from gloss.scoring import ScoreTensor, ee_fiber_scores, lof_fiber_scores, score_tensor, top_k_labels


def test_ee_constant_fiber_scores_zero():
    assert not ee_fiber_scores(np.full(12, 3.7)).any()


def test_ee_single_outlier_is_maximal():
    fiber = np.zeros(52)
    fiber[17] = 10.0
    scores = ee_fiber_scores(fiber)
    assert scores[17] > scores.max(initial=0.0, where=np.arange(52) != 17)
    assert np.argmax(scores) == 17


def test_ee_symmetric_fiber_scores_equal():
    fiber = np.tile([-1.0, 1.0], 10)
    scores = ee_fiber_scores(fiber)
    assert np.allclose(scores, scores[0])


def test_ee_rejects_short_fiber():
    with pytest.raises(ValueError, match="< 4"):
        ee_fiber_scores(np.array([1.0, 2.0, 3.0]))


def test_ee_affine_invariance():
    rng = np.random.default_rng(0)
    for _ in range(20):
        fiber = rng.standard_normal(30)
        a = float(rng.uniform(0.1, 4.0)) * float(rng.choice([-1.0, 1.0]))
        b = float(rng.uniform(-5, 5))
        base = ee_fiber_scores(fiber)
        mapped = ee_fiber_scores(a * fiber + b)
        np.testing.assert_allclose(mapped, base, rtol=1e-9, atol=1e-9)


def test_ee_scores_nonnegative_finite():
    rng = np.random.default_rng(1)
    scores = ee_fiber_scores(rng.standard_normal(52))
    assert np.isfinite(scores).all() and (scores >= 0).all()


def test_lof_identical_points_score_one():
    scores = lof_fiber_scores(np.full(20, 2.0), k=3)
    np.testing.assert_allclose(scores, 1.0)


def test_lof_isolated_point_has_max_score():
    fiber = np.array([0.0, 0.1, 0.2, 0.05, 0.15, 10.0])
    scores = lof_fiber_scores(fiber, k=2)
    assert np.argmax(scores) == 5
    assert scores[5] > 2.0


def test_lof_permutation_invariant_multiset():
    rng = np.random.default_rng(2)
    fiber = rng.choice([0.0, 1.0, 1.5, 8.0], size=15)
    perm = rng.permutation(15)
    base = lof_fiber_scores(fiber, k=4)
    shuffled = lof_fiber_scores(fiber[perm], k=4)
    np.testing.assert_allclose(shuffled, base[perm], rtol=1e-12)


def test_lof_rejects_bad_k():
    with pytest.raises(ValueError, match="smaller"):
        lof_fiber_scores(np.arange(5.0), k=5)
    with pytest.raises(ValueError, match=">= 1"):
        lof_fiber_scores(np.arange(5.0), k=0)


def test_lof_scores_finite_on_duplicates():
    fiber = np.concatenate([np.zeros(51), [10.0]])
    scores = lof_fiber_scores(fiber, k=10)
    assert np.isfinite(scores).all()
    assert np.argmax(scores) == 51


def test_score_tensor_zero_input():
    z = np.zeros((4, 3, 8, 2))
    st = score_tensor(z, "ee")
    assert not st.scores.any()
    st = score_tensor(z, "lof", k=3)
    np.testing.assert_allclose(st.scores, 1.0)


def test_score_tensor_spike_location():
    rng = np.random.default_rng(3)
    s = 0.01 * rng.standard_normal((4, 3, 12, 2))
    s[2, 1, 7, 0] = 5.0
    st = score_tensor(s, "ee")
    assert st.scores.shape == s.shape
    assert np.unravel_index(np.argmax(st.scores), s.shape) == (2, 1, 7, 0)


def test_score_tensor_matches_fiber_functions():
    rng = np.random.default_rng(4)
    s = rng.standard_normal((3, 2, 15, 2))
    st_ee = score_tensor(s, "ee")
    st_lof = score_tensor(s, "lof", k=4)
    for i in range(3):
        for j in range(2):
            for l in range(2):
                fiber = s[i, j, :, l]
                np.testing.assert_array_equal(st_ee.scores[i, j, :, l], ee_fiber_scores(fiber))
                np.testing.assert_array_equal(st_lof.scores[i, j, :, l], lof_fiber_scores(fiber, k=4))


def test_score_tensor_concurrent_equals_sequential():
    rng = np.random.default_rng(5)
    s = rng.standard_normal((4, 2, 10, 3))
    st = score_tensor(s, "ee")

    fibers = np.moveaxis(s, 2, -1).reshape(-1, 10)
    with ThreadPoolExecutor(max_workers=4) as pool:
        rows = list(pool.map(ee_fiber_scores, fibers))
    concurrent = np.moveaxis(np.array(rows).reshape(4, 2, 3, 10), -1, 2)
    np.testing.assert_array_equal(concurrent, st.scores)


def test_score_tensor_method_validation():
    with pytest.raises(ValueError, match="unknown scoring"):
        score_tensor(np.zeros((2, 2, 5, 2)), "svm")


def test_score_tensor_propagates_fiber_errors():
    with pytest.raises(ValueError, match="fiber"):
        score_tensor(np.zeros((2, 2, 3, 2)), "ee")


def test_top_k_all():
    st = ScoreTensor(scores=np.random.default_rng(6).random((3, 4)), method="ee")
    assert top_k_labels(st, 100.0).all()


def test_top_k_exact_count_and_selection():
    scores = np.array([[0.9, 0.1], [0.5, 0.7]])
    st = ScoreTensor(scores=scores, method="ee")
    mask = top_k_labels(st, 75.0)  # ceil(0.75*4) = 3
    assert mask.sum() == 3
    assert mask[0, 0] and mask[1, 1] and mask[1, 0] and not mask[0, 1]


def test_top_k_tie_break_lexicographic():
    scores = np.array([[1.0, 1.0], [1.0, 0.0]])
    st = ScoreTensor(scores=scores, method="ee")
    mask = top_k_labels(st, 50.0)  # 2 entries out of 4
    assert mask[0, 0] and mask[0, 1] and not mask[1, 0]


def test_top_k_counts_exact_for_every_k():
    from math import ceil

    rng = np.random.default_rng(7)
    st = ScoreTensor(scores=rng.random((5, 7)), method="ee")
    for k in (0.5, 1, 3, 10, 37.5, 50, 99, 100):
        assert top_k_labels(st, k).sum() == ceil(k / 100 * 35)


def test_top_k_range_validation():
    st = ScoreTensor(scores=np.zeros((2, 2)), method="ee")
    for bad in (0.0, -1.0, 100.1):
        with pytest.raises(ValueError, match="k_percent"):
            top_k_labels(st, bad)
