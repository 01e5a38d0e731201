import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blockl0.core import (
    BlockPartition,
    RegressionData,
    argmax_model,
    as_model,
    delta_penalty,
    fit_mle,
    likelihood_gap,
    noncentrality,
    normalized_scores,
    score,
    softmax_scores,
)
from blockl0.errors import DimensionMismatch, EmptyCollection, NotNested, RankDeficient
from oracles import fitted_norm_lstsq, orthonormal_design, projection


def _toy():
    # X'X = 4 I, x1'y / 4 = 1, x2'y / 4 = 0.5
    X = np.array([[1.0, 1], [1, -1], [1, 1], [1, -1]])
    y = np.array([1.5, 0.5, 1.5, 0.5])
    return RegressionData(X, y)


def test_partition_basics():
    part = BlockPartition.from_sizes([2, 3])
    assert part.p == 5 and part.b == 2
    assert part.sizes.tolist() == [2, 3]
    assert part.counts((0, 3, 4)).tolist() == [1, 2]
    assert part.members(1).tolist() == [2, 3, 4]
    with pytest.raises(DimensionMismatch):
        BlockPartition(np.array([0, 2, 2]))  # block 1 empty
    with pytest.raises(DimensionMismatch):
        BlockPartition(np.array([0.5, 1.0]))


def test_as_model_validation():
    assert as_model([3, 1]) == (1, 3)
    with pytest.raises(DimensionMismatch):
        as_model([1, 1])
    with pytest.raises(DimensionMismatch):
        as_model([5], p=5)


def test_data_validation():
    with pytest.raises(DimensionMismatch):
        RegressionData(np.ones((3, 2)), np.ones(4))
    with pytest.raises(ValueError):
        RegressionData(np.ones((3, 2)), np.ones(3), sigma=0)


def test_fit_empty_and_toy():
    d = _toy()
    e = fit_mle(d, ())
    assert e.beta.size == 0 and e.fitted_norm_sq == 0.0
    est = fit_mle(d, (0, 1))
    np.testing.assert_allclose(est.beta, [1.0, 0.5])
    assert est.fitted_norm_sq == pytest.approx(5.0)


def test_fit_orthonormal_single():
    rng = np.random.default_rng(0)
    X = orthonormal_design(30, 4, rng)
    y = rng.standard_normal(30)
    d = RegressionData(X, y)
    est = fit_mle(d, (2,))
    assert est.beta[0] == pytest.approx(X[:, 2] @ y / 30)
    assert est.fitted_norm_sq == pytest.approx((X[:, 2] @ y) ** 2 / 30)


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_fit_matches_lstsq(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((15, 6))
    y = rng.standard_normal(15)
    model = tuple(sorted(rng.choice(6, size=k, replace=False).tolist()))
    got = fit_mle(RegressionData(X, y), model).fitted_norm_sq
    assert got == pytest.approx(fitted_norm_lstsq(X, y, model), rel=1e-10)


def test_rank_deficient():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((10, 3))
    X[:, 2] = X[:, 0]
    with pytest.raises(RankDeficient):
        fit_mle(RegressionData(X, rng.standard_normal(10)), (0, 2))
    # the ridge variant always solves
    fit_mle(RegressionData(X, rng.standard_normal(10)), (0, 2), variant="zellner")


def test_zellner_matches_direct_ridge_and_plain_limit():
    rng = np.random.default_rng(2)
    n = 5000
    X = rng.standard_normal((n, 3))
    y = X @ [1.0, -1.0, 0.5] + rng.standard_normal(n)
    d = RegressionData(X, y)
    z = fit_mle(d, (0, 1, 2), "zellner")
    beta = np.linalg.solve(X.T @ X + np.eye(3) / n, X.T @ y)
    np.testing.assert_allclose(z.beta, beta, rtol=1e-10)
    pl = fit_mle(d, (0, 1, 2), "plain")
    assert abs(z.fitted_norm_sq - pl.fitted_norm_sq) / pl.fitted_norm_sq < 1e-6


def test_score_examples():
    d = _toy()
    one = BlockPartition.single(2)
    assert score(d, (), one, [1.0]) == 0.0
    assert score(d, (0,), one, [1.0]) == pytest.approx(1.0)
    assert score(d, (0, 1), one, [1.0]) == pytest.approx(0.5)
    models = [(), (0,), (1,), (0, 1)]
    s = [score(d, m, one, [1.0]) for m in models]
    assert argmax_model(models, s)[0] == (0,)
    two = BlockPartition(np.array([0, 1]))
    for m in models:
        assert score(d, m, two, [1.0, 1.0]) == pytest.approx(score(d, m, one, [1.0]))


@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_score_sigma_scaling(seed, c):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((12, 4))
    y = rng.standard_normal(12)
    part = BlockPartition.from_sizes([2, 2])
    for m in [(), (0,), (1, 3), (0, 1, 2, 3)]:
        a = score(RegressionData(X, y, 1.3), m, part, [0.7, 1.1])
        b = score(RegressionData(X, c * y, 1.3 * c), m, part, [0.7, 1.1])
        assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


def test_orthogonal_decoupling():
    rng = np.random.default_rng(3)
    n = 40
    X = orthonormal_design(n, 5, rng)
    y = rng.standard_normal(n)
    d = RegressionData(X, y)
    part = BlockPartition.from_sizes([2, 3])
    kap = [0.8, 1.7]
    bt = X.T @ y / n
    M = (0, 3)
    for i in (1, 2, 4):
        gain = score(d, tuple(sorted(M + (i,))), part, kap) - score(d, M, part, kap)
        assert gain == pytest.approx(n * bt[i] ** 2 / 2 - kap[part.labels[i]])


def test_normalized_scores_examples():
    assert normalized_scores([((1,), 3.0)])[0][1] == 1.0
    nc = normalized_scores([((1,), 2.0), ((2,), 2.0)])
    assert [v for _, v in nc] == [0.5, 0.5]
    c = np.array([1.0, 0.5, 0.0, -1.0])
    v = softmax_scores(c)
    ref = np.exp(c) / np.exp(c).sum()
    np.testing.assert_allclose(v, ref, rtol=1e-14)
    assert np.argmax(v) == 0
    with pytest.raises(EmptyCollection):
        normalized_scores([])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
def test_softmax_properties(c):
    v = softmax_scores(c)
    assert abs(v.sum() - 1.0) <= 1e-12
    assert np.all(v >= 0)
    # order preserving: the top score always carries the largest weight
    assert v[int(np.argmax(c))] == v.max()
    order = np.argsort(c, kind="stable")
    assert np.all(np.diff(v[order]) >= 0)


def test_delta_penalty_examples():
    part = BlockPartition.from_sizes([3, 3])
    assert delta_penalty((0, 4), (0, 4), part, [2.0, 3.0]) == 0
    assert delta_penalty((0, 1, 4), (0, 4), part, [2.0, 3.0]) == 2.0
    assert delta_penalty((0, 1), (3,), part, [2.0, 3.0]) == pytest.approx(1.0)


def test_likelihood_gap_examples():
    rng = np.random.default_rng(4)
    n = 20
    X = orthonormal_design(n, 3, rng)
    y = rng.standard_normal(n)
    d = RegressionData(X, y)
    assert likelihood_gap(d, (0, 1), (0, 1)) == pytest.approx(0.0, abs=1e-12)
    bt = X.T @ y / n
    assert likelihood_gap(d, (0, 1, 2), ()) == pytest.approx(n * np.sum(bt**2))
    X = rng.standard_normal((20, 5))
    d = RegressionData(X, y)
    ref = y @ (projection(X[:, [0, 2, 4]]) - projection(X[:, [2]])) @ y
    assert likelihood_gap(d, (0, 2, 4), (2,)) == pytest.approx(ref)


@given(st.integers(0, 10_000))
def test_likelihood_gap_nested_nonnegative(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((10, 5))
    y = rng.standard_normal(10)
    d = RegressionData(X, y)
    Q = tuple(sorted(rng.choice(5, size=3, replace=False).tolist()))
    M = Q[:1]
    assert likelihood_gap(d, Q, M) >= -1e-10


def test_noncentrality_examples():
    rng = np.random.default_rng(5)
    n = 30
    X = orthonormal_design(n, 6, rng)
    d = RegressionData(X, rng.standard_normal(n))
    beta = np.array([1.0, 0.0, 0.5, 0.0, 0.0, 2.0])
    assert noncentrality(d, (1, 3), (), beta) == 0.0
    assert noncentrality(d, (0, 2), (), beta) == pytest.approx(n * 1.25)
    X = rng.standard_normal((n, 6))
    d = RegressionData(X, rng.standard_normal(n), sigma=2.0)
    v = X[:, [0, 5]] @ beta[[0, 5]]
    R = np.eye(n) - projection(X[:, [2, 3]])
    assert noncentrality(d, (0, 2, 3, 5), (2, 3), beta) == pytest.approx(v @ R @ v / 4.0)
    with pytest.raises(NotNested):
        noncentrality(d, (0,), (1,), beta)


def test_argmax_tie_break():
    models = [(2,), (0, 1), (1,)]
    m, s = argmax_model(models, [1.0, 1.0, 0.5])
    assert m == (0, 1) and s == 1.0
    assert math.isclose(argmax_model([(), (0,)], [0.0, -1.0])[1], 0.0)


def test_argmax_tie_band_does_not_scale_with_score():
    big = 6e12
    m, _ = argmax_model([(0, 1), (1,)], [big - 5.0, big])
    assert m == (1,)
    m, _ = argmax_model([(0, 1), (1,)], [big, big])
    assert m == (0, 1)
