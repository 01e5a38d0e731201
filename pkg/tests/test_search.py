import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockl0.core import BlockPartition, RegressionData, score
from blockl0.errors import EmptyCollection, RankDeficient, TooLarge
from blockl0.search import (
    ModelLedger,
    SearchConfig,
    enumerate_select,
    forward_select,
    inclusion_probabilities,
    mcmc_search,
    search,
)
from oracles import brute_force_argmax, orthonormal_design, product_bernoulli_inclusion


def _instance(seed, n=50, p=8, corr=0.5):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, p))
    X = math.sqrt(1 - corr) * Z + math.sqrt(corr) * rng.standard_normal((n, 1))
    beta = np.zeros(p)
    beta[: p // 3] = rng.uniform(0.3, 1.0, p // 3)
    y = X @ beta + rng.standard_normal(n)
    return RegressionData(X, y)


def test_single_variable_universe():
    rng = np.random.default_rng(0)
    X = orthonormal_design(20, 1, rng)
    part = BlockPartition.single(1)
    for scale, expect in ((3.0, (0,)), (0.0, ())):
        y = scale * X[:, 0] + 0.1 * rng.standard_normal(20)
        bt = X[:, 0] @ y / 20
        kap = 2.0
        assert (20 * bt**2 / 2 - kap > 0) == bool(expect)
        assert enumerate_select(RegressionData(X, y), part, [kap])[0] == expect


@pytest.mark.parametrize("seed", range(8))
def test_enumeration_matches_projection_oracle(seed):
    d = _instance(seed, n=30, p=6)
    labels = np.array([0, 0, 1, 1, 1, 0])
    kap = np.array([1.0, 2.5])
    model, ledger = enumerate_select(d, BlockPartition(labels), kap)
    ref, ref_c = brute_force_argmax(d.X, d.y, labels, kap)
    assert model == ref
    assert ledger.best[1] == pytest.approx(ref_c, abs=1e-8)
    assert len(ledger) == 2**6


def test_infinite_penalty_selects_empty():
    d = _instance(1)
    part = BlockPartition.from_sizes([4, 4])
    assert enumerate_select(d, part, [1e9, 1e9])[0] == ()
    for init in ("empty", "forward"):
        m, _ = mcmc_search(d, part, [1e9, 1e9], SearchConfig(500, seed=1, init=init))
        assert m == ()


def test_enumeration_limits():
    d = _instance(0, n=40, p=8)
    with pytest.raises(TooLarge):
        enumerate_select(d, BlockPartition.single(8), [1.0], p_limit=5)
    with pytest.raises(TooLarge):
        enumerate_select(d, BlockPartition.single(8), [1.0], budget=100)
    _, led = enumerate_select(d, BlockPartition.single(8), [1.0], max_model_size=2)
    assert len(led) == 1 + 8 + 28


def test_ledger_best_and_rescore():
    part = BlockPartition.from_sizes([2, 2])
    led = ModelLedger(part, [1.0, 2.0])
    with pytest.raises(EmptyCollection):
        led.best
    led.add((), 0.0)
    led.add((0,), 4.0)
    led.add((2,), 6.0)
    assert led.best == ((0,), 1.0)
    assert not led.add((0,), 100.0)
    # tie: (0,) and (2,) both score 1.0 -> lexicographically smaller wins
    assert led.argmax()[0] == (0,)
    re = led.rescore([3.0, 0.0])
    assert re.best[0] == (2,)
    np.testing.assert_allclose(re.scores(), [0.0, -1.0, 3.0])
    for i, m in enumerate(led.models):
        assert led.scores()[i] <= led.best[1] + 1e-12


def test_ledger_csv(tmp_path):
    part = BlockPartition.single(3)
    led = ModelLedger(part, [1.0])
    led.add((), 0.0)
    led.add((0, 2), 8.0)
    path = tmp_path / "ledger.csv"
    led.to_csv(path)
    rows = list(csv.DictReader(open(path)))
    assert [r["model"] for r in rows] == ["", "1;3"]
    assert float(rows[1]["C"]) == pytest.approx(2.0)
    assert sum(float(r["NC"]) for r in rows) == pytest.approx(1.0)


def test_mcmc_deterministic():
    d = _instance(3, n=60, p=25)
    part = BlockPartition.from_sizes([10, 15])
    cfg = SearchConfig(2000, seed=42)
    m1, l1 = mcmc_search(d, part, [2.0, 3.0], cfg)
    m2, l2 = mcmc_search(d, part, [2.0, 3.0], cfg)
    assert m1 == m2 and l1.models == l2.models
    np.testing.assert_array_equal(l1.fitted, l2.fitted)


def test_mcmc_ledger_scores_match_core():
    d = _instance(4, n=60, p=15)
    part = BlockPartition.from_sizes([5, 10])
    kap = [1.5, 2.5]
    _, led = mcmc_search(d, part, kap, SearchConfig(500, seed=3, init="empty"))
    for m, c in list(zip(led.models, led.scores()))[:50]:
        assert c == pytest.approx(score(d, m, part, kap), abs=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_mcmc_finds_enumeration_argmax(seed):
    d = _instance(seed, n=80, p=8)
    part = BlockPartition.from_sizes([4, 4])
    kap = [math.log(8) + 0.5 * math.log(80)] * 2
    ref, _ = enumerate_select(d, part, kap)
    got, _ = mcmc_search(d, part, kap, SearchConfig(5000, seed=seed, init="empty"))
    assert got == ref


def test_rank_deficient_proposals_rejected():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((30, 6))
    X[:, 5] = X[:, 0]
    d = RegressionData(X, X[:, 0] + rng.standard_normal(30))
    part = BlockPartition.single(6)
    _, led = mcmc_search(d, part, [0.5], SearchConfig(2000, seed=0))
    assert all(not (0 in m and 5 in m) for m in led.models)
    with pytest.raises(RankDeficient):
        mcmc_search(d, part, [0.5], SearchConfig(10, init="full"))


def test_forward_select_orthonormal_is_threshold():
    rng = np.random.default_rng(5)
    n, p = 40, 10
    X = orthonormal_design(n, p, rng)
    y = X @ np.r_[np.full(3, 0.6), np.zeros(7)] + rng.standard_normal(n)
    part = BlockPartition.from_sizes([5, 5])
    kap = np.array([1.0, 3.0])
    bt = X.T @ y / n
    expect = tuple(i for i in range(p) if n * bt[i] ** 2 / 2 > kap[part.labels[i]])
    assert forward_select(RegressionData(X, y), part, kap) == expect


def test_inclusion_single_and_symmetric():
    part = BlockPartition.from_sizes([2, 2])
    led = ModelLedger(part, [0.0, 0.0])
    led.add((0, 3), 2.0)
    ip = inclusion_probabilities(led)
    np.testing.assert_allclose(ip.values, [1, 0, 0, 1])
    np.testing.assert_allclose(ip.shat, [1, 1])
    led = ModelLedger(part, [0.0, 0.0])
    led.add((0,), 2.0)
    led.add((1,), 2.0)
    ip = inclusion_probabilities(led)
    np.testing.assert_allclose(ip.values[:2], [0.5, 0.5])
    with pytest.raises(EmptyCollection):
        inclusion_probabilities(ModelLedger(part, [0.0, 0.0]))


@given(st.integers(0, 10_000), st.floats(0.0, 4.0), st.floats(0.0, 4.0))
@settings(max_examples=50)
def test_inclusion_product_bernoulli(seed, k1, k2):
    rng = np.random.default_rng(seed)
    n = 30
    X = orthonormal_design(n, 3, rng)
    y = X @ rng.uniform(-0.5, 0.5, 3) + rng.standard_normal(n)
    part = BlockPartition(np.array([0, 1, 1]))
    _, led = enumerate_select(RegressionData(X, y), part, [k1, k2])
    ip = inclusion_probabilities(led)
    bt = X.T @ y / n
    ref = product_bernoulli_inclusion(bt, n, np.array([k1, k2])[part.labels])
    np.testing.assert_allclose(ip.values, ref, rtol=1e-9, atol=1e-12)
    assert np.all(ip.shat <= part.sizes + 1e-12) and np.all(ip.shat >= 0)


@pytest.mark.parametrize("seed", range(5))
def test_exchangeability(seed):
    d = _instance(seed, n=40, p=7)
    rng = np.random.default_rng(seed)
    labels = np.array([0, 0, 0, 1, 1, 1, 1])
    kap = np.array([1.2, 2.2])
    perm = rng.permutation(7)
    m, _ = enumerate_select(d, BlockPartition(labels), kap)
    dp = RegressionData(d.X[:, perm], d.y)
    mp, _ = enumerate_select(dp, BlockPartition(labels[perm]), kap)
    assert tuple(sorted(int(perm[i]) for i in mp)) == m


def test_search_dispatch():
    d = _instance(0, n=40, p=6)
    part = BlockPartition.single(6)
    _, led = search(d, part, [1.0])
    assert len(led) == 64
    _, led = search(d, part, [1.0], SearchConfig(200), p_limit=3)
    assert len(led) < 64


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(iterations=0)
    with pytest.raises(ValueError):
        SearchConfig(swap_probability=1.5)
