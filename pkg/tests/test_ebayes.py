import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blockl0.core import BlockPartition, RegressionData, score
from blockl0.ebayes import (
    VARIANTS,
    algorithm1,
    algorithm1_all,
    clamp_shat,
    ebic_penalty,
    ebic_select,
    penalty_to_prior,
    prior_to_penalty,
    run_step1,
    step1_penalty,
    step2_penalties,
)
from blockl0.errors import OutOfRange
from blockl0.search import SearchConfig


def _data(seed, n=100, p=10, corr=0.5, active=(0, 1, 5), value=0.8):
    rng = np.random.default_rng(seed)
    X = math.sqrt(1 - corr) * rng.standard_normal((n, p)) + math.sqrt(corr) * rng.standard_normal((n, 1))
    beta = np.zeros(p)
    beta[list(active)] = value
    return RegressionData(X, X @ beta + rng.standard_normal(n))


def test_prior_penalty_examples():
    assert prior_to_penalty(0.5, 100) == pytest.approx(0.5 * math.log(100))
    assert prior_to_penalty(1 / 51, 100) == pytest.approx(step1_penalty(50, 100)[0])
    assert prior_to_penalty(0.1, 100) == pytest.approx(4.4998, abs=5e-5)
    with pytest.raises(OutOfRange):
        prior_to_penalty(1.0, 10)


@given(st.floats(1e-6, 1 - 1e-6), st.floats(1, 1e6))
def test_prior_penalty_roundtrip(theta, n):
    assert penalty_to_prior(prior_to_penalty(theta, n), n) == pytest.approx(theta, rel=1e-8)


def test_step1_penalty_examples():
    assert step1_penalty(1, 1)[0] == 0.0
    assert step1_penalty(50, 100)[0] == pytest.approx(6.2146, abs=5e-5)
    assert step1_penalty(50, 100, b=3).tolist() == [step1_penalty(50, 100)[0]] * 3


def test_step2_examples():
    eb = step2_penalties([10.0], [100], 100, "EB")[0]
    a = step2_penalties([10.0], [100], 100, "A")[0]
    assert eb == pytest.approx(4.4998, abs=5e-5)
    assert a == pytest.approx(6.8024, abs=5e-5)
    assert step2_penalties([5.0], [10], 100, "EB")[0] == pytest.approx(0.5 * math.log(100))
    with pytest.raises(OutOfRange):
        step2_penalties([0.0], [10], 100, "EB")


@given(st.integers(2, 10_000), st.floats(0.01, 0.99), st.floats(2, 1e5))
def test_variant_identity(pj, frac, n):
    s = frac * pj
    eb = step2_penalties([s], [pj], n, "EB")[0]
    a = step2_penalties([s], [pj], n, "A")[0]
    if eb > 0:  # both unfloored
        assert a - eb == pytest.approx(math.log(s), abs=1e-9)


def test_clamp():
    c, flag = clamp_shat([0.0, 3.0, 10.0], [5, 5, 10])
    np.testing.assert_allclose(c, [0.5, 3.0, 9.5])
    assert flag.tolist() == [True, False, True]


def test_ebic_examples():
    eta = ebic_penalty(100, 400)
    # ln C(100, 5) = ln 75287520 = 18.1368, so eta = 21.1326
    assert eta[5] == pytest.approx(math.log(math.comb(100, 5)) + 0.5 * math.log(400), rel=1e-12)
    assert eta[5] == pytest.approx(21.1326, abs=5e-4)
    for k in range(101):
        assert eta[k] == pytest.approx(math.log(math.comb(100, k)) + 0.5 * math.log(400), rel=1e-10)
    assert eta[1] - eta[0] == pytest.approx(math.log(100))
    flat = ebic_penalty(100, 400, zeta=0.0)
    np.testing.assert_allclose(flat, 0.5 * math.log(400))
    bic = ebic_penalty(10, 100, zeta=0.0, per_variable_bic=True)
    np.testing.assert_allclose(bic, np.arange(11) * 0.5 * math.log(100))


def test_ebic_zero_zeta_selects_full_when_strong():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((100, 6))
    y = X @ np.full(6, 2.0) + rng.standard_normal(100)
    m, _ = ebic_select(RegressionData(X, y), zeta=0.0)
    assert m == tuple(range(6))


def test_ebic_matches_direct_scoring():
    d = _data(1, p=8)
    m, led = ebic_select(d, zeta=1.0)
    eta = ebic_penalty(8, d.n)
    part = BlockPartition.single(8)
    best = max(led.models, key=lambda M: score(d, M, part, [0.0]) - eta[len(M)])
    assert m == best


def test_ledger_reuse_exact():
    d = _data(2)
    part = BlockPartition.from_sizes([5, 5])
    res = algorithm1(d, part)
    led = res.step1.ledger
    c = led.scores(res.penalties)
    for M, ci in zip(led.models, c):
        assert ci == pytest.approx(score(d, M, part, res.penalties), abs=1e-10)
    assert res.selected == led.argmax(res.penalties)[0]


def test_penalty_monotonicity():
    d = _data(3)
    part = BlockPartition.from_sizes([5, 5])
    st1 = run_step1(d, part)
    led = st1.ledger
    sizes = [len(led.argmax([k, k])[0]) for k in np.linspace(0, 10, 21)]
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))


def test_single_block_pooled_identical():
    d = _data(4)
    part = BlockPartition.single(10)
    res = algorithm1_all(d, part)
    assert res["EB"].selected == res["EB_pooled"].selected
    np.testing.assert_allclose(res["EB"].penalties, res["EB_pooled"].penalties)
    assert res["A"].selected == res["A_pooled"].selected


def test_all_matches_individual_runs():
    d = _data(5)
    part = BlockPartition.from_sizes([5, 5])
    both = algorithm1_all(d, part)
    for v in VARIANTS:
        base, _, pooled = v.partition("_")
        single = algorithm1(d, part, variant=base, pooled=bool(pooled))
        assert single.selected == both[v].selected
        np.testing.assert_allclose(single.penalties, both[v].penalties)


def test_fresh_step2_flag_runs():
    d = _data(6, p=25)
    part = BlockPartition.from_sizes([10, 15])
    cfg = SearchConfig(1000, seed=1)
    r = algorithm1(d, part, cfg, fresh_step2=True)
    assert r.metadata["fresh_step2"] is True
    assert r.step1.exhaustive is False


def test_ebresult_json(tmp_path):
    d = _data(7)
    part = BlockPartition.from_sizes([5, 5])
    r = algorithm1(d, part, variant="A")
    path = tmp_path / "eb.json"
    r.to_json(path)
    obj = json.loads(path.read_text())
    assert obj["variant"] == "A"
    assert obj["selected"] == [i + 1 for i in r.selected]
    assert len(obj["shat"]) == 2 and len(obj["penalties"]) == 2
    assert obj["step1"]["exhaustive"] is True


def test_null_data_selects_empty():
    rng = np.random.default_rng(11)
    part = BlockPartition.from_sizes([10, 10])
    cfg = SearchConfig(2000, seed=0)
    empty = 0
    for _ in range(100):
        X = rng.standard_normal((200, 20))
        d = RegressionData(X, rng.standard_normal(200))
        empty += algorithm1(d, part, cfg, p_limit=12).selected == ()
    assert empty >= 90


def test_shat_bounds_and_sums():
    d = _data(8)
    part = BlockPartition.from_sizes([4, 6])
    r = algorithm1(d, part)
    assert np.all(r.shat >= 0) and np.all(r.shat <= part.sizes)
    np.testing.assert_allclose(r.step1.probs.shat.sum(), r.step1.probs.values.sum())
