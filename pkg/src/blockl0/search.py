"""Model-space search: exhaustive enumeration, Metropolis search over inclusion
vectors, the ledger of scored models and posterior-style inclusion
probabilities.

The ledger stores each model's fitted norm ``||X_M beta_M||^2 / sigma^2``,
which does not depend on the penalties, so a ledger built under one set of
penalties can be rescored under another without refitting.
"""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from . import _kernels
from .core import (BlockPartition, Model, RegressionData, argmax_model, check_penalties,
                   softmax_scores, tie_tolerance)
from .errors import DimensionMismatch, EmptyCollection, RankDeficient, TooLarge

DEFAULT_BUDGET = 2**20
DEFAULT_P_LIMIT = 20
INIT_CHOICES = ("empty", "full", "forward")
FORWARD_RANK_TOL = 1e-6


def size_penalty_array(p: int, size_penalty) -> np.ndarray:
    """Penalty per model size 0..p; ``size_penalty`` is None, an array or a callable."""
    if size_penalty is None:
        return np.zeros(p + 1)
    if callable(size_penalty):
        return np.array([size_penalty(k) for k in range(p + 1)], dtype=float)
    arr = np.asarray(size_penalty, dtype=float)
    if arr.shape != (p + 1,):
        raise DimensionMismatch("size penalty needs p + 1 entries")
    return arr


class ModelLedger:
    """Deduplicated collection of scored models.

    ``scores`` are ``C(M) = fitted/2 - sum_j kappa_j |M_j| - size_pen[|M|]``.
    """

    def __init__(self, partition: BlockPartition, kappas, size_penalty=None):
        self.partition = partition
        self.kappas = check_penalties(kappas, partition.b)
        self.size_pen = size_penalty_array(partition.p, size_penalty)
        self._index: dict[Model, int] = {}
        self.models: list[Model] = []
        self._fitted: list[float] = []
        self._counts: list[np.ndarray] = []
        self._best: Model | None = None
        self._best_score = -np.inf

    def __len__(self):
        return len(self.models)

    def __contains__(self, model):
        return tuple(model) in self._index

    def _score_one(self, counts, fitted, size):
        return 0.5 * fitted - float(counts @ self.kappas) - self.size_pen[size]

    def add(self, model: Model, fitted: float) -> bool:
        """Insert a model with its fitted norm; returns False if already present."""
        if model in self._index:
            return False
        counts = self.partition.counts(model)
        self._index[model] = len(self.models)
        self.models.append(model)
        self._fitted.append(float(fitted))
        self._counts.append(counts)
        c = self._score_one(counts, fitted, len(model))
        if self._best is None:
            self._best, self._best_score = model, c
            return True
        tol = tie_tolerance(self._best_score)
        if c > self._best_score + tol:
            self._best, self._best_score = model, c
        elif c >= self._best_score - tol and model < self._best:
            self._best, self._best_score = model, max(c, self._best_score)
        return True

    @property
    def fitted(self) -> np.ndarray:
        return np.asarray(self._fitted)

    @property
    def counts(self) -> np.ndarray:
        if not self._counts:
            return np.zeros((0, self.partition.b), dtype=np.int64)
        return np.vstack(self._counts)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(m) for m in self.models], dtype=np.int64)

    def scores(self, kappas=None, size_penalty=None) -> np.ndarray:
        """Scores of every entry, optionally under different penalties."""
        kap = self.kappas if kappas is None else check_penalties(kappas, self.partition.b)
        sp = self.size_pen if size_penalty is None else size_penalty_array(self.partition.p, size_penalty)
        return 0.5 * self.fitted - self.counts @ kap - sp[self.sizes]

    @property
    def best(self) -> tuple[Model, float]:
        if not self.models:
            raise EmptyCollection("ledger is empty")
        return self._best, self._best_score

    def argmax(self, kappas=None, size_penalty=None) -> tuple[Model, float]:
        return argmax_model(self.models, self.scores(kappas, size_penalty))

    def normalized(self, kappas=None, size_penalty=None) -> np.ndarray:
        return softmax_scores(self.scores(kappas, size_penalty))

    def rescore(self, kappas, size_penalty=None) -> "ModelLedger":
        """Copy of the ledger under new penalties; fitted norms are reused."""
        new = ModelLedger(self.partition, kappas, size_penalty)
        for m, f in zip(self.models, self._fitted):
            new.add(m, f)
        return new

    def to_csv(self, path, one_based: bool = True):
        """Columns ``model`` (semicolon-joined indices), ``C``, ``NC``."""
        c = self.scores()
        nc = softmax_scores(c)
        off = 1 if one_based else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["model", "C", "NC"])
            for m, ci, ni in zip(self.models, c, nc):
                w.writerow([";".join(str(i + off) for i in m), repr(float(ci)), repr(float(ni))])


@dataclass
class SearchConfig:
    iterations: int = 10_000
    seed: int = 0
    init: str | Sequence[int] = "forward"
    swap_probability: float = 0.5
    max_model_size: int | None = None

    def __post_init__(self):
        if int(self.iterations) < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.swap_probability <= 1.0:
            raise ValueError("swap_probability must lie in [0, 1]")
        if not isinstance(self.init, str):
            self.init = tuple(sorted(int(i) for i in self.init))
        elif self.init not in INIT_CHOICES:
            raise ValueError(f"init must be one of {INIT_CHOICES} or an index list")


@dataclass
class InclusionProbs:
    values: np.ndarray
    shat: np.ndarray


def _ridge(data: RegressionData, variant: str) -> float:
    if variant == "plain":
        return 0.0
    if variant == "zellner":
        return 1.0 / data.n
    raise ValueError(f"unknown variant {variant!r}")


def _check(data: RegressionData, partition: BlockPartition):
    if partition.p != data.p:
        raise DimensionMismatch(f"partition has p={partition.p}, design has p={data.p}")


def enumerate_masks(p: int, max_model_size: int | None = None) -> np.ndarray:
    masks = np.arange(2**p, dtype=np.uint64)
    if max_model_size is not None and max_model_size < p:
        bits = ((masks[:, None] >> np.arange(p, dtype=np.uint64)) & np.uint64(1)).sum(axis=1)
        masks = masks[bits <= max_model_size]
    return masks


def enumerate_select(data: RegressionData, partition: BlockPartition, kappas,
                     p_limit: int = DEFAULT_P_LIMIT, max_model_size: int | None = None,
                     budget: int = DEFAULT_BUDGET, size_penalty=None,
                     variant: str = "plain") -> tuple[Model, ModelLedger]:
    """Exact argmax of C over every admissible subset (size-capped if requested)."""
    _check(data, partition)
    p = data.p
    if p > p_limit:
        raise TooLarge(f"p={p} exceeds the enumeration limit {p_limit}")
    if p > 62:
        raise TooLarge("enumeration needs p <= 62")
    cap = max_model_size if max_model_size is not None else p
    count = sum(comb(p, k) for k in range(min(cap, p) + 1))
    if count > budget:
        raise TooLarge(f"{count} models exceed the enumeration budget {budget}")
    masks = enumerate_masks(p, max_model_size)
    fitted = _kernels.fitted_norms(data.gram, data.xty, masks, _ridge(data, variant))
    ledger = ModelLedger(partition, kappas, size_penalty)
    for m, f in zip(masks, fitted):
        if np.isnan(f):
            continue
        ledger.add(_mask_to_model(int(m)), f)
    return ledger.argmax()[0], ledger


def _mask_to_model(m: int) -> Model:
    out = []
    i = 0
    while m:
        if m & 1:
            out.append(i)
        m >>= 1
        i += 1
    return tuple(out)


def mcmc_search(data: RegressionData, partition: BlockPartition, kappas,
                cfg: SearchConfig | None = None, size_penalty=None,
                variant: str = "plain") -> tuple[Model, ModelLedger]:
    """Metropolis search with add/delete flips and swaps.

    Every proposal that is admissible (full rank, within the size cap) is
    scored and recorded in the ledger together with the visited states.
    Returns the best model in the ledger.
    """
    _check(data, partition)
    cfg = cfg or SearchConfig()
    p = data.p
    kap = check_penalties(kappas, partition.b)
    sp = size_penalty_array(p, size_penalty)
    max_size = min(p, data.n) if cfg.max_model_size is None else min(p, data.n, cfg.max_model_size)

    init = np.zeros(p, dtype=np.uint8)
    if cfg.init == "full":
        init[:] = 1
    elif cfg.init == "forward":
        init[list(forward_select(data, partition, kap, sp, max_size, variant))] = 1
    elif cfg.init != "empty":
        if cfg.init and (cfg.init[0] < 0 or cfg.init[-1] >= p):
            raise DimensionMismatch("initial model out of range")
        init[list(cfg.init)] = 1

    rng = np.random.default_rng(cfg.seed)
    u = rng.random((int(cfg.iterations), 4))
    adds, dels, fits, acc, f0 = _kernels.mcmc_chain(
        data.gram, data.xty, partition.labels, kap, sp, init, u,
        float(cfg.swap_probability), _ridge(data, variant), int(max_size),
    )
    if np.isnan(f0):
        raise RankDeficient("initial model is rank deficient")

    ledger = ModelLedger(partition, kap, sp)
    cur = [int(i) for i in np.flatnonzero(init)]
    ledger.add(tuple(cur), f0)
    for a, d, f, ok in zip(adds.tolist(), dels.tolist(), fits.tolist(), acc.tolist()):
        if f != f:  # NaN: inadmissible proposal
            continue
        prop = cur.copy()
        if d >= 0:
            prop.remove(d)
        if a >= 0:
            bisect.insort(prop, a)
        ledger.add(tuple(prop), f)
        if ok:
            cur = prop
    return ledger.best[0], ledger


def forward_select(data: RegressionData, partition: BlockPartition, kappas,
                   size_penalty=None, max_size: int | None = None,
                   variant: str = "plain") -> Model:
    """Greedy forward path under C: add the variable with the largest score
    gain while that gain is positive.  Used as the chain's starting state."""
    p = data.p
    kap = check_penalties(kappas, partition.b)
    sp = size_penalty_array(p, size_penalty)
    cost = kap[partition.labels]
    max_size = min(p, data.n) if max_size is None else min(max_size, p, data.n)
    G, b = data.gram, data.xty
    ridge = _ridge(data, variant)
    diag = np.diag(G) + ridge
    model: list[int] = []
    L = np.zeros((0, 0))
    W = np.zeros((0, p))   # L^-1 G[M, :]
    v = np.zeros(0)        # L^-1 b[M]
    free = np.ones(p, dtype=bool)
    while len(model) < max_size:
        resid = diag - np.einsum("ij,ij->j", W, W)
        cross = b - W.T @ v
        ok = free & (resid > (FORWARD_RANK_TOL**2) * np.diag(G))
        if not ok.any():
            break
        gain = np.full(p, -np.inf)
        k = len(model)
        gain[ok] = 0.5 * cross[ok] ** 2 / resid[ok] - cost[ok] - (sp[k + 1] - sp[k])
        j = int(np.argmax(gain))
        if not gain[j] > 0:
            break
        # extend the Cholesky factor of G[M, M] by column j
        w = W[:, j]
        ljj = np.sqrt(resid[j])
        Lnew = np.zeros((k + 1, k + 1))
        Lnew[:k, :k] = L
        Lnew[k, :k] = w
        Lnew[k, k] = ljj
        L = Lnew
        row = (G[j, :] - w @ W) / ljj
        row[j] = ljj
        W = np.vstack([W, row])
        v = np.append(v, (b[j] - w @ v) / ljj)
        model.append(j)
        free[j] = False
    return tuple(sorted(model))


def inclusion_probabilities(ledger: ModelLedger, partition: BlockPartition | None = None,
                            kappas=None) -> InclusionProbs:
    """Marginal inclusion sum_{M containing i} NC(M) over the ledger, and block sums."""
    if len(ledger) == 0:
        raise EmptyCollection("ledger is empty")
    partition = partition or ledger.partition
    nc = ledger.normalized(kappas)
    vals = np.zeros(partition.p)
    for m, w in zip(ledger.models, nc):
        if m and w > 0:
            vals[list(m)] += w
    vals = np.clip(vals, 0.0, 1.0)
    shat = np.bincount(partition.labels, weights=vals, minlength=partition.b)
    return InclusionProbs(vals, shat)


def search(data: RegressionData, partition: BlockPartition, kappas,
           cfg: SearchConfig | None = None, p_limit: int = DEFAULT_P_LIMIT,
           size_penalty=None, variant: str = "plain") -> tuple[Model, ModelLedger]:
    """Enumerate when ``p <= p_limit``, otherwise run the Metropolis search."""
    cfg = cfg or SearchConfig()
    if data.p <= p_limit:
        return enumerate_select(data, partition, kappas, p_limit=p_limit,
                                max_model_size=cfg.max_model_size,
                                size_penalty=size_penalty, variant=variant)
    return mcmc_search(data, partition, kappas, cfg, size_penalty, variant)
