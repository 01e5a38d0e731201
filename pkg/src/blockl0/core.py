"""Data containers and block-penalised scoring for Gaussian linear regression.

Models are plain sorted tuples of 0-based column indices.  Every score is
computed on the response rescaled by ``1/sigma`` so that the penalty scale
matches a unit noise variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionMismatch,
    EmptyCollection,
    NotNested,
    RankDeficient,
)

Model = tuple  # sorted tuple of int column indices

QR_RANK_TOL = 1e-8
# Scores closer than this are ties: an absolute floor plus a few ulps of |C|,
# so large standardised fits (tiny sigma) do not widen the tie band.
TIE_ABS = 1e-9
TIE_ULPS = 8


def tie_tolerance(top: float) -> float:
    return TIE_ABS + TIE_ULPS * np.finfo(float).eps * abs(top)


def as_model(indices: Iterable[int], p: int | None = None) -> Model:
    """Canonical form of a candidate support; validates range and uniqueness."""
    idx = sorted(int(i) for i in indices)
    if len(set(idx)) != len(idx):
        raise DimensionMismatch(f"duplicate indices in model {idx}")
    if idx and idx[0] < 0:
        raise DimensionMismatch("negative variable index")
    if p is not None and idx and idx[-1] >= p:
        raise DimensionMismatch(f"index {idx[-1]} out of range for p={p}")
    return tuple(idx)


@dataclass(frozen=True)
class BlockPartition:
    """Assignment of each of the p variables to one of b blocks (labels 0..b-1)."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 1 or lab.size == 0:
            raise DimensionMismatch("partition needs a non-empty 1-d label vector")
        if not np.issubdtype(lab.dtype, np.integer):
            if not np.all(lab == np.round(lab)):
                raise DimensionMismatch("block labels must be integers")
        lab = lab.astype(np.int64)
        b = int(lab.max()) + 1 if lab.size else 0
        if lab.min() < 0 or np.any(np.bincount(lab, minlength=b) == 0):
            raise DimensionMismatch("block labels must cover 0..b-1 with no empty block")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "BlockPartition":
        """Contiguous blocks: the first ``sizes[0]`` variables form block 0, etc."""
        return cls(np.repeat(np.arange(len(sizes)), np.asarray(sizes, dtype=int)))

    @classmethod
    def single(cls, p: int) -> "BlockPartition":
        return cls(np.zeros(p, dtype=np.int64))

    @property
    def p(self) -> int:
        return int(self.labels.size)

    @property
    def b(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.b)

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.labels == j)

    def counts(self, model: Sequence[int]) -> np.ndarray:
        """Per-block cardinalities |M_j|."""
        if len(model) == 0:
            return np.zeros(self.b, dtype=np.int64)
        return np.bincount(self.labels[np.asarray(model, dtype=np.intp)], minlength=self.b)

    def pooled(self) -> "BlockPartition":
        return BlockPartition.single(self.p)


def check_penalties(kappas, b: int) -> np.ndarray:
    kap = np.atleast_1d(np.asarray(kappas, dtype=float))
    if kap.shape != (b,):
        raise DimensionMismatch(f"expected {b} block penalties, got {kap.shape}")
    if not np.all(np.isfinite(kap)) or np.any(kap < 0):
        raise ValueError("penalties must be finite and non-negative")
    return kap


@dataclass
class RegressionData:
    """Design ``X`` (n x p), response ``y`` and known noise level ``sigma``."""

    X: np.ndarray
    y: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        self.X = np.ascontiguousarray(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.ndim != 2 or self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise DimensionMismatch("X must be a non-empty n x p matrix")
        if self.y.shape[0] != self.X.shape[0]:
            raise DimensionMismatch(
                f"y has length {self.y.shape[0]} but X has {self.X.shape[0]} rows"
            )
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("X and y must be finite")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @cached_property
    def z(self) -> np.ndarray:
        """Response on the unit-noise scale, y / sigma."""
        return self.y / self.sigma

    @cached_property
    def gram(self) -> np.ndarray:
        return np.ascontiguousarray(self.X.T @ self.X)

    @cached_property
    def xty(self) -> np.ndarray:
        """X' (y / sigma)."""
        return np.ascontiguousarray(self.X.T @ self.z)


@dataclass
class CoefEstimate:
    model: Model
    beta: np.ndarray
    fitted_norm_sq: float
    variant: str = field(default="plain")


def fit_mle(data: RegressionData, model: Sequence[int], variant: str = "plain") -> CoefEstimate:
    """Least-squares (``plain``) or unit-information ridge (``zellner``) fit.

    ``plain`` uses a QR factorisation of X_M and raises :class:`RankDeficient`
    when some ``|R_ii| <= 1e-8 max|R_ii|``.  ``zellner`` solves
    ``(X_M'X_M + I/n) beta = X_M'y`` and never fails.  The fitted norm is
    ``||X_M beta||^2`` on the original ``y`` scale.
    """
    model = as_model(model, data.p)
    if not model:
        return CoefEstimate(model, np.zeros(0), 0.0, variant)
    Xm = data.X[:, model]
    if variant == "plain":
        Q, R = np.linalg.qr(Xm, mode="reduced")
        d = np.abs(np.diag(R))
        if Xm.shape[1] > data.n or d.min() <= QR_RANK_TOL * d.max():
            raise RankDeficient(f"X_M is rank deficient for model {model}")
        qty = Q.T @ data.y
        beta = solve_triangular(R, qty, lower=False)
        fitted = float(qty @ qty)
    elif variant == "zellner":
        A = Xm.T @ Xm + np.eye(len(model)) / data.n
        beta = np.linalg.solve(A, Xm.T @ data.y)
        fx = Xm @ beta
        fitted = float(fx @ fx)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return CoefEstimate(model, beta, fitted, variant)


def penalty_sum(model: Sequence[int], partition: BlockPartition, kappas) -> float:
    kap = check_penalties(kappas, partition.b)
    return float(partition.counts(model) @ kap)


def score(data: RegressionData, model: Sequence[int], partition: BlockPartition,
          kappas, variant: str = "plain") -> float:
    """C(M) = ||X_M beta_M||^2 / (2 sigma^2) - sum_j kappa_j |M_j|."""
    if partition.p != data.p:
        raise DimensionMismatch("partition and design disagree on p")
    est = fit_mle(data, model, variant)
    return 0.5 * est.fitted_norm_sq / data.sigma**2 - penalty_sum(est.model, partition, kappas)


def softmax_scores(scores) -> np.ndarray:
    """exp(C) / sum exp(C), shifted by max C for overflow safety."""
    c = np.asarray(scores, dtype=float)
    if c.size == 0:
        raise EmptyCollection("no scores to normalise")
    if not np.all(np.isfinite(c)):
        raise ValueError("scores must be finite")
    w = np.exp(c - c.max())
    return w / w.sum()


def normalized_scores(raw: Sequence[tuple[Model, float]]) -> list[tuple[Model, float]]:
    """Pairs ``(model, C)`` to ``(model, NC)`` with NC summing to one."""
    if len(raw) == 0:
        raise EmptyCollection("no models to normalise")
    nc = softmax_scores([c for _, c in raw])
    return [(m, float(v)) for (m, _), v in zip(raw, nc)]


def delta_penalty(M: Sequence[int], T: Sequence[int], partition: BlockPartition, kappas) -> float:
    """sum_j kappa_j (|M_j| - |T_j|)."""
    kap = check_penalties(kappas, partition.b)
    M = as_model(M, partition.p)
    T = as_model(T, partition.p)
    return float((partition.counts(M) - partition.counts(T)) @ kap)


def likelihood_gap(data: RegressionData, T: Sequence[int], M: Sequence[int]) -> float:
    """||X_T beta_T||^2 - ||X_M beta_M||^2 on the y/sigma scale."""
    fT = fit_mle(data, T).fitted_norm_sq
    fM = fit_mle(data, M).fitted_norm_sq
    return (fT - fM) / data.sigma**2


def _residualize(data: RegressionData, M: Model, V: np.ndarray) -> np.ndarray:
    if not M:
        return V
    Q, R = np.linalg.qr(data.X[:, M], mode="reduced")
    d = np.abs(np.diag(R))
    if len(M) > data.n or d.min() <= QR_RANK_TOL * d.max():
        raise RankDeficient(f"X_M is rank deficient for model {M}")
    return V - Q @ (Q.T @ V)


def noncentrality(data: RegressionData, Q: Sequence[int], M: Sequence[int], beta_true) -> float:
    """||(I - P_M) X_{Q\\M} beta*_{Q\\M}||^2 / sigma^2."""
    Q = as_model(Q, data.p)
    M = as_model(M, data.p)
    if not set(M) <= set(Q):
        raise NotNested(f"{M} is not contained in {Q}")
    beta_true = np.asarray(beta_true, dtype=float)
    if beta_true.shape != (data.p,):
        raise DimensionMismatch("beta_true must have length p")
    diff = [i for i in Q if i not in set(M)]
    if not diff:
        return 0.0
    v = data.X[:, diff] @ beta_true[diff]
    r = _residualize(data, M, v)
    return float(r @ r) / data.sigma**2


def argmax_model(models: Sequence[Model], scores) -> tuple[Model, float]:
    """Maximiser of ``scores``; ties broken by the lexicographically smallest model."""
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise EmptyCollection("no models to maximise over")
    top = float(np.max(s))
    cand = np.flatnonzero(s >= top - tie_tolerance(top))
    i = min(cand, key=lambda t: models[t])
    return models[i], float(s[i])
