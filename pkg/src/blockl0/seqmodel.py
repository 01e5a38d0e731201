"""Gaussian sequence model: block thresholding, oracle thresholds and the
closed-form ranges, rate bounds and ratios used to compare block and pooled
thresholds.

In the sequence model ``y = sqrt(n) beta + eps`` the MLE is
``beta_tilde = y / sqrt(n)`` and block-l0 selection reduces to keeping
``|beta_tilde_i| > tau_j`` inside each block.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BlockPartition, Model
from .errors import DegenerateBlock, DimensionMismatch, InfeasibleN

# Table 2 block minima (examples 1, 3, 4, 5) and the figure-1 values for
# example 2, which is never simulated.
DEFAULT_BETA_MIN = {
    1: (0.8, 0.33),
    2: (2 / 3, 1 / 10),
    3: (0.8, 0.33),
    4: (0.33, 0.33),
    5: (0.8, 0.2),
}

MAX_EXACT_COUNT = 2.0**53


@dataclass
class SequenceData:
    y: np.ndarray
    n: float

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.y.size < 1:
            raise DimensionMismatch("sequence must be non-empty")
        if not self.n > 0:
            raise ValueError("n must be positive")

    @property
    def beta_tilde(self) -> np.ndarray:
        return self.y / math.sqrt(self.n)


@dataclass(frozen=True)
class BlockConfig:
    """Per-block inactive counts ``p_j - s_j``, active counts ``s_j`` and
    smallest signals ``beta_min_j`` at sample size ``n``.

    Counts are floats so that the unrounded asymptotic formulas can be
    evaluated; :meth:`block_sizes` demands integers.
    """

    n: float
    inactive: tuple
    active: tuple
    beta_min: tuple

    def __post_init__(self):
        ina = tuple(float(v) for v in np.atleast_1d(self.inactive))
        act = tuple(float(v) for v in np.atleast_1d(self.active))
        bmin = tuple(float(v) for v in np.atleast_1d(self.beta_min))
        if not (len(ina) == len(act) == len(bmin) >= 1):
            raise DimensionMismatch("inactive, active and beta_min need one entry per block")
        if any(v < 0 for v in ina + act):
            raise ValueError("counts must be non-negative")
        if any(not math.isfinite(v) for v in ina + act):
            raise InfeasibleN("block counts overflow")
        if any(not v > 0 for v in bmin):
            raise ValueError("beta_min must be positive")
        object.__setattr__(self, "inactive", ina)
        object.__setattr__(self, "active", act)
        object.__setattr__(self, "beta_min", bmin)

    @property
    def b(self) -> int:
        return len(self.inactive)

    @property
    def sizes(self) -> np.ndarray:
        return np.asarray(self.inactive) + np.asarray(self.active)

    def block_sizes(self) -> tuple[list[int], list[int]]:
        """Integer ``(p_j, s_j)`` lists; raises when counts are not whole numbers."""
        ina = np.asarray(self.inactive)
        act = np.asarray(self.active)
        if np.any(ina != np.round(ina)) or np.any(act != np.round(act)):
            raise InfeasibleN("block counts are not integers; use a rounded config")
        return [int(v) for v in ina + act], [int(v) for v in act]

    def pooled(self) -> "BlockConfig":
        """Single-block aggregate: p - s, s, and the global beta_min."""
        return BlockConfig(self.n, (sum(self.inactive),), (sum(self.active),), (min(self.beta_min),))

    def to_dict(self) -> dict:
        return {"n": self.n, "inactive": list(self.inactive), "active": list(self.active),
                "beta_min": list(self.beta_min)}

    @classmethod
    def from_dict(cls, d: dict) -> "BlockConfig":
        return cls(d["n"], tuple(d["inactive"]), tuple(d["active"]), tuple(d["beta_min"]))


def _logs(cfg: BlockConfig, strict: bool = False):
    """ln(p_j - s_j), ln(s_j); counts must be >= 1 (> 1 when ``strict``)."""
    ina = np.asarray(cfg.inactive)
    act = np.asarray(cfg.active)
    bad = (ina <= 1) | (act <= 1) if strict else (ina < 1) | (act < 1)
    if np.any(bad):
        raise DegenerateBlock(f"degenerate block counts inactive={cfg.inactive} active={cfg.active}")
    return np.log(ina), np.log(act)


def threshold_select(seq: SequenceData, partition: BlockPartition, taus) -> Model:
    """Indices with ``|beta_tilde_i| > tau_{block(i)}`` (strict)."""
    if partition.p != seq.y.size:
        raise DimensionMismatch(f"partition has p={partition.p}, sequence has {seq.y.size}")
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.shape != (partition.b,):
        raise DimensionMismatch("need one threshold per block")
    keep = np.abs(seq.beta_tilde) > taus[partition.labels]
    return tuple(int(i) for i in np.flatnonzero(keep))


def penalty_to_threshold(kappas, n: float) -> np.ndarray:
    """tau_j = sqrt(2 kappa_j / n)."""
    kap = np.atleast_1d(np.asarray(kappas, dtype=float))
    if np.any(kap < 0) or not n >= 1:
        raise ValueError("need kappa >= 0 and n >= 1")
    return np.sqrt(2.0 * kap / n)


def oracle_thresholds(cfg: BlockConfig) -> np.ndarray:
    """tau*_j = beta_min_j / 2 + ln(p_j / s_j - 1) / (n beta_min_j)."""
    ina = np.asarray(cfg.inactive)
    act = np.asarray(cfg.active)
    if np.any(act <= 0) or np.any(ina <= 0):
        raise DegenerateBlock("oracle thresholds need 0 < s_j < p_j")
    li, la = np.log(ina), np.log(act)
    bm = np.asarray(cfg.beta_min)
    return bm / 2 + (li - la) / (cfg.n * bm)


def threshold_assumptions(cfg: BlockConfig, taus) -> tuple[np.ndarray, np.ndarray]:
    """Per-block flags for the false-positive (A4) and false-negative (A5) margins."""
    li, la = _logs(cfg)
    taus = np.asarray(taus, dtype=float)
    rn = math.sqrt(cfg.n)
    a4 = rn * taus >= np.sqrt(2 * li)
    a5 = rn * (np.asarray(cfg.beta_min) - taus) >= np.sqrt(2 * la)
    return a4, a5


@dataclass(frozen=True)
class ThresholdRange:
    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return self.lo > self.hi


def consistency_range(cfg: BlockConfig, pooled: bool = False) -> list[ThresholdRange]:
    """Per-block interval sqrt(2 ln(p_j - s_j)/n) <= tau_j <= beta_min_j - sqrt(2 ln s_j / n)."""
    c = cfg.pooled() if pooled else cfg
    li, la = _logs(c)
    lo = np.sqrt(2 * li / c.n)
    hi = np.asarray(c.beta_min) - np.sqrt(2 * la / c.n)
    return [ThresholdRange(float(a), float(h)) for a, h in zip(lo, hi)]


def rate_bound(cfg: BlockConfig, taus=None, oracle: bool = False) -> float:
    """Upper bound on P(selected != S) for block thresholds ``taus``.

    With ``oracle=True`` the simplified bound for the oracle thresholds is
    returned and ``taus`` is ignored.
    """
    li, la = _logs(cfg, strict=True)
    n = cfg.n
    bm = np.asarray(cfg.beta_min)
    if oracle:
        return float(2 * np.sum(np.exp(-(n / 8 * bm**2 - np.maximum(li, la)))))
    if taus is None:
        raise ValueError("taus required unless oracle=True")
    taus = np.asarray(taus, dtype=float)
    a4, a5 = threshold_assumptions(cfg, taus)
    if not (a4.all() and a5.all()):
        warnings.warn("thresholds violate the A4/A5 margins; bound may not apply", RuntimeWarning)
    fp = np.exp(-n / 2 * (taus**2 - 2 * li / n)) / np.sqrt(np.pi * li)
    fn = np.exp(-n / 2 * ((bm - taus) ** 2 - 2 * la / n)) / np.sqrt(np.pi * la)
    return float(np.sum(fp + fn))


def rate_ratio(cfg: BlockConfig) -> float:
    """Oracle-rate ratio of block to pooled thresholds.

    The pooled comparator uses ``p - s``, ``s`` and ``min_j beta_min_j``.
    """
    li, la = _logs(cfg)
    pc = cfg.pooled()
    pli, pla = _logs(pc)
    n = cfg.n
    bm = np.asarray(cfg.beta_min)
    bmin = pc.beta_min[0]
    expo = -n / 8 * (bm**2 - bmin**2) - (max(pli[0], pla[0]) - np.maximum(li, la))
    return float(np.sum(np.exp(expo)))


def rate_ratio_sparse(cfg: BlockConfig, min_block: int = -1) -> float:
    """Sparse-case form of :func:`rate_ratio`, valid when s_j < p_j - s_j for every block."""
    ina = np.asarray(cfg.inactive)
    act = np.asarray(cfg.active)
    if np.any(act >= ina):
        raise DegenerateBlock("sparse form needs s_j < p_j - s_j in every block")
    bm = np.asarray(cfg.beta_min)
    bmin = bm[min_block]
    w = ina / ina.sum()
    return float(np.sum(w * np.exp(-cfg.n / 8 * (bm**2 - bmin**2))))


def smallest_recoverable(cfg: BlockConfig, pooled: bool = False, block: int = -1) -> float:
    """sqrt(2 ln(p - s)/n) + sqrt(2 ln s / n), pooled or for the block hosting beta_min."""
    c = cfg.pooled() if pooled else cfg
    li, la = _logs(c)
    j = 0 if pooled else block
    return float(math.sqrt(2 * li[j] / c.n) + math.sqrt(2 * la[j] / c.n))


def lasso_equivalent_threshold(lambdas, n: float, variant: str = "lasso",
                               lambda0: float = 0.0) -> np.ndarray:
    """Block thresholds reproducing the support of (adaptive) LASSO in the sequence model.

    ``lasso``: lambda_j / n.  ``adaptive_mle`` (weights 1/|MLE|):
    sqrt(lambda_j / n).  ``adaptive_lasso`` (weights from a LASSO fit with
    penalty ``lambda0``): a + sqrt(a^2 + lambda_j / n) with a = lambda0 / 2n.
    """
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if np.any(lam < 0) or lambda0 < 0:
        raise ValueError("penalties must be non-negative")
    if variant == "lasso":
        return lam / n
    if variant == "adaptive_mle":
        return np.sqrt(lam / n)
    if variant == "adaptive_lasso":
        a = lambda0 / (2 * n)
        return a + np.sqrt(a * a + lam / n)
    raise ValueError(f"unknown variant {variant!r}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _example_raw(example_id: int, n: float) -> tuple[float, float, float]:
    # returns (p - s, p_2 - s_2, s_j)
    s = 1.5 * math.log(n)
    if example_id == 1:
        return 1.5 * n, math.sqrt(n), s
    if example_id == 2:
        if n / 20 > 700:
            raise InfeasibleN(f"exp(n/20) overflows at n={n}")
        return math.exp(n / 20), n**2, s
    if example_id == 3:
        return float(n), math.log(n), s
    if example_id == 4:
        return float(n), n / 2, s
    if example_id == 5:
        return n / 2, math.sqrt(n) / 2, s
    raise ValueError(f"unknown example {example_id}")


def example_config(example_id: int, n: float, rounded: bool = True,
                   beta_min: Sequence[float] | None = None) -> BlockConfig:
    """Two-block configuration of the worked examples at sample size ``n``.

    ``rounded=True`` gives integer counts (round half up, ``s_j >= 1``,
    ``p_j - s_j >= 1``); ``rounded=False`` keeps the raw formulas.
    """
    if beta_min is None:
        beta_min = DEFAULT_BETA_MIN[example_id]
    ps, ps2, s = _example_raw(example_id, n)
    if rounded:
        if ps > MAX_EXACT_COUNT:
            raise InfeasibleN(f"p - s = {ps:.3g} exceeds exact integer range at n={n}")
        PS, PS2 = _round_half_up(ps), _round_half_up(ps2)
        PS1 = PS - PS2
        sj = max(1, _round_half_up(s))
        if PS1 < 1 or PS2 < 1:
            raise InfeasibleN(f"example {example_id} has an empty inactive block at n={n}")
        return BlockConfig(n, (PS1, PS2), (sj, sj), tuple(beta_min))
    ps1 = ps - ps2
    if ps1 <= 0 or ps2 <= 0:
        raise InfeasibleN(f"example {example_id} has no inactive variables in a block at n={n}")
    return BlockConfig(n, (ps1, ps2), (s, s), tuple(beta_min))
