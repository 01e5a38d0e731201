"""Two-step empirical Bayes and adaptive block penalties, the prior/penalty
map and the EBIC comparator.

Step 1 searches at the uniform penalty ``ln p + ln(n)/2`` and estimates the
number of active variables per block from the normalised scores.  Step 2
turns those estimates into block penalties and picks the best model in the
step-1 ledger under them (or, optionally, from a fresh search).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .core import BlockPartition, Model, RegressionData
from .errors import OutOfRange
from .search import (
    DEFAULT_P_LIMIT,
    InclusionProbs,
    ModelLedger,
    SearchConfig,
    inclusion_probabilities,
    search,
)

VARIANTS = ("EB", "A", "EB_pooled", "A_pooled")
SHAT_CLAMP = 0.5


def prior_to_penalty(theta, n: float):
    """kappa = ln(n)/2 + ln(1/theta - 1)."""
    th = np.asarray(theta, dtype=float)
    if np.any(th <= 0) or np.any(th >= 1):
        raise OutOfRange("prior inclusion probability must lie in (0, 1)")
    out = 0.5 * math.log(n) + np.log(1.0 / th - 1.0)
    return float(out) if out.ndim == 0 else out


def penalty_to_prior(kappa, n: float):
    """Inverse of :func:`prior_to_penalty`."""
    k = np.asarray(kappa, dtype=float)
    out = 1.0 / (1.0 + np.exp(k - 0.5 * math.log(n)))
    return float(out) if out.ndim == 0 else out


def step1_penalty(p: int, n: int, b: int = 1) -> np.ndarray:
    """Uniform penalty ln(p) + ln(n)/2 on each of ``b`` blocks."""
    if p < 1 or n < 1:
        raise ValueError("p and n must be >= 1")
    return np.full(b, math.log(p) + 0.5 * math.log(n))


def clamp_shat(shat, sizes) -> tuple[np.ndarray, np.ndarray]:
    """Clamp each estimate into [0.5, p_j - 0.5]; returns (clamped, changed flags)."""
    s = np.asarray(shat, dtype=float)
    pj = np.asarray(sizes, dtype=float)
    lo = np.minimum(SHAT_CLAMP, pj / 2)
    hi = np.maximum(pj - SHAT_CLAMP, pj / 2)
    c = np.clip(s, lo, hi)
    return c, c != s


def step2_penalties(shat, sizes, n: float, variant: str) -> np.ndarray:
    """EB: ln(p_j/s_j - 1) + ln(n)/2; A: ln(p_j - s_j) + ln(n)/2.

    ``shat`` must already be strictly inside (0, p_j); see :func:`clamp_shat`.
    Negative results (possible for EB when s_j > p_j/2) are floored at 0.
    """
    s = np.asarray(shat, dtype=float)
    pj = np.asarray(sizes, dtype=float)
    if np.any(s <= 0) or np.any(s >= pj):
        raise OutOfRange("block sparsity estimates must lie strictly inside (0, p_j)")
    half = 0.5 * math.log(n)
    v = variant.upper()
    if v == "EB":
        kap = np.log(pj / s - 1.0) + half
    elif v == "A":
        kap = np.log(pj - s) + half
    else:
        raise ValueError(f"unknown step-2 variant {variant!r}")
    return np.maximum(kap, 0.0)


@dataclass
class Step1:
    ledger: ModelLedger
    probs: InclusionProbs
    kappa0: float
    best: Model
    cfg: SearchConfig
    exhaustive: bool


@dataclass
class EBResult:
    variant: str
    selected: Model
    penalties: np.ndarray
    shat: np.ndarray
    shat_clamped: np.ndarray
    clamped: np.ndarray
    step1: Step1
    metadata: dict = field(default_factory=dict)

    def to_dict(self, one_based: bool = True) -> dict:
        off = 1 if one_based else 0
        return {
            "variant": self.variant,
            "selected": [i + off for i in self.selected],
            "index_base": off,
            "penalties": [float(v) for v in self.penalties],
            "shat": [float(v) for v in self.shat],
            "shat_clamped": [float(v) for v in self.shat_clamped],
            "clamped": [bool(v) for v in self.clamped],
            "step1": {
                "kappa": self.step1.kappa0,
                "best": [i + off for i in self.step1.best],
                "models_scored": len(self.step1.ledger),
                "exhaustive": self.step1.exhaustive,
                "iterations": self.step1.cfg.iterations,
                "seed": self.step1.cfg.seed,
                "inclusion": [float(v) for v in self.step1.probs.values],
            },
            "metadata": self.metadata,
        }

    def to_json(self, path=None, one_based: bool = True) -> str:
        text = json.dumps(self.to_dict(one_based), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def run_step1(data: RegressionData, partition: BlockPartition, cfg: SearchConfig | None = None,
              p_limit: int = DEFAULT_P_LIMIT) -> Step1:
    cfg = cfg or SearchConfig()
    kap0 = step1_penalty(data.p, data.n, partition.b)
    best, ledger = search(data, partition, kap0, cfg, p_limit=p_limit)
    return Step1(ledger, inclusion_probabilities(ledger), float(kap0[0]), best, cfg,
                 data.p <= p_limit)


def _step2(data, partition, st1: Step1, variant: str, fresh_step2: bool,
           p_limit: int) -> EBResult:
    base, _, pooled = variant.partition("_")
    pooled = pooled == "pooled"
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if pooled:
        shat = np.array([st1.probs.shat.sum()])
        sizes = np.array([partition.p])
    else:
        shat = st1.probs.shat.copy()
        sizes = partition.sizes
    shat_c, clamped = clamp_shat(shat, sizes)
    kap = step2_penalties(shat_c, sizes, data.n, base)
    kap_blocks = np.full(partition.b, kap[0]) if pooled else kap
    if fresh_step2:
        sel, _ = search(data, partition, kap_blocks, st1.cfg, p_limit=p_limit)
    else:
        sel, _ = st1.ledger.argmax(kap_blocks)
    meta = {"backend": _kernels.BACKEND, "fresh_step2": fresh_step2,
            "clamp": [SHAT_CLAMP, "p_j - 0.5"]}
    return EBResult(variant, sel, kap_blocks, shat, shat_c, clamped, st1, meta)


def algorithm1(data: RegressionData, partition: BlockPartition, cfg: SearchConfig | None = None,
               variant: str = "EB", pooled: bool = False, p_limit: int = DEFAULT_P_LIMIT,
               fresh_step2: bool = False, step1: Step1 | None = None) -> EBResult:
    """Two-step selector.  ``variant`` is ``EB`` or ``A``; ``pooled`` uses one
    common step-2 penalty computed from the total sparsity estimate."""
    name = variant.upper() + ("_pooled" if pooled else "")
    st1 = step1 or run_step1(data, partition, cfg, p_limit)
    return _step2(data, partition, st1, name, fresh_step2, p_limit)


def algorithm1_all(data: RegressionData, partition: BlockPartition, cfg: SearchConfig | None = None,
                   variants=VARIANTS, p_limit: int = DEFAULT_P_LIMIT,
                   fresh_step2: bool = False) -> dict[str, EBResult]:
    """Every requested variant from one shared step-1 search (step 1 does not
    depend on the variant)."""
    st1 = run_step1(data, partition, cfg, p_limit)
    return {v: _step2(data, partition, st1, v, fresh_step2, p_limit) for v in variants}


def ebic_penalty(p: int, n: float, zeta: float = 1.0, per_variable_bic: bool = False) -> np.ndarray:
    """eta(k) = zeta ln C(p, k) + ln(n)/2 for k = 0..p.

    With ``per_variable_bic`` the BIC part is ``k ln(n)/2`` instead of a
    per-model constant.
    """
    if zeta < 0:
        raise ValueError("zeta must be >= 0")
    k = np.arange(p + 1, dtype=float)
    lbin = gammaln(p + 1) - gammaln(k + 1) - gammaln(p - k + 1)
    bic = 0.5 * math.log(n) * (k if per_variable_bic else 1.0)
    return zeta * lbin + bic


def ebic_select(data: RegressionData, cfg: SearchConfig | None = None, zeta: float = 1.0,
                p_limit: int = DEFAULT_P_LIMIT, per_variable_bic: bool = False) -> tuple[Model, ModelLedger]:
    """Block-blind EBIC selection with the same search machinery."""
    part = BlockPartition.single(data.p)
    eta = ebic_penalty(data.p, data.n, zeta, per_variable_bic)
    return search(data, part, np.zeros(1), cfg, p_limit=p_limit, size_penalty=eta)
