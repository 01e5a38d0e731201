"""Simulation harness: equicorrelated Gaussian designs, block-structured
truths, replicated selection runs and the deterministic threshold curves.

Every replicate draws from its own PCG64 stream spawned from the scenario
seed, so results do not depend on execution order or on ``jobs``.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, _kernels
from .core import BlockPartition, RegressionData
from .ebayes import algorithm1_all, ebic_select
from .errors import BatchFailed, BlockL0Error, InfeasibleN
from .search import SearchConfig
from .seqmodel import (
    DEFAULT_BETA_MIN,
    BlockConfig,
    consistency_range,
    example_config,
    rate_ratio,
    smallest_recoverable,
)

GENERATOR = "numpy.random.PCG64 via SeedSequence.spawn"
SELECTORS = ("EB_b", "A_b", "EB_pooled", "A_pooled", "EBIC")
_EB_NAME = {"EB_b": "EB", "A_b": "A", "EB_pooled": "EB_pooled", "A_pooled": "A_pooled"}
DEFAULT_N_GRID = (20, 50, 100, 200, 400, 700)
FIG_N_GRID = tuple(int(v) for v in np.unique(np.round(np.logspace(np.log10(20), 4, 40))))
FAILURE_SHARE = 0.10


@dataclass
class SimScenario:
    example_id: int = 1
    n: int = 100
    beta_min: tuple | None = None
    design_corr: float = 0.5
    sigma: float = 1.0
    replicates: int = 100
    seed: int = 20240101
    selectors: tuple = ("EB_b", "A_b", "EB_pooled", "A_pooled")
    zeta: float = 1.0
    iterations: int = 10_000
    p_limit: int = 20
    design: str = "equicorrelated"
    name: str = ""

    def __post_init__(self):
        if self.beta_min is None:
            self.beta_min = DEFAULT_BETA_MIN[self.example_id]
        self.beta_min = tuple(float(v) for v in self.beta_min)
        self.selectors = tuple(self.selectors)
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0.0 <= self.design_corr < 1.0:
            raise ValueError("design_corr must lie in [0, 1)")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if any(not 0 < b <= 1.0 for b in self.beta_min):
            raise ValueError("beta_min entries must lie in (0, 1] so they stay the block minimum")
        bad = [s for s in self.selectors if s not in SELECTORS]
        if bad:
            raise ValueError(f"unknown selectors {bad}; expected a subset of {SELECTORS}")
        if self.design not in ("equicorrelated", "orthonormal"):
            raise ValueError("design must be 'equicorrelated' or 'orthonormal'")
        if not self.name:
            self.name = f"example{self.example_id}"

    def config(self) -> BlockConfig:
        return example_config(self.example_id, self.n, rounded=True, beta_min=self.beta_min)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta_min"] = list(self.beta_min)
        d["selectors"] = list(self.selectors)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimScenario":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        if "beta_min" in known and known["beta_min"] is not None:
            known["beta_min"] = tuple(known["beta_min"])
        if "selectors" in known:
            known["selectors"] = tuple(known["selectors"])
        return cls(**known)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, path) -> "SimScenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def gen_design(n: int, p: int, corr: float, rng: np.random.Generator) -> np.ndarray:
    """Rows N(0, (1 - corr) I + corr 11'), via sqrt(1-corr) z + sqrt(corr) w 1."""
    if not 0.0 <= corr < 1.0:
        raise ValueError("corr must lie in [0, 1)")
    Z = rng.standard_normal((n, p))
    w = rng.standard_normal((n, 1))
    return math.sqrt(1.0 - corr) * Z + math.sqrt(corr) * w


def orthonormalize(X: np.ndarray) -> np.ndarray:
    """Columns rescaled to an exactly orthogonal design with X'X = n I."""
    n, p = X.shape
    if p > n:
        raise InfeasibleN("an orthonormal design needs n >= p")
    Q, _ = np.linalg.qr(X, mode="reduced")
    return math.sqrt(n) * Q


def gen_truth(cfg: BlockConfig, rng: np.random.Generator,
              low: float = 1.0, high: float = 3.0):
    """(beta, S, partition) with contiguous blocks of sizes p_j.

    Within block j, s_j positions are drawn without replacement; one gets
    beta_min_j and the rest U[low, high].  Signs are positive.
    """
    sizes, active = cfg.block_sizes()
    partition = BlockPartition.from_sizes(sizes)
    beta = np.zeros(sum(sizes))
    start = 0
    for pj, sj, bm in zip(sizes, active, cfg.beta_min):
        if sj > pj:
            raise InfeasibleN("block has more active than total variables")
        pos = start + rng.choice(pj, size=sj, replace=False)
        vals = rng.uniform(low, high, size=sj)
        vals[0] = bm
        beta[pos] = vals
        start += pj
    S = tuple(int(i) for i in np.flatnonzero(beta))
    return beta, S, partition


def _replicate(scn: SimScenario, seed_seq: np.random.SeedSequence) -> dict:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    cfg = scn.config()
    beta, S, part = gen_truth(cfg, rng)
    n, p = scn.n, part.p
    X = gen_design(n, p, scn.design_corr, rng)
    if scn.design == "orthonormal":
        X = orthonormalize(X)
    y = X @ beta + scn.sigma * rng.standard_normal(n)
    data = RegressionData(X, y, scn.sigma)
    scfg = SearchConfig(iterations=scn.iterations, seed=int(rng.integers(2**63)))
    out = {}
    Sset = set(S)
    eb = [s for s in scn.selectors if s in _EB_NAME]
    if eb:
        res = algorithm1_all(data, part, scfg, [_EB_NAME[s] for s in eb], p_limit=scn.p_limit)
        for s in eb:
            r = res[_EB_NAME[s]]
            out[s] = {"correct": r.selected == S, "symdiff": len(Sset ^ set(r.selected)),
                      "shat": [float(v) for v in r.shat], "size": len(r.selected)}
    if "EBIC" in scn.selectors:
        sel, _ = ebic_select(data, scfg, scn.zeta, p_limit=scn.p_limit)
        out["EBIC"] = {"correct": sel == S, "symdiff": len(Sset ^ set(sel)), "shat": [],
                       "size": len(sel)}
    return out


def _replicate_task(args):
    scn_dict, seed_seq, idx = args
    scn = SimScenario.from_dict(scn_dict)
    t0 = time.perf_counter()
    try:
        res = _replicate(scn, seed_seq)
        err = None
    except (BlockL0Error, np.linalg.LinAlgError) as exc:
        res, err = None, f"{type(exc).__name__}: {exc}"
    return idx, res, err, time.perf_counter() - t0


@dataclass
class SimResult:
    scenario: SimScenario
    metrics: dict
    failures: list
    metadata: dict = field(default_factory=dict)

    def frequency(self, selector: str) -> float:
        return self.metrics[selector]["correct_freq"]

    def se(self, selector: str) -> float:
        return self.metrics[selector]["correct_se"]

    def rows(self):
        for sel, m in self.metrics.items():
            for key, val in m.items():
                if isinstance(val, list):
                    for j, v in enumerate(val):
                        yield (self.scenario.name, self.scenario.n, sel, f"{key}_{j + 1}", v)
                else:
                    yield (self.scenario.name, self.scenario.n, sel, key, val)

    def to_dict(self) -> dict:
        return {"scenario": self.scenario.to_dict(), "metrics": self.metrics,
                "failures": self.failures, "metadata": self.metadata}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def write_results_csv(results, path):
    """Long format: scenario, n, selector, metric, value."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "n", "selector", "metric", "value"])
        for res in results:
            for row in res.rows():
                w.writerow(row)


def _resolve_jobs(jobs: int) -> int:
    if jobs == 0:
        return os.cpu_count() or 1
    return max(1, int(jobs))


def run_replicates(scn: SimScenario, jobs: int = 1) -> SimResult:
    """Run every replicate of ``scn`` and aggregate per selector."""
    cfg = scn.config()
    children = np.random.SeedSequence(scn.seed).spawn(scn.replicates)
    tasks = [(scn.to_dict(), c, i) for i, c in enumerate(children)]
    t0 = time.perf_counter()
    jobs = _resolve_jobs(jobs)
    if jobs == 1:
        outs = [_replicate_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outs = list(ex.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    outs.sort(key=lambda t: t[0])
    failures = [{"replicate": i, "error": e} for i, _, e, _ in outs if e is not None]
    if len(failures) > FAILURE_SHARE * scn.replicates:
        raise BatchFailed(f"{len(failures)} of {scn.replicates} replicates failed; first: "
                          f"{failures[0]['error']}")
    done = [r for _, r, e, _ in outs if e is None]
    metrics = {}
    for sel in scn.selectors:
        recs = [r[sel] for r in done]
        R = len(recs)
        f = float(np.mean([r["correct"] for r in recs]))
        m = {"correct_freq": f, "correct_se": math.sqrt(f * (1 - f) / R),
             "mean_symdiff": float(np.mean([r["symdiff"] for r in recs])),
             "mean_size": float(np.mean([r["size"] for r in recs])),
             "replicates": R}
        if recs[0]["shat"]:
            m["mean_shat"] = [float(v) for v in np.mean([r["shat"] for r in recs], axis=0)]
        metrics[sel] = m
    meta = {
        "seed": scn.seed,
        "seed_rule": "SeedSequence(seed).spawn(replicates)[i] for replicate i",
        "generator": GENERATOR,
        "backend": _kernels.BACKEND,
        "version": __version__,
        "numpy": np.__version__,
        "block_inactive": list(cfg.inactive),
        "block_active": list(cfg.active),
        "p": int(sum(cfg.inactive) + sum(cfg.active)),
        "runtime_s": time.perf_counter() - t0,
        "replicate_runtime_s": [t for *_, t in outs],
    }
    return SimResult(scn, metrics, failures, meta)


# ---------------------------------------------------------------- curves

FIG1_BETA = (2 / 3, 1 / 10)
FIG2_RIGHT_BETA = (1.3 / 5, 1 / 5)


def figure_curves(which: str, n_grid=FIG_N_GRID, examples=(1, 2, 3, 4)) -> list[dict]:
    """Long table of rows ``{example, n, series, value, empty_flag}``.

    fig1: consistency intervals of each block threshold and the pooled one.
    fig2_left: smallest recoverable signal, block over pooled.
    fig2_right: oracle rate ratio, block over pooled.
    Counts are the unrounded formulas.  Infeasible (example, n) pairs give a
    single ``infeasible`` row with NaN value and the flag set.
    """
    rows = []
    for ex in examples:
        for n in n_grid:
            try:
                rows.extend(_curve_rows(which, ex, float(n)))
            except InfeasibleN:
                rows.append({"example": ex, "n": n, "series": "infeasible",
                             "value": math.nan, "empty_flag": True})
    return rows


def _curve_rows(which: str, ex: int, n: float) -> list[dict]:
    def row(series, value, empty=False):
        return {"example": ex, "n": int(n) if n == int(n) else n, "series": series,
                "value": float(value), "empty_flag": bool(empty)}

    if which == "fig1":
        cfg = example_config(ex, n, rounded=False, beta_min=FIG1_BETA)
        out = []
        for j, r in enumerate(consistency_range(cfg)):
            out += [row(f"block{j + 1}_lo", r.lo, r.empty), row(f"block{j + 1}_hi", r.hi, r.empty)]
        r = consistency_range(cfg, pooled=True)[0]
        out += [row("pooled_lo", r.lo, r.empty), row("pooled_hi", r.hi, r.empty)]
        return out
    if which == "fig2_left":
        cfg = example_config(ex, n, rounded=False)
        return [row("ratio", smallest_recoverable(cfg) / smallest_recoverable(cfg, pooled=True))]
    if which == "fig2_right":
        cfg = example_config(ex, n, rounded=False, beta_min=FIG2_RIGHT_BETA)
        return [row("ratio", rate_ratio(cfg))]
    raise ValueError(f"unknown figure {which!r}")


def write_curves_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["example", "n", "series", "value", "empty_flag"])
        w.writeheader()
        for r in rows:
            w.writerow(r)
