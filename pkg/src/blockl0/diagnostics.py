"""Design-dependent quantities behind the regression consistency results:
the identifiability constant rho(X), the eigenvalue bounds lambda_bar and
lambda_underline_j, oracle penalties, rate bounds, finite-n assumption
margins and a small/intermediate/large split of the active signals.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np

from .core import BlockPartition, Model, RegressionData, as_model, check_penalties
from .errors import DegenerateBlock, DegenerateDirection, EmptyCollection, RankDeficient, TooLarge
from .seqmodel import BlockConfig

RHO_BUDGET = 2**20
DEFAULT_GAMMA = 0.75
DIRECTION_TOL = 1e-10
RANK_TOL = 1e-8


@dataclass
class DesignDiagnostics:
    rho: float
    rho_exact: bool
    lambda_bar: float
    lambda_underline: np.ndarray
    gamma: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda_underline"] = [float(v) for v in self.lambda_underline]
        return d


def _orth_basis(X: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column span; raises when columns are dependent."""
    if X.shape[1] == 0:
        return X
    Q, R = np.linalg.qr(X, mode="reduced")
    d = np.abs(np.diag(R))
    if X.shape[1] > X.shape[0] or d.min() <= RANK_TOL * d.max():
        raise RankDeficient("columns are linearly dependent")
    return Q


def _rho_term(X: np.ndarray, S: Model, M: Model, n: int) -> float:
    diff = [i for i in S if i not in set(M)]
    Q = _orth_basis(X[:, list(M)]) if M else None
    V = X[:, diff]
    if Q is not None:
        V = V - Q @ (Q.T @ V)
    return float(np.linalg.eigvalsh(V.T @ V / n)[0])


def rho_X(data: RegressionData, S, strategy: str = "exact",
          budget: int = RHO_BUDGET) -> tuple[float, bool]:
    """min over full-rank M not containing S of
    lambda_min(X_{S\\M}'(I - P_M)X_{S\\M} / n).

    ``exact`` enumerates every admissible M (models of size at most n).
    ``restricted`` only looks at subsets of S missing one element and those
    subsets plus one outside variable; it returns an upper surrogate.
    """
    S = as_model(S, data.p)
    if not S:
        raise EmptyCollection("S must be non-empty")
    X = data.X
    n, p = data.n, data.p
    _orth_basis(X[:, list(S)])
    best = math.inf
    if strategy == "exact":
        kmax = min(p, n)
        total = sum(comb(p, k) for k in range(kmax + 1))
        if total > budget:
            raise TooLarge(f"{total} models exceed the rho budget {budget}")
        Sset = set(S)
        for k in range(kmax + 1):
            for M in itertools.combinations(range(p), k):
                if Sset <= set(M):
                    continue
                try:
                    best = min(best, _rho_term(X, S, M, n))
                except RankDeficient:
                    continue
        return max(best, 0.0), True
    if strategy == "restricted":
        others = [i for i in range(p) if i not in set(S)]
        for drop in S:
            base = tuple(i for i in S if i != drop)
            cands = [base] + [tuple(sorted(base + (o,))) for o in others]
            for M in cands:
                try:
                    best = min(best, _rho_term(X, S, M, n))
                except RankDeficient:
                    continue
        return max(best, 0.0), False
    raise ValueError(f"unknown strategy {strategy!r}")


def lambda_bar(data: RegressionData, S) -> float:
    """Largest eigenvalue of X_S'X_S / n."""
    S = as_model(S, data.p)
    if not S:
        raise EmptyCollection("S must be non-empty")
    XS = data.X[:, list(S)]
    return float(np.linalg.eigvalsh(XS.T @ XS / data.n)[-1])


def lambda_underline(data: RegressionData, S, partition: BlockPartition,
                     skip_degenerate: bool = False) -> np.ndarray:
    """Per block, lambda_min of the correlation matrix of the unit residual
    directions (I - P_S)x_i / ||(I - P_S)x_i|| over inactive i in the block.

    A column collinear with X_S raises :class:`DegenerateDirection`, unless
    ``skip_degenerate`` in which case it is left out.
    """
    S = as_model(S, data.p)
    Q = _orth_basis(data.X[:, list(S)])
    Sset = set(S)
    out = np.empty(partition.b)
    for j in range(partition.b):
        inact = [i for i in partition.members(j) if i not in Sset]
        if not inact:
            raise DegenerateBlock(f"block {j} has no inactive variables")
        V = data.X[:, inact]
        if Q.shape[1]:
            V = V - Q @ (Q.T @ V)
        norms = np.linalg.norm(V, axis=0)
        scale = np.linalg.norm(data.X[:, inact], axis=0)
        bad = norms <= DIRECTION_TOL * np.maximum(scale, 1.0)
        if np.any(bad):
            if not skip_degenerate:
                raise DegenerateDirection(
                    f"variables {[inact[k] for k in np.flatnonzero(bad)]} lie in span(X_S)")
            V, norms = V[:, ~bad], norms[~bad]
            if V.shape[1] == 0:
                raise DegenerateBlock(f"block {j} has no usable inactive direction")
        U = V / norms
        out[j] = np.linalg.eigvalsh(U.T @ U)[0]
    return np.clip(out, 0.0, 1.0)


def gamma_from_penalties(cfg: BlockConfig, kappas) -> float:
    """(1 + max_j ln(p_j - s_j) / kappa_j) / 2."""
    kap = check_penalties(kappas, cfg.b)
    ina = np.asarray(cfg.inactive)
    if np.any(ina < 1) or np.any(kap <= 0):
        raise DegenerateBlock("gamma needs p_j - s_j >= 1 and positive penalties")
    return 0.5 * (1.0 + float(np.max(np.log(ina) / kap)))


def _block_logs(cfg: BlockConfig):
    ina = np.asarray(cfg.inactive)
    act = np.asarray(cfg.active)
    if np.any(ina < 1) or np.any(act < 1):
        raise DegenerateBlock(f"degenerate block counts inactive={cfg.inactive} active={cfg.active}")
    return np.log(ina), np.log(act)


def _signal_scale(n: float, rho: float, gamma: float) -> float:
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if rho <= 0:
        raise ValueError("rho must be positive")
    return math.sqrt((1.0 - gamma) * n * rho / 6.0)


def oracle_penalties_reg(cfg: BlockConfig, rho: float, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """sqrt(kappa_j) = a beta_j / 2 + (ln(p_j - s_j) - ln s_j) / (2 a beta_j),
    with a = sqrt((1 - gamma) n rho / 6)."""
    lpi, ls = _block_logs(cfg)
    a = _signal_scale(cfg.n, rho, gamma)
    bm = np.asarray(cfg.beta_min)
    root = 0.5 * a * bm + 0.5 * (lpi - ls) / (a * bm)
    if np.any(root < 0):
        raise DegenerateBlock("oracle penalty root is negative; signal too weak for this block")
    return root**2


def regression_rate_bound(cfg: BlockConfig, kappas=None, rho: float = 1.0,
                          gamma: float = DEFAULT_GAMMA, delta: float = 0.99, r: float = 1.01,
                          oracle: bool = False) -> float:
    """Finite-n misselection bound.

    General form: 6(4^b - 2b) r sum_j [exp(-delta/2 (kappa_j - ln(p_j - s_j)))
    + exp(-delta/2 ((a beta_j - sqrt(kappa_j))^2 - ln s_j))].
    Oracle form: 12(4^b - 2b) r sum_j exp(-delta/2 (a^2 beta_j^2 / 4 - ln max(p_j - s_j, s_j))).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if not r > 1.0:
        raise ValueError("r must exceed 1")
    lpi, ls = _block_logs(cfg)
    b = cfg.b
    a = _signal_scale(cfg.n, rho, gamma)
    bm = np.asarray(cfg.beta_min)
    pref = (4.0**b - 2.0 * b) * r
    if oracle:
        expo = (1.0 - gamma) * cfg.n * rho / 24.0 * bm**2 - np.maximum(lpi, ls)
        return float(12.0 * pref * np.sum(np.exp(-0.5 * delta * expo)))
    if kappas is None:
        raise ValueError("kappas are required unless oracle=True")
    kap = check_penalties(kappas, b)
    t1 = np.exp(-0.5 * delta * (kap - lpi))
    t2 = np.exp(-0.5 * delta * ((a * bm - np.sqrt(kap)) ** 2 - ls))
    return float(6.0 * pref * np.sum(t1 + t2))


@dataclass
class AssumptionReport:
    gamma: float
    penalty_margin: np.ndarray     # kappa_j - ln(p_j - s_j)
    betamin_margin: np.ndarray     # a beta_j - sqrt(kappa_j) - sqrt(ln s_j)
    penalty_ok: np.ndarray
    betamin_ok: np.ndarray
    overfit_ratio: np.ndarray | None = None    # kappa_j / (lambda_j^2 ln(p_j - s_j)), needs >= 1
    overfit_ok: np.ndarray | None = None
    signal_ratio: np.ndarray | None = None     # sqrt(n lambda_bar) beta_j / sqrt(kappa_j)
    betamin_nec_ratio: np.ndarray | None = None  # sqrt(n lambda_bar) beta_j / (lambda_j sqrt(ln(p_j - s_j)))
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out

    def table(self) -> str:
        rows = ["block  kappa-ln(p-s)  ok   betamin-margin  ok"]
        for j in range(len(self.penalty_margin)):
            rows.append(f"{j + 1:>5}  {self.penalty_margin[j]:>13.4f}  {_yn(self.penalty_ok[j])}  "
                        f"{self.betamin_margin[j]:>14.4f}  {_yn(self.betamin_ok[j])}")
        if self.overfit_ratio is not None:
            rows.append("block  overfit-ratio(>=1)  signal-ratio  betamin-nec-ratio")
            for j in range(len(self.overfit_ratio)):
                rows.append(f"{j + 1:>5}  {self.overfit_ratio[j]:>18.4f}  "
                            f"{self.signal_ratio[j]:>12.4f}  {self.betamin_nec_ratio[j]:>17.4f}")
        rows.append(f"gamma = {self.gamma:.4f}")
        rows.extend(self.notes)
        return "\n".join(rows)


def _yn(flag) -> str:
    return "yes" if flag else "no "


def assumption_check(cfg: BlockConfig, kappas, rho: float, gamma: float | None = None,
                     lambda_bar_value: float | None = None,
                     lambda_under=None) -> AssumptionReport:
    """Finite-n margins of the penalty and betamin sufficient conditions, and
    the necessary-condition ratios when eigenvalue diagnostics are given.

    ``gamma`` defaults to the value implied by the penalties; it is capped
    just below 1 when some penalty does not exceed ln(p_j - s_j).
    """
    kap = check_penalties(kappas, cfg.b)
    lpi, ls = _block_logs(cfg)
    notes = []
    if gamma is None:
        gamma = gamma_from_penalties(cfg, kap)
        if gamma >= 1.0:
            notes.append(f"implied gamma {gamma:.4f} >= 1; betamin margin uses gamma = 1 - 1e-9")
            gamma = 1.0 - 1e-9
    a = _signal_scale(cfg.n, rho, gamma)
    bm = np.asarray(cfg.beta_min)
    f = kap - lpi
    g = a * bm - np.sqrt(kap) - np.sqrt(ls)
    rep = AssumptionReport(gamma, f, g, f > 0, g > 0, notes=notes)
    if lambda_bar_value is not None and lambda_under is not None:
        lu = np.asarray(lambda_under, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            rep.overfit_ratio = np.where(lpi > 0, kap / (lu**2 * lpi), np.inf)
            rep.signal_ratio = math.sqrt(cfg.n * lambda_bar_value) * bm / np.sqrt(kap)
            rep.betamin_nec_ratio = math.sqrt(cfg.n * lambda_bar_value) * bm / (lu * np.sqrt(lpi))
        rep.overfit_ok = rep.overfit_ratio >= 1.0
    return rep


@dataclass
class SignalClasses:
    small: Model
    intermediate: Model
    large: Model


def signal_classes(beta_true, partition: BlockPartition, kappas, rho: float,
                   lambda_bar_value: float, n: float, gamma: float = DEFAULT_GAMMA,
                   c_small: float = 0.1) -> SignalClasses:
    """Finite-n split of the active set {i : beta_i != 0}.

    small: sqrt(n lambda_bar)|beta_i| <= c_small sqrt(kappa_j)
    large: a|beta_i| - sqrt(kappa_j) > sqrt(ln s_j), a = sqrt((1-gamma) n rho / 6)
    intermediate: the rest.
    """
    beta = np.asarray(beta_true, dtype=float)
    kap = check_penalties(kappas, partition.b)
    a = _signal_scale(n, rho, gamma)
    S = np.flatnonzero(beta != 0)
    s_counts = partition.counts(tuple(S))
    small, mid, large = [], [], []
    for i in S:
        j = partition.labels[i]
        kj = kap[j]
        if math.sqrt(n * lambda_bar_value) * abs(beta[i]) <= c_small * math.sqrt(kj):
            small.append(int(i))
        elif a * abs(beta[i]) - math.sqrt(kj) > math.sqrt(math.log(s_counts[j])):
            large.append(int(i))
        else:
            mid.append(int(i))
    return SignalClasses(tuple(small), tuple(mid), tuple(large))


def design_diagnostics(data: RegressionData, S, partition: BlockPartition, kappas=None,
                       strategy: str = "exact", skip_degenerate: bool = True) -> DesignDiagnostics:
    """rho(X) (falling back to the restricted surrogate when exact is too
    large), lambda_bar, lambda_underline_j and gamma."""
    try:
        rho, exact = rho_X(data, S, strategy)
    except TooLarge:
        rho, exact = rho_X(data, S, "restricted")
    lb = lambda_bar(data, S)
    lu = lambda_underline(data, S, partition, skip_degenerate=skip_degenerate)
    gamma = DEFAULT_GAMMA
    if kappas is not None:
        S = as_model(S, data.p)
        act = partition.counts(S)
        ina = partition.sizes - act
        if np.all(ina >= 1):
            kap = check_penalties(kappas, partition.b)
            g = 0.5 * (1.0 + float(np.max(np.log(ina) / kap)))
            if 0.5 < g < 1.0:
                gamma = g
    return DesignDiagnostics(rho, exact, lb, lu, gamma)
