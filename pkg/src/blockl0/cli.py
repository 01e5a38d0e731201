"""Command-line entry point.

Exit codes: 0 success, 2 malformed input, 3 infeasible configuration,
4 internal error.  Matrices are headerless comma-separated UTF-8 files;
variable indices and block labels in files and output are 1-based.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import __version__, _kernels
from .core import BlockPartition, RegressionData
from .diagnostics import (
    assumption_check,
    design_diagnostics,
    oracle_penalties_reg,
)
from .ebayes import algorithm1, ebic_select, step1_penalty
from .errors import (
    BatchFailed,
    DegenerateBlock,
    DegenerateDirection,
    DimensionMismatch,
    InfeasibleN,
    OutOfRange,
    RankDeficient,
    TooLarge,
)
from .search import SearchConfig
from .seqmodel import (
    BlockConfig,
    SequenceData,
    consistency_range,
    example_config,
    oracle_thresholds,
    penalty_to_threshold,
    rate_bound,
    threshold_select,
)
from .simharness import (
    FIG_N_GRID,
    SimScenario,
    figure_curves,
    run_replicates,
    write_curves_csv,
    write_results_csv,
)

DEFAULT_SEED = 20240101
EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4


class InputError(Exception):
    pass


def read_matrix(path: str) -> np.ndarray:
    """Headerless numeric CSV; errors name the offending line and column."""
    rows = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    with fh:
        for ln, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise InputError(f"{path}:{ln}:{col}: not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise InputError(f"{path}:{ln}:{col}: non-finite value")
                vals.append(v)
            if rows and len(vals) != len(rows[0]):
                raise InputError(f"{path}:{ln}: expected {len(rows[0])} columns, found {len(vals)}")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: empty file")
    return np.array(rows)


def read_vector(path: str) -> np.ndarray:
    m = read_matrix(path)
    if m.shape[0] != 1 and m.shape[1] != 1:
        raise InputError(f"{path}: expected a single row or column, got {m.shape[0]}x{m.shape[1]}")
    return m.ravel()


def read_partition(path: str, p: int | None = None) -> BlockPartition:
    """One block label per variable, labels 1..b each used at least once."""
    lab = read_vector(path)
    if np.any(lab != np.round(lab)):
        raise InputError(f"{path}: block labels must be integers")
    lab = lab.astype(np.int64)
    b = int(lab.max())
    if lab.min() < 1 or set(lab.tolist()) != set(range(1, b + 1)):
        raise InputError(f"{path}: block labels must be contiguous 1..b, got {sorted(set(lab.tolist()))}")
    if p is not None and lab.size != p:
        raise InputError(f"{path}: {lab.size} labels for {p} variables")
    return BlockPartition(lab - 1)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"cannot parse number list {text!r}") from None


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise InputError(f"expected integers in {text!r}")
    return [int(v) for v in vals]


def _emit(obj, out: str | None):
    text = json.dumps(obj, indent=2, default=_json_default)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o).__name__)


def _meta(args) -> dict:
    return {"version": __version__, "backend": _kernels.BACKEND,
            "seed": getattr(args, "seed", None), "command": args.command}


# ---------------------------------------------------------------- commands

def cmd_select(args) -> int:
    X = read_matrix(args.design)
    y = read_vector(args.response)
    if y.size != X.shape[0]:
        raise InputError(f"{args.response}: {y.size} responses for {X.shape[0]} design rows")
    if args.partition:
        part = read_partition(args.partition, X.shape[1])
    else:
        part = BlockPartition.single(X.shape[1])
    data = RegressionData(X, y, args.sigma)
    cfg = SearchConfig(iterations=args.iterations, seed=args.seed)
    if args.variant == "ebic":
        sel, ledger = ebic_select(data, cfg, args.zeta, p_limit=args.p_limit)
        res = {"variant": "EBIC", "zeta": args.zeta, "selected": [i + 1 for i in sel],
               "index_base": 1, "models_scored": len(ledger)}
    else:
        base, _, pooled = args.variant.partition("-")
        r = algorithm1(data, part, cfg, base.upper(), pooled == "pooled", p_limit=args.p_limit)
        res = r.to_dict()
        ledger = r.step1.ledger
        res["ledger_summary"] = {"models": len(ledger), "best_step1_score": ledger.best[1]}
        if args.ledger:
            ledger.rescore(r.penalties).to_csv(args.ledger)
    res["meta"] = _meta(args)
    _emit(res, args.out)
    return EXIT_OK


def _config_from_args(args) -> BlockConfig:
    if args.example is not None:
        return example_config(args.example, args.n, rounded=not args.unrounded,
                              beta_min=_floats(args.beta_min) if args.beta_min else None)
    if not (args.inactive and args.active and args.beta_min):
        raise InputError("give --example or all of --inactive, --active, --beta-min")
    return BlockConfig(args.n, tuple(_floats(args.inactive)), tuple(_floats(args.active)),
                       tuple(_floats(args.beta_min)))


def cmd_sequence(args) -> int:
    res = {}
    if args.response:
        y = read_vector(args.response)
        part = read_partition(args.partition, y.size) if args.partition else BlockPartition.single(y.size)
        if args.tau:
            taus = np.array(_floats(args.tau))
        elif args.kappa:
            taus = penalty_to_threshold(_floats(args.kappa), args.n)
        else:
            taus = oracle_thresholds(_config_from_args(args))
        if taus.size != part.b:
            raise InputError(f"{taus.size} thresholds for {part.b} blocks")
        sel = threshold_select(SequenceData(y, args.n), part, taus)
        res.update({"taus": taus, "selected": [i + 1 for i in sel], "index_base": 1})
    if args.example is not None or args.inactive:
        cfg = _config_from_args(args)
        res["config"] = cfg.to_dict()
        res["oracle_thresholds"] = oracle_thresholds(cfg)
        res["block_ranges"] = [[r.lo, r.hi] for r in consistency_range(cfg)]
        res["pooled_range"] = [[r.lo, r.hi] for r in consistency_range(cfg, pooled=True)]
        try:
            res["oracle_rate_bound"] = rate_bound(cfg, oracle=True)
        except DegenerateBlock as exc:
            res["oracle_rate_bound"] = None
            res["rate_bound_note"] = str(exc)
    if not res:
        raise InputError("sequence needs --response and/or a configuration")
    res["meta"] = _meta(args)
    _emit(res, args.out)
    return EXIT_OK


def _scenario_from_args(args) -> SimScenario:
    if args.scenario:
        try:
            return SimScenario.from_json(args.scenario)
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise InputError(f"{args.scenario}: {exc}") from None
    kw = dict(example_id=args.example, n=args.n, replicates=args.replicates, seed=args.seed,
              iterations=args.iterations, zeta=args.zeta, p_limit=args.p_limit,
              sigma=args.sigma, design_corr=args.corr)
    if args.beta_min:
        kw["beta_min"] = tuple(_floats(args.beta_min))
    if args.selectors:
        kw["selectors"] = tuple(s.strip() for s in args.selectors.split(","))
    return SimScenario(**kw)


def cmd_simulate(args) -> int:
    scn = _scenario_from_args(args)
    if args.emit_config:
        scn.to_json(args.emit_config)
    res = run_replicates(scn, jobs=args.jobs)
    if args.out:
        write_results_csv([res], args.out)
        res.to_json(args.out.rsplit(".", 1)[0] + ".json")
    else:
        print(res.to_json())
    return EXIT_OK


def cmd_diagnose(args) -> int:
    X = read_matrix(args.design)
    part = read_partition(args.partition, X.shape[1]) if args.partition else BlockPartition.single(X.shape[1])
    S = tuple(i - 1 for i in _ints(args.active_set))
    if any(i < 0 or i >= X.shape[1] for i in S):
        raise InputError("active indices must lie in 1..p")
    data = RegressionData(X, np.zeros(X.shape[0]))
    kap = np.array(_floats(args.kappa)) if args.kappa else None
    if kap is not None and kap.size == 1:
        kap = np.full(part.b, kap[0])
    if kap is not None and kap.size != part.b:
        raise InputError(f"{kap.size} penalties for {part.b} blocks")
    diag = design_diagnostics(data, S, part, kap, strategy=args.strategy)
    res = {"diagnostics": diag.to_dict()}
    if args.beta_min:
        act = part.counts(S)
        cfg = BlockConfig(data.n, tuple(part.sizes - act), tuple(act), tuple(_floats(args.beta_min)))
        if kap is None:
            kap = step1_penalty(data.p, data.n, part.b)
        rep = assumption_check(cfg, kap, diag.rho, None, diag.lambda_bar, diag.lambda_underline)
        res["assumptions"] = rep.to_dict()
        try:
            res["oracle_penalties"] = oracle_penalties_reg(cfg, diag.rho, diag.gamma)
        except DegenerateBlock as exc:
            res["oracle_penalties_note"] = str(exc)
        print(rep.table(), file=sys.stderr)
    res["meta"] = _meta(args)
    _emit(res, args.out)
    return EXIT_OK


def cmd_figures(args) -> int:
    grid = _ints(args.n_grid) if args.n_grid else FIG_N_GRID
    examples = _ints(args.examples)
    rows = figure_curves(args.which, grid, examples)
    if args.out:
        write_curves_csv(rows, args.out)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=["example", "n", "series", "value", "empty_flag"])
        w.writeheader()
        w.writerows(rows)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blockl0", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"blockl0 {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("select", help="two-step block selection on CSV data")
    s.add_argument("--design", required=True)
    s.add_argument("--response", required=True)
    s.add_argument("--partition")
    s.add_argument("--variant", default="eb", choices=["eb", "a", "eb-pooled", "a-pooled", "ebic"])
    s.add_argument("--zeta", type=float, default=1.0)
    s.add_argument("--iterations", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--p-limit", type=int, default=20)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--ledger", help="write the scored step-1 ledger as CSV")
    s.add_argument("--out")
    s.set_defaults(func=cmd_select)

    q = sub.add_parser("sequence", help="sequence-model thresholds and closed forms")
    q.add_argument("--response")
    q.add_argument("--partition")
    q.add_argument("--n", type=float, required=True)
    q.add_argument("--tau")
    q.add_argument("--kappa")
    q.add_argument("--example", type=int, choices=[1, 2, 3, 4, 5])
    q.add_argument("--unrounded", action="store_true")
    q.add_argument("--inactive")
    q.add_argument("--active")
    q.add_argument("--beta-min")
    q.add_argument("--out")
    q.set_defaults(func=cmd_sequence)

    m = sub.add_parser("simulate", help="replicated selection experiment")
    m.add_argument("--scenario", help="scenario JSON; overrides the flags below")
    m.add_argument("--example", type=int, default=1, choices=[1, 2, 3, 4, 5])
    m.add_argument("--n", type=int, default=100)
    m.add_argument("--replicates", type=int, default=100)
    m.add_argument("--beta-min")
    m.add_argument("--selectors", help="comma list of EB_b,A_b,EB_pooled,A_pooled,EBIC")
    m.add_argument("--corr", type=float, default=0.5)
    m.add_argument("--sigma", type=float, default=1.0)
    m.add_argument("--zeta", type=float, default=1.0)
    m.add_argument("--iterations", type=int, default=10_000)
    m.add_argument("--p-limit", type=int, default=20)
    m.add_argument("--seed", type=int, default=DEFAULT_SEED)
    m.add_argument("--jobs", type=int, default=1, help="worker processes, 0 = all cores")
    m.add_argument("--emit-config", help="write the resolved scenario JSON here")
    m.add_argument("--out", help="long-format CSV; metadata goes next to it as .json")
    m.set_defaults(func=cmd_simulate)

    d = sub.add_parser("diagnose", help="design diagnostics for a candidate active set")
    d.add_argument("--design", required=True)
    d.add_argument("--partition")
    d.add_argument("--active-set", required=True, help="comma list of 1-based indices")
    d.add_argument("--kappa", help="one penalty or one per block")
    d.add_argument("--beta-min", help="per-block smallest signals, enables the assumption table")
    d.add_argument("--strategy", default="exact", choices=["exact", "restricted"])
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)

    f = sub.add_parser("figures", help="deterministic threshold curves as long CSV")
    f.add_argument("--which", required=True, choices=["fig1", "fig2_left", "fig2_right"])
    f.add_argument("--n-grid", help="comma list of n values")
    f.add_argument("--examples", default="1,2,3,4")
    f.add_argument("--out")
    f.set_defaults(func=cmd_figures)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (InputError, DimensionMismatch, OutOfRange, RankDeficient, DegenerateDirection) as exc:
        print(f"blockl0: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleN, TooLarge, DegenerateBlock, BatchFailed) as exc:
        print(f"blockl0: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"blockl0: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - reported, not raised
        print(f"blockl0: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
