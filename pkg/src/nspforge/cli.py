"""Command-line entry point: ``nspforge <group> <command> [options]``.

Machine output is JSON on stdout (or ``--out``); a one-line summary goes to
stderr.  Exit codes: 0 success, 1 usage or input error, 2 proved infeasible,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import io as nio
from ._util import natural_key
from .bayes import NbModel, bn_simulate, nb_evaluate, nb_predict, nb_train
from .evaluation import AGGREGATES, compare_generated, frobenius_distance
from .exceptions import NspError
from .learner import (
    LearnedConstraints,
    constraints_to_wcsp,
    learn_csp,
    learning_benchmark,
    nmf_factorize,
)
from .mining import AprioriMiner, TwoPhaseMiner
from .solver import branch_and_bound, dfs_first_feasible, propagate, sls_solve

log = logging.getLogger("nspforge")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; 2 is reserved for infeasibility here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------- helpers

def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return nio.format_number(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj, key=natural_key)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _emit(args, payload, summary):
    text = json.dumps(payload, indent=2, default=_jsonable) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(summary, file=sys.stderr)


def _schedule_files(paths):
    files = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            files.extend(sorted(p.glob("*.csv"), key=lambda f: natural_key(f.name)))
        else:
            files.append(p)
    if not files:
        raise UsageError("no schedule files found")
    return files


def _schedules(paths):
    return [nio.parse_schedule(_read(f)) for f in _schedule_files(paths)]


def _schedule_json(schedule):
    return {"labels": schedule.labels(), "rows": schedule.entries.tolist()}


def _csv_list(text, cast=str):
    return [cast(tok.strip()) for tok in text.split(",") if tok.strip()]


def _min_support(text):
    value = float(text)
    if value >= 1 or value <= 0:
        if not value.is_integer() or value < 1:
            raise argparse.ArgumentTypeError("support is a count >= 1 or a ratio in (0, 1)")
        return int(value)
    return value


def _sense(text):
    sense = {"min": "minimize", "max": "maximize"}.get(text, text)
    if sense not in ("minimize", "maximize"):
        raise argparse.ArgumentTypeError(f"sense must be min or max, got {text!r}")
    return sense


# --------------------------------------------------------------------------- mine

def _simulation_payload(sim):
    return {
        "schedule": _schedule_json(sim.schedule),
        "complete": sim.complete,
        "warnings": list(sim.warnings),
        "firings": [
            {"day": f.day, "shift": f.shift, "kind": f.kind, "source": f.source, "added": f.added}
            for f in sim.firings
        ],
    }


def _need_seed(args, flag):
    if args.seed is None:
        raise UsageError(f"--seed is required with {flag}")


def cmd_mine_rules(args):
    if args.schedule:
        db = nio.schedule_to_transactions(nio.parse_schedule(_read(args.schedule)), args.granularity)
    else:
        db = nio.parse_transactions(_read(args.input))
    miner = AprioriMiner(args.min_support, args.min_confidence,
                         single_consequent=args.single_consequent, largest_only=args.largest_only).fit(db)
    payload = {
        "min_support_count": miner.min_support_count_,
        "frequent_itemsets": [
            {"items": f.items, "support_count": f.support_count} for f in miner.frequent_itemsets_],
        "rules": [r.to_dict() for r in miner.rules_],
    }
    if args.simulate:
        _need_seed(args, "--simulate")
        payload["simulation"] = _simulation_payload(
            miner.simulate(nio.parse_instance(_read(args.simulate)), args.seed, args.max_iterations))
    _emit(args, payload, f"{len(miner.frequent_itemsets_)} frequent itemsets, {len(miner.rules_)} rules")
    return EXIT_OK


def cmd_mine_huim(args):
    db, utils = nio.parse_quantity_table(_read(args.input))
    miner = TwoPhaseMiner(Fraction(args.min_utility)).fit(db, utils)
    payload = {
        "phase1": [u.to_dict() for u in miner.phase1_],
        "high_utility_itemsets": [u.to_dict() for u in miner.high_utility_itemsets_],
    }
    if args.simulate:
        _need_seed(args, "--simulate")
        payload["simulation"] = _simulation_payload(
            miner.simulate(nio.parse_instance(_read(args.simulate)), args.seed, args.max_iterations))
    _emit(args, payload,
          f"phase I {len(miner.phase1_)} candidates, phase II {len(miner.high_utility_itemsets_)} itemsets")
    return EXIT_OK


# --------------------------------------------------------------------------- bayes

def _nb_table(args, path, require_target=True):
    """``(features, X, y, row_ids)``; ``y`` is None when the target column is absent and optional."""
    header, rows = nio.read_table_csv(_read(path))
    has_target = args.target_col in header
    if require_target and not has_target:
        raise UsageError(f"target column {args.target_col!r} not in header {header}")
    skip = {args.target_col}
    if not args.no_id_col:
        skip.add(header[0])
    features = _csv_list(args.features) if args.features else [h for h in header if h not in skip]
    missing = [f for f in features if f not in header]
    if missing:
        raise UsageError(f"unknown feature columns {missing}")
    cols = [header.index(f) for f in features]
    X = [[row[c] for c in cols] for row in rows]
    y = [row[header.index(args.target_col)] for row in rows] if has_target else None
    ids = [row[0] for row in rows]
    return features, X, y, ids


def cmd_bayes_train(args):
    features, X, y, _ = _nb_table(args, args.input)
    if args.labels:
        labels = _csv_list(args.labels)
    else:
        labels = sorted(set(y) | {v for row in X for v in row}, key=natural_key)
    model = nb_train(X, y, labels, features)
    _emit(args, model.to_dict(), f"trained on {model.n_train} rows, {len(labels)} labels")
    return EXIT_OK


def cmd_bayes_predict(args):
    model = NbModel.from_dict(json.loads(_read(args.model)))
    features, X, y, ids = _nb_table(args, args.input, require_target=False)
    if list(features) != list(model.features):
        X = [dict(zip(features, row)) for row in X]
    preds = []
    for ident, row in zip(ids, X):
        label, scores = nb_predict(model, row)
        preds.append({"row": ident, "prediction": label,
                      "scores": {k: nio.format_number(v) for k, v in scores.items()},
                      "scores_float": {k: float(v) for k, v in scores.items()}})
    payload = {"predictions": preds}
    summary = f"{len(preds)} predictions"
    if y is not None:
        acc, confusion, labels = nb_evaluate([p["prediction"] for p in preds], y, model.labels)
        payload.update({"accuracy": acc, "accuracy_float": float(acc), "labels": labels, "confusion": confusion})
        summary += f", accuracy {acc} ({float(acc):.2%})"
    _emit(args, payload, summary)
    return EXIT_OK


def cmd_bayes_simulate(args):
    history = _schedules(args.input)
    out = bn_simulate(history, args.count, args.seed)
    _emit(args, {"count": len(out), "schedules": [_schedule_json(s) for s in out]},
          f"{len(out)} schedules drawn from {len(history)} historical")
    return EXIT_OK


# --------------------------------------------------------------------------- solve

def _load_wcsp(args):
    wcsp = nio.parse_wcsp(_read(args.input))
    if getattr(args, "nc", False) or getattr(args, "gac", False):
        before = wcsp.domain_size()
        wcsp = propagate(wcsp, nc=args.nc, gac=args.gac)
        log.info("propagation kept %d of %d domain values", wcsp.domain_size(), before)
    return wcsp


def _finish_solve(args, result, label):
    payload = result.to_dict()
    if result.feasible:
        _emit(args, payload, f"{label}: cost {nio.format_number(result.cost)}"
                             f"{' (optimal)' if result.optimal else ''}, {result.stats.nodes_expanded} nodes")
        return EXIT_OK
    _emit(args, payload, f"{label}: no feasible assignment")
    return EXIT_INFEASIBLE if result.optimal or label != "bnb" else EXIT_OK


def cmd_solve_bnb(args):
    wcsp = _load_wcsp(args)
    result = branch_and_bound(wcsp, args.sense, variable_order=args.var_order, value_order=args.value_order,
                              use_bound=not args.no_bound, collect_ties=args.ties, node_limit=args.node_limit)
    return _finish_solve(args, result, "bnb")


def cmd_solve_dfs(args):
    return _finish_solve(args, dfs_first_feasible(_load_wcsp(args), args.sense), "dfs")


def cmd_solve_sls(args):
    wcsp = nio.parse_wcsp(_read(args.input))
    result = sls_solve(wcsp, args.init.replace("-", "_"), args.budget, args.seed, args.sense,
                       max_retries=args.max_retries)
    return _finish_solve(args, result, "sls")


# --------------------------------------------------------------------------- learn

def cmd_learn_csp(args):
    learned = learn_csp(_schedules(args.input))
    _emit(args, learned.to_dict(),
          f"c2={learned.c2} c3={learned.c3} c4={learned.c4} c5={learned.c5} from {learned.n_schedules} schedules")
    return EXIT_OK


def cmd_learn_wcsp(args):
    learned = LearnedConstraints.from_dict(json.loads(_read(args.model)))
    wcsp = constraints_to_wcsp(learned, _csv_list(args.costs, Fraction), cap=args.cap,
                               stream=args.stream, symmetric=args.symmetric)
    text = nio.serialize_instance(wcsp)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"instance with {wcsp.n} nurses and {wcsp.m} patterns", file=sys.stderr)
    return EXIT_OK


def cmd_learn_nmf(args):
    X = nio.read_matrix_csv(_read(args.input))
    f = nmf_factorize(X, args.rank, args.max_iter, args.tol, args.seed)
    payload = f.to_dict()
    if args.mask:
        from .learner import nmf_predict

        partial = nio.read_matrix_csv(_read(args.mask))
        mask = np.isnan(partial) | (partial < 0)
        pred = nmf_predict(np.where(mask, 0.0, partial), mask, f, X, args.threshold)
        payload["prediction"] = pred.to_dict()
    _emit(args, payload, f"rank {f.r}: error {f.error:.6g} after {f.n_iter} iterations")
    return EXIT_OK


def cmd_learn_bench(args):
    sizes = _csv_list(args.sizes, int)
    rows = learning_benchmark(sizes, args.seed, repeats=args.repeats)
    _emit(args, {"seed": args.seed, "results": [{"size": s, "seconds": t} for s, t in rows]},
          ", ".join(f"{s}: {t:.4f}s" for s, t in rows))
    return EXIT_OK


# --------------------------------------------------------------------------- eval

def _matrix_or_schedule(path):
    text = _read(path)
    try:
        return nio.parse_schedule(text).entries
    except NspError:
        return nio.read_matrix_csv(text)


def cmd_eval_fn(args):
    d = frobenius_distance(_matrix_or_schedule(args.a), _matrix_or_schedule(args.b))
    _emit(args, {"frobenius": d}, f"Frobenius distance {d:.6g}")
    return EXIT_OK


def cmd_eval_report(args):
    reference = nio.parse_schedule(_read(args.reference))
    generated = _schedules(args.generated)
    settings = dict(kv.split("=", 1) for kv in args.setting or [])
    report = compare_generated(reference, generated, args.aggregate, args.method, settings)
    _emit(args, report.to_dict(), f"{args.method}: {args.aggregate} FN {report.frobenius:.6g}")
    return EXIT_OK


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nspforge", description="Nurse scheduling: mining, prediction, solving, learning.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def command(sub, name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--out", help="write JSON here instead of stdout")
        return p

    mine = groups.add_parser("mine", help="frequent and high-utility pattern mining").add_subparsers(
        dest="command", required=True, parser_class=_Parser)
    p = command(mine, "rules", cmd_mine_rules, "Apriori itemsets and association rules")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input", help="transactions CSV (label,item;item)")
    src.add_argument("--schedule", help="schedule CSV to turn into transactions")
    p.add_argument("--granularity", choices=("day", "day-shift"), default="day")
    p.add_argument("--min-support", type=_min_support, default=2)
    p.add_argument("--min-confidence", type=Fraction, default=Fraction(3, 5))
    p.add_argument("--single-consequent", action="store_true")
    p.add_argument("--largest-only", action="store_true",
                   help="single consequents from the largest frequent itemsets only")
    p.add_argument("--simulate", metavar="INSTANCE", help="also build a schedule for this instance")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iterations", type=int, default=100)

    p = command(mine, "huim", cmd_mine_huim, "Two-Phase high-utility itemsets")
    p.add_argument("--in", dest="input", required=True, help="quantity CSV with a utility row")
    p.add_argument("--min-utility", required=True)
    p.add_argument("--simulate", metavar="INSTANCE")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iterations", type=int, default=100)

    bayes = groups.add_parser("bayes", help="Naive Bayes prediction and Bernoulli simulation").add_subparsers(
        dest="command", required=True, parser_class=_Parser)
    for name, func in (("train", cmd_bayes_train), ("predict", cmd_bayes_predict)):
        p = command(bayes, name, func, f"Naive Bayes {name}")
        p.add_argument("--in", dest="input", required=True, help="categorical CSV table")
        p.add_argument("--target-col", required=True)
        p.add_argument("--features", help="comma-separated feature columns")
        p.add_argument("--no-id-col", action="store_true", help="first column is data, not a row label")
        if name == "train":
            p.add_argument("--labels", help="comma-separated label universe")
        else:
            p.add_argument("--model", required=True)
    p = command(bayes, "simulate", cmd_bayes_simulate, "sample schedules cell by cell")
    p.add_argument("--in", dest="input", nargs="+", required=True, help="schedule CSVs or directories")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)

    solve = groups.add_parser("solve", help="exact and local-search solving").add_subparsers(
        dest="command", required=True, parser_class=_Parser)
    for name, func in (("bnb", cmd_solve_bnb), ("dfs", cmd_solve_dfs), ("sls", cmd_solve_sls)):
        p = command(solve, name, func, {"bnb": "Branch & Bound", "dfs": "first feasible",
                                        "sls": "local search"}[name])
        p.add_argument("--in", dest="input", required=True, help="instance file")
        p.add_argument("--sense", type=_sense, default="minimize", choices=("minimize", "maximize"))
        if name != "sls":
            p.add_argument("--nc", action="store_true", help="node consistency first")
            p.add_argument("--gac", action="store_true", help="generalised arc consistency first")
    p = solve.choices["bnb"]
    p.add_argument("--ties", action="store_true", help="list every optimal assignment")
    p.add_argument("--no-bound", action="store_true", help="disable bound pruning")
    p.add_argument("--var-order", choices=("fail-first", "index"), default="fail-first")
    p.add_argument("--value-order", choices=("cost", "index"), default="cost")
    p.add_argument("--node-limit", type=int)
    p = solve.choices["sls"]
    p.add_argument("--init", choices=("random", "dfs", "dfs-cp"), default="dfs")
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-retries", type=int, default=1000)

    learn = groups.add_parser("learn", help="constraint and factor learning").add_subparsers(
        dest="command", required=True, parser_class=_Parser)
    p = command(learn, "csp", cmd_learn_csp, "learn bounds from schedules")
    p.add_argument("--in", dest="input", nargs="+", required=True, help="schedule CSVs or directories")
    p = command(learn, "wcsp", cmd_learn_wcsp, "instance file from learned bounds")
    p.add_argument("--model", required=True)
    p.add_argument("--costs", required=True, help="per-shift costs, comma-separated")
    p.add_argument("--cap", type=int, default=2 ** 24)
    p.add_argument("--stream", action="store_true", help="enumerate only patterns within the bounds")
    p.add_argument("--symmetric", action="store_true", help="also apply the learned max coverage and min shifts")
    p = command(learn, "nmf", cmd_learn_nmf, "non-negative matrix factorisation")
    p.add_argument("--in", dest="input", required=True, help="matrix CSV")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mask", help="partial matrix CSV; missing cells empty-negative or nan")
    p.add_argument("--threshold", type=float)
    p = command(learn, "bench", cmd_learn_bench, "time learning on synthetic corpora")
    p.add_argument("--sizes", default="10,100")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--repeats", type=int, default=3)

    ev = groups.add_parser("eval", help="quality measures").add_subparsers(
        dest="command", required=True, parser_class=_Parser)
    p = command(ev, "fn", cmd_eval_fn, "Frobenius distance of two matrices or schedules")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p = command(ev, "report", cmd_eval_report, "distance of generated schedules to a reference")
    p.add_argument("--reference", required=True)
    p.add_argument("--generated", nargs="+", required=True)
    p.add_argument("--aggregate", choices=AGGREGATES, default="mean")
    p.add_argument("--method", default="generated")
    p.add_argument("--setting", action="append", help="key=value recorded in the report")
    return parser


def run(argv=None) -> int:
    level = os.environ.get("NSPFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"nspforge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NspError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"nspforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return EXIT_INTERNAL


def main(argv=None):
    sys.exit(run(argv))
