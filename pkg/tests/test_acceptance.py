"""Acceptance criteria, one test each; every test prints a PASS or FAIL line."""

import json
import time
from contextlib import contextmanager
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from nspforge import io as nio
from nspforge.bayes import nb_evaluate, nb_predict, nb_train
from nspforge.cli import run
from nspforge.generators import benchmark_instance, random_wcsp, schedule_corpus
from nspforge.learner import learn_csp, learning_benchmark, nmf_factorize
from nspforge.mining import apriori, generate_rules, two_phase
from nspforge.model import Schedule, ShiftPattern, pattern_cost, solution_cost
from nspforge.solver import branch_and_bound, gac_filter, is_feasible, node_consistency, propagate, sls_solve

from conftest import DATA, read, two_nurse_instance

pytestmark = pytest.mark.acceptance


@contextmanager
def criterion(capsys, number, title):
    notes = []
    try:
        yield notes
    except BaseException as exc:
        with capsys.disabled():
            print(f"\nFAIL criterion {number}: {title} :: {type(exc).__name__}: {exc}".rstrip())
        raise
    with capsys.disabled():
        extra = f" ({'; '.join(notes)})" if notes else ""
        print(f"\nPASS criterion {number}: {title}{extra}")


def S(*items):
    return frozenset(items)


def tuples(wcsp):
    return product(*[list(d) for d in wcsp.domains])


# --------------------------------------------------------------------------- 1

def test_criterion_01_association_rules(capsys, day_db):
    expected = {
        (S("N1", "N2"), S("N5")), (S("N2", "N5"), S("N1")), (S("N1", "N3"), S("N5")),
        (S("N1", "N5"), S("N3")), (S("N3", "N5"), S("N1")), (S("N1", "N4"), S("N5")),
        (S("N4", "N5"), S("N1")),
    }
    with criterion(capsys, 1, "apriori rules on the day table"):
        t0 = time.perf_counter()
        freq = apriori(day_db, 2)
        rules = generate_rules(freq, Fraction(3, 5), single_consequent=True, largest_only=True)
        elapsed = time.perf_counter() - t0
        support = {f.items: f.support_count for f in freq}
        got = {(r.antecedent, r.consequent): r.confidence for r in rules}
        for (a, c), conf in got.items():
            assert conf == Fraction(support[a | c], support[a])
        assert elapsed < 1
        missing = sorted((sorted(a), sorted(c)) for a, c in expected - set(got))
        extra = sorted((sorted(a), sorted(c)) for a, c in set(got) - expected)
        assert set(got) == expected, f"{len(got)} rules; missing {missing}, unexpected {extra}"


# --------------------------------------------------------------------------- 2

def test_criterion_02_high_utility_itemsets(capsys, quantity_tables):
    phase1 = ["N1", "N2", "N3", "N4", "N5", "N1 N2", "N1 N4", "N1 N5", "N2 N3", "N2 N4", "N2 N5", "N3 N4",
              "N4 N5", "N1 N2 N4", "N1 N2 N5", "N1 N4 N5", "N2 N3 N4", "N2 N4 N5", "N1 N2 N4 N5"]
    phase2 = ["N1", "N2", "N4", "N1 N2", "N1 N4", "N1 N5", "N2 N4", "N2 N5", "N1 N2 N4", "N1 N2 N5",
              "N1 N4 N5", "N2 N3 N4", "N2 N4 N5", "N1 N2 N4 N5"]
    with criterion(capsys, 2, "two-phase itemsets, utilities and TWU"):
        db, utils = quantity_tables
        t0 = time.perf_counter()
        p1, p2 = two_phase(db, utils, 15)
        elapsed = time.perf_counter() - t0
        assert len(p1) == 19 and len(p2) == 14
        assert {u.items for u in p1} == {frozenset(x.split()) for x in phase1}
        assert {u.items for u in p2} == {frozenset(x.split()) for x in phase2}
        util = {u.items: u.utility for u in p2}
        assert util[S("N1")] == 21 and util[S("N1", "N2")] == 39
        assert util[S("N2", "N4")] == 45 and util[S("N1", "N2", "N4", "N5")] == 33
        assert {u.items: u.twu for u in p1}[S("N1", "N2")] == 52
        assert elapsed < 1


# --------------------------------------------------------------------------- 3

def test_criterion_03_naive_bayes(capsys):
    with criterion(capsys, 3, "Naive Bayes scores, predictions and accuracy"):
        t0 = time.perf_counter()
        _, train = nio.read_table_csv(read("shifts_train.csv"))
        _, test = nio.read_table_csv(read("shifts_test.csv"))
        labels = ("N1", "N2", "N3", "N4")
        model = nb_train([r[1:4] for r in train], [r[4] for r in train], labels)
        _, scores = nb_predict(model, test[0][1:4])
        for lab, ref in zip(labels, (0.0052, 0.0012, 0.0058, 0.0011)):
            assert abs(float(scores[lab]) - ref) <= 5e-4
        preds = [nb_predict(model, r[1:4])[0] for r in test]
        assert preds == ["N3", "N3", "N2", "N4", "N2", "N3"]
        acc, _, _ = nb_evaluate(preds, [r[4] for r in test], labels)
        assert acc == Fraction(4, 6)
        assert time.perf_counter() - t0 < 1


# --------------------------------------------------------------------------- 4

def test_criterion_04_branch_and_bound_example(capsys):
    with criterion(capsys, 4, "two-nurse maximisation with propagation") as notes:
        wcsp = two_nurse_instance()
        plain = branch_and_bound(wcsp, sense="maximize", collect_ties=True)
        filtered = propagate(wcsp, nc=True, gac=True)
        pruned = branch_and_bound(filtered, sense="maximize", collect_ties=True)
        assert plain.cost == pruned.cost == 6
        assert {tuple(s) for s in pruned.solutions} == {(0, 2), (2, 0)}
        gone = wcsp.domain.index(ShiftPattern.from_string("0100", 4))
        assert all(gone not in d for d in filtered.domains)
        assert pruned.stats.nodes_expanded < plain.stats.nodes_expanded
        notes.append(f"nodes {plain.stats.nodes_expanded} -> {pruned.stats.nodes_expanded}")


# --------------------------------------------------------------------------- 5

def oracle_instances(count=500):
    out = []
    for seed in range(count):
        rng = np.random.default_rng(10_000 + seed)
        n = int(rng.integers(1, 5))
        m = int(rng.integers(2, 9))
        out.append(random_wcsp(10_000 + seed, n, m, days=int(rng.integers(1, 3)),
                               shifts_per_day=int(rng.integers(2, 4))))
    return out


def test_criterion_05_solver_oracle_suite(capsys):
    with criterion(capsys, 5, "B&B and propagation against exhaustive enumeration") as notes:
        t0 = time.perf_counter()
        instances = oracle_instances()
        feasible_count = 0
        for wcsp in instances:
            assert wcsp.n <= 4 and wcsp.m <= 8
            feas = [t for t in tuples(wcsp) if is_feasible(t, wcsp)]
            res = branch_and_bound(wcsp)
            if feas:
                feasible_count += 1
                assert res.cost == min(solution_cost(t, wcsp.instance) for t in feas)
                support = [{t[i] for t in feas} for i in range(wcsp.n)]
                for filtered in (node_consistency(wcsp), gac_filter(wcsp), propagate(wcsp)):
                    for i in range(wcsp.n):
                        assert support[i] <= set(filtered.domains[i])
            else:
                assert not res.feasible
            once = gac_filter(wcsp)
            assert gac_filter(once).domains == once.domains
        elapsed = time.perf_counter() - t0
        assert feasible_count >= 100 and elapsed < 60
        notes.append(f"{len(instances)} instances, {feasible_count} feasible, {elapsed:.1f}s")


# --------------------------------------------------------------------------- 6

def brute_frequent(baskets, items, minsup):
    out = {}
    for k in range(1, len(items) + 1):
        for combo in product([0, 1], repeat=len(items)):
            if sum(combo) != k:
                continue
            c = frozenset(i for i, bit in zip(items, combo) if bit)
            n = sum(c <= b for b in baskets)
            if n >= minsup:
                out[c] = n
    return out


def brute_utility(rows, utils, items, min_u):
    tu = [sum(q * utils[i] for i, q in r.items()) for r in rows]
    p1, p2 = {}, {}
    for combo in product([0, 1], repeat=len(items)):
        c = frozenset(i for i, bit in zip(items, combo) if bit)
        if not c:
            continue
        hits = [k for k, r in enumerate(rows) if all(i in r for i in c)]
        w = sum(tu[k] for k in hits)
        u = sum(rows[k][i] * utils[i] for k in hits for i in c)
        if w >= min_u:
            p1[c] = u
            if u >= min_u:
                p2[c] = u
    return p1, p2


def test_criterion_06_mining_oracle_suite(capsys):
    with criterion(capsys, 6, "apriori and two-phase against brute force") as notes:
        t0 = time.perf_counter()
        cases = 60
        for seed in range(cases):
            rng = np.random.default_rng(20_000 + seed)
            items = [f"N{i}" for i in range(1, int(rng.integers(1, 11)) + 1)]
            n_tx = int(rng.integers(1, 13))
            baskets = [frozenset(i for i in items if rng.random() < 0.45) for _ in range(n_tx)]
            minsup = int(rng.integers(1, 4))
            got = {f.items: f.support_count for f in apriori(nio.TransactionDb.from_lists(baskets), minsup)}
            assert got == brute_frequent(baskets, items, minsup)
            utils = {i: Fraction(int(rng.integers(1, 6))) for i in items}
            rows = [{i: int(rng.integers(1, 5)) for i in items if rng.random() < 0.4} for _ in range(n_tx)]
            db = nio.QuantityDb(tuple((f"T{k}", r) for k, r in enumerate(rows)), tuple(items))
            min_u = Fraction(int(rng.integers(1, 40)))
            p1, p2 = two_phase(db, nio.UtilityTable(utils), min_u)
            e1, e2 = brute_utility(rows, utils, items, min_u)
            assert {u.items: u.utility for u in p1} == e1
            assert {u.items: u.utility for u in p2} == e2
        elapsed = time.perf_counter() - t0
        assert elapsed < 30
        notes.append(f"{cases} databases, {elapsed:.1f}s")


# --------------------------------------------------------------------------- 7

def test_criterion_07_local_search_contract(capsys):
    with criterion(capsys, 7, "local search feasibility, monotone trace, gap to optimum") as notes:
        for n in (5, 10):
            for seed in range(2):
                wcsp = benchmark_instance(n, seed=seed)
                opt = branch_and_bound(wcsp)
                assert opt.optimal and opt.feasible
                for init in ("random", "dfs", "dfs_cp"):
                    res = sls_solve(wcsp, init=init, budget=2000, seed=seed)
                    assert res.feasible and is_feasible(res.assignment, wcsp)
                    assert all(b < a for a, b in zip(res.trace, res.trace[1:]))
                    assert res.cost >= opt.cost
                    gap = float((res.cost - opt.cost) / opt.cost)
                    notes.append(f"n={n} s={seed} {init} gap {gap:.1%}")


# --------------------------------------------------------------------------- 8

def test_criterion_08_pattern_cost(capsys):
    with criterion(capsys, 8, "pattern weight from per-shift costs"):
        pat = ShiftPattern.from_string("0100100011000000100000101000", 4)
        assert pattern_cost(pat, [1, 2, 1, 3]) == 9


# --------------------------------------------------------------------------- 9

def test_criterion_09_constraint_learning(capsys):
    with criterion(capsys, 9, "bound learning safety, monotonicity, c4 flip, scaling") as notes:
        corpus = schedule_corpus(30, seed=7, n=10, days=7, shifts_per_day=3, q=1, p=4, h=5, b=3, y=0)
        learned = learn_csp(corpus)
        assert all(learned.violations(s) == [] for s in corpus)
        prev = learn_csp(corpus[:1])
        for k in range(2, len(corpus) + 1):
            cur = learn_csp(corpus[:k])
            assert cur.c2 <= prev.c2 and cur.c3 >= prev.c3 and cur.c5 >= prev.c5
            assert prev.c4 or not cur.c4
            prev = cur
        assert learned.c4
        grid = corpus[0].entries.copy()
        grid[0, 2] = grid[0, 3] = 1
        assert not learn_csp(corpus + [Schedule(grid, 7, 3)]).c4
        (_, t10), (_, t100) = learning_benchmark([10, 100], seed=0)
        assert t100 <= 20 * t10
        notes.append(f"t(100)/t(10) = {t100 / t10:.1f}")


# --------------------------------------------------------------------------- 10

def test_criterion_10_matrix_factorisation(capsys):
    with criterion(capsys, 10, "NMF planted recovery, monotone error, published-factor bar") as notes:
        t0 = time.perf_counter()
        rng = np.random.default_rng(1)
        planted = rng.random((6, 2)) @ rng.random((2, 8))
        f = nmf_factorize(planted, 2, max_iter=500, tol=1e-12, seed=0)
        assert f.error < 1e-3 and f.n_iter <= 500
        assert all(b <= a + 1e-9 for a, b in zip(f.error_trace, f.error_trace[1:]))
        X = nio.read_matrix_csv(read("factor_matrix.csv"))
        W = nio.read_matrix_csv(read("published_W.csv"))
        H = nio.read_matrix_csv(read("published_H.csv"))
        bar = float(np.linalg.norm(X - W @ H))
        g = nmf_factorize(X, 3, max_iter=5000, tol=1e-12, seed=0)
        assert all(b <= a + 1e-9 for a, b in zip(g.error_trace, g.error_trace[1:]))
        assert g.error <= bar
        elapsed = time.perf_counter() - t0
        assert elapsed < 10
        notes.append(f"planted {f.error:.1e}; table {g.error:.6f} <= bar {bar:.6f}")


# --------------------------------------------------------------------------- 11

def _run(capsys, argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    assert code == 0, err
    return out


def _drop_timings(text):
    data = json.loads(text)
    for row in data["results"]:
        row.pop("seconds")
    return json.dumps(data)


def test_criterion_11_determinism(capsys, tmp_path):
    history = tmp_path / "history"
    history.mkdir()
    for k, s in enumerate(schedule_corpus(3, seed=0, n=5, days=3, shifts_per_day=2)):
        (history / f"s{k}.csv").write_text(nio.serialize_schedule(s))
    wcsp = DATA / "two_nurse_day.wcsp"
    five = DATA / "five_nurse_week.wcsp"
    (tmp_path / "bench.wcsp").write_text(nio.serialize_instance(benchmark_instance(5, seed=1)))
    bench = tmp_path / "bench.wcsp"
    seeded = [
        ["solve", "sls", "--in", bench, "--init", "random", "--seed", "9"],
        ["solve", "sls", "--in", bench, "--init", "dfs", "--seed", "9"],
        ["solve", "sls", "--in", bench, "--init", "dfs-cp", "--seed", "9"],
        ["solve", "bnb", "--in", wcsp, "--sense", "max", "--nc", "--gac", "--ties"],
        ["mine", "rules", "--in", DATA / "day_transactions.csv", "--simulate", five, "--seed", "3"],
        ["mine", "huim", "--in", DATA / "shift1_quantities.csv", "--min-utility", "15", "--simulate", five,
         "--seed", "3"],
        ["bayes", "simulate", "--in", history, "--count", "4", "--seed", "3"],
        ["learn", "nmf", "--in", DATA / "factor_matrix.csv", "--rank", "3", "--seed", "3"],
    ]
    with criterion(capsys, 11, "seeded subcommands are byte-reproducible") as notes:
        for argv in seeded:
            assert _run(capsys, argv) == _run(capsys, argv), " ".join(map(str, argv[:2]))
        bench_argv = ["learn", "bench", "--sizes", "2,4", "--seed", "3", "--repeats", "1"]
        assert _drop_timings(_run(capsys, bench_argv)) == _drop_timings(_run(capsys, bench_argv))
        notes.append(f"{len(seeded) + 1} commands; bench compared without wall-clock seconds")
