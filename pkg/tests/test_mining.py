from fractions import Fraction
from itertools import chain, combinations

import numpy as np
import pytest
from sklearn.base import clone

from nspforge import io as nio
from nspforge.exceptions import ConsistencyError
from nspforge.mining import (
    AprioriMiner,
    FrequentItemset,
    TwoPhaseMiner,
    apriori,
    generate_rules,
    itemset_utility,
    rule_order,
    simulate_schedule,
    support_count,
    transaction_utility,
    twu,
    two_phase,
)
from nspforge.model import NspInstance


def S(*items):
    return frozenset(items)


def subsets(items):
    items = sorted(items)
    return chain.from_iterable(combinations(items, k) for k in range(1, len(items) + 1))


def brute_frequent(baskets, universe, minsup):
    out = {}
    for cand in subsets(universe):
        c = frozenset(cand)
        n = sum(c <= b for b in baskets)
        if n >= minsup:
            out[c] = n
    return out


def brute_rules(freq, minconf):
    out = {}
    for items, sup in freq.items():
        for ante in subsets(items):
            a = frozenset(ante)
            if a == items:
                continue
            conf = Fraction(sup, freq[a])
            if conf >= minconf:
                out[(a, items - a)] = conf
    return out


def random_db(rng):
    n_items = int(rng.integers(1, 11))
    n_tx = int(rng.integers(1, 13))
    universe = [f"N{i}" for i in range(1, n_items + 1)]
    baskets = [frozenset(it for it in universe if rng.random() < 0.45) for _ in range(n_tx)]
    return universe, baskets


# --------------------------------------------------------------------------- apriori

def test_day_table_frequent_itemsets(day_db):
    freq = {f.items: f.support_count for f in apriori(day_db, 2)}
    triples = {k for k in freq if len(k) == 3}
    assert triples == {S("N1", "N2", "N5"), S("N1", "N3", "N5"), S("N1", "N4", "N5")}
    assert freq[S("N1", "N5")] == 4
    assert freq[S("N4")] == 5


def test_day_table_single_consequent_rules_from_triples(day_db):
    rules = generate_rules(apriori(day_db, 2), Fraction(3, 5), largest_only=True)
    got = {(r.antecedent, r.consequent): r.confidence for r in rules}
    assert got == {
        (S("N1", "N2"), S("N5")): 1, (S("N2", "N5"), S("N1")): 1,
        (S("N1", "N3"), S("N5")): 1, (S("N3", "N5"), S("N1")): 1,
        (S("N1", "N4"), S("N5")): 1, (S("N4", "N5"), S("N1")): 1,
    }


def test_n1_n5_to_n3_confidence_is_one_half(day_db):
    freq = {f.items: f.support_count for f in apriori(day_db, 2)}
    assert Fraction(freq[S("N1", "N3", "N5")], freq[S("N1", "N5")]) == Fraction(1, 2)


def test_apriori_threshold_above_every_count_is_empty(day_db):
    assert apriori(day_db, 8) == []


def test_apriori_identical_transactions():
    db = nio.TransactionDb.from_lists([{"A", "B", "C"}] * 3)
    freq = {f.items: f.support_count for f in apriori(db, 3)}
    assert len(freq) == 7 and set(freq.values()) == {3}


def test_apriori_input_validation(day_db):
    with pytest.raises(ValueError):
        apriori(day_db, 0)
    with pytest.raises(ValueError):
        apriori(day_db, 1.5)


@pytest.mark.parametrize("seed", range(60))
def test_apriori_and_rules_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    universe, baskets = random_db(rng)
    db = nio.TransactionDb.from_lists(baskets)
    minsup = int(rng.integers(1, 4))
    minconf = Fraction(int(rng.integers(1, 10)), 10)
    freq = {f.items: f.support_count for f in apriori(db, minsup)}
    expected = brute_frequent(baskets, universe, minsup)
    assert freq == expected
    rules = generate_rules([FrequentItemset(k, v) for k, v in freq.items()], minconf)
    assert {(r.antecedent, r.consequent): r.confidence for r in rules} == brute_rules(expected, minconf)
    single = generate_rules([FrequentItemset(k, v) for k, v in freq.items()], minconf, single_consequent=True)
    assert all(len(r.consequent) == 1 for r in single)


def test_rules_need_subset_closed_input():
    with pytest.raises(ConsistencyError):
        generate_rules([FrequentItemset(S("A", "B"), 2)], Fraction(1, 2))


def test_support_ratio_conversion(day_db):
    assert support_count(day_db, 0.25) == 2
    assert support_count(day_db, 1.0) == 7
    assert AprioriMiner(min_support=0.25).fit(day_db).min_support_count_ == 2


def test_rule_order_prefers_confidence_then_support():
    from nspforge.mining import AssociationRule
    lo = AssociationRule(S("A"), S("B"), 5, Fraction(1, 2))
    hi = AssociationRule(S("C"), S("D"), 2, Fraction(1))
    mid = AssociationRule(S("A"), S("C"), 3, Fraction(1))
    assert rule_order([lo, hi, mid]) == [mid, hi, lo]


# --------------------------------------------------------------------------- two-phase

PHASE1 = [
    "N1", "N2", "N3", "N4", "N5", "N1 N2", "N1 N4", "N1 N5", "N2 N3", "N2 N4", "N2 N5", "N3 N4", "N4 N5",
    "N1 N2 N4", "N1 N2 N5", "N1 N4 N5", "N2 N3 N4", "N2 N4 N5", "N1 N2 N4 N5",
]
PHASE2 = [
    "N1", "N2", "N4", "N1 N2", "N1 N4", "N1 N5", "N2 N4", "N2 N5", "N1 N2 N4", "N1 N2 N5", "N1 N4 N5",
    "N2 N3 N4", "N2 N4 N5", "N1 N2 N4 N5",
]


def as_sets(names):
    return {frozenset(n.split()) for n in names}


def test_two_phase_worked_example(quantity_tables):
    db, utils = quantity_tables
    p1, p2 = two_phase(db, utils, 15)
    assert {u.items for u in p1} == as_sets(PHASE1)
    assert {u.items for u in p2} == as_sets(PHASE2)
    util = {u.items: u.utility for u in p1}
    assert util[S("N1")] == 21 and util[S("N1", "N2")] == 39
    assert util[S("N2", "N4")] == 45 and util[S("N1", "N2", "N4", "N5")] == 33
    assert twu(db, utils, {"N1", "N2"}) == 52


def test_twu_values_recomputed_from_transaction_utilities(quantity_tables):
    db, utils = quantity_tables
    assert [transaction_utility(q, utils) for _, q in db.rows] == [13, 12, 22, 15, 19, 2, 11]
    # N2 occurs on days 1, 3, 4, 5, 7: 13 + 22 + 15 + 19 + 11
    assert twu(db, utils, {"N2"}) == 80
    assert twu(db, utils, {"N4"}) == 61
    assert twu(db, utils, {"N2", "N4"}) == 61
    assert twu(db, utils, {"N1", "N5"}) == 64


def test_two_phase_threshold_above_total_is_empty(quantity_tables):
    db, utils = quantity_tables
    total = sum(transaction_utility(q, utils) for _, q in db.rows)
    assert two_phase(db, utils, total + 1) == ([], [])


def test_single_item_utility_is_quantity_times_unit():
    db, utils = nio.parse_quantity_table("label,A\nutility,7\nT1,3\n")
    _, p2 = two_phase(db, utils, 1)
    assert [(u.items, u.utility) for u in p2] == [(S("A"), 21)]


def brute_two_phase(rows, utils, min_u):
    items = sorted({i for r in rows for i in r})
    tu = [sum(q * utils[i] for i, q in r.items()) for r in rows]
    p1, p2 = {}, {}
    for cand in subsets(items):
        c = frozenset(cand)
        hits = [k for k, r in enumerate(rows) if all(r.get(i, 0) > 0 for i in c)]
        w = sum(tu[k] for k in hits)
        u = sum(rows[k][i] * utils[i] for k in hits for i in c)
        if w >= min_u:
            p1[c] = u
            if u >= min_u:
                p2[c] = u
    return p1, p2


@pytest.mark.parametrize("seed", range(60))
def test_two_phase_matches_brute_force(seed):
    rng = np.random.default_rng(1000 + seed)
    n_items, n_tx = int(rng.integers(1, 11)), int(rng.integers(1, 13))
    items = [f"N{i}" for i in range(1, n_items + 1)]
    utils = {i: Fraction(int(rng.integers(1, 6))) for i in items}
    rows = [{i: int(rng.integers(1, 5)) for i in items if rng.random() < 0.4} for _ in range(n_tx)]
    db = nio.QuantityDb(tuple((f"T{k}", r) for k, r in enumerate(rows)), tuple(items))
    ut = nio.UtilityTable(utils)
    min_u = Fraction(int(rng.integers(1, 40)))
    p1, p2 = two_phase(db, ut, min_u)
    e1, e2 = brute_two_phase(rows, utils, min_u)
    assert {u.items: u.utility for u in p1} == e1
    assert {u.items: u.utility for u in p2} == e2
    for u in p2:
        assert u.twu >= u.utility == itemset_utility(db, ut, u.items)


# --------------------------------------------------------------------------- estimators and simulation

def test_miners_are_sklearn_estimators(day_db, quantity_tables):
    m = AprioriMiner(min_support=2, min_confidence=0.6, largest_only=True)
    assert clone(m).get_params() == m.get_params()
    assert len(m.fit(day_db).rules_) == 6
    t = TwoPhaseMiner(min_utility=15).fit(*quantity_tables)
    assert len(t.phase1_) == 19 and len(t.high_utility_itemsets_) == 14


def test_apriori_miner_accepts_binary_matrix():
    X = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]])
    m = AprioriMiner(min_support=2, min_confidence=1).fit(X)
    assert {f.items for f in m.frequent_itemsets_} >= {S("Nurse_1", "Nurse_2")}


def simulation_instance(n=5, q=1, p=3):
    return NspInstance(n=n, days=7, shifts_per_day=1, cost=[[0]] * n, q=q, p=p, h=7, b=7, y=6)


def test_simulation_respects_caps_and_is_seeded(day_db):
    miner = AprioriMiner(min_support=2, min_confidence=0.6).fit(day_db)
    inst = simulation_instance(q=2, p=3)
    a = miner.simulate(inst, seed=4)
    b = miner.simulate(inst, seed=4)
    assert a.schedule == b.schedule and a.firings == b.firings
    cover = a.schedule.entries.sum(axis=0)
    assert (cover <= 3).all()
    assert a.complete == (cover >= 2).all()
    for f in a.firings:
        col = a.schedule.entries[:, (f.day - 1) + (f.shift - 1)]
        assert all(col[int(i[1:]) - 1] == 1 for i in f.added)
        assert f.kind in ("rule", "sample")


def test_simulation_from_utility_itemsets(quantity_tables):
    t = TwoPhaseMiner(min_utility=15).fit(*quantity_tables)
    res = t.simulate(simulation_instance(q=1, p=4), seed=0)
    assert res.complete
    assert (res.schedule.entries.sum(axis=0) <= 4).all()


def test_simulation_without_patterns_warns():
    res = simulate_schedule([], simulation_instance(), seed=0)
    assert not res.complete and res.schedule.entries.sum() == 0


def test_simulation_rejects_unknown_nurses(day_db):
    rules = AprioriMiner(min_support=2, min_confidence=0.6).fit(day_db).rules_
    with pytest.raises(ConsistencyError):
        simulate_schedule(rules, simulation_instance(n=3), seed=0)
