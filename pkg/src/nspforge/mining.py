"""Frequent and high-utility itemset mining over historical schedules.

Items are nurse identifiers and transactions are days (or day/shift slots).
Support thresholds are absolute counts; :func:`support_count` converts a
ratio.  All confidences and utilities are exact fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._util import natural_key, sorted_items, trailing_index
from ._validation import check_quantities, check_transactions
from .exceptions import ConsistencyError
from .io import QuantityDb, TransactionDb, UtilityTable
from .model import NspInstance, Schedule, as_fraction


def _canon(items) -> tuple:
    return tuple(sorted_items(items))


def _fmt(items) -> str:
    return "{" + ", ".join(_canon(items)) + "}"


@dataclass(frozen=True)
class FrequentItemset:
    items: frozenset
    support_count: int

    def __str__(self):
        return f"{_fmt(self.items)} x{self.support_count}"

    def to_dict(self):
        return {"items": list(_canon(self.items)), "support_count": self.support_count}


@dataclass(frozen=True)
class AssociationRule:
    antecedent: frozenset
    consequent: frozenset
    support_count: int
    confidence: Fraction

    @property
    def items(self) -> frozenset:
        return self.antecedent | self.consequent

    def __str__(self):
        return f"{' & '.join(_canon(self.antecedent))} => {' & '.join(_canon(self.consequent))} ({self.confidence})"

    def to_dict(self):
        return {
            "antecedent": list(_canon(self.antecedent)),
            "consequent": list(_canon(self.consequent)),
            "support_count": self.support_count,
            "confidence": str(self.confidence),
            "confidence_float": float(self.confidence),
        }


@dataclass(frozen=True)
class UtilityItemset:
    items: frozenset
    twu: Fraction
    occurrences: int
    utility: Optional[Fraction] = None

    def __str__(self):
        return f"{_fmt(self.items)} twu={self.twu} u={self.utility}"

    def to_dict(self):
        return {
            "items": list(_canon(self.items)),
            "twu": str(self.twu),
            "occurrences": self.occurrences,
            "utility": None if self.utility is None else str(self.utility),
        }


def _level_key(itemset) -> tuple:
    return (len(itemset), tuple(natural_key(i) for i in _canon(itemset)))


def _next_candidates(level: Sequence[tuple]) -> list:
    """Join ``k``-itemsets sharing a ``k-1`` prefix, then drop any candidate with a missing subset."""
    known = set(level)
    out = []
    for a, b in combinations(level, 2):
        if a[:-1] != b[:-1]:
            continue
        cand = tuple(sorted_items(set(a) | set(b)))
        if all(sub in known for sub in combinations(cand, len(cand) - 1)):
            out.append(cand)
    return sorted(set(out), key=lambda c: tuple(natural_key(i) for i in c))


def support_count(db, ratio: float) -> int:
    """Smallest count meeting a relative support ``ratio`` of ``len(db)``."""
    ratio = as_fraction(ratio)
    if not 0 < ratio <= 1:
        raise ValueError("support ratio must be in (0, 1]")
    return max(1, math.ceil(ratio * len(check_transactions(db))))


def apriori(db, min_support_count: int) -> list:
    """All itemsets with support count >= ``min_support_count``, found level by level."""
    if isinstance(min_support_count, bool) or int(min_support_count) != min_support_count or min_support_count < 1:
        raise ValueError("min_support_count must be an integer >= 1")
    db = check_transactions(db)
    baskets = db.itemsets()
    counts = {}
    for basket in baskets:
        for item in basket:
            counts[(item,)] = counts.get((item,), 0) + 1
    level = sorted((c for c, n in counts.items() if n >= min_support_count), key=lambda c: natural_key(c[0]))
    result = [FrequentItemset(frozenset(c), counts[c]) for c in level]
    while level:
        candidates = _next_candidates(level)
        if not candidates:
            break
        cand_sets = [frozenset(c) for c in candidates]
        tally = [0] * len(candidates)
        for basket in baskets:
            for idx, cs in enumerate(cand_sets):
                if cs <= basket:
                    tally[idx] += 1
        level = [c for c, n in zip(candidates, tally) if n >= min_support_count]
        result.extend(FrequentItemset(frozenset(c), n) for c, n in zip(candidates, tally) if n >= min_support_count)
    result.sort(key=lambda f: _level_key(f.items))
    return result


def generate_rules(frequent: Iterable[FrequentItemset], min_confidence, single_consequent: bool = False,
                   largest_only: bool = False) -> list:
    """Association rules ``X => Y`` with ``conf = sup(X u Y) / sup(X) >= min_confidence``.

    ``largest_only`` keeps only single-item consequents drawn from the
    largest frequent itemsets.
    """
    min_conf = as_fraction(min_confidence)
    if not 0 < min_conf <= 1:
        raise ValueError("min_confidence must be in (0, 1]")
    frequent = list(frequent)
    support = {f.items: f.support_count for f in frequent}
    sources = [f for f in frequent if len(f.items) >= 2]
    if largest_only:
        single_consequent = True
        top = max((len(f.items) for f in sources), default=0)
        sources = [f for f in sources if len(f.items) == top]
    rules = []
    for f in sources:
        items = _canon(f.items)
        for size in range(len(items) - 1, 0, -1):
            if single_consequent and size != len(items) - 1:
                continue
            for ante in combinations(items, size):
                ante = frozenset(ante)
                if ante not in support:
                    raise ConsistencyError(f"support of {_fmt(ante)} missing; itemsets are not subset-closed")
                conf = Fraction(f.support_count, support[ante])
                if conf >= min_conf:
                    rules.append(AssociationRule(ante, f.items - ante, f.support_count, conf))
    rules.sort(key=lambda r: (_level_key(r.items), _level_key(r.antecedent)))
    return rules


# --------------------------------------------------------------------------- utility mining

def _row_map(row):
    if isinstance(row, tuple) and len(row) == 2 and isinstance(row[0], str):
        return row[1]
    return row


def transaction_utility(row, utilities: UtilityTable) -> Fraction:
    """``sum(quantity * unit utility)`` over one transaction."""
    total = Fraction(0)
    for item, qty in _row_map(row).items():
        if item not in utilities:
            raise ConsistencyError(f"no utility for item {item!r}")
        total += qty * utilities[item]
    return total


def _contains(row: dict, items) -> bool:
    return all(row.get(i, 0) > 0 for i in items)


def twu(db: QuantityDb, utilities: UtilityTable, items) -> Fraction:
    """Transaction-weighted utilization: summed utility of transactions containing every item."""
    items = frozenset(items)
    if not items:
        raise ValueError("itemset must be non-empty")
    return sum((transaction_utility(q, utilities) for _, q in db.rows if _contains(q, items)), Fraction(0))


def itemset_utility(db: QuantityDb, utilities: UtilityTable, items) -> Fraction:
    """Exact utility of ``items``: its own quantity-weighted utility in each containing transaction."""
    items = frozenset(items)
    return sum(
        (sum((q[i] * utilities[i] for i in items), Fraction(0)) for _, q in db.rows if _contains(q, items)),
        Fraction(0),
    )


def two_phase(db, utilities, min_utility):
    """Two-Phase high-utility mining.

    Phase I finds every itemset whose TWU reaches ``min_utility`` level by
    level (TWU is anti-monotone, so the apriori join/prune applies).  Phase II
    rescans the database for exact utilities and keeps the itemsets that reach
    ``min_utility``.  Returns ``(phase1, phase2)``.
    """
    db, utilities = check_quantities(db, utilities)
    min_u = as_fraction(min_utility)
    if min_u <= 0:
        raise ValueError("min_utility must be > 0")
    tus = [(q, transaction_utility(q, utilities)) for _, q in db.rows]

    def scan(cands):
        out = []
        for cand in cands:
            cs = frozenset(cand)
            hits = [tu for q, tu in tus if _contains(q, cs)]
            out.append((cand, sum(hits, Fraction(0)), len(hits)))
        return out

    items = sorted_items({i for q, _ in tus for i in q})
    scanned = scan([(i,) for i in items])
    phase1 = []
    while scanned:
        kept = [(c, w, occ) for c, w, occ in scanned if w >= min_u]
        phase1.extend(UtilityItemset(frozenset(c), w, occ) for c, w, occ in kept)
        scanned = scan(_next_candidates([c for c, _, _ in kept]))
    phase1.sort(key=lambda u: _level_key(u.items))
    phase1 = [
        UtilityItemset(u.items, u.twu, u.occurrences, itemset_utility(db, utilities, u.items)) for u in phase1
    ]
    phase2 = [u for u in phase1 if u.utility >= min_u]
    return phase1, phase2


# --------------------------------------------------------------------------- estimators

class AprioriMiner(BaseEstimator):
    """Frequent itemsets and association rules as a fit-only estimator.

    ``min_support`` is an absolute count when it is an int and a ratio of the
    number of transactions when it is a float in (0, 1).
    """

    def __init__(self, min_support=2, min_confidence=0.6, single_consequent=False, largest_only=False):
        self.min_support = min_support
        self.min_confidence = min_confidence
        self.single_consequent = single_consequent
        self.largest_only = largest_only

    def fit(self, X, y=None):
        db = check_transactions(X)
        if isinstance(self.min_support, float) and self.min_support < 1:
            count = support_count(db, self.min_support)
        else:
            count = int(self.min_support)
        self.n_transactions_ = len(db)
        self.min_support_count_ = count
        self.frequent_itemsets_ = apriori(db, count)
        self.rules_ = generate_rules(
            self.frequent_itemsets_, self.min_confidence,
            single_consequent=self.single_consequent, largest_only=self.largest_only,
        )
        return self

    def simulate(self, instance: NspInstance, seed: int, max_iterations: int = 100):
        check_is_fitted(self, "rules_")
        return simulate_schedule(self.rules_, instance, seed, max_iterations)


class TwoPhaseMiner(BaseEstimator):
    """High-utility itemsets; ``fit(X, utilities)`` with a :class:`QuantityDb` or a quantity matrix."""

    def __init__(self, min_utility=1):
        self.min_utility = min_utility

    def fit(self, X, utilities=None):
        db, utils = check_quantities(X, utilities)
        self.phase1_, self.high_utility_itemsets_ = two_phase(db, utils, self.min_utility)
        return self

    def simulate(self, instance: NspInstance, seed: int, max_iterations: int = 100):
        check_is_fitted(self, "high_utility_itemsets_")
        return simulate_schedule(self.high_utility_itemsets_, instance, seed, max_iterations)


# --------------------------------------------------------------------------- simulation

@dataclass(frozen=True)
class Firing:
    day: int
    shift: int
    kind: str          # "rule" (antecedent matched) or "sample"
    source: int        # index into the ordered pattern list
    added: frozenset


@dataclass(frozen=True)
class SimulationResult:
    schedule: Schedule
    firings: tuple = ()
    warnings: tuple = field(default=())

    @property
    def complete(self) -> bool:
        return not self.warnings


def rule_order(rules: Sequence[AssociationRule]) -> list:
    """Firing order: confidence desc, support desc, then antecedent/consequent by item name."""
    return sorted(
        rules,
        key=lambda r: (
            -r.confidence, -r.support_count,
            tuple(natural_key(i) for i in _canon(r.antecedent)),
            tuple(natural_key(i) for i in _canon(r.consequent)),
        ),
    )


def _nurse_index(item, n):
    idx = trailing_index(item)
    if idx is None or not 1 <= idx <= n:
        raise ConsistencyError(f"item {item!r} does not name a nurse in 1..{n}")
    return idx - 1


def simulate_schedule(patterns: Sequence[Union[AssociationRule, UtilityItemset]], instance: NspInstance,
                      seed: int, max_iterations: int = 100) -> SimulationResult:
    """Build a schedule slot by slot from mined rules or high-utility itemsets.

    In each slot, the highest-ranked rule whose antecedent is already staffed
    fires and adds its consequent; when none applies, a rule (weighted by
    confidence) or an itemset (weighted by utility) is sampled and all its
    nurses are added.  A slot stops at its minimum coverage ``q`` or after
    ``max_iterations`` draws; additions that would exceed ``p`` are skipped.
    Slots left under-covered are reported in ``warnings``.
    """
    n, days, shifts = instance.n, instance.days, instance.shifts_per_day
    grid = np.zeros((n, days * shifts), dtype=np.int8)
    patterns = list(patterns)
    if not patterns:
        warning = {"reason": "no rules or itemsets to simulate from"}
        return SimulationResult(Schedule(grid, days, shifts), (), (warning,))

    is_rules = isinstance(patterns[0], AssociationRule)
    if is_rules:
        patterns = rule_order(patterns)
        weights = np.array([float(r.confidence) for r in patterns])
    else:
        patterns = sorted(patterns, key=lambda u: _level_key(u.items))
        weights = np.array([float(u.utility if u.utility is not None else u.twu) for u in patterns])
    if weights.sum() <= 0:
        weights = np.ones(len(patterns))
    weights = weights / weights.sum()
    members = [p.items for p in patterns]
    for items in members:
        for item in items:
            _nurse_index(item, n)

    rng = np.random.default_rng(seed)
    firings, warnings = [], []
    for d in range(days):
        for s in range(shifts):
            need, cap = instance.q[s][d], instance.p[s][d]
            staffed = frozenset()
            for _ in range(max_iterations):
                if len(staffed) >= need:
                    break
                added, kind, source = None, None, None
                if is_rules:
                    for idx, rule in enumerate(patterns):
                        if (rule.antecedent <= staffed and not rule.consequent <= staffed
                                and len(staffed | rule.consequent) <= cap):
                            added, kind, source = rule.consequent, "rule", idx
                            break
                if added is None:
                    idx = int(rng.choice(len(patterns), p=weights))
                    grown = staffed | members[idx]
                    if len(grown) > cap or grown == staffed:
                        continue
                    added, kind, source = members[idx], "sample", idx
                staffed = staffed | added
                firings.append(Firing(d + 1, s + 1, kind, source, frozenset(added)))
            for item in staffed:
                grid[_nurse_index(item, n), d * shifts + s] = 1
            if len(staffed) < need:
                warnings.append({"day": d + 1, "shift": s + 1, "coverage": len(staffed), "required": need})
    return SimulationResult(Schedule(grid, days, shifts), tuple(firings), tuple(warnings))
