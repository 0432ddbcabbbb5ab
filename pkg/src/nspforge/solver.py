"""Exact and local-search solvers for the nurse scheduling WCSP.

All searches work on domain indices.  Maximisation is handled by a per-row
complement (``max_j c_ij - c_ij``), which turns it into a minimisation with
identical ordering and pruning behaviour; reported costs are always in the
original units.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .exceptions import IncompleteAssignmentError, ShapeError
from .io import format_number
from .model import (
    Assignment,
    NspInstance,
    Schedule,
    ShiftPattern,
    WcspInstance,
    as_assignment,
    solution_cost,
)

SENSES = ("minimize", "maximize")
INIT_MODES = ("random", "dfs", "dfs_cp")


@dataclass(frozen=True)
class ConstraintVerdict:
    constraint_id: str
    satisfied: bool
    witness: Optional[dict] = None

    def __post_init__(self):
        if self.satisfied != (self.witness is None):
            raise ValueError("witness must be present exactly when the constraint is violated")

    def to_dict(self) -> dict:
        return {"constraint": self.constraint_id, "satisfied": self.satisfied, "witness": self.witness}


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    prunes: int = 0
    incumbent_updates: int = 0
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        # wall-clock time is left out so that JSON output stays reproducible
        return {
            "nodes_expanded": self.nodes_expanded,
            "prunes": self.prunes,
            "incumbent_updates": self.incumbent_updates,
        }


@dataclass
class SolveResult:
    """Outcome of a solve.

    ``assignment`` is ``None`` when no feasible assignment was found, in which
    case ``cost`` is the instance's cost cap.  ``solutions`` holds every
    optimum found when ties were collected; ``trace`` is the incumbent cost
    after each accepted local-search move, starting with the initial cost.
    """

    assignment: Optional[Assignment]
    cost: Fraction
    optimal: bool
    stats: SearchStats
    sense: str = "minimize"
    patterns: Optional[tuple] = None
    solutions: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.assignment is not None

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "optimal": self.optimal,
            "sense": self.sense,
            "cost": format_number(self.cost),
            "assignment": list(self.patterns) if self.patterns is not None else None,
            "assignment_indices": list(self.assignment) if self.assignment is not None else None,
            "solutions": [list(s) for s in self.solutions],
            "trace": [format_number(c) for c in self.trace],
            "stats": self.stats.to_dict(),
        }


# --------------------------------------------------------------------------- constraints

def check_unary(pattern: ShiftPattern, nurse: int, instance: NspInstance) -> list:
    """Verdicts for the per-nurse constraints on a single pattern.

    const2: ``min_shifts[i] <= shifts <= h[i]``; const3: night->next-morning
    pairs ``<= y``; const4: night shifts ``<= b[i]``.  When the instance sets
    ``max_daily`` an extra ``daily`` verdict bounds shifts worked on one day.
    """
    if (pattern.days, pattern.shifts_per_day) != (instance.days, instance.shifts_per_day):
        raise ShapeError(f"pattern {pattern} does not match the instance shape")
    if not 0 <= nurse < instance.n:
        raise IndexError(f"nurse {nurse} out of range 0..{instance.n - 1}")
    out = []
    total = pattern.shift_count()
    lo, hi = instance.min_shifts[nurse], instance.h[nurse]
    if total > hi:
        out.append(ConstraintVerdict("const2", False, {"nurse": nurse, "shifts": total, "max": hi}))
    elif total < lo:
        out.append(ConstraintVerdict("const2", False, {"nurse": nurse, "shifts": total, "min": lo}))
    else:
        out.append(ConstraintVerdict("const2", True))

    pairs = pattern.night_morning_pairs()
    if pairs > instance.y:
        s, bits = pattern.shifts_per_day, pattern.bits
        first = next(k for k in range(1, pattern.days)
                     if bits[(k - 1) * s + s - 1] and bits[k * s])
        out.append(ConstraintVerdict("const3", False,
                                     {"nurse": nurse, "pairs": pairs, "max": instance.y, "first_day": first}))
    else:
        out.append(ConstraintVerdict("const3", True))

    nights = pattern.night_count()
    if nights > instance.b[nurse]:
        out.append(ConstraintVerdict("const4", False, {"nurse": nurse, "nights": nights, "max": instance.b[nurse]}))
    else:
        out.append(ConstraintVerdict("const4", True))

    if instance.max_daily is not None:
        counts = pattern.day_counts()
        worst = max(counts)
        if worst > instance.max_daily:
            out.append(ConstraintVerdict("daily", False, {
                "nurse": nurse, "day": counts.index(worst) + 1, "shifts": worst, "max": instance.max_daily}))
        else:
            out.append(ConstraintVerdict("daily", True))
    return out


def unary_ok(pattern: ShiftPattern, nurse: int, instance: NspInstance) -> bool:
    return all(v.satisfied for v in check_unary(pattern, nurse, instance))


def _patterns_of(assignment, problem):
    """Resolve an assignment (indices, patterns or a Schedule) to a list of patterns and the instance."""
    if isinstance(assignment, Schedule):
        return assignment.patterns(), getattr(problem, "instance", problem)
    if isinstance(problem, WcspInstance):
        values = list(assignment)
        if values and isinstance(values[0], ShiftPattern):
            pats = values
        else:
            a = as_assignment(values)
            if len(a) != problem.n or not a.complete:
                raise IncompleteAssignmentError(f"need all {problem.n} nurses assigned, got {list(a.values)}")
            pats = [problem.domain[j] for j in a]
        return pats, problem.instance
    pats = list(assignment)
    if not all(isinstance(p, ShiftPattern) for p in pats):
        raise IncompleteAssignmentError("index assignments need a WcspInstance to resolve patterns")
    return pats, problem


def check_global(assignment, problem) -> ConstraintVerdict:
    """Coverage ``q <= sum_i A(i, slot) <= p`` on every slot (const1).

    ``assignment`` is a complete index assignment (with a WcspInstance), a
    list of patterns, or a Schedule.
    """
    pats, instance = _patterns_of(assignment, problem)
    if len(pats) != instance.n or any(p is None for p in pats):
        raise IncompleteAssignmentError(f"need all {instance.n} nurses assigned")
    q, p = instance.coverage_bounds()
    cov = np.sum([pat.array for pat in pats], axis=0, dtype=np.int64)
    bad = np.flatnonzero((cov < q) | (cov > p))
    if bad.size == 0:
        return ConstraintVerdict("const1", True)
    z = int(bad[0])
    s = instance.shifts_per_day
    return ConstraintVerdict("const1", False, {
        "day": z // s + 1, "shift": z % s + 1, "coverage": int(cov[z]), "min": int(q[z]), "max": int(p[z])})


def is_feasible(assignment, problem) -> bool:
    pats, instance = _patterns_of(assignment, problem)
    if not check_global(pats, instance).satisfied:
        return False
    return all(unary_ok(pat, i, instance) for i, pat in enumerate(pats))


# --------------------------------------------------------------------------- propagation

def node_consistency(wcsp: WcspInstance) -> WcspInstance:
    """Keep only the values that satisfy every unary constraint of their nurse."""
    inst = wcsp.instance
    ok_cache = {}
    domains = []
    for i, dom in enumerate(wcsp.domains):
        keep = []
        for j in dom:
            key = (j, inst.h[i], inst.b[i], inst.min_shifts[i])
            if key not in ok_cache:
                ok_cache[key] = unary_ok(wcsp.domain[j], i, inst)
            if ok_cache[key]:
                keep.append(j)
        domains.append(tuple(keep))
    return wcsp.with_domains(domains)


class _SupportSearch:
    """Exact test for a coverage-feasible completion of the other nurses.

    Nurses are processed in a fixed order; at each depth the still reachable
    per-slot coverage interval is checked before branching, and failed
    ``(depth, coverage)`` states are memoised.
    """

    def __init__(self, bits, domains, others, q, p):
        self.q, self.p = q, p
        self.levels = [np.unique(bits[list(domains[i])], axis=0) for i in others]
        slots = bits.shape[1]
        self.suffix_max = [np.zeros(slots, dtype=np.int64)]
        self.suffix_min = [np.zeros(slots, dtype=np.int64)]
        for lv in reversed(self.levels):
            self.suffix_max.append(self.suffix_max[-1] + lv.max(axis=0))
            self.suffix_min.append(self.suffix_min[-1] + lv.min(axis=0))
        self.suffix_max.reverse()
        self.suffix_min.reverse()
        self.dead = set()

    def supported(self, cov, depth=0) -> bool:
        if (cov + self.suffix_max[depth] < self.q).any() or (cov + self.suffix_min[depth] > self.p).any():
            return False
        if depth == len(self.levels):
            return True
        key = (depth, cov.tobytes())
        if key in self.dead:
            return False
        for row in self.levels[depth]:
            if self.supported(cov + row, depth + 1):
                return True
        self.dead.add(key)
        return False


def gac_filter(wcsp: WcspInstance) -> WcspInstance:
    """Remove values with no coverage-feasible completion; iterate to a fixpoint."""
    q, p = wcsp.instance.coverage_bounds()
    bits = wcsp.bit_matrix
    domains = [list(d) for d in wcsp.domains]
    n = wcsp.n
    if any(not d for d in domains):
        return wcsp.with_domains(domains)
    changed = True
    while changed:
        changed = False
        for i in range(n):
            others = [o for o in range(n) if o != i]
            search = _SupportSearch(bits, domains, others, q, p)
            keep = [j for j in domains[i] if search.supported(bits[j].copy())]
            if len(keep) != len(domains[i]):
                domains[i] = keep
                changed = True
                if not keep:
                    return wcsp.with_domains(domains)
    return wcsp.with_domains(domains)


def propagate(wcsp: WcspInstance, nc: bool = True, gac: bool = True) -> WcspInstance:
    if nc:
        wcsp = node_consistency(wcsp)
    if gac and not wcsp.inconsistent:
        wcsp = gac_filter(wcsp)
    return wcsp


# --------------------------------------------------------------------------- bounds

def _check_sense(sense):
    if sense not in SENSES:
        raise ValueError(f"sense must be one of {SENSES}, got {sense!r}")


def compute_lb(partial, wcsp: WcspInstance, sense: str = "minimize") -> Fraction:
    """Optimistic bound: assigned costs plus the best remaining value per unassigned nurse.

    For ``maximize`` this is an upper bound (best = max).  An unassigned
    nurse with an empty domain gives the cost cap.
    """
    _check_sense(sense)
    partial = as_assignment(partial)
    if len(partial) != wcsp.n:
        raise ShapeError(f"assignment has {len(partial)} entries for {wcsp.n} nurses")
    cost = wcsp.instance.cost
    pick = min if sense == "minimize" else max
    total = Fraction(0)
    for i, j in enumerate(partial):
        if j is not None:
            total += cost[i][j]
        elif not wcsp.domains[i]:
            return wcsp.cost_cap
        else:
            total += pick(cost[i][v] for v in wcsp.domains[i])
    return total


def _search_costs(wcsp, sense):
    """Per-row costs as a minimisation problem."""
    cost = wcsp.instance.cost
    if sense == "minimize":
        return cost
    return tuple(tuple(max(row) - c for c in row) for row in cost)


def _from_search_cost(value, wcsp, sense):
    if sense == "minimize":
        return value
    return sum(max(row) for row in wcsp.instance.cost) - value


class _Tree:
    """Shared bookkeeping for the depth-first searches."""

    def __init__(self, wcsp: WcspInstance, order: Sequence[int]):
        inst = wcsp.instance
        self.wcsp = wcsp
        self.order = list(order)
        self.bits = wcsp.bit_matrix
        self.q, self.p = inst.coverage_bounds()
        self.unary = {}
        slots = inst.n_slots
        reach = [np.zeros(slots, dtype=np.int64)]
        for i in reversed(self.order):
            d = list(wcsp.domains[i])
            reach.append(reach[-1] + (self.bits[d].max(axis=0) if d else 0))
        reach.reverse()
        # reach[d]: how many of the nurses at depth >= d could still cover each slot
        self.reach = reach

    def value_ok(self, nurse, value) -> bool:
        key = (nurse, value)
        if key not in self.unary:
            self.unary[key] = unary_ok(self.wcsp.domain[value], nurse, self.wcsp.instance)
        return self.unary[key]

    def coverage_ok(self, cov, depth) -> bool:
        """``depth`` counts the nurses already placed."""
        return not ((cov > self.p).any() or (cov + self.reach[depth] < self.q).any())


def _variable_order(wcsp, heuristic):
    if heuristic == "fail-first":
        return sorted(range(wcsp.n), key=lambda i: (len(wcsp.domains[i]), i))
    if heuristic == "index":
        return list(range(wcsp.n))
    raise ValueError(f"unknown variable order {heuristic!r}")


def _result(wcsp, assignment, cost, optimal, stats, sense, **extra):
    pats = None if assignment is None else tuple(wcsp.domain[j].to_string() for j in assignment)
    return SolveResult(assignment, cost, optimal, stats, sense, pats, **extra)


def branch_and_bound(wcsp: WcspInstance, sense: str = "minimize", variable_order: str = "fail-first",
                     value_order: str = "cost", use_bound: bool = True, collect_ties: bool = False,
                     node_limit: Optional[int] = None) -> SolveResult:
    """Depth-first Branch & Bound over the current per-nurse domains.

    Every value placed on a nurse counts as an expanded node.  A node is cut
    when the placed pattern breaks a unary constraint, when coverage can no
    longer be met, or (with ``use_bound``) when its optimistic bound cannot
    beat the incumbent.  With ``collect_ties`` the cut is strict, so every
    optimal assignment is reached and listed in ``solutions``.

    ``node_limit`` stops the search early; the result is then not proved
    optimal.
    """
    _check_sense(sense)
    start = time.perf_counter()
    stats = SearchStats()
    order = _variable_order(wcsp, variable_order)
    if wcsp.inconsistent:
        stats.elapsed = time.perf_counter() - start
        return _result(wcsp, None, wcsp.cost_cap, True, stats, sense)

    tree = _Tree(wcsp, order)
    costs = _search_costs(wcsp, sense)
    n = wcsp.n
    values = []
    for i in order:
        dom = list(wcsp.domains[i])
        if value_order == "cost":
            dom.sort(key=lambda j: (costs[i][j], j))
        elif value_order != "index":
            raise ValueError(f"unknown value order {value_order!r}")
        values.append(dom)
    rest = [Fraction(0)] * (n + 1)
    for d in range(n - 1, -1, -1):
        i = order[d]
        rest[d] = rest[d + 1] + min(costs[i][j] for j in wcsp.domains[i])

    best = [None]
    found = []
    chosen = [None] * n
    stopped = [False]

    def descend(depth, cov, g):
        i = order[depth]
        for j in values[depth]:
            if node_limit is not None and stats.nodes_expanded >= node_limit:
                stopped[0] = True
                return
            stats.nodes_expanded += 1
            if not tree.value_ok(i, j):
                stats.prunes += 1
                continue
            c = cov + tree.bits[j]
            if not tree.coverage_ok(c, depth + 1):
                stats.prunes += 1
                continue
            g2 = g + costs[i][j]
            if use_bound and best[0] is not None:
                bound = g2 + rest[depth + 1]
                if bound > best[0] or (bound == best[0] and not collect_ties):
                    stats.prunes += 1
                    continue
            chosen[i] = j
            if depth + 1 == n:
                snapshot = tuple(chosen)
                if best[0] is None or g2 < best[0]:
                    best[0] = g2
                    found[:] = [snapshot]
                    stats.incumbent_updates += 1
                elif g2 == best[0] and collect_ties:
                    found.append(snapshot)
            else:
                descend(depth + 1, c, g2)
            chosen[i] = None
            if stopped[0]:
                return

    descend(0, np.zeros(wcsp.instance.n_slots, dtype=np.int64), Fraction(0))
    stats.elapsed = time.perf_counter() - start
    optimal = not stopped[0]
    if best[0] is None:
        return _result(wcsp, None, wcsp.cost_cap, optimal, stats, sense)
    found.sort()
    head = Assignment(found[0])
    cost = _from_search_cost(best[0], wcsp, sense)
    return _result(wcsp, head, cost, optimal, stats, sense,
                   solutions=[Assignment(s) for s in found] if collect_ties else [head])


def _first_feasible(wcsp, rng=None, stats=None, node_limit=None):
    """Index-ordered DFS; ``rng`` shuffles the value order at every node."""
    stats = stats if stats is not None else SearchStats()
    n = wcsp.n
    if wcsp.inconsistent:
        return None, stats
    order = list(range(n))
    tree = _Tree(wcsp, order)
    chosen = [None] * n

    def descend(depth, cov):
        i = order[depth]
        dom = list(wcsp.domains[i])
        if rng is not None:
            rng.shuffle(dom)
        for j in dom:
            if node_limit is not None and stats.nodes_expanded >= node_limit:
                return None
            stats.nodes_expanded += 1
            if not tree.value_ok(i, j):
                stats.prunes += 1
                continue
            c = cov + tree.bits[j]
            if not tree.coverage_ok(c, depth + 1):
                stats.prunes += 1
                continue
            chosen[i] = j
            if depth + 1 == n or descend(depth + 1, c):
                return True
        chosen[i] = None
        return False

    ok = descend(0, np.zeros(wcsp.instance.n_slots, dtype=np.int64))
    if ok:
        stats.incumbent_updates += 1
        return Assignment(tuple(chosen)), stats
    return None, stats


def dfs_first_feasible(wcsp: WcspInstance, sense: str = "minimize") -> SolveResult:
    """First feasible assignment in nurse-index and domain order."""
    _check_sense(sense)
    start = time.perf_counter()
    found, stats = _first_feasible(wcsp)
    stats.elapsed = time.perf_counter() - start
    if found is None:
        return _result(wcsp, None, wcsp.cost_cap, False, stats, sense)
    return _result(wcsp, found, solution_cost(found, wcsp.instance), False, stats, sense)


# --------------------------------------------------------------------------- local search

def _random_start(wcsp, rng, stats, max_retries, fallback):
    for _ in range(max_retries):
        pick = tuple(int(rng.choice(d)) for d in wcsp.domains)
        stats.nodes_expanded += 1
        if is_feasible(pick, wcsp):
            stats.incumbent_updates += 1
            return Assignment(pick)
    if fallback:
        found, _ = _first_feasible(wcsp, rng=rng, stats=stats)
        return found
    return None


def sls_solve(wcsp: WcspInstance, init: str = "dfs", budget: int = 1000, seed: int = 0,
              sense: str = "minimize", max_retries: int = 1000, fallback: bool = True) -> SolveResult:
    """Single-variable hill climbing from a feasible start.

    ``init`` picks the start: ``random`` draws one value per nurse until the
    draw is feasible (after ``max_retries`` draws it falls back to a DFS with
    shuffled value order unless ``fallback`` is off), ``dfs`` takes the first
    feasible assignment, and ``dfs_cp`` does the same after NC and GAC.

    The climb sweeps nurses in index order and, for each, tries its values
    from best to worst weight, taking the first feasible strictly improving
    change.  ``budget`` caps the number of candidate moves examined; the
    search also ends after a sweep with no improvement.
    """
    _check_sense(sense)
    if init not in INIT_MODES:
        raise ValueError(f"init must be one of {INIT_MODES}, got {init!r}")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    start = time.perf_counter()
    stats = SearchStats()
    rng = np.random.default_rng(seed)
    if init == "dfs_cp":
        wcsp = propagate(wcsp)
    if wcsp.inconsistent:
        current = None
    elif init == "random":
        current = _random_start(wcsp, rng, stats, max_retries, fallback)
    else:
        current, _ = _first_feasible(wcsp, stats=stats)
    if current is None:
        stats.elapsed = time.perf_counter() - start
        return _result(wcsp, None, wcsp.cost_cap, False, stats, sense)

    inst = wcsp.instance
    costs = _search_costs(wcsp, sense)
    q, p = inst.coverage_bounds()
    bits = wcsp.bit_matrix
    vals = list(current)
    cov = bits[vals].sum(axis=0)
    trace = [solution_cost(current, inst)]
    ordered = [sorted(d, key=lambda j, i=i: (costs[i][j], j)) for i, d in enumerate(wcsp.domains)]
    unary = {}
    examined = 0
    improved = True
    while improved and examined < budget:
        improved = False
        for i in range(wcsp.n):
            here = costs[i][vals[i]]
            for j in ordered[i]:
                if costs[i][j] >= here:
                    break
                if examined >= budget:
                    break
                examined += 1
                stats.nodes_expanded += 1
                if (i, j) not in unary:
                    unary[(i, j)] = unary_ok(wcsp.domain[j], i, inst)
                if not unary[(i, j)]:
                    stats.prunes += 1
                    continue
                c = cov - bits[vals[i]] + bits[j]
                if (c < q).any() or (c > p).any():
                    stats.prunes += 1
                    continue
                vals[i], cov = j, c
                stats.incumbent_updates += 1
                trace.append(solution_cost(vals, inst))
                improved = True
                break
            if examined >= budget:
                break
    final = Assignment(tuple(vals))
    stats.elapsed = time.perf_counter() - start
    return _result(wcsp, final, trace[-1], False, stats, sense, trace=trace)
