"""Core domain types: shift patterns, schedules, NSP parameters and the WCSP shape.

Slots are ordered day-major: slot ``z`` (0-based) is ``(day - 1) * shifts_per_day
+ (shift - 1)``.  Within a day the first shift is the morning shift and the last
one is the night shift.

Costs are kept as :class:`fractions.Fraction` so that bound comparisons in the
solvers are exact.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Integral, Real
from typing import Iterable, Optional, Sequence

import numpy as np

from .exceptions import IncompleteAssignmentError, ShapeError


def as_fraction(value) -> Fraction:
    """Convert ints, decimal strings, floats and Fractions to an exact Fraction.

    Floats go through their shortest repr, so ``0.6`` becomes ``3/5`` rather
    than the binary approximation.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not costs")
    if isinstance(value, Integral):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, Real):
        return Fraction(repr(float(value)))
    return Fraction(value)


def slot_index(day: int, shift: int, shifts_per_day: int) -> int:
    return (day - 1) * shifts_per_day + (shift - 1)


def slot_label(day: int, shift: int) -> str:
    return f"Day{day}Shift{shift}"


def _positive_int(name, value):
    if isinstance(value, bool) or not isinstance(value, Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class ShiftPattern:
    """One nurse's assignment over the whole horizon, as a bit vector."""

    bits: tuple
    shifts_per_day: int
    days: int

    def __post_init__(self):
        s = _positive_int("shifts_per_day", self.shifts_per_day)
        k = _positive_int("days", self.days)
        bits = tuple(bool(b) for b in self.bits)
        if len(bits) != s * k:
            raise ShapeError(f"pattern has {len(bits)} bits, expected {s}*{k}={s * k}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_string(cls, text: str, shifts_per_day: int, days: Optional[int] = None) -> "ShiftPattern":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a 0/1 pattern string: {text!r}")
        if days is None:
            if len(text) % shifts_per_day:
                raise ShapeError(f"length {len(text)} is not a multiple of {shifts_per_day} shifts")
            days = len(text) // shifts_per_day
        return cls(tuple(c == "1" for c in text), shifts_per_day, days)

    @classmethod
    def from_int(cls, code: int, shifts_per_day: int, days: int) -> "ShiftPattern":
        """Pattern whose string form is ``code`` written in binary (first slot = MSB)."""
        width = shifts_per_day * days
        return cls.from_string(format(code, f"0{width}b"), shifts_per_day, days)

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def __str__(self):
        return self.to_string()

    @property
    def n_slots(self) -> int:
        return len(self.bits)

    def assigned(self, day: int, shift: int) -> bool:
        if not 1 <= day <= self.days:
            raise IndexError(f"day {day} outside 1..{self.days}")
        if not 1 <= shift <= self.shifts_per_day:
            raise IndexError(f"shift {shift} outside 1..{self.shifts_per_day}")
        return self.bits[slot_index(day, shift, self.shifts_per_day)]

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.fromiter(self.bits, dtype=np.int8, count=len(self.bits))
        arr.flags.writeable = False
        return arr

    def shift_count(self) -> int:
        return sum(self.bits)

    def day_counts(self) -> tuple:
        s = self.shifts_per_day
        return tuple(sum(self.bits[d * s:(d + 1) * s]) for d in range(self.days))

    def night_count(self) -> int:
        s = self.shifts_per_day
        return sum(self.bits[d * s + s - 1] for d in range(self.days))

    def night_morning_pairs(self) -> int:
        """Number of days ``k`` with a night shift on ``k`` and a morning shift on ``k + 1``."""
        s = self.shifts_per_day
        return sum(
            self.bits[d * s + s - 1] and self.bits[(d + 1) * s]
            for d in range(self.days - 1)
        )


def assigned(pattern: ShiftPattern, day: int, shift: int) -> bool:
    """Whether ``pattern`` works ``shift`` on ``day`` (both 1-based)."""
    return pattern.assigned(day, shift)


def pattern_cost(pattern: ShiftPattern, per_shift_costs: Sequence) -> Fraction:
    """Sum of the per-shift cost of every worked slot.

    >>> p = ShiftPattern.from_string("0100100011000000100000101000", 4)
    >>> pattern_cost(p, [1, 2, 1, 3])
    Fraction(9, 1)
    """
    costs = [as_fraction(c) for c in per_shift_costs]
    if len(costs) != pattern.shifts_per_day:
        raise ShapeError(f"expected {pattern.shifts_per_day} per-shift costs, got {len(costs)}")
    s = pattern.shifts_per_day
    return sum((costs[z % s] for z, bit in enumerate(pattern.bits) if bit), Fraction(0))


@dataclass(frozen=True, eq=False)
class Schedule:
    """Binary nurse x slot matrix."""

    entries: np.ndarray
    days: int
    shifts_per_day: int

    def __post_init__(self):
        _positive_int("days", self.days)
        _positive_int("shifts_per_day", self.shifts_per_day)
        arr = np.array(self.entries, copy=True)
        if arr.ndim != 2:
            raise ShapeError(f"schedule must be 2-D, got {arr.ndim}-D")
        if arr.shape[1] != self.days * self.shifts_per_day:
            raise ShapeError(
                f"schedule has {arr.shape[1]} columns, expected "
                f"{self.days}*{self.shifts_per_day}={self.days * self.shifts_per_day}"
            )
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("schedule entries must be 0 or 1")
        arr = arr.astype(np.int8)
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @classmethod
    def from_patterns(cls, patterns: Sequence[ShiftPattern]) -> "Schedule":
        if not patterns:
            raise ShapeError("need at least one pattern")
        first = patterns[0]
        if any((p.days, p.shifts_per_day) != (first.days, first.shifts_per_day) for p in patterns):
            raise ShapeError("patterns have different shapes")
        return cls(np.array([p.array for p in patterns]), first.days, first.shifts_per_day)

    @classmethod
    def zeros(cls, n: int, days: int, shifts_per_day: int) -> "Schedule":
        return cls(np.zeros((n, days * shifts_per_day), dtype=np.int8), days, shifts_per_day)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def shape(self) -> tuple:
        return self.entries.shape

    def pattern(self, nurse: int) -> ShiftPattern:
        """Row ``nurse`` (0-based) as a pattern."""
        return ShiftPattern(tuple(self.entries[nurse]), self.shifts_per_day, self.days)

    def patterns(self) -> list:
        return [self.pattern(i) for i in range(self.n)]

    def labels(self) -> list:
        return [slot_label(d, s) for d in range(1, self.days + 1) for s in range(1, self.shifts_per_day + 1)]

    def by_day(self) -> np.ndarray:
        """View shaped ``(n, days, shifts_per_day)``."""
        return self.entries.reshape(self.n, self.days, self.shifts_per_day)

    def __eq__(self, other):
        if not isinstance(other, Schedule):
            return NotImplemented
        return (
            (self.days, self.shifts_per_day) == (other.days, other.shifts_per_day)
            and np.array_equal(self.entries, other.entries)
        )

    def __hash__(self):
        return hash((self.days, self.shifts_per_day, self.entries.tobytes(), self.entries.shape))


def _per_nurse(name, value, n):
    if isinstance(value, Integral) and not isinstance(value, bool):
        value = (int(value),) * n
    value = tuple(int(v) for v in value)
    if len(value) != n:
        raise ShapeError(f"{name} has {len(value)} entries, expected {n}")
    if any(v < 0 for v in value):
        raise ValueError(f"{name} entries must be >= 0")
    return value


def _coverage(name, value, shifts, days):
    if isinstance(value, Integral) and not isinstance(value, bool):
        value = [[int(value)] * days for _ in range(shifts)]
    rows = tuple(tuple(int(v) for v in row) for row in value)
    if len(rows) != shifts or any(len(r) != days for r in rows):
        raise ShapeError(f"{name} must be shaped {shifts} shifts x {days} days")
    if any(v < 0 for r in rows for v in r):
        raise ValueError(f"{name} entries must be >= 0")
    return rows


@dataclass(frozen=True)
class NspInstance:
    """Parameters of one nurse scheduling problem.

    ``q`` and ``p`` are indexed ``[shift - 1][day - 1]``.  ``cost`` is
    ``n`` rows by ``m`` columns, one column per candidate shift pattern.

    ``min_shifts`` (lower bound on a nurse's total shifts) and ``max_daily``
    (upper bound on shifts worked in a single day) are optional extra unary
    bounds used by worked examples and by learned models; they default to no
    restriction.
    """

    n: int
    days: int
    shifts_per_day: int
    cost: tuple
    q: tuple
    p: tuple
    h: tuple
    b: tuple
    y: int
    min_shifts: Optional[tuple] = None
    max_daily: Optional[int] = None

    def __post_init__(self):
        n = _positive_int("n", self.n)
        k = _positive_int("days", self.days)
        s = _positive_int("shifts_per_day", self.shifts_per_day)
        cost = tuple(tuple(as_fraction(c) for c in row) for row in self.cost)
        if len(cost) != n:
            raise ShapeError(f"cost has {len(cost)} rows, expected n={n}")
        widths = {len(row) for row in cost}
        if len(widths) != 1 or 0 in widths:
            raise ShapeError("cost rows must be non-empty and of equal length")
        if any(c < 0 for row in cost for c in row):
            raise ValueError("costs must be non-negative")
        q = _coverage("q", self.q, s, k)
        p = _coverage("p", self.p, s, k)
        for si in range(s):
            for ki in range(k):
                if q[si][ki] > p[si][ki]:
                    raise ValueError(f"q > p for shift {si + 1} day {ki + 1}")
        if isinstance(self.y, bool) or int(self.y) < 0:
            raise ValueError("y must be >= 0")
        set_ = lambda name, v: object.__setattr__(self, name, v)  # noqa: E731
        set_("cost", cost)
        set_("q", q)
        set_("p", p)
        set_("h", _per_nurse("h", self.h, n))
        set_("b", _per_nurse("b", self.b, n))
        set_("y", int(self.y))
        set_("min_shifts", _per_nurse("min_shifts", 0 if self.min_shifts is None else self.min_shifts, n))
        if self.max_daily is not None:
            if int(self.max_daily) < 0:
                raise ValueError("max_daily must be >= 0")
            set_("max_daily", int(self.max_daily))

    @property
    def m(self) -> int:
        return len(self.cost[0])

    @property
    def n_slots(self) -> int:
        return self.days * self.shifts_per_day

    def coverage_bounds(self) -> tuple:
        """``(q, p)`` flattened to slot order as int arrays."""
        q = np.array(self.q, dtype=np.int64).T.reshape(-1)
        p = np.array(self.p, dtype=np.int64).T.reshape(-1)
        return q, p

    def replace(self, **changes) -> "NspInstance":
        return dataclasses.replace(self, **changes)


def default_cost_cap(instance: NspInstance) -> Fraction:
    return 1 + sum(max(row) for row in instance.cost)


@dataclass(frozen=True)
class WcspInstance:
    """Variables (nurses), shared pattern domain, per-nurse live domains and cost cap ``K``."""

    instance: NspInstance
    domain: tuple
    domains: Optional[tuple] = None
    cost_cap: Optional[Fraction] = None

    def __post_init__(self):
        inst = self.instance
        domain = tuple(self.domain)
        if len(domain) != inst.m:
            raise ShapeError(f"domain has {len(domain)} patterns but cost matrix has {inst.m} columns")
        for pat in domain:
            if (pat.days, pat.shifts_per_day) != (inst.days, inst.shifts_per_day):
                raise ShapeError(f"pattern {pat} does not match the instance shape")
        object.__setattr__(self, "domain", domain)
        if self.domains is None:
            domains = tuple(tuple(range(inst.m)) for _ in range(inst.n))
        else:
            domains = tuple(tuple(int(j) for j in d) for d in self.domains)
            if len(domains) != inst.n:
                raise ShapeError(f"expected {inst.n} per-variable domains, got {len(domains)}")
            for d in domains:
                if any(not 0 <= j < inst.m for j in d):
                    raise ValueError("per-variable domain value outside 0..m-1")
        object.__setattr__(self, "domains", domains)
        cap = default_cost_cap(inst) if self.cost_cap is None else as_fraction(self.cost_cap)
        object.__setattr__(self, "cost_cap", cap)

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def m(self) -> int:
        return self.instance.m

    @property
    def inconsistent(self) -> bool:
        return any(len(d) == 0 for d in self.domains)

    def with_domains(self, domains: Iterable) -> "WcspInstance":
        return dataclasses.replace(self, domains=tuple(tuple(d) for d in domains))

    @cached_property
    def bit_matrix(self) -> np.ndarray:
        """``m x slots`` int matrix of the domain patterns."""
        if not self.domain:
            return np.zeros((0, self.instance.n_slots), dtype=np.int64)
        arr = np.array([p.array for p in self.domain], dtype=np.int64)
        arr.flags.writeable = False
        return arr

    def domain_size(self) -> int:
        return sum(len(d) for d in self.domains)


@dataclass(frozen=True)
class Assignment:
    """Domain index per nurse; ``None`` marks an unassigned nurse."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(None if v is None else int(v) for v in self.values))

    @classmethod
    def empty(cls, n: int) -> "Assignment":
        return cls((None,) * n)

    @property
    def complete(self) -> bool:
        return all(v is not None for v in self.values)

    def assign(self, nurse: int, value: int) -> "Assignment":
        vals = list(self.values)
        vals[nurse] = value
        return Assignment(tuple(vals))

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]


def as_assignment(values) -> Assignment:
    return values if isinstance(values, Assignment) else Assignment(tuple(values))


def solution_cost(assignment, instance: NspInstance) -> Fraction:
    """Total cost ``sum_i cost[i][j_i]`` of a complete assignment."""
    assignment = as_assignment(assignment)
    if len(assignment) != instance.n or not assignment.complete:
        raise IncompleteAssignmentError(
            f"need all {instance.n} nurses assigned, got {list(assignment.values)}"
        )
    return sum((instance.cost[i][j] for i, j in enumerate(assignment)), Fraction(0))
