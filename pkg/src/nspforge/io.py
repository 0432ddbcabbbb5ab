"""Readers and writers for instances, schedules, transaction and quantity tables.

Instance file::

    # comment
    [meta]
    n=2 days=1 shifts=4 y=0
    [coverage]            # one row per shift, one q/p pair per day
    1/2
    1/2
    1/2
    1/2
    [limits]              # nurse_i h b [min_shifts]
    nurse_1 4 1 2
    nurse_2 4 1 2
    [patterns]            # optional; one 0/1 string per cost column
    1001
    0100
    0110
    [costs]               # n rows x m columns
    2 1 4
    2 1 4
    [domains]             # optional; nurse_i followed by 0-based pattern indices
    nurse_1 0 2
    nurse_2 0 1 2

``max_daily=N`` may be added to ``[meta]``.  When ``[patterns]`` is omitted and
``m == 2**(shifts*days)`` the domain is every pattern in binary order.  Nurses
missing from ``[domains]`` keep the whole domain.
"""

from __future__ import annotations

import csv
import io as _stdio
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._util import content_lines, natural_key, sorted_items
from .exceptions import ConsistencyError, ParseError, ShapeError
from .model import NspInstance, Schedule, ShiftPattern, WcspInstance, as_fraction

_SECTIONS = ("meta", "coverage", "limits", "patterns", "costs", "domains")
_REQUIRED = ("meta", "coverage", "limits", "costs")
_SLOT_RE = re.compile(r"^Day_?(\d+)Shift_?(\d+)$", re.IGNORECASE)


def format_number(value) -> str:
    value = as_fraction(value)
    return str(value.numerator) if value.denominator == 1 else str(value)


@dataclass(frozen=True)
class TransactionDb:
    transactions: tuple
    item_universe: tuple = ()

    def __post_init__(self):
        txs = tuple((str(label), frozenset(items)) for label, items in self.transactions)
        labels = [label for label, _ in txs]
        if len(set(labels)) != len(labels):
            raise ValueError("transaction labels must be unique")
        seen = set().union(*(items for _, items in txs)) if txs else set()
        universe = tuple(self.item_universe) or tuple(sorted_items(seen))
        missing = seen - set(universe)
        if missing:
            raise ConsistencyError(f"items outside the universe: {sorted_items(missing)}")
        object.__setattr__(self, "transactions", txs)
        object.__setattr__(self, "item_universe", universe)

    @classmethod
    def from_lists(cls, rows, item_universe=()):
        """Build from ``[(label, [items...]), ...]`` or bare item lists (labelled T1, T2, ...)."""
        txs = []
        for idx, row in enumerate(rows, start=1):
            if isinstance(row, tuple) and len(row) == 2 and isinstance(row[0], str):
                txs.append(row)
            else:
                txs.append((f"T{idx}", row))
        return cls(tuple(txs), tuple(item_universe))

    def __len__(self):
        return len(self.transactions)

    def itemsets(self) -> list:
        return [items for _, items in self.transactions]


@dataclass(frozen=True)
class UtilityTable:
    utilities: dict

    def __post_init__(self):
        utils = {str(k): as_fraction(v) for k, v in dict(self.utilities).items()}
        if any(v < 0 for v in utils.values()):
            raise ValueError("utilities must be non-negative")
        object.__setattr__(self, "utilities", utils)

    def __getitem__(self, item):
        return self.utilities[item]

    def __contains__(self, item):
        return item in self.utilities


@dataclass(frozen=True)
class QuantityDb:
    """Per-slot internal quantities; zero quantities are not stored."""

    rows: tuple
    items: tuple = field(default=())

    def __post_init__(self):
        rows = []
        for label, quantities in self.rows:
            q = {str(k): int(v) for k, v in dict(quantities).items() if int(v) != 0}
            if any(v < 0 for v in q.values()):
                raise ValueError(f"negative quantity in row {label}")
            rows.append((str(label), q))
        seen = set().union(*(q for _, q in rows)) if rows else set()
        items = tuple(self.items) or tuple(sorted_items(seen))
        if seen - set(items):
            raise ConsistencyError(f"items outside the header: {sorted_items(seen - set(items))}")
        object.__setattr__(self, "rows", tuple(rows))
        object.__setattr__(self, "items", items)

    def __len__(self):
        return len(self.rows)

    def matrix(self) -> np.ndarray:
        return np.array([[q.get(it, 0) for it in self.items] for _, q in self.rows], dtype=np.int64)


# --------------------------------------------------------------------------- instances

def _split_sections(text):
    sections = {}
    current = None
    for lineno, line in content_lines(text):
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            name = m.group(1).lower()
            if name not in _SECTIONS:
                raise ParseError(f"unknown section [{name}]", lineno)
            if name in sections:
                raise ParseError(f"duplicate section [{name}]", lineno)
            current = sections.setdefault(name, [])
            continue
        if current is None:
            raise ParseError("content before the first [section]", lineno)
        current.append((lineno, line))
    for name in _REQUIRED:
        if name not in sections:
            raise ParseError(f"missing section [{name}]")
    return sections


def _int(token, lineno, what):
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"{what} must be an integer, got {token!r}", lineno) from None


def _parse_meta(lines):
    meta = {}
    for lineno, line in lines:
        for token in line.split():
            key, sep, value = token.partition("=")
            if not sep:
                raise ParseError(f"expected key=value, got {token!r}", lineno)
            meta[key.strip().lower()] = (_int(value, lineno, key), lineno)
    for key in ("n", "days", "shifts", "y"):
        if key not in meta:
            raise ParseError(f"[meta] is missing {key}")
    for key in ("n", "days", "shifts"):
        value, lineno = meta[key]
        if value < 1:
            raise ParseError(f"{key} must be >= 1 (empty problem)", lineno)
    return meta


def _parse_instance_parts(text):
    sections = _split_sections(text)
    meta = _parse_meta(sections["meta"])
    n, days, shifts = meta["n"][0], meta["days"][0], meta["shifts"][0]

    cov = sections["coverage"]
    if len(cov) != shifts:
        raise ParseError(f"[coverage] needs {shifts} rows, got {len(cov)}", cov[-1][0] if cov else None)
    q, p = [], []
    for lineno, line in cov:
        cells = line.replace(",", " ").split()
        if len(cells) != days:
            raise ParseError(f"coverage row needs {days} q/p cells, got {len(cells)}", lineno)
        qrow, prow = [], []
        for cell in cells:
            lo, sep, hi = cell.partition("/")
            if not sep:
                raise ParseError(f"coverage cell must be q/p, got {cell!r}", lineno)
            lo, hi = _int(lo, lineno, "q"), _int(hi, lineno, "p")
            if lo > hi:
                raise ParseError(f"q={lo} exceeds p={hi}", lineno)
            if lo < 0:
                raise ParseError("coverage must be non-negative", lineno)
            qrow.append(lo)
            prow.append(hi)
        q.append(qrow)
        p.append(prow)

    limits = sections["limits"]
    if len(limits) != n:
        raise ParseError(f"[limits] needs {n} nurse lines, got {len(limits)}", limits[-1][0] if limits else None)
    h, b, mins = [0] * n, [0] * n, [0] * n
    seen = set()
    for lineno, line in limits:
        parts = line.replace(",", " ").split()
        if len(parts) not in (3, 4):
            raise ParseError("limits line is 'nurse_i h b [min_shifts]'", lineno)
        m = re.fullmatch(r"(?:nurse_?)?(\d+)", parts[0], re.IGNORECASE)
        if not m:
            raise ParseError(f"bad nurse label {parts[0]!r}", lineno)
        idx = int(m.group(1)) - 1
        if not 0 <= idx < n or idx in seen:
            raise ParseError(f"nurse index {idx + 1} out of range or repeated", lineno)
        seen.add(idx)
        h[idx] = _int(parts[1], lineno, "h")
        b[idx] = _int(parts[2], lineno, "b")
        if len(parts) == 4:
            mins[idx] = _int(parts[3], lineno, "min_shifts")
        if min(h[idx], b[idx], mins[idx]) < 0:
            raise ParseError("limits must be non-negative", lineno)

    costs = sections["costs"]
    if len(costs) != n:
        raise ParseError(f"[costs] needs {n} rows, got {len(costs)}", costs[-1][0] if costs else None)
    cost = []
    for lineno, line in costs:
        row = []
        for token in line.replace(",", " ").split():
            try:
                value = Fraction(token)
            except (ValueError, ZeroDivisionError):
                raise ParseError(f"non-numeric cost {token!r}", lineno) from None
            if value < 0:
                raise ParseError(f"negative cost {token!r}", lineno)
            row.append(value)
        if cost and len(row) != len(cost[0]):
            raise ParseError(f"cost row has {len(row)} columns, expected {len(cost[0])}", lineno)
        if not row:
            raise ParseError("empty cost row", lineno)
        cost.append(row)

    max_daily = meta["max_daily"][0] if "max_daily" in meta else None
    instance = NspInstance(
        n=n, days=days, shifts_per_day=shifts, cost=cost, q=q, p=p,
        h=h, b=b, y=meta["y"][0], min_shifts=mins, max_daily=max_daily,
    )

    patterns = None
    if "patterns" in sections:
        patterns = []
        for lineno, line in sections["patterns"]:
            try:
                patterns.append(ShiftPattern.from_string(line, shifts, days))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
        if len(patterns) != instance.m:
            raise ParseError(f"[patterns] has {len(patterns)} entries but costs have {instance.m} columns")
    return instance, patterns


def parse_instance(text: str) -> NspInstance:
    """Parse an instance file into an :class:`NspInstance`."""
    return _parse_instance_parts(text)[0]


def parse_wcsp(text: str) -> WcspInstance:
    """Parse an instance file including its pattern domain."""
    instance, patterns = _parse_instance_parts(text)
    if patterns is None:
        width = instance.n_slots
        if instance.m != 2 ** width:
            raise ParseError(f"[patterns] missing and m={instance.m} != 2**{width}")
        patterns = [ShiftPattern.from_int(c, instance.shifts_per_day, instance.days) for c in range(instance.m)]
    domains = _parse_domains(_split_sections(text).get("domains"), instance)
    return WcspInstance(instance, tuple(patterns), domains)


def _parse_domains(lines, instance):
    if lines is None:
        return None
    domains = [tuple(range(instance.m))] * instance.n
    seen = set()
    for lineno, line in lines:
        parts = line.replace(",", " ").split()
        m = re.fullmatch(r"(?:nurse_?)?(\d+)", parts[0], re.IGNORECASE)
        if not m:
            raise ParseError(f"bad nurse label {parts[0]!r}", lineno)
        idx = int(m.group(1)) - 1
        if not 0 <= idx < instance.n or idx in seen:
            raise ParseError(f"nurse index {idx + 1} out of range or repeated", lineno)
        seen.add(idx)
        values = [_int(tok, lineno, "pattern index") for tok in parts[1:]]
        if any(not 0 <= v < instance.m for v in values):
            raise ParseError(f"pattern index outside 0..{instance.m - 1}", lineno)
        domains[idx] = tuple(sorted(set(values)))
    return domains


def serialize_instance(instance: NspInstance, domain=None) -> str:
    domains = None
    if isinstance(instance, WcspInstance):
        domain = instance.domain if domain is None else domain
        domains = instance.domains
        instance = instance.instance
    out = ["[meta]"]
    meta = f"n={instance.n} days={instance.days} shifts={instance.shifts_per_day} y={instance.y}"
    if instance.max_daily is not None:
        meta += f" max_daily={instance.max_daily}"
    out.append(meta)
    out.append("[coverage]")
    for qrow, prow in zip(instance.q, instance.p):
        out.append(" ".join(f"{lo}/{hi}" for lo, hi in zip(qrow, prow)))
    out.append("[limits]")
    for i in range(instance.n):
        line = f"nurse_{i + 1} {instance.h[i]} {instance.b[i]}"
        if instance.min_shifts[i]:
            line += f" {instance.min_shifts[i]}"
        out.append(line)
    if domain is not None:
        out.append("[patterns]")
        out.extend(p.to_string() for p in domain)
    out.append("[costs]")
    out.extend(" ".join(format_number(c) for c in row) for row in instance.cost)
    full = tuple(range(instance.m))
    if domains is not None and any(tuple(d) != full for d in domains):
        out.append("[domains]")
        out.extend(" ".join([f"nurse_{i + 1}", *map(str, d)]) for i, d in enumerate(domains))
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------- schedules

def _csv_rows(text):
    lines = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    return [[cell.strip() for cell in row] for row in csv.reader(lines)]


def parse_schedule(text: str) -> Schedule:
    """Read a schedule CSV (header of ``Day{k}Shift{s}`` labels, one 0/1 row per nurse).

    A leading non-slot column (nurse names) is tolerated and ignored.
    """
    rows = _csv_rows(text)
    if not rows:
        raise ParseError("empty schedule file")
    header = rows[0]
    offset = 0 if _SLOT_RE.match(header[0]) else 1
    slots = []
    for label in header[offset:]:
        m = _SLOT_RE.match(label)
        if not m:
            raise ParseError(f"bad slot label {label!r}", 1)
        slots.append((int(m.group(1)), int(m.group(2))))
    if not slots:
        raise ParseError("no slot columns", 1)
    shifts = max(s for _, s in slots)
    days = max(d for d, _ in slots)
    expected = [(d, s) for d in range(1, days + 1) for s in range(1, shifts + 1)]
    if slots != expected:
        raise ParseError("slot columns must be complete and day-major", 1)
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        cells = row[offset:]
        if len(cells) != len(slots):
            raise ParseError(f"expected {len(slots)} cells, got {len(cells)}", lineno)
        if any(c not in ("0", "1") for c in cells):
            raise ParseError("schedule cells must be 0 or 1", lineno)
        data.append([int(c) for c in cells])
    if not data:
        raise ParseError("schedule has no nurse rows")
    return Schedule(np.array(data, dtype=np.int8), days, shifts)


def serialize_schedule(schedule: Schedule) -> str:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(schedule.labels())
    writer.writerows(schedule.entries.tolist())
    return buf.getvalue()


def read_matrix_csv(text: str) -> np.ndarray:
    """Numeric CSV to a float array; a non-numeric header row or first column is skipped.

    Empty cells read as NaN so partially filled matrices can be loaded.
    """
    rows = _csv_rows(text)

    def numeric(cell):
        try:
            float(cell or "nan")
            return True
        except ValueError:
            return False

    if rows and not all(numeric(c) for c in rows[0]):
        rows = rows[1:]
    if rows and not numeric(rows[0][0]):
        rows = [r[1:] for r in rows]
    if not rows:
        raise ParseError("empty matrix")
    try:
        arr = np.array([[float(c.strip() or "nan") for c in r] for r in rows])
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    if arr.ndim != 2:
        raise ParseError("matrix rows have different lengths")
    return arr


def write_matrix_csv(matrix) -> str:
    arr = np.asarray(matrix)
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in arr.tolist():
        writer.writerow([repr(v) if isinstance(v, float) and not float(v).is_integer() else int(v) for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------- transactions

def schedule_to_transactions(schedule: Schedule, granularity: str = "day", nurse_labels=None) -> TransactionDb:
    """One transaction per day (nurses working that day) or per day/shift slot."""
    labels = list(nurse_labels) if nurse_labels is not None else [f"Nurse_{i + 1}" for i in range(schedule.n)]
    if len(labels) != schedule.n:
        raise ShapeError("one label per nurse required")
    cube = schedule.by_day()
    txs = []
    if granularity == "day":
        worked = cube.any(axis=2)
        for d in range(schedule.days):
            txs.append((f"Day_{d + 1}", frozenset(labels[i] for i in np.flatnonzero(worked[:, d]))))
    elif granularity in ("day-shift", "day_shift", "slot"):
        for d in range(schedule.days):
            for s in range(schedule.shifts_per_day):
                nurses = np.flatnonzero(cube[:, d, s])
                txs.append((f"Day_{d + 1}Shift_{s + 1}", frozenset(labels[i] for i in nurses)))
    else:
        raise ValueError(f"unknown granularity {granularity!r}")
    return TransactionDb(tuple(txs), tuple(labels))


def parse_transactions(text: str) -> TransactionDb:
    """``label,item1;item2;...`` per line."""
    txs = []
    for lineno, line in content_lines(text):
        label, sep, rest = line.partition(",")
        if not sep and not label:
            raise ParseError("empty transaction line", lineno)
        items = [tok.strip() for tok in rest.split(";") if tok.strip()]
        txs.append((label.strip(), items))
    try:
        return TransactionDb(tuple(txs))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def serialize_transactions(db: TransactionDb) -> str:
    return "".join(f"{label},{';'.join(sorted_items(items))}\n" for label, items in db.transactions)


def parse_quantity_table(text: str):
    """Quantity CSV (header of item ids, a ``utility`` row, one row per slot).

    Returns ``(QuantityDb, UtilityTable)``.  An item with a quantity but no
    utility raises :class:`ConsistencyError`.
    """
    rows = _csv_rows(text)
    if not rows:
        raise ParseError("empty quantity table")
    header = rows[0]
    items = tuple(header[1:])
    if not items or len(set(items)) != len(items):
        raise ParseError("header needs unique item ids after the label column", 1)
    utilities = None
    qrows = []
    for lineno, row in enumerate(rows[1:], start=2):
        label, cells = row[0], row[1:]
        if len(cells) > len(items):
            raise ParseError(f"row has {len(cells)} cells for {len(items)} items", lineno)
        cells = cells + [""] * (len(items) - len(cells))
        if label.lower() == "utility":
            if utilities is not None:
                raise ParseError("duplicate utility row", lineno)
            utilities = {}
            for item, cell in zip(items, cells):
                if cell:
                    try:
                        utilities[item] = Fraction(cell)
                    except ValueError:
                        raise ParseError(f"non-numeric utility {cell!r}", lineno) from None
            continue
        q = {}
        for item, cell in zip(items, cells):
            if not cell:
                continue
            value = _int(cell, lineno, "quantity")
            if value < 0:
                raise ParseError("quantities must be non-negative", lineno)
            if value:
                q[item] = value
        qrows.append((label, q))
    labels = [label for label, _ in qrows]
    if len(set(labels)) != len(labels):
        raise ParseError("row labels must be unique")
    utilities = utilities or {}
    used = set().union(*(q for _, q in qrows)) if qrows else set()
    missing = used - set(utilities)
    if missing:
        raise ConsistencyError(f"no utility for items {sorted(missing, key=natural_key)}")
    return QuantityDb(tuple(qrows), items), UtilityTable(utilities)


def serialize_quantity_table(db: QuantityDb, utilities: UtilityTable) -> str:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", *db.items])
    writer.writerow(["utility", *(format_number(utilities[it]) if it in utilities else "" for it in db.items)])
    for label, q in db.rows:
        writer.writerow([label, *(q.get(it, 0) for it in db.items)])
    return buf.getvalue()


def read_table_csv(text: str):
    """Header and string rows of a plain CSV table (used for categorical training data)."""
    rows = _csv_rows(text)
    if not rows:
        raise ParseError("empty table")
    return rows[0], rows[1:]

