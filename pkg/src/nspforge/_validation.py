"""Input coercion shared by the estimators and module functions."""

import numpy as np
from sklearn.utils import check_array

from .exceptions import LearningError, ShapeError
from .io import QuantityDb, TransactionDb, UtilityTable
from .model import Schedule


def _item_names(count):
    return [f"Nurse_{j + 1}" for j in range(count)]


def check_transactions(X) -> TransactionDb:
    """Accept a TransactionDb, a sequence of itemsets, or a 0/1 matrix (rows = transactions)."""
    if isinstance(X, TransactionDb):
        return X
    if isinstance(X, np.ndarray):
        arr = check_array(X, dtype=np.int64, ensure_min_samples=0)
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("transaction matrix must be 0/1")
        names = _item_names(arr.shape[1])
        return TransactionDb(
            tuple((f"T{r + 1}", frozenset(names[c] for c in np.flatnonzero(row))) for r, row in enumerate(arr)),
            tuple(names),
        )
    return TransactionDb.from_lists(list(X))


def check_quantities(X, utilities=None):
    """Return ``(QuantityDb, UtilityTable)`` from tables or from a quantity matrix plus utility vector."""
    if isinstance(X, tuple) and len(X) == 2 and isinstance(X[0], QuantityDb):
        X, utilities = X
    if isinstance(X, QuantityDb):
        if utilities is None:
            raise ValueError("utilities are required")
        if not isinstance(utilities, UtilityTable):
            utilities = UtilityTable(dict(utilities))
        return X, utilities
    arr = check_array(X, dtype=np.int64, ensure_min_samples=0)
    if (arr < 0).any():
        raise ValueError("quantities must be non-negative")
    names = _item_names(arr.shape[1])
    if utilities is None:
        raise ValueError("utilities are required")
    if not isinstance(utilities, UtilityTable):
        utilities = list(utilities)
        if len(utilities) != arr.shape[1]:
            raise ShapeError(f"{len(utilities)} utilities for {arr.shape[1]} items")
        utilities = UtilityTable(dict(zip(names, utilities)))
    rows = tuple((f"T{r + 1}", {names[c]: int(v) for c, v in enumerate(row) if v}) for r, row in enumerate(arr))
    return QuantityDb(rows, tuple(names)), utilities


def check_schedule(schedule, days=None, shifts_per_day=None) -> Schedule:
    if isinstance(schedule, Schedule):
        return schedule
    if days is None or shifts_per_day is None:
        raise ValueError("raw arrays need days and shifts_per_day")
    return Schedule(np.asarray(schedule), days, shifts_per_day)


def check_corpus(schedules, days=None, shifts_per_day=None) -> list:
    """Non-empty list of same-shaped schedules."""
    if isinstance(schedules, Schedule):
        schedules = [schedules]
    corpus = [check_schedule(s, days, shifts_per_day) for s in schedules]
    if not corpus:
        raise LearningError("need at least one schedule")
    first = corpus[0]
    for s in corpus[1:]:
        if (s.shape, s.days, s.shifts_per_day) != (first.shape, first.days, first.shifts_per_day):
            raise ShapeError("schedules have inconsistent shapes")
    return corpus


def check_nonnegative(X, name="X") -> np.ndarray:
    arr = check_array(X, dtype=np.float64, ensure_all_finite=True, ensure_min_samples=1)
    if (arr < 0).any():
        raise ValueError(f"{name} has negative entries")
    return arr
