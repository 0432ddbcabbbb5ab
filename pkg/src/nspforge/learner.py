"""Learning constraint models from historical schedules.

Two learners live here: a passive bound learner that scans schedules and
keeps running minima/maxima of coverage and workload statistics, and a
non-negative matrix factorisation of a nurse-by-feature matrix.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import asdict, dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_corpus, check_nonnegative
from .evaluation import frobenius_distance
from .exceptions import CapacityError, LearningError, ShapeError
from .model import NspInstance, Schedule, ShiftPattern, WcspInstance, as_fraction, pattern_cost

DEFAULT_DOMAIN_CAP = 2 ** 24
NMF_EPS = 1e-12


# --------------------------------------------------------------------------- bound learning

@dataclass(frozen=True)
class LearnedConstraints:
    """Bounds that every training schedule satisfies.

    Core bounds: ``c2`` smallest slot coverage, ``c3`` most shifts one nurse
    works on one day, ``c4`` true when no nurse ever works a night followed
    by the next morning, ``c5`` most shifts one nurse works in a schedule.
    The mirrored extras are ``c2_max`` (largest coverage), ``c3_min``
    (fewest shifts on a day actually worked, 0 if nobody ever works) and
    ``c5_min`` (fewest shifts per nurse per schedule).
    """

    n: int
    days: int
    shifts_per_day: int
    c2: int
    c3: int
    c4: bool
    c5: int
    c2_max: int
    c3_min: int
    c5_min: int
    n_schedules: int = 1

    @property
    def domain_exponent(self) -> int:
        return self.days * self.shifts_per_day

    @classmethod
    def from_schedule(cls, schedule: Schedule) -> "LearnedConstraints":
        e = schedule.entries.astype(np.int64)
        cover = e.sum(axis=0)
        per_day = schedule.by_day().sum(axis=2)
        worked = per_day[per_day > 0]
        s = schedule.shifts_per_day
        nights = e[:, s - 1::s][:, :-1]
        mornings = e[:, s::s]
        totals = e.sum(axis=1)
        return cls(
            n=schedule.n, days=schedule.days, shifts_per_day=s,
            c2=int(cover.min()), c3=int(per_day.max()),
            c4=not bool((nights & mornings).any()), c5=int(totals.max()),
            c2_max=int(cover.max()), c3_min=int(worked.min()) if worked.size else 0,
            c5_min=int(totals.min()),
        )

    def merge(self, other: "LearnedConstraints") -> "LearnedConstraints":
        """Fold two summaries; associative and commutative."""
        if (self.n, self.days, self.shifts_per_day) != (other.n, other.days, other.shifts_per_day):
            raise ShapeError("cannot merge bounds learned on different schedule shapes")
        if self.c3 == 0:
            c3_min = other.c3_min
        elif other.c3 == 0:
            c3_min = self.c3_min
        else:
            c3_min = min(self.c3_min, other.c3_min)
        return LearnedConstraints(
            n=self.n, days=self.days, shifts_per_day=self.shifts_per_day,
            c2=min(self.c2, other.c2), c3=max(self.c3, other.c3), c4=self.c4 and other.c4,
            c5=max(self.c5, other.c5), c2_max=max(self.c2_max, other.c2_max), c3_min=c3_min,
            c5_min=min(self.c5_min, other.c5_min), n_schedules=self.n_schedules + other.n_schedules,
        )

    def violations(self, schedule: Schedule) -> list:
        """Names of the bounds ``schedule`` breaks (core and extras)."""
        other = LearnedConstraints.from_schedule(schedule)
        bad = []
        checks = [
            ("c2", other.c2 < self.c2), ("c3", other.c3 > self.c3), ("c4", self.c4 and not other.c4),
            ("c5", other.c5 > self.c5), ("c2_max", other.c2_max > self.c2_max),
            ("c3_min", other.c3 > 0 and other.c3_min < self.c3_min), ("c5_min", other.c5_min < self.c5_min),
        ]
        for name, broken in checks:
            if broken:
                bad.append(name)
        return bad

    def to_dict(self) -> dict:
        d = asdict(self)
        d["domain_exponent"] = self.domain_exponent
        return d

    @classmethod
    def from_dict(cls, data) -> "LearnedConstraints":
        fields_ = {k: data[k] for k in (
            "n", "days", "shifts_per_day", "c2", "c3", "c4", "c5", "c2_max", "c3_min", "c5_min")}
        fields_["c4"] = bool(fields_["c4"])
        return cls(n_schedules=data.get("n_schedules", 1), **fields_)


def learn_csp(schedules: Sequence[Schedule]) -> LearnedConstraints:
    """Scan the corpus once, folding per-schedule statistics with min/max/and."""
    try:
        corpus = check_corpus(schedules)
    except ShapeError as exc:
        raise LearningError(str(exc)) from exc
    learned = LearnedConstraints.from_schedule(corpus[0])
    for s in corpus[1:]:
        learned = learned.merge(LearnedConstraints.from_schedule(s))
    return learned


class CSPLearner(BaseEstimator):
    """Estimator wrapper around :func:`learn_csp`; ``partial_fit`` folds in more schedules."""

    def fit(self, schedules, y=None):
        self.constraints_ = learn_csp(schedules)
        return self

    def partial_fit(self, schedules, y=None):
        fresh = learn_csp(schedules)
        if hasattr(self, "constraints_"):
            fresh = self.constraints_.merge(fresh)
        self.constraints_ = fresh
        return self

    def violations(self, schedules) -> list:
        check_is_fitted(self, "constraints_")
        return [self.constraints_.violations(s) for s in check_corpus(schedules)]


def iter_patterns(learned: LearnedConstraints, min_shifts: int = 0) -> Iterator[ShiftPattern]:
    """Patterns satisfying the learned per-nurse bounds, generated day by day.

    Only the per-day limit ``c3``, the total ``c5`` (and ``min_shifts``) and,
    when ``c4`` holds, the night/next-morning ban are applied, so the output
    is exactly the node-consistent part of the full domain.
    """
    s, k = learned.shifts_per_day, learned.days
    day_options = [tuple(bits) for bits in itertools.product((0, 1), repeat=s)
                   if sum(bits) <= learned.c3]
    # ascending tuples keep the output in binary counting order
    day_options.sort()

    def extend(day, prefix, total, night_before):
        if day == k:
            if total >= min_shifts:
                yield ShiftPattern(tuple(prefix), s, k)
            return
        remaining_cap = (k - day - 1) * learned.c3
        for opt in day_options:
            t = total + sum(opt)
            if t > learned.c5 or t + remaining_cap < min_shifts:
                continue
            if learned.c4 and night_before and opt[0]:
                continue
            yield from extend(day + 1, prefix + list(opt), t, bool(opt[-1]))

    yield from extend(0, [], 0, False)


def constraints_to_wcsp(learned: LearnedConstraints, costs, cap: int = DEFAULT_DOMAIN_CAP,
                        stream: bool = False, symmetric: bool = False) -> WcspInstance:
    """Turn learned bounds into a solvable instance.

    ``costs`` gives per-shift costs, either one list for all nurses or one
    list per nurse; a pattern's weight is the sum over its worked shifts.
    Without ``stream`` the full ``2**(s*k)`` domain is built, which is
    refused above ``cap`` patterns.  With ``stream`` only patterns passing
    the per-nurse bounds are generated (still limited to ``cap``).

    ``symmetric`` also applies ``c2_max`` as the coverage ceiling and
    ``c5_min`` as a per-nurse minimum.
    """
    s, k, n = learned.shifts_per_day, learned.days, learned.n
    rows = [list(costs)] * n if costs and not isinstance(costs[0], (list, tuple)) else [list(r) for r in costs]
    if len(rows) != n:
        raise ShapeError(f"{len(rows)} cost rows for {n} nurses")
    for r in rows:
        if len(r) != s:
            raise ShapeError(f"cost row has {len(r)} entries, expected {s} shifts per day")
    min_shifts = learned.c5_min if symmetric else 0
    if stream:
        domain = []
        for pat in iter_patterns(learned, min_shifts):
            domain.append(pat)
            if len(domain) > cap:
                raise CapacityError(f"more than {cap} patterns survive the learned bounds")
    else:
        size = 2 ** learned.domain_exponent
        if size > cap:
            raise CapacityError(
                f"full domain has {size} patterns (2^{learned.domain_exponent}), above the cap of {cap}; "
                "use streaming")
        domain = [ShiftPattern.from_int(code, s, k) for code in range(size)]
    if not domain:
        raise LearningError("no pattern satisfies the learned bounds")
    per_nurse = [[as_fraction(c) for c in r] for r in rows]
    cost = [[pattern_cost(pat, r) for pat in domain] for r in per_nurse]
    inst = NspInstance(
        n=n, days=k, shifts_per_day=s, cost=cost,
        q=learned.c2, p=learned.c2_max if symmetric else n,
        h=learned.c5, b=k, y=0 if learned.c4 else k,
        min_shifts=min_shifts, max_daily=learned.c3,
    )
    return WcspInstance(inst, tuple(domain))


def learning_benchmark(sizes: Sequence[int], seed: int = 0, repeats: int = 3, **corpus_kw) -> list:
    """``[(size, seconds)]``: best-of-``repeats`` time of :func:`learn_csp` on synthetic corpora.

    Corpora are generated before timing starts, so only learning is measured.
    """
    from .generators import schedule_corpus

    out = []
    for size in sizes:
        if size < 1:
            raise ValueError("corpus sizes must be >= 1")
        corpus = schedule_corpus(size, seed, **corpus_kw)
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            learn_csp(corpus)
            best = min(best, time.perf_counter() - t0)
        out.append((size, best))
    return out


# --------------------------------------------------------------------------- NMF

@dataclass
class NmfFactors:
    """``X ~ W @ H`` with the per-iteration Frobenius errors."""

    W: np.ndarray
    H: np.ndarray
    error_trace: list = field(default_factory=list)
    gate_threshold: Optional[float] = None
    n_iter: int = 0

    def __post_init__(self):
        if self.gate_threshold is None:
            self.gate_threshold = self.error_trace[-1] if self.error_trace else 0.0

    @property
    def r(self) -> int:
        return self.W.shape[1]

    @property
    def error(self) -> float:
        return self.error_trace[-1] if self.error_trace else float("nan")

    def reconstruct(self) -> np.ndarray:
        return self.W @ self.H

    def to_dict(self) -> dict:
        return {
            "rank": self.r,
            "W": self.W.tolist(),
            "H": self.H.tolist(),
            "error": self.error,
            "n_iter": self.n_iter,
            "gate_threshold": self.gate_threshold,
            "error_trace": list(self.error_trace),
        }


def _update_h(X, W, H):
    return H * (W.T @ X) / np.maximum(W.T @ W @ H, NMF_EPS)


def _update_w(X, W, H):
    return W * (X @ H.T) / np.maximum(W @ H @ H.T, NMF_EPS)


def nmf_factorize(X, r: int, max_iter: int = 500, tol: float = 1e-9, seed: int = 0,
                  fixed_H: Optional[np.ndarray] = None) -> NmfFactors:
    """Multiplicative-update NMF minimising ``||X - WH||_F``.

    Factors start uniform on (0, 1].  Each iteration updates ``H`` and then
    ``W``; the loop ends after ``max_iter`` iterations, once the error moves
    by less than ``tol``, or once it falls to ``tol``.  With ``fixed_H``
    only ``W`` is fitted.
    """
    X = check_nonnegative(X)
    rows, cols = X.shape
    if r < 1:
        raise ValueError("rank must be >= 1")
    if fixed_H is None and r >= min(rows, cols):
        raise ValueError(f"rank {r} must be below min(rows, cols) = {min(rows, cols)}")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    rng = np.random.default_rng(seed)
    W = 1.0 - rng.random((rows, r))
    if fixed_H is None:
        H = 1.0 - rng.random((r, cols))
    else:
        H = check_nonnegative(fixed_H, "H")
        if H.shape != (r, cols):
            raise ShapeError(f"H has shape {H.shape}, expected {(r, cols)}")
    prev = frobenius_distance(X, W @ H)
    trace = []
    it = 0
    for it in range(1, max_iter + 1):
        if fixed_H is None:
            H = _update_h(X, W, H)
        W = _update_w(X, W, H)
        err = frobenius_distance(X, W @ H)
        trace.append(err)
        if err <= tol or abs(prev - err) < tol:
            break
        prev = err
    return NmfFactors(W, H, trace, n_iter=it)


@dataclass
class NmfPrediction:
    accepted: bool
    distance: float
    threshold: float
    filled: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "distance": self.distance,
            "threshold": self.threshold,
            "filled": None if self.filled is None else self.filled.tolist(),
        }


def nmf_predict(partial, mask, factors: NmfFactors, reference, threshold: Optional[float] = None) -> NmfPrediction:
    """Complete ``partial`` where ``mask`` is true, if its known entries sit close enough to ``reference``.

    Closeness is the Frobenius distance over the known entries only.  When it
    is within ``threshold`` (default: the factors' gate threshold) the masked
    entries are replaced by ``W @ H`` rounded to the nearest non-negative
    integer; otherwise the prediction is rejected.
    """
    partial = np.asarray(partial, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    reference = np.asarray(reference, dtype=np.float64)
    approx = factors.reconstruct()
    if not (partial.shape == mask.shape == reference.shape == approx.shape):
        raise ShapeError(
            f"shapes differ: partial {partial.shape}, mask {mask.shape}, reference {reference.shape}, "
            f"factors {approx.shape}")
    known = ~mask
    distance = frobenius_distance(np.where(known, partial, 0.0), np.where(known, reference, 0.0))
    threshold = factors.gate_threshold if threshold is None else float(threshold)
    if distance > threshold:
        return NmfPrediction(False, distance, threshold)
    filled = partial.copy()
    filled[mask] = np.maximum(np.rint(approx[mask]), 0.0)
    return NmfPrediction(True, distance, threshold, filled)


class ScheduleNMF(TransformerMixin, BaseEstimator):
    """Estimator form of :func:`nmf_factorize`.

    ``fit`` learns ``components_`` (H); ``transform`` fits W for new rows
    against the learned H.
    """

    def __init__(self, n_components=3, max_iter=500, tol=1e-9, random_state=0):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        self.fit_transform(X)
        return self

    def fit_transform(self, X, y=None):
        f = nmf_factorize(X, self.n_components, self.max_iter, self.tol, self.random_state)
        self.factors_ = f
        self.components_ = f.H
        self.reconstruction_err_ = f.error
        self.error_trace_ = f.error_trace
        self.n_iter_ = f.n_iter
        self.n_features_in_ = f.H.shape[1]
        return f.W

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_nonnegative(X)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return nmf_factorize(X, self.n_components, self.max_iter, self.tol, self.random_state,
                             fixed_H=self.components_).W

    def inverse_transform(self, W):
        check_is_fitted(self, "components_")
        return np.asarray(W) @ self.components_
