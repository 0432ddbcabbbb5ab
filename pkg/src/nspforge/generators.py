"""Seeded synthetic data: feasible schedules, schedule corpora and solver instances."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .model import NspInstance, Schedule, ShiftPattern, WcspInstance

# n -> (q, p, h, y, b) for the 7-day, 3-shift benchmark family
BENCHMARK_FAMILY = {
    5: (1, 4, 5, 2, 3),
    10: (1, 7, 5, 2, 3),
    15: (1, 12, 5, 2, 3),
    20: (1, 15, 5, 2, 3),
    30: (1, 25, 5, 2, 3),
    50: (1, 35, 5, 2, 3),
    60: (1, 45, 5, 2, 3),
    80: (1, 65, 5, 2, 3),
}


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_schedule(seed, n: int, days: int, shifts_per_day: int, q: int = 1, p: int = 4,
                    h: int = 5, b: int = 3, y: int = 0, max_daily: int = 1,
                    extra_rate: float = 0.2, attempts: int = 200) -> Schedule:
    """Random schedule that respects the given bounds.

    Slots are filled in day-major order.  Each slot asks for ``q`` nurses
    plus ``Binomial(p - q, extra_rate)`` more, drawn from the nurses still
    allowed to work it, least-loaded first with random tie-breaks.  A slot
    that cannot reach ``q`` restarts the whole draw.
    """
    rng = _rng(seed)
    s = shifts_per_day
    for _ in range(attempts):
        grid = np.zeros((n, days * s), dtype=np.int8)
        load = np.zeros(n, dtype=np.int64)
        nights = np.zeros(n, dtype=np.int64)
        pairs = np.zeros(n, dtype=np.int64)
        ok = True
        for z in range(days * s):
            day, shift = divmod(z, s)
            daily = grid[:, day * s:z].sum(axis=1)
            allowed = (load < h) & (daily < max_daily)
            if shift == s - 1:
                allowed &= nights < b
            after_night = np.zeros(n, dtype=bool)
            if shift == 0 and day > 0:
                after_night = grid[:, z - 1] == 1
                allowed &= ~after_night | (pairs < y)
            pool = np.flatnonzero(allowed)
            need = q + (rng.binomial(p - q, extra_rate) if p > q else 0)
            if len(pool) < q:
                ok = False
                break
            ranked = sorted(pool, key=lambda i: (load[i], rng.random()))
            for i in ranked[:min(need, len(pool))]:
                grid[i, z] = 1
                load[i] += 1
                if shift == s - 1:
                    nights[i] += 1
                if after_night[i]:
                    pairs[i] += 1
        if ok:
            return Schedule(grid, days, shifts_per_day)
    raise RuntimeError("could not draw a schedule within the attempt budget; loosen the bounds")


def schedule_corpus(size: int, seed=0, n: int = 12, days: int = 7, shifts_per_day: int = 4,
                    **bounds) -> list:
    """``size`` independent schedules drawn by :func:`random_schedule` from one seeded stream."""
    rng = _rng(seed)
    return [random_schedule(rng, n, days, shifts_per_day, **bounds) for _ in range(size)]


def random_pattern(rng, days: int, shifts_per_day: int, max_shifts: int) -> ShiftPattern:
    slots = days * shifts_per_day
    count = int(rng.integers(1, max_shifts + 1))
    bits = np.zeros(slots, dtype=bool)
    bits[rng.choice(slots, size=min(count, slots), replace=False)] = True
    return ShiftPattern(tuple(bits), shifts_per_day, days)


def benchmark_instance(n: int, seed=0, extra_patterns: int = 4, days: int = 7, shifts_per_day: int = 3,
                       max_cost: int = 20, bounds: Optional[tuple] = None) -> WcspInstance:
    """Instance of the 7-day, 3-shift family with a planted feasible solution.

    The shared domain holds one planted schedule's patterns plus
    ``extra_patterns`` random patterns per nurse.  Each nurse's live domain
    is its own planted pattern, its own random patterns, and one other
    nurse's planted pattern, which keeps exact search tractable for
    ``n <= 10``.  Costs are random integers in ``1..max_cost``.
    """
    rng = _rng(seed)
    q, p, h, y, b = bounds if bounds is not None else BENCHMARK_FAMILY[n]
    planted = random_schedule(rng, n, days, shifts_per_day, q=q, p=p, h=h, b=b, y=y,
                              max_daily=1, extra_rate=0.0)
    domain = list(planted.patterns())
    owned = [[i] for i in range(n)]
    for i in range(n):
        for _ in range(extra_patterns):
            owned[i].append(len(domain))
            domain.append(random_pattern(rng, days, shifts_per_day, h))
        if n > 1:
            other = int(rng.integers(n - 1))
            owned[i].append(other if other < i else other + 1)
    cost = rng.integers(1, max_cost + 1, size=(n, len(domain))).tolist()
    inst = NspInstance(n=n, days=days, shifts_per_day=shifts_per_day, cost=cost,
                       q=q, p=p, h=h, b=b, y=y)
    return WcspInstance(inst, tuple(domain), tuple(tuple(sorted(set(d))) for d in owned))


def random_wcsp(seed, n: int, m: int, days: int = 1, shifts_per_day: int = 4, max_cost: int = 9,
                per_variable: bool = True) -> WcspInstance:
    """Small random instance with random bounds, for exhaustive cross-checks."""
    rng = _rng(seed)
    slots = days * shifts_per_day
    codes = rng.choice(2 ** slots, size=min(m, 2 ** slots), replace=False)
    domain = tuple(ShiftPattern.from_int(int(c), shifts_per_day, days) for c in codes)
    m = len(domain)
    q = rng.integers(0, 2, size=(shifts_per_day, days))
    p = q + rng.integers(0, n + 1, size=(shifts_per_day, days))
    inst = NspInstance(
        n=n, days=days, shifts_per_day=shifts_per_day,
        cost=rng.integers(0, max_cost + 1, size=(n, m)).tolist(),
        q=q.tolist(), p=np.minimum(p, n).tolist(),
        h=rng.integers(1, slots + 1, size=n).tolist(),
        b=rng.integers(0, days + 1, size=n).tolist(),
        y=int(rng.integers(0, days)),
        min_shifts=rng.integers(0, 2, size=n).tolist(),
    )
    domains = None
    if per_variable:
        domains = [sorted(rng.choice(m, size=int(rng.integers(1, m + 1)), replace=False).tolist())
                   for _ in range(n)]
    return WcspInstance(inst, domain, domains)
