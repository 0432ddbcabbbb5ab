"""Distances between schedules and report assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .exceptions import ShapeError
from .io import format_number
from .model import Schedule

AGGREGATES = ("mean", "min", "max")


def _matrix(m):
    if isinstance(m, Schedule):
        return m.entries.astype(np.float64)
    return np.asarray(m, dtype=np.float64)


def frobenius_distance(M, N) -> float:
    """``sqrt(sum((M - N)**2))`` for equally shaped matrices (or schedules)."""
    a, b = _matrix(M), _matrix(N)
    if a.shape != b.shape:
        raise ShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


@dataclass
class QualityReport:
    method: str
    settings: dict = field(default_factory=dict)
    frobenius: Optional[float] = None
    accuracy: Optional[Fraction] = None
    confusion: Optional[np.ndarray] = None
    distances: list = field(default_factory=list)
    aggregate: str = "mean"

    def __post_init__(self):
        if self.frobenius is None and self.accuracy is None and self.confusion is None:
            raise ValueError("a report needs at least one metric")

    def to_dict(self) -> dict:
        out = {"method": self.method, "settings": dict(self.settings)}
        if self.frobenius is not None:
            out["frobenius"] = self.frobenius
            out["aggregate"] = self.aggregate
            out["distances"] = list(self.distances)
        if self.accuracy is not None:
            out["accuracy"] = format_number(self.accuracy)
        if self.confusion is not None:
            out["confusion"] = np.asarray(self.confusion).tolist()
        return out


def compare_generated(reference, generated: Sequence, aggregate: str = "mean", method: str = "generated",
                      settings: Optional[dict] = None) -> QualityReport:
    """Frobenius distance of each generated schedule to ``reference``, summarised by ``aggregate``."""
    if aggregate not in AGGREGATES:
        raise ValueError(f"aggregate must be one of {AGGREGATES}")
    generated = list(generated)
    if not generated:
        raise ValueError("nothing to compare")
    dists = [frobenius_distance(reference, g) for g in generated]
    summary = {"mean": math.fsum(dists) / len(dists), "min": min(dists), "max": max(dists)}[aggregate]
    return QualityReport(method, settings or {}, frobenius=summary, distances=dists, aggregate=aggregate)
