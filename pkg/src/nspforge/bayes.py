"""Shift prediction with categorical Naive Bayes and a per-cell Beta-Bernoulli schedule generator."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_corpus
from .exceptions import ShapeError, TrainingError
from .model import Schedule


@dataclass(frozen=True)
class NbModel:
    """Raw counts of a categorical Naive Bayes model; probabilities are formed at predict time.

    ``cond_counts[feature][value][label]`` counts training rows of class
    ``label`` whose ``feature`` column holds ``value``.
    """

    labels: tuple
    features: tuple
    class_counts: dict
    cond_counts: dict
    n_train: int

    @property
    def label_cardinality(self) -> int:
        return len(self.labels)

    def count(self, feature, value, label) -> int:
        return self.cond_counts.get(feature, {}).get(value, {}).get(label, 0)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "features": list(self.features),
            "n_train": self.n_train,
            "class_counts": {lab: self.class_counts[lab] for lab in self.labels},
            "cond_counts": {
                f: {v: dict(sorted(per.items())) for v, per in sorted(self.cond_counts.get(f, {}).items())}
                for f in self.features
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "NbModel":
        return cls(
            labels=tuple(data["labels"]),
            features=tuple(data["features"]),
            class_counts={k: int(v) for k, v in data["class_counts"].items()},
            cond_counts={
                f: {v: {lab: int(c) for lab, c in per.items()} for v, per in vals.items()}
                for f, vals in data["cond_counts"].items()
            },
            n_train=int(data["n_train"]),
        )


def nb_train(X: Sequence[Sequence], y: Sequence, label_universe: Optional[Sequence] = None,
             feature_names: Optional[Sequence] = None) -> NbModel:
    """Count class frequencies and per-feature value/class co-occurrences."""
    rows = [list(r) for r in X]
    y = list(y)
    if not rows:
        raise TrainingError("training table is empty")
    if len(rows) != len(y):
        raise ShapeError(f"{len(rows)} rows but {len(y)} labels")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ShapeError("rows have different lengths")
    features = tuple(feature_names) if feature_names is not None else tuple(f"f{j}" for j in range(width))
    if len(features) != width:
        raise ShapeError(f"{len(features)} feature names for {width} columns")
    labels = tuple(label_universe) if label_universe is not None else tuple(dict.fromkeys(sorted(y)))
    unknown = set(y) - set(labels)
    if unknown:
        raise TrainingError(f"labels outside the universe: {sorted(unknown)}")
    class_counts = {lab: 0 for lab in labels}
    cond = {f: {} for f in features}
    for row, lab in zip(rows, y):
        class_counts[lab] += 1
        for f, value in zip(features, row):
            per = cond[f].setdefault(value, {})
            per[lab] = per.get(lab, 0) + 1
    return NbModel(labels, features, class_counts, cond, len(rows))


def nb_scores(model: NbModel, evidence) -> dict:
    """Unnormalised posterior per label.

    ``prior(label) * prod((count(f, v, label) + 1) / (class_count(label) + |labels|))``;
    the prior is the plain class frequency, only the likelihoods are smoothed.
    """
    if not isinstance(evidence, Mapping):
        evidence = dict(zip(model.features, evidence))
    extra = set(evidence) - set(model.features)
    if extra:
        raise ShapeError(f"unknown evidence columns {sorted(extra)}")
    k = model.label_cardinality
    scores = {}
    for lab in model.labels:
        cc = model.class_counts[lab]
        score = Fraction(cc, model.n_train)
        for f, value in evidence.items():
            score *= Fraction(model.count(f, value, lab) + 1, cc + k)
        scores[lab] = score
    return scores


def nb_predict(model: NbModel, evidence):
    """``(label, scores)``; ties go to the label listed first in the universe."""
    scores = nb_scores(model, evidence)
    best = max(model.labels, key=lambda lab: (scores[lab], -model.labels.index(lab)))
    return best, scores


def nb_evaluate(predictions: Sequence, truth: Sequence, labels: Optional[Sequence] = None):
    """``(accuracy, confusion, labels)`` with ``confusion[t][p]`` counting truth ``t`` predicted as ``p``."""
    predictions, truth = list(predictions), list(truth)
    if len(predictions) != len(truth):
        raise ShapeError(f"{len(predictions)} predictions for {len(truth)} truths")
    if not truth:
        raise ShapeError("nothing to evaluate")
    labels = list(labels) if labels is not None else sorted(set(truth) | set(predictions))
    index = {lab: i for i, lab in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(truth, predictions):
        confusion[index[t], index[p]] += 1
    hits = sum(t == p for t, p in zip(truth, predictions))
    return Fraction(hits, len(truth)), confusion, labels


class ShiftNaiveBayes(ClassifierMixin, BaseEstimator):
    """Categorical Naive Bayes with add-one smoothed likelihoods.

    Parameters
    ----------
    labels : sequence, optional
        Label universe.  Its size is the smoothing denominator offset and its
        order breaks ties.  Defaults to the sorted training labels.
    feature_names : sequence, optional
        Column names used as evidence keys.
    """

    def __init__(self, labels=None, feature_names=None):
        self.labels = labels
        self.feature_names = feature_names

    def fit(self, X, y):
        rows = [list(r) for r in np.asarray(X, dtype=object)]
        self.model_ = nb_train(rows, list(y), self.labels, self.feature_names)
        self.classes_ = np.array(self.model_.labels, dtype=object)
        self.n_features_in_ = len(self.model_.features)
        return self

    def _rows(self, X):
        check_is_fitted(self, "model_")
        rows = [list(r) for r in np.asarray(X, dtype=object)]
        if rows and len(rows[0]) != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} features, got {len(rows[0])}")
        return rows

    def predict_scores(self, X) -> list:
        return [nb_scores(self.model_, row) for row in self._rows(X)]

    def predict(self, X):
        return np.array([nb_predict(self.model_, row)[0] for row in self._rows(X)], dtype=object)

    def predict_proba(self, X):
        out = []
        for scores in self.predict_scores(X):
            total = sum(scores.values())
            out.append([float(scores[lab] / total) for lab in self.model_.labels])
        return np.array(out)


# --------------------------------------------------------------------------- generator

class BernoulliScheduleGenerator(BaseEstimator):
    """Independent Beta-Bernoulli model per (nurse, slot) cell.

    Starting from a uniform Beta(1, 1) prior, each historical schedule adds
    its 1s to ``alpha_`` and its 0s to ``beta_``.  New schedules draw each cell
    from Bernoulli(posterior mean).
    """

    def __init__(self, random_state=None):
        self.random_state = random_state

    def fit(self, schedules, y=None):
        corpus = check_corpus(schedules)
        first = corpus[0]
        self.days_, self.shifts_per_day_ = first.days, first.shifts_per_day
        self.alpha_ = np.ones(first.shape, dtype=np.int64)
        self.beta_ = np.ones(first.shape, dtype=np.int64)
        return self.partial_fit(corpus)

    def partial_fit(self, schedules, y=None):
        if not hasattr(self, "alpha_"):
            return self.fit(schedules)
        corpus = check_corpus(schedules)
        for s in corpus:
            if s.shape != self.alpha_.shape or (s.days, s.shifts_per_day) != (self.days_, self.shifts_per_day_):
                raise ShapeError("schedule shape differs from the fitted history")
            self.alpha_ = self.alpha_ + s.entries
            self.beta_ = self.beta_ + (1 - s.entries)
        return self

    @property
    def theta_(self) -> np.ndarray:
        check_is_fitted(self, "alpha_")
        return self.alpha_ / (self.alpha_ + self.beta_)

    def sample(self, count: int, seed=None) -> list:
        check_is_fitted(self, "alpha_")
        if count < 0:
            raise ValueError("count must be >= 0")
        rng = np.random.default_rng(self.random_state if seed is None else seed)
        theta = self.theta_
        return [
            Schedule((rng.random(theta.shape) < theta).astype(np.int8), self.days_, self.shifts_per_day_)
            for _ in range(count)
        ]


def bn_simulate(history: Sequence[Schedule], count: int, seed: int) -> list:
    """Fit the per-cell Beta posterior on ``history`` and draw ``count`` schedules."""
    return BernoulliScheduleGenerator(random_state=seed).fit(history).sample(count)
