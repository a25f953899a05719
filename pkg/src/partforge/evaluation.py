"""End-task evaluation: linear classification and dot-product retrieval.

The classifier is a one-vs-rest linear SVM with L1 hinge loss and L2
regularization, trained by dual coordinate descent.  The loss is
averaged over samples (per-sample dual bound ``C / n_samples``), so
duplicating the training set leaves the optimum unchanged.  Training
is deterministic given ``random_state``.

Average precision removes junk entries first, then averages the
running precision at every positive; the running sum is kept in exact
rational arithmetic so results are reproducible to the last bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import (
    DimensionMismatchError,
    EmptyClassError,
    LengthMismatchError,
    NoPositivesError,
    NoQueriesError,
    SingleClassError,
)
from .validation import check_matrix

RELEVANCE_VALUES = ("positive", "negative", "junk")


def _dual_cd(X, y, C, tol, max_epochs, rng):
    """Dual coordinate descent for min_w 0.5||w||^2 + (C/n) sum hinge.

    Stops when the largest projected-gradient violation in an epoch
    falls below ``tol``.
    """
    n, dim = X.shape
    bound = C / n
    alpha = np.zeros(n)
    w = np.zeros(dim)
    sq_norms = np.einsum("ij,ij->i", X, X)
    for _ in range(max_epochs):
        worst = 0.0
        for i in rng.permutation(n):
            gradient = y[i] * (w @ X[i]) - 1.0
            if alpha[i] == 0.0:
                violation = min(gradient, 0.0)
            elif alpha[i] == bound:
                violation = max(gradient, 0.0)
            else:
                violation = gradient
            worst = max(worst, abs(violation))
            if violation != 0.0 and sq_norms[i] > 0.0:
                updated = min(max(alpha[i] - gradient / sq_norms[i], 0.0), bound)
                w += (updated - alpha[i]) * y[i] * X[i]
                alpha[i] = updated
        if worst < tol:
            break
    return w


class LinearSVM(BaseEstimator, ClassifierMixin):
    """One-vs-rest hinge-loss linear classifier.

    Parameters
    ----------
    C : regularization trade-off (loss is averaged over samples).
    tol : stationarity tolerance of the dual solver.
    max_epochs : epoch cap per class.
    random_state : seed for the per-epoch coordinate order.

    After ``fit``: ``classes_`` (sorted), ``coef_`` of shape
    (n_classes, n_features) and ``intercept_`` of shape (n_classes,).
    """

    def __init__(self, C=1.0, tol=1e-4, max_epochs=1000, random_state=0):
        self.C = C
        self.tol = tol
        self.max_epochs = max_epochs
        self.random_state = random_state

    def fit(self, X, y):
        X = check_matrix(X, "X")
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise LengthMismatchError(f"{X.shape[0]} samples but {y.shape[0]} labels")
        classes = np.unique(y)
        if classes.shape[0] < 2:
            raise SingleClassError("training needs at least two classes")
        augmented = np.hstack([X, np.ones((X.shape[0], 1))])
        coef = np.empty((classes.shape[0], X.shape[1]))
        intercept = np.empty(classes.shape[0])
        rng = np.random.default_rng(self.random_state)
        for c, label in enumerate(classes):
            targets = np.where(y == label, 1.0, -1.0)
            w = _dual_cd(augmented, targets, self.C, self.tol, self.max_epochs, rng)
            coef[c] = w[:-1]
            intercept[c] = w[-1]
        self.classes_ = classes
        self.coef_ = coef
        self.intercept_ = intercept
        return self

    def decision_function(self, X):
        X = check_matrix(X, "X")
        if X.shape[1] != self.coef_.shape[1]:
            raise DimensionMismatchError(
                f"classifier expects dim {self.coef_.shape[1]}, got {X.shape[1]}"
            )
        return X @ self.coef_.T + self.intercept_

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]


def train_classifier(encoded, labels, reg_c=1.0, seed=0, tol=1e-4) -> LinearSVM:
    """Fit a :class:`LinearSVM` on encoded vectors (one per row)."""
    return LinearSVM(C=reg_c, tol=tol, random_state=seed).fit(encoded, labels)


def classify(classifier: LinearSVM, encoded):
    """Per-image class scores and argmax labels (ties: lowest class index)."""
    scores = classifier.decision_function(encoded)
    return scores, classifier.classes_[np.argmax(scores, axis=1)]


def accuracy(predicted, actual) -> float:
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape[0] != actual.shape[0]:
        raise LengthMismatchError(
            f"{predicted.shape[0]} predictions for {actual.shape[0]} labels"
        )
    return float(np.mean(predicted == actual))


def average_precision(relevance) -> float:
    """AP of a ranked relevance list with junk entries discarded.

    ``relevance`` holds "positive" / "negative" / "junk" strings in
    rank order.  Junk entries are removed (order preserved); the AP is
    the mean over positives of the running precision at their ranks,
    accumulated exactly as a rational before the final float
    conversion.
    """
    kept = []
    for value in relevance:
        if value not in RELEVANCE_VALUES:
            raise ValueError(f"bad relevance value {value!r}")
        if value != "junk":
            kept.append(value)
    n_positive = sum(1 for value in kept if value == "positive")
    if n_positive == 0:
        raise NoPositivesError("relevance list has no positive entry")
    total = Fraction(0)
    hits = 0
    for rank, value in enumerate(kept, start=1):
        if value == "positive":
            hits += 1
            total += Fraction(hits, rank)
    return float(total / n_positive)


def mean_ap(per_query_aps) -> float:
    values = list(per_query_aps)
    if not values:
        raise NoQueriesError("no queries to average")
    return float(sum(values) / len(values))


@dataclass
class Ranking:
    """Database ids ordered by similarity to one query."""

    query_id: str
    entries: list[tuple[str, float]]  # (image_id, score), scores non-increasing
    junk_removed: bool = False

    def ids(self) -> list[str]:
        return [image_id for image_id, _ in self.entries]

    def without(self, excluded) -> "Ranking":
        excluded = set(excluded)
        kept = [(i, s) for i, s in self.entries if i not in excluded]
        return Ranking(query_id=self.query_id, entries=kept, junk_removed=True)


def write_ranking(ranking: Ranking, path) -> None:
    """Dump a ranking as a text list, one ranked image id per line."""
    Path(path).write_text("".join(f"{image_id}\n" for image_id in ranking.ids()),
                          encoding="utf-8")


def rank_database(query_vector, database_ids, database_vectors, query_id="") -> Ranking:
    """Order database items by descending dot product with the query.

    Ties break toward the lexicographically smallest image id.
    """
    q = np.asarray(query_vector, dtype=np.float64)
    db = check_matrix(database_vectors, "database_vectors")
    if db.shape[1] != q.shape[0]:
        raise DimensionMismatchError(
            f"query dim {q.shape[0]} but database dim {db.shape[1]}"
        )
    if len(database_ids) != db.shape[0]:
        raise LengthMismatchError("one id per database row required")
    scores = db @ q
    order = sorted(range(len(database_ids)),
                   key=lambda i: (-scores[i], database_ids[i]))
    entries = [(database_ids[i], float(scores[i])) for i in order]
    return Ranking(query_id=query_id, entries=entries)


def classification_map(scores, actual, classes):
    """Mean AP over classes of per-class score rankings.

    For each class, test images are ranked by that class's score
    (stable on ties) and the class's own images count as positives.
    Returns (map, {class: ap}).
    """
    scores = check_matrix(scores, "scores")
    actual = np.asarray(actual)
    classes = np.asarray(classes)
    if scores.shape[0] != actual.shape[0]:
        raise LengthMismatchError("one score row per label required")
    if scores.shape[1] != classes.shape[0]:
        raise DimensionMismatchError("one score column per class required")
    per_class = {}
    for c, label in enumerate(classes):
        if not np.any(actual == label):
            raise EmptyClassError(f"class {label!r} has no test images")
        order = np.argsort(-scores[:, c], kind="stable")
        relevance = ["positive" if actual[i] == label else "negative" for i in order]
        per_class[str(label)] = average_precision(relevance)
    return mean_ap(per_class.values()), per_class
