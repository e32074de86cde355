"""Train/test evaluation of the reaction-choice model.

Covers the seeded train/test split, argmax-class confusion matrices,
misclassification rates and per-situation probability timelines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conflict import ConflictSituation
from .errors import InvalidInput
from .labeling import CLASS_ORDER, ReactionClass
from .mnl import FittedModel, LabeledDataset, predict_proba_matrix

_N_CLASSES = len(CLASS_ORDER)


@dataclass(eq=False)
class ConfusionMatrix:
    """3x3 outcome counts: rows are observed classes, columns predicted."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=int)
        if self.counts.shape != (_N_CLASSES, _N_CLASSES):
            raise InvalidInput(f"confusion matrix must be {_N_CLASSES}x{_N_CLASSES}")
        if np.any(self.counts < 0):
            raise InvalidInput("confusion counts must be >= 0")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def diagonal_fraction(self) -> float:
        if self.total == 0:
            raise InvalidInput("empty confusion matrix")
        return float(np.trace(self.counts)) / self.total


@dataclass(eq=False)
class SituationTimeline:
    """Per-instant predicted probabilities over one conflict situation."""

    ped_id: str
    veh_id: str
    steps: np.ndarray            # grid step per conflict instant
    probabilities: np.ndarray    # (n, 3) rows sum to 1
    observed: tuple[ReactionClass, ...]
    k_values: np.ndarray

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=int)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        self.k_values = np.asarray(self.k_values, dtype=float)
        n = len(self.steps)
        if self.probabilities.shape != (n, _N_CLASSES):
            raise InvalidInput("probabilities must be (n instants, 3)")
        if len(self.observed) != n or self.k_values.shape != (n,):
            raise InvalidInput("observed classes and k values must match the instants")
        if n and np.any(np.abs(self.probabilities.sum(axis=1) - 1.0) > 1e-9):
            raise InvalidInput("probability rows must sum to 1")


def split(data: LabeledDataset, train_frac: float = 0.7, seed: int = 0, *,
          by_situation: bool = False):
    """Seeded random partition into (train, test).

    The training part gets floor(n * train_frac) rows.  With
    ``by_situation`` the unit of assignment is the pedestrian-vehicle pair
    instead of the row, which avoids leaking temporally adjacent instants of
    one encounter across the boundary.
    """
    if not 0.0 < train_frac < 1.0:
        raise InvalidInput("train_frac must lie strictly between 0 and 1")
    n = len(data)
    if n == 0:
        raise InvalidInput("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    if not by_situation:
        perm = rng.permutation(n)
        n_train = int(np.floor(n * train_frac))
        train_rows = np.sort(perm[:n_train])
        test_rows = np.sort(perm[n_train:])
        return data.take(train_rows), data.take(test_rows)

    if data.keys is None:
        raise InvalidInput("by-situation splitting needs row keys")
    pairs = [(ped, veh) for (_, ped, veh) in data.keys]
    unique = sorted(set(pairs))
    perm = rng.permutation(len(unique))
    n_train_groups = int(np.floor(len(unique) * train_frac))
    train_groups = {unique[g] for g in perm[:n_train_groups]}
    train_rows = np.array([r for r, p in enumerate(pairs) if p in train_groups], dtype=int)
    test_rows = np.array([r for r, p in enumerate(pairs) if p not in train_groups], dtype=int)
    return data.take(train_rows), data.take(test_rows)


def predicted_classes(model: FittedModel, data: LabeledDataset) -> np.ndarray:
    """Argmax-probability class index per row; exact ties go to the earliest
    class in the fixed order, i.e. the no-reaction baseline first."""
    X = data.columns(model.spec.predictor_names)
    probs = predict_proba_matrix(model, X)
    return np.argmax(probs, axis=1)


def confusion(model: FittedModel, test: LabeledDataset) -> ConfusionMatrix:
    """Confusion matrix of argmax predictions on a labeled sample."""
    if not model.converged:
        raise InvalidInput("confusion requires a converged model")
    pred = predicted_classes(model, test)
    counts = np.zeros((_N_CLASSES, _N_CLASSES), dtype=int)
    np.add.at(counts, (test.y, pred), 1)
    return ConfusionMatrix(counts)


def misclassification_rate(cm: ConfusionMatrix) -> float:
    """Off-diagonal fraction of the confusion matrix."""
    if cm.total == 0:
        raise InvalidInput("empty confusion matrix")
    return 1.0 - cm.diagonal_fraction


def timeline(
    model: FittedModel,
    situation: ConflictSituation,
    predictors: dict,
    labels: dict,
) -> SituationTimeline:
    """Probability timeline of one conflict situation.

    ``predictors`` maps CI keys (ts, ped_id, veh_id) to predictor vectors and
    ``labels`` maps the same keys to the reaction label of the model's user
    kind.  Every instant of the situation must be present in both.
    """
    steps, rows, observed, ks = [], [], [], []
    for ci in situation.instants:
        key = ci.key
        if key not in predictors or key not in labels:
            raise InvalidInput(f"missing predictors or label for conflict instant {key}")
        vec = predictors[key]
        label = labels[key]
        steps.append(ci.ts)
        rows.append(vec.to_row(model.spec.predictor_names))
        observed.append(label.reaction)
        ks.append(label.k)
    probs = predict_proba_matrix(model, np.array(rows))
    return SituationTimeline(
        ped_id=situation.ped_id,
        veh_id=situation.veh_id,
        steps=np.array(steps, dtype=int),
        probabilities=probs,
        observed=tuple(observed),
        k_values=np.array(ks, dtype=float),
    )
