"""Classification metrics, the two-proportion z-test, and embedding similarity."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class MetricsReport:
    n: int
    correct: int
    accuracy: float
    precision: float
    recall: float
    threshold: float

    def to_dict(self) -> dict:
        return {"n": self.n, "correct": self.correct, "accuracy": self.accuracy,
                "precision": self.precision, "recall": self.recall, "threshold": self.threshold}


@dataclass
class ZTestResult:
    p_hat: float
    se: float
    z: float
    p_value: float
    significant_at: list

    def to_dict(self) -> dict:
        return {"p_hat": self.p_hat, "se": self.se, "z": self.z,
                "p_value": self.p_value, "significant_at": self.significant_at}


@dataclass
class SimilarityMatrix:
    values: np.ndarray
    question_ids: tuple
    zero_rows: tuple = ()
    rescaled: bool = False


def accuracy(preds, labels, threshold: float = 0.5) -> MetricsReport:
    """Thresholded accuracy with precision and recall at the same threshold."""
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ValueError("preds and labels must have equal length")
    if preds.size == 0:
        raise ValueError("cannot score an empty prediction set")
    hard = preds >= threshold
    pos = labels == 1
    correct = int(np.sum(hard == pos))
    tp = int(np.sum(hard & pos))
    fp = int(np.sum(hard & ~pos))
    fn = int(np.sum(~hard & pos))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return MetricsReport(n=preds.size, correct=correct, accuracy=correct / preds.size,
                         precision=precision, recall=recall, threshold=threshold)


def log_loss(preds, labels) -> float:
    """Mean per-observation negative log-likelihood of the labels."""
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(labels * np.log(preds) + (1.0 - labels) * np.log1p(-preds)))


def two_proportion_z_test(x1: int, n1: int, x2: int, n2: int,
                          alphas=(0.01, 0.05)) -> ZTestResult:
    """Pooled two-proportion z-test with a two-sided normal p-value.

    z is signed as (x2/n2 - x1/n1) / SE, so a positive z means the second
    sample has the higher proportion.
    """
    if n1 < 1 or n2 < 1:
        raise ValueError("sample sizes must be >= 1")
    if not (0 <= x1 <= n1 and 0 <= x2 <= n2):
        raise ValueError("counts must satisfy 0 <= x <= n")
    p_hat = (x1 + x2) / (n1 + n2)
    if p_hat in (0.0, 1.0):
        raise ValueError("pooled proportion is degenerate (0 or 1), SE undefined")
    se = math.sqrt(p_hat * (1.0 - p_hat) * (1.0 / n1 + 1.0 / n2))
    z = (x2 / n2 - x1 / n1) / se
    p_value = math.erfc(abs(z) / math.sqrt(2.0))
    return ZTestResult(p_hat=p_hat, se=se, z=z, p_value=p_value,
                       significant_at=[a for a in alphas if p_value < a])


def cosine_similarity_matrix(demand, question_ids=None, rescale_display: bool = False) -> SimilarityMatrix:
    """Pairwise cosine similarity between question embedding rows.

    All-zero rows get 0 off-diagonal similarity (flagged, with a warning)
    rather than an error, since early training snapshots can contain
    them. The optional min-max rescale maps off-diagonal entries to
    [0, 1] for heatmap display only and is flagged in the result.
    """
    demand = np.asarray(demand, dtype=np.float64)
    if demand.ndim != 2:
        raise ValueError("expected a Q x D matrix of embedding rows")
    q = demand.shape[0]
    norms = np.linalg.norm(demand, axis=1)
    zero_rows = tuple(int(i) for i in np.flatnonzero(norms == 0))
    if zero_rows:
        warnings.warn(f"zero embedding rows at question indices {zero_rows}; similarities set to 0")
    safe = np.where(norms == 0, 1.0, norms)
    unit = demand / safe[:, None]
    values = unit @ unit.T
    values = np.clip((values + values.T) / 2.0, -1.0, 1.0)
    for i in zero_rows:
        values[i, :] = 0.0
        values[:, i] = 0.0
    np.fill_diagonal(values, 1.0)
    rescaled = False
    if rescale_display and q > 1:
        off = ~np.eye(q, dtype=bool)
        lo, hi = values[off].min(), values[off].max()
        if hi > lo:
            values[off] = (values[off] - lo) / (hi - lo)
            rescaled = True
    ids = tuple(question_ids) if question_ids is not None else tuple(str(i) for i in range(q))
    if len(ids) != q:
        raise ValueError("question_ids length must match the number of rows")
    return SimilarityMatrix(values=values, question_ids=ids, zero_rows=zero_rows, rescaled=rescaled)
