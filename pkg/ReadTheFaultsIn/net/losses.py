from typing import NamedTuple
import numpy as np
from scipy.special import log_softmax, softmax, xlogy
from ..errors import NumericalError, ShapeError, ValidationError

class LossResult(NamedTuple):
    loss: float
    grad: np.ndarray

def _check_labels(labels, batch: int, classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (batch,):
        raise ShapeError(f"Expected {batch} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer) or labels.min(initial=0) < 0 or labels.max(initial=0) >= classes:
        raise ValidationError(f"Labels must be integers in [0, {classes})")
    return labels

def softmax_cross_entropy(logits, labels) -> LossResult:
    """Mean of -log softmax(logits)[label]; grad is (softmax - onehot) / B."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[0] == 0:
        raise ShapeError(f"Expected (batch, classes) logits, got shape {logits.shape}")

    batch, classes = logits.shape
    labels = _check_labels(labels, batch, classes)
    rows = np.arange(batch)

    log_p = log_softmax(logits, axis=1)
    grad = np.exp(log_p)
    grad[rows, labels] -= 1.0
    return LossResult(float(-log_p[rows, labels].mean()), grad / batch)

def _teacher_logits(teacher: np.ndarray, temperature: float) -> np.ndarray:
    # rows holding +inf put all their mass, evenly, on those entries
    top = np.isposinf(teacher)
    scaled = np.where(
        top.any(axis=1, keepdims=True),
        np.where(top, 0.0, -np.inf),
        teacher / temperature,
    )
    if np.isnan(scaled).any() or np.isneginf(scaled).all(axis=1).any():
        raise NumericalError("Teacher logits give no probability distribution")
    return scaled

def kl_divergence(student_logits, teacher_logits, temperature: float = 1.0) -> LossResult:
    """Mean over the batch of KL(p_teacher || p_student) on logits / T, times T^2.

    The teacher is a constant; the gradient is with respect to the student.
    """
    student = np.asarray(student_logits, dtype=np.float64)
    teacher = np.asarray(teacher_logits, dtype=np.float64)
    if student.shape != teacher.shape or student.ndim != 2:
        raise ShapeError(f"Logit shapes differ: {student.shape} vs {teacher.shape}")
    if temperature <= 0:
        raise ValidationError(f"temperature must be > 0, got {temperature}")

    batch = student.shape[0]
    log_q = log_softmax(student / temperature, axis=1)
    p = softmax(_teacher_logits(teacher, temperature), axis=1)

    per_row = (xlogy(p, p) - p * log_q).sum(axis=1)
    grad = temperature * (np.exp(log_q) - p) / batch
    return LossResult(float(max(per_row.mean(), 0.0) * temperature ** 2), grad)

def accuracy(logits, labels) -> float:
    return float(np.mean(np.asarray(logits).argmax(axis=1) == np.asarray(labels)))
