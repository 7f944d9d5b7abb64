from typing import Optional
from dataclasses import dataclass, field
import numpy as np
from scipy.special import softmax
from ..errors import ShapeError, ValidationError
from ..log import log_debug
from ..net.embedding import EmbeddingParams, embed
from ..net.losses import softmax_cross_entropy
from ..utils import check_finite

@dataclass(eq=False)
class LinearHead:
    W: np.ndarray
    b: np.ndarray
    lam: float = 0.0
    losses: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ShapeError(f"Head shapes W {self.W.shape} and b {self.b.shape} are inconsistent")
        if self.lam < 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lam}")
        check_finite(self.W, "head weights")
        check_finite(self.b, "head bias")

    @classmethod
    def zeros(cls, n_way: int, dim: int, lam: float = 0.0):
        return cls(np.zeros((n_way, dim)), np.zeros(n_way), lam)

    @property
    def n_way(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def logits(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.dim:
            raise ShapeError(f"Head expects {self.dim}-dim features, got shape {features.shape}")
        return features @ self.W.T + self.b

    def copy(self) -> "LinearHead":
        return LinearHead(self.W.copy(), self.b.copy(), self.lam)

    def to_dict(self) -> dict:
        return {"W": self.W.tolist(), "b": self.b.tolist(), "lam": self.lam}

def head_objective(head: LinearHead, features: np.ndarray, labels: np.ndarray):
    """Mean CE plus lam * (|W|^2 + |b|^2), and its gradient."""
    ce, dlogits = softmax_cross_entropy(head.logits(features), labels)
    loss = ce + head.lam * (np.sum(head.W ** 2) + np.sum(head.b ** 2))
    dW = dlogits.T @ features + 2 * head.lam * head.W
    db = dlogits.sum(axis=0) + 2 * head.lam * head.b
    return float(loss), dW, db

def auto_lr(features: np.ndarray, lam: float) -> float:
    """1/L for the smoothness bound L = max|[x, 1]|^2 / 2 + 2 lam."""
    radius = float(np.max(np.sum(features ** 2, axis=1))) + 1.0 if len(features) else 1.0
    return 1.0 / (0.5 * radius + 2.0 * lam)

def _features(support, params: Optional[EmbeddingParams]) -> np.ndarray:
    if params is not None:
        return embed(params, support)
    return np.asarray(support, dtype=np.float64)

def fit_linear_head(
    support,
    labels,
    params: Optional[EmbeddingParams] = None,
    lam: float = 0.01,
    steps: int = 1000,
    lr: Optional[float] = None,
    tol: float = 1e-6,
    n_way: Optional[int] = None,
    init: Optional[LinearHead] = None,
) -> LinearHead:
    """Full-batch gradient descent on the regularized head objective.

    `support` is either features (B, d) or, with `params`, images.
    Stops after `steps` updates or once the gradient norm drops below `tol`.
    """
    if lam < 0:
        raise ValidationError(f"lambda must be >= 0, got {lam}")

    features = _features(support, params)
    labels = np.asarray(labels)
    if features.ndim != 2 or len(features) == 0:
        raise ValidationError("Support set is empty")
    check_finite(features, "support embeddings")

    n_way = int(labels.max()) + 1 if n_way is None else n_way
    head = init.copy() if init is not None else LinearHead.zeros(n_way, features.shape[1])
    head.lam = lam
    lr = auto_lr(features, lam) if lr is None else lr

    losses = []
    for step in range(steps + 1):
        loss, dW, db = head_objective(head, features, labels)
        losses.append(loss)
        if step == steps or np.sqrt(np.sum(dW ** 2) + np.sum(db ** 2)) < tol:
            break

        head.W -= lr * dW
        head.b -= lr * db

    head.losses = losses
    log_debug(f"Head fit: {len(losses) - 1} steps, loss {losses[0]:.4f} -> {losses[-1]:.4f}", "adapt::fit_linear_head")
    return head

def predict_linear(head: LinearHead, query, params: Optional[EmbeddingParams] = None) -> tuple[np.ndarray, np.ndarray]:
    probs = softmax(head.logits(_features(query, params)), axis=1)
    return probs, probs.argmax(axis=1)
