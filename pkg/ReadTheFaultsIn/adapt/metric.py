from typing import Optional
from dataclasses import dataclass
import numpy as np
from scipy.special import softmax
from sklearn.metrics.pairwise import cosine_similarity as pairwise_cosine
from ..errors import NumericalError, ShapeError, ValidationError
from ..net.embedding import EmbeddingParams, embed

@dataclass(frozen=True)
class MetricConfig:
    similarity: str = "cosine"
    # logits are cosine / temperature
    temperature: float = 10.0

    def __post_init__(self):
        if self.similarity != "cosine":
            raise ValidationError(f"Unsupported similarity {self.similarity!r}")
        if self.temperature <= 0:
            raise ValidationError(f"temperature must be > 0, got {self.temperature}")

def cosine_similarity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a_norm = np.linalg.norm(a, axis=1, keepdims=True)
    b_norm = np.linalg.norm(b, axis=1, keepdims=True)
    if np.any(a_norm == 0) or np.any(b_norm == 0):
        raise NumericalError("Cosine similarity of a zero-norm embedding")

    return pairwise_cosine(a, b)

def attention_weights(query: np.ndarray, support: np.ndarray, temperature: float) -> np.ndarray:
    """(Q, S) softmax over support items of cos / temperature."""
    return softmax(cosine_similarity(query, support) / temperature, axis=1)

def predict_metric(
    query,
    support,
    support_labels,
    params: Optional[EmbeddingParams] = None,
    mc: Optional[MetricConfig] = None,
    n_way: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray]:
    mc = mc or MetricConfig()
    support_labels = np.asarray(support_labels)
    if len(support_labels) == 0:
        raise ValidationError("Support set is empty")

    if params is not None:
        query, support = embed(params, query), embed(params, support)
    query = np.asarray(query, dtype=np.float64)
    support = np.asarray(support, dtype=np.float64)
    if query.shape[1:] != support.shape[1:] or len(support) != len(support_labels):
        raise ShapeError(f"Query {query.shape}, support {support.shape} and labels {support_labels.shape} disagree")

    n_way = int(support_labels.max()) + 1 if n_way is None else n_way
    onehot = np.eye(n_way)[support_labels]
    probs = attention_weights(query, support, mc.temperature) @ onehot
    return probs, probs.argmax(axis=1)
