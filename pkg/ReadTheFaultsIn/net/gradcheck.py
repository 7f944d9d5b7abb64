from typing import Callable, Optional
import numpy as np
from ..log import log_debug
from ..utils import make_rng
from .embedding import EmbeddingParams, backward, forward

LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]

def squared_norm_loss(embeddings: np.ndarray) -> tuple[float, np.ndarray]:
    return float(np.sum(embeddings ** 2)), 2.0 * embeddings

def projection_loss(seed: int = 0) -> LossFn:
    """L = <E, R> for a fixed random R."""
    cache = {}

    def loss(embeddings):
        if embeddings.shape not in cache:
            cache[embeddings.shape] = make_rng(seed, "projection").standard_normal(embeddings.shape)
        r = cache[embeddings.shape]
        return float(np.sum(embeddings * r)), r

    return loss

def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-5) -> float:
    """||a - n|| / (||a|| + ||n||), with the denominator floored at `floor`.

    Tensors whose true gradient vanishes (a conv bias feeding a channel norm)
    are then judged on absolute error.
    """
    scale = max(float(np.linalg.norm(analytic) + np.linalg.norm(numeric)), floor)
    return float(np.linalg.norm(analytic - numeric) / scale)

def gradient_check(
    params: EmbeddingParams,
    images: np.ndarray,
    loss_fn: Optional[LossFn] = None,
    entries_per_tensor: int = 6,
    h: float = 1e-5,
    seed: int = 0,
) -> dict[str, float]:
    """Central-difference check of `backward` on sampled entries of every tensor.

    Runs on a float64 copy of `params`; returns the relative error per tensor.
    """
    params = params.astype(np.float64)
    loss_fn = loss_fn or projection_loss(seed)

    embeddings, cache = forward(params, images)
    _, dembeddings = loss_fn(embeddings)
    grads = backward(params, cache, dembeddings)

    def loss_at(name, index, value):
        tensors = dict(params.tensors)
        tensors[name] = tensors[name].copy()
        tensors[name][index] = value
        return loss_fn(forward(params.with_tensors(tensors), images, keep_cache=False).embeddings)[0]

    rng = make_rng(seed, "gradcheck")
    errors = {}
    for name, tensor in params.tensors.items():
        picks = rng.choice(tensor.size, min(entries_per_tensor, tensor.size), replace=False)
        analytic = []
        numeric = []
        for flat in picks:
            index = np.unravel_index(flat, tensor.shape)
            value = tensor[index]
            numeric.append((loss_at(name, index, value + h) - loss_at(name, index, value - h)) / (2 * h))
            analytic.append(grads[name][index])

        errors[name] = relative_error(np.array(analytic), np.array(numeric))
        log_debug(f"{name}: relative error {errors[name]:.2e}", "gradcheck::gradient_check")

    return errors
