from typing import Any, NamedTuple
from dataclasses import dataclass, field, replace
from functools import cache
import numpy as np
from ..errors import ShapeError
from ..utils import check_finite, make_rng
from .layers import Layer

PARAM_DTYPE = np.float32

@cache
def architecture(image_size: int, channels: int, blocks: int) -> tuple[Layer, ...]:
    """`blocks` x {conv3x3, channel_norm, relu, maxpool2}, then flatten."""
    if image_size % (2 ** blocks):
        raise ShapeError(f"Image size {image_size} is not divisible by {2 ** blocks}")

    layers = []
    shape = (1, image_size, image_size)
    for i in range(blocks):
        for kind, suffix, options in (
            ("conv3x3", "conv", {"out_channels": channels}),
            ("channel_norm", "norm", {}),
            ("relu", "relu", {}),
            ("maxpool2", "pool", {}),
        ):
            layer = Layer.create(kind, f"block{i}.{suffix}", shape, **options)
            layers.append(layer)
            shape = layer.out_shape

    layers.append(Layer.create("flatten", "flatten", shape))
    return tuple(layers)

@dataclass(frozen=True, eq=False)
class EmbeddingParams:
    tensors: dict[str, np.ndarray]
    image_size: int
    channels: int = 32
    blocks: int = 4

    def __post_init__(self):
        expected = {
            name: shape
            for layer in self.layers
            for name, shape in layer.param_shapes().items()
        }
        if set(expected) != set(self.tensors):
            raise ShapeError(
                f"Parameter names differ from the architecture: "
                f"missing {sorted(set(expected) - set(self.tensors))}, "
                f"unexpected {sorted(set(self.tensors) - set(expected))}"
            )
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ShapeError(f"{name} has shape {self.tensors[name].shape}, expected {shape}")
            check_finite(self.tensors[name], name)

    @property
    def layers(self) -> tuple[Layer, ...]:
        return architecture(self.image_size, self.channels, self.blocks)

    @property
    def embedding_dim(self) -> int:
        return self.channels * (self.image_size // 2 ** self.blocks) ** 2

    @property
    def names(self) -> list[str]:
        return list(self.tensors)

    def with_tensors(self, tensors: dict[str, np.ndarray]) -> "EmbeddingParams":
        return replace(self, tensors=dict(tensors))

    def astype(self, dtype) -> "EmbeddingParams":
        return self.with_tensors({name: tensor.astype(dtype) for name, tensor in self.tensors.items()})

    def copy(self) -> "EmbeddingParams":
        return self.with_tensors({name: tensor.copy() for name, tensor in self.tensors.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {name: np.zeros(tensor.shape) for name, tensor in self.tensors.items()}

    def equals(self, other: "EmbeddingParams") -> bool:
        return self.tensors.keys() == other.tensors.keys() and all(
            np.array_equal(tensor, other.tensors[name])
            for name, tensor in self.tensors.items()
        )

    def __repr__(self):
        count = sum(tensor.size for tensor in self.tensors.values())
        return f"<EmbeddingParams {self.image_size}px {self.blocks}x{self.channels}ch, {count} weights>"

def init_params(
    image_size: int = 64,
    channels: int = 32,
    blocks: int = 4,
    seed: int = 0,
    dtype=PARAM_DTYPE,
) -> EmbeddingParams:
    rng = make_rng(seed, "init")
    tensors = {}
    for layer in architecture(image_size, channels, blocks):
        for name, tensor in layer.init(rng).items():
            tensors[name] = np.asarray(tensor).astype(dtype)

    return EmbeddingParams(tensors, image_size, channels, blocks)

@dataclass(eq=False)
class ForwardCache:
    params: EmbeddingParams
    batch_size: int
    layer_caches: list[Any] = field(default_factory=list)

class ForwardResult(NamedTuple):
    embeddings: np.ndarray
    cache: ForwardCache

def _as_batch(params: EmbeddingParams, batch) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 3:
        batch = batch[:, None]
    if batch.ndim != 4 or batch.shape[1:] != (1, params.image_size, params.image_size):
        raise ShapeError(
            f"Expected a batch of {params.image_size}x{params.image_size} images, got shape {batch.shape}"
        )
    return batch

def forward(params: EmbeddingParams, batch, keep_cache: bool = True) -> ForwardResult:
    x = _as_batch(params, batch)
    tensors = {name: tensor.astype(np.float64) for name, tensor in params.tensors.items()}

    cache = ForwardCache(params, x.shape[0])
    for layer in params.layers:
        x, layer_cache = layer.forward(x, tensors)
        if keep_cache:
            cache.layer_caches.append(layer_cache)

    check_finite(x, "embeddings")
    return ForwardResult(x, cache)

def embed(params: EmbeddingParams, batch, chunk: int = 256) -> np.ndarray:
    """Forward without a cache, in chunks."""
    batch = _as_batch(params, batch)
    if len(batch) == 0:
        return np.empty((0, params.embedding_dim))

    return np.concatenate([
        forward(params, batch[i:i + chunk], keep_cache=False).embeddings
        for i in range(0, len(batch), chunk)
    ])

def backward(params: EmbeddingParams, cache: ForwardCache, dembeddings: np.ndarray) -> dict[str, np.ndarray]:
    if cache.params is not params or len(cache.layer_caches) != len(params.layers):
        raise ShapeError("Forward cache does not belong to these parameters")

    dy = np.asarray(dembeddings, dtype=np.float64)
    if dy.shape != (cache.batch_size, params.embedding_dim):
        raise ShapeError(f"Upstream gradient has shape {dy.shape}, expected {(cache.batch_size, params.embedding_dim)}")

    tensors = {name: tensor.astype(np.float64) for name, tensor in params.tensors.items()}
    grads = params.zeros_like()
    for layer, layer_cache in zip(reversed(params.layers), reversed(cache.layer_caches)):
        dy, layer_grads = layer.backward(dy, layer_cache, tensors)
        for name, grad in layer_grads.items():
            grads[name] += grad

    return grads
