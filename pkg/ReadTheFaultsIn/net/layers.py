"""Layers of the embedding network with exact, hand-written backward passes.

Activations are (batch, channels, height, width) float64 arrays.
"""
from typing import Any, ClassVar
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from ..errors import ShapeError

Shape = tuple[int, ...]

class Layer:
    kind: ClassVar[str]
    __layers__: ClassVar[dict[str, type["Layer"]]] = {}

    def __init_subclass__(cls, kind=None, **kwargs):
        super().__init_subclass__(**kwargs)
        assert kind is not None, f"Kind of {cls.__name__} must be specified"
        cls.kind = kind
        Layer.__layers__[kind] = cls

    def __init__(self, name: str, in_shape: Shape, **options):
        self.name = name
        self.in_shape = tuple(in_shape)

    @classmethod
    def create(cls, kind: str, name: str, in_shape: Shape, **options) -> "Layer":
        if (layer := cls.__layers__.get(kind)) is None:
            raise ShapeError(f"Unknown layer kind {kind!r}")
        return layer(name, in_shape, **options)

    @property
    def out_shape(self) -> Shape:
        return self.in_shape

    def param_shapes(self) -> dict[str, Shape]:
        return {}

    def init(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        return {}

    def key(self, suffix: str) -> str:
        return f"{self.name}.{suffix}"

    def forward(self, x: np.ndarray, params: dict[str, np.ndarray]) -> tuple[np.ndarray, Any]:
        raise NotImplementedError()

    def backward(self, dy: np.ndarray, cache: Any, params: dict[str, np.ndarray]) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        raise NotImplementedError()

    def __repr__(self):
        return f"<{self.kind} {self.name} {self.in_shape}->{self.out_shape}>"

def _windows3x3(x: np.ndarray) -> np.ndarray:
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    return sliding_window_view(padded, (3, 3), axis=(2, 3))

class Conv3x3(Layer, kind="conv3x3"):
    def __init__(self, name: str, in_shape: Shape, out_channels: int = 32):
        super().__init__(name, in_shape)
        self.out_channels = out_channels

    @property
    def out_shape(self) -> Shape:
        _, h, w = self.in_shape
        return (self.out_channels, h, w)

    def param_shapes(self) -> dict[str, Shape]:
        return {
            self.key("weight"): (self.out_channels, self.in_shape[0], 3, 3),
            self.key("bias"): (self.out_channels,),
        }

    def init(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        bound = 1.0 / np.sqrt(self.in_shape[0] * 9)
        return {
            name: rng.uniform(-bound, bound, shape)
            for name, shape in self.param_shapes().items()
        }

    def forward(self, x, params):
        weight = params[self.key("weight")]
        bias = params[self.key("bias")]
        windows = _windows3x3(x)
        # (B, H, W, O) -> (B, O, H, W)
        y = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        return y + bias[None, :, None, None], windows

    def backward(self, dy, cache, params):
        windows = cache
        weight = params[self.key("weight")]

        grads = {
            self.key("weight"): np.tensordot(dy, windows, axes=([0, 2, 3], [0, 2, 3])),
            self.key("bias"): dy.sum(axis=(0, 2, 3)),
        }
        flipped = weight[:, :, ::-1, ::-1]
        dx = np.tensordot(_windows3x3(dy), flipped, axes=([1, 4, 5], [0, 2, 3])).transpose(0, 3, 1, 2)
        return dx, grads

class ChannelNorm(Layer, kind="channel_norm"):
    """Per-sample, per-channel normalization over the spatial axes, then affine."""

    EPS = 1e-5

    def param_shapes(self) -> dict[str, Shape]:
        channels = self.in_shape[0]
        return {self.key("gamma"): (channels,), self.key("beta"): (channels,)}

    def init(self, rng):
        channels = self.in_shape[0]
        return {self.key("gamma"): np.ones(channels), self.key("beta"): np.zeros(channels)}

    def forward(self, x, params):
        gamma = params[self.key("gamma")][None, :, None, None]
        beta = params[self.key("beta")][None, :, None, None]

        mean = x.mean(axis=(2, 3), keepdims=True)
        inv_std = 1.0 / np.sqrt(x.var(axis=(2, 3), keepdims=True) + self.EPS)
        x_hat = (x - mean) * inv_std
        return gamma * x_hat + beta, (x_hat, inv_std)

    def backward(self, dy, cache, params):
        x_hat, inv_std = cache
        gamma = params[self.key("gamma")][None, :, None, None]
        grads = {
            self.key("gamma"): (dy * x_hat).sum(axis=(0, 2, 3)),
            self.key("beta"): dy.sum(axis=(0, 2, 3)),
        }

        dx_hat = dy * gamma
        dx = inv_std * (
            dx_hat
            - dx_hat.mean(axis=(2, 3), keepdims=True)
            - x_hat * (dx_hat * x_hat).mean(axis=(2, 3), keepdims=True)
        )
        return dx, grads

class ReLU(Layer, kind="relu"):
    def forward(self, x, params):
        mask = x > 0
        return x * mask, mask

    def backward(self, dy, cache, params):
        return dy * cache, {}

class MaxPool2(Layer, kind="maxpool2"):
    @property
    def out_shape(self) -> Shape:
        c, h, w = self.in_shape
        return (c, h // 2, w // 2)

    def forward(self, x, params):
        b, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ShapeError(f"{self.name}: cannot pool a {h}x{w} map")

        cells = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // 2, w // 2, 4)
        winner = cells.argmax(axis=-1)[..., None]
        return np.take_along_axis(cells, winner, axis=-1)[..., 0], (winner, x.shape)

    def backward(self, dy, cache, params):
        winner, (b, c, h, w) = cache
        cells = np.zeros((b, c, h // 2, w // 2, 4))
        np.put_along_axis(cells, winner, dy[..., None], axis=-1)
        dx = cells.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h, w)
        return dx, {}

class Flatten(Layer, kind="flatten"):
    @property
    def out_shape(self) -> Shape:
        return (int(np.prod(self.in_shape)),)

    def forward(self, x, params):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache, params):
        return dy.reshape(cache), {}
