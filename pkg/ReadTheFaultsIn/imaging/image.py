from typing import Union
from dataclasses import dataclass
from pathlib import Path
import math
import numpy as np
from ..errors import NumericalError, ShapeError
from ..signalgen.signal import SignalSegment

@dataclass(frozen=True, eq=False)
class GrayImage:
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.float64)
        if pixels.ndim != 2 or pixels.shape[0] != pixels.shape[1] or pixels.size == 0:
            raise ShapeError(f"GrayImage must be a nonempty square matrix, got shape {pixels.shape}")
        if not np.all(np.isfinite(pixels)):
            raise NumericalError("GrayImage pixels must be finite")
        pixels.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)

    @property
    def n(self) -> int:
        return self.pixels.shape[0]

    @property
    def is_normalized(self) -> bool:
        return bool(self.pixels.min() >= 0.0 and self.pixels.max() <= 1.0)

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None

def reshape_to_image(segment: Union[SignalSegment, np.ndarray]) -> GrayImage:
    """Row-major fill: row r holds samples r*n .. (r+1)*n - 1."""
    values = segment.values if isinstance(segment, SignalSegment) else np.asarray(segment, dtype=np.float64)
    if values.ndim != 1:
        raise ShapeError(f"Expected a 1-D segment, got shape {values.shape}")

    n = math.isqrt(values.size)
    if values.size == 0 or n * n != values.size:
        raise ShapeError(f"Segment length {values.size} is not a perfect square")

    return GrayImage(values.reshape(n, n))

def flatten_image(image: GrayImage) -> np.ndarray:
    return image.pixels.reshape(-1).copy()

def normalize_pixels(pixels: np.ndarray) -> np.ndarray:
    """Min-max map each trailing n x n plane to [0, 1]; flat planes become 0.5."""
    pixels = np.asarray(pixels, dtype=np.float64)
    lo = pixels.min(axis=(-2, -1), keepdims=True)
    span = pixels.max(axis=(-2, -1), keepdims=True) - lo

    flat = span == 0
    out = (pixels - lo) / np.where(flat, 1.0, span)
    out = np.where(flat, 0.5, out)
    return np.clip(out, 0.0, 1.0)

def normalize(image: Union[GrayImage, np.ndarray]):
    if isinstance(image, GrayImage):
        return GrayImage(normalize_pixels(image.pixels))

    return normalize_pixels(np.atleast_2d(image))

def write_pgm(image: GrayImage, path) -> Path:
    """ASCII (P2) greymap, 8-bit quantized from [0, 1]."""
    path = Path(path)
    levels = np.rint(np.clip(image.pixels, 0.0, 1.0) * 255).astype(np.uint8)

    lines = ["P2", f"{image.n} {image.n}", "255"]
    lines += [" ".join(str(v) for v in row) for row in levels]
    path.write_text("\n".join(lines) + "\n")
    return path

def read_pgm(path) -> GrayImage:
    tokens = [
        token
        for line in Path(path).read_text().splitlines()
        for token in line.split("#", 1)[0].split()
    ]
    if not tokens or tokens[0] != "P2":
        raise ShapeError(f"{path} is not an ASCII greymap")

    width, height, maxval = (int(token) for token in tokens[1:4])
    if width != height:
        raise ShapeError(f"{path} is {width}x{height}, not square")

    values = np.array([int(token) for token in tokens[4:]], dtype=np.float64)
    return GrayImage(values.reshape(height, width) / maxval)
