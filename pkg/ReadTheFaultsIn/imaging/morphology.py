"""Flat greyscale morphology with edge replication at the border."""
from typing import Callable, Iterable, Optional, Union
from dataclasses import dataclass
import re
import numpy as np
from scipy import ndimage
from ..errors import ValidationError
from ..signalgen.signal import SignalSegment
from .image import GrayImage, normalize_pixels, reshape_to_image

BORDER_MODE = "nearest"

@dataclass(frozen=True, eq=False)
class StructuringElement:
    mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
            raise ValidationError(f"Structuring element must be square, got shape {mask.shape}")
        if mask.shape[0] % 2 == 0:
            raise ValidationError(f"Structuring element size must be odd, got {mask.shape[0]}")
        if not mask.any():
            raise ValidationError("Structuring element has no active cell")
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)

    @property
    def k(self) -> int:
        return self.mask.shape[0]

    @property
    def origin(self) -> tuple[int, int]:
        return ((self.k - 1) // 2, (self.k - 1) // 2)

    @property
    def contains_origin(self) -> bool:
        return bool(self.mask[self.origin])

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.mask, self.mask[::-1, ::-1]))

    @classmethod
    def square(cls, k: int = 3):
        return cls(np.ones((k, k), dtype=bool))

    @classmethod
    def cross(cls, k: int = 3):
        mask = np.zeros((k, k), dtype=bool)
        mask[k // 2, :] = True
        mask[:, k // 2] = True
        return cls(mask)

    def __eq__(self, other):
        if not isinstance(other, StructuringElement):
            return NotImplemented
        return np.array_equal(self.mask, other.mask)

    __hash__ = None

    def __repr__(self):
        return f"<StructuringElement {self.k}x{self.k} {int(self.mask.sum())} cells>"

def reflect(se: StructuringElement) -> StructuringElement:
    return StructuringElement(se.mask[::-1, ::-1])

def _footprint(se: StructuringElement, ndim: int) -> np.ndarray:
    # leading batch axes get a size-1 footprint
    return se.mask.reshape((1,) * (ndim - 2) + se.mask.shape)

def _as_pixels(image: Union[GrayImage, np.ndarray]) -> np.ndarray:
    return image.pixels if isinstance(image, GrayImage) else np.asarray(image, dtype=np.float64)

def _wrap(like, pixels: np.ndarray):
    return GrayImage(pixels) if isinstance(like, GrayImage) else pixels

def erode(image, se: StructuringElement):
    pixels = _as_pixels(image)
    return _wrap(image, ndimage.grey_erosion(pixels, footprint=_footprint(se, pixels.ndim), mode=BORDER_MODE))

def dilate(image, se: StructuringElement):
    pixels = _as_pixels(image)
    return _wrap(image, ndimage.grey_dilation(pixels, footprint=_footprint(se, pixels.ndim), mode=BORDER_MODE))

def opening(image, se: StructuringElement):
    return dilate(erode(image, se), se)

def closing(image, se: StructuringElement):
    return erode(dilate(image, se), se)

def gradient(image, se: StructuringElement):
    return _wrap(image, _as_pixels(dilate(image, se)) - _as_pixels(erode(image, se)))

def tophat(image, se: StructuringElement):
    return _wrap(image, _as_pixels(image) - _as_pixels(opening(image, se)))

def blackhat(image, se: StructuringElement):
    return _wrap(image, _as_pixels(closing(image, se)) - _as_pixels(image))

OPERATORS: dict[str, Callable] = {
    "erode": erode,
    "dilate": dilate,
    "open": opening,
    "close": closing,
    "gradient": gradient,
    "tophat": tophat,
    "blackhat": blackhat,
}

SHAPES = {
    "square": StructuringElement.square,
    "cross": StructuringElement.cross,
}

STEP_PATTERN = re.compile(r"^(?P<op>[a-z]+?)(?P<k>\d+)(?P<shape>[sc]?)$")

@dataclass(frozen=True)
class MorphStep:
    op: str
    k: int = 3
    shape: str = "square"

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise ValidationError(f"Unknown morphology operator {self.op!r}")
        if self.shape not in SHAPES:
            raise ValidationError(f"Unknown structuring element shape {self.shape!r}")

    @property
    def se(self) -> StructuringElement:
        return SHAPES[self.shape](self.k)

    @classmethod
    def parse(cls, text: str) -> "MorphStep":
        """`open3` is a 3x3 square opening, `close5c` a 5x5 cross closing."""
        if (match := STEP_PATTERN.match(text.strip().lower())) is None:
            raise ValidationError(f"Cannot parse morphology step {text!r}")

        shape = "cross" if match["shape"] == "c" else "square"
        return cls(match["op"], int(match["k"]), shape)

    def __call__(self, image):
        return OPERATORS[self.op](image, self.se)

    def __str__(self):
        return f"{self.op}{self.k}{'c' if self.shape == 'cross' else ''}"

Chain = tuple[MorphStep, ...]

DEFAULT_CHAIN: Chain = (MorphStep("open", 3, "square"),)

def parse_chain(steps: Optional[Iterable[Union[str, MorphStep, dict]]]) -> Chain:
    if steps is None:
        return DEFAULT_CHAIN

    chain = []
    for step in steps:
        if isinstance(step, MorphStep):
            chain.append(step)
        elif isinstance(step, str):
            chain.append(MorphStep.parse(step))
        else:
            chain.append(MorphStep(**step))

    return tuple(chain)

def preprocess(segment: Union[SignalSegment, np.ndarray], chain: Optional[Iterable] = None) -> GrayImage:
    """reshape -> normalize -> morphology chain -> normalize."""
    pixels = normalize_pixels(reshape_to_image(segment).pixels)
    for step in parse_chain(chain):
        pixels = step(pixels)

    return GrayImage(normalize_pixels(pixels))

def preprocess_batch(values: np.ndarray, chain: Optional[Iterable] = None) -> np.ndarray:
    """Same as `preprocess` over a (B, n*n) array; returns (B, n, n)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValidationError(f"Expected (batch, n*n) values, got shape {values.shape}")
    if values.shape[0] == 0:
        return np.empty((0, 0, 0))

    n = reshape_to_image(values[0]).n
    pixels = normalize_pixels(values.reshape(-1, n, n))
    for step in parse_chain(chain):
        pixels = step(pixels)

    return normalize_pixels(pixels)
