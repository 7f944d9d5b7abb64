from typing import Optional, Iterable, Iterator, TypeVar
import zlib
import numpy as np
from scipy.stats import norm, sem
from tqdm import tqdm
from .errors import NumericalError, ValidationError

T = TypeVar("T")

class ProgressTask:
    """tqdm-backed stand-in for a long-running background task.

    Callers only ever touch `progress`, `cancelled` and `advance`, so any
    object with those members can be passed where a task is accepted.
    """

    def __init__(self, title: str, total: Optional[int] = None, disable: bool = False):
        self.title = title
        self.cancelled = False
        self._bar = tqdm(total=total, desc=title, disable=disable, leave=False)

    @property
    def progress(self) -> str:
        return self._bar.desc

    @progress.setter
    def progress(self, text: str):
        self._bar.set_description_str(text)

    def advance(self, n: int = 1):
        self._bar.update(n)

    def cancel(self):
        self.cancelled = True

    def finish(self):
        self._bar.close()

    def __enter__(self):
        return self

    def __exit__(self, *_):
        self.finish()

def track(items: Iterable[T], task: Optional[ProgressTask], label: str) -> Iterator[T]:
    items = list(items)
    total = len(items)
    for i, item in enumerate(items):
        if task is not None:
            if task.cancelled:
                return
            task.progress = f"{label} ({i}/{total})"
        yield item

def stable_key(value) -> int:
    return zlib.crc32(str(value).encode())

def make_rng(seed: int, *keys) -> np.random.Generator:
    """Independent generator for (seed, *keys); same inputs, same stream."""
    spawn_key = tuple(k if isinstance(k, int) and k >= 0 else stable_key(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=spawn_key))

def check_finite(array, what: str):
    if not np.all(np.isfinite(array)):
        raise NumericalError(f"Non-finite values in {what}")

    return array

def confidence_interval(values, level: float = 0.95) -> tuple[float, float]:
    """Mean and normal-approximation half width, z * SE."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValidationError("No values to summarize")
    if values.size == 1:
        return float(values[0]), 0.0

    return float(values.mean()), float(norm.ppf(0.5 + level / 2) * sem(values))
