from typing import Mapping, Optional
from dataclasses import dataclass, field
import math
import numpy as np
from ..errors import NumericalError, ShapeError, ValidationError
from ..log import log_warn

Tensors = Mapping[str, np.ndarray]

@dataclass
class OptimizerState:
    kind: str = "sgd"
    lr: float = 0.01
    rho: float = 0.9
    eps: float = 1e-8
    clip_norm: float = 5.62
    accumulators: dict[str, np.ndarray] = field(default_factory=dict)
    steps: int = 0
    last_grad_norm: Optional[float] = None
    last_clipped: bool = False

    def __post_init__(self):
        if self.kind not in ("sgd", "rmsprop"):
            raise ValidationError(f"Unknown optimizer {self.kind!r}")
        if self.clip_norm <= 0:
            raise ValidationError(f"clip_norm must be > 0, got {self.clip_norm}")
        if self.lr < 0:
            raise ValidationError(f"lr must be >= 0, got {self.lr}")

def global_norm(grads: Tensors) -> float:
    return math.sqrt(sum(float(np.sum(np.square(grad, dtype=np.float64))) for grad in grads.values()))

def clip_gradients(grads: Tensors, clip_norm: float) -> tuple[dict[str, np.ndarray], float]:
    norm = global_norm(grads)
    if not math.isfinite(norm):
        raise NumericalError("Gradient is not finite")

    scale = clip_norm / norm if norm > clip_norm else 1.0
    return {name: np.asarray(grad, dtype=np.float64) * scale for name, grad in grads.items()}, norm

def clip_and_step(opt: OptimizerState, params: Tensors, grads: Tensors) -> dict[str, np.ndarray]:
    """Clip `grads` to `opt.clip_norm` globally, then take one step.

    Returns new parameter arrays in the parameters' dtype; `opt` keeps the
    accumulators and the pre-clip norm of this step.
    """
    if set(params) != set(grads):
        raise ShapeError(f"Gradient names differ from parameter names: {sorted(set(params) ^ set(grads))}")
    for name, param in params.items():
        if np.shape(grads[name]) != param.shape:
            raise ShapeError(f"Gradient of {name} has shape {np.shape(grads[name])}, expected {param.shape}")

    clipped, norm = clip_gradients(grads, opt.clip_norm)
    opt.last_grad_norm = norm
    opt.last_clipped = norm > opt.clip_norm
    opt.steps += 1

    updated = {}
    for name, param in params.items():
        grad = clipped[name]
        if opt.kind == "sgd":
            step = opt.lr * grad
        else:
            acc = opt.accumulators.get(name)
            if acc is None:
                acc = np.zeros(param.shape)
            elif acc.shape != param.shape:
                raise ShapeError(f"Accumulator of {name} has shape {acc.shape}, expected {param.shape}")

            acc = opt.rho * acc + (1.0 - opt.rho) * grad * grad
            opt.accumulators[name] = acc
            step = opt.lr * grad / np.sqrt(acc + opt.eps)

        updated[name] = (param.astype(np.float64) - step).astype(param.dtype)

    return updated

@dataclass(frozen=True)
class LrSchedule:
    start: float = 1e-6
    end: float = 5e-5
    epochs: int = 500

    def __post_init__(self):
        if self.start > self.end:
            raise ValidationError(f"Schedule start {self.start} exceeds end {self.end}")
        if self.epochs < 1:
            raise ValidationError(f"Schedule needs at least one epoch, got {self.epochs}")

    @classmethod
    def constant(cls, lr: float, epochs: int = 1):
        return cls(lr, lr, epochs)

def lr_at(schedule: LrSchedule, epoch: int) -> float:
    if not 0 <= epoch <= schedule.epochs:
        log_warn(f"Epoch {epoch} outside schedule [0, {schedule.epochs}], clamping", "optim::lr_at")
        epoch = min(max(epoch, 0), schedule.epochs)

    return schedule.start + (schedule.end - schedule.start) * epoch / schedule.epochs
