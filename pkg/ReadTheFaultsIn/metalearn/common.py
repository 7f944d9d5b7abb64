from typing import Optional, Sequence
from pathlib import Path
import numpy as np
from ..adapt.linear import LinearHead
from ..config import PipelineConfig
from ..episodes.task import TaskDataset
from ..errors import TrainingDivergedError, ValidationError
from ..log import log_error
from ..net.checkpoint import save_checkpoint
from ..net.embedding import EmbeddingParams, init_params
from ..net.optim import LrSchedule, OptimizerState, lr_at
from ..signalgen.health import FaultClass
from ..utils import make_rng

HEAD_W = "head.W"
HEAD_B = "head.b"

def outer_optimizer(cfg: PipelineConfig) -> OptimizerState:
    return OptimizerState(
        kind=cfg.optim.outer,
        lr=cfg.optim.lr_start,
        rho=cfg.optim.rho,
        eps=cfg.optim.eps,
        clip_norm=cfg.optim.clip_norm,
    )

def outer_schedule(cfg: PipelineConfig) -> LrSchedule:
    return LrSchedule(cfg.optim.lr_start, cfg.optim.lr_end, cfg.optim.lr_epochs)

def epoch_lr(schedule: LrSchedule, epoch: int) -> float:
    # runs longer than the ramp stay at its end value
    return lr_at(schedule, min(epoch, schedule.epochs))

def fresh_params(cfg: PipelineConfig, image_size: Optional[int] = None) -> EmbeddingParams:
    return init_params(
        image_size or cfg.signal.n,
        cfg.net.channels,
        cfg.net.blocks,
        seed=cfg.seed,
    )

def init_head(n_classes: int, dim: int, seed: int) -> LinearHead:
    bound = 1.0 / np.sqrt(dim)
    rng = make_rng(seed, "head")
    return LinearHead(rng.uniform(-bound, bound, (n_classes, dim)), rng.uniform(-bound, bound, n_classes))

def pooled_dataset(tasks: Sequence[TaskDataset]) -> tuple[np.ndarray, np.ndarray, tuple[FaultClass, ...]]:
    """All images of `tasks` with labels indexing the sorted union of their classes."""
    if not tasks:
        raise ValidationError("No tasks to train on")

    classes = tuple(sorted({fault for dataset in tasks for fault in dataset.classes}))
    index = {fault: i for i, fault in enumerate(classes)}

    images, labels = [], []
    for dataset in tasks:
        for fault in dataset.classes:
            class_images = dataset.images(fault)
            images.append(class_images)
            labels.append(np.full(len(class_images), index[fault], dtype=np.int64))

    return np.concatenate(images), np.concatenate(labels), classes

def head_tensors(params: EmbeddingParams, head: LinearHead) -> dict[str, np.ndarray]:
    return {**params.tensors, HEAD_W: head.W, HEAD_B: head.b}

def split_tensors(params: EmbeddingParams, head: LinearHead, tensors: dict[str, np.ndarray]):
    return (
        params.with_tensors({name: tensors[name] for name in params.names}),
        LinearHead(tensors[HEAD_W], tensors[HEAD_B], head.lam),
    )

def diverged(
    cfg: PipelineConfig,
    phase: str,
    epoch: int,
    params: EmbeddingParams,
    head: LinearHead,
    cause: Exception,
) -> TrainingDivergedError:
    path = None
    if cfg.pretrain.checkpoint_dir is not None:
        path = save_checkpoint(
            Path(cfg.pretrain.checkpoint_dir) / f"{phase}_last_good.ckpt",
            params,
            extras={HEAD_W: head.W, HEAD_B: head.b},
            meta={"phase": phase, "epoch": epoch},
        )

    log_error(f"{phase} diverged at epoch {epoch}: {cause}", f"{phase}::train")
    return TrainingDivergedError(f"{phase} diverged at epoch {epoch}: {cause}", epoch, params, path)
