"""Supervised embedding training: pooled-class pretraining and self-distillation."""
from typing import NamedTuple, Optional, Sequence
from dataclasses import dataclass
import numpy as np
from ..adapt.linear import LinearHead, fit_linear_head
from ..config import PipelineConfig
from ..episodes.task import TaskDataset
from ..errors import NumericalError, ShapeError
from ..log import log_info, log_warn
from ..net.embedding import EmbeddingParams, backward, embed, forward
from ..net.losses import kl_divergence, softmax_cross_entropy
from ..net.optim import clip_and_step
from ..signalgen.health import FaultClass
from ..utils import ProgressTask, make_rng
from .common import (
    HEAD_B,
    HEAD_W,
    diverged,
    epoch_lr,
    fresh_params,
    head_tensors,
    init_head,
    outer_optimizer,
    outer_schedule,
    pooled_dataset,
    split_tensors,
)
from .trainlog import EpochRecord, TrainLog

# pooled samples used to fit a teacher head when none is supplied
TEACHER_HEAD_SAMPLES = 2000

@dataclass(frozen=True)
class Teacher:
    params: EmbeddingParams
    head: LinearHead

class SupervisedResult(NamedTuple):
    params: EmbeddingParams
    head: LinearHead
    log: TrainLog
    classes: tuple[FaultClass, ...]

def supervised_step(
    params: EmbeddingParams,
    head: LinearHead,
    images: np.ndarray,
    labels: np.ndarray,
    teacher: Optional[Teacher] = None,
    alpha: float = 1.0,
    beta: float = 0.0,
    temperature: float = 1.0,
) -> tuple[float, dict[str, np.ndarray], int]:
    """alpha * CE + beta * KL(teacher || student) on one batch, with gradients."""
    embeddings, cache = forward(params, images)
    logits = head.logits(embeddings)

    ce, dlogits = softmax_cross_entropy(logits, labels)
    loss = alpha * ce
    dlogits = alpha * dlogits
    if teacher is not None and beta > 0:
        teacher_logits = teacher.head.logits(embed(teacher.params, images))
        kl, dkl = kl_divergence(logits, teacher_logits, temperature)
        loss += beta * kl
        dlogits = dlogits + beta * dkl

    grads = backward(params, cache, dlogits @ head.W)
    grads[HEAD_W] = dlogits.T @ embeddings
    grads[HEAD_B] = dlogits.sum(axis=0)
    return float(loss), grads, int(np.sum(logits.argmax(axis=1) == labels))

def supervised_loop(
    phase: str,
    params: EmbeddingParams,
    head: LinearHead,
    images: np.ndarray,
    labels: np.ndarray,
    cfg: PipelineConfig,
    epochs: int,
    teacher: Optional[Teacher] = None,
    alpha: float = 1.0,
    beta: float = 0.0,
    temperature: float = 1.0,
    task: Optional[ProgressTask] = None,
) -> tuple[EmbeddingParams, LinearHead, TrainLog]:
    opt = outer_optimizer(cfg)
    schedule = outer_schedule(cfg)
    batch_size = cfg.pretrain.batch_size
    log = TrainLog(phase)

    for epoch in range(epochs):
        if task is not None:
            if task.cancelled:
                log.cancelled = True
                log_warn(f"{phase} cancelled after {epoch} epochs", f"{phase}::train")
                break
            task.progress = f"{phase} epoch {epoch + 1}/{epochs}"

        opt.lr = epoch_lr(schedule, epoch)
        # the batch stream depends only on (seed, epoch)
        rng = make_rng(cfg.seed, "supervised", epoch)
        losses = []
        correct = 0
        max_norm = 0.0
        clipped = 0
        for _ in range(cfg.pretrain.batches_per_epoch):
            picks = rng.choice(len(images), batch_size, replace=len(images) < batch_size)
            try:
                loss, grads, hits = supervised_step(
                    params, head, images[picks], labels[picks], teacher, alpha, beta, temperature,
                )
                if not np.isfinite(loss):
                    raise NumericalError(f"loss is {loss}")
                params, head = split_tensors(params, head, clip_and_step(opt, head_tensors(params, head), grads))
            except NumericalError as e:
                raise diverged(cfg, phase, epoch, params, head, e) from e

            losses.append(loss)
            correct += hits
            max_norm = max(max_norm, opt.last_grad_norm)
            clipped += opt.last_clipped

        log.append(EpochRecord(
            epoch,
            float(np.mean(losses)),
            correct / (batch_size * len(losses)),
            opt.lr,
            max_norm,
            clipped,
        ))
        if task is not None:
            task.advance()

    if log.final is not None:
        log_info(f"{phase}: {len(log)} epochs, loss {log.final.loss:.4f}, acc {log.final.acc:.3f}", f"{phase}::train")
    return params, head, log

def pretrain_with_head(
    tasks: Sequence[TaskDataset],
    cfg: PipelineConfig,
    params: Optional[EmbeddingParams] = None,
    task: Optional[ProgressTask] = None,
) -> SupervisedResult:
    if task is not None:
        task.progress = "Pooling training images"

    images, labels, classes = pooled_dataset(tasks)
    params = params or fresh_params(cfg, images.shape[-1])
    head = init_head(len(classes), params.embedding_dim, cfg.seed)

    params, head, log = supervised_loop("pretrain", params, head, images, labels, cfg, cfg.pretrain.epochs, task=task)
    return SupervisedResult(params, head, log, classes)

def pretrain_embedding(
    tasks: Sequence[TaskDataset],
    cfg: PipelineConfig,
    task: Optional[ProgressTask] = None,
) -> EmbeddingParams:
    """Embedding trained on pooled-class CE; the temporary head is discarded."""
    return pretrain_with_head(tasks, cfg, task=task).params

def fit_teacher_head(
    teacher_params: EmbeddingParams,
    images: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    cfg: PipelineConfig,
) -> LinearHead:
    picks = np.arange(len(images))
    if len(picks) > TEACHER_HEAD_SAMPLES:
        picks = np.sort(make_rng(cfg.seed, "teacher_head").choice(len(images), TEACHER_HEAD_SAMPLES, replace=False))

    return fit_linear_head(
        images[picks],
        labels[picks],
        teacher_params,
        lam=cfg.adapt.lam,
        steps=cfg.adapt.steps,
        lr=cfg.adapt.lr,
        tol=cfg.adapt.tol,
        n_way=n_classes,
    )

def distill_with_head(
    teacher_params: EmbeddingParams,
    tasks: Sequence[TaskDataset],
    cfg: PipelineConfig,
    teacher_head: Optional[LinearHead] = None,
    init_from_teacher: bool = False,
    task: Optional[ProgressTask] = None,
) -> SupervisedResult:
    if task is not None:
        task.progress = "Pooling training images"

    images, labels, classes = pooled_dataset(tasks)
    if teacher_head is None:
        if task is not None:
            task.progress = "Fitting teacher head"
        teacher_head = fit_teacher_head(teacher_params, images, labels, len(classes), cfg)
    if teacher_head.n_way != len(classes) or teacher_head.dim != teacher_params.embedding_dim:
        raise ShapeError(
            f"Teacher head is {teacher_head.n_way}x{teacher_head.dim}, "
            f"expected {len(classes)}x{teacher_params.embedding_dim}"
        )

    if init_from_teacher:
        params, head = teacher_params.copy(), teacher_head.copy()
    else:
        params = fresh_params(cfg, images.shape[-1])
        head = init_head(len(classes), params.embedding_dim, cfg.seed)

    meta = cfg.meta
    params, head, log = supervised_loop(
        "distill",
        params,
        head,
        images,
        labels,
        cfg,
        meta.distill_epochs,
        Teacher(teacher_params, teacher_head),
        meta.alpha,
        meta.beta,
        meta.temperature,
        task,
    )
    return SupervisedResult(params, head, log, classes)

def self_distill(
    teacher_params: EmbeddingParams,
    tasks: Sequence[TaskDataset],
    cfg: PipelineConfig,
    teacher_head: Optional[LinearHead] = None,
    task: Optional[ProgressTask] = None,
) -> EmbeddingParams:
    """Same-architecture student trained on alpha * CE + beta * KL against the frozen teacher."""
    return distill_with_head(teacher_params, tasks, cfg, teacher_head, task=task).params
