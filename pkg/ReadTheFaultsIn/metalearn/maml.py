"""First-order MAML over N-way K-shot episodes.

The inner loop adapts a copy of the episode head (and, with `full_maml`,
of the backbone) by plain SGD on the support CE. The outer gradient is the
query CE gradient taken at the adapted parameters and applied to the shared
ones.
"""
from typing import NamedTuple, Optional
import numpy as np
from ..adapt.linear import LinearHead
from ..config import MetaConfig, PipelineConfig
from ..episodes.episode import Episode, sample_episode
from ..episodes.split import MetaSplit
from ..errors import NumericalError, ValidationError
from ..log import log_debug, log_info, log_warn
from ..net.embedding import EmbeddingParams, backward, embed, forward
from ..net.losses import softmax_cross_entropy
from ..net.optim import clip_and_step
from ..utils import ProgressTask, make_rng
from .common import (
    HEAD_B,
    HEAD_W,
    diverged,
    epoch_lr,
    fresh_params,
    head_tensors,
    outer_optimizer,
    outer_schedule,
    split_tensors,
)
from .trainlog import EpochRecord, TrainLog

class Adapted(NamedTuple):
    head: LinearHead
    params: EmbeddingParams
    # support CE before each step and after the last one
    losses: list[float]

class MetaResult(NamedTuple):
    params: EmbeddingParams
    head: LinearHead
    log: TrainLog

def inner_adapt(
    head: LinearHead,
    params: EmbeddingParams,
    support,
    labels,
    steps: int,
    inner_lr: float,
    full_maml: bool = False,
    features: Optional[np.ndarray] = None,
) -> Adapted:
    """`steps` SGD updates on the support CE; the inputs are left untouched.

    Head-only adaptation reuses `features` (support embeddings) when given.
    """
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValidationError("Support set is empty")
    if steps < 0:
        raise ValidationError(f"steps must be >= 0, got {steps}")

    head = head.copy()
    losses = []
    if not full_maml:
        features = embed(params, support) if features is None else features
        for _ in range(steps):
            ce, dlogits = softmax_cross_entropy(head.logits(features), labels)
            losses.append(ce)
            head.W -= inner_lr * (dlogits.T @ features)
            head.b -= inner_lr * dlogits.sum(axis=0)

        losses.append(softmax_cross_entropy(head.logits(features), labels).loss)
        return Adapted(head, params, losses)

    for _ in range(steps):
        embeddings, cache = forward(params, support)
        ce, dlogits = softmax_cross_entropy(head.logits(embeddings), labels)
        losses.append(ce)

        grads = backward(params, cache, dlogits @ head.W)
        head.W -= inner_lr * (dlogits.T @ embeddings)
        head.b -= inner_lr * dlogits.sum(axis=0)
        params = params.with_tensors({
            name: (tensor.astype(np.float64) - inner_lr * grads[name]).astype(tensor.dtype)
            for name, tensor in params.tensors.items()
        })

    losses.append(softmax_cross_entropy(head.logits(embed(params, support)), labels).loss)
    return Adapted(head, params, losses)

def episode_gradients(
    params: EmbeddingParams,
    head: LinearHead,
    episode: Episode,
    meta: MetaConfig,
) -> tuple[float, dict[str, np.ndarray], int]:
    """Query loss at the adapted parameters and its first-order gradient."""
    adapted = inner_adapt(
        head,
        params,
        episode.support_images,
        episode.support_labels,
        meta.inner_steps,
        meta.inner_lr,
        meta.full_maml,
    )

    embeddings, cache = forward(adapted.params, episode.query_images)
    logits = adapted.head.logits(embeddings)
    loss, dlogits = softmax_cross_entropy(logits, episode.query_labels)

    grads = backward(adapted.params, cache, dlogits @ adapted.head.W)
    grads[HEAD_W] = dlogits.T @ embeddings
    grads[HEAD_B] = dlogits.sum(axis=0)
    return loss, grads, int(np.sum(logits.argmax(axis=1) == episode.query_labels))

def meta_train(
    split: MetaSplit,
    cfg: PipelineConfig,
    params: Optional[EmbeddingParams] = None,
    task: Optional[ProgressTask] = None,
) -> MetaResult:
    meta = cfg.meta
    train = split.train()
    if not train:
        raise ValidationError("Meta split has no training tasks")

    params = params or fresh_params(cfg, train[0].n)
    head = LinearHead.zeros(meta.n_way, params.embedding_dim)
    opt = outer_optimizer(cfg)
    schedule = outer_schedule(cfg)
    seed = cfg.meta_seed
    log = TrainLog("metatrain")

    for epoch in range(meta.epochs):
        if task is not None:
            if task.cancelled:
                log.cancelled = True
                log_warn(f"Meta-training cancelled after {epoch} epochs", "metalearn::meta_train")
                break
            task.progress = f"Meta-training epoch {epoch + 1}/{meta.epochs}"

        if meta.episodes_per_epoch == 0:
            continue

        opt.lr = epoch_lr(schedule, epoch)
        rng = make_rng(seed, "meta", epoch)
        episodes = [
            sample_episode(train[rng.integers(len(train))], meta.n_way, meta.k_shot, meta.q_per_class, rng)
            for _ in range(meta.episodes_per_epoch)
        ]

        losses = []
        correct = 0
        max_norm = 0.0
        clipped = 0
        for start in range(0, len(episodes), meta.meta_batch_tasks):
            batch = episodes[start:start + meta.meta_batch_tasks]
            total = None
            try:
                for episode in batch:
                    loss, grads, hits = episode_gradients(params, head, episode, meta)
                    if not np.isfinite(loss):
                        raise NumericalError(f"query loss is {loss}")
                    losses.append(loss)
                    correct += hits
                    # summed in episode order
                    total = grads if total is None else {name: total[name] + grads[name] for name in total}

                mean_grads = {name: grad / len(batch) for name, grad in total.items()}
                params, head = split_tensors(params, head, clip_and_step(opt, head_tensors(params, head), mean_grads))
            except NumericalError as e:
                raise diverged(cfg, "metatrain", epoch, params, head, e) from e

            max_norm = max(max_norm, opt.last_grad_norm)
            clipped += opt.last_clipped

        queries = len(episodes) * meta.n_way * meta.q_per_class
        log.append(EpochRecord(epoch, float(np.mean(losses)), correct / queries, opt.lr, max_norm, clipped))
        log_debug(f"epoch {epoch}: loss {log.final.loss:.4f}, acc {log.final.acc:.3f}", "metalearn::meta_train")
        if task is not None:
            task.advance()

    if log.final is not None:
        log_info(f"Meta-trained {len(log)} epochs, query acc {log.final.acc:.3f}", "metalearn::meta_train")
        if (slope := log.tail_slope()) > 0:
            log_warn(f"Query loss still rising over the last epochs (slope {slope:.2e})", "metalearn::meta_train")
    return MetaResult(params, head, log)
