from typing import Iterable, Optional
from dataclasses import dataclass, field
import numpy as np
from ..adapt.linear import LinearHead, fit_linear_head
from ..config import AdaptSettings
from ..episodes.episode import sample_episode
from ..episodes.split import MetaSplit
from ..episodes.task import TaskDataset, exclude_classes
from ..errors import ValidationError
from ..log import log_info
from ..net.embedding import EmbeddingParams, embed
from ..signalgen.health import FaultClass
from ..utils import ProgressTask, confidence_interval, make_rng, track
from .maml import inner_adapt

@dataclass
class AdaptationResult:
    params: EmbeddingParams
    head: LinearHead
    accuracy: float
    ci95: float
    k_shot: int
    steps: Optional[int]
    episode_accuracies: list[float] = field(default_factory=list, repr=False)

    @property
    def episodes(self) -> int:
        return len(self.episode_accuracies)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "ci95": self.ci95,
            "episodes": self.episodes,
            "k_shot": self.k_shot,
            "steps": self.steps,
        }

def build_unseen_split(
    split: MetaSplit,
    held_out: Iterable,
    source: Optional[str] = None,
    task_id: str = "T9",
) -> tuple[MetaSplit, TaskDataset]:
    """Drop `held_out` classes from every training task.

    The unseen task is a copy of `source` (default: the first test task)
    that keeps all its classes, held-out ones included.
    """
    held_out = tuple(FaultClass.parse(fault) for fault in held_out)
    if not held_out:
        raise ValidationError("No class to hold out")

    source = source or split.test_tasks[0]
    if source not in split.datasets:
        raise ValidationError(f"Unknown source task {source}")

    datasets = dict(split.datasets)
    for train_id in split.train_tasks:
        datasets[train_id] = exclude_classes(datasets[train_id], held_out)

    source_task = datasets[source]
    unseen = TaskDataset(task_id, dict(source_task.samples), source_task.loads, source_task.snr_db, source_task.chain)
    datasets[task_id] = unseen

    log_info(
        f"Holding out {', '.join(fault.label for fault in held_out)}; unseen task {task_id} from {source}",
        "metalearn::build_unseen_split",
    )
    return MetaSplit(split.train_tasks, split.test_tasks, datasets), unseen

def adapt_to_unseen(
    params: EmbeddingParams,
    unseen_task: TaskDataset,
    k_shot: int,
    steps: Optional[int] = None,
    n_way: int = 6,
    episodes: int = 100,
    q_per_class: int = 15,
    inner_lr: float = 0.01,
    seed: int = 0,
    include: Iterable = (),
    adapt: Optional[AdaptSettings] = None,
    task: Optional[ProgressTask] = None,
) -> AdaptationResult:
    """Frozen backbone, fresh head per episode.

    With `steps` the head is adapted from zero by `steps` inner SGD updates;
    otherwise it is fitted to convergence with the regularized linear head.
    """
    adapt = adapt or AdaptSettings()
    include = tuple(include)

    accuracies = []
    head = None
    for i in track(range(episodes), task, "Adapting to unseen task"):
        episode = sample_episode(unseen_task, n_way, k_shot, q_per_class, make_rng(seed, "unseen", i), include)
        support = embed(params, episode.support_images)
        query = embed(params, episode.query_images)

        if steps is None:
            head = fit_linear_head(
                support, episode.support_labels,
                lam=adapt.lam, steps=adapt.steps, lr=adapt.lr, tol=adapt.tol, n_way=n_way,
            )
        else:
            zero = LinearHead.zeros(n_way, params.embedding_dim)
            head = inner_adapt(zero, params, None, episode.support_labels, steps, inner_lr, features=support).head

        accuracies.append(float(np.mean(head.logits(query).argmax(axis=1) == episode.query_labels)))

    if not accuracies:
        raise ValidationError("No episodes evaluated")

    accuracy, ci95 = confidence_interval(accuracies)
    log_info(f"{unseen_task.task_id} {n_way}-way {k_shot}-shot: {accuracy:.3f} +/- {ci95:.3f}", "metalearn::adapt_to_unseen")
    return AdaptationResult(params, head, accuracy, ci95, k_shot, steps, accuracies)
