from typing import Iterable, Optional, Protocol, Sequence, Union
from pathlib import Path
import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix
from ..adapt.linear import LinearHead, fit_linear_head
from ..adapt.metric import MetricConfig, predict_metric
from ..config import AdaptSettings
from ..episodes.episode import Episode, check_protocol, sample_episode
from ..episodes.task import TaskDataset, merge_tasks
from ..errors import CoverageError, ValidationError
from ..log import log_info
from ..metalearn.maml import inner_adapt
from ..net.embedding import EmbeddingParams, embed
from ..signalgen.health import ALL_CLASSES
from ..utils import ProgressTask, confidence_interval, make_rng, track
from .report import EvalProtocol, EvalReport

class EpisodeClassifier(Protocol):
    name: str

    def classify(self, episode: Episode) -> np.ndarray:
        """Episode-local predicted label of every query."""

class EmbeddingClassifier:
    """Frozen backbone plus a per-episode head (linear or metric)."""

    def __init__(
        self,
        params: EmbeddingParams,
        head: str = "linear",
        adapt: Optional[AdaptSettings] = None,
        steps: Optional[int] = None,
        inner_lr: float = 0.01,
    ):
        if head not in ("linear", "metric"):
            raise ValidationError(f"Unknown head {head!r}")
        self.params = params
        self.head = head
        self.adapt = adapt or AdaptSettings()
        # None: fit the regularized head to convergence
        self.steps = steps
        self.inner_lr = inner_lr

    @property
    def name(self) -> str:
        return self.head if self.steps is None else f"{self.head}@{self.steps}"

    def fit_head(self, support: np.ndarray, labels: np.ndarray, n_way: int) -> LinearHead:
        if self.steps is None:
            return fit_linear_head(
                support, labels,
                lam=self.adapt.lam, steps=self.adapt.steps, lr=self.adapt.lr, tol=self.adapt.tol, n_way=n_way,
            )

        zero = LinearHead.zeros(n_way, support.shape[1])
        return inner_adapt(zero, self.params, None, labels, self.steps, self.inner_lr, features=support).head

    def classify(self, episode: Episode) -> np.ndarray:
        support = embed(self.params, episode.support_images)
        query = embed(self.params, episode.query_images)
        if self.head == "metric":
            _, labels = predict_metric(
                query, support, episode.support_labels,
                mc=MetricConfig(temperature=self.adapt.temperature), n_way=episode.n_way,
            )
            return labels

        head = self.fit_head(support, episode.support_labels, episode.n_way)
        return head.logits(query).argmax(axis=1)

def episode_rng(seed: int, i: int) -> np.random.Generator:
    # keyed by episode number only, so tasks with the same layout draw the same indices
    return make_rng(seed, "eval", i)

def _as_task(task_or_combo: Union[TaskDataset, Sequence[TaskDataset]]) -> TaskDataset:
    if isinstance(task_or_combo, TaskDataset):
        return task_or_combo
    return merge_tasks(list(task_or_combo))

def _confusions(episode: Episode, truth: np.ndarray, predicted: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    local = confusion_matrix(truth, predicted, labels=np.arange(episode.n_way))
    by_class = confusion_matrix(
        episode.global_labels(truth),
        episode.global_labels(predicted),
        labels=np.arange(len(ALL_CLASSES)),
    )
    return local, by_class

def _replay_protocol(replay: Sequence[Episode]) -> tuple[int, int, int]:
    if not replay:
        raise ValidationError("Replay holds no episodes")
    protocols = {(episode.n_way, episode.k_shot, episode.q_per_class) for episode in replay}
    if len(protocols) != 1:
        raise ValidationError(f"Replay mixes protocols {sorted(protocols)}")
    return protocols.pop()

def evaluate(
    model: EpisodeClassifier,
    task_or_combo: Union[TaskDataset, Sequence[TaskDataset]],
    n_way: int = 6,
    k_shot: int = 5,
    episodes: int = 600,
    seed: int = 0,
    q_per_class: int = 15,
    include: Iterable = (),
    task: Optional[ProgressTask] = None,
    replay: Optional[Sequence[Episode]] = None,
) -> EvalReport:
    """Mean query accuracy over `episodes` sampled episodes, or over the
    episodes of `replay` when given (its protocol then wins)."""
    if replay is not None:
        n_way, k_shot, q_per_class = _replay_protocol(replay)
        episodes = len(replay)
    if episodes < 1:
        raise ValidationError(f"episodes must be >= 1, got {episodes}")

    dataset = _as_task(task_or_combo)
    check_protocol(dataset, n_way, k_shot, q_per_class)
    include = tuple(include)

    confusion = np.zeros((n_way, n_way), dtype=np.int64)
    class_confusion = np.zeros((len(ALL_CLASSES), len(ALL_CLASSES)), dtype=np.int64)
    accuracies = []
    drawn = []
    for i in track(range(episodes), task, f"Evaluating {dataset.task_id}"):
        if replay is None:
            episode = sample_episode(dataset, n_way, k_shot, q_per_class, episode_rng(seed, i), include)
        else:
            episode = replay[i]
        predicted = np.asarray(model.classify(episode))
        truth = episode.query_labels

        local, by_class = _confusions(episode, truth, predicted)
        confusion += local
        class_confusion += by_class
        accuracies.append(float(np.mean(predicted == truth)))
        drawn.append(episode.to_dict())

    if len(accuracies) < episodes:
        raise ValidationError(f"Evaluation stopped after {len(accuracies)} of {episodes} episodes")

    _, ci95 = confidence_interval(accuracies)
    report = EvalReport(
        dataset.task_id,
        getattr(model, "name", type(model).__name__),
        EvalProtocol(n_way, k_shot, episodes, q_per_class),
        float(np.trace(confusion) / confusion.sum()),
        ci95,
        confusion,
        class_confusion,
        accuracies,
        replay=drawn,
    )
    log_info(
        f"{dataset.task_id} {n_way}-way {k_shot}-shot ({report.head}): {report.accuracy:.4f} +/- {ci95:.4f}",
        "evalcli::evaluate",
    )
    return report

def snr_label(snr_db: Optional[float]) -> str:
    return "clean" if snr_db is None else f"{snr_db:g} dB"

def noise_sweep(
    model: EpisodeClassifier,
    tasks: Sequence[TaskDataset],
    n_way: int = 6,
    k_shot: int = 10,
    episodes: int = 600,
    seed: int = 0,
    q_per_class: int = 15,
    required_snrs: Optional[Iterable[Optional[float]]] = (None, 2.0, 4.0, 6.0),
    task: Optional[ProgressTask] = None,
) -> EvalReport:
    """One row per task, all on the same episode schedule.

    The returned report is the first row's, with every row in `per_snr`.
    """
    if not tasks:
        raise CoverageError("No tasks to sweep")

    if required_snrs is not None:
        present = {dataset.snr_db for dataset in tasks}
        missing = [snr for snr in required_snrs if snr not in present]
        if missing:
            raise CoverageError(
                f"Noise sweep is missing tasks at {', '.join(snr_label(snr) for snr in missing)}",
                missing,
            )

    reports = [
        evaluate(model, dataset, n_way, k_shot, episodes, seed, q_per_class, task=task)
        for dataset in tasks
    ]
    first = reports[0]
    first.per_snr = [
        {
            "task": report.task_id,
            "snr": snr_label(dataset.snr_db),
            "accuracy": report.accuracy,
            "ci95": report.ci95,
        }
        for dataset, report in zip(tasks, reports)
    ]
    return first

def adaptation_curve(
    params: EmbeddingParams,
    task: TaskDataset,
    max_steps: int,
    n_way: int = 6,
    k_shot: int = 5,
    episodes: int = 100,
    seed: int = 0,
    inner_lr: float = 0.01,
    q_per_class: int = 15,
    progress: Optional[ProgressTask] = None,
) -> EvalReport:
    """Query accuracy after 0..max_steps inner SGD steps from a zero head, fixed episodes."""
    if max_steps < 0:
        raise ValidationError(f"max_steps must be >= 0, got {max_steps}")
    check_protocol(task, n_way, k_shot, q_per_class)

    accuracies = np.zeros((episodes, max_steps + 1))
    confusion = np.zeros((n_way, n_way), dtype=np.int64)
    class_confusion = np.zeros((len(ALL_CLASSES), len(ALL_CLASSES)), dtype=np.int64)
    drawn = []
    for i in track(range(episodes), progress, f"Adaptation curve on {task.task_id}"):
        episode = sample_episode(task, n_way, k_shot, q_per_class, episode_rng(seed, i))
        support = embed(params, episode.support_images)
        query = embed(params, episode.query_images)

        head = LinearHead.zeros(n_way, params.embedding_dim)
        for step in range(max_steps + 1):
            if step > 0:
                head = inner_adapt(head, params, None, episode.support_labels, 1, inner_lr, features=support).head
            predicted = head.logits(query).argmax(axis=1)
            accuracies[i, step] = np.mean(predicted == episode.query_labels)

        local, by_class = _confusions(episode, episode.query_labels, predicted)
        confusion += local
        class_confusion += by_class
        drawn.append(episode.to_dict())

    curve = []
    for step in range(max_steps + 1):
        mean, ci95 = confidence_interval(accuracies[:, step])
        curve.append({"steps": step, "accuracy": mean, "ci95": ci95})

    final = accuracies[:, -1]
    return EvalReport(
        task.task_id,
        "linear-sgd",
        EvalProtocol(n_way, k_shot, episodes, q_per_class),
        float(np.trace(confusion) / confusion.sum()),
        curve[-1]["ci95"],
        confusion,
        class_confusion,
        final.tolist(),
        curve=curve,
        replay=drawn,
    )

def dump_embeddings(
    params: EmbeddingParams,
    task: TaskDataset,
    count: int,
    path=None,
    seed: int = 0,
) -> pd.DataFrame:
    """`count` embeddings drawn without replacement, one row each: e0..e{d-1}, label."""
    images, labels = task.all_images()
    if count > len(images):
        raise ValidationError(f"{task.task_id} has {len(images)} samples, {count} requested")

    picks = np.sort(make_rng(seed, "dump").choice(len(images), count, replace=False))
    embeddings = embed(params, images[picks]) if count else np.empty((0, params.embedding_dim))

    frame = pd.DataFrame(embeddings, columns=[f"e{i}" for i in range(params.embedding_dim)])
    frame["label"] = [ALL_CLASSES[label].label for label in labels[picks]]
    if path is not None:
        frame.to_csv(Path(path), index=False)
    return frame
