from typing import Iterable, Optional, Sequence
from dataclasses import dataclass
from pathlib import Path
import json
import numpy as np
from ..errors import ProtocolError, ValidationError
from ..signalgen.health import FaultClass
from .task import TaskDataset

@dataclass(frozen=True, eq=False)
class Episode:
    """One N-way K-shot draw from a task.

    `support_idx[c]` and `query_idx[c]` index into the sample list of
    global class `class_map[c]`; labels are the local indices 0..n_way-1.
    """

    task_id: str
    class_map: tuple[FaultClass, ...]
    support_idx: np.ndarray
    query_idx: np.ndarray
    support_images: np.ndarray
    query_images: np.ndarray

    @property
    def n_way(self) -> int:
        return len(self.class_map)

    @property
    def k_shot(self) -> int:
        return self.support_idx.shape[1]

    @property
    def q_per_class(self) -> int:
        return self.query_idx.shape[1]

    @property
    def support_labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_way), self.k_shot)

    @property
    def query_labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_way), self.q_per_class)

    def global_labels(self, local: np.ndarray) -> np.ndarray:
        return np.asarray([int(fault) for fault in self.class_map])[np.asarray(local)]

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "classes": [fault.label for fault in self.class_map],
            "support": self.support_idx.tolist(),
            "query": self.query_idx.tolist(),
        }

def episode_from_indices(
    task: TaskDataset,
    class_map: Iterable[FaultClass],
    support_idx,
    query_idx,
) -> Episode:
    class_map = tuple(FaultClass.parse(fault) for fault in class_map)
    support_idx = np.asarray(support_idx, dtype=np.int64)
    query_idx = np.asarray(query_idx, dtype=np.int64)

    if support_idx.ndim != 2 or query_idx.ndim != 2 or len(support_idx) != len(class_map) or len(query_idx) != len(class_map):
        raise ValidationError("Episode index arrays must be (n_way, count)")

    for c, fault in enumerate(class_map):
        if fault not in task.samples:
            raise ProtocolError(f"{task.task_id} has no {fault.label}")
        if np.intersect1d(support_idx[c], query_idx[c]).size:
            raise ValidationError(f"Support and query overlap for {fault.label}")

    return Episode(
        task.task_id,
        class_map,
        support_idx,
        query_idx,
        np.concatenate([task.images(fault)[support_idx[c]] for c, fault in enumerate(class_map)]),
        np.concatenate([task.images(fault)[query_idx[c]] for c, fault in enumerate(class_map)]),
    )

def check_protocol(task: TaskDataset, n_way: int, k_shot: int, q_per_class: int):
    if n_way < 1 or k_shot < 1 or q_per_class < 1:
        raise ProtocolError(f"Invalid protocol {n_way}-way {k_shot}-shot, {q_per_class} queries")
    if n_way > len(task.classes):
        raise ProtocolError(f"{n_way}-way episodes need {n_way} classes, {task.task_id} has {len(task.classes)}")

    need = k_shot + q_per_class
    short = [fault.label for fault, count in task.counts.items() if count < need]
    if len(task.classes) - len(short) < n_way:
        raise ProtocolError(
            f"{task.task_id}: {', '.join(short)} have fewer than {need} samples "
            f"({k_shot} shots + {q_per_class} queries)"
        )

def sample_episode(
    task: TaskDataset,
    n_way: int = 6,
    k_shot: int = 5,
    q_per_class: int = 15,
    rng: Optional[np.random.Generator] = None,
    include: Sequence[FaultClass] = (),
) -> Episode:
    """Draw classes, then disjoint support and query samples per class.

    Classes in `include` are always drawn; the rest are uniform without
    replacement. Local labels follow draw order.
    """
    rng = np.random.default_rng() if rng is None else rng
    check_protocol(task, n_way, k_shot, q_per_class)

    include = tuple(dict.fromkeys(FaultClass.parse(fault) for fault in include))
    classes = [
        fault
        for fault in task.classes
        if task.counts[fault] >= k_shot + q_per_class and fault not in include
    ]
    if len(include) > n_way or any(task.counts.get(fault, 0) < k_shot + q_per_class for fault in include):
        raise ProtocolError(f"Cannot force {[fault.label for fault in include]} into a {n_way}-way episode of {task.task_id}")

    drawn = tuple(classes[i] for i in rng.choice(len(classes), n_way - len(include), replace=False))
    chosen = tuple(include[i] for i in rng.permutation(len(include))) + drawn if include else drawn

    support, query = [], []
    for fault in chosen:
        picks = rng.choice(task.counts[fault], k_shot + q_per_class, replace=False)
        support.append(picks[:k_shot])
        query.append(picks[k_shot:])

    return episode_from_indices(task, chosen, support, query)

def write_replay(episodes: Iterable[Episode], path) -> Path:
    path = Path(path)
    path.write_text(json.dumps([episode.to_dict() for episode in episodes]))
    return path

def read_replay(path, tasks: dict[str, TaskDataset]) -> list[Episode]:
    episodes = []
    for entry in json.loads(Path(path).read_text()):
        if (task := tasks.get(entry["task_id"])) is None:
            raise ValidationError(f"Replay refers to unknown task {entry['task_id']}")

        episodes.append(episode_from_indices(task, entry["classes"], entry["support"], entry["query"]))

    return episodes
