from typing import Iterable, Optional
from dataclasses import dataclass, field
from ..config import SplitSettings
from ..errors import ValidationError
from ..log import log_info
from .task import TaskDataset

@dataclass(frozen=True)
class MetaSplit:
    train_tasks: tuple[str, ...]
    test_tasks: tuple[str, ...]
    datasets: dict[str, TaskDataset] = field(default_factory=dict, compare=False, repr=False)

    def train(self) -> list[TaskDataset]:
        return [self.datasets[task_id] for task_id in self.train_tasks]

    def test(self) -> list[TaskDataset]:
        return [self.datasets[task_id] for task_id in self.test_tasks]

def meta_split(
    tasks: Iterable[TaskDataset],
    train: Optional[Iterable[str]] = None,
    test: Optional[Iterable[str]] = None,
) -> MetaSplit:
    datasets = {dataset.task_id: dataset for dataset in tasks}
    if len(datasets) < 2:
        raise ValidationError(f"A meta split needs at least 2 tasks, got {len(datasets)}")

    defaults = SplitSettings()
    if train is None and test is None:
        train = [task_id for task_id in defaults.train if task_id in datasets]
        test = [task_id for task_id in defaults.test if task_id in datasets]
        if not train or not test:
            # unfamiliar task ids: hold out the last one
            ids = list(datasets)
            train, test = ids[:-1], ids[-1:]
    elif train is None:
        test = list(test)
        train = [task_id for task_id in datasets if task_id not in test]
    elif test is None:
        train = list(train)
        test = [task_id for task_id in datasets if task_id not in train]

    train, test = tuple(train), tuple(test)
    if overlap := set(train) & set(test):
        raise ValidationError(f"Tasks {', '.join(sorted(overlap))} are in both train and test")
    if not train or not test:
        raise ValidationError("Both sides of a meta split must be nonempty")
    if unknown := [task_id for task_id in train + test if task_id not in datasets]:
        raise ValidationError(f"Unknown tasks {', '.join(unknown)}")

    log_info(f"Meta split: train {list(train)}, test {list(test)}", "episodes::meta_split")
    return MetaSplit(train, test, datasets)
