from typing import Iterable, Optional, Sequence
from dataclasses import dataclass, field
import numpy as np
from ..config import TaskSpec
from ..errors import CoverageError, ValidationError
from ..imaging.morphology import DEFAULT_CHAIN, Chain, parse_chain, preprocess_batch
from ..log import log_debug, log_info
from ..signalgen.corpus import Corpus
from ..signalgen.dataset import read_dataset, write_dataset
from ..signalgen.health import FaultClass
from ..signalgen.motor import DEFAULT_SAMPLE_RATE_HZ
from ..signalgen.signal import SignalSegment, inject_noise
from ..utils import ProgressTask, make_rng, track

@dataclass(frozen=True, eq=False)
class TaskDataset:
    task_id: str
    samples: dict[FaultClass, tuple[SignalSegment, ...]]
    loads: tuple[float, ...]
    snr_db: Optional[float] = None
    chain: Chain = DEFAULT_CHAIN
    _images: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        samples = {
            fault: tuple(segs)
            for fault, segs in sorted(self.samples.items())
            if len(segs) > 0
        }
        if not samples:
            raise ValidationError(f"Task {self.task_id} has no samples")
        object.__setattr__(self, "samples", samples)

    @property
    def classes(self) -> tuple[FaultClass, ...]:
        return tuple(self.samples)

    @property
    def counts(self) -> dict[FaultClass, int]:
        return {fault: len(segs) for fault, segs in self.samples.items()}

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def n(self) -> int:
        return next(iter(self.samples.values()))[0].side

    def images(self, fault: FaultClass) -> np.ndarray:
        """(count, n, n) preprocessed images of one class, computed once."""
        if (images := self._images.get(fault)) is None:
            values = np.stack([seg.values for seg in self.samples[fault]])
            images = preprocess_batch(values, self.chain).astype(np.float32)
            images.flags.writeable = False
            self._images[fault] = images

        return images

    def all_images(self) -> tuple[np.ndarray, np.ndarray]:
        """Every image with its global class index, classes in order."""
        images = np.concatenate([self.images(fault) for fault in self.classes])
        labels = np.concatenate([
            np.full(len(self.samples[fault]), int(fault), dtype=np.int64)
            for fault in self.classes
        ])
        return images, labels

    def __repr__(self):
        noise = "clean" if self.snr_db is None else f"{self.snr_db:g} dB"
        return f"<TaskDataset {self.task_id}: {self.total} samples, {len(self.classes)} classes, {noise}>"

def balanced_counts(total: int, n_classes: int) -> list[int]:
    base, extra = divmod(total, n_classes)
    return [base + (1 if i < extra else 0) for i in range(n_classes)]

def apportion(count: int, weights: Sequence[float]) -> list[int]:
    """Largest-remainder split of `count` in proportion to `weights`."""
    weights = np.asarray(weights, dtype=np.float64)
    quotas = count * weights / weights.sum()
    shares = np.floor(quotas).astype(int)
    order = np.argsort(-(quotas - shares), kind="stable")
    shares[order[:count - shares.sum()]] += 1
    return shares.tolist()

def load_weights(spec: TaskSpec) -> list[float]:
    return [
        spec.emphasis_weight if load == spec.emphasis_load else 1.0
        for load in spec.loads
    ]

def build_tasks(
    corpus: Corpus,
    specs: Iterable[TaskSpec],
    chain: Optional[Iterable] = None,
    seed: int = 0,
    noise_kind: str = "drive",
    task: Optional[ProgressTask] = None,
) -> list[TaskDataset]:
    specs = list(specs)
    chain = parse_chain(chain)
    ids = [spec.task_id for spec in specs]

    drawn = [spec for spec in specs if spec.source is None]
    corpus.check_coverage(
        sorted({fault for spec in drawn for fault in spec.fault_classes}),
        sorted({load for spec in drawn for load in spec.loads}),
    )

    # next unused window of every (class, load) stream
    offsets: dict[tuple[FaultClass, float], int] = {}
    built: dict[str, TaskDataset] = {}

    for spec in track(drawn, task, "Drawing tasks"):
        classes = spec.fault_classes
        samples = {}
        for fault, count in zip(classes, balanced_counts(spec.samples, len(classes))):
            segs = []
            for load, share in zip(spec.loads, apportion(count, load_weights(spec))):
                start = offsets.get((fault, load), 0)
                segs += corpus.windows(fault, load, start, share)
                offsets[(fault, load)] = start + share
            samples[fault] = segs

        built[spec.task_id] = TaskDataset(spec.task_id, samples, tuple(spec.loads), spec.snr_db, chain)
        log_info(f"Built {built[spec.task_id]!r}", "episodes::build_tasks")

    derived = [spec for spec in specs if spec.source is not None]
    for spec in track(derived, task, "Deriving noisy tasks"):
        if spec.source not in built:
            raise CoverageError(f"{spec.task_id} derives from {spec.source}, which is not a drawn task")

        built[spec.task_id] = derive_noisy_task(
            built[spec.source],
            spec.task_id,
            spec.snr_db,
            seed,
            spec.noise_kind or noise_kind,
            spec.fault_classes,
            corpus.sample_rate_hz,
            corpus.supply_freq_hz,
        )
        log_info(f"Built {built[spec.task_id]!r} from {spec.source}", "episodes::build_tasks")

    return [built[task_id] for task_id in ids]

def derive_noisy_task(
    source: TaskDataset,
    task_id: str,
    snr_db: Optional[float],
    seed: int,
    kind: str = "drive",
    classes: Optional[Iterable[FaultClass]] = None,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    supply_freq_hz: float = 50.0,
) -> TaskDataset:
    """Same windows as `source` (row for row) with noise at `snr_db`."""
    keep = set(source.classes if classes is None else classes)
    samples = {}
    for fault, segs in source.samples.items():
        if fault not in keep:
            continue

        if snr_db is None:
            samples[fault] = segs
            continue

        samples[fault] = [
            inject_noise(
                seg,
                snr_db,
                make_rng(seed, "noise", task_id, int(fault), i),
                kind,
                supply_freq_hz,
                sample_rate_hz,
            )
            for i, seg in enumerate(segs)
        ]
        log_debug(f"{task_id}: {len(segs)} {fault.label} windows at {snr_db:g} dB", "episodes::derive_noisy_task")

    return TaskDataset(task_id, samples, source.loads, snr_db, source.chain)

def merge_tasks(tasks: Sequence[TaskDataset], task_id: Optional[str] = None) -> TaskDataset:
    if not tasks:
        raise ValidationError("Nothing to merge")

    samples: dict[FaultClass, list[SignalSegment]] = {}
    for dataset in tasks:
        for fault, segs in dataset.samples.items():
            samples.setdefault(fault, []).extend(segs)

    snrs = {dataset.snr_db for dataset in tasks}
    loads = tuple(sorted({load for dataset in tasks for load in dataset.loads}))
    return TaskDataset(
        task_id or "+".join(dataset.task_id for dataset in tasks),
        samples,
        loads,
        snrs.pop() if len(snrs) == 1 else None,
        tasks[0].chain,
    )

def restrict_classes(task: TaskDataset, classes: Iterable, task_id: Optional[str] = None) -> TaskDataset:
    keep = {FaultClass.parse(fault) for fault in classes}
    missing = keep - set(task.classes)
    if missing:
        raise CoverageError(
            f"{task.task_id} has no {', '.join(sorted(fault.label for fault in missing))}",
            sorted(missing),
        )

    return TaskDataset(
        task_id or task.task_id,
        {fault: segs for fault, segs in task.samples.items() if fault in keep},
        task.loads,
        task.snr_db,
        task.chain,
    )

def exclude_classes(task: TaskDataset, classes: Iterable, task_id: Optional[str] = None) -> TaskDataset:
    drop = {FaultClass.parse(fault) for fault in classes}
    return restrict_classes(task, [fault for fault in task.classes if fault not in drop], task_id)

def save_task(task: TaskDataset, directory, noise_kind: Optional[str] = None):
    return write_dataset(directory, task.task_id, dict(task.samples), task.snr_db, noise_kind)

def load_task(directory, chain: Optional[Iterable] = None) -> TaskDataset:
    manifest, samples = read_dataset(directory)
    return TaskDataset(
        manifest.task_id,
        samples,
        tuple(entry.load for entry in manifest.operating_points),
        manifest.snr_db,
        parse_chain(chain),
    )
