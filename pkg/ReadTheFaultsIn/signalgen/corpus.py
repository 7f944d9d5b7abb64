from typing import Iterable, Optional
from abc import ABC, abstractmethod
from collections import defaultdict
from pathlib import Path
import numpy as np
from ..errors import CoverageError, ValidationError
from ..log import log_debug, log_info
from ..utils import make_rng
from .health import ALL_CLASSES, FaultClass, HealthState
from .motor import DEFAULT_SAMPLE_RATE_HZ, LOAD_LEVELS, BearingGeometry, MotorConfig, OperatingPoint
from .signal import DEFAULT_SIDE, RawSignal, SignalSegment, generate_signal, segment
from .dataset import MANIFEST_NAME, read_dataset

Condition = tuple[FaultClass, float]

class Corpus(ABC):
    """A source of labelled segments indexed by (health state, load).

    Each condition is an ordered stream of windows; `windows(fault, load,
    start, count)` returns a slice of it, so callers dealing disjoint
    slices never see a window twice.
    """

    n: int
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    supply_freq_hz: float = 50.0

    @abstractmethod
    def conditions(self) -> set[Condition]:
        ...

    @abstractmethod
    def available(self, fault: FaultClass, load: float) -> Optional[int]:
        """Number of windows for the condition, or None if unbounded."""

    @abstractmethod
    def windows(self, fault: FaultClass, load: float, start: int, count: int) -> list[SignalSegment]:
        ...

    def check_coverage(self, classes: Iterable[FaultClass], loads: Iterable[float]):
        have = self.conditions()
        missing = [
            (fault, load)
            for fault in classes
            for load in loads
            if (fault, load) not in have
        ]
        if missing:
            absent = sorted({fault for fault, _ in missing})
            if all(all((fault, load) in missing for load in loads) for fault in absent):
                gap = "classes " + ", ".join(fault.label for fault in absent)
            else:
                gap = ", ".join(f"{fault.label}@{load:g}" for fault, load in missing)
            raise CoverageError(f"Corpus is missing {gap}", missing)

class SyntheticCorpus(Corpus):
    """Lazily generated recordings, one block of `block_duration_s` at a time."""

    def __init__(
        self,
        motor: Optional[MotorConfig] = None,
        bearing: Optional[BearingGeometry] = None,
        seed: int = 0,
        n: int = DEFAULT_SIDE,
        stride: Optional[int] = None,
        block_duration_s: float = 10.0,
        severity: float = 1.0,
        classes: Iterable[FaultClass] = ALL_CLASSES,
        loads: Iterable[float] = LOAD_LEVELS,
        load_speed_table: Optional[dict[float, float]] = None,
    ):
        self.motor = motor or MotorConfig()
        self.bearing = bearing or BearingGeometry()
        self.sample_rate_hz = self.motor.sample_rate_hz
        self.supply_freq_hz = self.motor.supply_freq_hz
        self.seed = seed
        self.n = n
        self.stride = n * n if stride is None else stride
        self.severity = severity
        self.classes = tuple(FaultClass.parse(fault) for fault in classes)
        self.loads = tuple(loads)
        self.load_speed_table = load_speed_table

        block_samples = int(round(block_duration_s * self.motor.sample_rate_hz))
        if block_samples < n * n:
            raise ValidationError(f"block_duration_s {block_duration_s} is shorter than one segment")
        self.block_duration_s = block_duration_s
        self.windows_per_block = (block_samples - n * n) // self.stride + 1

    def conditions(self) -> set[Condition]:
        return {(fault, load) for fault in self.classes for load in self.loads}

    def available(self, fault: FaultClass, load: float) -> Optional[int]:
        return None

    def recording(self, fault: FaultClass, load: float, block: int) -> RawSignal:
        if (fault, load) not in self.conditions():
            raise CoverageError(f"Corpus has no {fault.label} at load {load:g}", [(fault, load)])

        op = OperatingPoint.at_load(load, self.load_speed_table)
        seed = int(make_rng(self.seed, "recording", int(fault), load, block).integers(2 ** 63))
        return generate_signal(
            self.motor,
            self.bearing,
            HealthState(fault, self.severity),
            op,
            self.block_duration_s,
            seed,
            self.n,
        )

    def windows(self, fault: FaultClass, load: float, start: int, count: int) -> list[SignalSegment]:
        if count <= 0:
            return []

        first = start // self.windows_per_block
        last = (start + count - 1) // self.windows_per_block
        result = []
        for block in range(first, last + 1):
            segments = segment(self.recording(fault, load, block), self.n, self.stride)
            lo = max(start - block * self.windows_per_block, 0)
            hi = min(start + count - block * self.windows_per_block, len(segments))
            result += [_compact(seg) for seg in segments[lo:hi]]

        log_debug(f"{fault.label}@{load:g}: windows {start}..{start + count}", "SyntheticCorpus::windows")
        return result

class SegmentCorpus(Corpus):
    """A finite corpus over segments already in memory.

    Only segments recorded at `snr_db` are pooled (None keeps the clean ones).
    """

    def __init__(
        self,
        segments: Iterable[SignalSegment],
        seed: Optional[int] = None,
        snr_db: Optional[float] = None,
    ):
        self._pools: dict[Condition, list[SignalSegment]] = defaultdict(list)
        self.snr_db = snr_db
        sides = set()
        skipped = 0
        for seg in segments:
            if seg.snr_db != snr_db:
                skipped += 1
                continue
            self._pools[(seg.label.fault, seg.op.load_fraction)].append(seg)
            sides.add(seg.side)

        if skipped:
            log_info(f"Left out {skipped} segments not at snr {snr_db}", "SegmentCorpus::__init__")
        if len(sides) > 1:
            raise ValidationError(f"Corpus mixes segment sides {sorted(sides)}")
        self.n = sides.pop() if sides else DEFAULT_SIDE

        if seed is not None:
            for key, pool in sorted(self._pools.items()):
                order = make_rng(seed, "pool", int(key[0]), key[1]).permutation(len(pool))
                self._pools[key] = [pool[i] for i in order]

    def conditions(self) -> set[Condition]:
        return {key for key, pool in self._pools.items() if pool}

    def available(self, fault: FaultClass, load: float) -> Optional[int]:
        return len(self._pools.get((fault, load), []))

    def windows(self, fault: FaultClass, load: float, start: int, count: int) -> list[SignalSegment]:
        pool = self._pools.get((fault, load), [])
        if start + count > len(pool):
            raise CoverageError(
                f"Only {len(pool)} windows of {fault.label} at load {load:g}, "
                f"{start + count} needed",
                [(fault, load)],
            )

        return pool[start:start + count]

class DiskCorpus(SegmentCorpus):
    """Every dataset directory (manifest + CSVs) found under `root` whose
    manifest was recorded at `snr_db`."""

    def __init__(
        self,
        root,
        seed: Optional[int] = None,
        snr_db: Optional[float] = None,
        sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
        supply_freq_hz: float = 50.0,
    ):
        root = Path(root)
        manifests = sorted(root.rglob(MANIFEST_NAME))
        if not manifests:
            raise CoverageError(f"No {MANIFEST_NAME} under {root}")

        segments = []
        for path in manifests:
            manifest, by_class = read_dataset(path.parent)
            if manifest.snr_db != snr_db:
                log_info(f"Skipping {manifest.task_id} at snr {manifest.snr_db}", "DiskCorpus::__init__")
                continue

            count = sum(len(segs) for segs in by_class.values())
            log_info(f"Loaded {count} segments of {manifest.task_id}", "DiskCorpus::__init__")
            for segs in by_class.values():
                segments += segs

        super().__init__(segments, seed, snr_db)
        self.root = root
        self.sample_rate_hz = sample_rate_hz
        self.supply_freq_hz = supply_freq_hz

def _compact(seg: SignalSegment) -> SignalSegment:
    return SignalSegment(seg.values.astype(np.float32), seg.label, seg.op, seg.snr_db)
