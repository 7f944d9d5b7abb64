"""On-disk task datasets: a JSON manifest plus one CSV per health state.

Each CSV row is one segment, n*n comma-separated floats with no header.
The same layout is accepted for externally recorded data.
"""
from typing import Optional
from pathlib import Path
import traceback
import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator, model_validator
from ..errors import ValidationError
from ..log import log_debug, log_info, log_warn
from .health import FaultClass, HealthState
from .motor import OperatingPoint
from .signal import SignalSegment

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1

# stands in for a row with more fields than a segment holds
OVERLONG = "<overlong>"

class OperatingPointEntry(BaseModel):
    load: float = Field(ge=0, le=1)
    speed_rpm: float = Field(ge=0)

class DatasetManifest(BaseModel):
    version: int = FORMAT_VERSION
    task_id: str
    classes: list[str]
    operating_points: list[OperatingPointEntry]
    snr_db: Optional[float] = None
    noise_kind: Optional[str] = None
    n: int = Field(ge=1)
    sample_counts: dict[str, int]
    files: dict[str, str]
    # per class, the load fraction of each CSV row in order
    row_loads: dict[str, list[float]] = {}

    @field_validator("classes")
    @classmethod
    def check_classes(cls, classes: list[str]):
        for name in classes:
            FaultClass.parse(name)
        if len(set(classes)) != len(classes):
            raise ValueError("duplicate class in manifest")
        return classes

    @model_validator(mode="after")
    def check_counts(self):
        missing = [name for name in self.classes if name not in self.files]
        if missing:
            raise ValueError(f"no file listed for {', '.join(missing)}")
        return self

    @property
    def total(self) -> int:
        return sum(self.sample_counts.values())

    def speed_for(self, load: float) -> float:
        for entry in self.operating_points:
            if entry.load == load:
                return entry.speed_rpm

        raise ValidationError(f"Manifest {self.task_id} has no operating point at load {load}")

def write_dataset(
    directory,
    task_id: str,
    segments: dict[FaultClass, list[SignalSegment]],
    snr_db: Optional[float] = None,
    noise_kind: Optional[str] = None,
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    sides = {seg.side for segs in segments.values() for seg in segs}
    if len(sides) != 1:
        raise ValidationError(f"Task {task_id} mixes segment sides {sorted(sides)}")
    n = sides.pop()

    points = {}
    files = {}
    counts = {}
    row_loads = {}
    for fault, segs in sorted(segments.items()):
        name = fault.label
        files[name] = f"{name}.csv"
        counts[name] = len(segs)
        row_loads[name] = [seg.op.load_fraction for seg in segs]
        for seg in segs:
            points.setdefault(seg.op.load_fraction, seg.op.speed_rpm)

        frame = pd.DataFrame(np.stack([seg.values for seg in segs]) if segs else np.empty((0, n * n)))
        frame.to_csv(directory / files[name], header=False, index=False, float_format="%.9g")

    manifest = DatasetManifest(
        task_id=task_id,
        classes=list(files),
        operating_points=[
            OperatingPointEntry(load=load, speed_rpm=speed)
            for load, speed in sorted(points.items())
        ],
        snr_db=snr_db,
        noise_kind=noise_kind,
        n=n,
        sample_counts=counts,
        files=files,
        row_loads=row_loads,
    )
    path = directory / MANIFEST_NAME
    path.write_text(manifest.model_dump_json(indent=2))

    log_info(f"Wrote {manifest.total} segments of {task_id} to {directory}", "dataset::write_dataset")
    return path

def read_manifest(directory) -> DatasetManifest:
    path = Path(directory) / MANIFEST_NAME
    return DatasetManifest.model_validate_json(path.read_text())

def read_rows(path: Path, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows of `path` as a (rows, width) float array, plus a flag per row
    that had more than `width` fields. Short rows are padded with NaN."""
    if not path.stat().st_size:
        return np.empty((0, width)), np.zeros(0, dtype=bool)

    frame = pd.read_csv(
        path,
        header=None,
        names=range(width),
        index_col=False,
        dtype=str,
        keep_default_na=False,
        engine="python",
        on_bad_lines=lambda _fields: [OVERLONG] + [""] * (width - 1),
    )
    overlong = (frame[0] == OVERLONG).to_numpy()
    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    return values, overlong

def read_dataset(directory) -> tuple[DatasetManifest, dict[FaultClass, list[SignalSegment]]]:
    directory = Path(directory)
    manifest = read_manifest(directory)
    default_load = manifest.operating_points[0].load if manifest.operating_points else 0.0
    width = manifest.n ** 2

    segments = {}
    for name in manifest.classes:
        fault = FaultClass.parse(name)
        path = directory / manifest.files[name]
        rows, overlong = read_rows(path, width)
        loads = manifest.row_loads.get(name, [])

        class_segments = []
        for i, values in enumerate(rows):
            try:
                if overlong[i]:
                    raise ValidationError(f"expected {width} values, found more")
                if np.isnan(values).any():
                    raise ValidationError("missing or non-numeric values")

                load = loads[i] if i < len(loads) else default_load
                op = OperatingPoint(load, manifest.speed_for(load))
                class_segments.append(SignalSegment(
                    values.astype(np.float32),
                    HealthState(fault),
                    op,
                    manifest.snr_db,
                ))
            except Exception as e:
                log_warn(f"Skipping row {i} of {path.name}: {e}", "dataset::read_dataset")
                log_debug(traceback.format_exc(), "dataset::read_dataset")

        if len(class_segments) != manifest.sample_counts.get(name, len(class_segments)):
            log_warn(
                f"{path.name}: manifest lists {manifest.sample_counts[name]} rows, read {len(class_segments)}",
                "dataset::read_dataset",
            )
        segments[fault] = class_segments

    return manifest, segments
