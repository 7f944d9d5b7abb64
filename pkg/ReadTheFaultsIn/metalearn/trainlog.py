from typing import Optional
from dataclasses import asdict, dataclass, field
from pathlib import Path
import json
import math
import numpy as np
import pandas as pd
from ..errors import NumericalError, ValidationError

@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    acc: float
    lr: float
    # largest pre-clip gradient norm of the epoch, and how many steps were clipped
    grad_norm: float = 0.0
    clipped: int = 0

@dataclass
class TrainLog:
    phase: str
    records: list[EpochRecord] = field(default_factory=list)
    cancelled: bool = False

    def append(self, record: EpochRecord):
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ValidationError(f"Epoch {record.epoch} logged after {self.records[-1].epoch}")
        if not all(math.isfinite(value) for value in (record.loss, record.acc, record.lr, record.grad_norm)):
            raise NumericalError(f"Non-finite values logged at epoch {record.epoch}")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    @property
    def losses(self) -> list[float]:
        return [record.loss for record in self.records]

    @property
    def final(self) -> Optional[EpochRecord]:
        return self.records[-1] if self.records else None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [asdict(record) for record in self.records],
            columns=["epoch", "loss", "acc", "lr", "grad_norm", "clipped"],
        )

    def tail_slope(self, fraction: float = 0.1) -> float:
        """Least-squares slope of the loss over the last `fraction` of epochs."""
        count = max(2, int(math.ceil(len(self.records) * fraction)))
        tail = self.records[-count:]
        if len(tail) < 2:
            return 0.0
        return float(np.polyfit([r.epoch for r in tail], [r.loss for r in tail], 1)[0])

    def summary(self) -> dict:
        final = self.final
        return {
            "phase": self.phase,
            "epochs": len(self.records),
            "cancelled": self.cancelled,
            "final_loss": final.loss if final else None,
            "final_acc": final.acc if final else None,
            "clipped_steps": sum(record.clipped for record in self.records),
        }

    def write(self, directory, stem: Optional[str] = None) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = stem or self.phase

        csv_path = directory / f"{stem}_log.csv"
        self.to_frame().to_csv(csv_path, index=False)
        json_path = directory / f"{stem}_summary.json"
        json_path.write_text(json.dumps(self.summary(), indent=2))
        return csv_path, json_path

