from typing import Optional
from dataclasses import dataclass, field
from pathlib import Path
import json
import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table
from ..signalgen.health import ALL_CLASSES

@dataclass(frozen=True)
class EvalProtocol:
    n_way: int
    k_shot: int
    episodes: int
    q_per_class: int = 15

@dataclass
class EvalReport:
    task_id: str
    head: str
    protocol: EvalProtocol
    accuracy: float
    ci95: float
    # rows: true episode-local label, columns: predicted
    confusion: np.ndarray
    # the same over global health states
    class_confusion: np.ndarray
    episode_accuracies: list[float] = field(default_factory=list, repr=False)
    per_snr: list[dict] = field(default_factory=list)
    curve: list[dict] = field(default_factory=list)
    # episodes as drawn, in the layout `read_replay` accepts
    replay: list[dict] = field(default_factory=list, repr=False)

    @property
    def queries(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "task": self.task_id,
            "head": self.head,
            "protocol": {
                "n_way": self.protocol.n_way,
                "k_shot": self.protocol.k_shot,
                "episodes": self.protocol.episodes,
                "q_per_class": self.protocol.q_per_class,
            },
            "accuracy": self.accuracy,
            "ci95": self.ci95,
            "confusion": self.confusion.tolist(),
            "class_confusion": {
                "labels": [fault.label for fault in ALL_CLASSES],
                "counts": self.class_confusion.tolist(),
            },
            "per_snr": self.per_snr,
            "curve": self.curve,
        }

    def write(self, directory, stem: str) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)

        json_path = directory / f"{stem}.json"
        json_path.write_text(json.dumps(self.to_dict(), indent=2))

        labels = [fault.label for fault in ALL_CLASSES]
        confusion_path = directory / f"{stem}_confusion.csv"
        pd.DataFrame(self.class_confusion, index=labels, columns=labels).to_csv(confusion_path)

        paths = [json_path, confusion_path]
        if self.per_snr:
            paths.append(directory / f"{stem}_snr.csv")
            pd.DataFrame(self.per_snr).to_csv(paths[-1], index=False)
        if self.curve:
            paths.append(directory / f"{stem}_curve.csv")
            pd.DataFrame(self.curve).to_csv(paths[-1], index=False)
        if self.replay:
            paths.append(directory / f"{stem}_episodes.json")
            paths[-1].write_text(json.dumps(self.replay))
        return paths

def summary_table(reports: list[EvalReport], title: str = "Evaluation") -> Table:
    table = Table(title=title, show_header=True, header_style="bold magenta")
    table.add_column("Task", style="cyan", no_wrap=True)
    table.add_column("Head")
    table.add_column("Protocol", justify="center")
    table.add_column("Episodes", justify="right")
    table.add_column("Accuracy", justify="right", style="bright_green")
    table.add_column("95% CI", justify="right")

    for report in reports:
        protocol = report.protocol
        table.add_row(
            report.task_id,
            report.head,
            f"{protocol.n_way}-way {protocol.k_shot}-shot",
            str(protocol.episodes),
            f"{report.accuracy:.4f}",
            f"± {report.ci95:.4f}",
        )
    return table

def rows_table(rows: list[dict], title: str) -> Table:
    table = Table(title=title, show_header=True, header_style="bold magenta")
    columns = list(rows[0]) if rows else []
    for column in columns:
        table.add_column(str(column), justify="right")
    for row in rows:
        table.add_row(*(
            f"{value:.4f}" if isinstance(value, float) else str(value)
            for value in row.values()
        ))
    return table

def print_reports(reports: list[EvalReport], console: Optional[Console] = None, title: str = "Evaluation"):
    console = console or Console()
    console.print(summary_table(reports, title))
    for report in reports:
        if report.per_snr:
            console.print(rows_table(report.per_snr, f"{report.task_id}: accuracy by noise level"))
        if report.curve:
            console.print(rows_table(report.curve, f"{report.task_id}: accuracy by adaptation steps"))
