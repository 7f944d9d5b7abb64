"""The pipeline's single JSON configuration document."""
from typing import Literal, Optional
from pathlib import Path
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from .signalgen.motor import LOAD_LEVELS, LOAD_SPEED_TABLE, BearingGeometry, MotorConfig
from .signalgen.health import FaultClass

class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")

class SignalSettings(Section):
    n: int = Field(64, ge=2)
    # None: non-overlapping windows
    stride: Optional[int] = Field(None, ge=1)
    block_duration_s: float = Field(10.0, gt=0)
    severity: float = Field(1.0, ge=0, le=1)
    noise_kind: Literal["gaussian", "drive"] = "drive"
    load_speed_table: dict[float, float] = Field(default_factory=lambda: dict(LOAD_SPEED_TABLE))
    # dataset directories of recorded current; None generates synthetic current
    data_dir: Optional[str] = None

class ImagingSettings(Section):
    chain: list[str] = Field(default_factory=lambda: ["open3"])

class TaskSpec(Section):
    task_id: str
    samples: int = Field(3000, ge=1)
    loads: list[float] = Field(default_factory=lambda: list(LOAD_LEVELS))
    # oversample this load `emphasis_weight`:1 against the others
    emphasis_load: Optional[float] = None
    emphasis_weight: float = Field(3.0, ge=1)
    classes: Optional[list[str]] = None
    snr_db: Optional[float] = None
    noise_kind: Optional[Literal["gaussian", "drive"]] = None
    # derive from another task's clean segments instead of drawing new ones
    source: Optional[str] = None

    @field_validator("classes")
    @classmethod
    def check_classes(cls, classes):
        if classes is not None:
            for name in classes:
                FaultClass.parse(name)
        return classes

    @model_validator(mode="after")
    def check_emphasis(self):
        if self.emphasis_load is not None and self.emphasis_load not in self.loads:
            raise ValueError(f"emphasis_load {self.emphasis_load} is not one of the task's loads")
        return self

    @property
    def fault_classes(self) -> tuple[FaultClass, ...]:
        if self.classes is None:
            return tuple(FaultClass)
        return tuple(FaultClass.parse(name) for name in self.classes)

def default_tasks() -> list[TaskSpec]:
    tasks = [
        TaskSpec(task_id=f"T{i}", emphasis_load=LOAD_LEVELS[i % len(LOAD_LEVELS)])
        for i in range(6)
    ]
    tasks += [
        TaskSpec(task_id=f"T{i}", source="T4", snr_db=snr)
        for i, snr in zip(range(6, 9), (2.0, 4.0, 6.0))
    ]
    return tasks

class SplitSettings(Section):
    train: list[str] = Field(default_factory=lambda: ["T0", "T1", "T2", "T3", "T5"])
    test: list[str] = Field(default_factory=lambda: ["T4", "T6", "T7", "T8"])

class NetSettings(Section):
    channels: int = Field(32, ge=1)
    blocks: int = Field(4, ge=1)

class OptimSettings(Section):
    outer: Literal["sgd", "rmsprop"] = "rmsprop"
    inner: Literal["sgd", "rmsprop"] = "sgd"
    rho: float = Field(0.9, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    clip_norm: float = Field(5.62, gt=0)
    lr_start: float = Field(1e-6, gt=0)
    lr_end: float = Field(5e-5, gt=0)
    lr_epochs: int = Field(500, ge=1)

    @model_validator(mode="after")
    def check_ramp(self):
        if self.lr_start > self.lr_end:
            raise ValueError("lr_start must not exceed lr_end")
        return self

class PretrainSettings(Section):
    epochs: int = Field(200, ge=0)
    batch_size: int = Field(32, ge=1)
    batches_per_epoch: int = Field(20, ge=1)
    checkpoint_dir: Optional[str] = None

class MetaConfig(Section):
    inner_steps: int = Field(5, ge=0)
    inner_lr: float = Field(0.01, ge=0)
    meta_batch_tasks: int = Field(4, ge=1)
    epochs: int = Field(500, ge=0)
    episodes_per_epoch: int = Field(4, ge=0)
    n_way: int = Field(6, ge=2)
    k_shot: int = Field(5, ge=1)
    q_per_class: int = Field(15, ge=1)
    full_maml: bool = False
    alpha: float = Field(1.0, ge=0)
    beta: float = Field(0.02, ge=0)
    temperature: float = Field(1.0, gt=0)
    distill_epochs: int = Field(100, ge=0)
    seed: Optional[int] = None

    @model_validator(mode="after")
    def check_weights(self):
        if self.alpha + self.beta <= 0:
            raise ValueError("alpha + beta must be positive")
        return self

class AdaptSettings(Section):
    head: Literal["linear", "metric"] = "linear"
    lam: float = Field(0.01, ge=0)
    steps: int = Field(1000, ge=0)
    # None: 1/L from the feature norms
    lr: Optional[float] = Field(None, gt=0)
    tol: float = Field(1e-6, gt=0)
    temperature: float = Field(10.0, gt=0)

class EvalSettings(Section):
    task: str = "T4"
    combo: list[str] = Field(default_factory=list)
    n_way: int = Field(6, ge=2)
    k_shot: int = Field(5, ge=1)
    shots: list[int] = Field(default_factory=lambda: [1, 5, 10])
    q_per_class: int = Field(15, ge=1)
    episodes: int = Field(600, ge=1)
    sweep_tasks: dict[str, Optional[float]] = Field(
        default_factory=lambda: {"T4": None, "T6": 2.0, "T7": 4.0, "T8": 6.0}
    )
    sweep_k_shot: int = Field(10, ge=1)
    curve_max_steps: int = Field(20, ge=0)
    curve_episodes: int = Field(100, ge=1)
    dump_count: int = Field(500, ge=0)
    unseen_class: str = "brb3"

class PipelineConfig(Section):
    motor: MotorConfig = Field(default_factory=MotorConfig)
    bearing: BearingGeometry = Field(default_factory=BearingGeometry)
    signal: SignalSettings = Field(default_factory=SignalSettings)
    imaging: ImagingSettings = Field(default_factory=ImagingSettings)
    tasks: list[TaskSpec] = Field(default_factory=default_tasks)
    split: SplitSettings = Field(default_factory=SplitSettings)
    net: NetSettings = Field(default_factory=NetSettings)
    optim: OptimSettings = Field(default_factory=OptimSettings)
    pretrain: PretrainSettings = Field(default_factory=PretrainSettings)
    meta: MetaConfig = Field(default_factory=MetaConfig)
    adapt: AdaptSettings = Field(default_factory=AdaptSettings)
    eval: EvalSettings = Field(default_factory=EvalSettings)
    seed: int = 0

    @model_validator(mode="after")
    def check_tasks(self):
        ids = [task.task_id for task in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate task_id")
        for task in self.tasks:
            if task.source is not None and task.source not in ids:
                raise ValueError(f"{task.task_id} derives from unknown task {task.source}")
        if self.signal.n % (2 ** self.net.blocks) != 0:
            raise ValueError(f"signal.n must be divisible by {2 ** self.net.blocks}")
        return self

    @property
    def meta_seed(self) -> int:
        return self.seed if self.meta.seed is None else self.meta.seed

    def task(self, task_id: str) -> TaskSpec:
        for task in self.tasks:
            if task.task_id == task_id:
                return task
        raise KeyError(task_id)

def default_config() -> PipelineConfig:
    return PipelineConfig()

def noise_regime(cfg: Optional[PipelineConfig] = None) -> PipelineConfig:
    """800 epochs, inner step 0.005 and a flat outer step of 0.01."""
    cfg = cfg or default_config()
    return cfg.model_copy(update={
        "meta": cfg.meta.model_copy(update={"epochs": 800, "inner_lr": 0.005}),
        "optim": cfg.optim.model_copy(update={"lr_start": 0.01, "lr_end": 0.01, "lr_epochs": 800}),
    })

def load_config(path) -> PipelineConfig:
    return PipelineConfig.model_validate_json(Path(path).read_text())

def dump_config(cfg: PipelineConfig, path) -> Path:
    path = Path(path)
    path.write_text(cfg.model_dump_json(indent=2))
    return path
