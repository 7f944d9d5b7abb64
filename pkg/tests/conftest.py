import os
import hypothesis
import numpy as np
import pytest
from ReadTheFaultsIn.config import PipelineConfig
from ReadTheFaultsIn.episodes.task import TaskDataset
from ReadTheFaultsIn.net.embedding import init_params
from ReadTheFaultsIn.signalgen import FaultClass, HealthState, MotorConfig, OperatingPoint, SignalSegment, SyntheticCorpus

np.seterr(all="warn")

hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "ci"))

IDLE = OperatingPoint(0.0, 1492.0)

def pattern_image(fault: FaultClass, side: int, rng: np.random.Generator, noise: float = 0.05) -> np.ndarray:
    """A bright 2x2 patch at a class-specific spot of a noisy dark image."""
    image = rng.normal(0.0, noise, (side, side))
    step = max(side // 3, 2)
    row, col = (int(fault) // 3) * step, (int(fault) % 3) * step
    image[row:row + 2, col:col + 2] += 1.0
    return image

def make_pattern_task(
    classes=tuple(FaultClass),
    per_class: int = 30,
    side: int = 8,
    seed: int = 0,
    task_id: str = "P0",
    snr_db=None,
) -> TaskDataset:
    rng = np.random.default_rng(seed)
    samples = {
        FaultClass.parse(fault): [
            SignalSegment(pattern_image(FaultClass.parse(fault), side, rng).ravel(), HealthState(FaultClass.parse(fault)), IDLE, snr_db)
            for _ in range(per_class)
        ]
        for fault in classes
    }
    return TaskDataset(task_id, samples, (0.0,), snr_db, ())

@pytest.fixture
def pattern_task():
    return make_pattern_task

@pytest.fixture
def motor():
    return MotorConfig()

@pytest.fixture
def tiny_corpus():
    return SyntheticCorpus(seed=0, n=16, block_duration_s=0.5)

@pytest.fixture
def small_params():
    return init_params(8, 4, 2, seed=0)

@pytest.fixture
def small_cfg():
    """8x8 images through a 2-block, 4-channel backbone with a fast flat SGD schedule."""
    return PipelineConfig.model_validate({
        "signal": {"n": 8},
        "imaging": {"chain": []},
        "net": {"channels": 4, "blocks": 2},
        "optim": {"outer": "sgd", "lr_start": 0.05, "lr_end": 0.05, "lr_epochs": 10},
        "pretrain": {"epochs": 3, "batch_size": 8, "batches_per_epoch": 2},
        "meta": {
            "epochs": 2,
            "episodes_per_epoch": 2,
            "meta_batch_tasks": 2,
            "n_way": 3,
            "k_shot": 2,
            "q_per_class": 3,
            "inner_steps": 2,
            "distill_epochs": 3,
        },
        "adapt": {"steps": 100},
        "eval": {"n_way": 3, "k_shot": 2, "shots": [1, 2], "q_per_class": 3, "episodes": 5},
    })
