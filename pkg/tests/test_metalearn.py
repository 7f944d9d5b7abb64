import math
import numpy as np
import pytest
from ReadTheFaultsIn.adapt import LinearHead
from ReadTheFaultsIn.episodes import meta_split, sample_episode
from ReadTheFaultsIn.errors import TrainingDivergedError, ValidationError
from ReadTheFaultsIn.metalearn import (
    adapt_to_unseen,
    build_unseen_split,
    distill_with_head,
    inner_adapt,
    meta_train,
    pretrain_embedding,
    pretrain_with_head,
    self_distill,
)
from ReadTheFaultsIn.metalearn import pretrain as pretrain_module
from ReadTheFaultsIn.metalearn.common import fresh_params, head_tensors
from ReadTheFaultsIn.net import OptimizerState, checkpoint_bytes, clip_and_step
from ReadTheFaultsIn.metalearn.pretrain import supervised_step
from ReadTheFaultsIn.metalearn.trainlog import EpochRecord, TrainLog
from ReadTheFaultsIn.signalgen import FaultClass
from ReadTheFaultsIn.utils import ProgressTask, make_rng

def _with(cfg, section, **update):
    return cfg.model_copy(update={section: getattr(cfg, section).model_copy(update=update)})

@pytest.fixture
def split(pattern_task):
    tasks = [pattern_task(per_class=8, seed=i, task_id=name) for i, name in enumerate("ABC")]
    return meta_split(tasks, ["A", "B"], ["C"])

def test_zero_epochs_keep_initialization(small_cfg, split):
    result = pretrain_with_head(split.train(), _with(small_cfg, "pretrain", epochs=0))
    assert result.params.equals(fresh_params(small_cfg, 8))
    assert len(result.log) == 0
    assert result.classes == tuple(FaultClass)

def test_pretraining_beats_chance(small_cfg, pattern_task):
    task = pattern_task([FaultClass.HEALTHY, FaultClass.BRB1], per_class=10)
    cfg = _with(small_cfg, "pretrain", epochs=50)
    result = pretrain_with_head([task], cfg)
    assert len(result.log) == 50
    assert result.log.final.loss < math.log(2)

def test_pretraining_is_deterministic(small_cfg, split):
    a = pretrain_with_head(split.train(), small_cfg)
    b = pretrain_with_head(split.train(), small_cfg)
    assert checkpoint_bytes(a.params) == checkpoint_bytes(b.params)
    assert a.log.losses == b.log.losses

def test_distillation_without_kl_reproduces_pretraining(small_cfg, split):
    teacher = pretrain_with_head(split.train(), small_cfg)
    cfg = _with(small_cfg, "meta", beta=0.0, distill_epochs=small_cfg.pretrain.epochs)
    student = distill_with_head(teacher.params, split.train(), cfg, teacher.head)
    assert student.log.losses == teacher.log.losses
    assert student.params.equals(teacher.params)

def test_embedding_wrappers_match(small_cfg, split):
    cfg = _with(small_cfg, "meta", beta=0.0, distill_epochs=small_cfg.pretrain.epochs)
    params = pretrain_embedding(split.train(), cfg)
    assert params.equals(pretrain_with_head(split.train(), cfg).params)
    assert self_distill(params, split.train(), cfg).equals(params)

def test_pure_kl_from_teacher_starts_at_zero(small_cfg, split):
    teacher = pretrain_with_head(split.train(), small_cfg)
    cfg = _with(small_cfg, "meta", alpha=0.0, beta=1.0)
    student = distill_with_head(teacher.params, split.train(), cfg, teacher.head, init_from_teacher=True)
    assert student.log.records[0].loss == pytest.approx(0.0, abs=1e-9)

def test_distillation_fits_its_own_teacher_head(small_cfg, split):
    teacher = pretrain_with_head(split.train(), small_cfg)
    student = distill_with_head(teacher.params, split.train(), small_cfg)
    assert len(student.log) == small_cfg.meta.distill_epochs
    assert student.head.n_way == 9

def test_divergence_saves_last_good(small_cfg, split, tmp_path, monkeypatch):
    def exploding(params, head, images, labels, *args):
        _, grads, hits = supervised_step(params, head, images, labels)
        return float("nan"), grads, hits

    monkeypatch.setattr(pretrain_module, "supervised_step", exploding)
    cfg = _with(small_cfg, "pretrain", checkpoint_dir=str(tmp_path))
    with pytest.raises(TrainingDivergedError) as info:
        pretrain_with_head(split.train(), cfg)

    assert info.value.epoch == 0
    assert (tmp_path / "pretrain_last_good.ckpt").exists()

def test_cancelled_training_stops_cleanly(small_cfg, split):
    task = ProgressTask("pretrain", disable=True)
    task.cancel()
    result = pretrain_with_head(split.train(), small_cfg, task=task)
    assert result.log.cancelled and len(result.log) == 0

def test_inner_adapt_edge_cases(small_params):
    features = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.1], [0.1, 1.0]])
    labels = np.array([0, 1, 0, 1])
    head = LinearHead.zeros(2, 2)

    for steps, lr in ((0, 0.5), (5, 0.0)):
        adapted = inner_adapt(head, small_params, None, labels, steps, lr, features=features)
        assert np.array_equal(adapted.head.W, head.W) and np.array_equal(adapted.head.b, head.b)
        assert adapted.params is small_params

    losses = inner_adapt(head, small_params, None, labels, 5, 0.5, features=features).losses
    assert len(losses) == 6
    assert all(b < a for a, b in zip(losses, losses[1:]))

    with pytest.raises(ValidationError):
        inner_adapt(head, small_params, None, [], 1, 0.5, features=np.empty((0, 2)))

def test_full_maml_adapts_backbone(small_params, pattern_task):
    episode = sample_episode(pattern_task(per_class=4), 3, 2, 1, np.random.default_rng(0))
    head = LinearHead(np.random.default_rng(1).normal(size=(3, 16)), np.zeros(3))
    adapted = inner_adapt(head, small_params, episode.support_images, episode.support_labels, 2, 0.01, full_maml=True)
    assert not adapted.params.equals(small_params)
    assert adapted.losses[-1] < adapted.losses[0]

def test_no_episodes_no_updates(small_cfg, split):
    params = fresh_params(small_cfg, 8)
    result = meta_train(split, _with(small_cfg, "meta", episodes_per_epoch=0), params)
    assert result.params.equals(params)
    assert len(result.log) == 0

def test_first_order_step_equals_query_batch_step(small_cfg, split):
    cfg = _with(small_cfg, "meta", epochs=1, episodes_per_epoch=1, meta_batch_tasks=1, inner_steps=0)
    params = fresh_params(cfg, 8)
    result = meta_train(split, cfg, params)

    meta = cfg.meta
    rng = make_rng(cfg.meta_seed, "meta", 0)
    train = split.train()
    episode = sample_episode(train[rng.integers(len(train))], meta.n_way, meta.k_shot, meta.q_per_class, rng)
    head = LinearHead.zeros(meta.n_way, params.embedding_dim)
    _, grads, _ = supervised_step(params, head, episode.query_images, episode.query_labels)
    opt = OptimizerState("sgd", lr=cfg.optim.lr_start, clip_norm=cfg.optim.clip_norm)
    expected = clip_and_step(opt, head_tensors(params, head), grads)

    for name, tensor in head_tensors(result.params, result.head).items():
        assert np.allclose(tensor, expected[name], atol=1e-6)

def test_meta_training_is_deterministic(small_cfg, split):
    a = meta_train(split, small_cfg)
    b = meta_train(split, small_cfg)
    assert a.params.equals(b.params)
    assert a.log.to_frame().equals(b.log.to_frame())
    assert len(a.log) == small_cfg.meta.epochs

def test_unseen_split_holds_class_out(split):
    reduced, unseen = build_unseen_split(split, ["brb3"])
    assert all(FaultClass.BRB3 not in task.classes for task in reduced.train())
    assert FaultClass.BRB3 in unseen.classes
    assert unseen.task_id == "T9" and reduced.datasets["T9"] is unseen
    with pytest.raises(ValidationError):
        build_unseen_split(split, [])

def test_zero_step_adaptation_is_chance(small_params, split):
    _, unseen = build_unseen_split(split, ["brb3"])
    result = adapt_to_unseen(small_params, unseen, 2, steps=0, n_way=3, episodes=5, q_per_class=3, include=["brb3"])
    assert result.accuracy == pytest.approx(1 / 3, abs=1e-12)
    assert result.ci95 == pytest.approx(0.0, abs=1e-12)

def test_fitted_head_recognizes_unseen_class(small_params, split):
    _, unseen = build_unseen_split(split, ["brb3"])
    result = adapt_to_unseen(small_params, unseen, 3, n_way=3, episodes=20, q_per_class=5, include=["brb3"])
    assert result.accuracy > 1 / 3 + 3 * result.ci95
    assert len(result.episode_accuracies) == 20

def test_tail_slope_of_known_losses():
    log = TrainLog("metatrain")
    for epoch in range(20):
        log.append(EpochRecord(epoch, 10.0 - 0.5 * epoch, 0.5, 0.01))
    assert log.tail_slope() == pytest.approx(-0.5)
    assert TrainLog("empty").tail_slope() == 0.0

@pytest.mark.slow
def test_meta_loss_trends_down(small_cfg, split):
    cfg = _with(small_cfg, "meta", epochs=40, episodes_per_epoch=4)
    result = meta_train(split, cfg)
    assert len(result.log) == 40
    assert result.log.tail_slope(0.5) <= 0.0
    assert np.mean(result.log.losses[-4:]) < np.mean(result.log.losses[:4])

@pytest.mark.slow
def test_unseen_accuracy_grows_with_shots(small_params, pattern_task):
    tasks = [pattern_task(per_class=30, seed=i, task_id=name) for i, name in enumerate("ABC")]
    _, unseen = build_unseen_split(meta_split(tasks, ["A", "B"], ["C"]), ["brb3"])
    results = [
        adapt_to_unseen(small_params, unseen, k_shot, n_way=3, episodes=40, q_per_class=5, include=["brb3"])
        for k_shot in (1, 5, 10)
    ]
    for fewer, more in zip(results, results[1:]):
        assert more.accuracy >= fewer.accuracy - max(fewer.ci95, more.ci95)
