"""Command-line surface: `python -m ReadTheFaultsIn <command> [options]`.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""
from typing import Optional, Sequence
from pathlib import Path
import argparse
import json
import sys
import traceback
import numpy as np
import pydantic
from rich.console import Console
from .. import __version__
from ..config import PipelineConfig, default_config, dump_config, load_config, noise_regime
from ..episodes.split import meta_split
from ..episodes.episode import read_replay
from ..episodes.task import TaskDataset, build_tasks, load_task, merge_tasks, save_task
from ..errors import FaultsInError, ValidationError
from ..log import configure, log_debug, log_error, log_info
from ..metalearn.common import HEAD_B, HEAD_W
from ..metalearn.pretrain import distill_with_head, pretrain_with_head
from ..metalearn.maml import meta_train
from ..metalearn.unseen import adapt_to_unseen, build_unseen_split
from ..adapt.linear import LinearHead
from ..net.checkpoint import load_checkpoint, save_checkpoint
from ..net.embedding import init_params
from ..net.gradcheck import gradient_check
from ..signalgen.corpus import Corpus, DiskCorpus, SyntheticCorpus
from ..utils import ProgressTask, make_rng
from .evaluate import EmbeddingClassifier, adaptation_curve, dump_embeddings, evaluate, noise_sweep
from .report import print_reports, rows_table

GRADCHECK_TOLERANCE = 1e-3

class UsageError(ValidationError):
    pass

class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)

class Run:
    """Resolved configuration and output layout of one invocation."""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str]):
        cfg = load_config(args.config) if args.config else default_config()
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
        if args.noise_regime:
            cfg = noise_regime(cfg)

        self.out = Path(args.out)
        if cfg.pretrain.checkpoint_dir is None:
            # divergence leaves `<phase>_last_good.ckpt` beside the run outputs
            cfg = cfg.model_copy(update={"pretrain": cfg.pretrain.model_copy(update={"checkpoint_dir": str(self.out)})})

        self.cfg: PipelineConfig = cfg
        self.args = args
        self.argv = list(argv)
        self.console = Console()
        self.outputs: list[str] = []

    @property
    def data_dir(self) -> Path:
        return self.out / "data"

    def checkpoint_path(self, name: str) -> Path:
        return self.out / f"{name}.ckpt"

    def progress(self, title: str) -> ProgressTask:
        return ProgressTask(title, disable=not self.args.verbose)

    def record(self, *paths):
        self.outputs += [str(path) for path in paths]

    def load_tasks(self, ids: Optional[Sequence[str]] = None) -> dict[str, TaskDataset]:
        ids = ids or [spec.task_id for spec in self.cfg.tasks]
        tasks = {}
        for task_id in ids:
            directory = self.data_dir / task_id
            if not directory.is_dir():
                raise ValidationError(f"No dataset for {task_id} under {self.data_dir}; run `gen` first")
            tasks[task_id] = load_task(directory, self.cfg.imaging.chain)
        return tasks

    def split(self):
        tasks = self.load_tasks()
        return meta_split(tasks.values(), self.cfg.split.train, self.cfg.split.test)

    def resolve_checkpoint(self, *defaults: str) -> Path:
        if self.args.checkpoint:
            path = Path(self.args.checkpoint)
        else:
            path = next(
                (self.checkpoint_path(name) for name in defaults if self.checkpoint_path(name).exists()),
                None,
            )
            if path is None:
                raise ValidationError(
                    f"No checkpoint given and none of {', '.join(n + '.ckpt' for n in defaults)} in {self.out}"
                )
        if not path.exists():
            raise ValidationError(f"Checkpoint {path} does not exist")
        return path

    def load_model(self, *defaults: str):
        path = self.resolve_checkpoint(*defaults)
        params, extras, meta = load_checkpoint(path)
        log_info(f"Loaded {path} ({meta.get('phase', 'unknown')})", "cli::load_model")
        return params, extras

    def write_manifest(self):
        self.out.mkdir(parents=True, exist_ok=True)
        config_path = dump_config(self.cfg, self.out / "config.json")
        manifest = {
            "version": __version__,
            "command": self.args.command,
            "argv": self.argv,
            "seed": self.cfg.seed,
            "config": str(config_path),
            "outputs": self.outputs,
        }
        path = self.out / f"run_{self.args.command}.json"
        path.write_text(json.dumps(manifest, indent=2))
        return path

def _corpus(run: Run) -> Corpus:
    cfg = run.cfg
    if data_dir := run.args.data or cfg.signal.data_dir:
        corpus = DiskCorpus(
            data_dir,
            seed=cfg.seed,
            sample_rate_hz=cfg.motor.sample_rate_hz,
            supply_freq_hz=cfg.motor.supply_freq_hz,
        )
        if corpus.n != cfg.signal.n:
            raise ValidationError(f"Recorded segments under {data_dir} are {corpus.n}x{corpus.n}, config expects n={cfg.signal.n}")
        return corpus

    return SyntheticCorpus(
        cfg.motor,
        cfg.bearing,
        seed=cfg.seed,
        n=cfg.signal.n,
        stride=cfg.signal.stride,
        block_duration_s=cfg.signal.block_duration_s,
        severity=cfg.signal.severity,
        load_speed_table=cfg.signal.load_speed_table,
    )

def cmd_gen(run: Run):
    cfg = run.cfg
    corpus = _corpus(run)
    with run.progress("Generating tasks") as task:
        tasks = build_tasks(corpus, cfg.tasks, cfg.imaging.chain, cfg.seed, cfg.signal.noise_kind, task)

    for dataset in tasks:
        kind = cfg.task(dataset.task_id).noise_kind or cfg.signal.noise_kind
        run.record(save_task(dataset, run.data_dir / dataset.task_id, kind if dataset.snr_db is not None else None))

def _save_supervised(run: Run, name: str, result):
    path = save_checkpoint(
        run.checkpoint_path(name),
        result.params,
        extras={HEAD_W: result.head.W, HEAD_B: result.head.b},
        meta={"phase": name, "classes": [fault.label for fault in result.classes], "seed": run.cfg.seed},
    )
    run.record(path, *result.log.write(run.out, name))

def cmd_pretrain(run: Run):
    split = run.split()
    with run.progress("Pretraining") as task:
        result = pretrain_with_head(split.train(), run.cfg, task=task)
    _save_supervised(run, "pretrain", result)

def cmd_distill(run: Run):
    params, extras = run.load_model("pretrain")
    head = LinearHead(extras[HEAD_W], extras[HEAD_B]) if HEAD_W in extras else None
    split = run.split()
    with run.progress("Self-distilling") as task:
        result = distill_with_head(params, split.train(), run.cfg, head, task=task)
    _save_supervised(run, "distill", result)

def cmd_metatrain(run: Run):
    split = run.split()
    params = None
    if run.args.checkpoint or run.checkpoint_path("distill").exists() or run.checkpoint_path("pretrain").exists():
        params, _ = run.load_model("distill", "pretrain")

    with run.progress("Meta-training") as task:
        result = meta_train(split, run.cfg, params, task)

    path = save_checkpoint(
        run.checkpoint_path("metatrain"),
        result.params,
        extras={HEAD_W: result.head.W, HEAD_B: result.head.b},
        meta={"phase": "metatrain", "seed": run.cfg.seed},
    )
    run.record(path, *result.log.write(run.out, "metatrain"))

MODEL_CHECKPOINTS = ("distill", "metatrain", "pretrain")

def cmd_eval(run: Run):
    cfg = run.cfg
    params, _ = run.load_model(*MODEL_CHECKPOINTS)
    ids = cfg.eval.combo or [cfg.eval.task]
    tasks = list(run.load_tasks(ids).values())

    replay = None
    shots = cfg.eval.shots
    if run.args.replay:
        if not Path(run.args.replay).is_file():
            raise ValidationError(f"Replay file {run.args.replay} does not exist")
        dataset = merge_tasks(tasks) if len(tasks) > 1 else tasks[0]
        replay = read_replay(run.args.replay, {dataset.task_id: dataset})
        log_info(f"Replaying {len(replay)} episodes from {run.args.replay}", "cli::cmd_eval")
        shots = sorted({episode.k_shot for episode in replay})

    reports = []
    for head in ("linear", "metric"):
        model = EmbeddingClassifier(params, head, cfg.adapt)
        for k_shot in shots:
            with run.progress(f"{head} {k_shot}-shot") as task:
                report = evaluate(
                    model, tasks, cfg.eval.n_way, k_shot, cfg.eval.episodes, cfg.seed, cfg.eval.q_per_class,
                    task=task, replay=replay,
                )
            reports.append(report)
            run.record(*report.write(run.out / "eval", f"eval_{head}_{k_shot}shot"))

    print_reports(reports, run.console)

def cmd_sweep(run: Run):
    cfg = run.cfg
    params, _ = run.load_model(*MODEL_CHECKPOINTS)
    tasks = run.load_tasks(list(cfg.eval.sweep_tasks))
    for task_id, snr in cfg.eval.sweep_tasks.items():
        if tasks[task_id].snr_db != snr:
            raise ValidationError(f"{task_id} is at {tasks[task_id].snr_db} dB, sweep expects {snr}")

    model = EmbeddingClassifier(params, cfg.adapt.head, cfg.adapt)
    with run.progress("Noise sweep") as task:
        report = noise_sweep(
            model,
            list(tasks.values()),
            cfg.eval.n_way,
            cfg.eval.sweep_k_shot,
            cfg.eval.episodes,
            cfg.seed,
            cfg.eval.q_per_class,
            required_snrs=list(cfg.eval.sweep_tasks.values()),
            task=task,
        )
    run.record(*report.write(run.out / "eval", "sweep"))
    print_reports([report], run.console, "Noise sweep")

def cmd_curve(run: Run):
    cfg = run.cfg
    params, _ = run.load_model(*MODEL_CHECKPOINTS)
    dataset = run.load_tasks([cfg.eval.task])[cfg.eval.task]
    with run.progress("Adaptation curve") as task:
        report = adaptation_curve(
            params,
            dataset,
            cfg.eval.curve_max_steps,
            cfg.eval.n_way,
            cfg.eval.k_shot,
            cfg.eval.curve_episodes,
            cfg.seed,
            cfg.meta.inner_lr,
            cfg.eval.q_per_class,
            task,
        )
    run.record(*report.write(run.out / "eval", "curve"))
    print_reports([report], run.console, "Adaptation curve")

def cmd_dump(run: Run):
    cfg = run.cfg
    params, _ = run.load_model(*MODEL_CHECKPOINTS)
    dataset = run.load_tasks([cfg.eval.task])[cfg.eval.task]
    path = run.out / "eval" / f"embeddings_{dataset.task_id}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    dump_embeddings(params, dataset, cfg.eval.dump_count, path, cfg.seed)
    run.record(path)

def cmd_unseen(run: Run):
    cfg = run.cfg
    held_out = [cfg.eval.unseen_class]
    split, unseen = build_unseen_split(run.split(), held_out, cfg.eval.task)

    with run.progress("Pretraining without held-out class") as task:
        teacher = pretrain_with_head(split.train(), cfg, task=task)
    with run.progress("Self-distilling") as task:
        student = distill_with_head(teacher.params, split.train(), cfg, teacher.head, task=task)

    rows = []
    for k_shot in cfg.eval.shots:
        with run.progress(f"Unseen {k_shot}-shot") as task:
            result = adapt_to_unseen(
                student.params,
                unseen,
                k_shot,
                n_way=cfg.eval.n_way,
                episodes=cfg.eval.episodes,
                q_per_class=cfg.eval.q_per_class,
                seed=cfg.seed,
                include=held_out,
                adapt=cfg.adapt,
                task=task,
            )
        rows.append({"held_out": ",".join(held_out), **result.to_dict()})

    path = run.out / "eval" / "unseen.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(rows, indent=2))
    run.record(path)
    run.console.print(rows_table(rows, f"Unseen {unseen.task_id}"))

def cmd_gradcheck(run: Run):
    cfg = run.cfg
    size = 2 ** cfg.net.blocks
    params = init_params(size, cfg.net.channels, cfg.net.blocks, seed=cfg.seed, dtype=np.float64)
    images = make_rng(cfg.seed, "gradcheck_images").uniform(0, 1, (4, size, size))

    errors = gradient_check(params, images, seed=cfg.seed)
    rows = [{"tensor": name, "relative_error": error} for name, error in errors.items()]
    run.console.print(rows_table(rows, f"Gradient check ({size}x{size} input, float64)"))

    if failed := [name for name, error in errors.items() if error >= GRADCHECK_TOLERANCE]:
        raise FaultsInError(f"Gradient check failed for {', '.join(failed)}")

COMMANDS = {
    "gen": (cmd_gen, "generate the synthetic corpus and task datasets"),
    "pretrain": (cmd_pretrain, "pretrain the embedding on pooled classes"),
    "distill": (cmd_distill, "self-distill the pretrained embedding"),
    "metatrain": (cmd_metatrain, "first-order MAML over training episodes"),
    "eval": (cmd_eval, "few-shot evaluation with linear and metric heads"),
    "sweep": (cmd_sweep, "accuracy at each noise level on paired episodes"),
    "curve": (cmd_curve, "accuracy against adaptation steps"),
    "dump": (cmd_dump, "write embeddings and labels to CSV"),
    "unseen": (cmd_unseen, "hold a class out of training and adapt to it"),
    "gradcheck": (cmd_gradcheck, "finite-difference check of the backward pass"),
}

def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline configuration JSON")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", default="runs", help="output directory")
    common.add_argument("--verbose", action="store_true", help="debug logging and progress bars")
    common.add_argument("--noise-regime", action="store_true", help="longer meta-training with a flat outer step")

    parser = ArgumentParser(prog="ReadTheFaultsIn", description="Few-shot motor fault diagnosis toolkit")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    for name, (_, description) in COMMANDS.items():
        command = commands.add_parser(name, parents=[common], help=description, description=description)
        if name in ("distill", "metatrain", "eval", "sweep", "curve", "dump"):
            command.add_argument("--checkpoint", help="embedding checkpoint to start from")
    commands.choices["gen"].add_argument("--data", help="directory of recorded datasets to draw tasks from")
    commands.choices["eval"].add_argument("--replay", help="episode file written by an earlier run")
    return parser

def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:
        return int(e.code or 0)

    configure(args.verbose)
    for option in ("checkpoint", "data", "replay"):
        if not hasattr(args, option):
            setattr(args, option, None)

    try:
        run = Run(args, argv)
        COMMANDS[args.command][0](run)
        run.write_manifest()
    except (ValidationError, pydantic.ValidationError) as e:
        log_error(str(e), "cli::main")
        return 1
    except (FaultsInError, OSError) as e:
        log_error(str(e), "cli::main")
        log_debug(traceback.format_exc(), "cli::main")
        return 2

    return 0
