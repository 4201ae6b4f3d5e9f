# What it is: the `simpb` command line.
# Subcommands: gen-scenes, train, eval, project, assoc-metric and pipeline. Each one is a
# thin shell over the application / infrastructure packages. cli_run() turns errors into
# exit codes: 0 success, 1 usage or configuration problem, 2 bad data on disk.

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np
from loguru import logger
from rich.console import Console

from . import utils
from .application.allocation import allocate
from .application.evaluation import (
    DEFAULT_TAU_SWEEP,
    MatchPredicateParams,
    aar_recall,
    evaluate_detections,
    render_report,
)
from .application.model import Trainer, detect_scenes
from .application.synthetic import generate_scenes
from .application.tensor import Tensor
from .config import settings
from .domain import RunConfig, Scene
from .exceptions import ConfigError, DataError, SimPBError
from .infrastructure import (
    checkpoint_from_trainer,
    load_checkpoint,
    load_detections,
    load_scenes,
    restore_detector,
    restore_trainer,
    save_checkpoint,
    save_detections,
    save_scenes,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


def _load_run_config(path: Path | None) -> RunConfig:
    return RunConfig.from_file(path) if path is not None else RunConfig()


def _parse_sweep(text: str) -> list[float]:
    try:
        taus = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from e
    if not taus or any(not 0.0 < t < 1.0 for t in taus):
        raise click.BadParameter("every tau_iou must lie in (0, 1)")
    return taus


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _format(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def allocation_dump(scene: Scene, run: RunConfig) -> dict:
    """Mapping matrix, reference points and truncation bits of the scene's ground-truth anchors."""

    anchors = np.array([obj.anchor.as_array() for obj in scene.objects], dtype=np.float64).reshape(-1, 9)
    placeholder = Tensor(np.zeros((anchors.shape[0], 1)))
    result = allocate(placeholder, anchors, scene.rig, run.model)
    return {
        "scene_id": scene.scene_id,
        "object_ids": [obj.object_id for obj in scene.objects],
        "mapping": result.mapping.to_json_dict(),
        "reference_points": result.reference_points.tolist(),
        "truncation": result.truncation.astype(int).tolist(),
    }


@click.group()
@click.option("--log-level", default=None, help="loguru level (defaults to SIMPB_LOG_LEVEL).")
def cli(log_level: str | None) -> None:
    """Desk-scale hybrid 2D/3D multi-camera detector."""

    utils.configure_logging(log_level or settings.LOG_LEVEL)


@cli.command("gen-scenes")
@click.option("--seed", type=int, default=settings.DEFAULT_SEED, show_default=True)
@click.option("--count", type=click.IntRange(min=0), required=True, help="Scenes (or sequences) to generate.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
def gen_scenes(seed: int, count: int, out_path: Path, config_path: Path | None) -> None:
    run = _load_run_config(config_path)
    scenes = generate_scenes(seed, count, run.scene)
    save_scenes(out_path, scenes)


@cli.command()
@click.option("--scenes", "scenes_path", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--out-ckpt", type=click.Path(path_type=Path), required=True)
@click.option("--steps", type=click.IntRange(min=0), required=True)
@click.option("--resume", "resume_path", type=click.Path(path_type=Path), default=None, help="Continue from a checkpoint.")
def train(scenes_path: Path, config_path: Path | None, out_ckpt: Path, steps: int, resume_path: Path | None) -> None:
    scenes = load_scenes(scenes_path)
    if resume_path is not None:
        checkpoint = load_checkpoint(resume_path)
        if config_path is not None and _load_run_config(config_path).to_dict() != checkpoint.config:
            logger.warning(f"--config {config_path} differs from the resumed checkpoint; using the checkpoint's config")
        trainer = restore_trainer(checkpoint, scenes, out_ckpt.parent)
        logger.info(f"Resuming from {resume_path} at step {trainer.step}")
    else:
        trainer = Trainer(_load_run_config(config_path), scenes, output_dir=out_ckpt.parent)
    trainer.fit(steps)
    save_checkpoint(out_ckpt, checkpoint_from_trainer(trainer))


@cli.command("eval")
@click.option("--scenes", "scenes_path", type=click.Path(path_type=Path), required=True)
@click.option("--ckpt", type=click.Path(path_type=Path), required=True)
@click.option("--dump-detections", type=click.Path(path_type=Path), default=None)
@click.option("--dump-plots", type=click.Path(path_type=Path), default=None, help="Directory for CSV series.")
@click.option("--score-threshold", type=click.FloatRange(0.0, 1.0), default=settings.EVAL_SCORE_THRESHOLD, show_default=True)
def evaluate(
    scenes_path: Path, ckpt: Path, dump_detections: Path | None, dump_plots: Path | None, score_threshold: float
) -> None:
    scenes = load_scenes(scenes_path)
    checkpoint = load_checkpoint(ckpt)
    detector = restore_detector(checkpoint)
    records = detect_scenes(detector, scenes)
    report = evaluate_detections(records, scenes, score_threshold=score_threshold)
    render_report(report, Console(stderr=True))
    if dump_detections is not None:
        save_detections(dump_detections, records)
    if dump_plots is not None:
        _write_csv(dump_plots / "loss_curve.csv", ["step", "loss"], enumerate(checkpoint.loss_history, start=1))
        _write_csv(
            dump_plots / "aar_curve.csv",
            ["tau_iou", "aar", "recall"],
            ((p.tau_iou, _format(p.aar), _format(p.recall)) for p in report.association.curve),
        )
        _write_csv(
            dump_plots / "pr_points.csv",
            ["class", "threshold", "recall", "precision"],
            ((p.class_id, repr(p.score), repr(p.recall), repr(p.precision)) for p in report.ap50.pr_points),
        )
        logger.info(f"Wrote plot series to {dump_plots}")


@cli.command()
@click.option("--scenes", "scenes_path", type=click.Path(path_type=Path), required=True)
@click.option("--dump-mapping", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
def project(scenes_path: Path, dump_mapping: Path, config_path: Path | None) -> None:
    """Allocate every scene's ground-truth boxes and dump the mapping (no model involved)."""

    run = _load_run_config(config_path)
    scenes = load_scenes(scenes_path)
    dump_mapping.parent.mkdir(parents=True, exist_ok=True)
    with open(dump_mapping, "w", encoding="utf-8") as f:
        for scene in scenes:
            f.write(json.dumps(allocation_dump(scene, run)))
            f.write("\n")
    logger.info(f"Wrote mappings of {len(scenes)} scenes to {dump_mapping}")


@cli.command("assoc-metric")
@click.option("--detections", "detections_path", type=click.Path(path_type=Path), required=True)
@click.option("--scenes", "scenes_path", type=click.Path(path_type=Path), required=True)
@click.option("--tau-dis", type=float, default=2.0, show_default=True)
@click.option("--tau-iou", type=float, default=0.5, show_default=True, help="Primary threshold of the summary line.")
@click.option("--tau-iou-sweep", default=",".join(str(t) for t in DEFAULT_TAU_SWEEP), show_default=True)
@click.option("--score-threshold", type=click.FloatRange(0.0, 1.0), default=0.0, show_default=True)
@click.option("--out-csv", type=click.Path(path_type=Path), default=None)
def assoc_metric(
    detections_path: Path,
    scenes_path: Path,
    tau_dis: float,
    tau_iou: float,
    tau_iou_sweep: str,
    score_threshold: float,
    out_csv: Path | None,
) -> None:
    sweep = _parse_sweep(tau_iou_sweep)
    try:
        params = MatchPredicateParams(tau_dis=tau_dis, tau_iou=tau_iou)
    except ValueError as e:
        raise click.BadParameter(str(e)) from e
    report = aar_recall(load_detections(detections_path), load_scenes(scenes_path), params, sweep, score_threshold)
    logger.info(
        f"AAR={_format(report.aar) or 'n/a'} Recall={report.recall:.2f} "
        f"(matching={report.matching}, valid={report.valid_matching}, N_2d={report.num_gt_2d})"
    )
    rows = [(p.tau_iou, _format(p.aar), _format(p.recall)) for p in report.curve]
    if out_csv is not None:
        _write_csv(out_csv, ["tau_iou", "aar", "recall"], rows)
    else:
        click.echo("tau_iou,aar,recall")
        for row in rows:
            click.echo(",".join(str(x) for x in row))


@cli.command()
@click.option("--seed", type=int, default=settings.DEFAULT_SEED, show_default=True)
@click.option("--count", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--steps", type=click.IntRange(min=0), default=100, show_default=True)
def pipeline(seed: int, count: int, config_path: Path | None, steps: int) -> None:
    """Run the zenml desk_experiment pipeline (generate -> train -> evaluate)."""

    try:
        from pipelines import desk_experiment
    except ImportError as e:
        raise ConfigError(f"the zenml pipeline is unavailable: {e}") from e
    run = _load_run_config(config_path)
    desk_experiment(seed=seed, count=count, run_config=run.to_dict(), steps=steps)


def cli_run(argv: list[str] | None = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""

    try:
        result = cli.main(args=argv, prog_name="simpb", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except DataError as e:
        logger.error(f"Data error: {e}")
        return EXIT_DATA
    except SimPBError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE
    return result if isinstance(result, int) else EXIT_OK


def main() -> None:
    sys.exit(cli_run())
