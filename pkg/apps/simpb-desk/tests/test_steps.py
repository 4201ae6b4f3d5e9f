import importlib
from pathlib import Path

import pytest

pytest.importorskip("zenml")

from simpb_desk.application.evaluation import EvaluationReport  # noqa: E402
from simpb_desk.infrastructure import load_checkpoint  # noqa: E402


class RecordingContext:
    def __init__(self) -> None:
        self.metadata: dict[str, dict] = {}

    def add_output_metadata(self, output_name: str, metadata: dict) -> None:
        self.metadata[output_name] = metadata


@pytest.fixture
def step_context(monkeypatch) -> RecordingContext:
    context = RecordingContext()
    for name in ("generate", "train", "evaluate"):
        module = importlib.import_module(f"steps.harness.{name}")
        monkeypatch.setattr(module, "get_step_context", lambda: context)
    return context


@pytest.fixture
def run_config(tiny_run) -> dict:
    return tiny_run.to_dict()


def test_generate_train_evaluate(tmp_path: Path, step_context, run_config):
    from steps.harness import evaluate_detector, generate_desk_scenes, train_detector

    scenes = generate_desk_scenes.entrypoint(seed=3, count=2, run_config=run_config)
    assert len(scenes) == 2
    assert step_context.metadata["scenes"]["len_scenes"] == 2

    path = train_detector.entrypoint(scenes=scenes, run_config=run_config, steps=1, output_dir=str(tmp_path))
    assert load_checkpoint(path).step == 1
    assert step_context.metadata["checkpoint_path"]["steps"] == 1

    report = evaluate_detector.entrypoint(scenes=scenes, checkpoint_path=path)
    assert isinstance(report, EvaluationReport)
    assert set(step_context.metadata["evaluation_report"]) >= {"ap50", "aar", "recall"}

