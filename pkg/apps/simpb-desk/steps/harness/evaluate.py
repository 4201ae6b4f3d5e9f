from typing_extensions import Annotated
from zenml import get_step_context, step

from simpb_desk.application.evaluation import EvaluationReport, evaluate_detections
from simpb_desk.application.model import detect_scenes
from simpb_desk.config import settings
from simpb_desk.domain import Scene
from simpb_desk.infrastructure import load_checkpoint, restore_detector


@step
def evaluate_detector(
    scenes: list[Scene],
    checkpoint_path: str,
    score_threshold: float = settings.EVAL_SCORE_THRESHOLD,
) -> Annotated[EvaluationReport, "evaluation_report"]:
    detector = restore_detector(load_checkpoint(checkpoint_path))
    report = evaluate_detections(detect_scenes(detector, scenes), scenes, score_threshold=score_threshold)

    step_context = get_step_context()
    step_context.add_output_metadata(
        output_name="evaluation_report",
        metadata={
            "ap50": report.ap50.mean,
            "ap75": report.ap75.mean,
            "center_error_mean": report.center_error.mean,
            "aar": report.association.aar,
            "recall": report.association.recall,
        },
    )
    return report
