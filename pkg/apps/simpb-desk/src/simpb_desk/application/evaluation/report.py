# One evaluation run: AP at two IoU thresholds, the center / yaw error summary and the
# association curve, rendered as rich tables for the terminal.

from pydantic import BaseModel, ConfigDict
from rich.console import Console
from rich.table import Table

from ...domain import DetectionRecord, Scene
from .association import DEFAULT_TAU_SWEEP, AssociationReport, MatchPredicateParams, aar_recall
from .average_precision import APResult, average_precision_2d
from .center_error import CenterErrorSummary, center_error_3d


class EvaluationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_scenes: int
    score_threshold: float
    ap50: APResult
    ap75: APResult
    center_error: CenterErrorSummary
    association: AssociationReport


def evaluate_detections(
    records: list[DetectionRecord],
    scenes: list[Scene],
    score_threshold: float = 0.3,
    params: MatchPredicateParams | None = None,
    tau_iou_sweep=DEFAULT_TAU_SWEEP,
) -> EvaluationReport:
    """AP (all scores), center error and association (detections above `score_threshold`)."""

    return EvaluationReport(
        num_scenes=len(scenes),
        score_threshold=score_threshold,
        ap50=average_precision_2d(records, scenes, 0.5),
        ap75=average_precision_2d(records, scenes, 0.75),
        center_error=center_error_3d(records, scenes, score_threshold=score_threshold),
        association=aar_recall(records, scenes, params, tau_iou_sweep, score_threshold),
    )


def _fmt(value: float | None, digits: int = 3) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def render_report(report: EvaluationReport, console: Console | None = None) -> None:
    console = console or Console()

    summary = Table(title=f"Detection quality ({report.num_scenes} scenes)")
    summary.add_column("metric")
    summary.add_column("value", justify="right")
    summary.add_row("2D AP@0.5 (mean)", _fmt(report.ap50.mean))
    summary.add_row("2D AP@0.75 (mean)", _fmt(report.ap75.mean))
    for cls, ap in sorted(report.ap50.per_class.items()):
        summary.add_row(f"  AP@0.5 class {cls}", _fmt(ap))
    summary.add_row("3D center error mean (m)", _fmt(report.center_error.mean))
    summary.add_row("3D center error median (m)", _fmt(report.center_error.median))
    summary.add_row("3D yaw error mean (rad)", _fmt(report.center_error.mean_yaw_error))
    summary.add_row("matched 3D pairs", f"{report.center_error.matched}/{report.center_error.num_gt}")
    console.print(summary)

    curve = Table(title=f"Association (tau_dis = {report.association.tau_dis} m)")
    for name in ("tau_iou", "#Matching", "#ValidMatching", "AAR %", "Recall %"):
        curve.add_column(name, justify="right")
    for point in report.association.curve:
        curve.add_row(
            f"{point.tau_iou:.1f}", str(point.matching), str(point.valid_matching), _fmt(point.aar, 1), _fmt(point.recall, 1)
        )
    console.print(curve)
