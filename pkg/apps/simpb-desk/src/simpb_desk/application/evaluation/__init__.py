from .association import (
    DEFAULT_TAU_SWEEP,
    AssociationPoint,
    AssociationReport,
    MatchPredicateParams,
    aar_recall,
    phi,
    psi,
)
from .average_precision import APResult, PRPoint, average_precision_2d, every_point_interpolation
from .center_error import CenterErrorSummary, center_error_3d, greedy_center_matches
from .common import filter_by_score, pair_records
from .report import EvaluationReport, evaluate_detections, render_report

__all__ = [
    "APResult",
    "AssociationPoint",
    "AssociationReport",
    "CenterErrorSummary",
    "DEFAULT_TAU_SWEEP",
    "EvaluationReport",
    "MatchPredicateParams",
    "PRPoint",
    "aar_recall",
    "average_precision_2d",
    "center_error_3d",
    "evaluate_detections",
    "every_point_interpolation",
    "filter_by_score",
    "greedy_center_matches",
    "pair_records",
    "phi",
    "psi",
    "render_report",
]
