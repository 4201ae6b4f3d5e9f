from .aggregator import (
    AggregationOutput,
    QueryAggregation,
    QueryMerge,
    TruncationGate,
    fuse,
    gate_truncation,
    merge,
)

__all__ = [
    "AggregationOutput",
    "QueryAggregation",
    "QueryMerge",
    "TruncationGate",
    "fuse",
    "gate_truncation",
    "merge",
]
