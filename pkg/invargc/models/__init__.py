"""
Models package - domain arrays and pydantic schemas
"""

from invargc.models.domain import (
    MultiEnvDataset,
    GraphSkeleton,
    GroundTruth,
    LinearModel,
    NonlinearModel,
    BaselineModel,
    EdgeScores,
    InterventionScores,
    ScoredLabels
)

from invargc.models.schemas import (
    GenConfig,
    HyperParams,
    NonlinearArch,
    ThresholdRule,
    FitResult,
    EnvAlignment,
    AlignmentReport,
    EvalReport,
    BenchmarkCell,
    MethodSummary,
    BenchmarkReport
)

__all__ = [
    # Domain
    "MultiEnvDataset",
    "GraphSkeleton",
    "GroundTruth",
    "LinearModel",
    "NonlinearModel",
    "BaselineModel",
    "EdgeScores",
    "InterventionScores",
    "ScoredLabels",
    # Schemas
    "GenConfig",
    "HyperParams",
    "NonlinearArch",
    "ThresholdRule",
    "FitResult",
    "EnvAlignment",
    "AlignmentReport",
    "EvalReport",
    "BenchmarkCell",
    "MethodSummary",
    "BenchmarkReport"
]
