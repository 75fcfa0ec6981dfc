"""Experiment runners, held-out evaluation and the oracle self-check."""

from .evaluation import EvalFrames, FrameMetrics, eval_frames, evaluate_policy, realized_collision
from .experiments import (
    KINDS,
    ExperimentResult,
    ExperimentSpec,
    ResultRow,
    format_csv,
    paired_difference,
    run_ergodic_sweep,
    run_experiment,
    run_frame_sweep,
    run_sensing_error_sweep,
    run_varsigma_sweep,
)
from .presets import fig4_config, fig4_nsi, fig6_config
from .validate import ValidationReport, validate

__all__ = [
    "KINDS",
    "EvalFrames",
    "FrameMetrics",
    "ExperimentResult",
    "ExperimentSpec",
    "ResultRow",
    "ValidationReport",
    "eval_frames",
    "evaluate_policy",
    "realized_collision",
    "format_csv",
    "paired_difference",
    "run_experiment",
    "run_frame_sweep",
    "run_ergodic_sweep",
    "run_varsigma_sweep",
    "run_sensing_error_sweep",
    "fig4_config",
    "fig4_nsi",
    "fig6_config",
    "validate",
]
