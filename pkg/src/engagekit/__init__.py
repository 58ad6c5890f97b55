"""Classroom action-sequence parsing and peer-aware engagement measurement.

Pipeline: per-student windows are split into fixed segments, a recognizer
labels each segment, consecutive identical labels merge into a timestamped
action sequence, and the sequence plus the peers' majority-action context is
classified as engaged or disengaged. Every stage ships with its evaluation
metrics (MoF, Edit, F1@tau for parsing; P/R/F1 for classification).
"""

from .core import (
    ActionDictionary,
    ActionLabel,
    ActionSegment,
    ActionSequence,
    ClassroomWindow,
    EngagementLabel,
    FrameLabelStream,
    TimeSpan,
    apply_merge,
    default_dictionary,
)
from .engagement import (
    BaselineParams,
    ClassifierEndpoint,
    EngagementVerdict,
    InputRepresentation,
    PromptBundle,
    PromptVariant,
    build_prompt,
    classify_baseline,
    classify_remote,
    parse_verdict,
)
from .fewshot import (
    EmbeddingBatch,
    class_probabilities,
    gradient_check,
    loss_gradient,
    total_loss,
)
from .metrics import (
    ClsEvalReport,
    SegEvalReport,
    classification_report,
    edit_score,
    f1_at_tau,
    mof,
    seg_report,
)
from .temporal import (
    ActionHistogram,
    ContextTimeline,
    OracleRecognizer,
    RecognizerVerdict,
    WindowingConfig,
    aggregate_context,
    merge_verdicts,
    recognize_segments,
    render_sequence_text,
    split_windows,
    to_histogram,
)

__version__ = "0.1.0"

__all__ = [
    "ActionDictionary",
    "ActionHistogram",
    "ActionLabel",
    "ActionSegment",
    "ActionSequence",
    "BaselineParams",
    "ClassifierEndpoint",
    "ClassroomWindow",
    "ClsEvalReport",
    "ContextTimeline",
    "EmbeddingBatch",
    "EngagementLabel",
    "EngagementVerdict",
    "FrameLabelStream",
    "InputRepresentation",
    "OracleRecognizer",
    "PromptBundle",
    "PromptVariant",
    "RecognizerVerdict",
    "SegEvalReport",
    "TimeSpan",
    "WindowingConfig",
    "aggregate_context",
    "apply_merge",
    "build_prompt",
    "class_probabilities",
    "classification_report",
    "classify_baseline",
    "classify_remote",
    "default_dictionary",
    "edit_score",
    "f1_at_tau",
    "gradient_check",
    "loss_gradient",
    "merge_verdicts",
    "mof",
    "parse_verdict",
    "recognize_segments",
    "render_sequence_text",
    "seg_report",
    "split_windows",
    "to_histogram",
    "total_loss",
]
