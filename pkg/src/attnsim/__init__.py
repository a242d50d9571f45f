"""Attentional-state simulation for annotated dialogue transcripts.

Two models of what a discourse participant can attend to: a focus-space
stack driven by segment structure, and a bounded working-memory cache with
displacement, retrieval effort, and pinning across interruptions. Both
expose the same accessibility snapshot, against which anaphors are
resolved and redundant restatements are analyzed.
"""

from .core import (
    AccessibilityView,
    DiscourseItem,
    Gender,
    ItemKind,
    Mention,
    MentionForm,
    Number,
    SegmentEvent,
    StoreEvent,
    StoreEventKind,
    Transcript,
    Utterance,
    agreement_filter,
    selection_filter,
)
from .resolution import (
    FailureReason,
    IRUFunction,
    Outcome,
    OutcomeKind,
    PopClassification,
    Resolution,
    ReturnPopCase,
    analyze_iru,
    classify_return_pop,
    resolve,
)
from .transcript_io import ParseError, TraceRecord, parse, read_trace, write_trace, write_transcript

__version__ = "0.1.0"

__all__ = [
    "AccessibilityView",
    "DiscourseItem",
    "FailureReason",
    "Gender",
    "IRUFunction",
    "ItemKind",
    "Mention",
    "MentionForm",
    "Number",
    "Outcome",
    "OutcomeKind",
    "ParseError",
    "PopClassification",
    "Resolution",
    "ReturnPopCase",
    "SegmentEvent",
    "StoreEvent",
    "StoreEventKind",
    "TraceRecord",
    "Transcript",
    "Utterance",
    "agreement_filter",
    "analyze_iru",
    "classify_return_pop",
    "parse",
    "read_trace",
    "resolve",
    "selection_filter",
    "write_trace",
    "write_transcript",
    "__version__",
]
