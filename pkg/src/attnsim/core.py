"""Model-independent discourse domain types and candidate filtering.

Everything here is shared by both attentional models: the items that occupy
attentional stores, the annotated utterance/event structure of a dialogue,
the accessibility snapshot both models produce, and the two pointwise
filters used to narrow antecedent candidates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import AbstractSet, Mapping, Sequence


class ItemKind(Enum):
    ENTITY = "entity"
    PROPOSITION = "prop"
    SURFACE_FORM = "surface"


class Gender(Enum):
    MASC = "masc"
    FEM = "fem"
    NEUT = "neut"
    UNSPECIFIED = "unspecified"


class Number(Enum):
    SG = "sg"
    PL = "pl"
    UNSPECIFIED = "unspecified"


class MentionForm(Enum):
    PRONOUN = "pronoun"
    VP_ELLIPSIS = "vp-ellipsis"
    DEFINITE_NP = "definite-np"


class EventKind(Enum):
    PUSH = "push"
    POP = "pop"
    RETURN = "return"


class StoreEventKind(Enum):
    """What a model did to its stores while processing an utterance."""

    DISPLACE = "Displace"
    STORE = "Store"
    DISCARD = "Discard"
    RETRIEVE = "Retrieve"
    PIN = "Pin"
    UNPIN = "Unpin"
    PUSH_SPACE = "PushSpace"
    POP_SPACE = "PopSpace"


@dataclass(frozen=True)
class StoreEvent:
    kind: StoreEventKind
    target: str


# Capability tags derived from dialogue content (an entity appearing as an
# argument of a proposition with predicate P gets the tag below) share the
# namespace with statically annotated tags but stay distinguishable by shape.
DERIVED_TAG_PREFIX = "pred:"


def derived_tag(lemma: str) -> str:
    return DERIVED_TAG_PREFIX + lemma


@dataclass(frozen=True)
class DiscourseItem:
    """An entity, proposition, or surface-form record occupying a store."""

    id: str
    kind: ItemKind
    gender: Gender = Gender.UNSPECIFIED
    number: Number = Number.UNSPECIFIED
    predicate: str | None = None
    args: tuple[str, ...] = ()
    sel_classes: frozenset[str] = frozenset()
    realizes: str | None = None
    introduced_at: int = 0

    def __post_init__(self) -> None:
        if self.kind is ItemKind.SURFACE_FORM:
            if self.realizes is None:
                raise ValueError(f"surface form {self.id!r} must realize an item")
        elif self.realizes is not None:
            raise ValueError(f"non-surface item {self.id!r} cannot realize an item")
        if self.kind is not ItemKind.PROPOSITION and (self.predicate or self.args):
            raise ValueError(f"predicate/args are proposition-only (item {self.id!r})")


@dataclass(frozen=True)
class Mention:
    """An anaphor to resolve, with its agreement and selectional cues."""

    id: str
    form: MentionForm
    gender: Gender = Gender.UNSPECIFIED
    number: Number = Number.UNSPECIFIED
    verb_lemma: str | None = None
    required_sel_classes: frozenset[str] = frozenset()
    gold_antecedent: str = ""


@dataclass(frozen=True)
class Utterance:
    id: str
    speaker: str
    index: int
    items: tuple[str, ...] = ()
    mentions: tuple[Mention, ...] = ()
    iru_antecedents: tuple[str, ...] = ()

    @property
    def is_iru(self) -> bool:
        return bool(self.iru_antecedents)


@dataclass(frozen=True)
class SegmentEvent:
    """A segment boundary preceding the utterance at ``position``."""

    kind: EventKind
    segment_id: str
    position: int
    expect_return: bool = False


@dataclass(frozen=True)
class CaseRecord:
    """A return-pop case annotation attached to a RETURN event."""

    case_id: str
    mention_id: str
    segment_id: str
    return_position: int
    iru_at_return: bool = False
    central_competitor: bool = False


@dataclass(frozen=True)
class Transcript:
    dialogue_id: str
    utterances: tuple[Utterance, ...] = ()
    events: tuple[SegmentEvent, ...] = ()
    item_table: Mapping[str, DiscourseItem] = field(default_factory=dict)
    cases: tuple[CaseRecord, ...] = ()

    def utterance_by_id(self, utt_id: str) -> Utterance:
        for utt in self.utterances:
            if utt.id == utt_id:
                return utt
        raise KeyError(utt_id)

    def events_at(self, position: int) -> tuple[SegmentEvent, ...]:
        return tuple(e for e in self.events if e.position == position)

    def mentions(self) -> tuple[Mention, ...]:
        out: list[Mention] = []
        for utt in self.utterances:
            out.extend(utt.mentions)
        return tuple(out)


def segment_assignments(transcript: Transcript) -> tuple[str | None, ...]:
    """Innermost open segment id for each utterance (None = root)."""

    open_stack: list[str] = []
    assign: list[str | None] = []
    for utt in transcript.utterances:
        for event in transcript.events_at(utt.index):
            if event.kind is EventKind.PUSH:
                open_stack.append(event.segment_id)
            elif event.kind is EventKind.POP:
                open_stack.pop()
            else:
                while open_stack and open_stack[-1] != event.segment_id:
                    open_stack.pop()
        assign.append(open_stack[-1] if open_stack else None)
    return tuple(assign)


def segment_items(
    transcript: Transcript, segment_id: str, before: int | None = None
) -> tuple[str, ...]:
    """Items realized by the utterances whose innermost segment is given.

    Order follows the dialogue; repeated realizations keep the first slot.
    With ``before``, only utterances preceding that index contribute.
    """

    assign = segment_assignments(transcript)
    seen: list[str] = []
    for utt, seg in zip(transcript.utterances, assign):
        if seg != segment_id:
            continue
        if before is not None and utt.index >= before:
            continue
        for item_id in utt.items:
            if item_id not in seen:
                seen.append(item_id)
    return tuple(seen)


@dataclass(frozen=True)
class AccessibilityView:
    """Snapshot of what a model makes available: immediately accessible
    items in salience order, items recoverable at a cost, and items gone.
    """

    immediate: tuple[str, ...] = ()
    retrievable: frozenset[str] = frozenset()
    lost: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        imm = set(self.immediate)
        if imm & self.retrievable or imm & self.lost or self.retrievable & self.lost:
            raise ValueError("accessibility stores must be pairwise disjoint")


def _feature_compatible(left: Enum, right: Enum, unspecified: Enum) -> bool:
    return left is unspecified or right is unspecified or left is right


def agreement_filter(
    candidates: Sequence[DiscourseItem], mention: Mention
) -> list[DiscourseItem]:
    """Keep candidates whose gender and number are compatible with the mention.

    Unspecified on either side is compatible with anything; order preserved.
    """

    return [
        item
        for item in candidates
        if _feature_compatible(item.gender, mention.gender, Gender.UNSPECIFIED)
        and _feature_compatible(item.number, mention.number, Number.UNSPECIFIED)
    ]


def selection_filter(
    candidates: Sequence[DiscourseItem], required: AbstractSet[str]
) -> list[DiscourseItem]:
    """Keep candidates whose capability tags cover the required set."""

    if not required:
        return list(candidates)
    return [item for item in candidates if item.sel_classes >= set(required)]
