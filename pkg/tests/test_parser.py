"""Transcript parsing: happy paths, strict errors, and round-trips."""

from __future__ import annotations

import pytest

from attnsim.core import EventKind, Gender, ItemKind, MentionForm, Number
from attnsim.transcript_io import ParseError, parse, write_transcript

from conftest import load_fixture


def test_minimal_transcript():
    transcript = parse("DIALOGUE t\nUTT u1 speaker=A\n")
    assert transcript.dialogue_id == "t"
    assert len(transcript.utterances) == 1
    assert transcript.events == ()
    assert transcript.utterances[0].speaker == "A"


def test_dialogue_a_shape(dialogue_a):
    assert len(dialogue_a.utterances) == 8
    assert len(dialogue_a.events) == 2
    push, pop = dialogue_a.events
    assert push.kind is EventKind.PUSH and push.expect_return
    assert push.position == dialogue_a.utterance_by_id("5").index
    assert pop.kind is EventKind.POP
    assert pop.position == dialogue_a.utterance_by_id("8a").index


def test_unknown_record_type_names_it():
    with pytest.raises(ParseError) as exc:
        parse("DIALOGUE t\nUTT u1 speaker=A\nPSH S2\n")
    assert exc.value.line_number == 3
    assert "PSH" in exc.value.message
    assert exc.value.offending_text.strip() == "PSH S2"


@pytest.mark.parametrize(
    "body, fragment",
    [
        ("ITEM x kind=entity", "before any UTT"),
        ("UTT u1 speaker=A\nITEM x kind=widget", "kind"),
        ("UTT u1 speaker=A\nITEM x kind=entity gender=q", "gender"),
        ("UTT u1 speaker=A\nITEM x kind=entity\nITEM x kind=entity", "duplicate item"),
        ("UTT u1 speaker=A\nITEM y", "not yet declared"),
        ("UTT u1 speaker=A\nITEM x kind=surface", "realizes"),
        ("UTT u1 speaker=A\nITEM x kind=entity realizes=x", "realizes"),
        ("UTT u1 speaker=A\nITEM x kind=entity pred=go", "pred/args"),
        ("UTT u1 speaker=A\nPRON p gender=f num=sg gold=ghost", "undeclared item"),
        ("UTT u1 speaker=A\nPRON p gender=f gold=ghost", "requires num"),
        ("UTT u1 speaker=A\nELLIPSIS e", "requires gold"),
        ("UTT u1 speaker=A\nUTT u1 speaker=B", "duplicate utterance"),
        ("UTT u1 speaker=A iru=u9", "iru antecedent"),
        ("UTT u1 speaker=A iru=u1", "iru antecedent"),
        ("POP S1", "does not match"),
        ("PUSH S1\nPOP S2", "does not match"),
        ("PUSH S1\nPUSH S2\nPOP S1", "does not match"),
        ("RETURN S1", "unopened"),
        ("PUSH S1\nPOP S1\nPUSH S1", "already used"),
        ("CASE c1 mention=p", "before any RETURN"),
        ("UTT u1 speaker=A\nITEM x kind=entity bogus=1", "unknown key"),
        ("UTT u1 speaker=A\nITEM x kind=entity gender", "malformed field"),
        ("UTT u1", "requires speaker"),
    ],
)
def test_strict_errors(body, fragment):
    with pytest.raises(ParseError) as exc:
        parse("DIALOGUE t\n" + body + "\n")
    assert fragment in exc.value.message


def test_missing_dialogue_header():
    with pytest.raises(ParseError):
        parse("UTT u1 speaker=A\n")
    with pytest.raises(ParseError):
        parse("# just a comment\n")


def test_comments_and_blanks_ignored():
    transcript = parse("# header\nDIALOGUE t\n\nUTT u1 speaker=A  # trailing\n")
    assert len(transcript.utterances) == 1


def test_item_features_and_attachment(dialogue_a):
    daughter = dialogue_a.item_table["daughter"]
    assert daughter.kind is ItemKind.ENTITY
    assert daughter.gender is Gender.FEM
    assert daughter.number is Number.SG
    assert daughter.introduced_at == 1
    utt_4b = dialogue_a.utterance_by_id("4b")
    assert utt_4b.items == ("s1", "daughter", "p1")
    s1 = dialogue_a.item_table["s1"]
    assert s1.kind is ItemKind.SURFACE_FORM and s1.realizes == "p1"


def test_dialogue_derived_tags_populated(dialogue_a):
    # daughter is an argument of a proposition with predicate "work".
    assert "pred:work" in dialogue_a.item_table["daughter"].sel_classes
    assert "pred:work" in dialogue_a.item_table["husband"].sel_classes


def test_re_realization_keeps_introduction_slot(dialogue_a):
    utt_7 = dialogue_a.utterance_by_id("7")
    assert utt_7.items == ("hank",)
    assert dialogue_a.item_table["hank"].introduced_at == dialogue_a.utterance_by_id("6").index


def test_mentions_parsed(dialogue_a):
    her, ellipsis = dialogue_a.utterance_by_id("8a").mentions
    assert her.form is MentionForm.PRONOUN
    assert her.gender is Gender.FEM and her.number is Number.SG
    assert her.gold_antecedent == "daughter"
    assert ellipsis.form is MentionForm.VP_ELLIPSIS
    assert ellipsis.gold_antecedent == "p1"


def test_iru_annotations(dialogue_c):
    assert dialogue_c.utterance_by_id("22b").iru_antecedents == ("6",)
    assert dialogue_c.utterance_by_id("22c").iru_antecedents == ("4", "5")
    assert not dialogue_c.utterance_by_id("21").is_iru


def test_case_records(return_pops):
    assert len(return_pops.cases) == 21
    by_id = {case.case_id: case for case in return_pops.cases}
    assert by_id["c01"].iru_at_return
    assert not by_id["c01"].central_competitor
    assert by_id["c01"].mention_id == "pr01"
    assert by_id["c01"].segment_id == "g01"
    assert not by_id["c20"].iru_at_return
    assert sum(1 for case in return_pops.cases if case.iru_at_return) == 6


def test_trailing_event_allowed():
    transcript = parse("DIALOGUE t\nPUSH S1\nUTT u1 speaker=A\nPOP S1\n")
    assert transcript.events[-1].position == 1


@pytest.mark.parametrize(
    "name",
    ["dialogue_a.dlg", "dialogue_b.dlg", "dialogue_c.dlg", "return_pops.dlg"],
)
def test_fixture_round_trip(name):
    transcript = load_fixture(name)
    assert parse(write_transcript(transcript)) == transcript


def test_write_trace_of_empty_record_list():
    from attnsim.transcript_io import read_trace, write_trace

    assert write_trace([]) == "[]\n"
    assert read_trace(write_trace([])) == []


def test_single_record_trace_round_trip():
    from attnsim.core import AccessibilityView, StoreEvent, StoreEventKind
    from attnsim.resolution import Outcome, Resolution
    from attnsim.transcript_io import TraceRecord, read_trace, write_trace

    record = TraceRecord(
        utterance_index=0,
        events_applied=(StoreEvent(StoreEventKind.RETRIEVE, "x"),),
        view=AccessibilityView(
            immediate=("x",), retrievable=frozenset({"y"}), lost=frozenset({"z"})
        ),
        resolutions=(
            Resolution(
                mention_id="m",
                outcome=Outcome.after_retrieval("x", 2),
                candidates_considered=("x",),
                correct=True,
            ),
        ),
        cumulative_effort=2,
    )
    assert read_trace(write_trace([record])) == [record]


def test_write_trace_rejects_disordered_or_regressing_records():
    from attnsim.core import AccessibilityView
    from attnsim.transcript_io import TraceRecord, write_trace

    def record(index, effort):
        return TraceRecord(
            utterance_index=index,
            events_applied=(),
            view=AccessibilityView(),
            resolutions=(),
            cumulative_effort=effort,
        )

    with pytest.raises(ValueError, match="ordered"):
        write_trace([record(1, 0), record(0, 0)])
    with pytest.raises(ValueError, match="non-decreasing"):
        write_trace([record(0, 3), record(1, 1)])
