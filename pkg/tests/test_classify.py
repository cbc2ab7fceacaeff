import pytest

from causeway.classify import (
    ClassifiedCause,
    EmptyInput,
    RecurrencePattern,
    RootCauseClass,
    attribution_shift,
    classify,
    detect_recurrence,
    label_flag,
    pareto_rank,
    validate_against_history,
)
from causeway.config import DEFAULT_SYMPTOM_TAXONOMY
from causeway.fixtures import RECURRENCE_GROUPS, RECURRENCE_INCIDENTS
from causeway.funnel import SymptomSignature, Termination, WhyChain, WhyStep, extract_symptoms
from causeway.ingest import IncidentRecord

R = RootCauseClass


def _chain(cause, cited, supported=True, class_hint=None, inc="inc:X"):
    step = WhyStep(1, "Why: x?", cause, tuple(cited), supported, class_hint=class_hint)
    term = Termination.ACTIONABLE_CAUSE_FOUND if supported else Termination.NO_SUPPORTED_CAUSE
    return WhyChain(inc, (step,), cause, term)


def _sig(cat):
    return SymptomSignature((), "s", cat)


# -- recurrence --------------------------------------------------------------------


def test_eleven_incident_recurrence():
    sigs = [
        (f"inc:{iid}", extract_symptoms(IncidentRecord(iid, 1, svc, desc), DEFAULT_SYMPTOM_TAXONOMY))
        for iid, svc, desc, _ in RECURRENCE_INCIDENTS
    ]
    patterns = detect_recurrence(sigs)
    assert {p.category: list(p.incidents) for p in patterns} == RECURRENCE_GROUPS
    # inc:INC3 and inc:INC4 are in no pattern
    assert not {"inc:INC3", "inc:INC4"} & {i for p in patterns for i in p.incidents}
    assert patterns[0].category == "storage-exhaustion"


def test_recurrence_all_uncategorized():
    assert detect_recurrence([("inc:a", _sig("uncategorized")), ("inc:b", _sig("uncategorized"))]) == []


def test_recurrence_needs_two():
    assert detect_recurrence([("inc:a", _sig("deadlock"))]) == []


def test_recurrence_order_count_then_name():
    sigs = [("inc:1", _sig("b")), ("inc:2", _sig("b")), ("inc:3", _sig("a")), ("inc:4", _sig("a")), ("inc:5", _sig("c"))]
    sigs += [("inc:6", _sig("c")), ("inc:7", _sig("c"))]
    assert [p.category for p in detect_recurrence(sigs)] == ["c", "a", "b"]


# -- classify ladder -----------------------------------------------------------------


def test_rung1_hint_with_evidence():
    cls, why = classify(_chain("lack of automation", ["chg:CR-1"]), "automation-gap")
    assert cls is R.AUTOMATION_GAP and why.startswith("rung 1")


def test_rung1_hint_without_matching_evidence_falls_through():
    cls, why = classify(_chain("slow restart", ["svc:p"]), "internal-code-defect")
    assert cls is R.UNKNOWN and why.startswith("rung 5")


def test_rung1_hint_carried_on_step():
    assert classify(_chain("x", ["chg:CR-1"], class_hint="automation-gap"))[0] is R.AUTOMATION_GAP


def test_rung2_code_file():
    cls, why = classify(_chain("missing lock ordering", ["file:p/Dao.java"]))
    assert cls is R.INTERNAL_CODE_DEFECT and why.startswith("rung 2")


def test_rung3_automation():
    cls, _ = classify(_chain("lack of automation", ["chg:CR-1"]))
    assert cls is R.AUTOMATION_GAP


def test_rung3_needs_change_request():
    cls, _ = classify(_chain("lack of automation", ["svc:p"]))
    assert cls is not R.AUTOMATION_GAP


@pytest.mark.parametrize(
    "cause, expected",
    [
        ("change approval skipped", R.PROCESS_MANAGEMENT),
        ("vendor patch regression", R.VENDOR_EXTERNAL),
        ("memory quota hit", R.INFRASTRUCTURE_CAPACITY),
        ("cosmic rays", R.UNKNOWN),
    ],
)
def test_rung4_keywords(cause, expected):
    assert classify(_chain(cause, ["svc:p"]))[0] is expected


def test_unsupported_final_step_is_unknown():
    assert classify(_chain("no supported cause", [], supported=False), "automation-gap")[0] is R.UNKNOWN


def test_empty_chain_is_unknown():
    chain = WhyChain("inc:X", (), "", Termination.NO_SUPPORTED_CAUSE)
    assert classify(chain)[0] is R.UNKNOWN


# -- validation -------------------------------------------------------------------------


def _cc(inc, cls):
    return ClassifiedCause(inc, cls, "", _chain("x", [], inc=inc))


def test_validated_when_peer_agrees():
    pats = [RecurrencePattern("deadlock", ("inc:INC1", "inc:INC2"))]
    prior = [_cc("inc:INC1", R.INTERNAL_CODE_DEFECT)]
    assert validate_against_history(_cc("inc:INC2", R.INTERNAL_CODE_DEFECT), pats, prior)
    assert not validate_against_history(_cc("inc:INC2", R.AUTOMATION_GAP), pats, prior)


def test_not_validated_outside_patterns():
    prior = [_cc("inc:INC1", R.INTERNAL_CODE_DEFECT)]
    assert not validate_against_history(_cc("inc:INC3", R.INTERNAL_CODE_DEFECT), [], prior)


def test_unknown_never_validates():
    pats = [RecurrencePattern("deadlock", ("inc:a", "inc:b"))]
    assert not validate_against_history(_cc("inc:b", R.UNKNOWN), pats, [_cc("inc:a", R.UNKNOWN)])


# -- attribution shift --------------------------------------------------------------


def _incs(labels):
    return [IncidentRecord(f"I{i}", 1, "s", "d", lbl) for i, lbl in enumerate(labels)]


def test_shift_identity_is_diagonal():
    labels = ["vendor-external", "automation-gap", "process-management", "internal-code-defect"]
    incs = _incs(labels)
    shift = attribution_shift(incs, [_cc(i.node_id, R(i.original_attribution)) for i in incs])
    assert all(set(row) == {orig} for orig, row in shift.matrix.items())
    assert shift.internal_share_before == shift.internal_share_after == 0.5


def test_shift_all_unknown_clears_flag():
    incs = _incs(["vendor-external"] * 3)
    shift = attribution_shift(incs, [_cc(i.node_id, R.UNKNOWN) for i in incs])
    assert not shift.after_defined and shift.internal_share_after == 0.0
    assert shift.before_defined and shift.internal_share_before == 0.0
    assert shift.matrix == {"vendor-external": {"unknown": 3}}
    assert shift.external_total == 0


def test_shift_seven_of_ten_vendor():
    incs = _incs(["vendor-external"] * 10)
    classes = [R.INTERNAL_CODE_DEFECT] * 4 + [R.AUTOMATION_GAP] * 3 + [R.VENDOR_EXTERNAL] * 3
    shift = attribution_shift(incs, [_cc(i.node_id, c) for i, c in zip(incs, classes)])
    assert shift.internal_share_before == 0.0
    assert shift.internal_share_after == pytest.approx(0.7)
    assert (shift.external_reattributed, shift.external_total) == (7, 10)
    assert shift.total == 10


def test_shift_round_trip():
    incs = _incs(["vendor-external", "unknown"])
    shift = attribution_shift(incs, [_cc("inc:I0", R.AUTOMATION_GAP), _cc("inc:I1", R.UNKNOWN)])
    assert type(shift).from_dict(shift.to_dict()) == shift


def test_label_flags():
    assert label_flag("automation-gap") == "internal"
    assert label_flag("vendor-external") == "external"
    assert label_flag("unknown") == label_flag("nonsense") == "neither"


# -- pareto ---------------------------------------------------------------------------


def test_pareto_dominant():
    cut = pareto_rank({"A": 8, "B": 1, "C": 1})
    assert cut.cut == ["A"]
    assert [r[0] for r in cut.ranked] == ["A", "B", "C"]
    assert cut.ranked[-1][2] == 1.0


def test_pareto_singleton():
    assert pareto_rank({"only": 3}).cut == ["only"]


def test_pareto_four_groups_follow_rule():
    # 3/9, 5/9, 7/9 = 0.778 < 0.8, so all four groups are needed
    pats = [RecurrencePattern(c, tuple(ids)) for c, ids in RECURRENCE_GROUPS.items()]
    cut = pareto_rank(pats)
    assert cut.cut[0] == "storage-exhaustion"
    assert len(cut.cut) == 4


def test_pareto_ties_by_name():
    assert pareto_rank({"b": 1, "a": 1, "c": 1, "d": 1, "e": 1}).cut == ["a", "b", "c", "d"]


def test_pareto_exact_threshold():
    assert pareto_rank({"a": 4, "b": 1}).cut == ["a"]


def test_pareto_errors():
    with pytest.raises(EmptyInput):
        pareto_rank([])
    with pytest.raises(ValueError):
        pareto_rank({"a": 0})
