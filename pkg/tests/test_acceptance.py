"""Acceptance criteria 1-7, each printing one PASS/FAIL line."""

import random
import time
from itertools import combinations

from hypothesis import given, settings
from hypothesis import strategies as st

from _worlds import BACKENDS, check_funnel_invariants, worlds
from causeway.backends import deterministic_backend
from causeway.classify import VALIDATION_PROXY_LABEL, RootCauseClass, classify, detect_recurrence, label_flag, pareto_rank
from causeway.config import FunnelConfig
from causeway.fixtures import RECURRENCE_GROUPS, generate_fixture
from causeway.funnel import Termination, extract_symptoms, run_funnel
from causeway.graph import NodeKind
from causeway.ingest import incident_from_node, load_input_dir
from causeway.report import NOT_REPRODUCED, PipelineReport, analyze
from causeway.scanner import load_rules, scan_corpus


def test_criterion_1_recurrence_groups(tmp_path, acceptance):
    generate_fixture("table1", tmp_path, seed=7)
    t0 = time.perf_counter()
    graph, _ = load_input_dir(tmp_path)
    taxonomy = FunnelConfig().symptom_taxonomy
    sigs = [(n.id, extract_symptoms(incident_from_node(n), taxonomy)) for n in graph.nodes(NodeKind.INCIDENT)]
    patterns = detect_recurrence(sigs)
    elapsed = time.perf_counter() - t0
    got = {p.category: list(p.incidents) for p in patterns}
    expected = {
        "deadlock": ["inc:INC1", "inc:INC2"],
        "storage-exhaustion": ["inc:INC5", "inc:INC6", "inc:INC7"],
        "backup-failure": ["inc:INC8", "inc:INC9"],
        "long-running-sql": ["inc:INC10", "inc:INC11"],
    }
    assert expected == RECURRENCE_GROUPS
    ok = got == expected and elapsed < 1.0
    assert acceptance(1, ok, f"groups={sorted(got)} exact={got == expected} runtime={elapsed:.3f}s (<1s)")


def test_criterion_2_payments_replay(tmp_path, acceptance):
    generate_fixture("fig4", tmp_path, seed=7)
    graph, _ = load_input_dir(tmp_path)
    incident = incident_from_node(graph.node("inc:I1"))
    chain = run_funnel(graph, incident, deterministic_backend())
    cls, _ = classify(chain)
    ok = (
        chain.termination is Termination.ACTIONABLE_CAUSE_FOUND
        and chain.terminal_cause == "lack of automation"
        and "chg:CR-1" in chain.steps[-1].cited
        and cls is RootCauseClass.AUTOMATION_GAP
    )
    detail = f"termination={chain.termination.value} cause={chain.terminal_cause!r} cited={list(chain.steps[-1].cited)} class={cls.value}"
    assert acceptance(2, ok, detail)


def test_criterion_3_reattribution(tmp_path, acceptance):
    manifest = generate_fixture("reattribution", tmp_path, seed=7)
    t0 = time.perf_counter()
    graph, _ = load_input_dir(tmp_path)
    report = analyze(graph, None, deterministic_backend())
    elapsed = time.perf_counter() - t0
    shift = report.shift
    planted_k = manifest.expected["external_planted_internal"]
    planted_n = manifest.expected["external_total"]
    # exact: integer counts, not floats
    exact = (shift.external_reattributed, shift.external_total) == (planted_k, planted_n)
    # the count must come from the right incidents, not a coincidence
    mismatched = [
        e.incident
        for e in report.entries
        if label_flag(e.original_attribution) == "external"
        and e.cls.internal != (label_flag(manifest.ground_truth[e.incident]) == "internal")
    ]
    ok = exact and not mismatched and shift.external_reattributed * 100 >= 70 * shift.external_total and elapsed < 10.0
    detail = (
        f"pipeline {shift.external_reattributed}/{shift.external_total}={shift.external_to_internal_share:.4f} "
        f"planted {planted_k}/{planted_n}={planted_k / planted_n:.4f} runtime={elapsed:.2f}s (<10s) "
        f"per-incident mismatches={len(mismatched)}"
    )
    assert acceptance(3, ok, detail)


def test_criterion_4_corpus_scan(tmp_path, acceptance):
    manifest = generate_fixture("corpus", tmp_path, seed=7)
    rules = load_rules(tmp_path / "rules.jsonl")
    t0 = time.perf_counter()
    m1, s1 = scan_corpus(tmp_path / "corpus", rules, parallelism=1)
    m8, s8 = scan_corpus(tmp_path / "corpus", rules, parallelism=8)
    elapsed = time.perf_counter() - t0
    truth = {(p, f) for p, files in manifest.planted_files.items() for f in files}
    found = {(m.project, m.path) for m in m1}
    tp = len(found & truth)
    precision = tp / len(found) if found else 0.0
    recall = tp / len(truth)
    ok = (
        (s1.matched_projects, s1.matched_files) == (4, 7)
        and precision == recall == 1.0
        and m1 == m8
        and s1 == s8
        and elapsed < 5.0
    )
    detail = (
        f"projects={s1.matched_projects} files={s1.matched_files} precision={precision} recall={recall} "
        f"jobs1==jobs8={m1 == m8 and s1 == s8} runtime={elapsed:.2f}s (<5s)"
    )
    assert acceptance(4, ok, detail)


_FUNNEL_CASES = []


@settings(max_examples=1000, deadline=None, database=None)
@given(worlds(), st.sampled_from(sorted(BACKENDS)))
def _funnel_property(world, backend_name):
    graph, incident, config = world
    check_funnel_invariants(graph, incident, config, BACKENDS[backend_name])
    _FUNNEL_CASES.append(backend_name)


def test_criterion_5_funnel_invariants(acceptance):
    _FUNNEL_CASES.clear()
    try:
        _funnel_property()
        ok, err = True, ""
    except AssertionError as exc:
        ok, err = False, f" first failure: {exc!r}"
    n = len(_FUNNEL_CASES)
    ok = ok and n >= 1000
    assert acceptance(5, ok, f"{n} generated cases (>=1000), rule+chaotic backends{err}")


def _brute_force_cut(counts):
    order = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    total = sum(counts.values())
    for length in range(1, len(order) + 1):
        if 5 * sum(c for _, c in order[:length]) >= 4 * total:
            return [k for k, _ in order[:length]]
    raise AssertionError("unreachable")


def _min_cover_size(counts):
    total = sum(counts.values())
    vals = list(counts.values())
    for size in range(1, len(vals) + 1):
        if any(5 * sum(c) >= 4 * total for c in combinations(vals, size)):
            return size
    raise AssertionError("unreachable")


def test_criterion_6_pareto(acceptance):
    rng = random.Random(20240601)
    failures = []
    for case in range(100):
        n = rng.randint(1, 8)
        counts = {f"cat{j}": rng.randint(1, 50) for j in range(n)}
        cut = pareto_rank(counts).cut
        if cut != _brute_force_cut(counts) or len(cut) != _min_cover_size(counts):
            failures.append(("oracle", case))
        k = rng.randint(2, 1000)
        if set(pareto_rank({c: v * k for c, v in counts.items()}).cut) != set(cut):
            failures.append(("scale", case))
    ok = not failures
    assert acceptance(6, ok, f"100 random distributions vs brute force + scale invariance; failures={failures[:3]}")


def test_criterion_7_labels(tmp_path, acceptance):
    generate_fixture("table1", tmp_path, seed=7)
    graph, _ = load_input_dir(tmp_path)
    report = analyze(graph, None, deterministic_backend())
    text = report.to_text()
    structured = report.to_structured()
    meta = PipelineReport.from_structured(structured)
    needles = ["95%", "45%", "45.5%", "46.3%"]
    ok = (
        VALIDATION_PROXY_LABEL in text
        and VALIDATION_PROXY_LABEL in structured
        and all(item in text for item in NOT_REPRODUCED)
        and all(n in text and n in structured for n in needles)
        and meta.entries == report.entries
    )
    assert acceptance(7, ok, "validation proxy labelled; review rate and organisational metrics listed as not reproduced")
