"""
Replaying a single incident through the why-funnel
===================================================

A payments service goes unreachable. The team blamed a vendor. We build a
small graph, run the funnel with the deterministic rule backend and watch
it walk from the symptom to the change request that actually fixed it.
"""

import tempfile

from causeway import deterministic_backend, generate_fixture, load_input_dir, run_funnel
from causeway.classify import classify
from causeway.ingest import incident_from_node
from causeway.scanner import rule_from_chain

# write the fixture and ingest it
workdir = tempfile.mkdtemp(prefix="payments-")
generate_fixture("fig4", workdir)
graph, ingest_report = load_input_dir(workdir)
print(f"{len(graph)} nodes, {len(graph.edges())} edges")

# what does the incident's neighbourhood look like?
for node_id, hop in graph.k_hop("inc:I1", 2):
    print(f"  hop {hop}: {node_id}")

# run the funnel
incident = incident_from_node(graph.node("inc:I1"))
chain = run_funnel(graph, incident, deterministic_backend())
for step in chain.steps:
    print(f"depth {step.depth}: {step.question}")
    print(f"    -> {step.cause}   cites {list(step.cited)}")
print("termination:", chain.termination.value)

# classify it. the original label was vendor-external
cls, rationale = classify(chain)
print(f"class: {cls.value}  ({rationale})")
print(f"originally: {incident.original_attribution}")

# draft a scan rule from the cause; a human has to confirm it before use
draft = rule_from_chain(chain, graph)
print("draft rule:", draft.to_dict(), "confirmed:", draft.confirmed)
