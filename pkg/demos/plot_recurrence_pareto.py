"""
Recurring symptoms and the 80/20 cut
====================================

Eleven incidents, four of them about full disks. Symptom extraction groups
incidents sharing a category; the Pareto cut keeps the smallest set of
groups covering at least 80% of recurring incidents.
"""

import tempfile

from causeway import FunnelConfig, generate_fixture, load_input_dir
from causeway.classify import detect_recurrence, pareto_rank
from causeway.funnel import extract_symptoms
from causeway.graph import NodeKind
from causeway.ingest import incident_from_node

workdir = tempfile.mkdtemp(prefix="recurrence-")
generate_fixture("table1", workdir)
graph, _ = load_input_dir(workdir)

taxonomy = FunnelConfig().symptom_taxonomy
signatures = []
for node in graph.nodes(NodeKind.INCIDENT):
    sig = extract_symptoms(incident_from_node(node), taxonomy)
    signatures.append((node.id, sig))
    print(f"{node.id:<10} {sig.category:<20} {', '.join(sig.tags)}")

patterns = detect_recurrence(signatures)
print()
for p in patterns:
    print(f"{p.category:<20} x{p.count}  {', '.join(p.incidents)}")

# 3/9, 5/9, 7/9 is still short of 80%, so every group lands in the cut
cut = pareto_rank(patterns)
print()
for category, count, cumulative in cut.ranked:
    marker = "*" if category in cut.cut else " "
    print(f"{marker} {category:<20} {count:>3} {cumulative:>7.1%}")

# a skewed distribution shows the cut doing real work
print(pareto_rank({"deadlock": 8, "backup-failure": 1, "long-running-sql": 1}).cut)
