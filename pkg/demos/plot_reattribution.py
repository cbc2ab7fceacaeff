"""
How much of "external" was really internal?
============================================

One hundred incidents, many originally blamed on vendors or process. The
generator plants internal causes (code defects, missing automation, capacity)
behind most of them. The full pipeline should recover exactly the planted
share, and the report shows the shift matrix.
"""

import tempfile

from causeway import analyze, deterministic_backend, generate_fixture, load_input_dir

workdir = tempfile.mkdtemp(prefix="reattr-")
manifest = generate_fixture("reattribution", workdir, seed=7)
graph, _ = load_input_dir(workdir)

report = analyze(graph, None, deterministic_backend(), jobs=4)
shift = report.shift

planted = manifest.expected
print(f"planted:  {planted['external_planted_internal']}/{planted['external_total']}")
print(f"pipeline: {shift.external_reattributed}/{shift.external_total}"
      f" = {shift.external_to_internal_share:.1%}")

# the text report: chains, shift matrix, Pareto, and what is not reproduced
text = report.to_text()
start = text.index("== Attribution shift")
print(text[start:])
