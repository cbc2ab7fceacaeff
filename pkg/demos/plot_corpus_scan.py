"""
Scanning fifty projects for the same defect
===========================================

Once a root cause is pinned to code, the next question is where else the
same pattern lives. The corpus fixture plants seven defective DAO files in
four projects, plus decoys: half-matching Java, SQL files with both strings,
and binary blobs.
"""

import tempfile
import time
from pathlib import Path

from causeway import generate_fixture
from causeway.scanner import load_rules, scan_corpus

workdir = Path(tempfile.mkdtemp(prefix="corpus-"))
manifest = generate_fixture("corpus", workdir, seed=7)
rules = load_rules(workdir / "rules.jsonl")
print(rules[0].to_dict())

for jobs in (1, 8):
    t0 = time.perf_counter()
    matches, summary = scan_corpus(workdir / "corpus", rules, parallelism=jobs)
    print(f"jobs={jobs}: {summary.matched_projects}/{summary.total_projects} projects,"
          f" {summary.matched_files} files, {summary.skipped_binary} binary skipped,"
          f" {time.perf_counter() - t0:.3f}s")

for m in matches:
    print(f"  {m.project}/{m.path}  lines {list(m.lines)}")

truth = {(p, f) for p, files in manifest.planted_files.items() for f in files}
found = {(m.project, m.path) for m in matches}
print("matches planted set exactly:", found == truth)
