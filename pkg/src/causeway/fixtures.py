"""Synthetic fixture generator with planted ground truth.

Profiles:
  table1         eleven incidents in four recurring symptom groups
  fig4           one unreachable-service incident fixed by an automation change
  reattribution  100 incidents, most originally-external ones planted with
                 internal causes reachable through the graph
  corpus         50-project source tree with 7 planted defect files

Every profile writes the four ingestion files plus ``fixture.json`` (the
manifest holding the expected results). Output is byte-identical per seed.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .ingest import INPUT_FILES

PROFILES = ("table1", "fig4", "reattribution", "corpus")
FIXTURE_MANIFEST = "fixture.json"
BASE_TS = 1_700_000_000


@dataclass
class FixtureManifest:
    profile: str
    seed: int
    incident_count: int = 0
    # incident node id -> planted root-cause class label
    ground_truth: dict[str, str] = field(default_factory=dict)
    # project -> planted defect file paths (corpus profile)
    planted_files: dict[str, list[str]] = field(default_factory=dict)
    expected: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path: str | Path) -> "FixtureManifest":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def _jsonl(rows: list[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in rows)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_inputs(out: Path, incidents=(), changes=(), deployments=(), manifest=()) -> None:
    _write(out / INPUT_FILES["incident"], _jsonl(list(incidents)))
    _write(out / INPUT_FILES["change"], _jsonl(list(changes)))
    _write(out / INPUT_FILES["deployment"], _jsonl(list(deployments)))
    _write(out / INPUT_FILES["manifest"], _jsonl(list(manifest)))


def _sha(text: str | bytes) -> str:
    data = text.encode("utf-8") if isinstance(text, str) else text
    return hashlib.sha256(data).hexdigest()[:16]


# -- eleven-incident recurrence set ---------------------------------------------

RECURRENCE_INCIDENTS = (
    ("INC1", "db-cluster", "Database deadlock between posting and settlement jobs; ineffective deadlock detection left unresolved locks", "vendor-external"),
    ("INC2", "db-cluster", "Deadlock on account balance table, unresolved locks caused system delays", "process-management"),
    ("INC3", "portal", "Customers unable to log in after password reset", "unknown"),
    ("INC4", "portal", "Expired certificate on payment gateway endpoint", "process-management"),
    ("INC5", "file-store", "Storage capacity exhaustion on reporting volume; disk full", "vendor-external"),
    ("INC6", "file-store", "Inadequate capacity monitoring, tablespace ran out of space", "process-management"),
    ("INC7", "file-store", "Disk full on archive storage, service disruption", "infrastructure-capacity"),
    ("INC8", "backup-vault", "Nightly backup job failed; disaster recovery copy missing", "vendor-external"),
    ("INC9", "backup-vault", "Backup failure during weekend window affected disaster recovery", "process-management"),
    ("INC10", "db-cluster", "Long-running SQL query exhausted connection pool", "vendor-external"),
    ("INC11", "db-cluster", "Inefficient query optimization: long-running SQL degraded performance", "process-management"),
)

RECURRENCE_GROUPS = {
    "deadlock": ["inc:INC1", "inc:INC2"],
    "storage-exhaustion": ["inc:INC5", "inc:INC6", "inc:INC7"],
    "backup-failure": ["inc:INC8", "inc:INC9"],
    "long-running-sql": ["inc:INC10", "inc:INC11"],
}


def _recurrence_set(out: Path, seed: int) -> FixtureManifest:
    rows = [
        {"id": iid, "opened_ts": BASE_TS + n * 3600, "service": svc, "description": desc, "original_attribution": orig}
        for n, (iid, svc, desc, orig) in enumerate(RECURRENCE_INCIDENTS)
    ]
    _write_inputs(out, rows)
    return FixtureManifest(
        "table1",
        seed,
        incident_count=len(rows),
        expected={"recurrence": RECURRENCE_GROUPS, "nodes": 15, "affects_edges": 11, "services": 4},
    )


# -- payments outage case ----------------------------------------------------------

PAYMENTS_INCIDENT = "I1"
PAYMENTS_CHANGE = "CR-1"
PAYMENTS_FILE = "proj-a/deploy.sh"


def _payments_case(out: Path, seed: int) -> FixtureManifest:
    incidents = [
        {
            "id": PAYMENTS_INCIDENT,
            "opened_ts": BASE_TS,
            "service": "payments",
            "description": "Payments service unreachable; client requests delayed and timing out",
            "original_attribution": "vendor-external",
            "resolution_note": "service restarted by hand",
            "resolved_by_change": PAYMENTS_CHANGE,
        }
    ]
    changes = [
        {
            "id": PAYMENTS_CHANGE,
            "created_ts": BASE_TS + 7200,
            "description": "add automation for restart of payments service",
            "touched_files": [PAYMENTS_FILE],
            "linked_incidents": [PAYMENTS_INCIDENT],
        }
    ]
    manifest = [{"project": "proj-a", "path": "deploy.sh", "content_hash": _sha("#!/bin/sh\n")}]
    _write_inputs(out, incidents, changes, (), manifest)
    return FixtureManifest(
        "fig4",
        seed,
        incident_count=1,
        ground_truth={f"inc:{PAYMENTS_INCIDENT}": "automation-gap"},
        expected={
            "terminal_cause": "lack of automation",
            "termination": "ActionableCauseFound",
            "final_citation": f"chg:{PAYMENTS_CHANGE}",
            "nodes": 5,
            "edges": 4,
        },
    )


# -- reattribution ----------------------------------------------------------------

SERVICES = (
    "payments", "ledger", "cards", "loans", "fx", "treasury", "clearing", "onboarding", "kyc", "statements",
    "alerts", "limits", "pricing", "custody", "lending", "mortgages", "savings", "remittance", "billing", "rewards",
)
_SYMPTOMS = (
    "{svc} service unreachable during business hours",
    "{svc} requests failing with timeouts",
    "{svc} batch run aborted before completion",
    "{svc} responses slow and intermittently failing",
)
_BUGS = ("null handling", "retry loop", "connection leak", "rounding error", "date parsing")
_MODULES = ("Settlement", "Posting", "Gateway", "Scheduler", "Mapper")
_TASKS = ("failover", "restart", "certificate rotation", "log cleanup")
_RESOURCES = ("storage", "memory", "cpu")
_COMPONENTS = ("gateway", "feed", "connector")
_INTERNAL = ("internal-code-defect", "automation-gap", "infrastructure-capacity")
_EXTERNAL = ("process-management", "vendor-external")


def _planted_change(truth: str, svc: str, rng: random.Random) -> tuple[str, list[str]]:
    if truth == "internal-code-defect":
        module = rng.choice(_MODULES)
        return f"fix {rng.choice(_BUGS)} in {svc} {module.lower()} module", [f"{svc}-core/src/{svc}/{module}.java"]
    if truth == "automation-gap":
        task = rng.choice(_TASKS)
        return f"add automation for {svc} {task}", [f"{svc}-ops/jobs/{task.replace(' ', '_')}.yaml"]
    if truth == "infrastructure-capacity":
        return f"increase {svc} {rng.choice(_RESOURCES)} capacity", []
    if truth == "vendor-external":
        return f"apply vendor hotfix for {svc} {rng.choice(_COMPONENTS)}", []
    if truth == "process-management":
        return f"revise release approval process for {svc}", []
    raise ValueError(truth)


def _reattribution(out: Path, seed: int, n: int = 100) -> FixtureManifest:
    rng = random.Random(seed)
    n_ext = rng.randint(50, 70)
    floor = math.ceil(0.7 * n_ext)
    k = rng.randint(floor, n_ext - 2)
    order = list(range(n))
    rng.shuffle(order)
    ext_slots = set(order[:n_ext])
    planted_internal = set(order[:k])

    incidents, changes, deployments, manifest = [], [], [], []
    truth_map: dict[str, str] = {}
    for i in range(n):
        iid = f"R{i + 1:03d}"
        svc = SERVICES[i % len(SERVICES)]
        if i in ext_slots:
            original = rng.choice(_EXTERNAL)
            truth = rng.choice(_INTERNAL) if i in planted_internal else rng.choice(_EXTERNAL)
        else:
            original = rng.choice(_INTERNAL + ("unknown",))
            truth = rng.choice(_INTERNAL + _EXTERNAL)
        desc = rng.choice(_SYMPTOMS).format(svc=svc)
        change_text, files = _planted_change(truth, svc, rng)
        cid = f"CR-{iid}"
        ts = BASE_TS + i * 86_400
        incidents.append(
            {"id": iid, "opened_ts": ts, "service": svc, "description": desc, "original_attribution": original, "resolved_by_change": cid}
        )
        changes.append({"id": cid, "created_ts": ts + 3600, "description": change_text, "touched_files": files, "linked_incidents": [iid]})
        deployments.append({"id": f"D-{iid}", "ts": ts + 7200, "change_id": cid, "environment": "prod"})
        for f in files:
            project, _, path = f.partition("/")
            manifest.append({"project": project, "path": path, "content_hash": _sha(f)})
        truth_map[f"inc:{iid}"] = truth

    _write_inputs(out, incidents, changes, deployments, manifest)
    return FixtureManifest(
        "reattribution",
        seed,
        incident_count=n,
        ground_truth=truth_map,
        expected={
            "external_total": n_ext,
            "external_planted_internal": k,
            "planted_share": k / n_ext,
        },
    )


# -- corpus -----------------------------------------------------------------------

CORPUS_RULE = {
    "id": "select-star-dao",
    "description": "unbounded SELECT * executed from Java data-access code",
    "mode": "all",
    "glob": "**/*.java",
    "matchers": [{"kind": "literal", "pattern": "SELECT * FROM"}, {"kind": "literal", "pattern": "executeQuery("}],
}

_CLEAN_JAVA = """package {pkg};

public class {cls} {{
    public int run(int x) {{
        return x + {n};
    }}
}}
"""

_DEFECT_JAVA = """package {pkg}.dao;

import java.sql.*;

public class {cls} {{
    public ResultSet load(Connection c) throws SQLException {{
        Statement st = c.createStatement();
        String sql = "SELECT * FROM {table}";
        return st.executeQuery(sql);
    }}
}}
"""

_HALF_JAVA = """package {pkg}.dao;

public class {cls} {{
    // legacy note: SELECT * FROM {table} was removed
    public String table() {{
        return "{table}";
    }}
}}
"""

_DECOY_SQL = "-- executeQuery( is called from the app\nSELECT * FROM {table};\n"


def _corpus(out: Path, seed: int, n_projects: int = 50, n_defect_projects: int = 4, n_defect_files: int = 7) -> FixtureManifest:
    rng = random.Random(seed)
    corpus = out / "corpus"
    projects = [f"proj-{i:03d}" for i in range(n_projects)]
    defect_projects = sorted(rng.sample(projects, n_defect_projects))
    # every defect project gets at least one planted file
    per_project = [1] * n_defect_projects
    for _ in range(n_defect_files - n_defect_projects):
        per_project[rng.randrange(n_defect_projects)] += 1
    planted: dict[str, list[str]] = {}
    tables = ("ACCOUNTS", "ORDERS", "PAYMENTS", "TRADES", "LIMITS")
    manifest_rows = []

    def emit(project: str, rel: str, content: str | bytes) -> None:
        path = corpus / project / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(content, bytes):
            path.write_bytes(content)
        else:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(content)
        manifest_rows.append({"project": project, "path": rel, "content_hash": _sha(content)})

    for idx, project in enumerate(projects):
        pkg = f"com.bank.p{idx:03d}"
        emit(project, "README.md", f"# {project}\n\nService code for {project}.\n")
        emit(project, "src/App.java", _CLEAN_JAVA.format(pkg=pkg, cls="App", n=idx))
        emit(project, "scripts/run.sh", "#!/bin/sh\nexec java -jar app.jar\n")
        decoy = rng.random()
        table = rng.choice(tables)
        if decoy < 0.3:
            emit(project, "src/dao/LegacyDao.java", _HALF_JAVA.format(pkg=pkg, cls="LegacyDao", table=table))
        elif decoy < 0.5:
            emit(project, "sql/report.sql", _DECOY_SQL.format(table=table))
        elif decoy < 0.6:
            blob = b"\x00\x01JAR" + _DEFECT_JAVA.format(pkg=pkg, cls="Blob", table=table).encode()
            emit(project, "lib/Blob.java", blob)
        if project in defect_projects:
            count = per_project[defect_projects.index(project)]
            for j in range(count):
                rel = f"src/dao/{rng.choice(tables).title()}Dao{j}.java"
                while rel in planted.get(project, []):
                    rel = rel.replace(".java", "x.java")
                emit(project, rel, _DEFECT_JAVA.format(pkg=pkg, cls=Path(rel).stem, table=rng.choice(tables)))
                planted.setdefault(project, []).append(rel)

    _write(out / "rules.jsonl", _jsonl([CORPUS_RULE]))
    _write_inputs(out, manifest=sorted(manifest_rows, key=lambda r: (r["project"], r["path"])))
    return FixtureManifest(
        "corpus",
        seed,
        planted_files={p: sorted(v) for p, v in sorted(planted.items())},
        expected={
            "total_projects": n_projects,
            "matched_projects": n_defect_projects,
            "matched_files": n_defect_files,
            "rule": CORPUS_RULE["id"],
            "reference_scale": {"total_projects": 5535, "same_defect_projects": 226, "same_defect_files": 415},
        },
    )


_GENERATORS = {"table1": _recurrence_set, "fig4": _payments_case, "reattribution": _reattribution, "corpus": _corpus}


def generate_fixture(profile: str, out_dir: str | Path, seed: int = 0) -> FixtureManifest:
    """Write a fixture for ``profile`` into ``out_dir`` and return its manifest."""
    if profile not in _GENERATORS:
        raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _GENERATORS[profile](out, seed)
    _write(out / FIXTURE_MANIFEST, manifest.to_json())
    return manifest
