"""Knowledge-graph grounded Five Whys root cause analysis."""

from .backends import RemoteBackend, RuleBackend, deterministic_backend, remote_backend
from .classify import (
    AttributionShift,
    ClassifiedCause,
    ParetoCut,
    RecurrencePattern,
    RootCauseClass,
    attribution_shift,
    classify,
    detect_recurrence,
    pareto_rank,
    validate_against_history,
)
from .config import FunnelConfig, load_config
from .fixtures import FixtureManifest, generate_fixture
from .funnel import (
    BackendUnavailable,
    EvidenceRef,
    ReasoningRequest,
    ReasoningResponse,
    SymptomSignature,
    Termination,
    WhyChain,
    WhyStep,
    extract_symptoms,
    next_why,
    retrieve_evidence,
    run_funnel,
)
from .graph import Edge, EdgeKind, KnowledgeGraph, Node, NodeKind
from .ingest import (
    ChangeRecord,
    CodeManifestRecord,
    DeploymentRecord,
    IncidentRecord,
    IngestReport,
    build_graph,
    load_input_dir,
    parse_records,
)
from .report import PipelineReport, analyze, reclassify
from .scanner import ScanMatch, ScanRule, ScanSummary, compile_rule, rule_from_chain, scan_corpus

__version__ = "0.1.0"
