"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend unavailable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .backends import TOKEN_ENV, RemoteBackend, RuleBackend
from .config import load_config
from .fixtures import PROFILES, generate_fixture
from .graph import GraphError, KnowledgeGraph, UnknownNode
from .ingest import RecordError, load_input_dir
from .report import PipelineReport, ReportError, analyze, reclassify
from .scanner import ScanError, load_rules, read_scan_report, scan_corpus, write_scan_report

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3

log = logging.getLogger("causeway")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_ingest(args) -> int:
    graph, report = load_input_dir(args.input_dir)
    graph.save(args.graph_out)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _backend(args, config):
    if args.backend == "rule":
        return RuleBackend(config.rules, config.symptom_taxonomy)
    if not args.backend_url:
        raise UsageError("--backend remote requires --backend-url")
    return RemoteBackend(args.backend_url, os.environ.get(TOKEN_ENV))


def _incident_id(raw: str) -> str:
    return raw if ":" in raw else f"inc:{raw}"


def cmd_analyze(args) -> int:
    if not args.all and not args.incident:
        raise UsageError("pass --incident ID (repeatable) or --all")
    config = load_config(args.config)
    graph = KnowledgeGraph.load(args.graph)
    ids = None if args.all else [_incident_id(i) for i in args.incident]
    report = analyze(graph, ids, _backend(args, config), config, jobs=args.jobs)
    _emit(report.to_structured(), args.out)
    if report.aborted:
        log.error("reasoning backend unavailable; partial analysis written")
        return EXIT_BACKEND
    return EXIT_OK


def _read_report(path: str) -> PipelineReport:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot read {path}: {exc.strerror}") from None
    return PipelineReport.from_structured(text)


def cmd_classify(args) -> int:
    report = reclassify(_read_report(args.analysis), load_config(args.config))
    _emit(report.to_structured(), args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    report = _read_report(args.analysis)
    if args.scan:
        _, report.scan = read_scan_report(args.scan)
    _emit(report.to_text() if args.format == "text" else report.to_structured(), args.out)
    return EXIT_OK


def cmd_scan(args) -> int:
    rules = load_rules(args.rules)
    matches, summary = scan_corpus(args.corpus, rules, parallelism=args.jobs)
    if args.out:
        write_scan_report(args.out, matches, summary)
    print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_genfixture(args) -> int:
    manifest = generate_fixture(args.profile, args.out_dir, seed=args.seed)
    print(manifest.to_json(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker count")

    parser = _Parser(prog="causeway", description="Knowledge-graph grounded Five Whys root cause analysis.")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--jobs", type=int, default=1, help="worker count")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="build a graph from export files")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--graph-out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", parents=[common], help="run the funnel over incidents")
    p.add_argument("--graph", required=True)
    p.add_argument("--incident", action="append", help="incident id, e.g. inc:INC10 or INC10")
    p.add_argument("--all", action="store_true")
    p.add_argument("--backend", choices=("rule", "remote"), default="rule")
    p.add_argument("--backend-url")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("classify", parents=[common], help="re-run classification over saved chains")
    p.add_argument("--analysis", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("scan", parents=[common], help="scan a project corpus with defect rules")
    p.add_argument("--corpus", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("report", parents=[common], help="render an analysis")
    p.add_argument("--analysis", required=True)
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p.add_argument("--scan", help="scan report to attach")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("gen-fixture", parents=[common], help="write a synthetic fixture")
    p.add_argument("--profile", choices=PROFILES, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_genfixture)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"causeway: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnknownNode as exc:
        print(f"causeway: unknown incident: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, RecordError, GraphError, ReportError, ScanError, ValueError, OSError) as exc:
        print(f"causeway: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
