"""Command-line entry point: ``webaudit <command> ...``.

Exit status: 0 success, 1 audit error (or a ``--fail-on`` gate tripped),
2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import yaml

from webaudit import __version__
from webaudit.checklist import (
    Category,
    Checklist,
    ChecklistError,
    RiskLevel,
    default_checklist,
    dump_checklist,
    load_checklist_file,
)
from webaudit.model import NO, YES, attestations
from webaudit.report.document import AuditDocument, DocumentError, load_document, save_document
from webaudit.report.radar import emit_radar_set, write_charts
from webaudit.report.tables import emit_compliance_matrix, emit_coverage_table
from webaudit.risk import ProfileError, compare_profiles

log = logging.getLogger("webaudit")

CHECKLIST_ENV = "WEBAUDIT_CHECKLIST"


class CliError(Exception):
    """An audit-level failure reported with exit status 1."""


def _checklist(args) -> Checklist:
    path = getattr(args, "checklist", None) or os.environ.get(CHECKLIST_ENV)
    if not path:
        return default_checklist()
    try:
        return load_checklist_file(path)
    except OSError as exc:
        raise CliError(f"cannot read checklist {path}: {exc}") from None


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")
        log.info("wrote %s", out)


def _emit_document(doc: AuditDocument, out: str | None) -> None:
    if out in (None, "-"):
        from webaudit.report.document import emit_json
        sys.stdout.write(emit_json(doc))
    else:
        save_document(doc, out)


def _attested_values(path: str) -> dict[str, str]:
    """Read an attestation file: a YAML mapping of parameter id -> value."""
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise CliError(f"cannot read attestations {path}: {exc}") from None
    if not isinstance(data, dict):
        raise CliError(f"{path}: expected a mapping of parameter id to value")
    # YAML 1.1 reads bare Yes/No as booleans; map them back to observation values.
    return {str(k): (YES if v is True else NO if v is False else str(v)) for k, v in data.items()}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_checklist(args) -> int:
    checklist = _checklist(args)
    checklist.validate()
    if args.validate:
        print(f"checklist {checklist.version}: {len(checklist)} parameters, consistent")
        return 0
    _write(dump_checklist(checklist), args.out)
    return 0


def cmd_scan(args) -> int:
    from webaudit.scanner import load_target, run_scan

    checklist = _checklist(args)
    target = load_target(args.target)
    if args.allow_destructive:
        from dataclasses import replace
        target = replace(target, destructive_allowed=True)
    report = run_scan(target, checklist, parallel=args.parallel,
                      parameters=args.only or None)
    doc = AuditDocument.from_reports(args.label or target.identity, [report], checklist,
                                     metadata={"base_url": target.base_url, "mode": "scan"})
    for pid, why in report.skipped:
        log.warning("skipped %s: %s", pid, why)
    _emit_document(doc, args.out)
    return 0


def cmd_analyze(args) -> int:
    from webaudit.static_analyzer import CodeCorpus, load_rules_file, run_static

    checklist = _checklist(args)
    corpus = CodeCorpus.from_directory(args.code_dir, declared_stack=args.stack)
    rules = load_rules_file(args.rules) if args.rules else None
    label = args.label or Path(args.code_dir).resolve().name
    report = run_static(corpus, checklist, rules=rules,
                        supplementary=not args.no_supplementary, label=label)
    doc = AuditDocument.from_reports(label, [report], checklist,
                                     metadata={"code_dir": str(args.code_dir),
                                               "stack": args.stack, "mode": "analyze"})
    _emit_document(doc, args.out)
    return 0


def _summary_text(doc: AuditDocument) -> str:
    coverage, risk = doc.coverage, doc.risk
    lines = [f"target: {doc.label}"]
    for cat in Category:
        lines.append(f"  {cat.title:<58} {coverage.cell(cat):>6}")
    lines.append("non-compliant by risk level:")
    for level in sorted(RiskLevel, reverse=True):
        lines.append(f"  {level.label:<12} {risk[level]}")
    unknown = [r.parameter_id for r in doc.profile.records if r.observation.value == "Unknown"]
    if unknown:
        lines.append(f"needs attestation ({len(unknown)}): {', '.join(unknown)}")
    return "\n".join(lines) + "\n"


def cmd_score(args) -> int:
    checklist = _checklist(args)
    docs = [load_document(p, checklist) for p in args.documents]
    extra = attestations(_attested_values(args.attest)) if args.attest else []
    if not docs and not extra:
        raise CliError("nothing to score: give at least one document or --attest")
    label = args.label or (docs[0].label if docs else Path(args.attest).stem)
    base = AuditDocument(label, list(extra), checklist)
    doc = base.merged_with(docs, label=label)
    if args.out:
        save_document(doc, args.out)
    sys.stdout.write(_summary_text(doc))
    if args.fail_on:
        level = RiskLevel.parse(args.fail_on)
        hits = doc.risk.at_or_above(level)
        if hits:
            print(f"FAIL: {hits} non-compliant parameter(s) at or above {level.label}",
                  file=sys.stderr)
            return 1
    return 0


def cmd_report(args) -> int:
    checklist = _checklist(args)
    docs = [load_document(p, checklist) for p in args.documents]
    cmp = compare_profiles([d.profile for d in docs])
    wrote_any = False
    if args.matrix:
        _write(emit_compliance_matrix(cmp, args.format), args.matrix)
        wrote_any = True
    if args.coverage:
        _write(emit_coverage_table(cmp.coverage, args.format), args.coverage)
        wrote_any = True
    if args.radar_dir:
        write_charts(emit_radar_set(cmp.risk), args.radar_dir)
        wrote_any = True
    if not wrote_any:
        _write(emit_compliance_matrix(cmp, args.format), None)
        sys.stdout.write("\n")
        _write(emit_coverage_table(cmp.coverage, args.format), None)
    return 0


def cmd_testbed(args) -> int:
    from webaudit.testbed import TestbedConfig, load_testbed_config, preset, start_testbed

    config = load_testbed_config(args.config) if args.config else (
        preset(args.preset) if args.preset else TestbedConfig())
    overrides = {}
    if args.port is not None:
        overrides["listen_port"] = args.port
    if args.host:
        overrides["listen_host"] = args.host
    config = config.with_(**overrides) if overrides else config
    handle = start_testbed(config)
    print(f"testbed listening on {handle.url}", flush=True)
    print(f"  TOTP secret: {config.totp_secret}", flush=True)
    print(f"  mail sink:   {handle.mail_url}", flush=True)
    handle.serve_forever()
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="webaudit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    levels = [lvl.name for lvl in RiskLevel]

    def with_checklist(p):
        p.add_argument("--checklist", help=f"checklist file (default: ${CHECKLIST_ENV} "
                                           "or the built-in checklist)")
        return p

    p = with_checklist(sub.add_parser("checklist", help="print or validate the checklist"))
    p.add_argument("--validate", action="store_true", help="only check consistency")
    p.add_argument("--out", help="write the checklist here instead of stdout")
    p.set_defaults(func=cmd_checklist)

    p = with_checklist(sub.add_parser("scan", help="black-box audit of a live target"))
    p.add_argument("--target", required=True, help="target configuration (YAML)")
    p.add_argument("--out", help="audit document path (default: stdout)")
    p.add_argument("--label", help="target label in the document")
    p.add_argument("--parallel", type=int, default=4, help="concurrent read-only probes")
    p.add_argument("--only", nargs="+", metavar="PARAMETER", help="probe only these parameters")
    p.add_argument("--allow-destructive", action="store_true",
                   help="permit probes that may lock accounts or register users")
    p.set_defaults(func=cmd_scan)

    p = with_checklist(sub.add_parser("analyze", help="static audit of a source tree"))
    p.add_argument("--code-dir", required=True)
    p.add_argument("--rules", help="pattern rule file replacing the built-in rules")
    p.add_argument("--stack", default="php-mysql", help="declared stack tag")
    p.add_argument("--no-supplementary", action="store_true",
                   help="only analyse the Static-mode parameters")
    p.add_argument("--label")
    p.add_argument("--out", help="audit document path (default: stdout)")
    p.set_defaults(func=cmd_analyze)

    p = with_checklist(sub.add_parser("score", help="merge documents and score them"))
    p.add_argument("documents", nargs="*", help="audit documents to merge")
    p.add_argument("--attest", help="YAML mapping of parameter id to attested value")
    p.add_argument("--label")
    p.add_argument("--out", help="write the merged document here")
    p.add_argument("--fail-on", type=str.strip, choices=levels, metavar="LEVEL",
                   help=f"exit 1 if anything non-compliant is at or above LEVEL ({', '.join(levels)})")
    p.set_defaults(func=cmd_score)

    p = with_checklist(sub.add_parser("report", help="tables and charts from documents"))
    p.add_argument("documents", nargs="+")
    p.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p.add_argument("--matrix", help="compliance matrix output file")
    p.add_argument("--coverage", help="coverage table output file")
    p.add_argument("--radar-dir", help="directory for per-risk-level SVG charts and sidecars")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("testbed", help="run the fixture web application")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--preset", help="hardened, vulnerable, chatgpt, deepseek, claude, gemini, grok")
    g.add_argument("--config", help="YAML toggle file")
    p.add_argument("--port", type=int)
    p.add_argument("--host")
    p.set_defaults(func=cmd_testbed)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: --help/--version exit 0, usage errors exit 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    from webaudit.scanner import ConfigError, ConnectivityError
    from webaudit.static_analyzer import CorpusError, RuleError
    from webaudit.testbed import TestbedConfigError, TestbedError

    audit_errors = (CliError, ChecklistError, DocumentError, ProfileError, ConfigError,
                    ConnectivityError, CorpusError, RuleError, TestbedConfigError, TestbedError)
    try:
        return args.func(args)
    except audit_errors as exc:
        print(f"webaudit {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
