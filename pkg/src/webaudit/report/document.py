"""The audit document: observations plus their scoring, in one canonical JSON text.

A document embeds the compliance records, the coverage summary and the risk
profile, but they are always re-derived from the observations on load; a
document whose embedded scores disagree is rejected as tampered.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Mapping

from webaudit import __version__
from webaudit.checklist import Category, Checklist, RiskLevel, default_checklist
from webaudit.model import Evidence, Observation, ProbeReport, Source, utcnow
from webaudit.risk import (
    AuditProfile,
    CoverageSummary,
    RiskProfile,
    build_profile,
    coverage_summary,
    risk_profile,
)

log = logging.getLogger(__name__)

SCHEMA = "webaudit.audit/1"


class DocumentError(ValueError):
    """Malformed, inconsistent or tampered audit document."""


def _ts(value: datetime | None) -> str | None:
    return value.isoformat() if value is not None else None


def _parse_ts(value: Any, what: str) -> datetime | None:
    if value is None:
        return None
    try:
        return datetime.fromisoformat(value)
    except (TypeError, ValueError):
        raise DocumentError(f"{what}: bad timestamp {value!r}") from None


@dataclass
class AuditDocument:
    """Everything known about one audited target.

    ``observations`` may hold several observations for one parameter when
    they come from different sources; scoring merges them (Dynamic over
    Static over Manual).
    """

    label: str
    observations: list[Observation]
    checklist: Checklist = field(default_factory=default_checklist, repr=False)
    metadata: dict[str, str] = field(default_factory=dict)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    started_at: datetime | None = None
    finished_at: datetime | None = None
    tool_version: str = __version__

    def __post_init__(self):
        order = {pid: i for i, pid in enumerate(self.checklist.ids)}
        unknown = [o.parameter_id for o in self.observations if o.parameter_id not in order]
        if unknown:
            raise DocumentError(f"observations for unknown parameters: {', '.join(unknown)}")
        # Canonical order: checklist order, then source precedence.
        self.observations = sorted(self.observations,
                                   key=lambda o: (order[o.parameter_id], o.source.precedence))
        self.skipped = sorted((str(p), str(r)) for p, r in self.skipped)
        self.metadata = {str(k): str(v) for k, v in self.metadata.items()}

    @property
    def profile(self) -> AuditProfile:
        try:
            return build_profile(self.label, self.observations, self.checklist)
        except ValueError as exc:
            raise DocumentError(str(exc)) from None

    @property
    def coverage(self) -> CoverageSummary:
        return coverage_summary(self.profile)

    @property
    def risk(self) -> RiskProfile:
        return risk_profile(self.profile)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AuditDocument):
            return NotImplemented
        return (self.label, self.metadata, self.skipped, self.started_at, self.finished_at,
                self.tool_version, self.checklist.version, self.checklist.ids,
                [_obs_key(o) for o in self.observations]) == (
                other.label, other.metadata, other.skipped, other.started_at,
                other.finished_at, other.tool_version, other.checklist.version,
                other.checklist.ids, [_obs_key(o) for o in other.observations])

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_reports(cls, label: str, reports: Iterable[ProbeReport],
                     checklist: Checklist | None = None,
                     extra: Iterable[Observation] = (),
                     metadata: Mapping[str, str] | None = None) -> "AuditDocument":
        """Combine scan/analysis reports (and e.g. attestations) into one document."""
        reports = list(reports)
        observations = [o for r in reports for o in r.observations] + list(extra)
        covered = {o.parameter_id for o in observations}
        skipped = [(p, why) for r in reports for p, why in r.skipped if p not in covered]
        starts = [r.started_at for r in reports if r.started_at]
        ends = [r.finished_at for r in reports if r.finished_at]
        return cls(label, observations, checklist or default_checklist(),
                   metadata=dict(metadata or {}), skipped=_dedupe(skipped),
                   started_at=min(starts) if starts else None,
                   finished_at=max(ends) if ends else None)

    @classmethod
    def from_values(cls, label: str, values: Mapping[str, str],
                    checklist: Checklist | None = None, source: Source = Source.Manual,
                    note: str = "transcribed", **kwargs) -> "AuditDocument":
        """A document from a plain parameter-id -> value table (attested values)."""
        obs = [Observation(pid, str(v), source, note=note) for pid, v in values.items()]
        return cls(label, obs, checklist or default_checklist(), **kwargs)

    def merged_with(self, others: Iterable["AuditDocument"], label: str | None = None
                    ) -> "AuditDocument":
        docs = [self, *others]
        for d in docs[1:]:
            if d.checklist.ids != self.checklist.ids or d.checklist.version != self.checklist.version:
                raise DocumentError(f"document {d.label!r} uses a different checklist")
        observations = [o for d in docs for o in d.observations]
        covered = {o.parameter_id for o in observations}
        skipped = [s for d in docs for s in d.skipped if s[0] not in covered]
        meta: dict[str, str] = {}
        for d in docs:
            meta.update(d.metadata)
        starts = [d.started_at for d in docs if d.started_at]
        ends = [d.finished_at for d in docs if d.finished_at]
        return AuditDocument(label or self.label, observations, self.checklist, meta,
                             _dedupe(skipped), min(starts) if starts else None,
                             max(ends) if ends else None)

    # -- serialization --------------------------------------------------------

    def as_dict(self) -> dict[str, Any]:
        profile = self.profile
        coverage = coverage_summary(profile)
        risk = risk_profile(profile)
        return {
            "schema": SCHEMA,
            "tool_version": self.tool_version,
            "checklist_version": self.checklist.version,
            "target": {"label": self.label, "metadata": self.metadata},
            "started_at": _ts(self.started_at),
            "finished_at": _ts(self.finished_at),
            "observations": [_obs_to_dict(o) for o in self.observations],
            "skipped": [{"parameter_id": p, "reason": r} for p, r in self.skipped],
            "records": [
                {"parameter_id": r.parameter_id, "value": r.observation.value,
                 "source": r.observation.source.value, "compliant": r.compliant.value,
                 "rationale": r.rationale}
                for r in profile.records
            ],
            "coverage": {c.name: list(coverage.per_category[c]) for c in Category},
            "risk_profile": {lvl.name: risk.counts[lvl] for lvl in RiskLevel},
        }


def _obs_key(o: Observation) -> tuple:
    return o.key() + (o.captured_at,)


def _dedupe(pairs: list[tuple[str, str]]) -> list[tuple[str, str]]:
    seen: dict[str, str] = {}
    for pid, why in pairs:
        seen.setdefault(pid, why)
    return list(seen.items())


def _obs_to_dict(o: Observation) -> dict[str, Any]:
    return {
        "parameter_id": o.parameter_id,
        "value": o.value,
        "source": o.source.value,
        "evidence": [e.as_dict() for e in o.evidence],
        "note": o.note,
        "captured_at": _ts(o.captured_at),
    }


def _obs_from_dict(d: Mapping[str, Any]) -> Observation:
    try:
        return Observation(
            parameter_id=d["parameter_id"], value=d["value"], source=Source(d["source"]),
            evidence=tuple(Evidence(e["request"], e["response"]) for e in d.get("evidence", [])),
            note=d.get("note", ""),
            captured_at=_parse_ts(d.get("captured_at"), "observation") or utcnow(),
        )
    except (KeyError, TypeError) as exc:
        raise DocumentError(f"malformed observation {dict(d)!r}: {exc}") from None
    except ValueError as exc:
        raise DocumentError(f"invalid observation: {exc}") from None


def emit_json(doc: AuditDocument) -> str:
    """Canonical text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(doc.as_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def parse_json(text: str, checklist: Checklist | None = None) -> AuditDocument:
    """Load a document and verify its embedded scores against a fresh re-scoring."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"not a JSON document: {exc}") from None
    if not isinstance(data, dict) or data.get("schema") != SCHEMA:
        raise DocumentError(f"unsupported document schema {data.get('schema') if isinstance(data, dict) else None!r}")
    checklist = checklist or default_checklist()
    if data.get("checklist_version") != checklist.version:
        raise DocumentError(f"document scored against checklist {data.get('checklist_version')!r}, "
                            f"loaded checklist is {checklist.version!r}")
    try:
        target = data["target"]
        doc = AuditDocument(
            label=target["label"],
            observations=[_obs_from_dict(o) for o in data["observations"]],
            checklist=checklist,
            metadata=dict(target.get("metadata", {})),
            skipped=[(s["parameter_id"], s["reason"]) for s in data.get("skipped", [])],
            started_at=_parse_ts(data.get("started_at"), "started_at"),
            finished_at=_parse_ts(data.get("finished_at"), "finished_at"),
            tool_version=data["tool_version"],
        )
    except (KeyError, TypeError) as exc:
        raise DocumentError(f"malformed document: missing {exc}") from None
    fresh = doc.as_dict()
    for key in ("records", "coverage", "risk_profile"):
        if data.get(key) != fresh[key]:
            raise DocumentError(f"embedded {key} does not match the observations "
                                "(document edited after scoring?)")
    return doc


def save_document(doc: AuditDocument, path: str | Path) -> None:
    Path(path).write_text(emit_json(doc), encoding="utf-8")
    log.info("wrote %s", path)


def load_document(path: str | Path, checklist: Checklist | None = None) -> AuditDocument:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from None
    try:
        return parse_json(text, checklist)
    except DocumentError as exc:
        raise DocumentError(f"{path}: {exc}") from None
