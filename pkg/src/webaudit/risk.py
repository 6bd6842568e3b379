"""Compliance judgments, per-category coverage and per-risk-level exposure."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from webaudit.checklist import Category, Checklist, Kind, ParameterSpec, Polarity, RiskLevel
from webaudit.model import (
    BOOLEAN_VALUES,
    NA,
    NO,
    NON_FULFILLING,
    UNKNOWN,
    YES,
    Observation,
    ObservationError,
    Source,
)


class Compliance(enum.Enum):
    Compliant = "Compliant"
    NonCompliant = "NonCompliant"


class ProfileError(ValueError):
    pass


def judge_compliance(spec: ParameterSpec, value: str) -> Compliance:
    """Decide whether ``value`` fulfils ``spec``.

    Unknown and NA never fulfil a parameter. Categorical parameters accept any
    value in ``spec.accepted_values``; with no accepted list, any value other
    than No/NA/Unknown counts.
    """
    if spec.kind is Kind.Boolean:
        if value not in BOOLEAN_VALUES:
            raise ObservationError(f"{spec.id}: categorical value {value!r} on a Boolean parameter")
        wanted = YES if spec.polarity is Polarity.DesiredYes else NO
        return Compliance.Compliant if value == wanted else Compliance.NonCompliant
    if value in NON_FULFILLING:
        return Compliance.NonCompliant
    if spec.accepted_values and value not in spec.accepted_values:
        return Compliance.NonCompliant
    return Compliance.Compliant


def _rationale(spec: ParameterSpec, obs: Observation, verdict: Compliance) -> str:
    if obs.value == NA:
        return "dependent feature absent"
    if obs.value == UNKNOWN:
        return obs.note or "undecided; needs attestation"
    if spec.kind is Kind.Categorical:
        if verdict is Compliance.Compliant:
            return f"implemented as {obs.value}"
        if obs.value == NO:
            return "not implemented"
        return f"{obs.value} is not an accepted implementation"
    if spec.polarity is Polarity.DesiredNo:
        return "weakness not observed" if verdict is Compliance.Compliant else "weakness observed"
    return "control present" if verdict is Compliance.Compliant else "control missing"


@dataclass(frozen=True)
class ComplianceRecord:
    parameter_id: str
    observation: Observation
    compliant: Compliance
    rationale: str

    @property
    def is_compliant(self) -> bool:
        return self.compliant is Compliance.Compliant


@dataclass
class AuditProfile:
    target_label: str
    records: list[ComplianceRecord]
    checklist: Checklist = field(repr=False)

    def record(self, parameter_id: str) -> ComplianceRecord:
        for r in self.records:
            if r.parameter_id == parameter_id:
                return r
        raise KeyError(parameter_id)

    def values(self) -> dict[str, str]:
        return {r.parameter_id: r.observation.value for r in self.records}

    @property
    def non_compliant(self) -> list[ComplianceRecord]:
        return [r for r in self.records if not r.is_compliant]


@dataclass(frozen=True)
class CoverageSummary:
    per_category: dict[Category, tuple[int, int]]

    def cell(self, category: Category) -> str:
        got, total = self.per_category[category]
        return f"{got}/{total}"

    @property
    def fulfilled(self) -> int:
        return sum(got for got, _ in self.per_category.values())


@dataclass(frozen=True)
class RiskProfile:
    counts: dict[RiskLevel, int]

    def __getitem__(self, level: RiskLevel) -> int:
        return self.counts[level]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def at_or_above(self, level: RiskLevel) -> int:
        return sum(n for lvl, n in self.counts.items() if lvl >= level)


def merge_observations(observations: Iterable[Observation]) -> dict[str, Observation]:
    """Pick one observation per parameter: Dynamic over Static over Manual."""
    seen: dict[tuple[str, Source], Observation] = {}
    chosen: dict[str, Observation] = {}
    for obs in observations:
        key = (obs.parameter_id, obs.source)
        if key in seen:
            raise ProfileError(
                f"duplicate {obs.source.value} observation for {obs.parameter_id}")
        seen[key] = obs
        current = chosen.get(obs.parameter_id)
        if current is None or obs.source.precedence < current.source.precedence:
            chosen[obs.parameter_id] = obs
    return chosen


def build_profile(label: str, observations: Iterable[Observation],
                  checklist: Checklist) -> AuditProfile:
    observations = list(observations)
    for obs in observations:
        if obs.parameter_id not in checklist:
            raise ProfileError(f"observation for unknown parameter {obs.parameter_id!r}")
    chosen = merge_observations(observations)
    records = []
    for spec in checklist:
        obs = chosen.get(spec.id)
        if obs is None:
            obs = Observation(spec.id, UNKNOWN, Source.Manual, note="not observed")
        verdict = judge_compliance(spec, obs.value)
        records.append(ComplianceRecord(spec.id, obs, verdict, _rationale(spec, obs, verdict)))
    return AuditProfile(label, records, checklist)


def coverage_summary(profile: AuditProfile) -> CoverageSummary:
    checklist = profile.checklist
    per: dict[Category, list[int]] = {c: [0, 0] for c in Category}
    for rec in profile.records:
        cell = per[checklist[rec.parameter_id].category]
        cell[1] += 1
        cell[0] += rec.is_compliant
    return CoverageSummary({c: (got, total) for c, (got, total) in per.items()})


def risk_profile(profile: AuditProfile, checklist: Checklist | None = None) -> RiskProfile:
    checklist = checklist or profile.checklist
    counts = {level: 0 for level in RiskLevel}
    for rec in profile.non_compliant:
        counts[checklist[rec.parameter_id].risk] += 1
    return RiskProfile(counts)


@dataclass
class Comparison:
    """Row-per-parameter, column-per-target view of several audits."""

    checklist: Checklist
    labels: list[str]
    matrix: dict[str, list[str]]
    coverage: dict[str, CoverageSummary]
    risk: dict[str, RiskProfile]

    def rows(self):
        for spec in self.checklist:
            yield spec, self.matrix[spec.id]


def compare_profiles(profiles: list[AuditProfile]) -> Comparison:
    if not profiles:
        raise ProfileError("need at least one profile to compare")
    checklist = profiles[0].checklist
    for p in profiles[1:]:
        if p.checklist.version != checklist.version or p.checklist.ids != checklist.ids:
            raise ProfileError(
                f"profile {p.target_label!r} uses checklist {p.checklist.version}, "
                f"expected {checklist.version}")
    values = [p.values() for p in profiles]
    matrix = {spec.id: [v[spec.id] for v in values] for spec in checklist}
    return Comparison(
        checklist=checklist,
        labels=[p.target_label for p in profiles],
        matrix=matrix,
        coverage={p.target_label: coverage_summary(p) for p in profiles},
        risk={p.target_label: risk_profile(p) for p in profiles},
    )


def profile_from_values(label: str, values: Mapping[str, str], checklist: Checklist,
                        source: Source = Source.Manual) -> AuditProfile:
    """Score a plain parameter-id -> value table, e.g. a transcribed audit."""
    obs = [Observation(pid, v, source, note="transcribed") for pid, v in values.items()]
    return build_profile(label, obs, checklist)
