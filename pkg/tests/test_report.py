"""Audit documents, compliance/coverage tables and risk charts."""

from __future__ import annotations

import csv
import io
import json
import xml.etree.ElementTree as ET
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TARGETS, published_coverage
from webaudit.checklist import Category, Kind, RiskLevel, default_checklist
from webaudit.model import NA, NO, UNKNOWN, YES, Evidence, Observation, Source
from webaudit.report import (
    AuditDocument,
    DocumentError,
    emit_compliance_matrix,
    emit_coverage_table,
    emit_json,
    emit_radar,
    emit_radar_set,
    load_document,
    parse_json,
    save_document,
    write_charts,
)
from webaudit.risk import compare_profiles, coverage_summary, profile_from_values

CL = default_checklist()
EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)

# -- random documents ------------------------------------------------------------------

safe_text = st.text(alphabet=st.characters(codec="utf-8", exclude_categories=("Cs",)),
                    max_size=20)
timestamps = st.integers(0, 10 ** 8).map(lambda s: EPOCH + timedelta(seconds=s, microseconds=s % 997))


@st.composite
def observations(draw):
    out = []
    for spec in draw(st.lists(st.sampled_from(list(CL)), unique_by=lambda s: s.id, max_size=48)):
        for source in draw(st.lists(st.sampled_from(list(Source)), unique=True, min_size=1)):
            choices = [YES, NO, NA, UNKNOWN] if spec.kind is Kind.Boolean else \
                [NO, NA, UNKNOWN, *spec.accepted_values, "Other value"]
            value = draw(st.sampled_from(choices))
            ev = tuple(Evidence(draw(safe_text), draw(safe_text))
                       for _ in range(draw(st.integers(1 if source is not Source.Manual
                                                       and value not in (NA, UNKNOWN) else 0, 2))))
            out.append(Observation(spec.id, value, source, ev, draw(safe_text), draw(timestamps)))
    return out


@st.composite
def documents(draw):
    return AuditDocument(
        label=draw(safe_text.filter(bool)),
        observations=draw(observations()),
        checklist=CL,
        metadata=draw(st.dictionaries(safe_text, safe_text, max_size=3)),
        skipped=draw(st.lists(st.tuples(st.sampled_from(CL.ids), safe_text), max_size=3,
                              unique_by=lambda t: t[0])),
        started_at=draw(st.none() | timestamps),
        finished_at=draw(st.none() | timestamps),
    )


@settings(max_examples=100, deadline=None)
@given(documents())
def test_emit_parse_identity_and_canonical(doc):
    text = emit_json(doc)
    again = parse_json(text)
    assert again == doc
    assert emit_json(again) == text
    assert emit_json(doc) == text


def test_emission_orders_parameters_by_checklist(reference_documents):
    data = json.loads(emit_json(reference_documents["Claude"]))
    assert [r["parameter_id"] for r in data["records"]] == CL.ids
    assert [o["parameter_id"] for o in data["observations"]] == CL.ids
    assert data["schema"] == "webaudit.audit/1"
    assert data["checklist_version"] == CL.version


def test_embedded_scores_match_rescoring(reference_documents):
    for doc in reference_documents.values():
        data = json.loads(emit_json(doc))
        cov = coverage_summary(doc.profile)
        assert data["coverage"] == {c.name: list(cov.per_category[c]) for c in Category}
        assert sum(data["risk_profile"].values()) == len(doc.profile.non_compliant)


@pytest.mark.parametrize("tamper", [
    lambda d: d["coverage"].__setitem__("SecureStorage", [2, 2]),
    lambda d: d["risk_profile"].__setitem__("Extreme", 0),
    lambda d: d["records"][0].__setitem__("compliant", "Compliant"),
    lambda d: d["observations"][0].__setitem__("value", "Yes"),
])
def test_tampered_document_rejected(reference_documents, tamper):
    data = json.loads(emit_json(reference_documents["Claude"]))
    tamper(data)
    with pytest.raises(DocumentError):
        parse_json(json.dumps(data))


@pytest.mark.parametrize("text", ["not json", "[]", '{"schema": "other"}',
                                  '{"schema": "webaudit.audit/1", "checklist_version": "1.0"}'])
def test_malformed_documents_rejected(text):
    with pytest.raises(DocumentError):
        parse_json(text)


def test_checklist_version_mismatch_rejected(reference_documents):
    data = json.loads(emit_json(reference_documents["Grok"]))
    data["checklist_version"] = "0.1"
    with pytest.raises(DocumentError):
        parse_json(json.dumps(data))


def test_save_and_load(tmp_path, reference_documents):
    path = tmp_path / "doc.json"
    save_document(reference_documents["Gemini"], path)
    assert load_document(path) == reference_documents["Gemini"]
    with pytest.raises(DocumentError):
        load_document(tmp_path / "missing.json")


def test_merge_documents_precedence():
    static = AuditDocument("s", [Observation("sqli.parameterized", YES, Source.Static,
                                             (Evidence("a.php:1", "prepare"),))])
    dynamic = AuditDocument("d", [Observation("sqli.parameterized", NO, Source.Dynamic,
                                              (Evidence("GET /", "500"),))])
    merged = static.merged_with([dynamic], label="m")
    assert merged.label == "m"
    assert merged.profile.record("sqli.parameterized").observation.value == NO
    assert len(merged.observations) == 2


# -- tables ----------------------------------------------------------------------------

def test_matrix_csv_matches_reference_cells(reference_profiles, reference_values):
    cmp = compare_profiles([reference_profiles[t] for t in TARGETS])
    text = emit_compliance_matrix(cmp, "csv")
    assert len(text.splitlines()) == 49
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["parameter_id", "parameter", *TARGETS]
    for row in rows[1:]:
        pid = row[0]
        assert row[1] == CL[pid].name
        assert row[2:] == [reference_values[t][pid] for t in TARGETS]
    assert text.startswith('"parameter_id","parameter"')  # every field quoted


def test_matrix_markdown_columns(reference_profiles):
    cmp = compare_profiles([reference_profiles["Grok"], reference_profiles["Claude"]])
    lines = emit_compliance_matrix(cmp, "markdown").splitlines()
    assert len(lines) == 2 + 48
    assert lines[0] == "| Parameter | Grok | Claude |"
    assert all(l.count(" | ") == 2 for l in lines[2:])


def test_matrix_preserves_values_verbatim():
    odd = {"password.complexity": "Length+letters+numbers", "headers.hsts_max_age": "31536000",
           "mfa.type": "Push Notification"}
    cmp = compare_profiles([profile_from_values("x", odd, CL)])
    rows = {r[0]: r[2] for r in csv.reader(io.StringIO(emit_compliance_matrix(cmp)))}
    for pid, v in odd.items():
        assert rows[pid] == v


def test_coverage_table_reproduces_reference(reference_profiles):
    summaries = {t: coverage_summary(reference_profiles[t]) for t in TARGETS}
    rows = list(csv.reader(io.StringIO(emit_coverage_table(summaries))))
    assert rows[0] == ["category", *TARGETS]
    expected = published_coverage()
    for cat, row in zip(Category, rows[1:]):
        assert row[0] == cat.title
        assert row[1:] == [expected[(cat.name, t)] for t in TARGETS]


def test_coverage_table_all_compliant_and_empty():
    from test_risk import all_compliant_values
    s = coverage_summary(profile_from_values("all", all_compliant_values(), CL))
    rows = list(csv.reader(io.StringIO(emit_coverage_table({"all": s}))))
    assert [r[1] for r in rows[1:]] == ["11/11", "10/10", "8/8", "2/2", "5/5", "12/12"]
    assert emit_coverage_table({}).splitlines() == ['"category"']
    assert len(emit_coverage_table({}, "markdown").splitlines()) == 2


def test_unknown_format_rejected(reference_profiles):
    from webaudit.report import TableFormatError
    with pytest.raises(TableFormatError):
        emit_compliance_matrix(compare_profiles([reference_profiles["Grok"]]), "xlsx")


# -- charts ----------------------------------------------------------------------------

def _risk(reference_profiles):
    return compare_profiles([reference_profiles[t] for t in TARGETS]).risk


def test_radar_extreme_sidecar(reference_profiles):
    chart = emit_radar(_risk(reference_profiles), RiskLevel.Extreme)
    assert chart.kind == "radar"
    assert chart.sidecar["values"] == {"ChatGPT": 0, "DeepSeek": 3, "Claude": 4, "Gemini": 0,
                                       "Grok": 0}
    root = ET.fromstring(chart.svg.split("?>", 1)[1])
    assert root.tag.endswith("svg")
    data = [e for e in root.iter() if e.get("class") == "data"]
    assert len(data) == 1 and len(data[0].get("points").split()) == 5


def test_radar_all_zero_is_valid(reference_profiles):
    from webaudit.risk import RiskProfile
    zero = {t: RiskProfile({lvl: 0 for lvl in RiskLevel}) for t in "ABC"}
    chart = emit_radar(zero, RiskLevel.High)
    ET.fromstring(chart.svg.split("?>", 1)[1])
    pts = next(e for e in ET.fromstring(chart.svg.split("?>", 1)[1]).iter()
               if e.get("class") == "data").get("points").split()
    assert len(set(pts)) == 1  # collapsed onto the centre


def test_bar_fallback_for_two_targets(reference_profiles):
    risk = _risk(reference_profiles)
    chart = emit_radar({"Claude": risk["Claude"], "Grok": risk["Grok"]}, RiskLevel.Extreme)
    assert chart.kind == "bar"
    root = ET.fromstring(chart.svg.split("?>", 1)[1])
    assert len([e for e in root.iter() if e.get("class") == "data"]) == 2


def test_radar_set_writes_six_charts(tmp_path, reference_profiles):
    charts = emit_radar_set(_risk(reference_profiles))
    assert [c.level for c in charts] == sorted(RiskLevel, reverse=True)
    written = write_charts(charts, tmp_path)
    assert len(written) == 12
    side = json.loads((tmp_path / "risk_extreme.json").read_text())
    assert side["values"]["Claude"] == 4
    assert emit_radar_set(_risk(reference_profiles))[0].svg == charts[0].svg  # deterministic
