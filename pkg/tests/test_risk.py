"""Compliance judgment, profile building, coverage and risk profiles."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TARGETS, published_coverage
from webaudit.checklist import Category, Kind, Polarity, RiskLevel, default_checklist
from webaudit.model import NA, NO, UNKNOWN, YES, Evidence, Observation, ObservationError, Source
from webaudit.risk import (
    Compliance,
    ProfileError,
    build_profile,
    compare_profiles,
    coverage_summary,
    judge_compliance,
    profile_from_values,
    risk_profile,
)

CL = default_checklist()
EV = (Evidence("GET /", "200"),)
C, N = Compliance.Compliant, Compliance.NonCompliant


def compliant_value(spec) -> str:
    if spec.kind is Kind.Categorical:
        return spec.accepted_values[0] if spec.accepted_values else "31536000"
    return YES if spec.polarity is Polarity.DesiredYes else NO


def all_compliant_values() -> dict[str, str]:
    return {s.id: compliant_value(s) for s in CL}


# -- judge_compliance -------------------------------------------------------------

def test_judge_examples():
    assert judge_compliance(CL["password.complexity"], "Only Length") is C
    assert judge_compliance(CL["xss.script_execution"], YES) is N
    assert judge_compliance(CL["mfa.type"], NA) is N


@pytest.mark.parametrize("value, desired_yes, desired_no", [
    (YES, C, N), (NO, N, C), (NA, N, N), (UNKNOWN, N, N)])
def test_boolean_truth_table(value, desired_yes, desired_no):
    assert judge_compliance(CL["mfa.enabled"], value) is desired_yes
    assert judge_compliance(CL["errors.username_disclosure"], value) is desired_no


def test_categorical_value_on_boolean_is_error():
    with pytest.raises(ObservationError):
        judge_compliance(CL["mfa.enabled"], "TOTP")


def test_categorical_outside_accepted_list_is_non_compliant():
    assert judge_compliance(CL["storage.hash_algorithm"], "MD5") is N
    assert judge_compliance(CL["storage.hash_algorithm"], "Argon2") is C
    # An open categorical (no accepted list) credits any concrete value.
    assert judge_compliance(CL["headers.hsts_max_age"], "300") is C
    assert judge_compliance(CL["headers.hsts_max_age"], NO) is N


legal_pairs = st.sampled_from(list(CL)).flatmap(
    lambda spec: st.tuples(
        st.just(spec),
        st.sampled_from([YES, NO, NA, UNKNOWN]) if spec.kind is Kind.Boolean
        else st.one_of(st.sampled_from([NO, NA, UNKNOWN, *spec.accepted_values]),
                       st.text(alphabet="abcXYZ019 +-", min_size=1, max_size=12))))


@given(legal_pairs)
def test_judge_total_and_deterministic(pair):
    spec, value = pair
    first = judge_compliance(spec, value)
    assert first in (C, N)
    assert judge_compliance(spec, value) is first
    if value in (NA, UNKNOWN):
        assert first is N


# -- profiles ------------------------------------------------------------------------

def test_full_compliant_set_gives_48_compliant_records():
    p = profile_from_values("t", all_compliant_values(), CL)
    assert len(p.records) == 48 and all(r.is_compliant for r in p.records)
    cov = coverage_summary(p)
    assert all(cov.per_category[c] == (c.expected_parameter_count,) * 2 for c in Category)
    assert risk_profile(p).total == 0


def test_missing_observation_becomes_unknown_not_observed():
    p = build_profile("t", [], CL)
    rec = p.record("mfa.backup_codes")
    assert rec.observation.value == UNKNOWN
    assert rec.compliant is N
    assert "not observed" in rec.rationale


def test_dynamic_beats_static_beats_manual():
    obs = [Observation("sqli.parameterized", YES, Source.Static, EV),
           Observation("sqli.parameterized", NO, Source.Dynamic, EV),
           Observation("sqli.parameterized", YES, Source.Manual)]
    rec = build_profile("t", obs, CL).record("sqli.parameterized")
    assert rec.observation.source is Source.Dynamic and rec.observation.value == NO
    rec = build_profile("t", obs[::2], CL).record("sqli.parameterized")
    assert rec.observation.source is Source.Static


def test_duplicate_same_source_rejected():
    obs = [Observation("mfa.enabled", YES, Source.Dynamic, EV),
           Observation("mfa.enabled", NO, Source.Dynamic, EV)]
    with pytest.raises(ProfileError):
        build_profile("t", obs, CL)


def test_unknown_parameter_rejected():
    with pytest.raises(ProfileError):
        build_profile("t", [Observation("nope", YES, Source.Manual)], CL)


def test_decided_automated_observation_needs_evidence():
    with pytest.raises(ObservationError):
        Observation("mfa.enabled", YES, Source.Dynamic)
    Observation("mfa.enabled", NA, Source.Dynamic)  # undecided values need none


def test_na_rationale_annotated():
    p = profile_from_values("t", {"mfa.type": NA}, CL)
    assert p.record("mfa.type").rationale == "dependent feature absent"


# -- reference-table oracles ---------------------------------------------------------

def test_coverage_reproduces_reference_table(reference_profiles):
    expected = published_coverage()
    for target in TARGETS:
        cov = coverage_summary(reference_profiles[target])
        for cat in Category:
            assert cov.cell(cat) == expected[(cat.name, target)], (target, cat.name)


def test_coverage_named_examples(reference_profiles):
    assert coverage_summary(reference_profiles["Grok"]).per_category[Category.SessionSecurity] == (7, 8)
    claude = coverage_summary(reference_profiles["Claude"]).per_category
    assert claude[Category.InputValidation] == (8, 10)
    assert claude[Category.SecureStorage] == (0, 2)


def test_extreme_cross_tabulation(reference_profiles):
    extreme = {t: risk_profile(p)[RiskLevel.Extreme] for t, p in reference_profiles.items()}
    assert extreme == {"Claude": 4, "DeepSeek": 3, "ChatGPT": 0, "Gemini": 0, "Grok": 0}


def test_compare_profiles_reproduces_matrix(reference_profiles, reference_values):
    cmp = compare_profiles([reference_profiles[t] for t in TARGETS])
    assert cmp.labels == list(TARGETS)
    for spec, row in cmp.rows():
        assert row == [reference_values[t][spec.id] for t in TARGETS]


def test_compare_single_and_errors(reference_profiles):
    cmp = compare_profiles([reference_profiles["Grok"]])
    assert all(len(row) == 1 for _, row in cmp.rows())
    with pytest.raises(ProfileError):
        compare_profiles([])
    other = default_checklist()
    from dataclasses import replace
    older = replace(other, version="0.9")
    with pytest.raises(ProfileError):
        compare_profiles([reference_profiles["Grok"], profile_from_values("x", {}, older)])


# -- properties ----------------------------------------------------------------------

def value_for(spec):
    base = [YES, NO, NA, UNKNOWN] if spec.kind is Kind.Boolean else [NO, NA, UNKNOWN,
                                                                      *spec.accepted_values, "x"]
    return st.sampled_from(base)


profiles_values = st.fixed_dictionaries({s.id: value_for(s) for s in CL})


@settings(max_examples=60)
@given(profiles_values)
def test_conservation(values):
    p = profile_from_values("t", values, CL)
    assert coverage_summary(p).fulfilled + risk_profile(p).total == 48
    assert risk_profile(p).total == len(p.non_compliant)


@settings(max_examples=60)
@given(profiles_values, st.sampled_from(CL.ids))
def test_monotone_safety(values, pid):
    before = profile_from_values("t", values, CL)
    after = profile_from_values("t", {**values, pid: NO}, CL)
    cb, ca = coverage_summary(before), coverage_summary(after)
    if before.record(pid).is_compliant:
        for cat in Category:
            assert ca.per_category[cat][0] <= cb.per_category[cat][0]
        assert risk_profile(after).total >= risk_profile(before).total


@settings(max_examples=40)
@given(profiles_values)
def test_records_pure_function_of_value(values):
    p = profile_from_values("t", values, CL)
    for rec in p.records:
        assert rec.compliant is judge_compliance(CL[rec.parameter_id], rec.observation.value)
