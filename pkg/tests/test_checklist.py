"""Checklist registry, risk matrix and checklist file format."""

from __future__ import annotations

import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import published_ratings
from webaudit.checklist import (
    Category,
    ChecklistConsistencyError,
    ChecklistParseError,
    ImpactLevel,
    Kind,
    LikelihoodLevel,
    Mode,
    Polarity,
    RiskLevel,
    default_checklist,
    dump_checklist,
    iter_cells,
    load_checklist,
    risk_level,
)

L, I, R = LikelihoodLevel, ImpactLevel, RiskLevel


def test_ordinal_enums_are_bijections():
    assert [x.ordinal for x in L] == [1, 2, 3, 4, 5]
    assert [x.ordinal for x in I] == [1, 2, 3, 4, 5]
    assert [x.rank for x in R] == [1, 2, 3, 4, 5, 6]
    assert sorted(R) == list(R)


@pytest.mark.parametrize("lik, imp, expected", [
    (L.AlmostCertain, I.Major, R.Extreme),
    (L.Unlikely, I.Insignificant, R.VeryLow),
    (L.Moderate, I.Significant, R.Medium),
    (L.Rare, I.Severe, R.Low),
])
def test_risk_level_examples(lik, imp, expected):
    assert risk_level(lik, imp) is expected


def _band(product: int) -> RiskLevel:
    # Independent restatement of the thresholds as explicit ranges.
    table = [(range(1, 3), R.VeryLow), (range(3, 6), R.Low), (range(6, 10), R.Medium),
             (range(10, 13), R.High), (range(13, 20), R.VeryHigh), (range(20, 26), R.Extreme)]
    return next(level for rng, level in table if product in rng)


def test_risk_level_full_grid_matches_band_table():
    for lik, imp in itertools.product(L, I):
        assert risk_level(lik, imp) is _band(lik.ordinal * imp.ordinal)
    assert len(list(iter_cells())) == 25


def test_thresholds_consistent_with_every_distinct_published_pair():
    pairs: dict[tuple, set] = {}
    for r in published_ratings():
        key = (L.parse(r["likelihood"]), I.parse(r["impact"]))
        pairs.setdefault(key, set()).add(R.parse(r["risk"]))
    assert len(pairs) == 12  # distinct populated cells in the reference table
    for (lik, imp), printed in pairs.items():
        assert printed == {risk_level(lik, imp)}  # no conflicting cells, and all reproduced


@given(st.sampled_from(list(L)), st.sampled_from(list(L)), st.sampled_from(list(I)),
       st.sampled_from(list(I)))
def test_risk_level_monotone(l1, l2, i1, i2):
    lo_l, hi_l = sorted((l1, l2))
    lo_i, hi_i = sorted((i1, i2))
    assert risk_level(lo_l, lo_i) <= risk_level(hi_l, hi_i)


def test_risk_level_symmetric_in_ordinals():
    for a, b in itertools.product(range(1, 6), repeat=2):
        assert risk_level(L(a), I(b)) is risk_level(L(b), I(a))


def test_default_checklist_shape(checklist):
    assert len(checklist) == 48
    assert len(set(checklist.ids)) == 48
    for cat in Category:
        assert len(checklist.by_category(cat)) == cat.expected_parameter_count
    assert sum(cat.expected_parameter_count for cat in Category) == 48


def test_default_checklist_order_and_ratings_match_reference(checklist):
    rows = published_ratings()
    assert [s.name for s in checklist] == [r["parameter"] for r in rows]
    for spec, row in zip(checklist, rows):
        assert spec.likelihood is L.parse(row["likelihood"]), spec.id
        assert spec.impact is I.parse(row["impact"]), spec.id
        assert spec.risk is R.parse(row["risk"]), spec.id


def test_exactly_four_extreme_parameters(checklist):
    extreme = {s.id for s in checklist if s.risk is R.Extreme}
    assert extreme == {"session.cookie_secure", "session.cookie_httponly",
                       "session.cookie_samesite", "session.fixation"}


def test_named_examples(checklist):
    mfa = checklist.find("MFA Enabled")
    assert (mfa.likelihood, mfa.impact, mfa.risk) == (L.Likely, I.Major, R.VeryHigh)
    fix = checklist.find("Session Fixation Protection")
    assert (fix.likelihood, fix.impact, fix.risk) == (L.AlmostCertain, I.Major, R.Extreme)


def test_polarity_desired_no_exactly_for_weakness_rows(checklist):
    desired_no = {s.id for s in checklist if s.polarity is Polarity.DesiredNo}
    assert desired_no == {"xss.script_execution", "xss.html_injection",
                          "errors.username_disclosure", "errors.password_rules_disclosure"}


def test_mode_partition(checklist):
    static = {s.id for s in checklist.by_mode(Mode.Static)}
    manual = {s.id for s in checklist.by_mode(Mode.Manual)}
    assert static == {"storage.hash_algorithm", "storage.salted", "sqli.parameterized",
                      "logging.failed_logins"}
    assert {"bruteforce.lockout_notification", "mfa.backup_codes", "logging.secure_storage",
            "logging.unusual_flagged", "xss.cors_policy"} <= manual
    assert len(checklist.by_mode(Mode.Dynamic)) + len(static) + len(manual) == 48


def test_categorical_rows_have_accepted_values(checklist):
    for spec in checklist:
        if spec.kind is Kind.Boolean:
            assert spec.accepted_values == ()
    assert set(checklist["storage.hash_algorithm"].accepted_values) == {"bcrypt", "Argon2", "PBKDF2"}


def test_round_trip_serialization(checklist):
    again = load_checklist(dump_checklist(checklist))
    assert again == checklist
    assert again.version == checklist.version


def test_inconsistent_stored_risk_rejected(checklist):
    text = dump_checklist(checklist)
    lines = text.splitlines()
    idx = next(i for i, l in enumerate(lines) if l.startswith("password.expiration|"))
    fields = lines[idx].split("|")
    fields[4], fields[5] = "Moderate", "Insignificant"
    lines[idx] = "|".join(fields[:10] + ["High"])
    with pytest.raises(ChecklistConsistencyError):
        load_checklist("\n".join(lines))


def test_duplicate_id_rejected(checklist):
    lines = dump_checklist(checklist).splitlines()
    row = next(l for l in lines if l.startswith("mfa.enabled|"))
    with pytest.raises(ChecklistConsistencyError):
        load_checklist("\n".join(lines + [row]))


def test_category_count_mismatch_rejected(checklist):
    lines = [l for l in dump_checklist(checklist).splitlines() if not l.startswith("mfa.type|")]
    with pytest.raises(ChecklistConsistencyError):
        load_checklist("\n".join(lines))
    assert len(load_checklist("\n".join(lines), strict_counts=False)) == 47


@pytest.mark.parametrize("text", ["", "# only a comment\n", "a|b|c\n"])
def test_parse_errors(text):
    with pytest.raises(ChecklistParseError):
        load_checklist(text)


def test_unknown_enum_value_is_parse_error(checklist):
    lines = dump_checklist(checklist).splitlines()
    idx = next(i for i, l in enumerate(lines) if l.startswith("mfa.type|"))
    lines[idx] = lines[idx].replace("|Moderate|", "|Sometimes|", 1)
    with pytest.raises(ChecklistParseError):
        load_checklist("\n".join(lines))


def test_default_checklist_is_shared_and_immutable():
    a, b = default_checklist(), default_checklist()
    assert a is b
    with pytest.raises(Exception):
        a.parameters[0].id = "x"  # type: ignore[misc]
