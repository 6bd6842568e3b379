"""The ``webaudit`` command line."""

from __future__ import annotations

import csv
import json

import pytest
import yaml

from conftest import DATA
from webaudit.report import load_document
from webaudit.report.cli import CHECKLIST_ENV, main
from webaudit.checklist import default_checklist, dump_checklist


@pytest.fixture
def attest(tmp_path, reference_values):
    def write(target: str):
        path = tmp_path / f"{target}.yaml"
        path.write_text(yaml.safe_dump(reference_values[target]), encoding="utf-8")
        return str(path)
    return write


def test_checklist_validate(capsys):
    assert main(["checklist", "--validate"]) == 0
    assert "48 parameters" in capsys.readouterr().out


def test_checklist_print_round_trips(capsys):
    assert main(["checklist"]) == 0
    assert capsys.readouterr().out == dump_checklist(default_checklist())


def test_checklist_env_var_and_bad_file(tmp_path, monkeypatch, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("x|y\n", encoding="utf-8")
    monkeypatch.setenv(CHECKLIST_ENV, str(bad))
    assert main(["checklist", "--validate"]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["checklist", "--validate", "--checklist", str(DATA / "missing.txt")]) == 1
    good = tmp_path / "good.txt"
    good.write_text(dump_checklist(default_checklist()), encoding="utf-8")
    monkeypatch.setenv(CHECKLIST_ENV, str(good))
    assert main(["checklist", "--validate"]) == 0


@pytest.mark.parametrize("argv", [["bogus"], [], ["score", "--fail-on", "Catastrophic"],
                                  ["analyze"], ["report"]])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_score_gate(attest, tmp_path, capsys):
    assert main(["score", "--attest", attest("Claude"), "--fail-on", "Extreme"]) == 1
    assert "FAIL" in capsys.readouterr().err
    assert main(["score", "--attest", attest("Grok"), "--fail-on", "Extreme"]) == 0
    assert main(["score", "--attest", attest("Grok"), "--fail-on", "VeryHigh"]) == 1


def test_score_writes_merged_document(attest, tmp_path, capsys):
    out = tmp_path / "claude.json"
    assert main(["score", "--attest", attest("Claude"), "--label", "Claude",
                 "--out", str(out)]) == 0
    doc = load_document(out)
    assert doc.label == "Claude"
    assert doc.coverage.cell(next(iter(doc.coverage.per_category))) == "0/11"
    text = capsys.readouterr().out
    assert "Extreme" in text and "0/11" in text
    # re-scoring the document itself gates the same way
    assert main(["score", str(out), "--fail-on", "Extreme"]) == 1


def test_score_nothing_to_do_is_error(capsys):
    assert main(["score"]) == 1


def test_score_rejects_tampered_document(attest, tmp_path):
    out = tmp_path / "d.json"
    main(["score", "--attest", attest("Grok"), "--out", str(out)])
    data = json.loads(out.read_text())
    data["risk_profile"]["Extreme"] = 7
    out.write_text(json.dumps(data))
    assert main(["score", str(out)]) == 1


def test_analyze_then_report(tmp_path, attest, capsys):
    static = tmp_path / "static.json"
    assert main(["analyze", "--code-dir", str(DATA / "reference_corpora" / "gemini"),
                 "--label", "Gemini", "--out", str(static)]) == 0
    doc = load_document(static)
    assert doc.profile.record("storage.hash_algorithm").observation.value == "Argon2"
    merged = tmp_path / "merged.json"
    assert main(["score", str(static), "--attest", attest("Gemini"), "--label", "Gemini",
                 "--out", str(merged)]) == 0
    grok = tmp_path / "grok.json"
    main(["score", "--attest", attest("Grok"), "--label", "Grok", "--out", str(grok)])
    matrix, cov, charts = tmp_path / "m.csv", tmp_path / "c.csv", tmp_path / "charts"
    assert main(["report", str(merged), str(grok), "--matrix", str(matrix),
                 "--coverage", str(cov), "--radar-dir", str(charts)]) == 0
    rows = list(csv.reader(matrix.open()))
    assert rows[0][2:] == ["Gemini", "Grok"] and len(rows) == 49
    assert len(list(charts.glob("*.svg"))) == 6
    assert main(["report", str(grok), "--format", "markdown"]) == 0
    assert "| Parameter | Grok |" in capsys.readouterr().out


def test_analyze_missing_dir_is_audit_error(tmp_path):
    assert main(["analyze", "--code-dir", str(tmp_path / "nope")]) == 1


def test_analyze_custom_rules(tmp_path):
    rules = tmp_path / "r.txt"
    rules.write_text("h|storage.hash_algorithm|whirlpool\\(|statement|bcrypt/NA\n")
    code = tmp_path / "code"
    code.mkdir()
    (code / "a.php").write_text("<?php $h = whirlpool($pw);")
    out = tmp_path / "o.json"
    assert main(["analyze", "--code-dir", str(code), "--rules", str(rules),
                 "--no-supplementary", "--out", str(out)]) == 0
    assert load_document(out).profile.record("storage.hash_algorithm").observation.value == "bcrypt"
    rules.write_text("broken")
    assert main(["analyze", "--code-dir", str(code), "--rules", str(rules)]) == 1


def test_scan_against_testbed(tmp_path):
    from webaudit.testbed import preset, start_testbed
    with start_testbed(preset("hardened")) as tb:
        target = tmp_path / "target.yaml"
        target.write_text(yaml.safe_dump({
            "base_url": tb.url,
            "valid_credentials": {"username": "alice", "password": "Correct-Horse-9"},
            "invalid_credentials": {"username": "alice", "password": "nope-nope-1"},
            "totp_secret": tb.config.totp_secret,
        }))
        out = tmp_path / "scan.json"
        assert main(["scan", "--target", str(target), "--only", "headers.csp_present",
                     "session.cookie_secure", "--out", str(out)]) == 0
    doc = load_document(out)
    assert doc.profile.record("headers.csp_present").observation.value == "Yes"
    assert doc.profile.record("session.cookie_secure").observation.value == "Yes"
    assert "Correct-Horse-9" not in out.read_text()


def test_scan_unreachable_target(tmp_path):
    target = tmp_path / "t.yaml"
    target.write_text(yaml.safe_dump({
        "base_url": "http://127.0.0.1:9", "request_timeout": 1,
        "valid_credentials": {"username": "a", "password": "b"},
        "invalid_credentials": {"username": "a", "password": "c"}}))
    assert main(["scan", "--target", str(target)]) == 1


def test_testbed_bad_preset_is_error(capsys):
    assert main(["testbed", "--preset", "nonexistent"]) == 1
