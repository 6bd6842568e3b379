"""Shared fixtures: transcribed reference tables and testbed helpers."""

from __future__ import annotations

import csv
from pathlib import Path

import pytest

from webaudit.checklist import default_checklist
from webaudit.report import AuditDocument
from webaudit.risk import profile_from_values

DATA = Path(__file__).parent / "data"
TARGETS = ("ChatGPT", "DeepSeek", "Claude", "Gemini", "Grok")


def published_values() -> dict[str, dict[str, str]]:
    """Per-target parameter-id -> observation value, transcribed from the reference audit."""
    with open(DATA / "published_audit.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {t: {r["parameter_id"]: r[t] for r in rows} for t in TARGETS}


def published_coverage() -> dict[tuple[str, str], str]:
    """(category name, target) -> "x/y" from the reference coverage table."""
    with open(DATA / "published_coverage.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {(r["category"], t): r[t] for r in rows for t in TARGETS}


def published_ratings() -> list[dict[str, str]]:
    with open(DATA / "published_risk_ratings.csv", newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="session")
def checklist():
    return default_checklist()


@pytest.fixture(scope="session")
def reference_values():
    return published_values()


@pytest.fixture(scope="session")
def reference_profiles(checklist, reference_values):
    return {t: profile_from_values(t, v, checklist) for t, v in reference_values.items()}


@pytest.fixture(scope="session")
def reference_documents(checklist, reference_values):
    return {t: AuditDocument.from_values(t, v, checklist) for t, v in reference_values.items()}
