"""Compliance matrix and coverage table renderers (CSV and Markdown)."""

from __future__ import annotations

import csv
import io
from typing import Iterable, Mapping

from webaudit.checklist import Category
from webaudit.risk import Comparison, CoverageSummary

FORMATS = ("csv", "markdown")


class TableFormatError(ValueError):
    pass


def _csv(rows: Iterable[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_ALL, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _md_cell(text: str) -> str:
    return str(text).replace("|", r"\|").replace("\n", " ")


def _markdown(header: list[str], rows: Iterable[list[str]]) -> str:
    lines = ["| " + " | ".join(_md_cell(h) for h in header) + " |",
             "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(_md_cell(c) for c in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def _check(fmt: str) -> None:
    if fmt not in FORMATS:
        raise TableFormatError(f"format must be one of {', '.join(FORMATS)}; got {fmt!r}")


def emit_compliance_matrix(cmp: Comparison, fmt: str = "csv") -> str:
    """One row per checklist parameter, one column per target, cells verbatim."""
    _check(fmt)
    rows = [[spec.id, spec.name, *values] for spec, values in cmp.rows()]
    if fmt == "csv":
        return _csv([["parameter_id", "parameter", *cmp.labels], *rows])
    return _markdown(["Parameter", *cmp.labels], [[r[1], *r[2:]] for r in rows])


def _summaries(summaries: Mapping[str, CoverageSummary] | Iterable[tuple[str, CoverageSummary]]
               ) -> list[tuple[str, CoverageSummary]]:
    if isinstance(summaries, Mapping):
        return list(summaries.items())
    return list(summaries)


def emit_coverage_table(summaries: Mapping[str, CoverageSummary]
                        | Iterable[tuple[str, CoverageSummary]], fmt: str = "csv") -> str:
    """Rows per category, columns per target, cells "fulfilled/total".

    With no targets the result is the header line alone.
    """
    _check(fmt)
    labelled = _summaries(summaries)
    header = ["category", *[label for label, _ in labelled]]
    rows = [[cat.title, *[s.cell(cat) for _, s in labelled]] for cat in Category] if labelled else []
    if fmt == "csv":
        return _csv([header, *rows])
    return _markdown(["Category", *header[1:]], rows)


def coverage_cells(summaries: Mapping[str, CoverageSummary]) -> dict[tuple[str, str], str]:
    """(category name, label) -> "x/y", handy for comparisons against a reference."""
    return {(cat.name, label): s.cell(cat) for label, s in summaries.items() for cat in Category}
