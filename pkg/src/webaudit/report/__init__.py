"""Audit documents, report tables, risk charts and the command-line interface."""

from webaudit.report.document import (
    SCHEMA,
    AuditDocument,
    DocumentError,
    emit_json,
    load_document,
    parse_json,
    save_document,
)
from webaudit.report.radar import Chart, emit_radar, emit_radar_set, write_charts
from webaudit.report.tables import (
    TableFormatError,
    coverage_cells,
    emit_compliance_matrix,
    emit_coverage_table,
)

__all__ = ["SCHEMA", "AuditDocument", "Chart", "DocumentError", "TableFormatError",
           "coverage_cells", "emit_compliance_matrix", "emit_coverage_table", "emit_json",
           "emit_radar", "emit_radar_set", "load_document", "parse_json", "save_document",
           "write_charts"]
