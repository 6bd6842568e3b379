"""Lexical pattern analysis of PHP sources for the Static-mode checklist parameters."""

from webaudit.static_analyzer.analyzer import (
    CodeCorpus,
    CorpusError,
    CorpusIndex,
    StaticAnalyzer,
    analyze_output_escaping,
    analyze_password_storage,
    analyze_session_and_logging,
    analyze_sql_construction,
    run_static,
)
from webaudit.static_analyzer.lexer import Statement, split_statements
from webaudit.static_analyzer.rules import (
    PatternRule,
    RuleError,
    default_rules,
    load_rules_file,
    parse_rules,
    supplementary_rules,
)

__all__ = ["CodeCorpus", "CorpusError", "CorpusIndex", "PatternRule", "RuleError",
           "StaticAnalyzer", "Statement", "analyze_output_escaping", "analyze_password_storage",
           "analyze_session_and_logging", "analyze_sql_construction", "default_rules",
           "load_rules_file", "parse_rules", "run_static", "split_statements",
           "supplementary_rules"]
