"""Rule evaluation over a code corpus, and the per-topic analyses built on it."""

from __future__ import annotations

import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from webaudit.checklist import Checklist, Kind, Mode, Polarity, default_checklist
from webaudit.model import NA, NO, UNKNOWN, YES, Evidence, Observation, ProbeReport, Source, utcnow
from webaudit.static_analyzer.lexer import Statement, split_statements
from webaudit.static_analyzer.rules import (
    PatternRule,
    RuleError,
    default_rules,
    supplementary_rules,
)

log = logging.getLogger(__name__)

DEFAULT_EXTENSIONS = (".php", ".inc", ".phtml", ".html", ".htm")
MAX_EVIDENCE_SITES = 10

# Request data as PHP exposes it.
SOURCE_RE = re.compile(
    r"\$_(GET|POST|REQUEST|COOKIE|FILES|SERVER)\b|php://input|\bfilter_input(_array)?\s*\(|"
    r"\bgetallheaders\s*\(")
# Calls whose result is safe to place in HTML.
_HTML_ESCAPERS = ("htmlspecialchars", "htmlentities", "strip_tags", "intval", "floatval",
                  "urlencode", "rawurlencode", "esc_html", "esc_attr", "number_format", "e")
_SAFE_FILTER_RE = re.compile(
    r"\bfilter_input\s*\([^)]*FILTER_SANITIZE_(FULL_)?SPECIAL_CHARS[^)]*\)", re.I)
_CAST_RE = re.compile(r"\(\s*(int|integer|float|double|bool|boolean)\s*\)\s*\$\w+(\[[^\]]*\])*",
                      re.I)
_ASSIGN_RE = re.compile(r"^(\$\w+)\s*(?:\[[^\]]*\]\s*)*(\.=|\?\?=|=)(?![=>])\s*(.*)$", re.S)
_PARAM_RE = re.compile(r"\$\w+")
_FUNCTION_HEADER_RE = re.compile(r"\bfunction\b\s*&?\s*\w*\s*\(([^)]*)\)", re.I)


class CorpusError(ValueError):
    pass


@dataclass
class CodeCorpus:
    """Source files to analyse: ``(relative path, text)`` pairs plus a stack tag."""

    files: list[tuple[str, str]]
    declared_stack: str = "php-mysql"

    def __post_init__(self):
        paths = [p for p, _ in self.files]
        dupes = {p for p in paths if paths.count(p) > 1}
        if dupes:
            raise CorpusError(f"duplicate paths in corpus: {', '.join(sorted(dupes))}")
        self.files = sorted(self.files)

    def __len__(self) -> int:
        return len(self.files)

    @classmethod
    def from_directory(cls, root: str | Path, extensions: Sequence[str] = DEFAULT_EXTENSIONS,
                       declared_stack: str = "php-mysql") -> "CodeCorpus":
        root = Path(root)
        if not root.is_dir():
            raise CorpusError(f"{root} is not a directory")
        files = []
        for path in sorted(root.rglob("*")):
            if path.is_file() and path.suffix.lower() in extensions:
                text = path.read_bytes().decode("utf-8", errors="replace")
                files.append((path.relative_to(root).as_posix(), text))
        return cls(files, declared_stack)

    @classmethod
    def from_text(cls, text: str, path: str = "snippet.php") -> "CodeCorpus":
        return cls([(path, text)])


# ---------------------------------------------------------------------------
# dataflow helpers
# ---------------------------------------------------------------------------

def _strip_calls(text: str, names: Iterable[str]) -> str:
    """Replace ``name(...)`` calls (balanced parentheses) with a neutral token."""
    pattern = re.compile(r"\b(" + "|".join(map(re.escape, names)) + r")\s*\(", re.I)
    out, pos = [], 0
    for m in pattern.finditer(text):
        if m.start() < pos:
            continue
        depth, j = 1, m.end()
        while j < len(text) and depth:
            depth += {"(": 1, ")": -1}.get(text[j], 0)
            j += 1
        out.append(text[pos:m.start()] + "__escaped__")
        pos = j
    out.append(text[pos:])
    return "".join(out)


def html_sanitize(text: str) -> str:
    text = _SAFE_FILTER_RE.sub("__escaped__", text)
    text = _CAST_RE.sub("__escaped__", text)
    return _strip_calls(text, _HTML_ESCAPERS)


def _identity(text: str) -> str:
    return text


def _rhs(text: str) -> str:
    m = _ASSIGN_RE.match(text)
    return m.group(3) if m else text


_LINK_ARG_RE = re.compile(r"^\s*\$\w+\s*,")


def _call_arguments(text: str, hit: re.Match) -> str:
    """What follows the matched call: its arguments, minus a leading connection handle.

    The object a method is called on (``$db->query``) and the link argument of
    procedural APIs (``mysqli_query($conn, ...)``) carry no query text, so a
    tainted handle variable must not make the call look injectable.
    """
    tail = text[hit.end():]
    if "->" not in hit.group(0):
        tail = _LINK_ARG_RE.sub("", tail, count=1)
    return tail


def _mentions(text: str, source: re.Pattern | None, names: set[str]) -> bool:
    if source is not None and source.search(text):
        return True
    return any(re.search(re.escape(n) + r"\b", text) for n in names)


class Scope:
    """The statements of one function body (or of a file's top level)."""

    def __init__(self, statements: list[Statement]):
        self.statements = statements
        self._cache: dict[tuple, set[str]] = {}
        header = _FUNCTION_HEADER_RE.match(statements[0].text) if statements else None
        self.params = set(_PARAM_RE.findall(header.group(1))) if header else set()

    def derived(self, source: re.Pattern, sanitize=_identity, seeds: frozenset = frozenset()
                ) -> set[str]:
        """Variables assigned (transitively) from ``source`` or ``seeds`` in this scope."""
        key = (source.pattern, sanitize, seeds)
        if key not in self._cache:
            names = set(seeds)
            for _ in range(2):  # second pass catches assignments inside loops
                for st in self.statements:
                    m = _ASSIGN_RE.match(st.text)
                    if m and _mentions(sanitize(m.group(3)), source, names):
                        names.add(m.group(1))
            self._cache[key] = names
        return self._cache[key]


class CorpusIndex:
    """Statements of a corpus grouped by scope, ready for rule matching."""

    def __init__(self, corpus: CodeCorpus):
        if not corpus.files:
            raise CorpusError("corpus is empty")
        self.corpus = corpus
        self.statements: list[Statement] = []
        grouped: dict[tuple, list[Statement]] = defaultdict(list)
        for path, text in corpus.files:
            for st in split_statements(text, path):
                self.statements.append(st)
                grouped[(st.path, st.scope)].append(st)
        self.scopes = {key: Scope(stmts) for key, stmts in grouped.items()}
        self._position = {id(st): i for stmts in grouped.values() for i, st in enumerate(stmts)}

    def scope_of(self, st: Statement) -> Scope:
        return self.scopes[(st.path, st.scope)]

    def _context_holds(self, ctx: str, st: Statement, hit: re.Match) -> bool:
        scope = self.scope_of(st)
        if ctx == "statement":
            return True
        if ctx == "tainted":
            # Function parameters count as outside input: the window is one function.
            names = scope.derived(SOURCE_RE, seeds=frozenset(scope.params))
            return _mentions(_call_arguments(st.text, hit), SOURCE_RE, names)
        if ctx == "unescaped":
            names = scope.derived(SOURCE_RE, html_sanitize)
            return _mentions(html_sanitize(_call_arguments(st.text, hit)), SOURCE_RE, names)
        if ctx.startswith("function:"):
            rx = re.compile(ctx.split(":", 1)[1], re.I)
            return any(rx.search(s.text) for s in scope.statements)
        if ctx.startswith("near:"):
            _, n, pattern = ctx.split(":", 2)
            rx = re.compile(pattern, re.I)
            i = self._position[id(st)]
            window = scope.statements[max(0, i - int(n)): i + int(n) + 1]
            return any(rx.search(s.text) for s in window)
        if ctx.startswith(("flow:", "noflow:")):
            kind, pattern = ctx.split(":", 1)
            rx = re.compile(pattern, re.I)
            names = scope.derived(rx)
            flows = _mentions(_rhs(st.text), rx, names)
            return flows if kind == "flow" else not flows
        raise RuleError(f"unknown context {ctx!r}")

    def sites(self, rule: PatternRule) -> list[Statement]:
        return [st for st in self.statements
                if (hit := rule.regex.search(st.text))
                and all(self._context_holds(c, st, hit) for c in rule.contexts)]


# ---------------------------------------------------------------------------
# rule evaluation
# ---------------------------------------------------------------------------

def _evidence(rule: PatternRule, sites: list[Statement], note: str = "") -> list[Evidence]:
    out = []
    for st in sites[:MAX_EVIDENCE_SITES]:
        text = st.text if len(st.text) <= 160 else st.text[:157] + "..."
        out.append(Evidence(st.where, f"[{rule.id}] {note}{text}"))
    return out


def _non_compliant_value(checklist: Checklist, pid: str) -> str:
    spec = checklist[pid]
    return YES if spec.polarity is Polarity.DesiredNo else NO


@dataclass
class StaticAnalyzer:
    """Evaluates pattern rules against a corpus and aggregates them per parameter.

    Aggregation: a categorical parameter takes the verdict of the first rule
    (in file order) that fires. A Boolean parameter takes the non-compliant
    verdict if any firing rule gives it, otherwise the first firing verdict.
    When nothing fires, an unmet guard yields its absence verdict; otherwise
    the first rule's absence verdict applies, with the guard sites as evidence.
    """

    rules: list[PatternRule]
    checklist: Checklist = field(default_factory=default_checklist)

    def __post_init__(self):
        for rule in self.rules:
            if rule.parameter_id not in self.checklist:
                raise RuleError(f"rule {rule.id}: unknown parameter {rule.parameter_id!r}")
        by_param = self.by_parameter()
        for pid, rules in by_param.items():
            decided_absence = [r for r in rules if not r.is_guard
                               and r.verdict_on_absence not in (NA, UNKNOWN)]
            if decided_absence and not any(r.is_guard for r in rules):
                raise RuleError(f"{pid}: absence verdict {decided_absence[0].verdict_on_absence!r}"
                                " needs a guard rule to supply evidence")

    def by_parameter(self) -> dict[str, list[PatternRule]]:
        out: dict[str, list[PatternRule]] = defaultdict(list)
        for rule in self.rules:
            out[rule.parameter_id].append(rule)
        return dict(out)

    def parameters(self) -> list[str]:
        return sorted(self.by_parameter())

    def evaluate(self, index: CorpusIndex, parameter_ids: Iterable[str] | None = None
                 ) -> list[Observation]:
        by_param = self.by_parameter()
        wanted = sorted(by_param if parameter_ids is None else set(parameter_ids) & set(by_param))
        return [self._aggregate(pid, [(r, index.sites(r)) for r in by_param[pid]])
                for pid in wanted]

    def _aggregate(self, pid: str, hits: list[tuple[PatternRule, list[Statement]]]
                   ) -> Observation:
        spec = self.checklist[pid]
        fired = [(r, s) for r, s in hits if s and not r.is_guard]
        if fired:
            if spec.kind is Kind.Categorical:
                rule, sites = fired[0]
                return Observation(pid, rule.verdict_on_match, Source.Static,
                                   _evidence(rule, sites))
            bad = _non_compliant_value(self.checklist, pid)
            bad_hits = [(r, s) for r, s in fired if r.verdict_on_match == bad]
            chosen = bad_hits or [(r, s) for r, s in fired
                                  if r.verdict_on_match == fired[0][0].verdict_on_match]
            evidence = [e for r, s in chosen for e in _evidence(r, s)]
            return Observation(pid, chosen[0][0].verdict_on_match, Source.Static,
                               evidence[:MAX_EVIDENCE_SITES])
        guards = [(r, s) for r, s in hits if r.is_guard]
        for rule, sites in guards:
            if not sites:
                return Observation(pid, rule.verdict_on_absence, Source.Static,
                                   note=f"no match for guard {rule.id}")
        primary = next(r for r, _ in hits if not r.is_guard)
        value = primary.verdict_on_absence
        ids = ", ".join(r.id for r, _ in hits if not r.is_guard)
        if value in (NA, UNKNOWN):
            return Observation(pid, value, Source.Static, note=f"no match for {ids}")
        evidence = [e for r, s in guards for e in _evidence(r, s, "no match for "
                                                            f"{ids} near: ")]
        return Observation(pid, value, Source.Static, evidence[:MAX_EVIDENCE_SITES],
                           note=f"no match for {ids}")


# ---------------------------------------------------------------------------
# topic analyses
# ---------------------------------------------------------------------------

def _analyze(corpus: CodeCorpus, pids: list[str], rules: list[PatternRule] | None = None,
             checklist: Checklist | None = None) -> list[Observation]:
    rules = rules if rules is not None else default_rules() + supplementary_rules()
    analyzer = StaticAnalyzer(rules, checklist or default_checklist())
    return analyzer.evaluate(CorpusIndex(corpus), pids)


def analyze_password_storage(corpus: CodeCorpus, rules=None) -> list[Observation]:
    """Hashing algorithm and salting of stored passwords.

    ``password_hash`` without an explicit algorithm constant counts as bcrypt,
    PHP's default. Plaintext storage (no hashing primitive) gives NA for both.
    """
    return _analyze(corpus, ["storage.hash_algorithm", "storage.salted"], rules)


def analyze_sql_construction(corpus: CodeCorpus, rules=None) -> Observation:
    return _analyze(corpus, ["sqli.parameterized"], rules)[0]


def analyze_output_escaping(corpus: CodeCorpus, rules=None) -> list[Observation]:
    return _analyze(corpus, ["xss.script_execution", "xss.html_injection"], rules)


SESSION_AND_LOGGING = ["logging.failed_logins", "session.cookie_httponly",
                       "session.cookie_samesite", "session.cookie_secure", "session.creation",
                       "session.regenerated", "session.timeout"]


def analyze_session_and_logging(corpus: CodeCorpus, rules=None) -> list[Observation]:
    return _analyze(corpus, SESSION_AND_LOGGING, rules)


def run_static(corpus: CodeCorpus, checklist: Checklist | None = None, *,
               rules: list[PatternRule] | None = None, supplementary: bool = True,
               label: str | None = None) -> ProbeReport:
    """Analyse ``corpus`` with ``rules`` (default: packaged rule set).

    Every Static-mode parameter gets exactly one observation; parameters no
    rule covers are Unknown. With ``supplementary`` the code-level
    counterparts of Dynamic parameters are included too. Observations are
    sorted by parameter id.
    """
    checklist = checklist or default_checklist()
    index = CorpusIndex(corpus)
    report = ProbeReport(label or "static", Source.Static)
    rule_set = list(rules if rules is not None else default_rules())
    if supplementary:
        covered = {r.parameter_id for r in rule_set}
        rule_set += [r for r in supplementary_rules() if r.parameter_id not in covered]
    analyzer = StaticAnalyzer(rule_set, checklist)
    found = {o.parameter_id: o for o in analyzer.evaluate(index)}
    for spec in checklist.by_mode(Mode.Static):
        if spec.id not in found:
            found[spec.id] = Observation(spec.id, UNKNOWN, Source.Static,
                                         note="no rule covers this parameter")
    report.observations = [found[pid] for pid in sorted(found)]
    report.finished_at = utcnow()
    return report
