"""Pattern rules and the text format they are stored in.

One rule per line, five pipe-separated fields::

    id|parameter_id|pattern|context|on_match/on_absence

A literal ``|`` inside a field (regex alternation) is written ``\\|``.
``pattern`` is a case-insensitive regular expression tried against each
statement. ``context`` narrows the match; several contexts are joined with
``&&`` and must all hold:

``statement``        the pattern alone decides
``tainted``          the statement uses request data, directly or through an
                     assignment chain in the same function
``unescaped``        like ``tainted`` but request data wrapped in an
                     HTML-escaping call does not count
``function:RE``      the enclosing function (or file scope) also matches RE
``near:N:RE``        RE matches within N statements of the hit, same scope
``flow:RE``          the statement uses a value produced by RE (directly or
                     via assignments in the same scope)
``noflow:RE``        the negation of ``flow:RE``

The verdict field names the observation value when the rule fires and when
it never fires anywhere in the corpus. ``-`` on the match side marks a
*guard* rule: it contributes no value, but its sites become evidence for an
absence verdict and its own absence verdict (usually ``NA``) says the
feature the parameter depends on is missing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

GUARD = "-"
_CONTEXT_RE = re.compile(r"^(statement|tainted|unescaped|function:.+|near:\d+:.+|flow:.+|noflow:.+)$",
                         re.S)


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class PatternRule:
    id: str
    parameter_id: str
    pattern: str
    context: str
    verdict_on_match: str
    verdict_on_absence: str

    def __post_init__(self):
        try:
            object.__setattr__(self, "_compiled", re.compile(self.pattern, re.I))
        except re.error as exc:
            raise RuleError(f"rule {self.id}: bad pattern: {exc}") from None
        for ctx in self.contexts:
            if not _CONTEXT_RE.match(ctx):
                raise RuleError(f"rule {self.id}: unknown context {ctx!r}")
            if ":" in ctx and not ctx.startswith("statement"):
                try:
                    re.compile(ctx.split(":", 2)[-1] if ctx.startswith("near:")
                               else ctx.split(":", 1)[1])
                except re.error as exc:
                    raise RuleError(f"rule {self.id}: bad context pattern: {exc}") from None
        if not self.verdict_on_match or not self.verdict_on_absence:
            raise RuleError(f"rule {self.id}: empty verdict")

    @property
    def regex(self) -> re.Pattern:
        return self._compiled  # type: ignore[attr-defined]

    @property
    def contexts(self) -> list[str]:
        return [c.strip() for c in self.context.split("&&")]

    @property
    def is_guard(self) -> bool:
        return self.verdict_on_match == GUARD

    def to_line(self) -> str:
        esc = lambda s: s.replace("|", r"\|")  # noqa: E731
        return "|".join([self.id, self.parameter_id, esc(self.pattern), esc(self.context),
                         f"{self.verdict_on_match}/{self.verdict_on_absence}"])


_FIELD_SPLIT = re.compile(r"(?<!\\)\|")


def parse_rules(text: str) -> list[PatternRule]:
    rules: list[PatternRule] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.replace(r"\|", "|") for f in _FIELD_SPLIT.split(line)]
        if len(fields) != 5:
            raise RuleError(f"line {lineno}: expected 5 fields, got {len(fields)}")
        rid, pid, pattern, context, verdicts = (f.strip() for f in fields)
        on_match, sep, on_absence = verdicts.partition("/")
        if not sep:
            raise RuleError(f"line {lineno}: verdicts must look like 'Yes/No'")
        if rid in seen:
            raise RuleError(f"line {lineno}: duplicate rule id {rid!r}")
        seen.add(rid)
        rules.append(PatternRule(rid, pid, pattern, context, on_match.strip(), on_absence.strip()))
    return rules


def load_rules_file(path: str | Path) -> list[PatternRule]:
    return parse_rules(Path(path).read_text(encoding="utf-8"))


def _packaged(name: str) -> list[PatternRule]:
    return parse_rules(resources.files("webaudit").joinpath(f"data/{name}").read_text("utf-8"))


def default_rules() -> list[PatternRule]:
    """Rules for the Static-mode parameters."""
    return _packaged("static_rules.txt")


def supplementary_rules() -> list[PatternRule]:
    """Code-level counterparts of some Dynamic parameters (XSS, session handling).

    Their observations only matter when no Dynamic observation exists.
    """
    return _packaged("static_rules_supplementary.txt")
