"""A lexer just good enough for pattern rules over PHP.

It separates PHP code from inline HTML, drops comments, keeps string
literals verbatim and cuts the code into *statements* at ``;``, ``{`` and
``}``. Each statement remembers its line and the function it belongs to, so
rules can look at a small window of code without parsing the language.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_FUNCTION_RE = re.compile(r"\bfunction\b\s*&?\s*(\w+)?\s*\(", re.I)
_HEREDOC_RE = re.compile(r"<<<\s*(['\"]?)([A-Za-z_]\w*)\1\r?\n")


@dataclass(frozen=True)
class Statement:
    path: str
    line: int
    text: str
    scope: tuple[str, int]  # (function name or "<file>", occurrence number)

    @property
    def where(self) -> str:
        return f"{self.path}:{self.line}"


@dataclass
class _Builder:
    path: str
    statements: list[Statement] = field(default_factory=list)
    buf: list[str] = field(default_factory=list)
    start_line: int | None = None
    depth: int = 0
    scopes: list[tuple[str, int, int]] = field(default_factory=list)  # (name, id, depth)
    counter: int = 0

    def add(self, ch: str, line: int) -> None:
        if self.start_line is None and not ch.isspace():
            self.start_line = line
        self.buf.append(ch)

    @property
    def scope(self) -> tuple[str, int]:
        if self.scopes:
            name, ident, _ = self.scopes[-1]
            return (name, ident)
        return ("<file>", 0)

    def flush(self, terminator: str = "") -> None:
        text = re.sub(r"\s+", " ", "".join(self.buf)).strip()
        if terminator == "{":
            self.depth += 1
            m = _FUNCTION_RE.search(text)
            if m:
                # The header belongs to the function so its parameters are in scope.
                self.counter += 1
                self.scopes.append((m.group(1) or "{closure}", self.counter, self.depth))
        if text:
            self.statements.append(Statement(self.path, self.start_line or 1, text, self.scope))
        if terminator == "}":
            if self.scopes and self.scopes[-1][2] == self.depth:
                self.scopes.pop()
            self.depth = max(0, self.depth - 1)
        self.buf = []
        self.start_line = None


def _php_only(text: str, path: str) -> bool:
    return "<?" not in text and path.lower().endswith((".php", ".inc", ".phtml"))


def split_statements(text: str, path: str = "<memory>") -> list[Statement]:
    """Statements of the PHP code in ``text``; inline HTML is ignored.

    ``<?= expr ?>`` becomes ``echo expr``. A file without any PHP open tag is
    treated as pure PHP only when its name has a PHP extension.
    """
    b = _Builder(path)
    n = len(text)
    i = 0
    line = 1
    in_code = _php_only(text, path)
    while i < n:
        ch = text[i]
        if not in_code:
            if text.startswith("<?php", i) or text.startswith("<?PHP", i):
                in_code, i = True, i + 5
                continue
            if text.startswith("<?=", i):
                in_code, i = True, i + 3
                b.add("e", line), b.buf.extend("cho ")
                continue
            if ch == "\n":
                line += 1
            i += 1
            continue
        # in PHP code
        if text.startswith("?>", i):
            b.flush(";")
            in_code, i = False, i + 2
            continue
        if ch == "\n":
            line += 1
            b.add(" ", line)
            i += 1
            continue
        if text.startswith("//", i) or (ch == "#" and not text.startswith("#[", i)):
            while i < n and text[i] != "\n" and not text.startswith("?>", i):
                i += 1
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            end = n if end < 0 else end + 2
            line += text.count("\n", i, end)
            b.add(" ", line)
            i = end
            continue
        if ch in ("'", '"', "`"):
            j = i + 1
            while j < n and text[j] != ch:
                j += 2 if text[j] == "\\" else 1
            j = min(j + 1, n)
            literal = text[i:j]
            b.add(ch, line)
            b.buf.extend(literal[1:])
            line += literal.count("\n")
            i = j
            continue
        m = _HEREDOC_RE.match(text, i)
        if m:
            close = re.compile(rf"^[ \t]*{re.escape(m.group(2))}\b", re.M)
            end_m = close.search(text, m.end())
            end = end_m.end() if end_m else n
            literal = text[i:end]
            b.add("<", line)
            b.buf.extend(literal[1:])
            line += literal.count("\n")
            i = end
            continue
        if ch in ";{}":
            b.flush(ch)
            i += 1
            continue
        b.add(ch, line)
        i += 1
    b.flush()
    return b.statements
