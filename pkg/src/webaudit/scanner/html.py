"""Just enough HTML parsing for forms, links and reflection contexts."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from html.parser import HTMLParser

CSRF_FIELD_RE = re.compile(r"csrf|xsrf|_token|authenticity|anti.?forgery|nonce", re.I)


@dataclass
class Form:
    action: str
    method: str
    fields: list[tuple[str, str, str]] = field(default_factory=list)  # (name, type, value)

    def data(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for name, ftype, value in self.fields:
            if ftype in ("submit", "button", "image", "file", "reset"):
                continue
            out[name] = value or ("webaudit" if ftype in ("text", "textarea", "") else value)
        return out

    def token_field(self) -> str | None:
        for name, ftype, _ in self.fields:
            if ftype == "hidden" and CSRF_FIELD_RE.search(name):
                return name
        return None


class _Harvester(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.forms: list[Form] = []
        self.urls: list[str] = []
        self.meta: dict[str, str] = {}
        self._form: Form | None = None

    def handle_starttag(self, tag, attrs):
        a = {k.lower(): (v or "") for k, v in attrs}
        for key in ("href", "src", "action", "formaction"):
            if a.get(key):
                self.urls.append(a[key])
        if tag == "meta":
            if a.get("name"):
                self.meta[a["name"].lower()] = a.get("content", "")
            if a.get("http-equiv", "").lower() == "refresh" and "url=" in a.get("content", "").lower():
                self.urls.append(a["content"].split("=", 1)[1].strip())
        if tag == "form":
            self._form = Form(a.get("action", ""), (a.get("method") or "get").lower())
            self.forms.append(self._form)
        elif tag in ("input", "textarea", "select", "button") and self._form is not None:
            if a.get("name"):
                ftype = "textarea" if tag == "textarea" else a.get("type", "text").lower()
                self._form.fields.append((a["name"], ftype, a.get("value", "")))

    def handle_endtag(self, tag):
        if tag == "form":
            self._form = None


def harvest(body: str) -> _Harvester:
    parser = _Harvester()
    parser.feed(body)
    parser.close()
    return parser


_INERT_OPENERS = re.compile(r"<(textarea|title|xmp|noscript|plaintext|style)\b|<!--", re.I)


def _unclosed_inert(prefix: str) -> bool:
    last = None
    for m in _INERT_OPENERS.finditer(prefix):
        last = m
    if last is None:
        return False
    tail = prefix[last.end():]
    if last.group(0) == "<!--":
        return "-->" not in tail
    return re.search(rf"</{last.group(1)}\s*>", tail, re.I) is None


def reflected_live(body: str, payload: str) -> int | None:
    """Offset of a raw reflection of ``payload`` that a browser would parse as markup.

    Reflections inside a tag (attribute values), comments and raw-text
    elements such as ``<textarea>`` are inert and skipped.
    """
    start = 0
    while True:
        idx = body.find(payload, start)
        if idx < 0:
            return None
        prefix = body[:idx]
        inside_tag = prefix.rfind("<") > prefix.rfind(">")
        if not inside_tag and not _unclosed_inert(prefix):
            return idx
        start = idx + 1
