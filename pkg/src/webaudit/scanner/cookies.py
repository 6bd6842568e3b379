"""Set-Cookie parsing and session-cookie flag checks."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from webaudit.model import NA, NO, YES, Evidence, Observation, Source

SESSION_NAME_RE = re.compile(
    r"(sess|sid|phpsessid|jsessionid|aspsessionid|asp\.net_sessionid|connect\.sid|"
    r"rack\.session|laravel_session|_session|auth|token)", re.I)


@dataclass
class SetCookie:
    name: str
    value: str
    attributes: dict[str, str] = field(default_factory=dict)
    flags: set[str] = field(default_factory=set)

    @property
    def secure(self) -> bool:
        return "secure" in self.flags

    @property
    def httponly(self) -> bool:
        return "httponly" in self.flags

    @property
    def samesite(self) -> str | None:
        value = self.attributes.get("samesite")
        if value and value.lower() in ("strict", "lax", "none"):
            return value.capitalize()
        return None

    @property
    def deleted(self) -> bool:
        if self.attributes.get("max-age", "").strip() in ("0", "-1"):
            return True
        return not self.value

    def redacted(self) -> str:
        parts = [f"{self.name}=<redacted>"]
        parts += [f"{k}={v}" for k, v in sorted(self.attributes.items()) if k != "expires"]
        parts += sorted(self.flags)
        return "; ".join(parts)


def parse_set_cookie(header: str) -> SetCookie | None:
    pieces = header.split(";")
    name, sep, value = pieces[0].partition("=")
    if not sep or not name.strip():
        return None
    cookie = SetCookie(name.strip(), value.strip().strip('"'))
    for attr in pieces[1:]:
        key, sep, val = attr.partition("=")
        key = key.strip().lower()
        if not key:
            continue
        if sep:
            cookie.attributes[key] = val.strip()
        else:
            cookie.flags.add(key)
    return cookie


def pick_session_cookie(cookies: list[SetCookie], name: str | None = None) -> SetCookie | None:
    live = [c for c in cookies if not c.deleted]
    if name:
        return next((c for c in live if c.name == name), None)
    return next((c for c in live if SESSION_NAME_RE.search(c.name)), live[0] if live else None)


def check_cookie_flags(set_cookie_headers: list[str], session_cookie: str | None = None,
                       request: str = "POST /login") -> list[Observation]:
    """Session creation plus the Secure, HttpOnly and SameSite flags.

    With no session cookie at all, creation is No and the flags are NA.
    """
    cookies = [c for c in (parse_set_cookie(h) for h in set_cookie_headers) if c]
    chosen = pick_session_cookie(cookies, session_cookie)
    if chosen is None:
        ev = (Evidence(request, "no session Set-Cookie header"),)
        return [
            Observation("session.creation", NO, Source.Dynamic, ev),
            Observation("session.cookie_secure", NA, Source.Dynamic, ev,
                        note="no session cookie"),
            Observation("session.cookie_httponly", NA, Source.Dynamic, ev,
                        note="no session cookie"),
            Observation("session.cookie_samesite", NA, Source.Dynamic, ev,
                        note="no session cookie"),
        ]
    ev = (Evidence(request, f"Set-Cookie: {chosen.redacted()}"),)
    samesite = chosen.samesite
    return [
        Observation("session.creation", YES, Source.Dynamic, ev),
        Observation("session.cookie_secure", YES if chosen.secure else NO, Source.Dynamic, ev),
        Observation("session.cookie_httponly", YES if chosen.httponly else NO, Source.Dynamic, ev),
        Observation("session.cookie_samesite", YES if samesite else NO, Source.Dynamic, ev,
                    note=f"SameSite={samesite}" if samesite else ""),
    ]
