"""Response-header checks: CSP, framing, sniffing, HSTS, referrer and permissions policy."""

from __future__ import annotations

import re
from typing import Iterable, Mapping, Union

from webaudit.model import NO, YES, Evidence, Observation, Source

HeaderInput = Union[Mapping[str, str], Iterable[tuple[str, str]]]

_WILDCARD_SOURCES = {"*", "http:", "https:"}
_GOOD_REFERRER = {"no-referrer", "strict-origin-when-cross-origin"}
_REFERRER_TOKENS = {
    "no-referrer", "no-referrer-when-downgrade", "origin", "origin-when-cross-origin",
    "same-origin", "strict-origin", "strict-origin-when-cross-origin", "unsafe-url",
}
_DEVICE_FEATURES = ("camera", "microphone", "geolocation")


def header_pairs(headers: HeaderInput) -> list[tuple[str, str]]:
    if hasattr(headers, "multi_items"):
        items = headers.multi_items()
    elif isinstance(headers, Mapping):
        items = headers.items()
    else:
        items = headers
    return [(k.lower(), v) for k, v in items]


def _values(pairs: list[tuple[str, str]], name: str) -> list[str]:
    return [v for k, v in pairs if k == name]


def parse_csp(policy: str) -> dict[str, list[str]]:
    """Split one serialized policy into ``{directive: [source, ...]}``.

    Directive names are case-insensitive; a repeated directive is ignored
    after its first occurrence, as browsers do.
    """
    directives: dict[str, list[str]] = {}
    for chunk in policy.split(";"):
        tokens = chunk.split()
        if not tokens:
            continue
        name = tokens[0].lower()
        if name not in directives:
            directives[name] = [t for t in tokens[1:]]
    return directives


def script_sources(directives: dict[str, list[str]]) -> list[str] | None:
    """Effective source list for scripts; ``None`` when nothing restricts them."""
    for name in ("script-src", "default-src"):
        if name in directives:
            return directives[name]
    return None


def _blocks_inline(sources: list[str] | None) -> bool:
    if sources is None:
        return False
    lowered = [s.lower() for s in sources]
    if "'unsafe-inline'" not in lowered:
        return True
    # A nonce or hash makes browsers ignore 'unsafe-inline'.
    return any(s.startswith(("'nonce-", "'sha256-", "'sha384-", "'sha512-")) for s in lowered)


def _blocks_data(sources: list[str] | None) -> bool:
    if sources is None:
        return False
    return "data:" not in (s.lower() for s in sources)


def _restricts_external(sources: list[str] | None) -> bool:
    if sources is None:
        return False
    return not any(s.lower() in _WILDCARD_SOURCES for s in sources)


def parse_hsts_max_age(value: str) -> int | None:
    m = re.search(r"(?:^|;)\s*max-age\s*=\s*\"?(\d+)\"?\s*(?:;|$)", value, re.I)
    return int(m.group(1)) if m else None


def referrer_policy(value: str) -> str | None:
    """The token a browser would apply: the last recognised one in the list."""
    chosen = None
    for token in value.split(","):
        token = token.strip().lower()
        if token in _REFERRER_TOKENS:
            chosen = token
    return chosen


def parse_permissions_policy(value: str) -> dict[str, str]:
    """``camera=(), geolocation=(self)`` -> ``{"camera": "()", ...}``."""
    out: dict[str, str] = {}
    for m in re.finditer(r"([a-z0-9-]+)\s*=\s*(\([^)]*\)|\*|[^,]+)", value, re.I):
        out.setdefault(m.group(1).lower(), m.group(2).strip())
    return out


def _device_restricted(allowlist: str) -> bool:
    allowlist = allowlist.strip()
    if allowlist == "*":
        return False
    if allowlist.startswith("(") and allowlist.endswith(")"):
        return "*" not in allowlist[1:-1].split()
    return False


def check_security_headers(response_headers: HeaderInput,
                           request: str = "GET /") -> list[Observation]:
    """One observation per HTTP-security-header parameter.

    A missing header is a No observation, never an error.
    """
    pairs = header_pairs(response_headers)
    obs: list[Observation] = []

    def emit(pid: str, ok: bool | str, detail: str) -> None:
        value = ok if isinstance(ok, str) else (YES if ok else NO)
        obs.append(Observation(pid, value, Source.Dynamic, (Evidence(request, detail),)))

    csp_values = _values(pairs, "content-security-policy")
    if csp_values:
        policies = [parse_csp(v) for v in csp_values]
        srcs = [script_sources(p) for p in policies]
        shown = "Content-Security-Policy: " + " , ".join(csp_values)
        emit("headers.csp_present", True, shown)
        emit("headers.csp_inline", any(_blocks_inline(s) for s in srcs), shown)
        emit("headers.csp_data_uri", any(_blocks_data(s) for s in srcs), shown)
        emit("headers.csp_external", any(_restricts_external(s) for s in srcs), shown)
    else:
        for pid in ("headers.csp_present", "headers.csp_inline", "headers.csp_data_uri",
                    "headers.csp_external"):
            emit(pid, False, "Content-Security-Policy: absent")

    xfo = _values(pairs, "x-frame-options")
    xfo_ok = bool(xfo) and xfo[0].strip().upper() in ("DENY", "SAMEORIGIN")
    emit("headers.x_frame_options", xfo_ok,
         f"X-Frame-Options: {xfo[0]}" if xfo else "X-Frame-Options: absent")

    xcto = _values(pairs, "x-content-type-options")
    emit("headers.x_content_type_options", bool(xcto) and xcto[0].strip().lower() == "nosniff",
         f"X-Content-Type-Options: {xcto[0]}" if xcto else "X-Content-Type-Options: absent")

    hsts = _values(pairs, "strict-transport-security")
    if hsts:
        shown = f"Strict-Transport-Security: {hsts[0]}"
        max_age = parse_hsts_max_age(hsts[0])
        emit("headers.hsts_present", True, shown)
        emit("headers.hsts_max_age", str(max_age) if max_age else NO, shown)
    else:
        emit("headers.hsts_present", False, "Strict-Transport-Security: absent")
        emit("headers.hsts_max_age", NO, "Strict-Transport-Security: absent")

    ref = _values(pairs, "referrer-policy")
    if ref:
        shown = f"Referrer-Policy: {ref[-1]}"
        emit("headers.referrer_policy_present", bool(ref[-1].strip()), shown)
        emit("headers.referrer_policy_value", referrer_policy(ref[-1]) in _GOOD_REFERRER, shown)
    else:
        emit("headers.referrer_policy_present", False, "Referrer-Policy: absent")
        emit("headers.referrer_policy_value", False, "Referrer-Policy: absent")

    perm = _values(pairs, "permissions-policy")
    if perm:
        shown = f"Permissions-Policy: {', '.join(perm)}"
        features: dict[str, str] = {}
        for v in perm:
            for k, a in parse_permissions_policy(v).items():
                features.setdefault(k, a)
        restricted = all(f in features and _device_restricted(features[f])
                         for f in _DEVICE_FEATURES)
        emit("headers.permissions_policy_present", True, shown)
        emit("headers.permissions_policy_devices", restricted, shown)
    else:
        emit("headers.permissions_policy_present", False, "Permissions-Policy: absent")
        emit("headers.permissions_policy_devices", False, "Permissions-Policy: absent")
    return obs
