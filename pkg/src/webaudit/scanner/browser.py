"""Thin HTTP client used by the probes.

Cookies and redirects are handled here rather than by httpx: the scanner
must replay Secure cookies over plain-HTTP test targets and needs to see
every intermediate ``Location`` and ``Set-Cookie`` header.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from urllib.parse import urlencode, urljoin, urlsplit

import httpx

from webaudit.scanner.config import TargetConfig
from webaudit.scanner.cookies import parse_set_cookie

log = logging.getLogger(__name__)

REDACTED = "[REDACTED]"
_MAX_REDIRECTS = 5
_MAX_THROTTLE_RETRIES = 4
_MAX_RETRY_AFTER = 5.0


class ProbeNetworkError(RuntimeError):
    """The target could not be reached or stopped answering."""


class Redactor:
    def __init__(self, secrets: list[str]):
        # Longest first so a password containing the username is removed whole.
        self._secrets = sorted({s for s in secrets if s}, key=len, reverse=True)

    def __call__(self, text: str) -> str:
        for s in self._secrets:
            text = text.replace(s, REDACTED)
            quoted = urlencode({"x": s})[2:]
            if quoted != s:
                text = text.replace(quoted, REDACTED)
        return text


@dataclass
class Exchange:
    """A request plus its final response and the redirect chain before it."""

    method: str
    url: str
    response: httpx.Response
    chain: list[httpx.Response] = field(default_factory=list)

    @property
    def status(self) -> int:
        return self.response.status_code

    @property
    def text(self) -> str:
        return self.response.text

    @property
    def first_status(self) -> int:
        return self.chain[0].status_code if self.chain else self.response.status_code

    def set_cookie_headers(self) -> list[str]:
        out: list[str] = []
        for r in [*self.chain, self.response]:
            out.extend(r.headers.get_list("set-cookie"))
        return out

    def locations(self) -> list[str]:
        return [r.headers.get("location", "") for r in self.chain if r.headers.get("location")]


class Browser:
    """One cookie-carrying client bound to a target."""

    def __init__(self, target: TargetConfig, redactor: Redactor | None = None, *,
                 transport: httpx.BaseTransport | None = None, retry_throttled: bool = True):
        self.target = target
        self.redact = redactor or Redactor(target.secrets())
        self.retry_throttled = retry_throttled
        self.cookies: dict[str, str] = {}
        self._client = httpx.Client(timeout=target.request_timeout, follow_redirects=False,
                                    transport=transport,
                                    headers={"User-Agent": "webaudit/0.1"})

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "Browser":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _absolute(self, path_or_url: str) -> str:
        if urlsplit(path_or_url).scheme:
            return path_or_url
        return self.target.url(path_or_url)

    def _absorb(self, response: httpx.Response) -> None:
        for header in response.headers.get_list("set-cookie"):
            cookie = parse_set_cookie(header)
            if cookie is None:
                continue
            if cookie.deleted:
                self.cookies.pop(cookie.name, None)
            else:
                self.cookies[cookie.name] = cookie.value

    def _send_once(self, method: str, url: str, params, data, headers) -> httpx.Response:
        hdrs = dict(headers or {})
        if self.cookies:
            hdrs["Cookie"] = "; ".join(f"{k}={v}" for k, v in self.cookies.items())
        try:
            response = self._client.request(method, url, params=params, data=data, headers=hdrs)
        except httpx.HTTPError as exc:
            raise ProbeNetworkError(f"{method} {self.redact(url)}: {exc}") from exc
        finally:
            self._client.cookies.clear()
        response.read()
        self._absorb(response)
        return response

    def _send_throttled(self, method, url, params, data, headers) -> httpx.Response:
        for attempt in range(_MAX_THROTTLE_RETRIES + 1):
            response = self._send_once(method, url, params, data, headers)
            if response.status_code != 429 or not self.retry_throttled:
                return response
            if attempt == _MAX_THROTTLE_RETRIES:
                return response
            try:
                wait = float(response.headers.get("retry-after", "1"))
            except ValueError:
                wait = 1.0
            log.debug("throttled on %s, waiting %.1fs", url, wait)
            time.sleep(min(max(wait, 0.2), _MAX_RETRY_AFTER))
        return response

    def request(self, method: str, path_or_url: str, *, params=None, data=None,
                headers=None, follow: bool = True) -> Exchange:
        url = self._absolute(path_or_url)
        chain: list[httpx.Response] = []
        response = self._send_throttled(method, url, params, data, headers)
        hops = 0
        while follow and response.is_redirect and hops < _MAX_REDIRECTS:
            chain.append(response)
            url = urljoin(str(response.url), response.headers["location"])
            # 303 and the historic 301/302 behaviour both turn into GET.
            response = self._send_throttled("GET", url, None, None, None)
            method, params, data = "GET", None, None
            hops += 1
        return Exchange(method, str(chain[0].request.url) if chain else str(response.url),
                        response, chain)

    def get(self, path: str, **kw) -> Exchange:
        return self.request("GET", path, **kw)

    def post(self, path: str, data=None, **kw) -> Exchange:
        return self.request("POST", path, data=data, **kw)

    # Evidence helpers -------------------------------------------------

    def describe(self, method: str, path: str, params=None, data=None) -> str:
        text = f"{method} {path}"
        if params:
            text += "?" + urlencode(params, doseq=True)
        if data:
            text += " body=" + urlencode(data, doseq=True)
        return self.redact(text)

    def summarize(self, ex: Exchange, excerpt: str | None = None) -> str:
        parts = [f"{ex.status} {ex.response.reason_phrase}".strip()]
        if ex.chain:
            parts.insert(0, " -> ".join(str(r.status_code) for r in ex.chain))
        if excerpt:
            parts.append(excerpt)
        return self.redact(" | ".join(parts))
