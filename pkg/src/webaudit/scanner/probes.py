"""Black-box probes, one function per group of checklist parameters.

Every probe opens its own :class:`Browser` so probes never share cookies.
Each returns Observations with source Dynamic; a probe that cannot decide
returns Unknown rather than guessing, and Yes/No always carries evidence.
"""

from __future__ import annotations

import json
import logging
import re
import secrets
import string
import time
from dataclasses import dataclass
from typing import Callable

import httpx

from webaudit import totp
from webaudit.model import NA, NO, UNKNOWN, YES, Evidence, Observation, Source
from webaudit.scanner.browser import Browser, Exchange, ProbeNetworkError, Redactor
from webaudit.scanner.config import Signatures, TargetConfig
from webaudit.scanner.cookies import SESSION_NAME_RE, check_cookie_flags, parse_set_cookie
from webaudit.scanner.html import harvest, reflected_live

log = logging.getLogger(__name__)


class DestructiveProbeRefused(RuntimeError):
    """A state-mutating probe was asked to run without ``destructive_allowed``."""


@dataclass
class ProbeContext:
    target: TargetConfig
    signatures: Signatures
    transport: httpx.BaseTransport | None = None

    def __post_init__(self):
        self.redact = Redactor(self.target.secrets())

    def browser(self, retry_throttled: bool = True) -> Browser:
        return Browser(self.target, self.redact, transport=self.transport,
                       retry_throttled=retry_throttled)


def _obs(pid: str, value: str, evidence: list[tuple[str, str]] | tuple = (),
         note: str = "") -> Observation:
    return Observation(pid, value, Source.Dynamic, tuple(Evidence(q, r) for q, r in evidence),
                       note=note)


def _unknown(pids, reason: str, evidence=()) -> list[Observation]:
    return [_obs(pid, UNKNOWN, evidence, note=reason) for pid in pids]


def _nonce(n: int = 6) -> str:
    return secrets.token_hex(n)


def _excerpt(text: str, match: re.Match | int | None, width: int = 60) -> str:
    if match is None:
        return ""
    start = match.start() if isinstance(match, re.Match) else match
    end = match.end() if isinstance(match, re.Match) else match
    snippet = text[max(0, start - width // 2): end + width // 2]
    return "…" + re.sub(r"\s+", " ", snippet).strip() + "…"


# ---------------------------------------------------------------------------
# login helpers
# ---------------------------------------------------------------------------

@dataclass
class LoginResult:
    state: str  # success | mfa | locked | throttled | failed
    exchange: Exchange
    request: str

    @property
    def first_factor_ok(self) -> bool:
        return self.state in ("success", "mfa")


def classify_login(ctx: ProbeContext, ex: Exchange) -> str:
    sig, target = ctx.signatures, ctx.target
    body = ex.text
    if ex.status == 429 or (ex.status >= 400 and sig.search("throttle_markers", body)):
        return "throttled"
    if ex.status == 423 or sig.search("lockout_markers", body):
        return "locked"
    if ex.status >= 400:
        return "failed"
    if sig.search("mfa_markers", body) and "<input" in body.lower():
        return "mfa"
    lowered = body.lower()
    if any(m in lowered for m in target.login_success_markers):
        return "success"
    if ex.chain and target.login_path and target.login_path not in str(ex.response.url):
        return "success"
    return "failed"


def login(ctx: ProbeContext, browser: Browser, username: str, password: str, *,
          complete_mfa: bool = True) -> LoginResult:
    t = ctx.target
    data = {t.username_field: username, t.password_field: password}
    req = browser.describe("POST", t.login_path, data=data)
    ex = browser.post(t.login_path, data)
    state = classify_login(ctx, ex)
    if state == "mfa" and complete_mfa and t.totp_secret and t.mfa_path:
        code = totp.totp(t.totp_secret)
        ex = browser.post(t.mfa_path, {t.otp_field: code})
        req += " ; " + browser.describe("POST", t.mfa_path, data={t.otp_field: "<otp>"})
        state = classify_login(ctx, ex)
        if state == "mfa":
            state = "failed"
    return LoginResult(state, ex, req)


def is_authenticated(ctx: ProbeContext, browser: Browser) -> tuple[bool, Exchange]:
    ex = browser.get(ctx.target.profile_path, follow=False)
    return ex.status == 200, ex


def session_cookie_name(ctx: ProbeContext, set_cookie_headers: list[str]) -> str | None:
    if ctx.target.session_cookie:
        return ctx.target.session_cookie
    names = [c.name for c in map(parse_set_cookie, set_cookie_headers) if c and not c.deleted]
    return next((n for n in names if SESSION_NAME_RE.search(n)), names[0] if names else None)


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------

def probe_headers(ctx: ProbeContext) -> list[Observation]:
    from webaudit.scanner.headers import check_security_headers

    with ctx.browser() as b:
        ex = b.get("/")
    return check_security_headers(ex.response.headers, request=f"GET {ctx.target.base_url}")


def probe_cookies(ctx: ProbeContext) -> list[Observation]:
    """Collect the Set-Cookie headers of the login page and the login itself."""
    t = ctx.target
    with ctx.browser() as b:
        pre = b.get(t.login_path)
        result = login(ctx, b, t.valid_credentials.username, t.valid_credentials.password)
    if not result.first_factor_ok:
        return _unknown(["session.creation", "session.cookie_secure", "session.cookie_httponly",
                         "session.cookie_samesite"], f"login {result.state}",
                        [(result.request, b.summarize(result.exchange))])
    headers = result.exchange.set_cookie_headers() + pre.set_cookie_headers()
    return check_cookie_flags(headers, t.session_cookie,
                              request=f"{result.request} (after GET {t.login_path})")


def probe_login_method(ctx: ProbeContext) -> Observation:
    """Does the login endpoint refuse credentials sent in a GET query string?"""
    t = ctx.target
    pid = "xss.post_only_login"
    creds = t.valid_credentials
    params = {t.username_field: creds.username, t.password_field: creds.password}
    try:
        with ctx.browser() as b:
            get_req = b.describe("GET", t.login_path, params=params)
            ex = b.get(t.login_path, params=params)
            get_state = classify_login(ctx, ex)
            get_ev = (get_req, b.summarize(ex))
        if get_state in ("success", "mfa"):
            return _obs(pid, NO, [get_ev], note="GET request authenticated")
        with ctx.browser() as b:
            result = login(ctx, b, creds.username, creds.password, complete_mfa=False)
            post_ev = (result.request, b.summarize(result.exchange))
    except ProbeNetworkError as exc:
        return _obs(pid, UNKNOWN, note=f"network failure: {ctx.redact(str(exc))}")
    if not result.first_factor_ok:
        return _obs(pid, UNKNOWN, [get_ev, post_ev], note="POST login did not succeed either")
    return _obs(pid, YES, [get_ev, post_ev])


def probe_bruteforce_lockout(ctx: ProbeContext) -> list[Observation]:
    """Burn ``max_failed_attempts`` failures on the test account, then log in properly.

    Mutates account state; refuses to run unless destructive probes are allowed.
    """
    t = ctx.target
    if not t.destructive_allowed:
        raise DestructiveProbeRefused("lockout probe needs destructive_allowed")
    pids = ["bruteforce.lockout", "bruteforce.captcha"]
    user = t.valid_credentials.username
    evidence: list[tuple[str, str]] = []
    announced = captcha = None
    try:
        with ctx.browser() as b:
            for i in range(t.max_failed_attempts):
                res = login(ctx, b, user, t.invalid_credentials.password, complete_mfa=False)
                body = res.exchange.text
                if i in (0, t.max_failed_attempts - 1):
                    evidence.append((f"[{i + 1}/{t.max_failed_attempts}] {res.request}",
                                     b.summarize(res.exchange)))
                if announced is None and res.state == "locked":
                    announced = (res.request, b.summarize(res.exchange, _excerpt(
                        body, ctx.signatures.search("lockout_markers", body))))
                m = ctx.signatures.search("captcha_markers", body)
                if captcha is None and m:
                    captcha = (res.request, b.summarize(res.exchange, _excerpt(body, m)))
            page = b.get(t.login_path)
            m = ctx.signatures.search("captcha_markers", page.text)
            if captcha is None and m:
                captcha = (f"GET {t.login_path}", b.summarize(page, _excerpt(page.text, m)))
        with ctx.browser() as b:
            final = login(ctx, b, user, t.valid_credentials.password, complete_mfa=False)
            final_ev = (f"valid login after failures: {final.request}",
                        b.summarize(final.exchange))
            m = ctx.signatures.search("captcha_markers", final.exchange.text)
            if captcha is None and m:
                captcha = final_ev
    except ProbeNetworkError as exc:
        return _unknown(pids, f"network failure: {ctx.redact(str(exc))}")
    evidence.append(final_ev)
    locked = final.state == "locked" or announced is not None
    out = [
        _obs("bruteforce.lockout", YES if locked else NO,
             evidence + ([announced] if announced else [])),
        _obs("bruteforce.captcha", YES if captcha else NO,
             [captcha] if captcha else evidence),
        _obs("bruteforce.lockout_notification", UNKNOWN,
             note="notification delivery needs manual attestation"),
    ]
    return out


def probe_rate_limit(ctx: ProbeContext) -> list[Observation]:
    """Fire ``burst_size`` quick logins for throwaway usernames and look for throttling.

    Fresh usernames keep per-account defences (lockout, CAPTCHA after N
    failures) out of the picture, so any limiting seen is per client.
    """
    t = ctx.target
    if not t.destructive_allowed:
        raise DestructiveProbeRefused("rate-limit probe needs destructive_allowed")
    pids = ["ratelimit.enabled", "ratelimit.response"]
    statuses: dict[int, int] = {}
    throttled: list[tuple[str, Exchange]] = []
    retry_after = 0.0
    try:
        with ctx.browser(retry_throttled=False) as b:
            for _ in range(t.burst_size):
                res = login(ctx, b, f"wa-burst-{_nonce(4)}", t.invalid_credentials.password,
                            complete_mfa=False)
                ex = res.exchange
                statuses[ex.status] = statuses.get(ex.status, 0) + 1
                body = ex.text
                sig = ctx.signatures
                if (ex.status == 429 or sig.search("throttle_markers", body)
                        or sig.search("captcha_markers", body)
                        or sig.search("lockout_markers", body)):
                    throttled.append((res.request, ex))
                    try:
                        retry_after = max(retry_after,
                                          float(ex.response.headers.get("retry-after", 0)))
                    except ValueError:
                        pass
    except ProbeNetworkError as exc:
        return _unknown(pids, f"network failure mid-burst: {ctx.redact(str(exc))}")
    summary = ", ".join(f"{n}x{code}" for code, n in sorted(statuses.items()))
    burst_req = f"{t.burst_size} x POST {t.login_path} (throwaway usernames)"
    if not throttled:
        ev = [(burst_req, f"no throttling: {summary}")]
        return [_obs("ratelimit.enabled", NO, ev),
                _obs("ratelimit.response", NA, ev, note="no rate limiting observed")]
    req, ex = throttled[0]
    body = ex.text
    if ctx.signatures.search("captcha_markers", body):
        kind = "CAPTCHA"
    elif ctx.signatures.search("lockout_markers", body):
        kind = "Lockout"
    else:
        kind = "Error Code"
    ev = [(burst_req, f"{len(throttled)} of {t.burst_size} throttled: {summary}"),
          (req, ctx.redact(f"{ex.status} {ex.response.reason_phrase}"))]
    # Let the limiter window drain before later probes log in.
    time.sleep(min(max(retry_after, 1.0), 5.0))
    return [_obs("ratelimit.enabled", YES, ev), _obs("ratelimit.response", kind, ev)]


def _urls_with(value: str, urls: list[str]) -> list[str]:
    return [u for u in urls if value and value in u]


def probe_session_lifecycle(ctx: ProbeContext) -> list[Observation]:
    """Regeneration at login, fixation, session-in-URL and idle timeout."""
    t = ctx.target
    pids = ["session.regenerated", "session.fixation", "session.cookie_only", "session.timeout"]
    creds = t.valid_credentials
    try:
        b = ctx.browser()
        pre = b.get(t.login_path)
        name = session_cookie_name(ctx, pre.set_cookie_headers())
        pre_sid = b.cookies.get(name) if name else None
        result = login(ctx, b, creds.username, creds.password)
        if not result.first_factor_ok or result.state != "success":
            b.close()
            return _unknown(pids, f"login {result.state}",
                            [(result.request, b.summarize(result.exchange))])
        name = name or session_cookie_name(ctx, result.exchange.set_cookie_headers())
        post_sid = b.cookies.get(name) if name else None
        login_ev = (f"GET {t.login_path} ; {result.request}", b.summarize(result.exchange))
        if post_sid is None:
            b.close()
            return [_obs(pid, NA, [login_ev], note="no session cookie issued") for pid in pids]

        out: list[Observation] = []
        if pre_sid is None:
            out.append(_obs("session.regenerated", YES, [login_ev],
                            note="no pre-authentication session; fresh session at login"))
        else:
            changed = pre_sid != post_sid
            out.append(_obs("session.regenerated", YES if changed else NO,
                            [(login_ev[0], login_ev[1] + (" | session id changed" if changed
                                                          else " | session id unchanged"))]))

        # Fixation: plant an identifier of our choosing, log in, replay it elsewhere.
        planted = secrets.token_hex(16)
        with ctx.browser() as victim:
            victim.cookies[name] = planted
            victim.get(t.login_path)
            vres = login(ctx, victim, creds.username, creds.password)
        if vres.state != "success":
            out.append(_obs("session.fixation", UNKNOWN, note=f"login {vres.state}"))
        else:
            with ctx.browser() as attacker:
                attacker.cookies[name] = planted
                authed, ex = is_authenticated(ctx, attacker)
            fix_ev = [(f"{name}=<planted> ; {vres.request} ; GET {t.profile_path} with "
                       f"{name}=<planted>", attacker.summarize(ex))]
            out.append(_obs("session.fixation", NO if authed else YES, fix_ev,
                            note="planted identifier authenticated" if authed else ""))

        urls = result.exchange.locations() + [str(result.exchange.response.url)]
        urls += harvest(result.exchange.text).urls
        leaks = _urls_with(post_sid, urls)
        if leaks:
            shown = leaks[0].replace(post_sid, "<session-id>")
            out.append(_obs("session.cookie_only", NO, [(login_ev[0], f"session id in URL: "
                                                          f"{ctx.redact(shown)}")]))
        else:
            out.append(_obs("session.cookie_only", YES,
                            [(login_ev[0], f"session id absent from {len(urls)} URLs")]))

        budget = t.session_timeout_budget
        if budget <= 0 or budget > t.max_idle_wait:
            out.append(_obs("session.timeout", UNKNOWN,
                            note=f"idle budget {budget}s outside probe allowance "
                                 f"{t.max_idle_wait}s"))
        else:
            authed, before = is_authenticated(ctx, b)
            if not authed:
                out.append(_obs("session.timeout", UNKNOWN,
                                note="session not usable right after login"))
            else:
                time.sleep(budget)
                still, after = is_authenticated(ctx, b)
                ev = [(f"GET {t.profile_path} after {budget:g}s idle", b.summarize(after))]
                out.append(_obs("session.timeout", NO if still else YES, ev))
        b.close()
        return out
    except ProbeNetworkError as exc:
        return _unknown(pids, f"network failure: {ctx.redact(str(exc))}")


def _form_rejected(ctx: ProbeContext, ex: Exchange) -> bool:
    return ex.status >= 400 or bool(ctx.signatures.search("csrf_rejection_markers", ex.text))


def probe_csrf(ctx: ProbeContext) -> list[Observation]:
    """Look for an anti-CSRF token on the state-changing form, then replay without it."""
    t = ctx.target
    pids = ["csrf.token_present", "csrf.validation"]
    if not t.form_path:
        return _unknown(pids, "no state-changing form configured")
    try:
        with ctx.browser() as b:
            result = login(ctx, b, t.valid_credentials.username, t.valid_credentials.password)
            if result.state != "success":
                return _unknown(pids, f"login {result.state}")

            def fetch_form():
                page = b.get(t.form_path)
                forms = [f for f in harvest(page.text).forms if f.method == "post"]
                return page, (forms[0] if forms else None)

            page, form = fetch_form()
            if form is None:
                return _unknown(pids, f"no POST form on {t.form_path}")
            token = form.token_field()
            action = form.action or t.form_path
            form_ev = (f"GET {t.form_path}", f"form action={action} fields="
                       + ",".join(n for n, _, _ in form.fields))
            if token is None:
                return [_obs("csrf.token_present", NO, [form_ev]),
                        _obs("csrf.validation", NA, [form_ev], note="no token to validate")]

            attempts = {}
            for label in ("control", "removed", "mutated"):
                _, form = fetch_form()
                if form is None or form.token_field() is None:
                    return [_obs("csrf.token_present", YES, [form_ev]),
                            _obs("csrf.validation", UNKNOWN, note="form vanished on refetch")]
                data = form.data()
                if label == "removed":
                    data.pop(token, None)
                elif label == "mutated":
                    value = data.get(token, "")
                    data[token] = (value[::-1] if len(set(value)) > 1 else "") + "x"
                ex = b.post(action, data, follow=False)
                attempts[label] = (f"POST {action} ({label} token)", b.summarize(ex)), ex
    except ProbeNetworkError as exc:
        return _unknown(pids, f"network failure: {ctx.redact(str(exc))}")
    present = _obs("csrf.token_present", YES, [form_ev])
    control_ev, control = attempts["control"]
    if _form_rejected(ctx, control):
        return [present, _obs("csrf.validation", UNKNOWN, [control_ev],
                              note="legitimate submission was rejected")]
    forged = [attempts["removed"], attempts["mutated"]]
    enforced = all(_form_rejected(ctx, ex) for _, ex in forged)
    return [present, _obs("csrf.validation", YES if enforced else NO,
                          [control_ev] + [ev for ev, _ in forged])]


def probe_xss_reflection(ctx: ProbeContext) -> list[Observation]:
    """Reflect a marked script payload and a marked benign tag.

    Yes (vulnerable) only when the exact marked payload comes back unencoded
    in a parsing context, so a Yes cannot come from unrelated page content.
    """
    pids = ["xss.script_execution", "xss.html_injection"]
    surface = ctx.target.reflect_surface
    if surface is None:
        return _unknown(pids, "no reflecting input surface configured")
    path, param = surface
    marker = f"wa{_nonce()}"
    payloads = {
        "xss.script_execution": f'<script>alert("{marker}")</script>',
        "xss.html_injection": f'<b id="{marker}">{marker}</b>',
    }
    out = []
    try:
        with ctx.browser() as b:
            for pid, payload in payloads.items():
                req = b.describe("GET", path, params={param: payload})
                ex = b.get(path, params={param: payload})
                idx = reflected_live(ex.text, payload)
                if idx is not None:
                    out.append(_obs(pid, YES, [(req, b.summarize(ex, _excerpt(ex.text, idx)))]))
                else:
                    where = "encoded" if marker in ex.text else "not reflected"
                    out.append(_obs(pid, NO, [(req, b.summarize(ex, f"payload {where}"))]))
    except ProbeNetworkError as exc:
        return _unknown(pids, f"surface unreachable: {ctx.redact(str(exc))}")
    return out


_SQL_PAYLOADS = ("'", "'--", "' OR '1'='1")


def probe_sqli_error(ctx: ProbeContext) -> list[Observation]:
    """Metacharacter payloads against the search and login surfaces."""
    t = ctx.target
    pid = "sqli.escaped"
    sig = ctx.signatures
    reached = False
    try:
        with ctx.browser() as b:
            if t.search_path:
                base = b.get(t.search_path, params={t.search_param: "webaudit"})
                reached = True
                baseline_hit = sig.search("sql_errors", base.text)
                for payload in _SQL_PAYLOADS:
                    value = f"wa{payload}"
                    req = b.describe("GET", t.search_path, params={t.search_param: value})
                    ex = b.get(t.search_path, params={t.search_param: value})
                    m = sig.search("sql_errors", ex.text)
                    if m and not baseline_hit:
                        return [_obs(pid, NO, [(req, b.summarize(ex, _excerpt(ex.text, m)))],
                                     note="database error signature")]
            if t.login_path:
                for payload in _SQL_PAYLOADS:
                    user = f"wa{_nonce(3)}{payload}"
                    res = login(ctx, b, user, t.invalid_credentials.password, complete_mfa=False)
                    reached = True
                    m = sig.search("sql_errors", res.exchange.text)
                    if m:
                        return [_obs(pid, NO, [(res.request, b.summarize(
                            res.exchange, _excerpt(res.exchange.text, m)))],
                            note="database error signature")]
                taut = "' OR '1'='1' -- "
                res = login(ctx, b, taut, t.invalid_credentials.password, complete_mfa=False)
                if res.first_factor_ok:
                    return [_obs(pid, NO, [(res.request, b.summarize(res.exchange))],
                                 note="tautology authenticated")]
    except ProbeNetworkError as exc:
        return [_obs(pid, UNKNOWN, note=f"surface unreachable: {ctx.redact(str(exc))}")]
    if not reached:
        return [_obs(pid, UNKNOWN, note="no search or login surface configured")]
    surfaces = ", ".join(p for p in (t.search_path, t.login_path) if p)
    return [_obs(pid, YES, [(f"{len(_SQL_PAYLOADS)} metacharacter payloads on {surfaces}",
                             "no SQL error signature, tautology rejected")])]


def probe_hpp(ctx: ProbeContext) -> Observation:
    """Send one parameter twice and see which value the application uses."""
    t = ctx.target
    pid = "hpp.duplicate_params"
    if not t.hpp_path:
        return _obs(pid, UNKNOWN, note="no parameter-reflecting endpoint configured")
    first, second = f"wa{_nonce(4)}a", f"wa{_nonce(4)}b"
    params = [(t.hpp_param, first), (t.hpp_param, second)]
    try:
        with ctx.browser() as b:
            req = b.describe("GET", t.hpp_path, params=params)
            ex = b.get(t.hpp_path, params=params)
    except ProbeNetworkError as exc:
        return _obs(pid, UNKNOWN, note=f"endpoint unreachable: {ctx.redact(str(exc))}")
    ev = [(req, b.summarize(ex))]
    if ex.status == 404:
        return _obs(pid, NA, ev, note="endpoint absent")
    if 400 <= ex.status < 500:
        return _obs(pid, "rejected", ev)
    body = ex.text
    has_a, has_b = first in body, second in body
    if has_a and has_b:
        return _obs(pid, "concatenated", ev)
    if has_a:
        return _obs(pid, "first-wins", ev)
    if has_b:
        return _obs(pid, "last-wins", ev)
    return _obs(pid, UNKNOWN, ev, note="neither value reflected")


def _normalize(ctx: ProbeContext, body: str, names: list[str]) -> str:
    for n in sorted(names, key=len, reverse=True):
        body = body.replace(n, "<user>")
    for pat in ctx.signatures.compiled("nonce_patterns"):
        body = pat.sub("<nonce>", body)
    return re.sub(r"\s+", " ", body).strip()


def _marker_set(ctx: ProbeContext, name: str, text: str) -> set[str]:
    return {m.group(0).lower() for pat in ctx.signatures.compiled(name) for m in pat.finditer(text)}


def probe_user_enumeration(ctx: ProbeContext, allow_registration: bool | None = None
                           ) -> list[Observation]:
    """Compare failed logins for a real and a made-up username."""
    t = ctx.target
    pids = ["errors.username_disclosure", "errors.password_rules_disclosure"]
    if allow_registration is None:
        allow_registration = t.destructive_allowed
    real, fake = t.valid_credentials.username, t.nonexistent_username
    try:
        with ctx.browser() as b:
            r_real = login(ctx, b, real, t.invalid_credentials.password, complete_mfa=False)
        with ctx.browser() as b:
            r_fake = login(ctx, b, fake, t.invalid_credentials.password, complete_mfa=False)
            reg = None
            if allow_registration and t.register_path:
                data = {t.username_field: f"wa{_nonce(4)}", t.password_field: "a",
                        t.email_field: f"wa{_nonce(4)}@{t.email_domain}"}
                reg = (b.describe("POST", t.register_path, data=data),
                       b.post(t.register_path, data))
    except ProbeNetworkError as exc:
        return _unknown(pids, f"endpoints unreachable: {ctx.redact(str(exc))}")
    if r_real.state in ("throttled", "locked") or r_fake.state == "throttled":
        return _unknown(pids, "login responses throttled or locked")
    a = _normalize(ctx, r_real.exchange.text, [real, fake])
    c = _normalize(ctx, r_fake.exchange.text, [real, fake])
    ev = [(r_real.request, b.summarize(r_real.exchange)),
          (r_fake.request, b.summarize(r_fake.exchange))]
    out = []
    markers_real = _marker_set(ctx, "existence_markers", a)
    markers_fake = _marker_set(ctx, "existence_markers", c)
    if (a != c or r_real.exchange.status != r_fake.exchange.status) and markers_real != markers_fake:
        detail = f"existing user: {sorted(markers_real)} / unknown user: {sorted(markers_fake)}"
        out.append(_obs("errors.username_disclosure", YES, ev + [("diff", detail)]))
    else:
        out.append(_obs("errors.username_disclosure", NO, ev,
                        note="identical" if a == c else "differences carry no existence signal"))

    rule_ev = None
    for req, ex in [(r_real.request, r_real.exchange), (r_fake.request, r_fake.exchange)] + (
            [reg] if reg else []):
        m = ctx.signatures.search("password_rule_markers", ex.text)
        if m:
            rule_ev = (req, b.summarize(ex, _excerpt(ex.text, m)))
            break
    if rule_ev:
        out.append(_obs("errors.password_rules_disclosure", YES, [rule_ev]))
    else:
        shown = ev + ([(reg[0], b.summarize(reg[1]))] if reg else [])
        out.append(_obs("errors.password_rules_disclosure", NO, shown))
    return out


def _password_ladder() -> list[tuple[str, str]]:
    lower = "".join(secrets.choice(string.ascii_lowercase) for _ in range(16))
    digits = "".join(secrets.choice(string.digits) for _ in range(4))
    return [
        ("No", "aB3$k"),
        ("Only Length", lower),
        ("Length+letters+numbers", lower[:12] + digits),
        ("Full", "Wa" + lower[:10] + digits + "!#"),
    ]


_REG_FAIL_RE = re.compile(r"\b(error|invalid|failed|must|too short|too weak|weak password)\b", re.I)


def _registration_accepted(ex: Exchange) -> bool:
    return ex.status < 400 and not _REG_FAIL_RE.search(ex.text)


def register(ctx: ProbeContext, browser: Browser, username: str, password: str,
             email: str) -> tuple[str, Exchange]:
    t = ctx.target
    data = {t.username_field: username, t.password_field: password, t.email_field: email}
    return browser.describe("POST", t.register_path, data=data), browser.post(t.register_path, data)


def probe_password_policy(ctx: ProbeContext) -> list[Observation]:
    """Register throwaway accounts with a fixed ladder of passwords.

    The first password the application accepts names the policy level.
    """
    t = ctx.target
    if not t.destructive_allowed:
        raise DestructiveProbeRefused("password-policy probe needs destructive_allowed")
    manual = [_obs("password.expiration", UNKNOWN, note="not observable in one session"),
              _obs("password.reuse", UNKNOWN, note="not observable in one session")]
    if not t.register_path:
        return [_obs("password.complexity", UNKNOWN, note="no registration endpoint")] + manual
    evidence = []
    try:
        with ctx.browser() as b:
            for level, password in _password_ladder():
                user = f"wa{_nonce(4)}"
                req, ex = register(ctx, b, user, password, f"{user}@{t.email_domain}")
                ok = _registration_accepted(ex)
                evidence.append((f"[{level} candidate] {req.replace(password, '<pw>')}",
                                 b.summarize(ex, "accepted" if ok else "rejected")))
                if ok:
                    return [_obs("password.complexity", level, evidence)] + manual
    except ProbeNetworkError as exc:
        return [_obs("password.complexity", UNKNOWN,
                     note=f"registration unreachable: {ctx.redact(str(exc))}")] + manual
    return [_obs("password.complexity", UNKNOWN, evidence,
                 note="registration rejected every candidate")] + manual


_MFA_TYPES = (
    ("TOTP", re.compile(r"authenticator app|\btotp\b|google authenticator", re.I)),
    ("Push Notification", re.compile(r"\bpush\b|approve the (sign-in|login|request)", re.I)),
    ("OTP", re.compile(r"\b(sent|texted|emailed)\b|\bsms\b|text message", re.I)),
)


def probe_mfa(ctx: ProbeContext) -> list[Observation]:
    t = ctx.target
    pids = ["mfa.enabled", "mfa.type"]
    try:
        with ctx.browser() as b:
            res = login(ctx, b, t.valid_credentials.username, t.valid_credentials.password,
                        complete_mfa=False)
    except ProbeNetworkError as exc:
        return _unknown(pids, f"network failure: {ctx.redact(str(exc))}")
    ev = [(res.request, b.summarize(res.exchange))]
    backup = _obs("mfa.backup_codes", UNKNOWN, note="needs manual attestation")
    if res.state == "mfa":
        body = res.exchange.text
        kind = next((name for name, pat in _MFA_TYPES if pat.search(body)), None)
        m = ctx.signatures.search("mfa_markers", body)
        ev = [(res.request, b.summarize(res.exchange, _excerpt(body, m)))]
        return [_obs("mfa.enabled", YES, ev),
                _obs("mfa.type", kind, ev) if kind else
                _obs("mfa.type", NA, ev, note="challenge type not recognisable"),
                backup]
    if res.state == "success":
        return [_obs("mfa.enabled", NO, ev),
                _obs("mfa.type", NA, ev, note="no second factor"), backup]
    return _unknown(pids, f"login {res.state}", ev) + [backup]


def _fetch_mail(ctx: ProbeContext, browser: Browser) -> list[dict]:
    ex = browser.get(ctx.target.mail_sink_url)
    if ex.status != 200:
        return []
    try:
        data = json.loads(ex.text)
    except ValueError:
        return []
    if isinstance(data, dict):
        data = data.get("messages", [])
    return [m for m in data if isinstance(m, dict)]


def probe_email_verification(ctx: ProbeContext) -> Observation:
    """Register with a fresh address and try to log in before verifying it."""
    t = ctx.target
    pid = "email.verification"
    if not t.destructive_allowed:
        raise DestructiveProbeRefused("email verification probe registers an account")
    if not t.mail_sink_url:
        return _obs(pid, UNKNOWN, note="no mail sink configured")
    if not t.register_path:
        return _obs(pid, UNKNOWN, note="no registration endpoint")
    user = f"wa{_nonce(4)}"
    email = f"{user}@{t.email_domain}"
    password = _password_ladder()[-1][1]
    try:
        with ctx.browser() as b:
            req, ex = register(ctx, b, user, password, email)
            if not _registration_accepted(ex):
                return _obs(pid, UNKNOWN, [(req.replace(password, "<pw>"), b.summarize(ex))],
                            note="registration rejected")
            mails = [m for m in _fetch_mail(ctx, b) if m.get("recipient") == email]
        with ctx.browser() as b:
            res = login(ctx, b, user, password, complete_mfa=False)
    except ProbeNetworkError as exc:
        return _obs(pid, UNKNOWN, note=f"network failure: {ctx.redact(str(exc))}")
    reg_ev = (req.replace(password, "<pw>"), b.summarize(ex))
    mail_ev = ("mail sink", f"{len(mails)} message(s) to <new address>"
               + (f": {mails[0].get('subject', '')}" if mails else ""))
    login_ev = (res.request.replace(password, "<pw>").replace(user, "<new user>"),
                b.summarize(res.exchange))
    if res.first_factor_ok:
        return _obs(pid, NO, [reg_ev, mail_ev, login_ev], note="first login before verification")
    if mails:
        return _obs(pid, YES, [reg_ev, mail_ev, login_ev])
    return _obs(pid, UNKNOWN, [reg_ev, mail_ev, login_ev],
                note="login refused but no verification mail seen")


def probe_mfa_and_email_verification(ctx: ProbeContext) -> list[Observation]:
    out = probe_mfa(ctx)
    if ctx.target.destructive_allowed:
        out.append(probe_email_verification(ctx))
    else:
        out.append(_obs("email.verification", UNKNOWN, note="registration not permitted"))
    return out


ProbeFn = Callable[[ProbeContext], "list[Observation] | Observation"]
