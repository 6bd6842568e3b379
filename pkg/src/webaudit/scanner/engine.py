"""Scan orchestration: run every probe once and account for every Dynamic parameter.

Read-only probes run concurrently on a thread pool. State-mutating probes run
afterwards, one at a time, in the fixed order of :data:`SERIAL_ORDER`; the
lockout probe is last because it leaves the test account locked.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable

import httpx

from webaudit.checklist import Checklist, Mode
from webaudit.model import UNKNOWN, Observation, ProbeReport, Source, utcnow
from webaudit.scanner import probes
from webaudit.scanner.browser import ProbeNetworkError
from webaudit.scanner.config import Signatures, TargetConfig

log = logging.getLogger(__name__)


class ConnectivityError(RuntimeError):
    """The target did not answer the baseline request."""


@dataclass(frozen=True)
class ProbeSpec:
    name: str
    fn: Callable[[probes.ProbeContext], "list[Observation] | Observation"]
    parameters: tuple[str, ...]
    destructive: bool = False


READ_ONLY: tuple[ProbeSpec, ...] = (
    ProbeSpec("headers", probes.probe_headers, (
        "headers.csp_present", "headers.csp_inline", "headers.csp_data_uri",
        "headers.csp_external", "headers.x_frame_options", "headers.x_content_type_options",
        "headers.hsts_present", "headers.hsts_max_age", "headers.referrer_policy_present",
        "headers.referrer_policy_value", "headers.permissions_policy_present",
        "headers.permissions_policy_devices")),
    ProbeSpec("cookies", probes.probe_cookies, (
        "session.creation", "session.cookie_secure", "session.cookie_httponly",
        "session.cookie_samesite")),
    ProbeSpec("login_method", probes.probe_login_method, ("xss.post_only_login",)),
    ProbeSpec("session", probes.probe_session_lifecycle, (
        "session.regenerated", "session.fixation", "session.cookie_only", "session.timeout")),
    ProbeSpec("xss", probes.probe_xss_reflection, (
        "xss.script_execution", "xss.html_injection")),
    ProbeSpec("sqli", probes.probe_sqli_error, ("sqli.escaped",)),
    ProbeSpec("hpp", probes.probe_hpp, ("hpp.duplicate_params",)),
    ProbeSpec("enumeration", lambda ctx: probes.probe_user_enumeration(ctx, False)[:1],
              ("errors.username_disclosure",)),
    ProbeSpec("mfa", probes.probe_mfa, ("mfa.enabled", "mfa.type")),
)

# Policy -> rate limit -> lockout. CSRF mutates the profile form and the
# rule-disclosure check registers an account, so both run serially too.
SERIAL_ORDER: tuple[ProbeSpec, ...] = (
    ProbeSpec("csrf", probes.probe_csrf, ("csrf.token_present", "csrf.validation")),
    ProbeSpec("password_rules", lambda ctx: probes.probe_user_enumeration(ctx, True)[1:],
              ("errors.password_rules_disclosure",), destructive=True),
    ProbeSpec("password_policy", probes.probe_password_policy, ("password.complexity",),
              destructive=True),
    ProbeSpec("email_verification", probes.probe_email_verification, ("email.verification",),
              destructive=True),
    ProbeSpec("rate_limit", probes.probe_rate_limit, (
        "ratelimit.enabled", "ratelimit.response"), destructive=True),
    ProbeSpec("lockout", probes.probe_bruteforce_lockout, (
        "bruteforce.lockout", "bruteforce.captcha"), destructive=True),
)

ALL_PROBES: tuple[ProbeSpec, ...] = READ_ONLY + SERIAL_ORDER


def probe_parameters() -> set[str]:
    return {pid for spec in ALL_PROBES for pid in spec.parameters}


def _run_probe(spec: ProbeSpec, ctx: probes.ProbeContext, wanted: set[str]) -> list[Observation]:
    try:
        result = spec.fn(ctx)
    except ProbeNetworkError as exc:
        reason = f"{spec.name} probe failed: {ctx.redact(str(exc))}"
        return [Observation(pid, UNKNOWN, Source.Dynamic, note=reason)
                for pid in spec.parameters if pid in wanted]
    if isinstance(result, Observation):
        result = [result]
    return [o for o in result if o.parameter_id in wanted]


def check_connectivity(target: TargetConfig, transport: httpx.BaseTransport | None = None) -> None:
    try:
        with httpx.Client(timeout=target.request_timeout, transport=transport) as client:
            client.get(target.url("/"))
    except httpx.HTTPError as exc:
        raise ConnectivityError(f"{target.base_url} unreachable: {exc}") from exc


def run_scan(target: TargetConfig, checklist: Checklist, *, parallel: int = 4,
             signatures: Signatures | None = None,
             transport: httpx.BaseTransport | None = None,
             parameters: Iterable[str] | None = None) -> ProbeReport:
    """Probe ``target`` and report one entry per Dynamic parameter of ``checklist``.

    Each Dynamic parameter ends up either in ``observations`` or, when its
    probe may not run (destructive probes without consent, unselected
    parameters, parameters no probe covers), in ``skipped`` with a reason.
    """
    if parallel < 1:
        raise ValueError("parallel must be >= 1")
    dynamic = [p.id for p in checklist.by_mode(Mode.Dynamic)]
    selected = set(dynamic) if parameters is None else set(parameters) & set(dynamic)
    report = ProbeReport(target.identity, Source.Dynamic)
    check_connectivity(target, transport)
    ctx = probes.ProbeContext(target, signatures or Signatures(), transport)

    skipped: dict[str, str] = {}
    runnable_ro, runnable_serial = [], []
    for group, bucket in ((READ_ONLY, runnable_ro), (SERIAL_ORDER, runnable_serial)):
        for spec in group:
            wanted = set(spec.parameters) & selected
            if not wanted:
                continue
            if spec.destructive and not target.destructive_allowed:
                for pid in wanted:
                    skipped[pid] = "destructive probe not permitted"
                continue
            bucket.append((spec, wanted))

    found: dict[str, Observation] = {}
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        futures = [pool.submit(_run_probe, spec, ctx, wanted) for spec, wanted in runnable_ro]
        for fut in futures:
            for obs in fut.result():
                found.setdefault(obs.parameter_id, obs)
    for spec, wanted in runnable_serial:
        log.info("serial probe %s", spec.name)
        for obs in _run_probe(spec, ctx, wanted):
            found.setdefault(obs.parameter_id, obs)

    for pid in dynamic:
        if pid in found:
            report.observations.append(found[pid])
        elif pid in skipped:
            report.skipped.append((pid, skipped[pid]))
        elif pid not in selected:
            report.skipped.append((pid, "not selected"))
        else:
            report.skipped.append((pid, "no probe produced an observation"))
    report.finished_at = utcnow()
    return report
