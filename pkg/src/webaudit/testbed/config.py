"""Testbed toggles, named presets and the toggle -> checklist-parameter mapping."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

DEFAULT_TOTP_SECRET = "JBSWY3DPEHPK3PXP"


class TestbedConfigError(ValueError):
    """Unknown toggle, bad value or an impossible toggle combination."""

    __test__ = False  # not a pytest test class despite the name


_CHOICES = {
    "rate_limit_response": ("error-code", "captcha", "lockout"),
    "password_policy": ("none", "length-only", "length-letters-numbers", "full"),
    "mfa": ("off", "totp"),
    "csrf": ("off", "emit-only", "enforced"),
    "sql_mode": ("parameterized", "concatenated"),
    "hpp_behavior": ("first-wins", "last-wins", "concatenated", "rejected", "absent"),
}


@dataclass(frozen=True)
class TestbedConfig:
    """Every security behaviour of the fixture application, individually settable.

    Numeric toggles use 0 for "off". ``session_timeout_minutes`` may be
    fractional so tests can observe an idle expiry within seconds.
    """

    __test__ = False

    # brute force and rate limiting
    lockout_threshold: int = 0
    lockout_seconds: float = 60.0
    captcha_after_n: int = 0
    rate_limit_per_second: float = 0.0
    rate_limit_response: str = "error-code"
    # accounts
    password_policy: str = "none"
    password_min_length: int = 8
    mfa: str = "off"
    email_verification: bool = False
    # sessions
    sessions_enabled: bool = True
    cookie_secure: bool = False
    cookie_httponly: bool = False
    cookie_samesite: bool = False
    session_timeout_minutes: float = 0.0
    regenerate_on_login: bool = False
    fixation_protection: bool = False
    session_in_url: bool = False
    # input handling
    csrf: str = "off"
    output_escaping: bool = False
    sql_mode: str = "concatenated"
    hpp_behavior: str = "absent"
    # error messages and logging
    enumeration_messages: bool = False
    reveal_password_rules: bool = False
    get_login_enabled: bool = False
    failed_login_logging: bool = False
    # the twelve header checks
    csp: bool = False
    csp_inline_blocked: bool = False
    csp_data_blocked: bool = False
    csp_external_restricted: bool = False
    x_frame_options: bool = False
    x_content_type_options: bool = False
    hsts: bool = False
    hsts_max_age: int = 31536000
    referrer_policy: bool = False
    referrer_policy_strict: bool = False
    permissions_policy: bool = False
    permissions_restrict_devices: bool = False
    # fixture data and networking
    seed_username: str = "alice"
    seed_password: str = "Correct-Horse-9"
    seed_email: str = "alice@example.test"
    totp_secret: str = DEFAULT_TOTP_SECRET
    listen_host: str = "127.0.0.1"
    listen_port: int = 0

    def __post_init__(self):
        for name, allowed in _CHOICES.items():
            if getattr(self, name) not in allowed:
                raise TestbedConfigError(
                    f"{name} must be one of {', '.join(allowed)}; got {getattr(self, name)!r}")
        for name in ("lockout_threshold", "captcha_after_n", "password_min_length",
                     "hsts_max_age", "listen_port"):
            if getattr(self, name) < 0:
                raise TestbedConfigError(f"{name} must be >= 0")
        if self.rate_limit_per_second < 0 or self.session_timeout_minutes < 0:
            raise TestbedConfigError("rates and timeouts must be >= 0")
        if not self.sessions_enabled:
            needs_session = {
                "fixation_protection": self.fixation_protection,
                "regenerate_on_login": self.regenerate_on_login,
                "session_in_url": self.session_in_url,
                "session_timeout_minutes": self.session_timeout_minutes > 0,
                "csrf": self.csrf != "off",
                "mfa": self.mfa != "off",
            }
            bad = [k for k, on in needs_session.items() if on]
            if bad:
                raise TestbedConfigError(
                    f"{', '.join(bad)} cannot be enabled without sessions")

    def with_(self, **changes) -> "TestbedConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TestbedConfig":
        known = {f.name for f in fields(cls)}
        data = dict(data)
        base = data.pop("preset", None)
        unknown = set(data) - known
        if unknown:
            raise TestbedConfigError(f"unknown testbed toggles: {', '.join(sorted(unknown))}")
        start = preset(base) if base else cls()
        return replace(start, **data)


def load_testbed_config(path: str | Path) -> TestbedConfig:
    """Read a YAML toggle file; an optional ``preset:`` key names the starting point."""
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise TestbedConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise TestbedConfigError(f"{path}: expected a mapping of toggles")
    return TestbedConfig.from_dict(data)


HARDENED = TestbedConfig(
    lockout_threshold=5, captcha_after_n=3, rate_limit_per_second=5,
    rate_limit_response="error-code", password_policy="full", mfa="totp",
    email_verification=True, cookie_secure=True, cookie_httponly=True, cookie_samesite=True,
    session_timeout_minutes=15, regenerate_on_login=True, fixation_protection=True,
    csrf="enforced", output_escaping=True, sql_mode="parameterized", hpp_behavior="rejected",
    failed_login_logging=True, csp=True, csp_inline_blocked=True, csp_data_blocked=True,
    csp_external_restricted=True, x_frame_options=True, x_content_type_options=True,
    hsts=True, referrer_policy=True, referrer_policy_strict=True, permissions_policy=True,
    permissions_restrict_devices=True,
)

VULNERABLE = TestbedConfig(
    password_policy="none", sql_mode="concatenated", hpp_behavior="concatenated",
    enumeration_messages=True, reveal_password_rules=True, get_login_enabled=True,
    session_in_url=True, csrf="off",
)

# Behaviour shared by the five columns of the published comparison: sessions
# with regeneration, bound SQL parameters, POST-only login, no security
# headers and no duplicate-parameter endpoint.
_REFERENCE_BASE = TestbedConfig(regenerate_on_login=True, fixation_protection=True,
                            sql_mode="parameterized", output_escaping=True,
                            hpp_behavior="absent")
_SECURE_COOKIE = dict(cookie_secure=True, cookie_httponly=True, cookie_samesite=True)

PRESETS: dict[str, TestbedConfig] = {
    "hardened": HARDENED,
    "vulnerable": VULNERABLE,
    "chatgpt": _REFERENCE_BASE.with_(password_policy="length-only", **_SECURE_COOKIE),
    "deepseek": _REFERENCE_BASE.with_(output_escaping=False),
    "claude": _REFERENCE_BASE.with_(email_verification=True, csrf="enforced",
                                fixation_protection=False),
    "gemini": _REFERENCE_BASE.with_(lockout_threshold=5, password_policy="length-only",
                                output_escaping=False, session_timeout_minutes=30,
                                enumeration_messages=True, reveal_password_rules=True,
                                failed_login_logging=True, **_SECURE_COOKIE),
    "grok": _REFERENCE_BASE.with_(password_policy="length-letters-numbers",
                              rate_limit_per_second=5, rate_limit_response="error-code",
                              failed_login_logging=True, **_SECURE_COOKIE),
}


def preset(name: str) -> TestbedConfig:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise TestbedConfigError(
            f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


@dataclass(frozen=True)
class Toggle:
    """How to make one Dynamic parameter compliant or non-compliant on the testbed."""

    field: str
    compliant: Any
    vulnerable: Any
    compliant_extra: dict[str, Any] = field(default_factory=dict)
    vulnerable_extra: dict[str, Any] = field(default_factory=dict)

    def apply(self, base: TestbedConfig, compliant: bool) -> TestbedConfig:
        if compliant:
            return base.with_(**{self.field: self.compliant}, **self.compliant_extra)
        return base.with_(**{self.field: self.vulnerable}, **self.vulnerable_extra)


_NO_SESSION = dict(fixation_protection=False, regenerate_on_login=False, session_in_url=False,
                   session_timeout_minutes=0, csrf="off", mfa="off")

DYNAMIC_TOGGLES: dict[str, Toggle] = {
    "bruteforce.lockout": Toggle("lockout_threshold", 5, 0),
    "bruteforce.captcha": Toggle("captcha_after_n", 3, 0),
    "password.complexity": Toggle("password_policy", "full", "none"),
    "mfa.enabled": Toggle("mfa", "totp", "off"),
    "mfa.type": Toggle("mfa", "totp", "off"),
    "ratelimit.enabled": Toggle("rate_limit_per_second", 5, 0),
    "ratelimit.response": Toggle("rate_limit_per_second", 5, 0),
    "email.verification": Toggle("email_verification", True, False),
    "sqli.escaped": Toggle("sql_mode", "parameterized", "concatenated"),
    "xss.script_execution": Toggle("output_escaping", True, False),
    "xss.html_injection": Toggle("output_escaping", True, False),
    "xss.post_only_login": Toggle("get_login_enabled", False, True),
    "csrf.token_present": Toggle("csrf", "enforced", "off"),
    "csrf.validation": Toggle("csrf", "enforced", "emit-only"),
    "hpp.duplicate_params": Toggle("hpp_behavior", "rejected", "concatenated"),
    "session.creation": Toggle("sessions_enabled", True, False, vulnerable_extra=_NO_SESSION),
    "session.cookie_secure": Toggle("cookie_secure", True, False),
    "session.cookie_httponly": Toggle("cookie_httponly", True, False),
    "session.cookie_samesite": Toggle("cookie_samesite", True, False),
    "session.timeout": Toggle("session_timeout_minutes", 0.01, 0),
    "session.regenerated": Toggle("regenerate_on_login", True, False),
    "session.fixation": Toggle("fixation_protection", True, False),
    "session.cookie_only": Toggle("session_in_url", False, True),
    "errors.username_disclosure": Toggle("enumeration_messages", False, True),
    "errors.password_rules_disclosure": Toggle("reveal_password_rules", False, True),
    "headers.csp_present": Toggle("csp", True, False),
    "headers.csp_inline": Toggle("csp_inline_blocked", True, False),
    "headers.csp_data_uri": Toggle("csp_data_blocked", True, False),
    "headers.csp_external": Toggle("csp_external_restricted", True, False),
    "headers.x_frame_options": Toggle("x_frame_options", True, False),
    "headers.x_content_type_options": Toggle("x_content_type_options", True, False),
    "headers.hsts_present": Toggle("hsts", True, False),
    "headers.hsts_max_age": Toggle("hsts_max_age", 31536000, 0),
    "headers.referrer_policy_present": Toggle("referrer_policy", True, False),
    "headers.referrer_policy_value": Toggle("referrer_policy_strict", True, False),
    "headers.permissions_policy_present": Toggle("permissions_policy", True, False),
    "headers.permissions_policy_devices": Toggle("permissions_restrict_devices", True, False),
}
