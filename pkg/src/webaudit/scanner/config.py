"""Target description and probe signature lists."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any
from urllib.parse import urljoin, urlparse

import yaml


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Credentials:
    username: str
    password: str


@dataclass
class TargetConfig:
    """Everything the probes need to exercise one live target.

    Paths are relative to ``base_url``. A path set to ``None`` means the
    surface does not exist on the target; probes that need it report Unknown.
    Durations are in seconds.
    """

    base_url: str
    valid_credentials: Credentials
    invalid_credentials: Credentials
    nonexistent_username: str = "no-such-user-7f3a"
    login_path: str | None = "/login"
    register_path: str | None = "/register"
    logout_path: str | None = "/logout"
    profile_path: str | None = "/profile"
    csrf_form_path: str | None = None
    search_path: str | None = "/search"
    search_param: str = "q"
    reflect_path: str | None = None
    reflect_param: str | None = None
    hpp_path: str | None = None
    hpp_param: str = "user"
    mfa_path: str | None = "/mfa"
    otp_field: str = "otp"
    totp_secret: str | None = None
    mail_sink_url: str | None = None
    username_field: str = "username"
    password_field: str = "password"
    email_field: str = "email"
    email_domain: str = "example.test"
    session_cookie: str | None = None
    login_success_markers: tuple[str, ...] = ("welcome", "logout", "log out", "dashboard",
                                              "logged in", "my account")
    burst_size: int = 10
    max_failed_attempts: int = 6
    session_timeout_budget: float = 0.0
    max_idle_wait: float = 120.0
    request_timeout: float = 10.0
    destructive_allowed: bool = False
    label: str | None = None

    def __post_init__(self):
        parsed = urlparse(self.base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ConfigError(f"base_url must be an absolute http(s) URL, got {self.base_url!r}")
        if self.burst_size < 1:
            raise ConfigError("burst_size must be >= 1")
        if self.max_failed_attempts < 1:
            raise ConfigError("max_failed_attempts must be >= 1")
        if self.session_timeout_budget < 0 or self.request_timeout <= 0:
            raise ConfigError("durations must be positive")
        self.login_success_markers = tuple(m.lower() for m in self.login_success_markers)

    @property
    def identity(self) -> str:
        return self.label or self.base_url

    def url(self, path: str) -> str:
        return urljoin(self.base_url.rstrip("/") + "/", path.lstrip("/"))

    @property
    def form_path(self) -> str | None:
        return self.csrf_form_path or self.profile_path

    @property
    def reflect_surface(self) -> tuple[str, str] | None:
        path = self.reflect_path or self.search_path
        if path is None:
            return None
        return path, self.reflect_param or self.search_param

    def secrets(self) -> list[str]:
        """Values that must never appear in evidence."""
        out = [self.valid_credentials.username, self.valid_credentials.password,
               self.invalid_credentials.password]
        if self.invalid_credentials.username != self.nonexistent_username:
            out.append(self.invalid_credentials.username)
        if self.totp_secret:
            out.append(self.totp_secret)
        return [s for s in out if s]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TargetConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown target settings: {', '.join(sorted(unknown))}")
        for key in ("valid_credentials", "invalid_credentials"):
            cred = data.get(key)
            if isinstance(cred, dict):
                data[key] = Credentials(str(cred["username"]), str(cred["password"]))
            elif isinstance(cred, (list, tuple)) and len(cred) == 2:
                data[key] = Credentials(str(cred[0]), str(cred[1]))
            else:
                raise ConfigError(f"{key} must be a username/password mapping")
        if "login_success_markers" in data:
            data["login_success_markers"] = tuple(data["login_success_markers"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_target(path: str | Path) -> TargetConfig:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping of target settings")
    return TargetConfig.from_dict(data)


def read_pattern_file(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def _builtin(name: str) -> list[str]:
    return read_pattern_file(
        resources.files("webaudit").joinpath(f"data/signatures/{name}").read_text("utf-8"))


@dataclass
class Signatures:
    """Pattern lists the probes match response bodies against."""

    sql_errors: list[str] = field(default_factory=lambda: _builtin("sql_errors.txt"))
    captcha_markers: list[str] = field(default_factory=lambda: _builtin("captcha_markers.txt"))
    nonce_patterns: list[str] = field(default_factory=lambda: _builtin("nonce_patterns.txt"))
    lockout_markers: list[str] = field(default_factory=lambda: [
        r"account (is |has been )?(temporarily )?locked", r"too many failed",
        r"temporarily (disabled|blocked)", r"locked out"])
    throttle_markers: list[str] = field(default_factory=lambda: [
        r"too many requests", r"rate limit", r"slow down", r"try again (in|later)"])
    mfa_markers: list[str] = field(default_factory=lambda: [
        r"one[- ]time (pass)?code", r"\botp\b", r"verification code", r"authentication code",
        r"two[- ]factor", r"\b2fa\b", r"authenticator app", r"security code"])
    existence_markers: list[str] = field(default_factory=lambda: [
        r"no (such )?(user|account)", r"user(name)? (does not|doesn't) exist",
        r"(user|account|username) not found", r"unknown (user|username)",
        r"not registered", r"(incorrect|wrong|invalid) password",
        r"password (is )?(incorrect|wrong)"])
    password_rule_markers: list[str] = field(default_factory=lambda: [
        r"(at least|minimum( of)?|min\.?)\s*\d+\s*(characters|chars)",
        r"must (contain|include|have) (at least )?(one|an?|\d+)\s+(upper|lower|digit|number|"
        r"special|symbol|letter)",
        r"(uppercase|lowercase) letter", r"special character"])
    csrf_rejection_markers: list[str] = field(default_factory=lambda: [
        r"csrf", r"invalid (form )?token", r"token (mismatch|expired|missing)"])

    def __post_init__(self):
        self._compiled: dict[str, list[re.Pattern]] = {}

    def compiled(self, name: str) -> list[re.Pattern]:
        if name not in self._compiled:
            pats = getattr(self, name)
            if name == "captcha_markers":
                self._compiled[name] = [re.compile(re.escape(p), re.I) for p in pats]
            else:
                self._compiled[name] = [re.compile(p, re.I) for p in pats]
        return self._compiled[name]

    def search(self, name: str, text: str) -> re.Match | None:
        for pat in self.compiled(name):
            m = pat.search(text)
            if m:
                return m
        return None

    @classmethod
    def with_overrides(cls, **files: str | Path | None) -> "Signatures":
        kwargs = {}
        for name, path in files.items():
            if path is not None:
                kwargs[name] = read_pattern_file(Path(path).read_text(encoding="utf-8"))
        return cls(**kwargs)
