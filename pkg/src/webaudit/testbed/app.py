"""The fixture web application.

A deliberately small login-centred site whose every security behaviour is
governed by a :class:`TestbedConfig` toggle. All state is in memory and
guarded by one lock; ``POST /__testbed/reset`` restores the seeded state.
"""

from __future__ import annotations

import hashlib
import html
import logging
import re
import secrets
import sqlite3
import threading
import time
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

from flask import Flask, Response, jsonify, make_response, redirect, request

from webaudit import totp
from webaudit.testbed.config import TestbedConfig

log = logging.getLogger(__name__)

SESSION_COOKIE = "SESSID"
CAPTCHA_SOLUTION = "testbed-solved"

_PASSWORD_RULES = ("Passwords need at least {n} characters, including an uppercase letter, "
                   "a lowercase letter, a number and a special character.")


@dataclass
class MailSinkEntry:
    recipient: str
    subject: str
    body: str
    captured_at: str


@dataclass
class Session:
    sid: str
    user: str | None = None
    pending_user: str | None = None
    csrf_token: str = field(default_factory=lambda: secrets.token_hex(16))
    last_seen: float = field(default_factory=time.monotonic)
    display_name: str = ""


def _hash_password(password: str, salt: bytes | None = None) -> str:
    salt = salt or secrets.token_bytes(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), salt, 1000)
    return salt.hex() + "$" + digest.hex()


def _check_password(password: str, stored: str) -> bool:
    salt, _, _ = stored.partition("$")
    return secrets.compare_digest(_hash_password(password, bytes.fromhex(salt)), stored)


def password_acceptable(policy: str, password: str, min_length: int) -> bool:
    if policy == "none":
        return bool(password)
    if len(password) < min_length:
        return False
    if policy == "length-only":
        return True
    letters = any(c.isalpha() for c in password)
    digits = any(c.isdigit() for c in password)
    if policy == "length-letters-numbers":
        return letters and digits
    return (any(c.islower() for c in password) and any(c.isupper() for c in password)
            and digits and any(not c.isalnum() for c in password))


class TestbedState:
    """Users, sessions, counters and the mail sink."""

    __test__ = False

    def __init__(self, config: TestbedConfig):
        self.config = config
        self.lock = threading.RLock()
        self.reset()

    def reset(self) -> None:
        with self.lock:
            self.db = sqlite3.connect(":memory:", check_same_thread=False)
            self.db.executescript("""
                CREATE TABLE users (username TEXT PRIMARY KEY, password TEXT, email TEXT,
                                    verified INTEGER);
                CREATE TABLE notes (id INTEGER PRIMARY KEY, title TEXT);
                INSERT INTO notes (title) VALUES ('Quarterly report'), ('Team offsite'),
                                                 ('Password rotation reminder');
            """)
            c = self.config
            self.db.execute("INSERT INTO users VALUES (?, ?, ?, 1)",
                            (c.seed_username, _hash_password(c.seed_password), c.seed_email))
            self.sessions: dict[str, Session] = {}
            self.failures: dict[str, int] = defaultdict(int)
            self.locked_until: dict[str, float] = {}
            self.attempts: dict[str, deque] = defaultdict(deque)
            self.verification_tokens: dict[str, str] = {}
            self.mail: list[MailSinkEntry] = []
            self.events: list[dict] = []

    # -- users -----------------------------------------------------------

    def find_user(self, username: str):
        """Look the user up the way the configured SQL mode dictates.

        Concatenated mode builds the statement by string formatting, so a
        quote in the username produces a database error.
        """
        with self.lock:
            if self.config.sql_mode == "parameterized":
                cur = self.db.execute(
                    "SELECT username, password, verified FROM users WHERE username = ?",
                    (username,))
            else:
                cur = self.db.execute(
                    "SELECT username, password, verified FROM users WHERE username = '"
                    + username + "'")
            return cur.fetchone()

    def search_notes(self, term: str) -> list[str]:
        with self.lock:
            if self.config.sql_mode == "parameterized":
                cur = self.db.execute("SELECT title FROM notes WHERE title LIKE ?",
                                      (f"%{term}%",))
            else:
                cur = self.db.execute(
                    "SELECT title FROM notes WHERE title LIKE '%" + term + "%'")
            return [row[0] for row in cur.fetchall()]

    def add_user(self, username: str, password: str, email: str, verified: bool) -> bool:
        with self.lock:
            try:
                self.db.execute("INSERT INTO users VALUES (?, ?, ?, ?)",
                                (username, _hash_password(password), email, int(verified)))
            except sqlite3.IntegrityError:
                return False
            return True

    def verify_email(self, token: str) -> bool:
        with self.lock:
            username = self.verification_tokens.pop(token, None)
            if username is None:
                return False
            self.db.execute("UPDATE users SET verified = 1 WHERE username = ?", (username,))
            return True

    def send_mail(self, recipient: str, subject: str, body: str) -> None:
        with self.lock:
            self.mail.append(MailSinkEntry(recipient, subject, body,
                                           datetime.now(timezone.utc).isoformat()))

    # -- sessions --------------------------------------------------------

    def _expired(self, session: Session) -> bool:
        timeout = self.config.session_timeout_minutes * 60
        return timeout > 0 and time.monotonic() - session.last_seen > timeout

    def lookup(self, sid: str | None) -> Session | None:
        if not sid:
            return None
        with self.lock:
            session = self.sessions.get(sid)
            if session is None:
                return None
            if self._expired(session):
                del self.sessions[sid]
                return None
            session.last_seen = time.monotonic()
            return session

    def start(self, sid: str | None) -> Session:
        """Resume ``sid`` or open a new session.

        Without fixation protection an unknown client-supplied identifier is
        adopted as-is, which is what makes session fixation possible.
        """
        with self.lock:
            session = self.lookup(sid)
            if session is not None:
                return session
            if sid and not self.config.fixation_protection and re.fullmatch(r"[\w-]{8,128}", sid):
                new_sid = sid
            else:
                new_sid = secrets.token_urlsafe(24)
            session = Session(new_sid)
            self.sessions[new_sid] = session
            return session

    def authenticate(self, session: Session, username: str) -> Session:
        with self.lock:
            session.pending_user = None
            if not self.config.regenerate_on_login:
                session.user = username
                return session
            fresh = Session(secrets.token_urlsafe(24), user=username)
            self.sessions[fresh.sid] = fresh
            if self.config.fixation_protection:
                self.sessions.pop(session.sid, None)
            else:
                # The old identifier stays valid and is authenticated too.
                session.user = username
            return fresh

    def end(self, session: Session) -> None:
        with self.lock:
            self.sessions.pop(session.sid, None)

    # -- throttling ------------------------------------------------------

    def over_rate_limit(self, client: str) -> bool:
        limit = self.config.rate_limit_per_second
        if limit <= 0:
            return False
        now = time.monotonic()
        with self.lock:
            window = self.attempts[client]
            while window and now - window[0] >= 1.0:
                window.popleft()
            if len(window) >= limit:
                return True
            window.append(now)
            return False

    def is_locked(self, username: str) -> bool:
        with self.lock:
            until = self.locked_until.get(username)
            if until is None:
                return False
            if time.monotonic() >= until:
                del self.locked_until[username]
                self.failures[username] = 0
                return False
            return True

    def record_failure(self, username: str) -> None:
        c = self.config
        with self.lock:
            self.failures[username] += 1
            if c.lockout_threshold and self.failures[username] >= c.lockout_threshold:
                self.locked_until[username] = time.monotonic() + c.lockout_seconds
            if c.failed_login_logging:
                self.events.append({"event": "login_failed", "username": username,
                                    "client": request.remote_addr,
                                    "at": datetime.now(timezone.utc).isoformat()})

    def record_success(self, username: str) -> None:
        with self.lock:
            self.failures.pop(username, None)

    def captcha_required(self, username: str) -> bool:
        n = self.config.captcha_after_n
        with self.lock:
            return bool(n) and self.failures[username] >= n


# ---------------------------------------------------------------------------
# pages
# ---------------------------------------------------------------------------

def _page(title: str, body: str) -> str:
    return (f"<!doctype html><html><head><meta charset=\"utf-8\"><title>{title}</title></head>"
            f"<body><h1>{title}</h1>{body}</body></html>")


_CAPTCHA_WIDGET = ('<div class="g-recaptcha" data-sitekey="testbed"></div>'
                   '<input type="hidden" name="captcha_response" value="">')


def _login_form(message: str = "", captcha: bool = False) -> str:
    return _page("Sign in", (f"<p class=\"msg\">{message}</p>" if message else "") + (
        '<form method="post" action="/login">'
        '<input name="username" type="text"><input name="password" type="password">'
        + (_CAPTCHA_WIDGET if captcha else "")
        + '<button type="submit">Sign in</button></form>'
        '<p><a href="/register">Create an account</a></p>'))


def create_app(config: TestbedConfig, state: TestbedState | None = None) -> Flask:
    """Build the Flask application for ``config``; ``app.config['TESTBED_STATE']`` holds state."""
    state = state or TestbedState(config)
    app = Flask("webaudit.testbed")
    app.config["TESTBED_STATE"] = state
    c = config

    def out(text: str) -> str:
        return html.escape(text) if c.output_escaping else text

    def current_sid() -> str | None:
        sid = request.cookies.get(SESSION_COOKIE)
        if not sid and c.session_in_url:
            sid = request.args.get(SESSION_COOKIE)
        return sid

    def session_for(create: bool) -> Session | None:
        if not c.sessions_enabled:
            return None
        sid = current_sid()
        return state.start(sid) if create else state.lookup(sid)

    def with_session(resp: Response, session: Session | None) -> Response:
        if session is not None and session.sid != request.cookies.get(SESSION_COOKIE):
            resp.set_cookie(SESSION_COOKIE, session.sid, path="/", secure=c.cookie_secure,
                            httponly=c.cookie_httponly,
                            samesite="Lax" if c.cookie_samesite else None)
        return resp

    def link(path: str, session: Session | None) -> str:
        if c.session_in_url and session is not None:
            return f"{path}?{SESSION_COOKIE}={session.sid}"
        return path

    def throttled() -> Response:
        if c.rate_limit_response == "captcha":
            body = _login_form("Too many requests. Complete the challenge to continue.",
                               captcha=True)
        elif c.rate_limit_response == "lockout":
            body = _page("Blocked", "<p>Access temporarily blocked: too many failed "
                                    "sign-in attempts from your address.</p>")
        else:
            body = _page("Too Many Requests", "<p>Too many requests.</p>")
        resp = make_response(body, 429)
        resp.headers["Retry-After"] = "1"
        return resp

    def db_error(exc: sqlite3.Error) -> Response:
        # Mimics a stack with database errors displayed to the client.
        return make_response(_page("Server error", "<pre>sqlite3.OperationalError: "
                                   + html.escape(str(exc)) + "</pre>"), 500)

    def complete_login(session: Session | None, username: str) -> Response:
        state.record_success(username)
        if session is None:
            return make_response(_page("Signed in", f"<p>Welcome, {out(username)}.</p>"))
        fresh = state.authenticate(session, username)
        resp = redirect(link("/dashboard", fresh), code=303)
        return with_session(resp, fresh)

    def failed(message: str, captcha: bool = False, status: int = 401) -> Response:
        if c.reveal_password_rules:
            message += " " + _PASSWORD_RULES.format(n=c.password_min_length)
        return make_response(_login_form(message, captcha), status)

    def do_login(form) -> Response:
        session = session_for(create=True)
        username = form.get("username", "")
        password = form.get("password", "")
        if state.over_rate_limit(request.remote_addr or "?"):
            return with_session(throttled(), session)
        if state.is_locked(username):
            return with_session(make_response(_login_form(
                "Account locked due to too many failed login attempts."), 423), session)
        if state.captcha_required(username) and form.get("captcha_response") != CAPTCHA_SOLUTION:
            state.record_failure(username)
            return with_session(failed("Please complete the CAPTCHA.", captcha=True), session)
        try:
            row = state.find_user(username)
        except sqlite3.Error as exc:
            return db_error(exc)
        if row is None or not _check_password(password, row[1]):
            state.record_failure(username)
            if c.enumeration_messages:
                msg = "No account found for that username." if row is None else "Incorrect password."
            else:
                msg = "Invalid username or password."
            return with_session(failed(msg, captcha=state.captcha_required(username)), session)
        username = row[0]
        if not row[2]:
            return with_session(make_response(_login_form(
                "Please confirm your email address before signing in."), 403), session)
        if c.mfa == "totp":
            session.pending_user = username
            return with_session(make_response(_page("Second factor", (
                "<p>Enter the 6-digit code from your authenticator app.</p>"
                f'<form method="post" action="{link("/mfa", session)}">'
                '<input name="otp" inputmode="numeric"><button>Verify</button></form>'))),
                session)
        return complete_login(session, username)

    @app.after_request
    def security_headers(resp: Response) -> Response:
        if c.csp:
            script = ["'self'"]
            if not c.csp_inline_blocked:
                script.append("'unsafe-inline'")
            if not c.csp_data_blocked:
                script.append("data:")
            if not c.csp_external_restricted:
                script.append("*")
            resp.headers["Content-Security-Policy"] = (
                f"default-src 'self'; script-src {' '.join(script)}; object-src 'none'")
        if c.x_frame_options:
            resp.headers["X-Frame-Options"] = "DENY"
        if c.x_content_type_options:
            resp.headers["X-Content-Type-Options"] = "nosniff"
        if c.hsts:
            resp.headers["Strict-Transport-Security"] = f"max-age={c.hsts_max_age}; includeSubDomains"
        if c.referrer_policy:
            resp.headers["Referrer-Policy"] = (
                "strict-origin-when-cross-origin" if c.referrer_policy_strict else "unsafe-url")
        if c.permissions_policy:
            resp.headers["Permissions-Policy"] = (
                "camera=(), microphone=(), geolocation=()" if c.permissions_restrict_devices
                else "camera=*, microphone=*, geolocation=*")
        return resp

    @app.get("/")
    def index():
        return _page("Testbed", '<p><a href="/login">Sign in</a> or '
                                '<a href="/register">create an account</a>.</p>'
                                '<form action="/search"><input name="q"></form>')

    @app.route("/login", methods=["GET", "POST"])
    def login():
        if request.method == "GET":
            if "username" in request.args or "password" in request.args:
                if not c.get_login_enabled:
                    return make_response(_page("Method Not Allowed",
                                               "<p>Use POST to sign in.</p>"), 405)
                return do_login(request.args)
            session = session_for(create=True)
            captcha = False
            return with_session(make_response(_login_form(captcha=captcha)), session)
        return do_login(request.form)

    @app.post("/mfa")
    def mfa():
        session = session_for(create=False)
        if session is None or not session.pending_user:
            return redirect("/login", code=303)
        if not totp.verify_totp(c.totp_secret, request.form.get("otp", "")):
            return make_response(_page("Second factor", "<p>Wrong code.</p>"), 401)
        return complete_login(session, session.pending_user)

    @app.get("/dashboard")
    def dashboard():
        session = session_for(create=False)
        if session is None or not session.user:
            return redirect("/login", code=302)
        return _page("Dashboard", (
            f"<p>Welcome, {out(session.user)}.</p>"
            f'<p><a href="{link("/profile", session)}">My account</a> | '
            f'<a href="{link("/logout", session)}">Log out</a></p>'))

    @app.route("/profile", methods=["GET", "POST"])
    def profile():
        session = session_for(create=False)
        if session is None or not session.user:
            return redirect("/login", code=302)
        if request.method == "POST":
            if c.csrf == "enforced" and not secrets.compare_digest(
                    request.form.get("csrf_token", ""), session.csrf_token):
                return make_response(_page("Forbidden", "<p>Invalid CSRF token.</p>"), 403)
            session.display_name = request.form.get("display_name", "")
            return redirect(link("/profile", session), code=303)
        token = (f'<input type="hidden" name="csrf_token" value="{session.csrf_token}">'
                 if c.csrf != "off" else "")
        return _page("Profile", (
            f"<p>Signed in as {out(session.user)}. Display name: "
            f"{out(session.display_name)}</p>"
            f'<form method="post" action="{link("/profile", session)}">{token}'
            f'<input name="display_name" type="text" value="{html.escape(session.display_name)}">'
            '<button type="submit">Save</button></form>'
            f'<p><a href="{link("/logout", session)}">Log out</a></p>'))

    @app.get("/logout")
    def logout():
        session = session_for(create=False)
        if session is not None:
            state.end(session)
        resp = redirect("/login", code=303)
        resp.delete_cookie(SESSION_COOKIE, path="/")
        return resp

    @app.get("/search")
    def search():
        term = request.args.get("q", "")
        try:
            hits = state.search_notes(term)
        except sqlite3.Error as exc:
            return db_error(exc)
        items = "".join(f"<li>{html.escape(h)}</li>" for h in hits)
        return _page("Search", f"<p>Results for {out(term)}</p><ul>{items}</ul>")

    @app.get("/echo")
    def echo():
        if c.hpp_behavior == "absent":
            return make_response(_page("Not Found", "<p>No such page.</p>"), 404)
        values = request.args.getlist("user")
        if c.hpp_behavior == "rejected" and len(values) > 1:
            return make_response(_page("Bad Request", "<p>Duplicate parameter.</p>"), 400)
        if not values:
            chosen = ""
        elif c.hpp_behavior == "first-wins":
            chosen = values[0]
        elif c.hpp_behavior == "concatenated":
            chosen = ",".join(values)
        else:
            chosen = values[-1]
        return _page("Echo", f"<p>Hello {out(chosen)}</p>")

    @app.post("/register")
    def register():
        username = request.form.get("username", "").strip()
        password = request.form.get("password", "")
        email = request.form.get("email", "").strip()
        if not username or not password or "@" not in email:
            return make_response(_page("Register", "<p>Username, password and email "
                                                   "are required.</p>"), 400)
        if not password_acceptable(c.password_policy, password, c.password_min_length):
            msg = "Password does not meet the requirements."
            if c.reveal_password_rules:
                msg += " " + _PASSWORD_RULES.format(n=c.password_min_length)
            return make_response(_page("Register", f"<p>{msg}</p>"), 400)
        if not state.add_user(username, password, email, verified=not c.email_verification):
            return make_response(_page("Register", "<p>That username is taken.</p>"), 409)
        if c.email_verification:
            token = secrets.token_urlsafe(16)
            with state.lock:
                state.verification_tokens[token] = username
            state.send_mail(email, "Confirm your email address",
                            f"Open {request.host_url}verify?token={token} to activate "
                            "your account.")
            note = "Check your inbox to confirm your email address."
        else:
            note = "You can sign in now."
        return _page("Register", f"<p>Account created. {note}</p>")

    @app.get("/verify")
    def verify():
        if state.verify_email(request.args.get("token", "")):
            return _page("Verified", "<p>Email confirmed. You can sign in now.</p>")
        return make_response(_page("Verify", "<p>Unknown or used link.</p>"), 404)

    @app.get("/__testbed/mail")
    def mail_sink():
        with state.lock:
            return jsonify([asdict(m) for m in state.mail])

    @app.get("/__testbed/log")
    def event_log():
        with state.lock:
            return jsonify(list(state.events))

    @app.post("/__testbed/reset")
    def reset():
        state.reset()
        return jsonify({"reset": True})

    return app
