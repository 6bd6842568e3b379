"""Toggleable fixture web application used to exercise the scanner end to end."""

from webaudit.testbed.config import (
    DEFAULT_TOTP_SECRET,
    DYNAMIC_TOGGLES,
    PRESETS,
    TestbedConfig,
    TestbedConfigError,
    Toggle,
    load_testbed_config,
    preset,
)
from webaudit.testbed.server import TestbedError, TestbedHandle, start_testbed


def target_for(handle: TestbedHandle, **overrides):
    """A scanner TargetConfig pointing at a running testbed."""
    from webaudit.scanner.config import Credentials, TargetConfig

    c = handle.config
    settings = dict(
        base_url=handle.url,
        valid_credentials=Credentials(c.seed_username, c.seed_password),
        invalid_credentials=Credentials(c.seed_username, "Wrong-Password-1"),
        hpp_path="/echo", hpp_param="user", csrf_form_path="/profile",
        totp_secret=c.totp_secret, mail_sink_url=handle.mail_url,
        session_cookie="SESSID", destructive_allowed=True, label="testbed",
        burst_size=10, max_failed_attempts=6,
    )
    settings.update(overrides)
    return TargetConfig(**settings)


__all__ = ["DEFAULT_TOTP_SECRET", "DYNAMIC_TOGGLES", "PRESETS", "TestbedConfig",
           "TestbedConfigError", "TestbedError", "TestbedHandle", "Toggle",
           "load_testbed_config", "preset", "start_testbed", "target_for"]
