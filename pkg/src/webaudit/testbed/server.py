"""Run the fixture application on a background thread."""

from __future__ import annotations

import json
import logging
import threading
import urllib.request

from werkzeug.serving import WSGIRequestHandler, make_server

from webaudit.testbed.app import TestbedState, create_app
from webaudit.testbed.config import TestbedConfig

log = logging.getLogger(__name__)

RESET_PATH = "/__testbed/reset"
MAIL_PATH = "/__testbed/mail"
LOG_PATH = "/__testbed/log"


class _QuietHandler(WSGIRequestHandler):
    """Route per-request lines to the module logger at debug level."""

    def log(self, type: str, message: str, *args) -> None:
        log.debug("%s %s", self.address_string(), message % args)


class TestbedError(RuntimeError):
    __test__ = False


class TestbedHandle:
    """A running testbed. Use as a context manager or call :meth:`stop`."""

    __test__ = False

    def __init__(self, config: TestbedConfig):
        self.config = config
        self.state = TestbedState(config)
        self.app = create_app(config, self.state)
        try:
            self._server = make_server(config.listen_host, config.listen_port, self.app,
                                       threaded=True, request_handler=_QuietHandler)
        except (OSError, SystemExit) as exc:
            # werkzeug reports a busy port by printing a hint and calling sys.exit.
            raise TestbedError(
                f"cannot listen on {config.listen_host}:{config.listen_port}: "
                f"{exc if isinstance(exc, OSError) else 'address already in use'}") from None
        self.port = self._server.server_port
        self._thread = threading.Thread(target=self._server.serve_forever, args=(0.05,),
                                        name=f"testbed:{self.port}", daemon=True)
        self._thread.start()
        log.info("testbed listening on %s (TOTP secret %s)", self.url, config.totp_secret)

    @property
    def url(self) -> str:
        return f"http://{self.config.listen_host}:{self.port}"

    @property
    def mail_url(self) -> str:
        return self.url + MAIL_PATH

    def reset(self) -> None:
        req = urllib.request.Request(self.url + RESET_PATH, method="POST")
        with urllib.request.urlopen(req, timeout=5) as resp:
            json.load(resp)

    def mail(self) -> list[dict]:
        with urllib.request.urlopen(self.mail_url, timeout=5) as resp:
            return json.load(resp)

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        """Block until interrupted (used by the CLI)."""
        try:
            while self._thread.is_alive():
                self._thread.join(0.5)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def __enter__(self) -> "TestbedHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def start_testbed(config: TestbedConfig) -> TestbedHandle:
    return TestbedHandle(config)
