"""Black-box HTTP probes for the Dynamic-mode checklist parameters."""

from webaudit.scanner.config import ConfigError, Credentials, Signatures, TargetConfig, load_target
from webaudit.scanner.engine import ConnectivityError, run_scan

__all__ = ["ConfigError", "ConnectivityError", "Credentials", "Signatures", "TargetConfig",
           "load_target", "run_scan"]
