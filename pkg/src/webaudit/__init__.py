"""webaudit: checklist-driven security auditing of login-centred web applications.

The package scores a web application against a 48-parameter security
checklist. Observations come from black-box HTTP probes
(:mod:`webaudit.scanner`), lexical analysis of PHP source
(:mod:`webaudit.static_analyzer`) or manual attestation; :mod:`webaudit.risk`
turns them into compliance records, per-category coverage and per-risk-level
exposure, and :mod:`webaudit.report` serializes and renders the results.
"""

__version__ = "0.1.0"
