"""RFC 6238 time-based one-time passwords (SHA-1, 30 s step, 6 digits)."""

from __future__ import annotations

import base64
import hashlib
import hmac
import struct
import time


def _key(secret: str) -> bytes:
    cleaned = secret.replace(" ", "").upper()
    return base64.b32decode(cleaned + "=" * (-len(cleaned) % 8))


def hotp(secret: str, counter: int, digits: int = 6) -> str:
    mac = hmac.new(_key(secret), struct.pack(">Q", counter), hashlib.sha1).digest()
    offset = mac[-1] & 0x0F
    code = (struct.unpack(">I", mac[offset:offset + 4])[0] & 0x7FFFFFFF) % 10 ** digits
    return str(code).zfill(digits)


def totp(secret: str, at: float | None = None, step: int = 30, digits: int = 6) -> str:
    return hotp(secret, int((time.time() if at is None else at) // step), digits)


def verify_totp(secret: str, code: str, at: float | None = None, window: int = 1,
                step: int = 30) -> bool:
    now = time.time() if at is None else at
    return any(hmac.compare_digest(totp(secret, now + k * step, step), code.strip())
               for k in range(-window, window + 1))
