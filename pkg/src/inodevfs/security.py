"""Input validation, login credentials and per-file encryption.

The hash (FNV-1a 64) and keystream (xorshift64*) are chosen because they are
tiny and bit-exactly reproducible. They are NOT cryptographically secure:
treat the login gate and file encryption as demonstrations, not protection
against a determined attacker.
"""

import hmac
import os
import re
import struct
from dataclasses import dataclass

from .errors import AuthFailed, InvalidChoice, InvalidCredentials, InvalidName
from .layout import AUTH_ITERATIONS, MAX_NAME_LEN, AuthRecord

MASK64 = (1 << 64) - 1
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
GOLDEN_SEED = 0x9E3779B97F4A7C15
XORSHIFT_MULT = 0x2545F4914F6CDD1D
MAX_PASSWORD_LEN = 64

_NAME_RE = re.compile(r"[A-Za-z0-9._-]+")
_CHOICE_RE = re.compile(r"\s*([0-9]+)\s*")


def validate_filename(text: str) -> str:
    if not isinstance(text, str):
        raise InvalidName("name must be text")
    if not text:
        raise InvalidName("name is empty")
    if len(text) > MAX_NAME_LEN:
        raise InvalidName(f"name longer than {MAX_NAME_LEN} characters")
    if not _NAME_RE.fullmatch(text) or not text.isascii():
        raise InvalidName("only letters, digits, '.', '_' and '-' are allowed")
    if text in (".", ".."):
        raise InvalidName(f"{text!r} is reserved")
    return text


def parse_menu_choice(text: str, allowed) -> int:
    m = _CHOICE_RE.fullmatch(text) if isinstance(text, str) else None
    # \s would otherwise admit non-ASCII blanks
    if m is None or not text.isascii():
        raise InvalidChoice(f"invalid choice {text!r}")
    value = int(m.group(1))
    if value not in allowed:
        raise InvalidChoice(f"invalid choice {text!r}")
    return value


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


def _fnv1a64_word(x: int) -> int:
    """fnv1a64 of the 8 little-endian bytes of ``x``.

    Reduction mod 2**64 is deferred to the end: xor only touches the low
    byte and multiplication commutes with the modulus.
    """
    h = FNV_OFFSET
    for b in x.to_bytes(8, "little"):
        h = (h ^ b) * FNV_PRIME
    return h & MASK64


def _iterate_py(h: int, iterations: int) -> int:
    for _ in range(iterations):
        h = _fnv1a64_word(h)
    return h


def _compile_iterate():
    """JIT the iterated word hash with numba when it is installed."""
    try:
        import numpy as np
        from numba import njit
    except ImportError:
        return _iterate_py

    @njit(cache=True)
    def loop(h, iterations):
        offset = np.uint64(FNV_OFFSET)
        prime = np.uint64(FNV_PRIME)
        mask = np.uint64(0xFF)
        for _ in range(iterations):
            x = h
            h = offset
            for i in range(8):
                h = (h ^ ((x >> np.uint64(8 * i)) & mask)) * prime
        return h

    return lambda h, iterations: int(loop(np.uint64(h), iterations))


_iterate = None


def derive_key(password: str, salt: int, iterations: int = AUTH_ITERATIONS) -> int:
    global _iterate
    if _iterate is None:
        _iterate = _compile_iterate()
    h = fnv1a64(struct.pack("<Q", salt) + password.encode("utf-8"))
    return _iterate(h, iterations)


@dataclass(frozen=True)
class Credentials:
    username: str
    password: str

    def __post_init__(self):
        try:
            validate_filename(self.username)
        except InvalidName as e:
            raise InvalidCredentials(f"username: {e}") from None
        if not 1 <= len(self.password) <= MAX_PASSWORD_LEN:
            raise InvalidCredentials(f"password must be 1-{MAX_PASSWORD_LEN} characters")


def make_auth_record(credentials: Credentials, salt: int = None) -> AuthRecord:
    if salt is None:
        salt = int.from_bytes(os.urandom(8), "little")
    return AuthRecord(True, credentials.username, salt,
                      derive_key(credentials.password, salt, AUTH_ITERATIONS), AUTH_ITERATIONS)


def check_credentials(record: AuthRecord, credentials: Credentials) -> bool:
    if not record.enabled:
        return False
    key = derive_key(credentials.password, record.salt, record.iterations)
    # evaluate both comparisons regardless of the first outcome
    user_ok = hmac.compare_digest(record.username.encode(), credentials.username.encode())
    hash_ok = hmac.compare_digest(struct.pack("<Q", record.password_hash), struct.pack("<Q", key))
    return user_ok & hash_ok


def set_password(mount, credentials: Credentials, old: Credentials = None, salt: int = None) -> None:
    """Enable (or change) the login on a mounted disk.

    Changing an existing login requires the current credentials.
    """
    record = mount.superblock.auth
    if record.enabled and (old is None or not check_credentials(record, old)):
        raise AuthFailed("current credentials required to change the login")
    mount.superblock.auth = make_auth_record(credentials, salt)


def verify(mount, credentials: Credentials) -> bool:
    return check_credentials(mount.superblock.auth, credentials)


def keystream(passphrase: str, length: int) -> bytes:
    """xorshift64* output, 8 little-endian bytes per step, seeded by FNV-1a."""
    x = fnv1a64(passphrase.encode("utf-8")) or GOLDEN_SEED
    out = bytearray()
    while len(out) < length:
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        out += struct.pack("<Q", (x * XORSHIFT_MULT) & MASK64)
    return bytes(out[:length])


def xor_bytes(data: bytes, passphrase: str) -> bytes:
    if not data:
        return b""
    ks = keystream(passphrase, len(data))
    return (int.from_bytes(data, "little") ^ int.from_bytes(ks, "little")).to_bytes(len(data), "little")


def crypt_file(mount, name: str, passphrase: str) -> None:
    """Encrypt or decrypt a closed file in place (the operation is its own inverse)."""
    mount.transform_file(name, lambda data: xor_bytes(data, passphrase))
