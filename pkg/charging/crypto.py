"""
Crypto core: group parameters, keys, ECDSA, hashing, keystream masking and
hybrid public-key encryption.

Scalars are plain ints reduced mod the group order; points are
``ecdsa.ellipticcurve.PointJacobi`` instances (or ``INFINITY``).
"""

import hashlib
import logging
import secrets
import threading
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives import hmac as crypto_hmac
from django.utils.crypto import constant_time_compare
from ecdsa.curves import NIST256p
from ecdsa.ellipticcurve import INFINITY, CurveFp, PointJacobi
from ecdsa.errors import MalformedPointError
from ecdsa.rfc6979 import generate_k

from .codec import pack_fields
from .constants import (
    CURVE_NAME,
    DIGEST_SIZE,
    HYBRID_TAG_SIZE,
    LABEL_HYBRID_DATA,
    LABEL_HYBRID_KEYS,
    POINT_SIZE,
    SCALAR_SIZE,
    SIGNATURE_SIZE,
)
from .exceptions import AuthenticationError, DecodeError, PreconditionError, RandomnessError
from .metering import metered

logger = logging.getLogger(__name__)

CurvePoint = Union[PointJacobi, type(INFINITY)]


# --------------------------------------------------------------------------------------
# Group
# --------------------------------------------------------------------------------------
@dataclass(frozen=True)
class GroupParams:
    name: str
    curve: CurveFp
    generator: PointJacobi
    order: int

    @property
    def field_prime(self) -> int:
        return self.curve.p()


GROUP = GroupParams(
    name=CURVE_NAME,
    curve=NIST256p.curve,
    generator=NIST256p.generator,
    order=NIST256p.order,
)


def is_identity(point: CurvePoint) -> bool:
    return point is INFINITY or point == INFINITY


def scalar_to_bytes(value: int) -> bytes:
    return (value % GROUP.order).to_bytes(SCALAR_SIZE, "big")


def scalar_from_bytes(data: bytes) -> int:
    """Decode a fixed-width scalar without reducing it (callers range-check)."""
    if len(data) != SCALAR_SIZE:
        raise DecodeError(f"scalar must be {SCALAR_SIZE} bytes")
    return int.from_bytes(data, "big")


def digest_to_scalar(digest: bytes) -> int:
    return int.from_bytes(digest, "big") % GROUP.order


def encode_point(point: CurvePoint) -> bytes:
    if is_identity(point):
        return bytes(POINT_SIZE)
    return point.to_bytes("compressed")


def decode_point(data: bytes) -> CurvePoint:
    """
    Decode a compressed point; 33 zero bytes decode to the identity.

    Raises:
        DecodeError: wrong length, bad prefix or x not on the curve
    """
    data = bytes(data)
    if len(data) != POINT_SIZE:
        raise DecodeError(f"point must be {POINT_SIZE} bytes")
    if data == bytes(POINT_SIZE):
        return INFINITY
    if int.from_bytes(data[1:], "big") >= GROUP.field_prime:
        raise DecodeError("point x-coordinate out of range")
    try:
        return PointJacobi.from_bytes(
            GROUP.curve, data, valid_encodings=("compressed",), order=GROUP.order
        )
    except (MalformedPointError, ValueError) as exc:
        raise DecodeError(f"invalid curve point: {exc}") from exc


# --------------------------------------------------------------------------------------
# Randomness
# --------------------------------------------------------------------------------------
class RandomSource(Protocol):
    def token_bytes(self, size: int) -> bytes: ...


class SystemRandomSource:
    """Operating-system randomness."""

    def token_bytes(self, size: int) -> bytes:
        try:
            return secrets.token_bytes(size)
        except OSError as exc:
            logger.error(f"System randomness unavailable: {exc}")
            raise RandomnessError("system randomness unavailable") from exc


class SeededRandomSource:
    """
    Deterministic hash-based generator for simulations and tests.

    The same seed always yields the same byte stream; ``fork`` derives an
    independent stream so that participants do not disturb each other's draws.
    """

    def __init__(self, seed: Union[int, str, bytes]):
        if isinstance(seed, int):
            seed = seed.to_bytes(16, "big", signed=True)
        elif isinstance(seed, str):
            seed = seed.encode("utf-8")
        self._key = hashlib.sha256(b"seeded-source" + seed).digest()
        self._counter = 0
        self._lock = threading.Lock()

    def token_bytes(self, size: int) -> bytes:
        out = bytearray()
        with self._lock:
            while len(out) < size:
                out += hashlib.sha256(self._key + self._counter.to_bytes(8, "big")).digest()
                self._counter += 1
        return bytes(out[:size])

    def fork(self, label: str) -> "SeededRandomSource":
        return SeededRandomSource(self.token_bytes(32) + label.encode("utf-8"))


_system_random = SystemRandomSource()


def default_random() -> SystemRandomSource:
    return _system_random


def random_scalar(rng: Optional[RandomSource] = None) -> int:
    """Uniform scalar in [1, m) by rejection sampling."""
    rng = rng or _system_random
    while True:
        value = int.from_bytes(rng.token_bytes(SCALAR_SIZE), "big")
        if 1 <= value < GROUP.order:
            return value


# --------------------------------------------------------------------------------------
# Keys & signatures
# --------------------------------------------------------------------------------------
@dataclass(frozen=True)
class KeyPair:
    private: int
    public: CurvePoint

    @classmethod
    def from_private(cls, private: int) -> "KeyPair":
        if not 1 <= private < GROUP.order:
            raise PreconditionError("private scalar out of range")
        return cls(private=private, public=private * GROUP.generator)


def keygen(rng: Optional[RandomSource] = None) -> KeyPair:
    return KeyPair.from_private(random_scalar(rng))


@dataclass(frozen=True)
class Signature:
    """ECDSA signature keeping the full nonce point R."""

    R: CurvePoint
    s: int

    @property
    def r(self) -> int:
        if is_identity(self.R):
            return 0
        return self.R.x() % GROUP.order

    def to_bytes(self) -> bytes:
        return encode_point(self.R) + self.s.to_bytes(SCALAR_SIZE, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "Signature":
        if len(data) != SIGNATURE_SIZE:
            raise DecodeError(f"signature must be {SIGNATURE_SIZE} bytes")
        return cls(R=decode_point(data[:POINT_SIZE]), s=scalar_from_bytes(data[POINT_SIZE:]))


def _sign_digest(digest: bytes, private: int) -> Signature:
    m = GROUP.order
    if not 1 <= private < m:
        raise PreconditionError("private scalar out of range")
    h = digest_to_scalar(digest)
    retry = 0
    while True:
        k = generate_k(m, private, hashlib.sha256, digest, retry_gen=retry)
        R = k * GROUP.generator
        r = R.x() % m
        s = pow(k, -1, m) * (h + r * private) % m
        if r and s:
            return Signature(R=R, s=s)
        retry += 1


def _verify_digest(digest: bytes, public: CurvePoint, signature: Signature) -> bool:
    m = GROUP.order
    r, s = signature.r, signature.s
    if not (1 <= r < m and 1 <= s < m) or is_identity(public):
        return False
    h = digest_to_scalar(digest)
    w = pow(s, -1, m)
    point = (h * w % m) * GROUP.generator + (r * w % m) * public
    if is_identity(point):
        return False
    # the whole nonce point is carried, so its y-coordinate must match too
    return point == signature.R


@metered("ecdsa_sign")
def ecdsa_sign(message: bytes, private: int) -> Signature:
    """Sign SHA-256(message) with an RFC 6979 deterministic nonce."""
    return _sign_digest(hashlib.sha256(message).digest(), private)


@metered("ecdsa_sign")
def ecdsa_sign_digest(digest: bytes, private: int) -> Signature:
    """Sign a 32-byte digest directly, so s = k^-1 (digest + r*d) mod m."""
    if len(digest) != DIGEST_SIZE:
        raise PreconditionError(f"digest must be {DIGEST_SIZE} bytes")
    return _sign_digest(digest, private)


@metered("ecdsa_verify")
def ecdsa_verify(message: bytes, public: CurvePoint, signature: Signature) -> bool:
    return _verify_digest(hashlib.sha256(message).digest(), public, signature)


@metered("ecdsa_verify")
def ecdsa_verify_digest(digest: bytes, public: CurvePoint, signature: Signature) -> bool:
    return _verify_digest(digest, public, signature)


# --------------------------------------------------------------------------------------
# Hashing & masking
# --------------------------------------------------------------------------------------
def _digest(parts: Iterable[bytes]) -> bytes:
    return hashlib.sha256(pack_fields(parts)).digest()


def _keystream(key: bytes, label: bytes, data: bytes) -> bytes:
    stream = bytearray()
    counter = 0
    while len(stream) < len(data):
        stream += _digest([key, label, counter.to_bytes(4, "big")])
        counter += 1
    return bytes(a ^ b for a, b in zip(data, stream))


@metered("hash")
def hash_parts(parts: Iterable[bytes]) -> bytes:
    """h(p1 || p2 || ...) over length-prefixed parts."""
    return _digest(parts)


@metered("hash_check")
def digest_matches(expected: bytes, parts: Iterable[bytes]) -> bool:
    """Recompute h(parts) and compare with a received value in constant time."""
    return constant_time_compare(expected, _digest(parts))


@metered("keystream")
def keystream_wrap(key: bytes, label: bytes, data: bytes) -> bytes:
    """XOR ``data`` with h(key, label, counter) blocks; applying it twice is a no-op."""
    return _keystream(key, label, data)


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise PreconditionError("xor operands differ in length")
    return bytes(x ^ y for x, y in zip(a, b))


# --------------------------------------------------------------------------------------
# Hybrid encryption
# --------------------------------------------------------------------------------------
def _hybrid_keys(shared_point: CurvePoint):
    shared = _digest([b"ecdh", encode_point(shared_point)])
    material = _keystream(shared, LABEL_HYBRID_KEYS, bytes(64))
    return material[:32], material[32:]


def _hybrid_tag(mac_key: bytes, data: bytes) -> crypto_hmac.HMAC:
    mac = crypto_hmac.HMAC(mac_key, hashes.SHA256())
    mac.update(data)
    return mac


@metered("hybrid_encrypt")
def hybrid_encrypt(public: CurvePoint, plaintext: bytes, rng: Optional[RandomSource] = None) -> bytes:
    """
    Encrypt to a public key: E || ciphertext || tag.

    E = e*G for a fresh e; the data and tag keys are expanded from h(e*pub).
    """
    if is_identity(public):
        raise PreconditionError("cannot encrypt to the identity point")
    ephemeral = random_scalar(rng)
    header = encode_point(ephemeral * GROUP.generator)
    enc_key, mac_key = _hybrid_keys(ephemeral * public)
    body = _keystream(enc_key, LABEL_HYBRID_DATA, plaintext)
    return header + body + _hybrid_tag(mac_key, header + body).finalize()


@metered("hybrid_decrypt")
def hybrid_decrypt(private: int, ciphertext: bytes) -> bytes:
    """
    Raises:
        DecodeError: too short or the ephemeral point is malformed
        AuthenticationError: tag mismatch (wrong key or modified ciphertext)
    """
    if not 1 <= private < GROUP.order:
        raise PreconditionError("private scalar out of range")
    if len(ciphertext) < POINT_SIZE + HYBRID_TAG_SIZE:
        raise DecodeError("hybrid ciphertext too short")
    header = ciphertext[:POINT_SIZE]
    body = ciphertext[POINT_SIZE:-HYBRID_TAG_SIZE]
    tag = ciphertext[-HYBRID_TAG_SIZE:]
    ephemeral = decode_point(header)
    if is_identity(ephemeral):
        raise DecodeError("hybrid ephemeral point is the identity")
    enc_key, mac_key = _hybrid_keys(private * ephemeral)
    try:
        _hybrid_tag(mac_key, header + body).verify(tag)
    except InvalidSignature as exc:
        raise AuthenticationError("hybrid ciphertext failed authentication") from exc
    return _keystream(enc_key, LABEL_HYBRID_DATA, body)
