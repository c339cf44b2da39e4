"""
Shamir (k, n) sharing of a private-key scalar over the field mod the group
order, plus the encrypted custodian share file format.
"""

import logging
import struct
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives import hmac as crypto_hmac
from cryptography.hazmat.primitives.kdf.pbkdf2 import PBKDF2HMAC

from .constants import (
    LABEL_SHARE,
    SCALAR_SIZE,
    SHARE_KDF_ITERATIONS,
    SHARE_MAGIC,
    SHARE_MAX_LABEL,
    SHARE_SALT_SIZE,
    SHARE_VERSION,
)
from .crypto import GROUP, RandomSource, default_random, keystream_wrap
from .exceptions import (
    PreconditionError,
    ShareDecryptError,
    ShareFormatError,
    ShareInputError,
    ThresholdError,
)

logger = logging.getLogger(__name__)

_HEADER = struct.Struct(">4sBBBBI")  # magic, version, k, n, index, kdf iterations
_MAX_ITERATIONS = SHARE_KDF_ITERATIONS * 10
_TAG_SIZE = 32


@dataclass(frozen=True)
class ShareParams:
    k: int
    n: int
    modulus: int = GROUP.order

    def __post_init__(self):
        if not (1 <= self.k <= self.n < self.modulus):
            raise PreconditionError(f"invalid share parameters k={self.k} n={self.n}")

    @classmethod
    def parse(cls, text: str) -> "ShareParams":
        """Parse ``k/n`` as used on the command line."""
        try:
            k, n = (int(part) for part in text.split("/"))
        except ValueError as exc:
            raise PreconditionError(f"share parameters must look like k/n, got {text!r}") from exc
        return cls(k=k, n=n)


@dataclass(frozen=True)
class Share:
    index: int
    value: int
    label: bytes = b""


@dataclass(frozen=True)
class ShareSet:
    params: ShareParams
    shares: Tuple[Share, ...]


def _eval_poly(coefficients: Sequence[int], x: int, modulus: int) -> int:
    result = 0
    for coefficient in reversed(coefficients):
        result = (result * x + coefficient) % modulus
    return result


def _interpolate_at_zero(points: Sequence[Tuple[int, int]], modulus: int) -> int:
    total = 0
    for j, (x_j, y_j) in enumerate(points):
        numerator, denominator = 1, 1
        for i, (x_i, _) in enumerate(points):
            if i != j:
                numerator = numerator * x_i % modulus
                denominator = denominator * (x_i - x_j) % modulus
        total = (total + y_j * numerator * pow(denominator, -1, modulus)) % modulus
    return total


def split(
    secret: int,
    params: ShareParams,
    rng: Optional[RandomSource] = None,
    coefficients: Optional[Sequence[int]] = None,
    labels: Optional[Sequence[bytes]] = None,
) -> ShareSet:
    """
    Split ``secret`` into n shares f(1)..f(n) of a degree k-1 polynomial.

    Args:
        secret: Value of f(0)
        params: Threshold and share count
        rng: Source for the random coefficients a1..a(k-1)
        coefficients: Fixed a1..a(k-1) instead of random ones (tests)
        labels: Custodian label per share

    Returns:
        ShareSet with indices 1..n
    """
    modulus = params.modulus
    if coefficients is None:
        rng = rng or default_random()
        coefficients = [
            int.from_bytes(rng.token_bytes(SCALAR_SIZE + 16), "big") % modulus
            for _ in range(params.k - 1)
        ]
    elif len(coefficients) != params.k - 1:
        raise PreconditionError(f"need {params.k - 1} coefficients, got {len(coefficients)}")
    if labels is not None and len(labels) != params.n:
        raise PreconditionError(f"need {params.n} custodian labels, got {len(labels)}")

    poly = [secret % modulus, *(c % modulus for c in coefficients)]
    shares = tuple(
        Share(index=i, value=_eval_poly(poly, i, modulus), label=labels[i - 1] if labels else b"")
        for i in range(1, params.n + 1)
    )
    return ShareSet(params=params, shares=shares)


def _distinct(shares: Sequence[Share]) -> List[Share]:
    seen = set()
    for share in shares:
        if share.index in seen:
            raise ShareInputError(f"duplicate share index {share.index}")
        if share.index <= 0:
            raise ShareInputError(f"share index must be positive, got {share.index}")
        seen.add(share.index)
    return list(shares)


def reconstruct(shares: Sequence[Share], params: ShareParams) -> int:
    """f(0) by Lagrange interpolation over the first k shares."""
    shares = _distinct(shares)
    if len(shares) < params.k:
        raise ThresholdError(f"need {params.k} shares, got {len(shares)}")
    points = [(s.index, s.value % params.modulus) for s in shares[: params.k]]
    return _interpolate_at_zero(points, params.modulus)


def complete(
    shares: Sequence[Share],
    candidate: int,
    params: ShareParams,
    index: Optional[int] = None,
) -> Share:
    """
    Return a k-th share such that the k shares reconstruct to ``candidate``.

    Any k-1 shares are consistent with every secret; this builds the witness.
    """
    shares = _distinct(shares)
    if len(shares) != params.k - 1:
        raise ShareInputError(f"need exactly {params.k - 1} shares, got {len(shares)}")
    used = {s.index for s in shares}
    if index is None:
        index = next((i for i in range(1, params.n + 1) if i not in used), None)
        if index is None:
            raise ShareInputError("no free share index")
    elif index in used or not 1 <= index <= params.n:
        raise ShareInputError(f"share index {index} is not free")

    modulus = params.modulus
    # the polynomial through (0, candidate) and the given shares, evaluated at index
    points = [(0, candidate % modulus)] + [(s.index, s.value % modulus) for s in shares]
    value = 0
    for j, (x_j, y_j) in enumerate(points):
        numerator, denominator = 1, 1
        for i, (x_i, _) in enumerate(points):
            if i != j:
                numerator = numerator * (index - x_i) % modulus
                denominator = denominator * (x_j - x_i) % modulus
        value = (value + y_j * numerator * pow(denominator, -1, modulus)) % modulus
    return Share(index=index, value=value)


# --------------------------------------------------------------------------------------
# Custodian share files
# --------------------------------------------------------------------------------------
def _share_keys(passphrase: str, salt: bytes, label: bytes, iterations: int) -> Tuple[bytes, bytes]:
    kdf = PBKDF2HMAC(algorithm=hashes.SHA256(), length=64, salt=salt + label, iterations=iterations)
    material = kdf.derive(passphrase.encode("utf-8"))
    return material[:32], material[32:]


def _share_mac(mac_key: bytes, data: bytes) -> crypto_hmac.HMAC:
    mac = crypto_hmac.HMAC(mac_key, hashes.SHA256())
    mac.update(data)
    return mac


def encrypt_share(
    share: Share,
    params: ShareParams,
    passphrase: str,
    rng: Optional[RandomSource] = None,
    iterations: int = SHARE_KDF_ITERATIONS,
) -> bytes:
    """Encode one share as a custodian file body (layout in docs/FORMATS.md)."""
    if params.n > 255 or share.index > 255:
        raise PreconditionError("share files hold at most 255 shares")
    if len(share.label) > SHARE_MAX_LABEL:
        raise PreconditionError("custodian label too long")
    if not 1 <= iterations <= _MAX_ITERATIONS:
        raise PreconditionError(f"kdf iterations must be in [1, {_MAX_ITERATIONS}]")
    rng = rng or default_random()
    salt = rng.token_bytes(SHARE_SALT_SIZE)
    header = (
        _HEADER.pack(SHARE_MAGIC, SHARE_VERSION, params.k, params.n, share.index, iterations)
        + salt
        + bytes([len(share.label)])
        + share.label
    )
    enc_key, mac_key = _share_keys(passphrase, salt, share.label, iterations)
    body = keystream_wrap(enc_key, LABEL_SHARE, share.value.to_bytes(SCALAR_SIZE, "big"))
    return header + body + _share_mac(mac_key, header + body).finalize()


def decrypt_share(data: bytes, passphrase: str) -> Tuple[Share, ShareParams]:
    """
    Raises:
        ShareFormatError: not a share file, truncated, or an out-of-range kdf cost
        ShareDecryptError: wrong passphrase or modified file
    """
    fixed = _HEADER.size + SHARE_SALT_SIZE + 1
    if len(data) < fixed + SCALAR_SIZE + _TAG_SIZE:
        raise ShareFormatError("share file too short")
    magic, version, k, n, index, iterations = _HEADER.unpack_from(data)
    if magic != SHARE_MAGIC:
        raise ShareFormatError("not a custodian share file")
    if version != SHARE_VERSION:
        raise ShareFormatError(f"unsupported share file version {version}")
    if not 1 <= iterations <= _MAX_ITERATIONS:
        raise ShareFormatError(f"share file asks for {iterations} kdf iterations")
    salt = data[_HEADER.size:_HEADER.size + SHARE_SALT_SIZE]
    label_len = data[fixed - 1]
    if len(data) != fixed + label_len + SCALAR_SIZE + _TAG_SIZE:
        raise ShareFormatError("share file length does not match its header")
    label = data[fixed:fixed + label_len]
    header = data[:fixed + label_len]
    body = data[fixed + label_len:-_TAG_SIZE]
    tag = data[-_TAG_SIZE:]

    enc_key, mac_key = _share_keys(passphrase, salt, label, iterations)
    try:
        _share_mac(mac_key, header + body).verify(tag)
    except InvalidSignature as exc:
        raise ShareDecryptError(f"share {index} did not decrypt") from exc
    value = int.from_bytes(keystream_wrap(enc_key, LABEL_SHARE, body), "big")
    try:
        params = ShareParams(k=k, n=n)
    except PreconditionError as exc:
        raise ShareFormatError(str(exc)) from exc
    return Share(index=index, value=value, label=label), params
