"""
Decentralized identifiers and verifiable credentials.

The DID registry is a local append-only JSON-lines log standing in for the
public ledger; each line carries a rolling checksum over everything before it.
Credentials are signed by their issuer over hashValue = h(cred, key, n).
"""

import hashlib
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

import base58

from .codec import pack_fields, unpack_fields, require_length
from .constants import (
    AUTHENTICATION_METHOD_ID,
    DID_CREATE_ATTEMPTS,
    DID_METHOD,
    DID_SALT_SIZE,
    DIGEST_SIZE,
    GOV_ISSUER_SALT,
    GOV_ISSUER_SEED,
    NONCE_SIZE,
    POINT_SIZE,
    REGISTRY_GENESIS,
    VERIFICATION_KEY_TYPE,
)
from .crypto import (
    GROUP,
    CurvePoint,
    KeyPair,
    RandomSource,
    Signature,
    decode_point,
    default_random,
    digest_matches,
    digest_to_scalar,
    ecdsa_sign_digest,
    ecdsa_verify_digest,
    encode_point,
    hash_parts,
    is_identity,
)
from .exceptions import (
    AlreadyRegisteredError,
    DecodeError,
    NotFoundError,
    PreconditionError,
    StateIntegrityError,
    StorageError,
)
from .zkp import Statement, Witness, witness_holds

logger = logging.getLogger(__name__)

DID_CONTEXT = "https://www.w3.org/ns/did/v1"
VC_CONTEXT = "https://www.w3.org/2018/credentials/v1"


def canonical_json(value) -> bytes:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")


# --------------------------------------------------------------------------------------
# DIDs
# --------------------------------------------------------------------------------------
@dataclass(frozen=True)
class Did:
    method: str
    identifier: str

    def __str__(self) -> str:
        return f"did:{self.method}:{self.identifier}"

    @classmethod
    def parse(cls, text: Union[str, "Did"]) -> "Did":
        if isinstance(text, Did):
            return text
        parts = text.split(":", 2)
        if len(parts) != 3 or parts[0] != "did" or not parts[1] or not parts[2]:
            raise DecodeError(f"malformed DID {text!r}")
        return cls(method=parts[1], identifier=parts[2])


@dataclass(frozen=True)
class DidDocument:
    id: Did
    public_key: CurvePoint
    authentication_method: str = AUTHENTICATION_METHOD_ID

    def to_dict(self) -> dict:
        did = str(self.id)
        key_id = f"{did}#{self.authentication_method}"
        return {
            "@context": DID_CONTEXT,
            "id": did,
            "verificationMethod": [{
                "id": key_id,
                "type": VERIFICATION_KEY_TYPE,
                "controller": did,
                "publicKeyHex": encode_point(self.public_key).hex(),
            }],
            "authentication": [key_id],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DidDocument":
        try:
            did = Did.parse(data["id"])
            method = data["verificationMethod"][0]
            key = decode_point(bytes.fromhex(method["publicKeyHex"]))
            auth = data["authentication"][0].split("#", 1)[1]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise DecodeError(f"malformed DID document: {exc}") from exc
        return cls(id=did, public_key=key, authentication_method=auth)


class DidRegistry:
    """
    Append-only DID registry.

    With a ``path`` every registration is appended to a JSON-lines log; the
    log is replayed and its checksum chain verified on open. Without one the
    registry lives in memory (simulations). Appends are serialized by a lock.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path else None
        self._documents: Dict[str, DidDocument] = {}
        self._checksum = REGISTRY_GENESIS
        self._lock = threading.Lock()
        self._closed = False
        if self.path and self.path.exists():
            self._load()

    @staticmethod
    def _chain(previous: str, seq: int, document: dict) -> str:
        return hashlib.sha256(previous.encode("ascii") + canonical_json({"seq": seq, "document": document})).hexdigest()

    def _load(self) -> None:
        try:
            lines = self.path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise StorageError(f"cannot read registry {self.path}: {exc}") from exc
        for seq, line in enumerate(lines):
            try:
                entry = json.loads(line)
                document = entry["document"]
                recorded = entry["checksum"]
            except (ValueError, KeyError, TypeError) as exc:
                raise StateIntegrityError(f"registry line {seq + 1} is malformed") from exc
            expected = self._chain(self._checksum, seq, document)
            if entry.get("seq") != seq or recorded != expected:
                raise StateIntegrityError(f"registry checksum chain broken at line {seq + 1}")
            try:
                parsed = DidDocument.from_dict(document)
            except DecodeError as exc:
                raise StateIntegrityError(f"registry line {seq + 1}: {exc}") from exc
            self._documents[str(parsed.id)] = parsed
            self._checksum = expected
        logger.info(f"Loaded DID registry {self.path} ({len(self._documents)} entries)")

    def __contains__(self, did) -> bool:
        return str(did) in self._documents

    def __len__(self) -> int:
        return len(self._documents)

    @property
    def checksum(self) -> str:
        return self._checksum

    def register(self, document: DidDocument) -> None:
        with self._lock:
            if self._closed:
                raise StorageError("registry is closed")
            key = str(document.id)
            if key in self._documents:
                raise AlreadyRegisteredError(f"{key} is already registered")
            payload = document.to_dict()
            seq = len(self._documents)
            checksum = self._chain(self._checksum, seq, payload)
            if self.path:
                line = json.dumps({"seq": seq, "document": payload, "checksum": checksum}, sort_keys=True)
                try:
                    self.path.parent.mkdir(parents=True, exist_ok=True)
                    with open(self.path, "a", encoding="utf-8") as handle:
                        handle.write(line + "\n")
                        handle.flush()
                        os.fsync(handle.fileno())
                except OSError as exc:
                    logger.error(f"Registry append failed for {self.path}: {exc}")
                    raise StorageError(f"cannot append to registry: {exc}") from exc
            self._documents[key] = document
            self._checksum = checksum
        logger.info(f"Registered {key}")

    def resolve(self, did) -> DidDocument:
        try:
            return self._documents[str(did)]
        except KeyError:
            raise NotFoundError(f"{did} is not registered") from None

    def close(self) -> None:
        self._closed = True


def _did_for(public_key: CurvePoint, salt: bytes, method: str) -> Did:
    digest = hash_parts([encode_point(public_key), salt])
    return Did(method=method, identifier=base58.b58encode(digest).decode("ascii"))


def create_did(
    method: str,
    public_key: CurvePoint,
    registry: DidRegistry,
    rng: Optional[RandomSource] = None,
) -> Did:
    """Register a fresh salted DID for ``public_key`` and return it."""
    if is_identity(public_key):
        raise PreconditionError("DID owner key is the identity point")
    rng = rng or default_random()
    for _ in range(DID_CREATE_ATTEMPTS):
        did = _did_for(public_key, rng.token_bytes(DID_SALT_SIZE), method)
        if did in registry:
            continue
        try:
            registry.register(DidDocument(id=did, public_key=public_key))
        except AlreadyRegisteredError:
            continue
        return did
    raise StorageError("could not find a free DID identifier")


def anchor_did(method: str, public_key: CurvePoint, registry: DidRegistry, salt: bytes) -> Did:
    """DID with a fixed salt for built-in parties; registering twice is a no-op."""
    did = _did_for(public_key, salt, method)
    if did in registry:
        if registry.resolve(did).public_key != public_key:
            raise StateIntegrityError(f"{did} is registered with a different key")
        return did
    registry.register(DidDocument(id=did, public_key=public_key))
    return did


def resolve_did(did, registry: DidRegistry) -> DidDocument:
    return registry.resolve(did)


# --------------------------------------------------------------------------------------
# Credentials
# --------------------------------------------------------------------------------------
@dataclass(frozen=True)
class CredentialBody:
    issuer: str
    subject: str
    attributes: Mapping[str, str] = field(default_factory=dict)
    issued_at: int = 0

    def __post_init__(self):
        if "id" in self.attributes:
            raise PreconditionError("attribute name 'id' is reserved for the subject")

    def to_dict(self) -> dict:
        return {
            "@context": [VC_CONTEXT],
            "type": ["VerifiableCredential"],
            "issuer": self.issuer,
            "issuanceDate": self.issued_at,
            "credentialSubject": {"id": self.subject, **dict(self.attributes)},
        }

    def to_json(self) -> bytes:
        return canonical_json(self.to_dict())

    @classmethod
    def from_json(cls, data: bytes) -> "CredentialBody":
        try:
            raw = json.loads(data.decode("ascii"))
            subject = dict(raw["credentialSubject"])
            subject_id = subject.pop("id")
            body = cls(
                issuer=raw["issuer"],
                subject=subject_id,
                attributes={str(k): str(v) for k, v in subject.items()},
                issued_at=int(raw["issuanceDate"]),
            )
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            raise DecodeError(f"malformed credential body: {exc}") from exc
        if body.to_json() != data:
            raise DecodeError("credential body is not canonically encoded")
        return body

    def has_attribute(self, name: str) -> bool:
        return self.attributes.get(name) == "true"


@dataclass(frozen=True)
class SignedCredential:
    body: CredentialBody
    subject_key: CurvePoint
    nonce: bytes
    hash_value: bytes
    signature: Signature

    def to_bytes(self) -> bytes:
        return pack_fields([
            self.body.to_json(),
            encode_point(self.subject_key),
            self.nonce,
            self.hash_value,
            self.signature.to_bytes(),
        ])

    @classmethod
    def from_bytes(cls, data: bytes) -> "SignedCredential":
        body, key, nonce, hash_value, signature = unpack_fields(data, 5)
        return cls(
            body=CredentialBody.from_json(body),
            subject_key=decode_point(require_length(key, POINT_SIZE, "subject key")),
            nonce=require_length(nonce, NONCE_SIZE, "nonce"),
            hash_value=require_length(hash_value, DIGEST_SIZE, "hashValue"),
            signature=Signature.from_bytes(signature),
        )


def _hashvalue_parts(cred: CredentialBody, subject_key: CurvePoint, nonce: bytes):
    return [cred.to_json(), encode_point(subject_key), nonce]


def make_hashvalue(cred: CredentialBody, subject_key: CurvePoint, nonce: bytes) -> bytes:
    return hash_parts(_hashvalue_parts(cred, subject_key, nonce))


def issue_vc(issuer: KeyPair, cred: CredentialBody, subject_key: CurvePoint, nonce: bytes) -> SignedCredential:
    hash_value = make_hashvalue(cred, subject_key, nonce)
    return SignedCredential(
        body=cred,
        subject_key=subject_key,
        nonce=nonce,
        hash_value=hash_value,
        signature=ecdsa_sign_digest(hash_value, issuer.private),
    )


def verify_vc(vc: SignedCredential, issuer_document: DidDocument) -> bool:
    if vc.body.issuer != str(issuer_document.id):
        return False
    if not digest_matches(vc.hash_value, _hashvalue_parts(vc.body, vc.subject_key, vc.nonce)):
        return False
    return ecdsa_verify_digest(vc.hash_value, issuer_document.public_key, vc.signature)


def vc_to_statement(vc: SignedCredential, issuer_key: CurvePoint) -> Tuple[Statement, Witness]:
    """Possession statement (Q, hashValue, R) and witness a = h * s^-1."""
    m = GROUP.order
    h = digest_to_scalar(vc.hash_value)
    s = vc.signature.s
    if not 1 <= s < m or h == 0:
        raise PreconditionError("credential signature is not invertible")
    statement = Statement(issuer_key=issuer_key, hash_value=vc.hash_value, R=vc.signature.R)
    witness = Witness(a=h * pow(s, -1, m) % m)
    if not witness_holds(statement, witness):
        raise PreconditionError("credential signature does not match the issuer key")
    return statement, witness


# --------------------------------------------------------------------------------------
# Built-in digital-identity issuer
# --------------------------------------------------------------------------------------
@dataclass(frozen=True)
class TrustedIssuer:
    """Issuer of digital-identity credentials used at user registration."""

    keys: KeyPair
    did: Did

    @classmethod
    def bootstrap(cls, registry: DidRegistry, seed: bytes = GOV_ISSUER_SEED, method: str = DID_METHOD) -> "TrustedIssuer":
        private = digest_to_scalar(hashlib.sha256(seed).digest()) or 1
        keys = KeyPair.from_private(private)
        return cls(keys=keys, did=anchor_did(method, keys.public, registry, GOV_ISSUER_SALT))

    def issue(
        self,
        subject: Did,
        subject_key: CurvePoint,
        attributes: Mapping[str, str],
        issued_at: int,
        rng: Optional[RandomSource] = None,
    ) -> SignedCredential:
        rng = rng or default_random()
        cred = CredentialBody(issuer=str(self.did), subject=str(subject), attributes=dict(attributes), issued_at=issued_at)
        return issue_vc(self.keys, cred, subject_key, rng.token_bytes(NONCE_SIZE))
