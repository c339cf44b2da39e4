"""
Wire messages of registration (M_REV1, M_REV2) and authentication (M_A1..M_A6).

Encoding: one tag byte, then the message fields in declaration order, each
length-prefixed (see codec.pack_fields). Decoding is strict: unknown tags,
wrong field counts, wrong fixed lengths or altered constant fields raise
DecodeError.
"""

from dataclasses import dataclass
from typing import ClassVar, Dict, List, Sequence, Tuple, Type

from ..codec import join_fixed, pack_fields, require_length, split_fixed, unpack_fields
from ..constants import (
    CHARGING_REQUEST,
    DIGEST_SIZE,
    NONCE_SIZE,
    PDID_SIZE,
    POINT_SIZE,
    PROOF_REQUEST,
    REGISTRATION_REQUEST,
    SESSION_KEY_SIZE,
    SHARED_KEY_SIZE,
)
from ..crypto import CurvePoint, decode_point, encode_point
from ..exceptions import DecodeError
from ..identity import CredentialBody, Did, SignedCredential
from ..zkp import PROOF_SIZE, Proof

POSSESSION_SIZE = POINT_SIZE + PROOF_SIZE

_MESSAGE_TYPES: Dict[int, Type["Message"]] = {}


def pack_possession(R: CurvePoint, proof: Proof) -> bytes:
    """pi as carried in M_A3: signature point R, then t || z."""
    return encode_point(R) + proof.to_bytes()


def unpack_possession(data: bytes) -> Tuple[CurvePoint, Proof]:
    if len(data) != POSSESSION_SIZE:
        raise DecodeError(f"possession proof must be {POSSESSION_SIZE} bytes")
    return decode_point(data[:POINT_SIZE]), Proof.from_bytes(data[POINT_SIZE:])


def _did(raw: bytes) -> Did:
    try:
        return Did.parse(raw.decode("ascii"))
    except UnicodeDecodeError as exc:
        raise DecodeError("DID is not ASCII") from exc


def _constant(raw: bytes, expected: bytes, name: str) -> None:
    if raw != expected:
        raise DecodeError(f"unexpected {name} field")


class Message:
    """Base for all protocol messages."""

    TAG: ClassVar[int]
    LABEL: ClassVar[str]
    FIELD_COUNT: ClassVar[int]

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.TAG in _MESSAGE_TYPES:
            raise TypeError(f"duplicate message tag {cls.TAG:#x}")
        _MESSAGE_TYPES[cls.TAG] = cls

    def fields(self) -> List[bytes]:
        raise NotImplementedError

    @classmethod
    def from_fields(cls, fields: Sequence[bytes]) -> "Message":
        raise NotImplementedError

    def encode(self) -> bytes:
        return bytes([self.TAG]) + pack_fields(self.fields())


def decode_message(data: bytes) -> Message:
    if not data:
        raise DecodeError("empty message")
    cls = _MESSAGE_TYPES.get(data[0])
    if cls is None:
        raise DecodeError(f"unknown message tag {data[0]:#x}")
    return cls.from_fields(unpack_fields(data[1:], cls.FIELD_COUNT))


def message_label(data: bytes) -> str:
    """Best-effort label for a raw message, used by channel filters."""
    cls = _MESSAGE_TYPES.get(data[0]) if data else None
    return cls.LABEL if cls else "UNKNOWN"


# --------------------------------------------------------------------------------------
# Registration
# --------------------------------------------------------------------------------------
@dataclass(frozen=True)
class RegistrationRequest(Message):
    TAG = 0x01
    LABEL = "M_REV1"
    FIELD_COUNT = 5

    did: Did
    pdid: bytes
    shadows: Tuple[bytes, ...]
    digital_identity: SignedCredential

    def fields(self):
        return [
            REGISTRATION_REQUEST,
            str(self.did).encode("ascii"),
            self.pdid,
            join_fixed(self.shadows, PDID_SIZE),
            self.digital_identity.to_bytes(),
        ]

    @classmethod
    def from_fields(cls, fields):
        request, did, pdid, shadows, vc = fields
        _constant(request, REGISTRATION_REQUEST, "registration request")
        return cls(
            did=_did(did),
            pdid=require_length(pdid, PDID_SIZE, "PDID"),
            shadows=tuple(split_fixed(shadows, PDID_SIZE, "shadow identity set")),
            digital_identity=SignedCredential.from_bytes(vc),
        )


@dataclass(frozen=True)
class RegistrationResponse(Message):
    TAG = 0x02
    LABEL = "M_REV2"
    FIELD_COUNT = 4

    shared_key: bytes
    cred: CredentialBody
    nonce: bytes
    vc: SignedCredential

    def fields(self):
        return [self.shared_key, self.cred.to_json(), self.nonce, self.vc.to_bytes()]

    @classmethod
    def from_fields(cls, fields):
        key, cred, nonce, vc = fields
        return cls(
            shared_key=require_length(key, SHARED_KEY_SIZE, "K_user"),
            cred=CredentialBody.from_json(cred),
            nonce=require_length(nonce, NONCE_SIZE, "n"),
            vc=SignedCredential.from_bytes(vc),
        )


# --------------------------------------------------------------------------------------
# Authentication
# --------------------------------------------------------------------------------------
@dataclass(frozen=True)
class ChargeRequest(Message):
    TAG = 0x11
    LABEL = "M_A1"
    FIELD_COUNT = 3

    pdid: bytes

    def fields(self):
        return [self.pdid, CHARGING_REQUEST, PROOF_REQUEST]

    @classmethod
    def from_fields(cls, fields):
        pdid, charge, proof = fields
        _constant(charge, CHARGING_REQUEST, "charging request")
        _constant(proof, PROOF_REQUEST, "proof request")
        return cls(pdid=require_length(pdid, PDID_SIZE, "PDID"))


@dataclass(frozen=True)
class StationChallenge(Message):
    TAG = 0x12
    LABEL = "M_A2"
    FIELD_COUNT = 3

    station_did: Did
    station_vc: SignedCredential

    def fields(self):
        return [str(self.station_did).encode("ascii"), self.station_vc.to_bytes(), PROOF_REQUEST]

    @classmethod
    def from_fields(cls, fields):
        did, vc, proof = fields
        _constant(proof, PROOF_REQUEST, "proof request")
        return cls(station_did=_did(did), station_vc=SignedCredential.from_bytes(vc))


@dataclass(frozen=True)
class PossessionResponse(Message):
    TAG = 0x13
    LABEL = "M_A3"
    FIELD_COUNT = 5

    hash_value: bytes
    proof: bytes
    user_nonce: bytes
    encrypted_location: bytes
    v1: bytes

    def fields(self):
        return [self.hash_value, self.proof, self.user_nonce, self.encrypted_location, self.v1]

    @classmethod
    def from_fields(cls, fields):
        hash_value, proof, nonce, location, v1 = fields
        return cls(
            hash_value=require_length(hash_value, DIGEST_SIZE, "hashValue"),
            proof=require_length(proof, POSSESSION_SIZE, "possession proof"),
            user_nonce=require_length(nonce, NONCE_SIZE, "N_user"),
            encrypted_location=location,
            v1=require_length(v1, DIGEST_SIZE, "V1"),
        )


@dataclass(frozen=True)
class RelayedResponse(Message):
    TAG = 0x14
    LABEL = "M_A4"
    FIELD_COUNT = 6

    response: bytes
    pdid: bytes
    station_did: Did
    station_nonce: bytes
    station_location: bytes
    v2: bytes

    def fields(self):
        return [
            self.response,
            self.pdid,
            str(self.station_did).encode("ascii"),
            self.station_nonce,
            self.station_location,
            self.v2,
        ]

    @classmethod
    def from_fields(cls, fields):
        response, pdid, did, nonce, location, v2 = fields
        return cls(
            response=response,
            pdid=require_length(pdid, PDID_SIZE, "PDID"),
            station_did=_did(did),
            station_nonce=require_length(nonce, NONCE_SIZE, "N_CS"),
            station_location=location,
            v2=require_length(v2, DIGEST_SIZE, "V2"),
        )


@dataclass(frozen=True)
class SessionGrant(Message):
    TAG = 0x15
    LABEL = "M_A5"
    FIELD_COUNT = 3

    user_grant: bytes
    masked_station_key: bytes
    v3: bytes

    def fields(self):
        return [self.user_grant, self.masked_station_key, self.v3]

    @classmethod
    def from_fields(cls, fields):
        grant, masked, v3 = fields
        return cls(
            user_grant=grant,
            masked_station_key=require_length(masked, SESSION_KEY_SIZE, "SK_CS"),
            v3=require_length(v3, DIGEST_SIZE, "V3"),
        )


@dataclass(frozen=True)
class UserGrant(Message):
    TAG = 0x16
    LABEL = "M_A6"
    FIELD_COUNT = 1

    user_grant: bytes

    def fields(self):
        return [self.user_grant]

    @classmethod
    def from_fields(cls, fields):
        (grant,) = fields
        return cls(user_grant=grant)


MESSAGE_LABELS = tuple(cls.LABEL for cls in _MESSAGE_TYPES.values())
