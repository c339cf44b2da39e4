"""
Utility Service Provider role: credential issuer for users and stations,
holder of K_user / K_CS, and generator of session keys.
"""

import logging
import threading
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Set, Tuple, Union

from django.utils.crypto import constant_time_compare

from ..clock import SystemClock
from ..codec import pack_fields
from ..constants import (
    ATTR_CHARGING_STATION,
    ATTR_DIGITAL_IDENTITY,
    ATTR_EV_USER,
    DID_METHOD,
    NONCE_SIZE,
    SESSION_KEY_SIZE,
    SHARED_KEY_SIZE,
    USP_DB_FORMAT,
)
from ..crypto import CurvePoint, KeyPair, RandomSource, decode_point, default_random, encode_point, hybrid_encrypt, keygen
from ..exceptions import (
    AlreadyRegisteredError,
    DecodeError,
    IdentityError,
    IntegrityError,
    LocationForgeryError,
    NotFoundError,
    ProtocolOrderError,
    RegistrationRejectedError,
    ReplayError,
    StateIntegrityError,
)
from ..identity import CredentialBody, Did, DidRegistry, create_did, issue_vc, verify_vc
from ..metering import step
from ..storage import read_state, write_state
from . import derivations
from .messages import (
    PossessionResponse,
    RegistrationRequest,
    RegistrationResponse,
    RelayedResponse,
    SessionGrant,
    decode_message,
)
from .station import CsState

logger = logging.getLogger(__name__)

ROLE = "usp"

CURRENT, SHADOW, RETIRED = "current", "shadow", "retired"


@dataclass
class UspUserRecord:
    did: str
    public_key: CurvePoint
    current_pdid: bytes
    next_pdid: bytes
    shadows: List[bytes]
    shared_key: bytes
    cred: CredentialBody
    nonce: bytes
    expected_hash_value: bytes
    # last hashValue the user proved it holds
    confirmed_hash_value: Optional[bytes] = None
    retired: List[bytes] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "did": self.did,
            "public_key": encode_point(self.public_key).hex(),
            "current_pdid": self.current_pdid.hex(),
            "next_pdid": self.next_pdid.hex(),
            "shadows": [s.hex() for s in self.shadows],
            "shared_key": self.shared_key.hex(),
            "cred": self.cred.to_json().decode("ascii"),
            "nonce": self.nonce.hex(),
            "expected_hash_value": self.expected_hash_value.hex(),
            "confirmed_hash_value": self.confirmed_hash_value.hex() if self.confirmed_hash_value else None,
            "retired": [p.hex() for p in self.retired],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UspUserRecord":
        confirmed = data.get("confirmed_hash_value")
        return cls(
            did=data["did"],
            public_key=decode_point(bytes.fromhex(data["public_key"])),
            current_pdid=bytes.fromhex(data["current_pdid"]),
            next_pdid=bytes.fromhex(data["next_pdid"]),
            shadows=[bytes.fromhex(s) for s in data["shadows"]],
            shared_key=bytes.fromhex(data["shared_key"]),
            cred=CredentialBody.from_json(data["cred"].encode("ascii")),
            nonce=bytes.fromhex(data["nonce"]),
            expected_hash_value=bytes.fromhex(data["expected_hash_value"]),
            confirmed_hash_value=bytes.fromhex(confirmed) if confirmed else None,
            retired=[bytes.fromhex(p) for p in data["retired"]],
        )


@dataclass
class StationRecord:
    did: str
    shared_key: bytes
    location: bytes

    def to_dict(self) -> dict:
        return {"did": self.did, "shared_key": self.shared_key.hex(), "location": self.location.hex()}

    @classmethod
    def from_dict(cls, data: dict) -> "StationRecord":
        return cls(did=data["did"], shared_key=bytes.fromhex(data["shared_key"]), location=bytes.fromhex(data["location"]))


class UspDatabase:
    """
    USP state: its own keys and DID, trusted digital-identity issuers, and
    the user and station records. Saved as one versioned state file when a
    path is given; otherwise kept in memory.
    """

    def __init__(
        self,
        keys: KeyPair,
        did: Did,
        trusted_issuers: Set[str],
        path: Optional[Union[str, Path]] = None,
    ):
        self.keys = keys
        self.did = did
        self.trusted_issuers = set(trusted_issuers)
        self.path = Path(path) if path else None
        self.users: Dict[str, UspUserRecord] = {}
        self.stations: Dict[str, StationRecord] = {}
        self._index: Dict[bytes, Tuple[str, str]] = {}
        self._indexed: Dict[str, Set[bytes]] = {}
        # guards users, stations, the index and saves
        self._lock = threading.RLock()

    @contextmanager
    def transaction(self) -> Iterator["UspDatabase"]:
        """Hold the database lock while records change; save on a clean exit."""
        with self._lock:
            yield self
            self.save()

    # index of every identifier the USP will recognise
    def reindex(self, record: UspUserRecord) -> None:
        with self._lock:
            for identifier in self._indexed.pop(record.did, ()):
                self._index.pop(identifier, None)
            entries = {record.current_pdid: CURRENT}
            entries.update((shadow, SHADOW) for shadow in record.shadows)
            entries.update((retired, RETIRED) for retired in record.retired)
            for identifier, kind in entries.items():
                self._index[identifier] = (record.did, kind)
            self._indexed[record.did] = set(entries)

    def add_user(self, record: UspUserRecord) -> None:
        with self._lock:
            self.users[record.did] = record
            self.reindex(record)

    def lookup(self, pdid: bytes) -> Optional[Tuple[str, str]]:
        with self._lock:
            return self._index.get(pdid)

    def knows_identifier(self, pdid: bytes) -> bool:
        with self._lock:
            return pdid in self._index

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "private_key": f"{self.keys.private:064x}",
                "did": str(self.did),
                "trusted_issuers": sorted(self.trusted_issuers),
                "users": [r.to_dict() for r in self.users.values()],
                "stations": [s.to_dict() for s in self.stations.values()],
            }

    @classmethod
    def from_dict(cls, data: dict, path: Optional[Union[str, Path]] = None) -> "UspDatabase":
        try:
            db = cls(
                keys=KeyPair.from_private(int(data["private_key"], 16)),
                did=Did.parse(data["did"]),
                trusted_issuers=set(data["trusted_issuers"]),
                path=path,
            )
            for raw in data["users"]:
                record = UspUserRecord.from_dict(raw)
                db.add_user(record)
            for raw in data["stations"]:
                station = StationRecord.from_dict(raw)
                db.stations[station.did] = station
        except (KeyError, TypeError, ValueError, DecodeError) as exc:
            raise StateIntegrityError(f"USP database is malformed: {exc}") from exc
        return db

    @classmethod
    def load(cls, path: Union[str, Path]) -> "UspDatabase":
        return cls.from_dict(read_state(path, USP_DB_FORMAT), path=path)

    def save(self) -> None:
        if self.path is None:
            return
        with self._lock:
            write_state(self.path, USP_DB_FORMAT, self.to_dict())


class UtilityServiceProvider:
    """
    The USP service.

    Sessions of distinct users proceed in parallel. A per-user lock
    serializes one user's sessions; record, index and file updates
    additionally hold the database lock.
    """

    def __init__(
        self,
        database: UspDatabase,
        registry: DidRegistry,
        rng: Optional[RandomSource] = None,
        clock=None,
    ):
        self.db = database
        self.registry = registry
        self.rng = rng or default_random()
        self.clock = clock or SystemClock()
        self._locks: Dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    @classmethod
    def bootstrap(
        cls,
        registry: DidRegistry,
        trusted_issuers: Set[str],
        path: Optional[Union[str, Path]] = None,
        rng: Optional[RandomSource] = None,
        clock=None,
        method: str = DID_METHOD,
    ) -> "UtilityServiceProvider":
        """System setup: USP keypair, DID, and an empty database."""
        rng = rng or default_random()
        keys = keygen(rng)
        did = create_did(method, keys.public, registry, rng)
        database = UspDatabase(keys=keys, did=did, trusted_issuers=trusted_issuers, path=path)
        database.save()
        logger.info(f"USP set up as {did}")
        return cls(database, registry, rng=rng, clock=clock)

    @property
    def did(self) -> Did:
        return self.db.did

    def _user_lock(self, did: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks[did]

    # ----------------------------------------------------------------------------------
    # Registration
    # ----------------------------------------------------------------------------------
    def handle_registration(self, request: RegistrationRequest) -> RegistrationResponse:
        """Check the digital identity, then issue the user's credential and K_user (M_REV2)."""
        vc = request.digital_identity
        did = str(request.did)
        if vc.body.issuer not in self.db.trusted_issuers:
            raise RegistrationRejectedError("digital identity issuer is not trusted", role=ROLE)
        try:
            issuer = self.registry.resolve(vc.body.issuer)
            document = self.registry.resolve(did)
        except NotFoundError as exc:
            raise RegistrationRejectedError(str(exc), role=ROLE) from exc
        if (
            not verify_vc(vc, issuer)
            or not vc.body.has_attribute(ATTR_DIGITAL_IDENTITY)
            or vc.body.subject != did
            or vc.subject_key != document.public_key
        ):
            logger.warning(f"Rejected registration of {did}: digital identity did not verify")
            raise RegistrationRejectedError("digital identity credential rejected", role=ROLE)
        shared_key = self.rng.token_bytes(SHARED_KEY_SIZE)
        nonce = self.rng.token_bytes(NONCE_SIZE)
        cred = CredentialBody(
            issuer=str(self.did), subject=did, attributes={ATTR_EV_USER: "true"}, issued_at=self.clock.now()
        )
        user_vc = issue_vc(self.db.keys, cred, document.public_key, nonce)
        record = UspUserRecord(
            did=did,
            public_key=document.public_key,
            current_pdid=request.pdid,
            next_pdid=derivations.next_pdid(request.pdid, shared_key),
            shadows=list(request.shadows),
            shared_key=shared_key,
            cred=cred,
            nonce=nonce,
            expected_hash_value=user_vc.hash_value,
        )
        with self.db.transaction():
            if did in self.db.users:
                raise AlreadyRegisteredError(f"{did} is already registered", role=ROLE)
            identifiers = [request.pdid, *request.shadows]
            if len(set(identifiers)) != len(identifiers) or any(self.db.knows_identifier(p) for p in identifiers):
                raise RegistrationRejectedError("pseudo-identities are not unique", role=ROLE)
            self.db.add_user(record)
        logger.info(f"Registered EV user {did} with {len(record.shadows)} shadow identities")
        return RegistrationResponse(shared_key=shared_key, cred=cred, nonce=nonce, vc=user_vc)

    def register_station(self, station_did: Union[str, Did], location: bytes) -> CsState:
        """Certify a station that already owns a registered DID."""
        did = str(station_did)
        try:
            document = self.registry.resolve(did)
        except NotFoundError as exc:
            raise RegistrationRejectedError(f"station {did} has no registered DID", role=ROLE) from exc
        shared_key = self.rng.token_bytes(SHARED_KEY_SIZE)
        cred = CredentialBody(
            issuer=str(self.did), subject=did, attributes={ATTR_CHARGING_STATION: "true"}, issued_at=self.clock.now()
        )
        station_vc = issue_vc(self.db.keys, cred, document.public_key, self.rng.token_bytes(NONCE_SIZE))
        with self.db.transaction():
            if did in self.db.stations:
                raise AlreadyRegisteredError(f"station {did} is already registered", role=ROLE)
            self.db.stations[did] = StationRecord(did=did, shared_key=shared_key, location=location)
        logger.info(f"Registered charging station {did}")
        return CsState(
            did=Did.parse(did), vc=station_vc, shared_key=shared_key, location=location, usp_did=str(self.did)
        )

    # ----------------------------------------------------------------------------------
    # Authentication
    # ----------------------------------------------------------------------------------
    def _reject(self, error):
        logger.warning(f"USP rejected M_A4: {error.code}")
        return error

    @step("VC_new = Sign(h(cred, K_pub, n_new))")
    def _issue_session_vc(self, record: UspUserRecord, nonce: bytes):
        cred = CredentialBody(
            issuer=str(self.did), subject=record.did, attributes={ATTR_EV_USER: "true"}, issued_at=self.clock.now()
        )
        return cred, issue_vc(self.db.keys, cred, record.public_key, nonce)

    def authorize(self, relayed: RelayedResponse) -> Tuple[SessionGrant, bytes]:
        """
        Check M_A4 and, on success, issue SK and the next credential.

        Checks run in this order: identifier, V2, credential freshness, V1,
        location. Both PDIDs are persisted before M_A5 is returned.

        Returns:
            (M_A5, SK)
        """
        if not isinstance(relayed, RelayedResponse):
            raise ProtocolOrderError("expected M_A4", role=ROLE)
        station = self.db.stations.get(str(relayed.station_did))
        if station is None:
            raise self._reject(IdentityError("unknown charging station", role=ROLE))
        found = self.db.lookup(relayed.pdid)
        if found is None:
            raise self._reject(IdentityError("unknown pseudo-identity", role=ROLE))

        did = found[0]
        with self._user_lock(did):
            # re-read under the lock; a concurrent session may have rotated it
            found = self.db.lookup(relayed.pdid)
            if found is None:
                raise self._reject(IdentityError("unknown pseudo-identity", role=ROLE))
            did, kind = found
            if kind == RETIRED:
                raise self._reject(ReplayError("pseudo-identity already used", role=ROLE))
            record = self.db.users[did]
            return self._authorize_locked(relayed, record, station, via_shadow=kind == SHADOW)

    def _authorize_locked(self, relayed, record: UspUserRecord, station: StationRecord, via_shadow: bool):
        if not derivations.check_v2(
            relayed.v2,
            relayed.station_did,
            relayed.station_nonce,
            station.shared_key,
            relayed.station_location,
            relayed.pdid,
            relayed.response,
        ):
            raise self._reject(IntegrityError("V2 mismatch", role=ROLE))
        try:
            response = decode_message(relayed.response)
        except DecodeError as exc:
            raise self._reject(DecodeError(f"relayed M_A3: {exc}", role=ROLE)) from exc
        if not isinstance(response, PossessionResponse):
            raise self._reject(ProtocolOrderError("M_A4 does not carry M_A3", role=ROLE))

        accepted = [record.expected_hash_value]
        if via_shadow and record.confirmed_hash_value:
            accepted.append(record.confirmed_hash_value)
        if not any(constant_time_compare(response.hash_value, value) for value in accepted):
            raise self._reject(ReplayError("stale credential hashValue", role=ROLE))

        user_key = record.shared_key
        if not derivations.check_v1(
            response.v1, relayed.pdid, response.user_nonce, user_key, response.encrypted_location
        ):
            raise self._reject(IntegrityError("V1 mismatch", role=ROLE))
        if not constant_time_compare(relayed.station_location, station.location):
            raise self._reject(LocationForgeryError("station reported a location it is not registered at", role=ROLE))
        user_location = derivations.mask_location(user_key, response.user_nonce, response.encrypted_location)
        if not constant_time_compare(user_location, relayed.station_location):
            raise self._reject(LocationForgeryError("user and station locations differ", role=ROLE))

        session_key = self.rng.token_bytes(SESSION_KEY_SIZE)
        next_nonce = self.rng.token_bytes(NONCE_SIZE)
        cred, next_vc = self._issue_session_vc(record, next_nonce)

        masked_user_key = derivations.mask_user_session_key(relayed.pdid, response.user_nonce, user_key, session_key)
        masked_station_key = derivations.mask_station_session_key(
            relayed.station_did, relayed.station_nonce, station.shared_key, session_key
        )
        v3 = derivations.compute_v3(masked_station_key, relayed.station_nonce, station.shared_key)
        v4 = derivations.compute_v4(masked_user_key, response.user_nonce, user_key)
        nonce_star = derivations.wrap_next_nonce(user_key, next_nonce)
        vc_star = derivations.wrap_next_vc(user_key, next_vc.to_bytes())
        user_grant = hybrid_encrypt(
            record.public_key, pack_fields([masked_user_key, v4, nonce_star, vc_star]), rng=self.rng
        )

        with self.db.transaction():
            if via_shadow:
                record.shadows.remove(relayed.pdid)
                current = derivations.next_pdid(relayed.pdid, user_key)
            else:
                record.retired.append(relayed.pdid)
                current = record.next_pdid
            record.current_pdid = current
            record.next_pdid = derivations.next_pdid(current, user_key)
            record.confirmed_hash_value = response.hash_value
            record.expected_hash_value = next_vc.hash_value
            record.nonce = next_nonce
            record.cred = cred
            self.db.reindex(record)
        logger.info(f"Authorized session for {record.did}{' via shadow identity' if via_shadow else ''}")
        return SessionGrant(user_grant=user_grant, masked_station_key=masked_station_key, v3=v3), session_key
