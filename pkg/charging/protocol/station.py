"""
Charging-station role: answers M_A1, verifies the user's possession proof,
relays to the USP and opens the USP's grant.
"""

import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

from .. import zkp
from ..constants import CS_STATE_FORMAT, DID_METHOD, NONCE_SIZE, ZKP_RELATION_ID
from ..crypto import RandomSource, default_random, keygen
from ..exceptions import DecodeError, IntegrityError, ProtocolOrderError, StateIntegrityError, UserAuthError
from ..identity import Did, DidRegistry, SignedCredential, create_did
from ..storage import read_state, write_state
from . import derivations
from .messages import (
    ChargeRequest,
    PossessionResponse,
    RelayedResponse,
    SessionGrant,
    StationChallenge,
    UserGrant,
    unpack_possession,
)

logger = logging.getLogger(__name__)

ROLE = "cs"


@dataclass
class CsState:
    """Registered station: DID, credential, K_CS shared with the USP, and LAI."""

    did: Did
    vc: SignedCredential
    shared_key: bytes
    location: bytes
    usp_did: str

    def to_dict(self) -> dict:
        return {
            "did": str(self.did),
            "vc": self.vc.to_bytes().hex(),
            "shared_key": self.shared_key.hex(),
            "location": self.location.hex(),
            "usp_did": self.usp_did,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CsState":
        try:
            return cls(
                did=Did.parse(data["did"]),
                vc=SignedCredential.from_bytes(bytes.fromhex(data["vc"])),
                shared_key=bytes.fromhex(data["shared_key"]),
                location=bytes.fromhex(data["location"]),
                usp_did=data["usp_did"],
            )
        except (KeyError, TypeError, ValueError, DecodeError) as exc:
            raise StateIntegrityError(f"CS state is malformed: {exc}") from exc


def save_cs_state(state: CsState, path: Union[str, Path]) -> Path:
    return write_state(path, CS_STATE_FORMAT, state.to_dict())


def load_cs_state(path: Union[str, Path]) -> CsState:
    return CsState.from_dict(read_state(path, CS_STATE_FORMAT))


class Phase(enum.Enum):
    NEW = "new"
    AWAIT_RESPONSE = "await-response"
    AWAIT_GRANT = "await-grant"
    DONE = "done"
    FAILED = "failed"


class ChargingStation:
    """
    A registered charging station.

    ``reported_location`` overrides the LAI placed in M_A4; it models a
    dishonest station and is None for an honest one.
    """

    def __init__(
        self,
        state: CsState,
        registry: DidRegistry,
        rng: Optional[RandomSource] = None,
        reported_location: Optional[bytes] = None,
        crs: Optional[zkp.Crs] = None,
    ):
        self.state = state
        self.registry = registry
        self.rng = rng or default_random()
        self.reported_location = reported_location
        self.crs = crs or zkp.setup(ZKP_RELATION_ID)[0]

    @staticmethod
    def provision_identity(registry: DidRegistry, rng: Optional[RandomSource] = None, method: str = DID_METHOD) -> Did:
        """Create the station's keypair and publish its DID ahead of registration."""
        keys = keygen(rng)
        return create_did(method, keys.public, registry, rng)

    def open_session(self) -> "StationSession":
        return StationSession(self)


class StationSession:
    """One authentication exchange at a station: respond -> forward -> finish."""

    def __init__(self, station: ChargingStation):
        self.station = station
        self.phase = Phase.NEW
        self.pdid = b""
        self.station_nonce = b""

    def _expect(self, phase: Phase, message, expected_type) -> None:
        if self.phase is not phase:
            raise ProtocolOrderError(f"station session is not in phase {phase.value}", role=ROLE)
        if not isinstance(message, expected_type):
            self.phase = Phase.FAILED
            raise ProtocolOrderError(f"expected {expected_type.LABEL}", role=ROLE)

    def _fail(self, error):
        self.phase = Phase.FAILED
        logger.warning(f"Station session aborted: {error.code}")
        return error

    def respond(self, request: ChargeRequest) -> StationChallenge:
        """Answer M_A1 with the station's DID and credential (M_A2)."""
        self._expect(Phase.NEW, request, ChargeRequest)
        self.pdid = request.pdid
        self.phase = Phase.AWAIT_RESPONSE
        state = self.station.state
        return StationChallenge(station_did=state.did, station_vc=state.vc)

    def forward(self, response: PossessionResponse) -> RelayedResponse:
        """Verify pi and relay M_A3 to the USP as M_A4."""
        self._expect(Phase.AWAIT_RESPONSE, response, PossessionResponse)
        station, state = self.station, self.station.state
        issuer_key = station.registry.resolve(state.usp_did).public_key
        try:
            R, proof = unpack_possession(response.proof)
        except DecodeError as exc:
            raise self._fail(UserAuthError("possession proof is malformed", role=ROLE)) from exc
        statement = zkp.Statement(issuer_key=issuer_key, hash_value=response.hash_value, R=R)
        if not zkp.verify(station.crs, statement, proof):
            raise self._fail(UserAuthError("possession proof rejected", role=ROLE))

        self.station_nonce = station.rng.token_bytes(NONCE_SIZE)
        location = station.reported_location if station.reported_location is not None else state.location
        encoded = response.encode()
        v2 = derivations.compute_v2(state.did, self.station_nonce, state.shared_key, location, self.pdid, encoded)
        self.phase = Phase.AWAIT_GRANT
        return RelayedResponse(
            response=encoded,
            pdid=self.pdid,
            station_did=state.did,
            station_nonce=self.station_nonce,
            station_location=location,
            v2=v2,
        )

    def finish(self, grant: SessionGrant) -> Tuple[UserGrant, bytes]:
        """Check V3, recover SK and pass the user's part on as M_A6."""
        self._expect(Phase.AWAIT_GRANT, grant, SessionGrant)
        state = self.station.state
        if not derivations.check_v3(grant.v3, grant.masked_station_key, self.station_nonce, state.shared_key):
            raise self._fail(IntegrityError("V3 mismatch", role=ROLE))
        session_key = derivations.mask_station_session_key(
            state.did, self.station_nonce, state.shared_key, grant.masked_station_key
        )
        self.phase = Phase.DONE
        return UserGrant(user_grant=grant.user_grant), session_key
