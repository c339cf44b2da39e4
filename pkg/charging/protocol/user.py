"""
User-device role: registration, the user's half of authentication, shadow
identity resynchronisation, and private-key backup/restore.
"""

import enum
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

from django.utils.crypto import constant_time_compare

from .. import zkp
from ..codec import unpack_fields
from ..constants import (
    ATTR_CHARGING_STATION,
    ATTR_DIGITAL_IDENTITY,
    DID_METHOD,
    NONCE_SIZE,
    PDID_SIZE,
    SHADOW_SET_SIZE,
    ZKP_RELATION_ID,
)
from ..crypto import RandomSource, default_random, hybrid_decrypt, keygen
from ..exceptions import (
    AuthenticationError,
    ConfidentialityError,
    DecodeError,
    IntegrityError,
    KeyMissingError,
    LocalAuthError,
    NotFoundError,
    PeerAuthError,
    PreconditionError,
    ProtocolOrderError,
    ReRegistrationRequiredError,
)
from ..identity import DidRegistry, SignedCredential, create_did, vc_to_statement, verify_vc
from ..sharing import ShareParams
from . import derivations
from .messages import (
    ChargeRequest,
    PossessionResponse,
    RegistrationRequest,
    RegistrationResponse,
    StationChallenge,
    UserGrant,
    pack_possession,
)
from .recovery import key_backup, key_recover
from .wallet import ShadowIdentity, UserWallet

logger = logging.getLogger(__name__)

ROLE = "user"


class Phase(enum.Enum):
    AWAIT_CHALLENGE = "await-challenge"
    AWAIT_GRANT = "await-grant"
    DONE = "done"
    FAILED = "failed"


@dataclass
class UserSession:
    pdid: bytes
    user_key: bytes
    location: bytes
    via_shadow: bool
    phase: Phase = Phase.AWAIT_CHALLENGE
    user_nonce: bytes = b""
    hash_value: bytes = b""


class UserDevice:
    """
    The EV user's mobile device.

    Holds the wallet and drives one authentication session at a time:
    ``begin_auth`` -> ``prove`` -> ``finish``.
    """

    def __init__(
        self,
        wallet: UserWallet,
        registry: DidRegistry,
        rng: Optional[RandomSource] = None,
        crs: Optional[zkp.Crs] = None,
    ):
        self.wallet = wallet
        self.registry = registry
        self.rng = rng or default_random()
        self.crs = crs or zkp.setup(ZKP_RELATION_ID)[0]
        self.session: Optional[UserSession] = None

    @classmethod
    def provision(cls, registry: DidRegistry, rng: Optional[RandomSource] = None, method: str = DID_METHOD) -> "UserDevice":
        """Create the long-term keypair and publish a DID for it."""
        rng = rng or default_random()
        keys = keygen(rng)
        did = create_did(method, keys.public, registry, rng)
        wallet = UserWallet(did=did, public_key=keys.public, private_key=keys.private)
        logger.info(f"Provisioned user device {did}")
        return cls(wallet, registry, rng)

    # ----------------------------------------------------------------------------------
    # Registration
    # ----------------------------------------------------------------------------------
    def register(
        self,
        biometric: bytes,
        password: bytes,
        digital_identity: SignedCredential,
        shadow_set_size: int = SHADOW_SET_SIZE,
    ) -> RegistrationRequest:
        """Build M_REV1 with a fresh PDID and shadow identity set."""
        vc = digital_identity
        try:
            issuer = self.registry.resolve(vc.body.issuer)
        except NotFoundError as exc:
            raise PreconditionError("digital identity issuer is not registered", role=ROLE) from exc
        if (
            not verify_vc(vc, issuer)
            or vc.body.subject != str(self.wallet.did)
            or vc.subject_key != self.wallet.public_key
            or not vc.body.has_attribute(ATTR_DIGITAL_IDENTITY)
        ):
            raise PreconditionError("digital identity credential is not valid for this device", role=ROLE)

        pdid = self.rng.token_bytes(PDID_SIZE)
        shadows: List[bytes] = []
        while len(shadows) < shadow_set_size:
            candidate = self.rng.token_bytes(PDID_SIZE)
            if candidate != pdid and candidate not in shadows:
                shadows.append(candidate)

        self.wallet.biometric_digest = derivations.biometric_digest(biometric, password)
        self.wallet.pdid = pdid
        self.wallet.shadows = [ShadowIdentity(value) for value in shadows]
        self.wallet.digital_identity = vc
        return RegistrationRequest(did=self.wallet.did, pdid=pdid, shadows=tuple(shadows), digital_identity=vc)

    def complete_registration(self, response: RegistrationResponse, biometric: bytes, password: bytes) -> None:
        """Store the credential and K_user wrapped under h(beta, psw)."""
        delta = derivations.biometric_digest(biometric, password)
        if self.wallet.biometric_digest and not constant_time_compare(delta, self.wallet.biometric_digest):
            raise LocalAuthError("biometric or password differs from registration", role=ROLE)
        self.wallet.biometric_digest = delta
        self.wallet.wrapped_key = derivations.wrap_user_key(delta, response.shared_key)
        self.wallet.cred = response.cred
        self.wallet.nonce = response.nonce
        self.wallet.vc = response.vc
        logger.info(f"Completed registration of {self.wallet.did}")

    # ----------------------------------------------------------------------------------
    # Authentication
    # ----------------------------------------------------------------------------------
    def _unlock(self, biometric: bytes, password: bytes) -> bytes:
        if not self.wallet.registered:
            raise PreconditionError("wallet is not registered", role=ROLE)
        if self.wallet.private_key is None:
            raise KeyMissingError("private key is missing; restore it from custodian shares", role=ROLE)
        delta = derivations.biometric_digest(biometric, password)
        if not constant_time_compare(delta, self.wallet.biometric_digest):
            logger.warning(f"Local authentication failed on {self.wallet.did}")
            raise LocalAuthError("biometric or password mismatch", role=ROLE)
        # per-session keypair; not used for encryption
        self.wallet.session_public_key = keygen(self.rng).public
        return derivations.wrap_user_key(delta, self.wallet.wrapped_key)

    def begin_auth(self, biometric: bytes, password: bytes, location: bytes) -> ChargeRequest:
        """
        Gate on (beta, psw) and emit M_A1.

        If the previous session never finished, the request goes out under
        an unused shadow identity instead of the current PDID.
        """
        if self.wallet.pending_session:
            logger.info(f"Previous session of {self.wallet.did} is unfinished; using a shadow identity")
            return self.desync_recover(biometric, password, location)
        user_key = self._unlock(biometric, password)
        self.session = UserSession(pdid=self.wallet.pdid, user_key=user_key, location=location, via_shadow=False)
        return ChargeRequest(pdid=self.wallet.pdid)

    def desync_recover(self, biometric: bytes, password: bytes, location: bytes) -> ChargeRequest:
        """Emit M_A1 under a fresh shadow identity."""
        user_key = self._unlock(biometric, password)
        unused = self.wallet.unused_shadows()
        if not unused:
            raise ReRegistrationRequiredError("shadow identity set exhausted", role=ROLE)
        shadow = unused[0]
        shadow.used = True
        self.session = UserSession(pdid=shadow.value, user_key=user_key, location=location, via_shadow=True)
        return ChargeRequest(pdid=shadow.value)

    def _expect(self, phase: Phase) -> UserSession:
        if self.session is None or self.session.phase is not phase:
            raise ProtocolOrderError(f"user session is not in phase {phase.value}", role=ROLE)
        return self.session

    def _fail(self, error):
        self.session.phase = Phase.FAILED
        logger.warning(f"User session aborted: {error.code}")
        return error

    def prove(self, challenge: StationChallenge) -> PossessionResponse:
        """Check the station's credential, then build M_A3."""
        session = self._expect(Phase.AWAIT_CHALLENGE)
        if not isinstance(challenge, StationChallenge):
            raise self._fail(ProtocolOrderError("expected M_A2", role=ROLE))
        station_vc = challenge.station_vc
        issuer_did = self.wallet.vc.body.issuer
        if (
            station_vc.body.subject != str(challenge.station_did)
            or station_vc.body.issuer != issuer_did
            or not station_vc.body.has_attribute(ATTR_CHARGING_STATION)
        ):
            raise self._fail(PeerAuthError("station credential does not describe this station", role=ROLE))
        try:
            issuer = self.registry.resolve(issuer_did)
        except NotFoundError as exc:
            raise self._fail(PeerAuthError("credential issuer is not registered", role=ROLE)) from exc
        if not verify_vc(station_vc, issuer):
            raise self._fail(PeerAuthError("station credential rejected", role=ROLE))

        hash_value = derivations.recompute_hashvalue(self.wallet.vc)
        statement, witness = vc_to_statement(self.wallet.vc, issuer.public_key)
        proof = zkp.prove(self.crs, statement, witness, rng=self.rng)

        session.user_nonce = self.rng.token_bytes(NONCE_SIZE)
        session.hash_value = hash_value
        encrypted_location = derivations.mask_location(session.user_key, session.user_nonce, session.location)
        v1 = derivations.compute_v1(session.pdid, session.user_nonce, session.user_key, encrypted_location)

        self.wallet.pending_session = True
        session.phase = Phase.AWAIT_GRANT
        return PossessionResponse(
            hash_value=hash_value,
            proof=pack_possession(statement.R, proof),
            user_nonce=session.user_nonce,
            encrypted_location=encrypted_location,
            v1=v1,
        )

    def finish(self, grant: UserGrant) -> bytes:
        """Open M_A6, check V4, derive SK and roll the wallet forward."""
        session = self._expect(Phase.AWAIT_GRANT)
        if not isinstance(grant, UserGrant):
            raise self._fail(ProtocolOrderError("expected M_A6", role=ROLE))
        try:
            plaintext = hybrid_decrypt(self.wallet.private_key, grant.user_grant)
        except (AuthenticationError, DecodeError) as exc:
            raise self._fail(ConfidentialityError("M_A6 did not decrypt", role=ROLE)) from exc
        try:
            masked_key, v4, nonce_star, vc_star = unpack_fields(plaintext, 4)
        except DecodeError as exc:
            raise self._fail(DecodeError("M_A6 payload is malformed", role=ROLE)) from exc

        if not derivations.check_v4(v4, masked_key, session.user_nonce, session.user_key):
            raise self._fail(IntegrityError("V4 mismatch", role=ROLE))
        session_key = derivations.mask_user_session_key(session.pdid, session.user_nonce, session.user_key, masked_key)
        next_nonce = derivations.wrap_next_nonce(session.user_key, nonce_star)
        try:
            next_vc = SignedCredential.from_bytes(derivations.wrap_next_vc(session.user_key, vc_star))
        except DecodeError as exc:
            raise self._fail(DecodeError("next credential is malformed", role=ROLE)) from exc

        wallet = self.wallet
        wallet.pdid = derivations.next_pdid(session.pdid, session.user_key)
        if session.via_shadow:
            wallet.shadows = [s for s in wallet.shadows if s.value != session.pdid]
        wallet.nonce = next_nonce
        wallet.vc = next_vc
        wallet.cred = next_vc.body
        wallet.pending_session = False
        session.phase = Phase.DONE
        logger.info(f"User session completed{' via shadow identity' if session.via_shadow else ''}")
        return session_key

    # ----------------------------------------------------------------------------------
    # Private-key loss and recovery
    # ----------------------------------------------------------------------------------
    def backup_key(
        self,
        params: ShareParams,
        passphrase: str,
        labels: Optional[Sequence[bytes]] = None,
        **kwargs,
    ) -> List[bytes]:
        if self.wallet.private_key is None:
            raise KeyMissingError("no private key to back up", role=ROLE)
        return key_backup(self.wallet.private_key, params, passphrase, labels=labels, rng=self.rng, **kwargs)

    def delete_private_key(self) -> None:
        self.wallet.private_key = None
        logger.warning(f"Private key of {self.wallet.did} deleted")

    def restore_key(self, share_files: Sequence[bytes], passphrase: str) -> None:
        registered = self.registry.resolve(self.wallet.did).public_key
        if registered != self.wallet.public_key:
            raise PreconditionError("wallet key differs from the registered DID document", role=ROLE)
        self.wallet.private_key = key_recover(share_files, passphrase, registered)
        logger.info(f"Private key of {self.wallet.did} restored from {len(share_files)} shares")
