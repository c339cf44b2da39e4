"""
The user's digital wallet and its on-disk form.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

from ..constants import WALLET_FORMAT
from ..crypto import CurvePoint, decode_point, encode_point
from ..identity import CredentialBody, Did, SignedCredential
from ..storage import read_state, write_state
from ..exceptions import DecodeError, StateIntegrityError

logger = logging.getLogger(__name__)


@dataclass
class ShadowIdentity:
    value: bytes
    used: bool = False


@dataclass
class UserWallet:
    """
    Device-resident state of one EV user.

    ``wrapped_key`` is K_user masked under h(beta, psw); K_user itself is
    never stored. ``pending_session`` is set once M_A3 has been sent and
    cleared when the session finishes, so an interrupted session is resumed
    through a shadow identity.
    """

    did: Did
    public_key: CurvePoint
    private_key: Optional[int]
    biometric_digest: bytes = b""
    wrapped_key: bytes = b""
    pdid: bytes = b""
    shadows: List[ShadowIdentity] = field(default_factory=list)
    cred: Optional[CredentialBody] = None
    nonce: bytes = b""
    vc: Optional[SignedCredential] = None
    digital_identity: Optional[SignedCredential] = None
    pending_session: bool = False
    session_public_key: Optional[CurvePoint] = None

    @property
    def registered(self) -> bool:
        return self.vc is not None and bool(self.wrapped_key)

    def unused_shadows(self) -> List[ShadowIdentity]:
        return [s for s in self.shadows if not s.used]

    def to_dict(self) -> dict:
        def opt(value, encode):
            return None if value is None else encode(value)

        return {
            "did": str(self.did),
            "public_key": encode_point(self.public_key).hex(),
            "private_key": opt(self.private_key, lambda k: f"{k:064x}"),
            "biometric_digest": self.biometric_digest.hex(),
            "wrapped_key": self.wrapped_key.hex(),
            "pdid": self.pdid.hex(),
            "shadows": [{"value": s.value.hex(), "used": s.used} for s in self.shadows],
            "cred": opt(self.cred, lambda c: c.to_json().decode("ascii")),
            "nonce": self.nonce.hex(),
            "vc": opt(self.vc, lambda v: v.to_bytes().hex()),
            "digital_identity": opt(self.digital_identity, lambda v: v.to_bytes().hex()),
            "pending_session": self.pending_session,
            "session_public_key": opt(self.session_public_key, lambda p: encode_point(p).hex()),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UserWallet":
        def opt(key, decode):
            value = data.get(key)
            return None if value is None else decode(value)

        try:
            return cls(
                did=Did.parse(data["did"]),
                public_key=decode_point(bytes.fromhex(data["public_key"])),
                private_key=opt("private_key", lambda h: int(h, 16)),
                biometric_digest=bytes.fromhex(data["biometric_digest"]),
                wrapped_key=bytes.fromhex(data["wrapped_key"]),
                pdid=bytes.fromhex(data["pdid"]),
                shadows=[ShadowIdentity(bytes.fromhex(s["value"]), bool(s["used"])) for s in data["shadows"]],
                cred=opt("cred", lambda c: CredentialBody.from_json(c.encode("ascii"))),
                nonce=bytes.fromhex(data["nonce"]),
                vc=opt("vc", lambda v: SignedCredential.from_bytes(bytes.fromhex(v))),
                digital_identity=opt("digital_identity", lambda v: SignedCredential.from_bytes(bytes.fromhex(v))),
                pending_session=bool(data.get("pending_session", False)),
                session_public_key=opt("session_public_key", lambda p: decode_point(bytes.fromhex(p))),
            )
        except (KeyError, TypeError, ValueError, DecodeError) as exc:
            raise StateIntegrityError(f"wallet content is malformed: {exc}") from exc


def save_wallet(wallet: UserWallet, path: Union[str, Path]) -> Path:
    return write_state(path, WALLET_FORMAT, wallet.to_dict())


def load_wallet(path: Union[str, Path]) -> UserWallet:
    return UserWallet.from_dict(read_state(path, WALLET_FORMAT))
