"""
Adversary-controlled channel between the user device, the charging station
and the USP.

Every message passes the adversary policy exactly once. The policy can let
it through, drop it, flip a byte, swap in a captured message, or rewrite
its keyed fields with a guessed key. It never sees role secrets.
"""

import hashlib
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

from ..codec import pack_fields
from ..constants import ATTR_CHARGING_STATION, NONCE_SIZE, SHARED_KEY_SIZE
from ..crypto import RandomSource, SeededRandomSource, hybrid_encrypt, keygen
from ..exceptions import DecodeError, ScenarioConfigError
from ..identity import CredentialBody, issue_vc
from ..metering import metering
from ..protocol import derivations
from ..protocol.messages import (
    MESSAGE_LABELS,
    ChargeRequest,
    PossessionResponse,
    RelayedResponse,
    SessionGrant,
    StationChallenge,
    UserGrant,
    decode_message,
    message_label,
)

logger = logging.getLogger(__name__)

PASS, DROP, TAMPER, REPLAY, SUBSTITUTE, IMPERSONATE = "pass", "drop", "tamper", "replay", "substitute", "impersonate"
ACTIONS = (DROP, TAMPER, REPLAY, SUBSTITUTE, IMPERSONATE)
ANY = "*"


@dataclass(frozen=True)
class Envelope:
    seq: int
    sender: str
    receiver: str
    label: str
    data: bytes

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.data).hexdigest()[:16]


@dataclass
class Rule:
    """One-shot adversary action for the next message matching ``label``."""

    action: str
    label: str
    index: int = 0
    payload: bytes = b""
    used: bool = False

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ScenarioConfigError(f"unknown adversary action {self.action!r}")
        if self.label != ANY and self.label not in MESSAGE_LABELS:
            raise ScenarioConfigError(f"unknown message label {self.label!r}")

    def matches(self, envelope: Envelope) -> bool:
        return not self.used and self.label in (ANY, envelope.label)


def _forge_charge_request(msg: ChargeRequest, rng: RandomSource):
    return replace(msg, pdid=rng.token_bytes(len(msg.pdid)))


def _forge_station_challenge(msg: StationChallenge, rng: RandomSource):
    # a credential for the claimed station, signed by a key the adversary made up
    keys = keygen(rng)
    body = CredentialBody(
        issuer=msg.station_vc.body.issuer,
        subject=str(msg.station_did),
        attributes={ATTR_CHARGING_STATION: "true"},
        issued_at=msg.station_vc.body.issued_at,
    )
    return replace(msg, station_vc=issue_vc(keys, body, keys.public, rng.token_bytes(NONCE_SIZE)))


def _forge_possession_response(msg: PossessionResponse, rng: RandomSource):
    guess = rng.token_bytes(SHARED_KEY_SIZE)
    nonce = rng.token_bytes(NONCE_SIZE)
    # M_A3 does not carry the PDID; it is guessed along with the key
    v1 = derivations.compute_v1(rng.token_bytes(len(msg.hash_value)), nonce, guess, msg.encrypted_location)
    return replace(msg, user_nonce=nonce, v1=v1)


def _forge_relayed_response(msg: RelayedResponse, rng: RandomSource):
    guess = rng.token_bytes(SHARED_KEY_SIZE)
    nonce = rng.token_bytes(NONCE_SIZE)
    v2 = derivations.compute_v2(msg.station_did, nonce, guess, msg.station_location, msg.pdid, msg.response)
    return replace(msg, station_nonce=nonce, v2=v2)


def _forge_session_grant(msg: SessionGrant, rng: RandomSource):
    guess = rng.token_bytes(SHARED_KEY_SIZE)
    masked = rng.token_bytes(len(msg.masked_station_key))
    return replace(msg, masked_station_key=masked, v3=derivations.compute_v3(masked, rng.token_bytes(NONCE_SIZE), guess))


def _forge_user_grant(msg: UserGrant, rng: RandomSource):
    stranger = keygen(rng).public
    body = pack_fields([rng.token_bytes(32), rng.token_bytes(32), rng.token_bytes(NONCE_SIZE), b""])
    return replace(msg, user_grant=hybrid_encrypt(stranger, body, rng=rng))


_FORGERS: Dict[type, Callable] = {
    ChargeRequest: _forge_charge_request,
    StationChallenge: _forge_station_challenge,
    PossessionResponse: _forge_possession_response,
    RelayedResponse: _forge_relayed_response,
    SessionGrant: _forge_session_grant,
    UserGrant: _forge_user_grant,
}


def impersonate(data: bytes, rng: RandomSource) -> bytes:
    """Rewrite the keyed fields of a message as an outsider would have to."""
    try:
        message = decode_message(data)
    except DecodeError:
        return data
    forger = _FORGERS.get(type(message))
    if forger is None:
        return data
    return forger(message, rng).encode()


@dataclass
class AdversaryPolicy:
    """
    Dolev-Yao adversary: one-shot rules plus an eavesdropping capture store.

    A policy with no rules and no capture filters behaves like no adversary.
    """

    rng: RandomSource = field(default_factory=lambda: SeededRandomSource(0))
    rules: List[Rule] = field(default_factory=list)
    filters: Set[str] = field(default_factory=set)
    captures: List[Envelope] = field(default_factory=list)

    def add_rule(self, action: str, label: str, index: int = 0, payload: bytes = b"") -> Rule:
        rule = Rule(action=action, label=label, index=index, payload=payload)
        self.rules.append(rule)
        return rule

    def capture(self, label: str) -> None:
        if label != ANY and label not in MESSAGE_LABELS:
            raise ScenarioConfigError(f"unknown message label {label!r}")
        self.filters.add(label)

    def captured(self, label: Optional[str] = None) -> List[Envelope]:
        return [e for e in self.captures if label in (None, ANY, e.label)]

    def apply(self, envelope: Envelope) -> Tuple[str, Optional[bytes]]:
        """Return the action taken and the bytes to deliver (None for a drop)."""
        rule = next((r for r in self.rules if r.matches(envelope)), None)
        if rule is None:
            return PASS, envelope.data
        rule.used = True
        data = envelope.data
        if rule.action == DROP:
            return DROP, None
        if rule.action == TAMPER:
            if not data:
                return TAMPER, data
            position = rule.index % len(data)
            tampered = bytearray(data)
            tampered[position] ^= 0x01
            return f"{TAMPER}:{position}", bytes(tampered)
        if rule.action == REPLAY:
            if not 0 <= rule.index < len(self.captures):
                raise ScenarioConfigError(f"no captured message with index {rule.index}")
            return f"{REPLAY}:{rule.index}", self.captures[rule.index].data
        if rule.action == SUBSTITUTE:
            return SUBSTITUTE, rule.payload
        # adversary computation is not charged to any protocol role
        with metering(None):
            return IMPERSONATE, impersonate(data, self.rng)

    def observe(self, envelope: Envelope) -> None:
        if ANY in self.filters or envelope.label in self.filters:
            self.captures.append(envelope)


def adversary_capture(channel: "Channel", label: str = ANY) -> List[Envelope]:
    """Messages the adversary has recorded so far that match ``label``."""
    if channel.policy is None:
        return []
    return channel.policy.captured(label)


@dataclass
class ChannelEvent:
    envelope: Envelope
    action: str
    delivered: Optional[bytes]

    def line(self) -> str:
        e = self.envelope
        sent = f"{e.sender}->{e.receiver} {e.label} len={len(e.data)} sha256={e.fingerprint}"
        if self.delivered is not None and self.delivered != e.data:
            delivered = Envelope(e.seq, e.sender, e.receiver, message_label(self.delivered), self.delivered)
            sent += f" delivered={delivered.label}/len={len(delivered.data)}/sha256={delivered.fingerprint}"
        return f"MSG {sent} action={self.action}"


class Channel:
    """Ordered in-memory channel; every message passes the policy exactly once."""

    def __init__(self, policy: Optional[AdversaryPolicy] = None):
        self.policy = policy
        self.events: List[ChannelEvent] = []

    def __len__(self) -> int:
        return len(self.events)

    def transmit(self, sender: str, receiver: str, data: bytes) -> Optional[bytes]:
        envelope = Envelope(len(self.events), sender, receiver, message_label(data), data)
        if self.policy is None:
            action, delivered = PASS, data
        else:
            action, delivered = self.policy.apply(envelope)
        self.events.append(ChannelEvent(envelope, action, delivered))
        if delivered is not None and self.policy is not None:
            self.policy.observe(replace(envelope, data=delivered, label=message_label(delivered)))
        if action != PASS:
            logger.info(f"Adversary action {action} on {envelope.label} {sender}->{receiver}")
        return delivered

    def lines(self, since: int = 0) -> Sequence[str]:
        return [event.line() for event in self.events[since:]]
