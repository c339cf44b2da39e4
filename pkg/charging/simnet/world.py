"""
A simulated deployment: DID registry, digital-identity issuer, USP, stations
and user devices wired together through an adversary-controlled channel.
"""

import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Union

from .. import zkp
from ..clock import LogicalClock
from ..constants import (
    ATTR_DIGITAL_IDENTITY,
    DID_METHOD,
    SHADOW_SET_SIZE,
    SHARE_KDF_ITERATIONS,
    ZKP_RELATION_ID,
)
from ..crypto import SeededRandomSource
from ..exceptions import EvAuthError, ScenarioConfigError, StateIntegrityError, StorageError
from ..identity import DidRegistry, TrustedIssuer
from ..metering import OpCounter, metering
from ..protocol import (
    ChargingStation,
    UserDevice,
    UserWallet,
    UtilityServiceProvider,
    decode_message,
)
from ..sharing import ShareParams
from .channel import AdversaryPolicy, Channel

logger = logging.getLogger(__name__)

USER, CS, USP = "user", "cs", "usp"
ROLES = (USER, CS, USP)

SUCCESS = "success"
DROPPED = "dropped"


def _text(value: Union[str, bytes]) -> bytes:
    return value.encode("utf-8") if isinstance(value, str) else value


@dataclass
class UserProfile:
    name: str
    device: UserDevice
    biometric: bytes
    password: bytes
    location: Optional[bytes] = None
    shares: List[bytes] = field(default_factory=list)
    share_params: Optional[ShareParams] = None


@dataclass
class StationProfile:
    name: str
    station: ChargingStation


@dataclass
class SessionResult:
    """Outcome of one authentication attempt, with per-role op counts and timing."""

    user: str
    station: str
    outcome: str
    keys: Dict[str, bytes] = field(default_factory=dict)
    counters: Dict[str, OpCounter] = field(default_factory=dict)
    elapsed_ms: Dict[str, float] = field(default_factory=dict)
    lines: List[str] = field(default_factory=list)
    messages: int = 0
    via_shadow: bool = False

    @property
    def succeeded(self) -> bool:
        return self.outcome == SUCCESS

    @property
    def keys_agree(self) -> bool:
        return len(self.keys) == len(ROLES) and len(set(self.keys.values())) == 1


class World:
    """
    Deterministic deployment for one seed.

    All randomness comes from forks of one seeded source and credential
    timestamps from a logical clock, so the same seed and the same sequence
    of calls give byte-identical results.
    """

    def __init__(
        self,
        seed: int = 0,
        policy: Optional[AdversaryPolicy] = None,
        shadow_set_size: int = SHADOW_SET_SIZE,
        method: str = DID_METHOD,
        kdf_iterations: int = SHARE_KDF_ITERATIONS,
    ):
        self.seed = seed
        self.rng = SeededRandomSource(seed)
        self.clock = LogicalClock()
        self.method = method
        self.shadow_set_size = shadow_set_size
        self.kdf_iterations = kdf_iterations
        self.registry = DidRegistry()
        self.crs = zkp.setup(ZKP_RELATION_ID)[0]
        self.gov = TrustedIssuer.bootstrap(self.registry, method=method)
        self.usp = UtilityServiceProvider.bootstrap(
            self.registry, {str(self.gov.did)}, rng=self.rng.fork("usp"), clock=self.clock, method=method
        )
        self.channel = Channel(policy)
        self.users: Dict[str, UserProfile] = {}
        self.stations: Dict[str, StationProfile] = {}
        self.counters: Dict[str, OpCounter] = {role: OpCounter(role) for role in ROLES}
        self.sessions = 0

    @property
    def policy(self) -> Optional[AdversaryPolicy]:
        return self.channel.policy

    # ----------------------------------------------------------------------------------
    # Participants
    # ----------------------------------------------------------------------------------
    def _check_name(self, name: str) -> None:
        if name in self.users or name in self.stations:
            raise ScenarioConfigError(f"participant {name!r} is already defined")

    def add_user(
        self,
        name: str,
        biometric: Union[str, bytes] = b"",
        password: Union[str, bytes] = b"",
        location: Optional[Union[str, bytes]] = None,
    ) -> UserProfile:
        """Provision a device, obtain its digital identity and register it with the USP."""
        self._check_name(name)
        biometric = _text(biometric or f"biometric:{name}")
        password = _text(password or f"password:{name}")
        rng = self.rng.fork(f"user:{name}")
        device = UserDevice.provision(self.registry, rng, self.method)
        device.crs = self.crs
        wallet = device.wallet
        gov_vc = self.gov.issue(wallet.did, wallet.public_key, {ATTR_DIGITAL_IDENTITY: "true"}, self.clock.now(), rng=rng)
        request = device.register(biometric, password, gov_vc, self.shadow_set_size)
        device.complete_registration(self.usp.handle_registration(request), biometric, password)
        profile = UserProfile(
            name=name,
            device=device,
            biometric=biometric,
            password=password,
            location=_text(location) if location is not None else None,
        )
        self.users[name] = profile
        return profile

    def add_station(
        self,
        name: str,
        location: Union[str, bytes],
        reported_location: Optional[Union[str, bytes]] = None,
    ) -> StationProfile:
        self._check_name(name)
        rng = self.rng.fork(f"cs:{name}")
        did = ChargingStation.provision_identity(self.registry, rng, self.method)
        state = self.usp.register_station(did, _text(location))
        station = ChargingStation(
            state,
            self.registry,
            rng=rng,
            reported_location=_text(reported_location) if reported_location is not None else None,
            crs=self.crs,
        )
        profile = StationProfile(name=name, station=station)
        self.stations[name] = profile
        return profile

    def user(self, name: str) -> UserProfile:
        try:
            return self.users[name]
        except KeyError:
            raise ScenarioConfigError(f"undefined user {name!r}") from None

    def station(self, name: str) -> StationProfile:
        try:
            return self.stations[name]
        except KeyError:
            raise ScenarioConfigError(f"undefined station {name!r}") from None

    # ----------------------------------------------------------------------------------
    # Authentication
    # ----------------------------------------------------------------------------------
    def run_session(
        self,
        user_name: str,
        station_name: str,
        location: Optional[Union[str, bytes]] = None,
    ) -> SessionResult:
        """Run M_A1..M_A6 between one user and one station through the channel."""
        profile = self.user(user_name)
        station = self.station(station_name).station
        if location is None:
            location = profile.location if profile.location is not None else station.state.location
        self.sessions += 1
        result = authenticate(
            profile.device,
            station,
            self.usp,
            self.channel,
            profile.biometric,
            profile.password,
            _text(location),
            user_name=user_name,
            station_name=station_name,
        )
        for role, counter in result.counters.items():
            self.counters[role].merge(counter)
        logger.info(f"Session {self.sessions} {user_name}@{station_name}: {result.outcome}")
        return result

    # ----------------------------------------------------------------------------------
    # Device theft and key loss
    # ----------------------------------------------------------------------------------
    def steal(self, user_name: str, biometric: Union[str, bytes], password: Union[str, bytes]) -> SessionResult:
        """
        An adversary holding a copy of the wallet tries to unlock it.

        Only the device's local gate runs; nothing is put on the channel.
        """
        profile = self.user(user_name)
        stolen = UserWallet.from_dict(profile.device.wallet.to_dict())
        thief = UserDevice(stolen, self.registry, rng=SeededRandomSource(f"thief:{self.seed}:{user_name}"), crs=self.crs)
        result = SessionResult(user=user_name, station="-", outcome=SUCCESS, counters={USER: OpCounter(USER)})
        try:
            with metering(result.counters[USER]):
                thief.begin_auth(_text(biometric), _text(password), b"")
        except EvAuthError as exc:
            result.outcome = exc.outcome
        logger.info(f"Stolen-device attempt on {user_name}: {result.outcome}")
        return result

    def backup(self, user_name: str, params: ShareParams, passphrase: str) -> List[bytes]:
        profile = self.user(user_name)
        profile.shares = profile.device.backup_key(params, passphrase, iterations=self.kdf_iterations)
        profile.share_params = params
        return profile.shares

    def delete_key(self, user_name: str) -> None:
        self.user(user_name).device.delete_private_key()

    def recover(self, user_name: str, passphrase: str) -> int:
        """Restore the user's key from the first k custodian shares."""
        profile = self.user(user_name)
        if profile.share_params is None:
            raise ScenarioConfigError(f"no backup was made for {user_name!r}")
        profile.device.restore_key(profile.shares[: profile.share_params.k], passphrase)
        return profile.device.wallet.private_key


def _act(result: SessionResult, role: str, func: Callable, *args):
    started = time.perf_counter()
    try:
        with metering(result.counters[role]):
            return func(*args)
    except EvAuthError as exc:
        if exc.role is None:
            exc.role = role
        raise
    finally:
        result.elapsed_ms[role] += (time.perf_counter() - started) * 1000


def _send(channel: Channel, sender: str, receiver: str, message, result: SessionResult) -> Optional[bytes]:
    data = channel.transmit(sender, receiver, message.encode())
    if data is None:
        result.outcome = DROPPED
    return data


def _drive(device, station, usp, channel, biometric, password, location, result: SessionResult) -> None:
    session = station.open_session()

    m_a1 = _act(result, USER, device.begin_auth, biometric, password, location)
    result.via_shadow = device.session.via_shadow
    data = _send(channel, USER, CS, m_a1, result)
    if data is None:
        return
    m_a2 = _act(result, CS, lambda raw: session.respond(decode_message(raw)), data)
    data = _send(channel, CS, USER, m_a2, result)
    if data is None:
        return
    m_a3 = _act(result, USER, lambda raw: device.prove(decode_message(raw)), data)
    data = _send(channel, USER, CS, m_a3, result)
    if data is None:
        return
    m_a4 = _act(result, CS, lambda raw: session.forward(decode_message(raw)), data)
    data = _send(channel, CS, USP, m_a4, result)
    if data is None:
        return
    m_a5, result.keys[USP] = _act(result, USP, lambda raw: usp.authorize(decode_message(raw)), data)
    data = _send(channel, USP, CS, m_a5, result)
    if data is None:
        return
    m_a6, result.keys[CS] = _act(result, CS, lambda raw: session.finish(decode_message(raw)), data)
    data = _send(channel, CS, USER, m_a6, result)
    if data is None:
        return
    result.keys[USER] = _act(result, USER, lambda raw: device.finish(decode_message(raw)), data)


def authenticate(
    device: UserDevice,
    station: ChargingStation,
    usp: UtilityServiceProvider,
    channel: Channel,
    biometric: bytes,
    password: bytes,
    location: bytes,
    user_name: str = USER,
    station_name: str = CS,
) -> SessionResult:
    """
    One authentication session, each role's work metered on its own counter.

    Protocol failures end the session and become the outcome; they are not
    raised. State-file failures are raised.
    """
    result = SessionResult(
        user=user_name,
        station=station_name,
        outcome=SUCCESS,
        counters={role: OpCounter(role) for role in ROLES},
        elapsed_ms=defaultdict(float),
    )
    start = len(channel)
    try:
        _drive(device, station, usp, channel, biometric, password, location, result)
    except (StorageError, StateIntegrityError):
        raise
    except EvAuthError as exc:
        result.outcome = exc.outcome
    result.messages = len(channel) - start
    result.lines = list(channel.lines(start))
    result.elapsed_ms = dict(result.elapsed_ms)
    if result.outcome == SUCCESS and not result.keys_agree:
        result.outcome = "key-mismatch"
    return result
