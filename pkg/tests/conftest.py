"""
Pytest configuration and fixtures for the charging authentication tests.
"""
import pytest

from charging.clock import LogicalClock
from charging.constants import ATTR_DIGITAL_IDENTITY
from charging.crypto import SeededRandomSource
from charging.identity import DidRegistry, TrustedIssuer
from charging.protocol import ChargingStation, UserDevice, UtilityServiceProvider
from charging.simnet import Channel, World, authenticate

BIOMETRIC = b'alice-print'
PASSWORD = b'correct-horse'
LOCATION = b'zone-1'

# PBKDF2 rounds used by tests that write share files
FAST_KDF = 1000


@pytest.fixture
def rng():
    """Deterministic random source."""
    return SeededRandomSource('tests')


@pytest.fixture
def clock():
    return LogicalClock()


@pytest.fixture
def registry():
    """In-memory DID registry."""
    return DidRegistry()


@pytest.fixture
def gov(registry):
    """Digital-identity issuer anchored in the registry."""
    return TrustedIssuer.bootstrap(registry)


@pytest.fixture
def usp(registry, gov, rng, clock):
    """USP trusting the digital-identity issuer, with an in-memory database."""
    return UtilityServiceProvider.bootstrap(registry, {str(gov.did)}, rng=rng.fork('usp'), clock=clock)


@pytest.fixture
def enroll(registry, gov, usp, rng, clock):
    """Factory fixture: provision a device and register it with the USP."""
    def _enroll(name='alice', biometric=BIOMETRIC, password=PASSWORD, shadow_set_size=3):
        device_rng = rng.fork(f'user:{name}')
        device = UserDevice.provision(registry, device_rng)
        wallet = device.wallet
        digital_identity = gov.issue(
            wallet.did, wallet.public_key, {ATTR_DIGITAL_IDENTITY: 'true'}, clock.now(), rng=device_rng
        )
        request = device.register(biometric, password, digital_identity, shadow_set_size)
        device.complete_registration(usp.handle_registration(request), biometric, password)
        return device
    return _enroll


@pytest.fixture
def device(enroll):
    """Registered EV user device."""
    return enroll()


@pytest.fixture
def station(registry, usp, rng):
    """Registered charging station at LOCATION."""
    station_rng = rng.fork('cs')
    did = ChargingStation.provision_identity(registry, station_rng)
    return ChargingStation(usp.register_station(did, LOCATION), registry, rng=station_rng)


@pytest.fixture
def run_session(usp):
    """Run one session over a fresh honest channel."""
    def _run(device, station, biometric=BIOMETRIC, password=PASSWORD, location=LOCATION, channel=None):
        return authenticate(device, station, usp, channel if channel is not None else Channel(), biometric, password, location)
    return _run


@pytest.fixture
def world():
    """Simulated deployment with one user and one station."""
    world = World(seed=1, kdf_iterations=FAST_KDF)
    world.add_user('alice', biometric=BIOMETRIC, password=PASSWORD)
    world.add_station('cs1', LOCATION)
    return world


@pytest.fixture
def state_dir(tmp_path, settings):
    """Point the management commands at a temporary state directory."""
    settings.EVAUTH_STATE_DIR = tmp_path
    return tmp_path
