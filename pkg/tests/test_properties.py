"""
Property tests over many seeded sessions and random instances.

The default run uses small counts; the ``slow`` variants run the full
volumes (pytest -m slow).
"""
from itertools import combinations

import pytest

from charging import zkp
from charging.codec import unpack_fields
from charging.crypto import (
    GROUP,
    SeededRandomSource,
    Signature,
    digest_to_scalar,
    ecdsa_verify_digest,
    encode_point,
    hybrid_decrypt,
    random_scalar,
)
from charging.exceptions import ThresholdError
from charging.identity import issue_vc, vc_to_statement
from charging.protocol import decode_message, derivations
from charging.protocol.messages import unpack_possession
from charging.sharing import ShareParams, reconstruct, split
from charging.simnet import AdversaryPolicy, World, builtin_scenario, parse_script, run_scenario
from charging.simnet.channel import ANY, TAMPER

from .conftest import FAST_KDF
from .factories import CredentialBodyFactory, KeyPairFactory

LABELS = ('M_A1', 'M_A2', 'M_A3', 'M_A4', 'M_A5', 'M_A6')
SESSION_FIELDS = ('pdid', 'n_user', 'hash_value', 'R', 't', 'z', 'signature', 'n_cs', 'EL', 'V1', 'V2', 'V3', 'V4')


def _deployment(seed, policy=None, users=('alice',)):
    world = World(seed=seed, policy=policy, kdf_iterations=FAST_KDF)
    for name in users:
        world.add_user(name)
    world.add_station('cs1', 'zone-1')
    world.add_station('cs2', 'zone-1')
    return world


def _issued_instance(rng):
    issuer, subject = KeyPairFactory(), KeyPairFactory()
    vc = issue_vc(issuer, CredentialBodyFactory(), subject.public, rng.token_bytes(32))
    statement, witness = vc_to_statement(vc, issuer.public)
    return issuer, vc, statement, witness


# --------------------------------------------------------------------------------------
# Session-key agreement and freshness
# --------------------------------------------------------------------------------------
def _check_key_agreement(sessions):
    world = _deployment(seed=100)
    keys = set()
    for i in range(sessions):
        result = world.run_session('alice', 'cs1' if i % 2 else 'cs2')
        assert result.succeeded, result.outcome
        assert result.keys_agree
        keys.add(result.keys['user'])
    assert len(keys) == sessions


def _session_fields(world, user, sessions):
    """Run sessions and collect every per-session value seen on the wire or by the user."""
    wallet = world.user(user).device.wallet
    seen = {name: [] for name in SESSION_FIELDS}
    for _ in range(sessions):
        start = len(world.policy.captures)
        previous = wallet.pdid
        shared_key = world.usp.db.users[str(wallet.did)].shared_key
        seen['signature'].append(wallet.vc.signature.to_bytes())
        assert world.run_session(user, 'cs1').succeeded
        assert wallet.pdid == derivations.next_pdid(previous, shared_key)
        for envelope in world.policy.captures[start:]:
            message = decode_message(envelope.data)
            if envelope.label == 'M_A1':
                seen['pdid'].append(message.pdid)
            elif envelope.label == 'M_A3':
                R, proof = unpack_possession(message.proof)
                seen['n_user'].append(message.user_nonce)
                seen['hash_value'].append(message.hash_value)
                seen['R'].append(encode_point(R))
                seen['t'].append(encode_point(proof.t))
                seen['z'].append(proof.z)
                seen['EL'].append(message.encrypted_location)
                seen['V1'].append(message.v1)
            elif envelope.label == 'M_A4':
                seen['n_cs'].append(message.station_nonce)
                seen['V2'].append(message.v2)
            elif envelope.label == 'M_A5':
                seen['V3'].append(message.v3)
            elif envelope.label == 'M_A6':
                grant = hybrid_decrypt(wallet.private_key, message.user_grant)
                seen['V4'].append(unpack_fields(grant, 4)[1])
    return seen


def _check_freshness(sessions):
    policy = AdversaryPolicy()
    policy.capture(ANY)
    world = _deployment(seed=101, policy=policy)
    seen = _session_fields(world, 'alice', sessions)
    for name, values in seen.items():
        assert len(values) == sessions, name
        assert len(set(values)) == sessions, f'{name} repeated'
    wire = b''.join(envelope.data for envelope in policy.captures)
    assert str(world.user('alice').device.wallet.did).encode() not in wire


def _check_unlinkability(sessions):
    policy = AdversaryPolicy()
    policy.capture(ANY)
    world = _deployment(seed=102, policy=policy, users=('alice', 'bob'))
    alice = _session_fields(world, 'alice', sessions)
    bob = _session_fields(world, 'bob', sessions)
    for name in SESSION_FIELDS:
        assert not set(alice[name]) & set(bob[name]), name


class TestSessionProperties:
    """Test key agreement, freshness and unlinkability across sessions."""

    def test_keys_agree(self):
        """Test that every honest session ends with one shared, fresh key."""
        _check_key_agreement(20)

    @pytest.mark.slow
    def test_keys_agree_full(self):
        """Test key agreement over a thousand sessions."""
        _check_key_agreement(1000)

    def test_session_values_never_repeat(self):
        """Test that no identifier, nonce, proof value or check value repeats across sessions."""
        _check_freshness(10)

    @pytest.mark.slow
    def test_session_values_never_repeat_full(self):
        """Test freshness and the PDID chain over a hundred sessions."""
        _check_freshness(100)

    def test_users_share_no_session_values(self):
        """Test that two users' transcripts have no identifier in common."""
        _check_unlinkability(5)

    @pytest.mark.slow
    def test_users_share_no_session_values_full(self):
        """Test unlinkability over a hundred sessions per user."""
        _check_unlinkability(100)


# --------------------------------------------------------------------------------------
# Tampering
# --------------------------------------------------------------------------------------
def _message_lengths(seed):
    policy = AdversaryPolicy()
    policy.capture(ANY)
    world = _deployment(seed=seed, policy=policy)
    assert world.run_session('alice', 'cs1').succeeded
    return {envelope.label: len(envelope.data) for envelope in policy.captures}


def _check_tampering(positions_for):
    seed = 103
    for label, length in _message_lengths(seed).items():
        for position in positions_for(length):
            policy = AdversaryPolicy()
            policy.add_rule(TAMPER, label, index=position)
            result = _deployment(seed=seed, policy=policy).run_session('alice', 'cs1')
            assert not result.succeeded, f'{label} byte {position}'
            code, _, role = result.outcome.partition('@')
            assert code.endswith('-error') and role, f'{label} byte {position}: {result.outcome}'


class TestTampering:
    """Test that a flipped bit in any protocol message ends the session with a named error."""

    def test_message_lengths_cover_every_message(self):
        """Test that the fuzz sees all six messages."""
        assert tuple(_message_lengths(103)) == LABELS

    def test_sampled_bytes(self):
        """Test tags, length prefixes, a middle byte and the last byte of each message."""
        _check_tampering(lambda length: sorted({0, 1, 4, 5, length // 2, length - 1}))

    @pytest.mark.slow
    def test_spread_bytes(self):
        """Test every seventh byte of every message."""
        _check_tampering(lambda length: range(0, length, 7))


# --------------------------------------------------------------------------------------
# Possession proof
# --------------------------------------------------------------------------------------
def _check_completeness(instances):
    rng = SeededRandomSource('completeness')
    crs, _ = zkp.setup()
    for _ in range(instances):
        _, _, statement, witness = _issued_instance(rng)
        assert zkp.verify(crs, statement, zkp.prove(crs, statement, witness, rng=rng))


def _check_extraction(instances):
    rng = SeededRandomSource('extraction')
    crs, _ = zkp.setup()
    m = GROUP.order
    for i in range(instances):
        issuer, vc, statement, witness = _issued_instance(rng)
        c1, c2 = random_scalar(rng), random_scalar(rng)
        first = zkp.prove(crs, statement, witness, rng=SeededRandomSource(i), oracle=lambda *_: c1)
        second = zkp.prove(crs, statement, witness, rng=SeededRandomSource(i), oracle=lambda *_: c2)
        extracted = zkp.extract_witness((c1, first), (c2, second))
        # a = h * s^-1, so the extracted witness yields the issuer's signature
        s = digest_to_scalar(vc.hash_value) * pow(extracted.a, -1, m) % m
        assert s == vc.signature.s
        assert ecdsa_verify_digest(vc.hash_value, issuer.public, Signature(R=statement.R, s=s))


def _check_random_proofs_rejected(trials):
    rng = SeededRandomSource('fuzz')
    crs, _ = zkp.setup()
    issuer_key = KeyPairFactory().public
    for _ in range(trials):
        statement = zkp.Statement(
            issuer_key=issuer_key,
            hash_value=rng.token_bytes(32),
            R=random_scalar(rng) * GROUP.generator,
        )
        proof = zkp.Proof(t=random_scalar(rng) * GROUP.generator, z=random_scalar(rng))
        assert not zkp.verify(crs, statement, proof)


@pytest.mark.crypto
class TestPossessionProofProperties:
    """Test completeness, knowledge extraction and soundness of the possession proof."""

    def test_completeness(self):
        """Test that honest proofs for fresh credentials always verify."""
        _check_completeness(20)

    @pytest.mark.slow
    def test_completeness_full(self):
        """Test completeness over a thousand credentials."""
        _check_completeness(1000)

    def test_extraction(self):
        """Test that rewinding with a second challenge recovers the signature."""
        _check_extraction(5)

    @pytest.mark.slow
    def test_extraction_full(self):
        """Test extraction on a hundred credentials."""
        _check_extraction(100)

    def test_random_proofs_rejected(self):
        """Test that random (R, t, z) never verify."""
        _check_random_proofs_rejected(200)

    @pytest.mark.slow
    def test_random_proofs_rejected_full(self):
        """Test soundness against a hundred thousand random transcripts."""
        _check_random_proofs_rejected(100_000)


# --------------------------------------------------------------------------------------
# Threshold sharing
# --------------------------------------------------------------------------------------
def _check_all_subsets(secrets):
    rng = SeededRandomSource('subsets')
    for n in range(1, 7):
        for k in range(1, n + 1):
            params = ShareParams(k=k, n=n)
            for _ in range(secrets):
                secret = random_scalar(rng)
                shares = split(secret, params, rng=rng).shares
                for subset in combinations(shares, k):
                    assert reconstruct(subset, params) == secret
                if k > 1:
                    with pytest.raises(ThresholdError):
                        reconstruct(shares[: k - 1], params)


class TestSharingProperties:
    """Test reconstruction from every k-subset for small n."""

    def test_every_subset_reconstructs(self):
        """Test all k-subsets for 1 <= k <= n <= 6 with a few secrets."""
        _check_all_subsets(3)

    @pytest.mark.slow
    def test_every_subset_reconstructs_full(self):
        """Test all k-subsets for a hundred secrets per (k, n)."""
        _check_all_subsets(100)


# --------------------------------------------------------------------------------------
# Disabled checks are noticed
# --------------------------------------------------------------------------------------
_TAMPER_PROOF = """\
SEED 21
USER alice
STATION cs1 lai=zone-1
TAMPER M_A3 120
SEND alice cs1
EXPECT user-auth-error@cs
"""

_FORGE_STATION_CREDENTIAL = """\
SEED 22
USER alice
STATION cs1 lai=zone-1
IMPERSONATE M_A2
SEND alice cs1
EXPECT peer-auth-error@user
"""

MUTATIONS = [
    ('charging.protocol.derivations.check_v1', 'impersonate-user'),
    ('charging.protocol.derivations.check_v2', 'impersonate-station'),
    ('charging.protocol.derivations.check_v3', 'replay-m-a5'),
    ('charging.protocol.derivations.check_v4', 'replay-m-a6'),
    ('charging.zkp.verify', _TAMPER_PROOF),
    ('charging.protocol.user.verify_vc', _FORGE_STATION_CREDENTIAL),
]


def _scenario(source):
    if '\n' in source:
        return parse_script(source, name='mutation')
    return builtin_scenario(source)


@pytest.mark.simnet
class TestDisabledChecks:
    """Test that switching off any single check makes its attack scenario fail."""

    @pytest.mark.parametrize('target, source', MUTATIONS)
    def test_scenario_passes_with_check(self, target, source):
        """Test that the attack is caught with every check in place."""
        assert run_scenario(_scenario(source), kdf_iterations=FAST_KDF).passed

    @pytest.mark.parametrize('target, source', MUTATIONS)
    def test_scenario_fails_without_check(self, mocker, target, source):
        """Test that the attack goes unnoticed once the check always accepts."""
        mocker.patch(target, return_value=True)
        assert not run_scenario(_scenario(source), kdf_iterations=FAST_KDF).passed
