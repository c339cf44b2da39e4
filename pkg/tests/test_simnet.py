"""
Tests for the adversarial channel, the simulated deployment and the
scenario engine.
"""
from pathlib import Path

import pytest

from charging.crypto import SeededRandomSource
from charging.exceptions import ScenarioConfigError
from charging.simnet import (
    ATTACK_TYPES,
    BUILTIN_SCENARIOS,
    AdversaryPolicy,
    Channel,
    Rule,
    World,
    adversary_capture,
    builtin_scenario,
    impersonate,
    load_script,
    parse_script,
    run_scenario,
    stolen_device_scenario,
)
from charging.protocol import ChargeRequest, decode_message, save_wallet
from charging.sharing import ShareParams
from charging.simnet.scenarios import outcome_matches

from .conftest import BIOMETRIC, FAST_KDF, PASSWORD

SCENARIO_DIR = Path(__file__).resolve().parent.parent / 'scenarios'

pytestmark = pytest.mark.simnet


class TestChannel:
    """Test the adversary-controlled channel."""

    def test_honest_channel_delivers(self):
        """Test that a channel without policy passes messages unchanged."""
        channel = Channel()
        data = ChargeRequest(pdid=b'\x01' * 32).encode()
        assert channel.transmit('user', 'cs', data) == data
        assert channel.lines()[0].startswith('MSG user->cs M_A1 len=')
        assert channel.lines()[0].endswith('action=pass')

    def test_drop_is_one_shot(self):
        """Test that a drop rule affects only the next matching message."""
        policy = AdversaryPolicy()
        policy.add_rule('drop', 'M_A1')
        channel = Channel(policy)
        data = ChargeRequest(pdid=b'\x01' * 32).encode()
        assert channel.transmit('user', 'cs', data) is None
        assert channel.transmit('user', 'cs', data) == data

    def test_tamper_flips_one_bit(self):
        """Test that tampering XORs 0x01 into the chosen byte."""
        policy = AdversaryPolicy()
        policy.add_rule('tamper', 'M_A1', index=10)
        data = ChargeRequest(pdid=b'\x01' * 32).encode()
        delivered = Channel(policy).transmit('user', 'cs', data)
        assert delivered[10] == data[10] ^ 0x01
        assert delivered[:10] == data[:10] and delivered[11:] == data[11:]

    def test_capture_and_replay(self):
        """Test that a captured message can be replayed in place of a later one."""
        policy = AdversaryPolicy()
        policy.capture('M_A1')
        channel = Channel(policy)
        first = ChargeRequest(pdid=b'\x01' * 32).encode()
        second = ChargeRequest(pdid=b'\x02' * 32).encode()
        channel.transmit('user', 'cs', first)
        assert [e.data for e in adversary_capture(channel, 'M_A1')] == [first]

        policy.add_rule('replay', 'M_A1', index=0)
        assert channel.transmit('user', 'cs', second) == first

    def test_replay_without_capture(self):
        """Test that replaying a capture that does not exist is a configuration error."""
        policy = AdversaryPolicy()
        policy.add_rule('replay', 'M_A1', index=3)
        with pytest.raises(ScenarioConfigError):
            Channel(policy).transmit('user', 'cs', ChargeRequest(pdid=b'\x01' * 32).encode())

    def test_impersonation_keeps_message_type(self):
        """Test that a forged message has the same type as the original."""
        data = ChargeRequest(pdid=b'\x01' * 32).encode()
        forged = impersonate(data, SeededRandomSource(1))
        assert isinstance(decode_message(forged), ChargeRequest)
        assert forged != data

    @pytest.mark.parametrize('action,label', [('teleport', 'M_A1'), ('drop', 'M_A9')])
    def test_invalid_rules(self, action, label):
        """Test that unknown actions and labels are rejected."""
        with pytest.raises(ScenarioConfigError):
            Rule(action=action, label=label)


class TestWorld:
    """Test the simulated deployment."""

    def test_session_succeeds(self, world):
        """Test an honest session between a user and a station."""
        result = world.run_session('alice', 'cs1')
        assert result.succeeded
        assert result.keys_agree
        assert world.sessions == 1

    def test_same_seed_same_keys(self):
        """Test that equal seeds reproduce the session key exactly."""
        keys = []
        for _ in range(2):
            world = World(seed=5)
            world.add_user('alice')
            world.add_station('cs1', 'zone-1')
            keys.append(world.run_session('alice', 'cs1').keys['user'])
        assert keys[0] == keys[1]

    def test_passive_adversary_does_not_interfere(self):
        """Test that an eavesdropper capturing everything changes nothing."""
        results = []
        for policy in (None, AdversaryPolicy()):
            if policy is not None:
                policy.capture('*')
            world = World(seed=6, policy=policy)
            world.add_user('alice')
            world.add_station('cs1', 'zone-1')
            results.append(world.run_session('alice', 'cs1'))
        assert results[0].keys == results[1].keys
        assert results[0].lines == results[1].lines

    def test_signature_operation_counts(self, world):
        """Test the per-role signature work of one session."""
        result = world.run_session('alice', 'cs1')
        user, cs, usp = (result.counters[role] for role in ('user', 'cs', 'usp'))
        assert user.get('ecdsa_verify') == 1
        assert user.get('ecdsa_sign') == 0
        assert cs.get('zkp_verify') == 1
        assert usp.get('ecdsa_sign') == 1

    def test_two_lost_grants_then_recovery(self):
        """Test that a user who missed M_A6 twice in a row recovers through a shadow identity."""
        policy = AdversaryPolicy()
        world = World(seed=17, policy=policy, kdf_iterations=FAST_KDF)
        world.add_user('alice')
        world.add_station('cs1', 'zone-1')
        for _ in range(2):
            policy.add_rule('drop', 'M_A6')
            assert world.run_session('alice', 'cs1').outcome == 'dropped'
        result = world.run_session('alice', 'cs1')
        assert result.succeeded
        assert result.via_shadow
        wallet = world.user('alice').device.wallet
        record = world.usp.db.users[str(wallet.did)]
        assert sorted(record.shadows) == sorted(s.value for s in wallet.unused_shadows())
        assert world.run_session('alice', 'cs1').succeeded

    def test_lost_grant_then_aborted_shadow_session(self):
        """Test that a shadow session lost before the USP does not block the next one."""
        policy = AdversaryPolicy()
        world = World(seed=18, policy=policy, kdf_iterations=FAST_KDF)
        world.add_user('alice')
        world.add_station('cs1', 'zone-1')
        policy.add_rule('drop', 'M_A6')
        assert world.run_session('alice', 'cs1').outcome == 'dropped'
        policy.add_rule('drop', 'M_A3')
        assert world.run_session('alice', 'cs1').outcome == 'dropped'
        result = world.run_session('alice', 'cs1')
        assert result.succeeded
        assert result.via_shadow
        wallet = world.user('alice').device.wallet
        record = world.usp.db.users[str(wallet.did)]
        assert {s.value for s in wallet.unused_shadows()} <= set(record.shadows)
        assert world.run_session('alice', 'cs1').succeeded

    def test_undefined_participant(self, world):
        """Test that sessions with unknown names are configuration errors."""
        with pytest.raises(ScenarioConfigError):
            world.run_session('mallory', 'cs1')

    def test_duplicate_participant(self, world):
        """Test that a name can only be used once."""
        with pytest.raises(ScenarioConfigError):
            world.add_station('alice', 'zone-2')

    def test_stolen_device(self, world):
        """Test that a thief without the biometric cannot unlock the wallet."""
        result = world.steal('alice', b'forged-print', b'guess')
        assert result.outcome == 'local-auth-error@user'
        assert world.run_session('alice', 'cs1').succeeded

    def test_key_loss_and_recovery(self, world):
        """Test deleting and recovering the private key inside the simulator."""
        world.backup('alice', ShareParams(2, 3), 'pass')
        world.delete_key('alice')
        assert world.run_session('alice', 'cs1').outcome == 'key-missing-error@user'
        world.recover('alice', 'pass')
        assert world.run_session('alice', 'cs1').succeeded


class TestScripts:
    """Test scenario parsing."""

    def test_parse(self):
        """Test verbs, arguments, options and comments."""
        scenario = parse_script('SEED 4\nUSER alice lai=zone-2  # the owner\n\nSEND alice cs1\n', name='demo')
        assert scenario.name == 'demo'
        assert scenario.seed == 4
        assert [s.verb for s in scenario.steps] == ['USER', 'SEND']
        assert scenario.steps[0].options == {'lai': 'zone-2'}

    def test_unknown_verb(self):
        """Test that an unknown verb is a configuration error."""
        with pytest.raises(ScenarioConfigError):
            parse_script('LAUNCH rockets')

    def test_seed_must_come_first(self):
        """Test that SEED after another step is refused."""
        with pytest.raises(ScenarioConfigError):
            parse_script('USER alice\nSEED 3')

    def test_missing_argument(self):
        """Test that a step missing its argument fails when run."""
        with pytest.raises(ScenarioConfigError):
            run_scenario('SEED 1\nUSER\n')

    def test_undefined_user_in_send(self):
        """Test that sending for an undefined user fails when run."""
        with pytest.raises(ScenarioConfigError):
            run_scenario('SEED 1\nSTATION cs1 lai=zone-1\nSEND alice cs1\n')

    @pytest.mark.parametrize('expected,actual,matches', [
        ('integrity-error', 'integrity-error@usp', True),
        ('integrity-error@usp', 'integrity-error@usp', True),
        ('integrity-error@cs', 'integrity-error@usp', False),
        ('success', 'dropped', False),
    ])
    def test_outcome_matching(self, expected, actual, matches):
        """Test that a bare code matches any role."""
        assert outcome_matches(expected, actual) is matches

    def test_unknown_builtin(self):
        """Test that asking for an unknown built-in scenario fails."""
        with pytest.raises(ScenarioConfigError):
            builtin_scenario('quantum')


class TestBuiltinScenarios:
    """Test that every built-in scenario ends as expected."""

    @pytest.mark.parametrize('name', list(BUILTIN_SCENARIOS))
    def test_scenario_passes(self, name):
        """Test that the scenario's EXPECT lines all hold."""
        transcript = run_scenario(builtin_scenario(name), kdf_iterations=FAST_KDF)
        assert transcript.passed, transcript.failures

    def test_attack_types_exclude_happy_path(self):
        """Test that the attack list holds every scenario except the honest one."""
        assert 'happy' not in ATTACK_TYPES
        assert set(ATTACK_TYPES) | {'happy'} == set(BUILTIN_SCENARIOS)

    def test_transcript_is_deterministic(self):
        """Test that running a scenario twice gives identical transcripts."""
        first = run_scenario(builtin_scenario('replay-m-a4')).render()
        second = run_scenario(builtin_scenario('replay-m-a4')).render()
        assert first == second
        assert first.startswith('SCENARIO replay-m-a4 seed=4\n')
        assert 'FINAL passed=true outcome=replay-error@usp' in first

    def test_replayed_m_a3_detected_at_usp(self):
        """Test the outcome of replaying an old possession response."""
        transcript = run_scenario(builtin_scenario('replay-m-a3'))
        assert transcript.outcome == 'replay-error@usp'

    def test_tampered_m_a4_detected_at_usp(self):
        """Test the outcome of flipping a bit of the relayed hashValue."""
        transcript = run_scenario(builtin_scenario('tamper'))
        assert transcript.outcome == 'integrity-error@usp'

    @pytest.mark.parametrize('script', sorted(SCENARIO_DIR.glob('*.txt')), ids=lambda p: p.stem)
    def test_shipped_script_passes(self, script):
        """Test that the example scripts in scenarios/ hold."""
        transcript = run_scenario(load_script(script), kdf_iterations=FAST_KDF)
        assert transcript.passed, transcript.failures


class TestStolenDeviceFile:
    """Test the stolen-device attack against a wallet file."""

    def test_wrong_credentials(self, device, tmp_path):
        """Test that guessing fails locally and sends nothing."""
        path = save_wallet(device.wallet, tmp_path / 'wallet.json')
        transcript = stolen_device_scenario(path, 'forged-print', 'guess')
        assert transcript.outcome == 'local-auth-error@user'
        assert not any(' MSG ' in line for line in transcript.events)

    def test_right_credentials_unlock(self, device, tmp_path):
        """Test that the owner's credentials unlock the copied wallet."""
        path = save_wallet(device.wallet, tmp_path / 'wallet.json')
        transcript = stolen_device_scenario(path, BIOMETRIC, PASSWORD)
        assert transcript.outcome == 'success'
        assert any('M_A1' in line for line in transcript.events)
