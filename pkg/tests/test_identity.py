"""
Tests for DIDs, the DID registry and verifiable credentials.
"""
import dataclasses
import json

import pytest

from charging.constants import ATTR_DIGITAL_IDENTITY, ATTR_EV_USER
from charging.crypto import GROUP, SeededRandomSource, encode_point
from charging.exceptions import (
    AlreadyRegisteredError,
    DecodeError,
    NotFoundError,
    PreconditionError,
    StateIntegrityError,
)
from charging.identity import (
    CredentialBody,
    Did,
    DidDocument,
    DidRegistry,
    SignedCredential,
    TrustedIssuer,
    anchor_did,
    create_did,
    issue_vc,
    make_hashvalue,
    resolve_did,
    verify_vc,
)
from charging import zkp
from charging.identity import vc_to_statement

from .factories import CredentialBodyFactory, KeyPairFactory


class TestDid:
    """Test DID syntax."""

    def test_parse_round_trip(self):
        """Test that str and parse are inverses."""
        did = Did(method='evc', identifier='3yZe7d')
        assert str(did) == 'did:evc:3yZe7d'
        assert Did.parse(str(did)) == did

    @pytest.mark.parametrize('text', ['evc:abc', 'did::abc', 'did:evc:', 'urn:evc:abc'])
    def test_malformed(self, text):
        """Test that malformed DIDs are decode errors."""
        with pytest.raises(DecodeError):
            Did.parse(text)


class TestRegistry:
    """Test the append-only DID registry."""

    def test_create_and_resolve(self, registry):
        """Test that a created DID resolves to its key."""
        keys = KeyPairFactory()
        did = create_did('evc', keys.public, registry, SeededRandomSource(1))
        assert did.method == 'evc'
        assert resolve_did(did, registry).public_key == keys.public

    def test_same_key_gets_distinct_dids(self, registry):
        """Test that DIDs are salted, so one key can own several."""
        keys = KeyPairFactory()
        rng = SeededRandomSource(2)
        assert create_did('evc', keys.public, registry, rng) != create_did('evc', keys.public, registry, rng)

    def test_unknown_did(self, registry):
        """Test that resolving an unknown DID raises NotFoundError."""
        with pytest.raises(NotFoundError):
            registry.resolve('did:evc:nobody')

    def test_duplicate_registration(self, registry):
        """Test that a DID cannot be registered twice."""
        document = DidDocument(id=Did('evc', 'fixed'), public_key=KeyPairFactory().public)
        registry.register(document)
        with pytest.raises(AlreadyRegisteredError):
            registry.register(document)

    def test_anchor_is_idempotent(self, registry):
        """Test that anchoring the same key and salt twice returns the same DID."""
        keys = KeyPairFactory()
        first = anchor_did('evc', keys.public, registry, b'salt')
        assert anchor_did('evc', keys.public, registry, b'salt') == first
        assert len(registry) == 1

    def test_checksum_changes_on_append(self, registry):
        """Test that every registration advances the rolling checksum."""
        before = registry.checksum
        create_did('evc', KeyPairFactory().public, registry, SeededRandomSource(3))
        assert registry.checksum != before

    def test_file_backed_reload(self, tmp_path):
        """Test that a registry log is replayed on open."""
        path = tmp_path / 'registry.jsonl'
        registry = DidRegistry(path)
        keys = KeyPairFactory()
        did = create_did('evc', keys.public, registry, SeededRandomSource(4))

        reopened = DidRegistry(path)
        assert reopened.resolve(did).public_key == keys.public
        assert reopened.checksum == registry.checksum

    def test_tampered_log_detected(self, tmp_path):
        """Test that editing a logged document breaks the checksum chain."""
        path = tmp_path / 'registry.jsonl'
        registry = DidRegistry(path)
        create_did('evc', KeyPairFactory().public, registry, SeededRandomSource(5))
        entry = json.loads(path.read_text())
        entry['document']['id'] = 'did:evc:someone-else'
        path.write_text(json.dumps(entry) + '\n')
        with pytest.raises(StateIntegrityError):
            DidRegistry(path)

    def test_document_round_trip(self):
        """Test that a DID document survives its dict encoding."""
        document = DidDocument(id=Did('evc', 'abc'), public_key=KeyPairFactory().public)
        assert DidDocument.from_dict(document.to_dict()) == document


class TestCredentials:
    """Test credential issuance and verification."""

    @pytest.fixture
    def issuer(self, registry):
        keys = KeyPairFactory()
        did = create_did('evc', keys.public, registry, SeededRandomSource(6))
        return keys, registry.resolve(did)

    def test_issue_and_verify(self, issuer):
        """Test that an issued credential verifies against the issuer document."""
        keys, document = issuer
        body = CredentialBodyFactory(issuer=str(document.id))
        vc = issue_vc(keys, body, KeyPairFactory().public, b'\x00' * 32)
        assert verify_vc(vc, document)

    def test_modified_attributes_fail(self, issuer):
        """Test that changing an attribute invalidates the credential."""
        keys, document = issuer
        vc = issue_vc(keys, CredentialBodyFactory(issuer=str(document.id)), KeyPairFactory().public, b'\x00' * 32)
        forged = dataclasses.replace(vc, body=dataclasses.replace(vc.body, attributes={ATTR_EV_USER: 'false'}))
        assert not verify_vc(forged, document)

    def test_wrong_issuer_document_fails(self, issuer, registry):
        """Test that a credential does not verify against another issuer."""
        keys, document = issuer
        vc = issue_vc(keys, CredentialBodyFactory(issuer=str(document.id)), KeyPairFactory().public, b'\x00' * 32)
        other = TrustedIssuer.bootstrap(registry)
        assert not verify_vc(vc, registry.resolve(other.did))

    def test_reserved_attribute(self):
        """Test that 'id' cannot be used as an attribute name."""
        with pytest.raises(PreconditionError):
            CredentialBody(issuer='did:evc:a', subject='did:evc:b', attributes={'id': 'x'})

    def test_non_canonical_body_rejected(self):
        """Test that only the canonical JSON encoding decodes."""
        body = CredentialBodyFactory()
        assert CredentialBody.from_json(body.to_json()) == body
        pretty = json.dumps(body.to_dict(), indent=2).encode('ascii')
        with pytest.raises(DecodeError):
            CredentialBody.from_json(pretty)

    def test_signed_credential_bytes(self, issuer):
        """Test that a signed credential survives its byte encoding."""
        keys, document = issuer
        vc = issue_vc(keys, CredentialBodyFactory(issuer=str(document.id)), KeyPairFactory().public, b'\x07' * 32)
        assert SignedCredential.from_bytes(vc.to_bytes()) == vc

    def test_statement_from_credential(self, issuer):
        """Test that the credential yields a provable possession statement."""
        keys, document = issuer
        vc = issue_vc(keys, CredentialBodyFactory(issuer=str(document.id)), KeyPairFactory().public, b'\x08' * 32)
        statement, witness = vc_to_statement(vc, document.public_key)
        assert statement.hash_value == vc.hash_value
        assert zkp.witness_holds(statement, witness)

    def test_statement_needs_matching_issuer_key(self, issuer):
        """Test that a statement under the wrong issuer key is refused."""
        keys, document = issuer
        vc = issue_vc(keys, CredentialBodyFactory(issuer=str(document.id)), KeyPairFactory().public, b'\x09' * 32)
        with pytest.raises(PreconditionError):
            vc_to_statement(vc, KeyPairFactory().public)

    def test_trusted_issuer_credentials(self, gov, registry):
        """Test that the built-in issuer issues digital-identity credentials."""
        subject = KeyPairFactory()
        vc = gov.issue(Did('evc', 'holder'), subject.public, {ATTR_DIGITAL_IDENTITY: 'true'}, 1_700_000_000)
        assert vc.body.has_attribute(ATTR_DIGITAL_IDENTITY)
        assert verify_vc(vc, registry.resolve(gov.did))


GOLDEN_BODY = (
    b'{"@context":["https://www.w3.org/2018/credentials/v1"],'
    b'"credentialSubject":{"id":"did:evc:alice","registeredEvUser":"true"},'
    b'"issuanceDate":1,"issuer":"did:evc:issuer","type":["VerifiableCredential"]}'
)
GOLDEN_HASHVALUE = '60fded096fe35daa38de9b5fd275c5cba5180b35bc114821fdfb9d1229b50c05'
GOLDEN_CHECKSUMS = (
    '5897243c803a2e0e712c2df1227990a0bd8291f682654c2f76efeb99ddfd6169',
    '3970fb1bf3559a536970c4dbf9f9a35ec975ff5277df20d34019e48eeb005d96',
)
GENERATOR_HEX = '036b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296'


class TestGoldenEncodings:
    """Test fixed byte vectors for the persisted and hashed encodings."""

    @pytest.fixture
    def body(self):
        return CredentialBody(
            issuer='did:evc:issuer',
            subject='did:evc:alice',
            attributes={ATTR_EV_USER: 'true'},
            issued_at=1,
        )

    def test_generator_encoding(self):
        """Test the compressed encoding of the group generator."""
        assert encode_point(GROUP.generator).hex() == GENERATOR_HEX

    def test_credential_body_bytes(self, body):
        """Test the canonical JSON of a credential body."""
        assert body.to_json() == GOLDEN_BODY
        assert CredentialBody.from_json(GOLDEN_BODY) == body

    def test_hashvalue(self, body):
        """Test hashValue over the body, the subject key and the nonce."""
        assert make_hashvalue(body, GROUP.generator, b'\x01' * 32).hex() == GOLDEN_HASHVALUE

    def test_registry_checksum_chain(self):
        """Test the checksum after each of two registrations."""
        registry = DidRegistry()
        assert registry.checksum == '0' * 64
        registry.register(DidDocument(id=Did.parse('did:evc:alice'), public_key=GROUP.generator))
        assert registry.checksum == GOLDEN_CHECKSUMS[0]
        registry.register(DidDocument(id=Did.parse('did:evc:bob'), public_key=GROUP.generator))
        assert registry.checksum == GOLDEN_CHECKSUMS[1]

    def test_registry_log_line(self, tmp_path):
        """Test that the log line carries the golden checksum."""
        path = tmp_path / 'registry.jsonl'
        DidRegistry(path).register(DidDocument(id=Did.parse('did:evc:alice'), public_key=GROUP.generator))
        entry = json.loads(path.read_text())
        assert entry['seq'] == 0
        assert entry['checksum'] == GOLDEN_CHECKSUMS[0]
        assert entry['document']['verificationMethod'][0]['publicKeyHex'] == GENERATOR_HEX
