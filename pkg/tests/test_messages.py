"""
Tests for the wire encoding of protocol messages.
"""
import pytest

from charging.codec import pack_fields, split_fixed, unpack_fields
from charging.exceptions import DecodeError
from charging.identity import Did
from charging.protocol import (
    ChargeRequest,
    RelayedResponse,
    SessionGrant,
    UserGrant,
    decode_message,
    message_label,
)
from charging.protocol.messages import MESSAGE_LABELS

pytestmark = pytest.mark.protocol


class TestCodec:
    """Test length-prefixed field packing."""

    def test_round_trip(self):
        """Test that packed fields unpack unchanged, including empty ones."""
        fields = [b'', b'a', b'\x00' * 300]
        assert unpack_fields(pack_fields(fields)) == fields

    def test_field_count_enforced(self):
        """Test that an unexpected field count is a decode error."""
        with pytest.raises(DecodeError):
            unpack_fields(pack_fields([b'a', b'b']), count=3)

    def test_truncation_detected(self):
        """Test that truncated data is a decode error."""
        data = pack_fields([b'abcdef'])
        with pytest.raises(DecodeError):
            unpack_fields(data[:-1])
        with pytest.raises(DecodeError):
            unpack_fields(data[:2])

    def test_golden_encoding(self):
        """Test the byte layout of a two-field list."""
        assert pack_fields([b'ab', b'']).hex() == '00000002616200000000'

    def test_split_fixed(self):
        """Test splitting a list of fixed-width items."""
        assert split_fixed(b'aabbcc', 2) == [b'aa', b'bb', b'cc']
        with pytest.raises(DecodeError):
            split_fixed(b'aab', 2)


class TestMessages:
    """Test message encoding and strict decoding."""

    def test_labels_in_protocol_order(self):
        """Test that message labels follow the protocol flow."""
        assert MESSAGE_LABELS == ('M_REV1', 'M_REV2', 'M_A1', 'M_A2', 'M_A3', 'M_A4', 'M_A5', 'M_A6')

    def test_charge_request_layout(self):
        """Test that M_A1 is a tag byte and three length-prefixed fields."""
        data = ChargeRequest(pdid=b'\x01' * 32).encode()
        assert len(data) == 81
        assert data[:5] == bytes.fromhex('1100000020')
        assert data.endswith(b'prove:vc-possession')

    def test_charge_request_round_trip(self):
        """Test that M_A1 decodes to the same message."""
        message = ChargeRequest(pdid=b'\x01' * 32)
        assert decode_message(message.encode()) == message
        assert message_label(message.encode()) == 'M_A1'

    def test_relayed_response_round_trip(self):
        """Test that M_A4 decodes to the same message."""
        message = RelayedResponse(
            response=b'nested',
            pdid=b'\x02' * 32,
            station_did=Did('evc', 'station'),
            station_nonce=b'\x03' * 32,
            station_location=b'zone-1',
            v2=b'\x04' * 32,
        )
        assert decode_message(message.encode()) == message

    def test_session_grant_fixed_lengths(self):
        """Test that a short SK_CS field is rejected."""
        good = SessionGrant(user_grant=b'grant', masked_station_key=b'\x05' * 32, v3=b'\x06' * 32)
        assert decode_message(good.encode()) == good
        short = SessionGrant(user_grant=b'grant', masked_station_key=b'\x05' * 31, v3=b'\x06' * 32)
        with pytest.raises(DecodeError):
            decode_message(short.encode())

    def test_unknown_tag(self):
        """Test that an unknown tag byte is a decode error."""
        with pytest.raises(DecodeError):
            decode_message(b'\xee' + pack_fields([b'x']))
        assert message_label(b'\xee') == 'UNKNOWN'

    def test_empty_message(self):
        """Test that empty input is a decode error."""
        with pytest.raises(DecodeError):
            decode_message(b'')

    def test_wrong_field_count(self):
        """Test that M_A6 with two fields is rejected."""
        data = UserGrant(user_grant=b'grant').encode()
        with pytest.raises(DecodeError):
            decode_message(data + pack_fields([b'extra']))

    def test_wrong_pdid_length(self):
        """Test that a PDID of the wrong size is rejected."""
        with pytest.raises(DecodeError):
            decode_message(ChargeRequest(pdid=b'\x01' * 31).encode())
