"""
The hash-based values exchanged in authentication, one helper per value.

Each helper is tagged with ``@step`` so metered operations are attributed to
the protocol value they compute; the benchmark's mapping table is built from
these labels.
"""

from ..constants import LABEL_LOCATION, LABEL_NEXT_NONCE, LABEL_NEXT_VC, LABEL_WRAPPED_KEY
from ..crypto import digest_matches, hash_parts, keystream_wrap, xor_bytes
from ..identity import SignedCredential, make_hashvalue
from ..metering import step


@step("delta = h(beta, psw)")
def biometric_digest(biometric: bytes, password: bytes) -> bytes:
    return hash_parts([biometric, password])


@step("K* = K xor h(beta, psw)")
def wrap_user_key(delta: bytes, key: bytes) -> bytes:
    return keystream_wrap(delta, LABEL_WRAPPED_KEY, key)


@step("hashValue = h(cred, K_pub, n)")
def recompute_hashvalue(vc: SignedCredential) -> bytes:
    return make_hashvalue(vc.body, vc.subject_key, vc.nonce)


@step("EL = LAI xor h(K_user, N_user)")
def mask_location(user_key: bytes, user_nonce: bytes, location: bytes) -> bytes:
    return keystream_wrap(hash_parts([user_key, user_nonce]), LABEL_LOCATION, location)


def _v1_parts(pdid, user_nonce, user_key, encrypted_location):
    return [pdid, user_nonce, user_key, encrypted_location]


@step("V1 = h(PDID, N_user, K_user, EL)")
def compute_v1(pdid: bytes, user_nonce: bytes, user_key: bytes, encrypted_location: bytes) -> bytes:
    return hash_parts(_v1_parts(pdid, user_nonce, user_key, encrypted_location))


@step("V1 check")
def check_v1(v1: bytes, pdid: bytes, user_nonce: bytes, user_key: bytes, encrypted_location: bytes) -> bool:
    return digest_matches(v1, _v1_parts(pdid, user_nonce, user_key, encrypted_location))


def _v2_parts(station_did, station_nonce, station_key, location, pdid, response):
    return [str(station_did).encode("ascii"), station_nonce, station_key, location, pdid, response]


@step("V2 = h(DID_CS, N_CS, K_CS, LAI_CS, PDID, M_A3)")
def compute_v2(station_did, station_nonce: bytes, station_key: bytes, location: bytes, pdid: bytes, response: bytes) -> bytes:
    return hash_parts(_v2_parts(station_did, station_nonce, station_key, location, pdid, response))


@step("V2 check")
def check_v2(v2: bytes, station_did, station_nonce: bytes, station_key: bytes, location: bytes, pdid: bytes, response: bytes) -> bool:
    return digest_matches(v2, _v2_parts(station_did, station_nonce, station_key, location, pdid, response))


@step("PDID_next = h(PDID, K_user)")
def next_pdid(pdid: bytes, user_key: bytes) -> bytes:
    return hash_parts([pdid, user_key])


@step("SK_user = h(PDID, N_user, K_user) xor SK")
def mask_user_session_key(pdid: bytes, user_nonce: bytes, user_key: bytes, value: bytes) -> bytes:
    return xor_bytes(hash_parts([pdid, user_nonce, user_key]), value)


@step("SK_CS = h(DID_CS, N_CS, K_CS) xor SK")
def mask_station_session_key(station_did, station_nonce: bytes, station_key: bytes, value: bytes) -> bytes:
    return xor_bytes(hash_parts([str(station_did).encode("ascii"), station_nonce, station_key]), value)


@step("V3 = h(SK_CS, N_CS, K_CS)")
def compute_v3(masked_station_key: bytes, station_nonce: bytes, station_key: bytes) -> bytes:
    return hash_parts([masked_station_key, station_nonce, station_key])


@step("V3 check")
def check_v3(v3: bytes, masked_station_key: bytes, station_nonce: bytes, station_key: bytes) -> bool:
    return digest_matches(v3, [masked_station_key, station_nonce, station_key])


@step("V4 = h(SK_user, N_user, K_user)")
def compute_v4(masked_user_key: bytes, user_nonce: bytes, user_key: bytes) -> bytes:
    return hash_parts([masked_user_key, user_nonce, user_key])


@step("V4 check")
def check_v4(v4: bytes, masked_user_key: bytes, user_nonce: bytes, user_key: bytes) -> bool:
    return digest_matches(v4, [masked_user_key, user_nonce, user_key])


@step("n* = n_new xor K_user")
def wrap_next_nonce(user_key: bytes, nonce: bytes) -> bytes:
    return keystream_wrap(user_key, LABEL_NEXT_NONCE, nonce)


@step("VC* = VC_new xor K_user")
def wrap_next_vc(user_key: bytes, encoded_vc: bytes) -> bytes:
    return keystream_wrap(user_key, LABEL_NEXT_VC, encoded_vc)
