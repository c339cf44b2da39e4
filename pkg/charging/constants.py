"""
Constants for the charging authentication application.
Centralizes protocol sizes, labels and defaults shared by every role.
"""

# --------------------------------------------------------------------------------------
# Group & hash
# --------------------------------------------------------------------------------------
CURVE_NAME = "NIST P-256"          # prime-order curve, fixed at build time
SCALAR_SIZE = 32                   # big-endian scalar width (bytes)
POINT_SIZE = 33                    # compressed point width (bytes)
DIGEST_SIZE = 32                   # SHA-256 output
SIGNATURE_SIZE = POINT_SIZE + SCALAR_SIZE  # R || s
LENGTH_PREFIX_SIZE = 4             # big-endian u32 in front of every encoded field

# --------------------------------------------------------------------------------------
# Protocol sizes
# --------------------------------------------------------------------------------------
NONCE_SIZE = 32                    # n, N_useri, N_CSj
SHARED_KEY_SIZE = 32               # K_useri, K_CSj
SESSION_KEY_SIZE = DIGEST_SIZE     # SK
PDID_SIZE = 32
SHADOW_SET_SIZE = 10               # default size of D_useri
HYBRID_TAG_SIZE = 32               # HMAC-SHA256 tag on M_A5useri

# --------------------------------------------------------------------------------------
# Fixed message fields
# --------------------------------------------------------------------------------------
REGISTRATION_REQUEST = b"register:ev-user"
CHARGING_REQUEST = b"charge:ac-session"
PROOF_REQUEST = b"prove:vc-possession"

# --------------------------------------------------------------------------------------
# Keystream labels (one per masked field)
# --------------------------------------------------------------------------------------
LABEL_WRAPPED_KEY = b"k-user"
LABEL_LOCATION = b"lai"
LABEL_NEXT_NONCE = b"n-new"
LABEL_NEXT_VC = b"vc-new"
LABEL_HYBRID_KEYS = b"hybrid-keys"
LABEL_HYBRID_DATA = b"hybrid-data"
LABEL_SHARE = b"custodian-share"

# --------------------------------------------------------------------------------------
# Zero-knowledge proof
# --------------------------------------------------------------------------------------
ZKP_RELATION_ID = b"vc-possession"
ZKP_TEST_MODE = False              # trapdoor / simulator only exist when True

# --------------------------------------------------------------------------------------
# Identity
# --------------------------------------------------------------------------------------
DID_METHOD = "evc"
DID_SALT_SIZE = 16
DID_CREATE_ATTEMPTS = 8            # salted retries before giving up on an id collision
AUTHENTICATION_METHOD_ID = "key-1"
VERIFICATION_KEY_TYPE = "EcdsaSecp256r1VerificationKey2019"

ATTR_EV_USER = "registeredEvUser"
ATTR_CHARGING_STATION = "registeredChargingStation"
ATTR_DIGITAL_IDENTITY = "digitalIdentity"

GOV_ISSUER_SEED = b"evcharge-auth/gov-issuer/v1"
GOV_ISSUER_SALT = b"gov-issuer"
USP_SALT = b"utility-service-provider"

# --------------------------------------------------------------------------------------
# Custodian shares
# --------------------------------------------------------------------------------------
SHARE_MAGIC = b"EVSH"
SHARE_VERSION = 1
SHARE_SALT_SIZE = 16
SHARE_KDF_ITERATIONS = 200_000
SHARE_MAX_LABEL = 255

# --------------------------------------------------------------------------------------
# State files
# --------------------------------------------------------------------------------------
STATE_VERSION = 1
WALLET_FORMAT = "evcharge-wallet"
USP_DB_FORMAT = "evcharge-usp-db"
CS_STATE_FORMAT = "evcharge-cs-state"
REGISTRY_GENESIS = "0" * 64        # rolling checksum before the first log entry

# --------------------------------------------------------------------------------------
# Benchmark (informational figures of the reference deployment)
# --------------------------------------------------------------------------------------
REFERENCE_COST_USER = {"hash": 6, "ecdsa_sign": 0, "ecdsa_verify": 1}
REFERENCE_COST_CS_USP = {"hash": 8, "ecdsa_sign": 1, "ecdsa_verify": 1}
REFERENCE_COST_USER_MS = 28.06
REFERENCE_COST_CS_USP_MS = 45.95
HASH_TOLERANCE = 2
