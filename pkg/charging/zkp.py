"""
Non-interactive proof of possession of an ECDSA signature on a hashValue.

For a signature (R, s) on digest h under issuer key Q, with r = R.x mod m:

    R = a * B,   B = G + (r * h^-1) Q,   a = h * s^-1

so knowing a valid signature is knowing the discrete log ``a`` of R to base B.
The prover shows this with a Fiat-Shamir Schnorr proof; s stays hidden.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

from .codec import pack_fields
from .constants import DIGEST_SIZE, POINT_SIZE, SCALAR_SIZE, ZKP_RELATION_ID, ZKP_TEST_MODE
from .crypto import (
    GROUP,
    CurvePoint,
    GroupParams,
    RandomSource,
    _digest,
    decode_point,
    digest_to_scalar,
    encode_point,
    is_identity,
    random_scalar,
    scalar_from_bytes,
    scalar_to_bytes,
)
from .exceptions import CapabilityError, DecodeError, PreconditionError
from .metering import metered

logger = logging.getLogger(__name__)

PROOF_SIZE = POINT_SIZE + SCALAR_SIZE

# (crs, encoded statement, encoded commitment) -> challenge
ChallengeOracle = Callable[["Crs", bytes, bytes], int]


@dataclass(frozen=True)
class Crs:
    tag: bytes
    group: GroupParams = GROUP


@dataclass(frozen=True)
class Statement:
    issuer_key: CurvePoint
    hash_value: bytes
    R: CurvePoint

    def to_bytes(self) -> bytes:
        return pack_fields([encode_point(self.issuer_key), self.hash_value, encode_point(self.R)])

    def base(self) -> Optional[CurvePoint]:
        """B = G + (r * h^-1) Q, or None when the statement is degenerate."""
        m = GROUP.order
        h = digest_to_scalar(self.hash_value)
        if len(self.hash_value) != DIGEST_SIZE or h == 0 or is_identity(self.R):
            return None
        if is_identity(self.issuer_key):
            return None
        r = self.R.x() % m
        B = GROUP.generator + (r * pow(h, -1, m) % m) * self.issuer_key
        return None if is_identity(B) else B


@dataclass(frozen=True)
class Witness:
    a: int


@dataclass(frozen=True)
class Proof:
    t: CurvePoint
    z: int

    def to_bytes(self) -> bytes:
        return encode_point(self.t) + scalar_to_bytes(self.z)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Proof":
        if len(data) != PROOF_SIZE:
            raise DecodeError(f"proof must be {PROOF_SIZE} bytes")
        return cls(t=decode_point(data[:POINT_SIZE]), z=scalar_from_bytes(data[POINT_SIZE:]))


@dataclass
class ProgrammableOracle:
    """Random oracle whose answers can be fixed per query (test mode only)."""

    programmed: Dict[bytes, int] = field(default_factory=dict)

    @staticmethod
    def query(crs: Crs, statement: bytes, commitment: bytes) -> bytes:
        return pack_fields([crs.tag, statement, commitment])

    def program(self, crs: Crs, statement: bytes, commitment: bytes, challenge: int) -> None:
        self.programmed[self.query(crs, statement, commitment)] = challenge % GROUP.order

    def __call__(self, crs: Crs, statement: bytes, commitment: bytes) -> int:
        key = self.query(crs, statement, commitment)
        if key in self.programmed:
            return self.programmed[key]
        return fiat_shamir_challenge(crs, statement, commitment)


@dataclass(frozen=True)
class Trapdoor:
    oracle: ProgrammableOracle


def fiat_shamir_challenge(crs: Crs, statement: bytes, commitment: bytes) -> int:
    return digest_to_scalar(_digest([b"fs-challenge", crs.tag, statement, commitment]))


def setup(relation_id: bytes = ZKP_RELATION_ID, test_mode: Optional[bool] = None) -> Tuple[Crs, Optional[Trapdoor]]:
    """Derive the CRS for a relation; the trapdoor exists only in test mode."""
    if test_mode is None:
        test_mode = ZKP_TEST_MODE
    tag = _digest([b"crs", GROUP.name.encode("ascii"), relation_id])
    trapdoor = Trapdoor(oracle=ProgrammableOracle()) if test_mode else None
    return Crs(tag=tag), trapdoor


def witness_holds(statement: Statement, witness: Witness) -> bool:
    B = statement.base()
    return B is not None and 1 <= witness.a < GROUP.order and witness.a * B == statement.R


@metered("zkp_prove")
def prove(
    crs: Crs,
    statement: Statement,
    witness: Witness,
    rng: Optional[RandomSource] = None,
    oracle: Optional[ChallengeOracle] = None,
) -> Proof:
    if not witness_holds(statement, witness):
        raise PreconditionError("witness does not open the statement")
    m = GROUP.order
    B = statement.base()
    omega = random_scalar(rng)
    t = omega * B
    c = (oracle or fiat_shamir_challenge)(crs, statement.to_bytes(), encode_point(t))
    return Proof(t=t, z=(omega + c * witness.a) % m)


@metered("zkp_verify")
def verify(crs: Crs, statement: Statement, proof: Proof, oracle: Optional[ChallengeOracle] = None) -> bool:
    m = GROUP.order
    B = statement.base()
    if B is None or is_identity(proof.t) or not 0 <= proof.z < m:
        return False
    c = (oracle or fiat_shamir_challenge)(crs, statement.to_bytes(), encode_point(proof.t))
    return proof.z * B == proof.t + c * statement.R


def sim(
    relation_id: bytes,
    trapdoor: Optional[Trapdoor],
    statement: Statement,
    rng: Optional[RandomSource] = None,
) -> Proof:
    """Accepting proof without a witness, by programming the trapdoor oracle."""
    if trapdoor is None:
        raise CapabilityError("proof simulation requires the test-mode trapdoor")
    crs, _ = setup(relation_id, test_mode=True)
    B = statement.base()
    if B is None:
        raise PreconditionError("degenerate statement")
    m = GROUP.order
    c = random_scalar(rng)
    z = random_scalar(rng)
    t = z * B + ((m - c) % m) * statement.R
    trapdoor.oracle.program(crs, statement.to_bytes(), encode_point(t), c)
    return Proof(t=t, z=z)


def extract_witness(first: Tuple[int, Proof], second: Tuple[int, Proof]) -> Witness:
    """Recover ``a`` from two accepting proofs sharing t under distinct challenges."""
    (c1, p1), (c2, p2) = first, second
    m = GROUP.order
    if p1.t != p2.t or (c1 - c2) % m == 0:
        raise PreconditionError("extraction needs one commitment and two distinct challenges")
    return Witness(a=(p1.z - p2.z) * pow((c1 - c2) % m, -1, m) % m)
