"""
Error hierarchy for the charging authentication application.

Every failure carries a stable ``code`` that is used in RESULT lines,
transcripts and scenario expectations, plus the ``role`` that detected it
when one applies.
"""

from typing import Optional


class EvAuthError(Exception):
    """Base class for every named failure."""

    code = "ev-auth-error"

    def __init__(self, message: str = "", role: Optional[str] = None):
        super().__init__(message or self.code)
        self.role = role

    @property
    def outcome(self) -> str:
        """Outcome token in ``code[@role]`` form."""
        return f"{self.code}@{self.role}" if self.role else self.code


# --------------------------------------------------------------------------------------
# Primitive layer
# --------------------------------------------------------------------------------------
class DecodeError(EvAuthError):
    code = "decode-error"


class AuthenticationError(EvAuthError):
    """Hybrid ciphertext tag did not verify."""

    code = "authentication-error"


class PreconditionError(EvAuthError):
    code = "precondition-error"


class RandomnessError(EvAuthError):
    code = "randomness-error"


class CapabilityError(EvAuthError):
    """Simulation capability requested outside test mode."""

    code = "capability-error"


# --------------------------------------------------------------------------------------
# Secret sharing
# --------------------------------------------------------------------------------------
class ThresholdError(EvAuthError):
    code = "threshold-error"


class ShareInputError(EvAuthError):
    code = "share-input-error"


class ShareDecryptError(EvAuthError):
    code = "share-decrypt-error"


class CorruptShareError(EvAuthError):
    code = "corrupt-share-error"


class ShareFormatError(DecodeError):
    """Share file header or layout is invalid."""


# --------------------------------------------------------------------------------------
# Identity & storage
# --------------------------------------------------------------------------------------
class NotFoundError(EvAuthError):
    code = "not-found-error"


class AlreadyRegisteredError(EvAuthError):
    code = "already-registered-error"


class RegistrationRejectedError(EvAuthError):
    code = "registration-rejected"


class StorageError(EvAuthError):
    code = "storage-error"


class StateIntegrityError(EvAuthError):
    code = "state-integrity-error"


# --------------------------------------------------------------------------------------
# Protocol
# --------------------------------------------------------------------------------------
class LocalAuthError(EvAuthError):
    code = "local-auth-error"


class KeyMissingError(EvAuthError):
    code = "key-missing-error"


class PeerAuthError(EvAuthError):
    code = "peer-auth-error"


class UserAuthError(EvAuthError):
    code = "user-auth-error"


class IdentityError(EvAuthError):
    code = "identity-error"


class IntegrityError(EvAuthError):
    code = "integrity-error"


class LocationForgeryError(EvAuthError):
    code = "location-forgery-error"


class ReplayError(EvAuthError):
    code = "replay-error"


class ConfidentialityError(EvAuthError):
    code = "confidentiality-error"


class ProtocolOrderError(EvAuthError):
    code = "protocol-order-error"


class ReRegistrationRequiredError(EvAuthError):
    code = "re-registration-required"


# --------------------------------------------------------------------------------------
# Simulation
# --------------------------------------------------------------------------------------
class ScenarioConfigError(EvAuthError):
    code = "scenario-config-error"


class BenchmarkError(EvAuthError):
    code = "benchmark-error"
