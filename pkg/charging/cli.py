"""
Shared plumbing for the management commands: state-file locations, the
file-backed deployment, RESULT lines and exit codes.

Exit codes: 0 expected outcome, 1 unexpected protocol outcome, 2 usage,
3 I/O or state integrity.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from .clock import LogicalClock, SystemClock
from .crypto import RandomSource, SeededRandomSource, default_random
from .exceptions import (
    EvAuthError,
    ScenarioConfigError,
    StateIntegrityError,
    StorageError,
)
from .identity import DidRegistry, TrustedIssuer
from .protocol import UspDatabase, UtilityServiceProvider

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_IO = 3


def format_result(fields: Mapping[str, object]) -> str:
    """``RESULT key=value ...``; whitespace inside values becomes ``_``."""
    parts = []
    for key, value in fields.items():
        if isinstance(value, bool):
            value = str(value).lower()
        parts.append(f"{key}={'_'.join(str(value).split())}")
    return "RESULT " + " ".join(parts)


def outcome_fields(outcome: str) -> Dict[str, str]:
    code, _, role = outcome.partition("@")
    return {"outcome": code, "role": role} if role else {"outcome": code}


def exit_code_for(error: EvAuthError) -> int:
    if isinstance(error, ScenarioConfigError):
        return EXIT_USAGE
    if isinstance(error, (StorageError, StateIntegrityError)):
        return EXIT_IO
    return EXIT_UNEXPECTED


def random_source(seed: Optional[int], context: str = "") -> RandomSource:
    """Seeded source when ``--seed`` is given, system randomness otherwise."""
    if seed is None:
        return default_random()
    return SeededRandomSource(seed).fork(context)


def fork(rng: RandomSource, label: str) -> RandomSource:
    return rng.fork(label) if isinstance(rng, SeededRandomSource) else rng


def clock_for(seed: Optional[int]):
    return SystemClock() if seed is None else LogicalClock()


@dataclass(frozen=True)
class StatePaths:
    wallet: Path
    usp_db: Path
    cs_state: Path
    registry: Path

    @classmethod
    def from_options(cls, options: Mapping) -> "StatePaths":
        base = Path(settings.EVAUTH_STATE_DIR)
        return cls(
            wallet=Path(options.get("wallet") or base / "wallet.json"),
            usp_db=Path(options.get("usp_db") or base / "usp-db.json"),
            cs_state=Path(options.get("cs_state") or base / "cs-state.json"),
            registry=Path(options.get("registry") or base / "registry.jsonl"),
        )


class Deployment:
    """File-backed DID registry, the built-in identity issuer and the USP."""

    def __init__(self, paths: StatePaths):
        self.paths = paths
        self.method = settings.EVAUTH_DID_METHOD
        self.registry = DidRegistry(paths.registry)
        seed = settings.EVAUTH_GOV_ISSUER_SEED
        self.gov = TrustedIssuer.bootstrap(
            self.registry, seed=seed.encode("utf-8") if isinstance(seed, str) else seed, method=self.method
        )

    def usp(self, rng: RandomSource, clock, create: bool = False) -> UtilityServiceProvider:
        if self.paths.usp_db.exists():
            return UtilityServiceProvider(UspDatabase.load(self.paths.usp_db), self.registry, rng=rng, clock=clock)
        if not create:
            raise StorageError(f"USP database {self.paths.usp_db} does not exist; run register first")
        logger.info(f"Creating USP database at {self.paths.usp_db}")
        return UtilityServiceProvider.bootstrap(
            self.registry,
            {str(self.gov.did)},
            path=self.paths.usp_db,
            rng=rng,
            clock=clock,
            method=self.method,
        )

    def close(self) -> None:
        self.registry.close()


class EvAuthCommand(BaseCommand):
    """
    Base for the protocol commands.

    Subclasses implement ``run(**options)``. Named failures are reported as a
    RESULT line and turned into a CommandError carrying the exit code.
    """

    requires_system_checks = []
    uses_state_files = True

    def add_arguments(self, parser):
        if self.uses_state_files:
            parser.add_argument('--wallet', help='User wallet file (default: <state dir>/wallet.json)')
            parser.add_argument('--usp-db', help='USP database file (default: <state dir>/usp-db.json)')
            parser.add_argument('--cs-state', help='Charging-station state file (default: <state dir>/cs-state.json)')
            parser.add_argument('--registry', help='DID registry log (default: <state dir>/registry.jsonl)')
        parser.add_argument(
            '--seed',
            type=int,
            default=None,
            help='Use a seeded deterministic random source and logical clock',
        )

    def emit(self, **fields) -> None:
        self.stdout.write(format_result(fields))

    def usage_error(self, message: str) -> CommandError:
        return CommandError(message, returncode=EXIT_USAGE)

    def unexpected(self, message: str) -> CommandError:
        return CommandError(message, returncode=EXIT_UNEXPECTED)

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except EvAuthError as exc:
            self.emit(**outcome_fields(exc.outcome))
            raise CommandError(str(exc), returncode=exit_code_for(exc)) from exc

    def run(self, **options) -> None:
        raise NotImplementedError
