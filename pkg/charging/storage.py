"""
Versioned, checksummed state files (wallet, USP database, CS state).

Each file is a JSON document ``{"format", "version", "checksum", "payload"}``
where checksum is SHA-256 over the canonical payload encoding. Writes go to a
temp file in the target directory and are moved into place with os.replace.
"""

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Union

from .constants import STATE_VERSION
from .exceptions import StateIntegrityError, StorageError
from .identity import canonical_json

logger = logging.getLogger(__name__)


def payload_checksum(payload: dict) -> str:
    return hashlib.sha256(canonical_json(payload)).hexdigest()


def write_state(path: Union[str, Path], fmt: str, payload: dict) -> Path:
    """
    Atomically replace ``path`` with a new state document.

    Returns:
        Path written
    """
    path = Path(path)
    document = {
        "format": fmt,
        "version": STATE_VERSION,
        "checksum": payload_checksum(payload),
        "payload": payload,
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(document, handle, indent=2, sort_keys=True)
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp_name, path)
        except BaseException:
            Path(tmp_name).unlink(missing_ok=True)
            raise
    except OSError as exc:
        logger.error(f"Failed to write {fmt} state to {path}: {exc}")
        raise StorageError(f"cannot write {path}: {exc}") from exc

    logger.info(f"Wrote {fmt} state to {path} ({path.stat().st_size} bytes)")
    return path


def read_state(path: Union[str, Path], fmt: str) -> dict:
    """
    Load and verify a state document.

    Raises:
        StorageError: the file cannot be read
        StateIntegrityError: wrong format or version, or checksum mismatch
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    try:
        document = json.loads(raw)
        payload = document["payload"]
        checksum = document["checksum"]
        found_format = document["format"]
        version = document["version"]
    except (ValueError, KeyError, TypeError) as exc:
        raise StateIntegrityError(f"{path} is not a state document") from exc

    if found_format != fmt:
        raise StateIntegrityError(f"{path} holds {found_format!r}, expected {fmt!r}")
    if version != STATE_VERSION:
        raise StateIntegrityError(f"{path} has unsupported version {version}")
    if checksum != payload_checksum(payload):
        raise StateIntegrityError(f"{path} failed its checksum")
    return payload
