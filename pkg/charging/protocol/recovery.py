"""
Private-key backup to custodian shares and recovery from any k of them.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

from ..constants import SHARE_KDF_ITERATIONS
from ..crypto import GROUP, CurvePoint, RandomSource, default_random
from ..exceptions import CorruptShareError, StorageError, ThresholdError
from ..sharing import ShareParams, decrypt_share, encrypt_share, reconstruct, split

logger = logging.getLogger(__name__)

SHARE_SUFFIX = ".share"


def default_labels(params: ShareParams) -> List[bytes]:
    return [f"custodian-{i}".encode("ascii") for i in range(1, params.n + 1)]


def key_backup(
    private_key: int,
    params: ShareParams,
    passphrase: str,
    labels: Optional[Sequence[bytes]] = None,
    rng: Optional[RandomSource] = None,
    iterations: int = SHARE_KDF_ITERATIONS,
) -> List[bytes]:
    """Split the private key and encrypt one share per custodian."""
    rng = rng or default_random()
    share_set = split(private_key, params, rng=rng, labels=list(labels or default_labels(params)))
    return [encrypt_share(share, params, passphrase, rng=rng, iterations=iterations) for share in share_set.shares]


def key_recover(share_files: Sequence[bytes], passphrase: str, public_key: CurvePoint) -> int:
    """
    Reconstruct the private key and check it against the registered public key.

    Raises:
        ShareDecryptError: a share does not open under ``passphrase``
        ThresholdError: fewer than k shares
        CorruptShareError: the reconstructed key does not match ``public_key``
    """
    decrypted = [decrypt_share(blob, passphrase) for blob in share_files]
    if not decrypted:
        raise ThresholdError("no shares supplied")
    params = decrypted[0][1]
    if any(p != params for _, p in decrypted):
        raise CorruptShareError("shares come from different backups")
    secret = reconstruct([share for share, _ in decrypted], params)
    if not 1 <= secret < GROUP.order or secret * GROUP.generator != public_key:
        logger.warning("Recovered key does not match the registered public key")
        raise CorruptShareError("recovered key does not match the registered public key")
    return secret


def write_share_files(share_files: Sequence[bytes], directory: Union[str, Path], stem: str) -> List[Path]:
    directory = Path(directory)
    paths = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for index, blob in enumerate(share_files, start=1):
            path = directory / f"{stem}-{index}{SHARE_SUFFIX}"
            path.write_bytes(blob)
            paths.append(path)
    except OSError as exc:
        logger.error(f"Failed to write share files to {directory}: {exc}")
        raise StorageError(f"cannot write share files: {exc}") from exc
    logger.info(f"Wrote {len(paths)} share files to {directory}")
    return paths


def read_share_files(paths: Sequence[Union[str, Path]]) -> List[bytes]:
    try:
        return [Path(p).read_bytes() for p in paths]
    except OSError as exc:
        raise StorageError(f"cannot read share file: {exc}") from exc
