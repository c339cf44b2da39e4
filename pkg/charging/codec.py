"""
Length-prefixed field packing.

Every ``a || b`` in the protocol is realised as a sequence of fields, each
preceded by its length as a big-endian u32. Hash inputs, wire messages and
credential encodings all go through here.
"""

from typing import Iterable, List, Optional, Sequence

from .constants import LENGTH_PREFIX_SIZE
from .exceptions import DecodeError

_MAX_FIELD = 2**32 - 1


def pack_fields(parts: Iterable[bytes]) -> bytes:
    out = bytearray()
    for part in parts:
        part = bytes(part)
        if len(part) > _MAX_FIELD:
            raise ValueError("field too long for a u32 length prefix")
        out += len(part).to_bytes(LENGTH_PREFIX_SIZE, "big")
        out += part
    return bytes(out)


def unpack_fields(data: bytes, count: Optional[int] = None) -> List[bytes]:
    """
    Split ``data`` back into its fields.

    Args:
        data: Output of pack_fields
        count: Exact number of fields expected, or None for any

    Returns:
        List of field values

    Raises:
        DecodeError: truncated data, trailing bytes or a wrong field count
    """
    data = bytes(data)
    fields = []
    offset = 0
    while offset < len(data):
        if offset + LENGTH_PREFIX_SIZE > len(data):
            raise DecodeError("truncated length prefix")
        size = int.from_bytes(data[offset:offset + LENGTH_PREFIX_SIZE], "big")
        offset += LENGTH_PREFIX_SIZE
        if offset + size > len(data):
            raise DecodeError("field runs past end of data")
        fields.append(data[offset:offset + size])
        offset += size
    if count is not None and len(fields) != count:
        raise DecodeError(f"expected {count} fields, got {len(fields)}")
    return fields


def require_length(value: bytes, size: int, name: str) -> bytes:
    if len(value) != size:
        raise DecodeError(f"{name} must be {size} bytes, got {len(value)}")
    return value


def join_fixed(values: Sequence[bytes], size: int) -> bytes:
    """Concatenate equal-width values (e.g. a shadow-identity set)."""
    for value in values:
        require_length(value, size, "fixed-width item")
    return b"".join(values)


def split_fixed(data: bytes, size: int, name: str = "fixed-width list") -> List[bytes]:
    if len(data) % size:
        raise DecodeError(f"{name} length {len(data)} is not a multiple of {size}")
    return [data[i:i + size] for i in range(0, len(data), size)]
