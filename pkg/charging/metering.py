"""
Operation metering.

Public crypto entry points are wrapped with ``@metered(op)``. While a
``metering(counter)`` block is active every call is tallied on that counter,
together with the protocol step it belongs to (set by ``@step(label)`` on
the derivation helpers). Calls made from inside another metered operation are
not counted again, so a hybrid encryption counts once, not once plus the
hashes it performs internally.
"""

import functools
import time
from collections import Counter
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

OPERATIONS = (
    "hash",
    "hash_check",
    "keystream",
    "ecdsa_sign",
    "ecdsa_verify",
    "hybrid_encrypt",
    "hybrid_decrypt",
    "zkp_prove",
    "zkp_verify",
)

_active: ContextVar[Optional["OpCounter"]] = ContextVar("evauth_op_counter", default=None)
_inside: ContextVar[bool] = ContextVar("evauth_inside_metered", default=False)
_step: ContextVar[str] = ContextVar("evauth_protocol_step", default="-")


@dataclass
class OpCounter:
    """Per-role tally of metered operations."""

    role: str
    counts: Counter = field(default_factory=Counter)
    elapsed_ms: Dict[str, float] = field(default_factory=dict)
    sites: Counter = field(default_factory=Counter)

    def record(self, op: str, step: str, elapsed_ms: float) -> None:
        self.counts[op] += 1
        self.sites[(step, op)] += 1
        self.elapsed_ms[op] = self.elapsed_ms.get(op, 0.0) + elapsed_ms

    def merge(self, other: "OpCounter") -> None:
        self.counts.update(other.counts)
        self.sites.update(other.sites)
        for op, ms in other.elapsed_ms.items():
            self.elapsed_ms[op] = self.elapsed_ms.get(op, 0.0) + ms

    def get(self, op: str) -> int:
        return self.counts.get(op, 0)

    def as_dict(self) -> Dict[str, int]:
        return {op: self.counts.get(op, 0) for op in OPERATIONS}

    def site_rows(self) -> List[Tuple[str, str, int]]:
        """(step, op, count) rows sorted for stable output."""
        return sorted((s, op, n) for (s, op), n in self.sites.items())


@contextmanager
def metering(counter: Optional[OpCounter]) -> Iterator[Optional[OpCounter]]:
    """Route metered calls in this context to ``counter``."""
    token = _active.set(counter)
    try:
        yield counter
    finally:
        _active.reset(token)


def metered(op: str):
    """Count each top-level call of the wrapped function as ``op``."""
    if op not in OPERATIONS:
        raise ValueError(f"unknown metered operation {op!r}")

    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            counter = _active.get()
            if counter is None or _inside.get():
                return func(*args, **kwargs)
            token = _inside.set(True)
            start = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                _inside.reset(token)
                counter.record(op, _step.get(), (time.perf_counter() - start) * 1000)
        return wrapper

    return decorator


def step(label: str):
    """Attribute metered calls made inside the wrapped function to ``label``."""

    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            token = _step.set(label)
            try:
                return func(*args, **kwargs)
            finally:
                _step.reset(token)
        return wrapper

    return decorator
