"""
Operation accounting for one authentication session, compared with the
reference figures for the user device and the CS/USP side.

Counts come only from the metered crypto entry points. Wall-clock figures
are informational; they depend on the machine.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from .constants import (
    HASH_TOLERANCE,
    REFERENCE_COST_CS_USP,
    REFERENCE_COST_CS_USP_MS,
    REFERENCE_COST_USER,
    REFERENCE_COST_USER_MS,
)
from .exceptions import BenchmarkError
from .metering import OpCounter
from .simnet.world import CS, ROLES, USER, USP, World

logger = logging.getLogger(__name__)

CS_USP = "cs+usp"
COMPARED_OPS = ("hash", "ecdsa_sign", "ecdsa_verify")

CATEGORIES = {
    "hash": "H",
    "hash_check": "check of a received value (not counted as H)",
    "keystream": "XOR mask",
    "ecdsa_sign": "Sign_ECDSA",
    "ecdsa_verify": "Verify_ECDSA",
    "hybrid_encrypt": "public-key encryption of M_A5",
    "hybrid_decrypt": "public-key decryption of M_A6",
    "zkp_prove": "possession proof generation",
    "zkp_verify": "Verify_ECDSA (possession proof)",
}


@dataclass
class RoleComparison:
    """Measured per-session counts of one side next to the reference counts."""

    side: str
    measured: Dict[str, float]
    expected: Dict[str, int]

    @property
    def delta(self) -> Dict[str, float]:
        return {op: self.measured.get(op, 0) - self.expected.get(op, 0) for op in COMPARED_OPS}

    @property
    def within_tolerance(self) -> bool:
        delta = self.delta
        return abs(delta["hash"]) <= HASH_TOLERANCE and delta["ecdsa_sign"] == 0 and delta["ecdsa_verify"] == 0

    def formula(self, counts: Dict[str, float]) -> str:
        parts = [f"{_number(counts.get('hash', 0))}H"]
        for op, name in (("ecdsa_sign", "Sign_ECDSA"), ("ecdsa_verify", "Verify_ECDSA")):
            n = counts.get(op, 0)
            if n:
                parts.append(name if n == 1 else f"{_number(n)}{name}")
        return "+".join(parts)


@dataclass
class ScalePoint:
    evs: int
    counts: Dict[str, Dict[str, int]]
    elapsed_ms: float


@dataclass
class BenchReport:
    seed: int
    iterations: int
    user: RoleComparison
    cs_usp: RoleComparison
    per_role: Dict[str, Dict[str, float]]
    phase_ms: Dict[str, float]
    mapping: List[Tuple[str, str, str, float, str]]
    scale: List[ScalePoint] = field(default_factory=list)

    @property
    def within_tolerance(self) -> bool:
        return self.user.within_tolerance and self.cs_usp.within_tolerance

    def result_fields(self) -> Dict[str, str]:
        """Machine-readable summary; stable for a fixed seed."""
        fields = {"iterations": str(self.iterations)}
        for comparison, prefix in ((self.user, "user"), (self.cs_usp, "cs_usp")):
            for op in COMPARED_OPS:
                fields[f"{prefix}_{op}"] = _number(comparison.measured.get(op, 0))
            fields[f"{prefix}_expected"] = comparison.formula(comparison.expected)
        fields["within_tolerance"] = str(self.within_tolerance).lower()
        return fields

    def render(self) -> str:
        lines = [f"Authentication cost per session ({self.iterations} sessions, seed {self.seed})", ""]
        lines.append(f"{'side':<8} {'measured':<28} {'reference':<28} {'delta'}")
        for comparison in (self.user, self.cs_usp):
            delta = " ".join(f"{op}={_signed(v)}" for op, v in comparison.delta.items())
            lines.append(
                f"{comparison.side:<8} {comparison.formula(comparison.measured):<28} "
                f"{comparison.formula(comparison.expected):<28} {delta}"
            )
        lines += ["", "Per-role operation counts per session"]
        for role, counts in self.per_role.items():
            lines.append(f"  {role:<5} " + " ".join(f"{op}={_number(n)}" for op, n in counts.items() if n))
        lines += ["", "Wall-clock per session (informational)"]
        lines.append(f"  user   {self.phase_ms[USER]:8.2f} ms   reference {REFERENCE_COST_USER_MS} ms")
        lines.append(f"  cs+usp {self.phase_ms[CS_USP]:8.2f} ms   reference {REFERENCE_COST_CS_USP_MS} ms")
        lines += ["", "Mapping of counted operations"]
        lines.append(f"  {'role':<5} {'step':<48} {'op':<15} {'count':>5}  category")
        for role, step_label, op, count, category in self.mapping:
            lines.append(f"  {role:<5} {step_label:<48} {op:<15} {_number(count):>5}  {category}")
        if self.scale:
            lines += ["", "Scalability (each EV authenticates once)"]
            for point in self.scale:
                usp_hash = point.counts[USP].get("hash", 0)
                lines.append(f"  evs={point.evs:<5} usp_hash={usp_hash:<6} total={point.elapsed_ms:9.2f} ms")
        return "\n".join(lines) + "\n"


def _number(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:.2f}"


def _signed(value: float) -> str:
    text = _number(value)
    return text if text.startswith("-") else f"+{text}"


def _per_session(counter: OpCounter, iterations: int) -> Dict[str, float]:
    return {op: n / iterations for op, n in counter.as_dict().items()}


def _side_counts(counters: Dict[str, OpCounter], roles: Sequence[str], iterations: int) -> Dict[str, float]:
    merged = OpCounter("+".join(roles))
    for role in roles:
        merged.merge(counters[role])
    counts = _per_session(merged, iterations)
    # the station's possession-proof check stands in for the signature verification
    counts["ecdsa_verify"] = counts.get("ecdsa_verify", 0) + counts.pop("zkp_verify", 0)
    return counts


def _run_sessions(world: World, pairs: Sequence[Tuple[str, str]]) -> Tuple[Dict[str, OpCounter], Dict[str, float]]:
    counters = {role: OpCounter(role) for role in ROLES}
    elapsed = {role: 0.0 for role in ROLES}
    for user, station in pairs:
        result = world.run_session(user, station)
        if not result.succeeded or not result.keys_agree:
            raise BenchmarkError(f"benchmark session ended with {result.outcome}")
        for role in ROLES:
            counters[role].merge(result.counters[role])
            elapsed[role] += result.elapsed_ms.get(role, 0.0)
    return counters, elapsed


def scale_point(evs: int, seed: int = 0) -> ScalePoint:
    world = World(seed=seed)
    world.add_station("cs", "zone-0")
    for i in range(evs):
        world.add_user(f"ev{i}")
    started = time.perf_counter()
    counters, _ = _run_sessions(world, [(f"ev{i}", "cs") for i in range(evs)])
    elapsed = (time.perf_counter() - started) * 1000
    return ScalePoint(evs=evs, counts={role: counters[role].as_dict() for role in ROLES}, elapsed_ms=elapsed)


def run_bench(iterations: int = 100, seed: int = 0, scales: Sequence[int] = ()) -> BenchReport:
    """Run ``iterations`` sessions of one user at one station and build the report."""
    if iterations < 1:
        raise BenchmarkError("iterations must be at least 1")
    world = World(seed=seed)
    world.add_user("ev")
    world.add_station("cs", "zone-0")
    counters, elapsed = _run_sessions(world, [("ev", "cs")] * iterations)

    user = RoleComparison(USER, _side_counts(counters, [USER], iterations), dict(REFERENCE_COST_USER))
    cs_usp = RoleComparison(CS_USP, _side_counts(counters, [CS, USP], iterations), dict(REFERENCE_COST_CS_USP))
    mapping = [
        (role, step_label, op, count / iterations, CATEGORIES.get(op, op))
        for role in ROLES
        for step_label, op, count in counters[role].site_rows()
    ]
    report = BenchReport(
        seed=seed,
        iterations=iterations,
        user=user,
        cs_usp=cs_usp,
        per_role={role: _per_session(counters[role], iterations) for role in ROLES},
        phase_ms={
            USER: elapsed[USER] / iterations,
            CS: elapsed[CS] / iterations,
            USP: elapsed[USP] / iterations,
            CS_USP: (elapsed[CS] + elapsed[USP]) / iterations,
        },
        mapping=mapping,
        scale=[scale_point(n, seed=seed) for n in scales],
    )
    logger.info(f"Benchmark finished: user {user.formula(user.measured)}, cs+usp {cs_usp.formula(cs_usp.measured)}")
    return report
