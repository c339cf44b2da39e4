"""
Line-oriented scenario scripts and the engine that runs them.

A script sets up participants, arms one-shot adversary rules and runs
sessions; EXPECT lines compare the last outcome with the expected one.
Running the same script twice gives byte-identical transcripts.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..crypto import SeededRandomSource
from ..exceptions import EvAuthError, ScenarioConfigError
from ..metering import OPERATIONS, OpCounter, metering
from ..protocol import UserDevice, UserWallet, load_wallet
from ..sharing import ShareParams
from .channel import DROP, IMPERSONATE, REPLAY, TAMPER, AdversaryPolicy, Channel
from .world import ROLES, SUCCESS, USER, SessionResult, World

logger = logging.getLogger(__name__)

VERBS = (
    "SEED",
    "USER",
    "STATION",
    "CAPTURE",
    "DROP",
    "TAMPER",
    "REPLAY",
    "IMPERSONATE",
    "DELETE-KEY",
    "BACKUP",
    "RECOVER",
    "STEAL",
    "SEND",
    "EXPECT",
)


@dataclass(frozen=True)
class ScriptStep:
    verb: str
    args: Tuple[str, ...]
    options: Dict[str, str]
    line_no: int

    def arg(self, index: int, name: str) -> str:
        try:
            return self.args[index]
        except IndexError:
            raise ScenarioConfigError(f"line {self.line_no}: {self.verb} needs <{name}>") from None

    def int_arg(self, index: int, name: str) -> int:
        value = self.arg(index, name)
        try:
            return int(value)
        except ValueError:
            raise ScenarioConfigError(f"line {self.line_no}: <{name}> must be an integer, got {value!r}") from None


@dataclass
class Scenario:
    name: str
    seed: int = 0
    steps: List[ScriptStep] = field(default_factory=list)

    @property
    def expectations(self) -> List[str]:
        return [step.arg(0, "outcome") for step in self.steps if step.verb == "EXPECT"]


@dataclass
class Transcript:
    """Ordered event lines, per-role operation counters and the outcomes seen."""

    scenario: str
    seed: int
    events: List[str] = field(default_factory=list)
    outcomes: List[str] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)
    counters: Dict[str, OpCounter] = field(default_factory=dict)
    sessions: List[SessionResult] = field(default_factory=list)

    def add(self, text: str) -> None:
        self.events.append(f"{len(self.events):04d} {text}")

    @property
    def outcome(self) -> str:
        return self.outcomes[-1] if self.outcomes else "none"

    @property
    def passed(self) -> bool:
        return not self.failures

    def counter_lines(self) -> List[str]:
        lines = []
        for role in ROLES:
            counter = self.counters.get(role) or OpCounter(role)
            counts = " ".join(f"{op}={counter.get(op)}" for op in OPERATIONS)
            lines.append(f"COUNTERS {role} {counts}")
        return lines

    def render(self) -> str:
        header = [f"SCENARIO {self.scenario} seed={self.seed}"]
        footer = [f"FINAL passed={str(self.passed).lower()} outcome={self.outcome}"]
        return "\n".join(header + self.events + self.counter_lines() + footer) + "\n"


def outcome_matches(expected: str, actual: str) -> bool:
    """``code`` matches any role; ``code@role`` must match exactly."""
    if "@" in expected:
        return expected == actual
    return expected == actual.split("@", 1)[0]


def parse_script(text: str, name: str = "script") -> Scenario:
    """Parse a scenario script; ``#`` starts a comment."""
    scenario = Scenario(name=name)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        verb = words[0].upper()
        if verb not in VERBS:
            raise ScenarioConfigError(f"line {line_no}: unknown verb {words[0]!r}")
        args, options = [], {}
        for word in words[1:]:
            if "=" in word:
                key, _, value = word.partition("=")
                options[key.lower()] = value
            else:
                args.append(word)
        step = ScriptStep(verb=verb, args=tuple(args), options=options, line_no=line_no)
        if verb == "SEED":
            if scenario.steps:
                raise ScenarioConfigError(f"line {line_no}: SEED must come before any other step")
            scenario.seed = step.int_arg(0, "seed")
            continue
        scenario.steps.append(step)
    return scenario


def load_script(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioConfigError(f"cannot read scenario {path}: {exc}") from exc
    return parse_script(text, name=path.stem)


class ScenarioRunner:
    """Executes one parsed scenario against a fresh World."""

    def __init__(self, scenario: Scenario, kdf_iterations: Optional[int] = None):
        self.scenario = scenario
        policy = AdversaryPolicy(rng=SeededRandomSource(f"adversary:{scenario.seed}"))
        options = {"kdf_iterations": kdf_iterations} if kdf_iterations else {}
        self.world = World(seed=scenario.seed, policy=policy, **options)
        self.transcript = Transcript(scenario=scenario.name, seed=scenario.seed)

    def run(self) -> Transcript:
        for step in self.scenario.steps:
            handler = getattr(self, f"_do_{step.verb.lower().replace('-', '_')}")
            handler(step)
        self.transcript.counters = self.world.counters
        return self.transcript

    def _record(self, outcome: str) -> None:
        self.transcript.outcomes.append(outcome)
        self.transcript.add(f"OUTCOME {outcome}")

    def _do_user(self, step: ScriptStep) -> None:
        name = step.arg(0, "name")
        profile = self.world.add_user(
            name,
            biometric=step.options.get("biometric", ""),
            password=step.options.get("password", ""),
            location=step.options.get("lai"),
        )
        claimed = f" lai={step.options['lai']}" if "lai" in step.options else ""
        self.transcript.add(f"USER {name} did={profile.device.wallet.did}{claimed}")

    def _do_station(self, step: ScriptStep) -> None:
        name = step.arg(0, "name")
        if "lai" not in step.options:
            raise ScenarioConfigError(f"line {step.line_no}: STATION needs lai=<text>")
        profile = self.world.add_station(name, step.options["lai"], step.options.get("report"))
        reported = f" report={step.options['report']}" if "report" in step.options else ""
        self.transcript.add(f"STATION {name} did={profile.station.state.did} lai={step.options['lai']}{reported}")

    def _do_capture(self, step: ScriptStep) -> None:
        label = step.arg(0, "tag")
        self.world.policy.capture(label)
        self.transcript.add(f"CAPTURE {label}")

    def _rule(self, action: str, step: ScriptStep, index: int = 0) -> None:
        label = step.arg(0, "tag")
        self.world.policy.add_rule(action, label, index=index)
        self.transcript.add(f"RULE {action} {label}" + (f" {index}" if action in (TAMPER, REPLAY) else ""))

    def _do_drop(self, step: ScriptStep) -> None:
        self._rule(DROP, step)

    def _do_tamper(self, step: ScriptStep) -> None:
        self._rule(TAMPER, step, step.int_arg(1, "byte-index"))

    def _do_replay(self, step: ScriptStep) -> None:
        self._rule(REPLAY, step, step.int_arg(1, "capture-index"))

    def _do_impersonate(self, step: ScriptStep) -> None:
        self._rule(IMPERSONATE, step)

    def _user_action(self, label: str, action) -> None:
        try:
            action()
            outcome = SUCCESS
        except EvAuthError as exc:
            if isinstance(exc, ScenarioConfigError):
                raise
            exc.role = exc.role or USER
            outcome = exc.outcome
        self.transcript.add(label)
        self._record(outcome)

    def _do_delete_key(self, step: ScriptStep) -> None:
        name = step.arg(0, "user")
        self._user_action(f"DELETE-KEY {name}", lambda: self.world.delete_key(name))

    def _do_backup(self, step: ScriptStep) -> None:
        name = step.arg(0, "user")
        try:
            params = ShareParams.parse(step.arg(1, "k/n"))
        except EvAuthError as exc:
            raise ScenarioConfigError(f"line {step.line_no}: {exc}") from exc
        passphrase = step.arg(2, "passphrase")
        self._user_action(f"BACKUP {name} {params.k}/{params.n}", lambda: self.world.backup(name, params, passphrase))

    def _do_recover(self, step: ScriptStep) -> None:
        name = step.arg(0, "user")
        passphrase = step.arg(1, "passphrase")
        self._user_action(f"RECOVER {name}", lambda: self.world.recover(name, passphrase))

    def _do_steal(self, step: ScriptStep) -> None:
        name = step.arg(0, "user")
        sent = len(self.world.channel)
        result = self.world.steal(name, step.options.get("biometric", ""), step.options.get("password", ""))
        self.transcript.add(f"STEAL {name} messages={len(self.world.channel) - sent}")
        self._record(result.outcome)

    def _do_send(self, step: ScriptStep) -> None:
        user, station = step.arg(0, "user"), step.arg(1, "station")
        result = self.world.run_session(user, station, step.options.get("lai"))
        via = " via=shadow" if result.via_shadow else ""
        self.transcript.add(f"SESSION {self.world.sessions} {user}->{station}{via}")
        for line in result.lines:
            self.transcript.add(line)
        if result.succeeded:
            self.transcript.add(f"KEYS agree={str(result.keys_agree).lower()} parties={len(result.keys)}")
        self.transcript.sessions.append(result)
        self._record(result.outcome)

    def _do_expect(self, step: ScriptStep) -> None:
        expected = step.arg(0, "outcome")
        actual = self.transcript.outcome
        if outcome_matches(expected, actual):
            self.transcript.add(f"EXPECT {expected} ok")
        else:
            self.transcript.failures.append(f"line {step.line_no}: expected {expected}, got {actual}")
            self.transcript.add(f"EXPECT {expected} failed got={actual}")
            logger.warning(f"Scenario {self.scenario.name}: expected {expected}, got {actual}")


def run_scenario(scenario: Union[Scenario, str], kdf_iterations: Optional[int] = None) -> Transcript:
    """Run a parsed scenario, or the script text of one."""
    if isinstance(scenario, str):
        scenario = parse_script(scenario)
    return ScenarioRunner(scenario, kdf_iterations=kdf_iterations).run()


def stolen_device_scenario(
    wallet: Union[UserWallet, str, Path],
    biometric: Union[str, bytes],
    password: Union[str, bytes],
    seed: int = 0,
) -> Transcript:
    """
    An adversary with the wallet file but not the owner's (beta, psw).

    Only the local gate is exercised. A wrong biometric or password ends in
    local-auth-error at the user with nothing sent; the right pair unlocks
    the device and its M_A1 is emitted.
    """
    if not isinstance(wallet, UserWallet):
        wallet = load_wallet(wallet)
    world = World(seed=seed)
    channel = Channel()
    device = UserDevice(wallet, world.registry, rng=SeededRandomSource(f"thief:{seed}"), crs=world.crs)
    transcript = Transcript(scenario="stolen-device", seed=seed)
    transcript.counters = {role: OpCounter(role) for role in ROLES}
    transcript.add(f"STEAL {wallet.did}")
    as_bytes = [v.encode("utf-8") if isinstance(v, str) else v for v in (biometric, password)]
    try:
        with metering(transcript.counters[USER]):
            request = device.begin_auth(as_bytes[0], as_bytes[1], b"")
        channel.transmit(USER, "cs", request.encode())
        outcome = SUCCESS
    except EvAuthError as exc:
        exc.role = exc.role or USER
        outcome = exc.outcome
    for line in channel.lines():
        transcript.add(line)
    transcript.add(f"MESSAGES {len(channel)}")
    transcript.outcomes.append(outcome)
    transcript.add(f"OUTCOME {outcome}")
    return transcript


_HAPPY = """\
SEED 1
USER alice
STATION cs1 lai=zone-1
SEND alice cs1
EXPECT success
"""

_REPLAY = """\
SEED {seed}
USER alice
STATION cs1 lai=zone-1
CAPTURE {tag}
SEND alice cs1
EXPECT success
REPLAY {tag} 0
SEND alice cs1
EXPECT {expected}
"""

BUILTIN_SCENARIOS: Dict[str, str] = {
    "happy": _HAPPY,
    "replay-m-a3": _REPLAY.format(seed=3, tag="M_A3", expected="replay-error@usp"),
    "replay-m-a4": _REPLAY.format(seed=4, tag="M_A4", expected="replay-error@usp"),
    "replay-m-a5": _REPLAY.format(seed=5, tag="M_A5", expected="integrity-error@cs"),
    "replay-m-a6": _REPLAY.format(seed=6, tag="M_A6", expected="integrity-error@user"),
    "forge-location": """\
SEED 7
USER mallory lai=zone-9
STATION cs1 lai=zone-1
SEND mallory cs1
EXPECT location-forgery-error@usp
""",
    "forge-location-cs": """\
SEED 8
USER alice
STATION cs1 lai=zone-1 report=zone-2
SEND alice cs1
EXPECT location-forgery-error@usp
""",
    "impersonate-user": """\
SEED 9
USER alice
STATION cs1 lai=zone-1
IMPERSONATE M_A3
SEND alice cs1
EXPECT integrity-error@usp
""",
    "impersonate-station": """\
SEED 10
USER alice
STATION cs1 lai=zone-1
IMPERSONATE M_A4
SEND alice cs1
EXPECT integrity-error@usp
""",
    "tamper": """\
SEED 11
USER alice
STATION cs1 lai=zone-1
TAMPER M_A4 40
SEND alice cs1
EXPECT integrity-error@usp
""",
    "stolen-device": """\
SEED 12
USER alice biometric=alice-print password=correct-horse
STATION cs1 lai=zone-1
STEAL alice biometric=forged-print password=guess
EXPECT local-auth-error@user
SEND alice cs1
EXPECT success
""",
    "desync": """\
SEED 13
USER alice
STATION cs1 lai=zone-1
DROP M_A6
SEND alice cs1
EXPECT dropped
SEND alice cs1
EXPECT success
""",
    "desync-twice": """\
SEED 15
USER alice
STATION cs1 lai=zone-1
DROP M_A6
SEND alice cs1
EXPECT dropped
DROP M_A6
SEND alice cs1
EXPECT dropped
SEND alice cs1
EXPECT success
SEND alice cs1
EXPECT success
""",
    "desync-aborted": """\
SEED 16
USER alice
STATION cs1 lai=zone-1
DROP M_A6
SEND alice cs1
EXPECT dropped
DROP M_A3
SEND alice cs1
EXPECT dropped
SEND alice cs1
EXPECT success
""",
    "key-loss": """\
SEED 14
USER alice
STATION cs1 lai=zone-1
BACKUP alice 3/5 custodian-pass
DELETE-KEY alice
SEND alice cs1
EXPECT key-missing-error@user
RECOVER alice custodian-pass
SEND alice cs1
EXPECT success
""",
}

ATTACK_TYPES: Sequence[str] = tuple(name for name in BUILTIN_SCENARIOS if name != "happy")


def builtin_scenario(name: str) -> Scenario:
    try:
        return parse_script(BUILTIN_SCENARIOS[name], name=name)
    except KeyError:
        raise ScenarioConfigError(f"unknown scenario {name!r}; choose from {', '.join(BUILTIN_SCENARIOS)}") from None
