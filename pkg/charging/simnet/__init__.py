"""
Simulated network with a Dolev-Yao adversary, plus the scenario engine.
"""

from .channel import AdversaryPolicy, Channel, Envelope, Rule, adversary_capture, impersonate

from .world import SessionResult, World, authenticate

from .scenarios import (
    ATTACK_TYPES,
    BUILTIN_SCENARIOS,
    Scenario,
    Transcript,
    builtin_scenario,
    load_script,
    parse_script,
    run_scenario,
    stolen_device_scenario,
)
