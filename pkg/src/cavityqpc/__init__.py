"""Simulator for quantum private comparison over a cavity-QED two-atom evolution."""
from .adversary import AttackModel
from .harness import SimConfig, run_trials, verify_table1
from .protocol import ProtocolConfig, TrialOutcome, run_protocol
from .records import ConfigurationError, KeyPair, ProtocolOrderError, Secret, Transcript, Verdict

__all__ = [
    "AttackModel",
    "ConfigurationError",
    "KeyPair",
    "ProtocolConfig",
    "ProtocolOrderError",
    "Secret",
    "SimConfig",
    "Transcript",
    "TrialOutcome",
    "Verdict",
    "run_protocol",
    "run_trials",
    "verify_table1",
]
