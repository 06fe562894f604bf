"""Channel attacks and analyzers for what dishonest parties can learn.

Channel items are either decoys (:class:`SingleAtomState`) or payload
handles exposing ``measure(basis, rng)``. An attacker cannot tell them
apart, so every position is treated the same way.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .quantum_core import (
    AtomLabel,
    Basis,
    Rng,
    SingleAtomState,
    measure_single,
    prepare_decoy,
    uniform_ints,
)
from .records import KeyPair, Secret, Transcript


@dataclass(frozen=True)
class AttackModel:
    kind: str = "none"  # none | intercept-resend | measure-resend | dishonest-alice
    basis: Basis | None = None  # fixed basis for measure-resend

    KINDS = ("none", "intercept-resend", "measure-resend", "dishonest-alice")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown attack {self.kind!r}")
        if (self.kind == "measure-resend") != (self.basis is not None):
            raise ValueError("measure-resend needs a basis; other attacks take none")

    @classmethod
    def parse(cls, text: str) -> "AttackModel":
        """Parse CLI syntax: ``none``, ``intercept-resend``, ``measure-resend=z``, ``dishonest-alice``."""
        name, _, arg = text.strip().lower().partition("=")
        if name == "measure-resend":
            if arg not in ("z", "x"):
                raise ValueError("measure-resend requires =z or =x")
            return cls(name, Basis(arg.upper()))
        if arg:
            raise ValueError(f"attack {name!r} takes no argument")
        return cls(name)

    @property
    def channels(self) -> tuple[str, ...]:
        """Channels the attack touches."""
        if self.kind == "none":
            return ()
        if self.kind == "dishonest-alice":
            return ("B",)
        return ("A", "B")

    def __str__(self) -> str:
        if self.basis is not None:
            return f"{self.kind}={self.basis.value.lower()}"
        return self.kind


NO_ATTACK = AttackModel()
INTERCEPT_RESEND = AttackModel("intercept-resend")
DISHONEST_ALICE = AttackModel("dishonest-alice")


@dataclass(frozen=True)
class EveEntry:
    position: int
    basis: Basis
    outcome: AtomLabel
    resent: str  # "decoy" or "payload"


@dataclass
class EveRecord:
    """Attacker's private notebook. Never part of the public transcript."""

    channel: str
    entries: list[EveEntry] = field(default_factory=list)

    def to_lines(self) -> str:
        lines = [f"# eve-record channel={self.channel} (adversary-private, not a transcript)\n"]
        for e in self.entries:
            lines.append(
                json.dumps(
                    {
                        "eve": self.channel,
                        "position": e.position,
                        "basis": e.basis.value,
                        "outcome": e.outcome.value,
                        "resent": e.resent,
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                )
                + "\n"
            )
        return "".join(lines)


def _measure_and_forward(item, basis: Basis, rng: Rng):
    if isinstance(item, SingleAtomState):
        outcome = measure_single(item, basis, rng)
        return prepare_decoy(outcome), outcome, "decoy"
    # payload atom: the collapse already leaves it in the measured eigenstate
    outcome = item.measure(basis, rng)
    return item, outcome, "payload"


def _attack(channel_states: Sequence, bases: Iterable[Basis], rng: Rng, channel: str):
    record = EveRecord(channel)
    out = []
    for pos, (item, basis) in enumerate(zip(channel_states, bases)):
        fwd, outcome, what = _measure_and_forward(item, basis, rng)
        record.entries.append(EveEntry(pos, basis, outcome, what))
        out.append(fwd)
    return out, record


def intercept_resend(channel_states: Sequence, rng: Rng, channel: str = "?"):
    """Measure every atom in a uniformly random basis and forward the eigenstate."""
    picks = uniform_ints(rng, 2, len(channel_states))
    bases = [Basis.Z if p == 0 else Basis.X for p in picks]
    return _attack(channel_states, bases, rng, channel)


def measure_resend(channel_states: Sequence, basis: Basis, rng: Rng, channel: str = "?"):
    """Measure every atom in one fixed basis and forward the eigenstate."""
    return _attack(channel_states, [basis] * len(channel_states), rng, channel)


def apply_attack(attack: AttackModel, channels: dict[str, list], rng: Rng):
    """Run ``attack`` over the in-flight channels.

    Returns the received channels and the attacker's records (one per
    touched channel). Untouched channels are passed through as-is.
    """
    received = dict(channels)
    records: list[EveRecord] = []
    for ch in attack.channels:
        if attack.kind == "measure-resend":
            received[ch], rec = measure_resend(channels[ch], attack.basis, rng, ch)
        else:
            received[ch], rec = intercept_resend(channels[ch], rng, ch)
        records.append(rec)
    return received, records


@dataclass(frozen=True)
class LeakageReport:
    """Peer bits a dishonest user recovers from the public transcript."""

    learned: dict[int, int]  # round -> peer bit
    unlearnable: tuple[int, ...]
    method: str = "PublicDecode"

    @property
    def rounds_learned(self) -> set[int]:
        return set(self.learned)


def dishonest_user_leakage(
    transcript: Transcript | str, own_secret: Secret, keys: KeyPair, me: str = "A"
) -> LeakageReport:
    """Peer bits one user can decode from announced R values plus the keys.

    ``me`` says whose secret ``own_secret`` is; the decode is symmetric.
    """
    if isinstance(transcript, str):
        transcript = Transcript.from_lines(transcript)
    if me not in ("A", "B"):
        raise ValueError("me must be 'A' or 'B'")
    if len(keys) != len(own_secret):
        raise ValueError("key length does not match secret length")
    ann = transcript.announcements()
    if not ann:
        return LeakageReport({}, ())
    learned = {}
    for i, bits in sorted(ann.items()):
        if "R" not in bits or i > len(own_secret):
            continue
        r_dd = bits["R"] ^ keys.k_a[i - 1] ^ keys.k_b[i - 1]
        learned[i] = r_dd ^ own_secret[i - 1]
    unlearnable = tuple(i for i in range(1, len(own_secret) + 1) if i not in learned)
    return LeakageReport(learned, unlearnable)


def tp_knowledge(trials: Sequence, length: int) -> tuple[float, float]:
    """Fraction of runs where inequality is revealed before the final round.

    ``trials`` are TrialOutcome-like objects with a ``verdict``. Returns
    (empirical, theoretical) with theoretical = 1 - (1/2)**(L-1), valid when
    every bit pair differs independently with probability 1/2.
    """
    if not trials:
        raise ValueError("no trials")
    revealed = sum(
        1
        for t in trials
        if t.verdict.kind == "NotEqualAtRound" and t.verdict.round < length
    )
    return revealed / len(trials), tp_knowledge_theory(length)


def tp_knowledge_theory(length: int) -> float:
    if length < 1:
        raise ValueError("length must be >= 1")
    return 1.0 - 0.5 ** (length - 1)


def tp_blindness_check(announcements: Iterable[tuple[int, int]]) -> float:
    """|P(r=1 | g=0) - P(r=1 | g=1)| over (r, g) pairs.

    Computed with exact fractions; a missing conditional counts as zero bias.
    """
    ones = {0: 0, 1: 0}
    total = {0: 0, 1: 0}
    for r, g in announcements:
        total[g] += 1
        ones[g] += r
    if not total[0] or not total[1]:
        return 0.0
    return float(abs(Fraction(ones[0], total[0]) - Fraction(ones[1], total[1])))


def exhaustive_blindness_bias(
    key_values: Sequence[int] = (0, 1), m_values: Sequence[int] = (0, 1)
) -> float:
    """Bias of r = g ^ m ^ k over the full XOR table.

    Restricting ``key_values`` and ``m_values`` models key misuse; with both
    pinned to a single value the announcement reveals g outright.
    """
    table = [(g ^ m ^ k, g) for g in (0, 1) for k in key_values for m in m_values]
    return tp_blindness_check(table)


def detection_probability(attack: AttackModel, decoys_per_channel: int) -> float:
    """Chance that ``attack`` trips at least one decoy (uniform 4-label decoys)."""
    per_decoy = 0.25 if attack.kind != "none" else 0.0
    n = decoys_per_channel * len(attack.channels)
    return 1.0 - (1.0 - per_decoy) ** n
