"""Classical data carried through a comparison run.

Everything in a :class:`Transcript` is public. The private material
(secrets, keys, measurement bits, TP's product labels) lives only in
:class:`RoundRecord` and the party objects in :mod:`cavityqpc.protocol`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .quantum_core import ProductLabel


class ConfigurationError(ValueError):
    """Invalid parameters for a run (lengths, decoy placements, thresholds)."""


class ProtocolOrderError(RuntimeError):
    """A protocol step was executed out of order. Always a bug."""


class TranscriptParseError(ValueError):
    pass


def _check_bits(bits: Iterable[int], what: str) -> tuple[int, ...]:
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ConfigurationError(f"{what} must contain only 0/1, got {out}")
    return out


@dataclass(frozen=True)
class Secret:
    """Binary secret, least-significant bit first (``bits[j]`` is x_j)."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", _check_bits(self.bits, "secret"))
        if len(self.bits) < 1:
            raise ConfigurationError("secret length must be >= 1")

    @classmethod
    def from_string(cls, text: str) -> "Secret":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ConfigurationError(f"secret must be a non-empty 0/1 string, got {text!r}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def from_int(cls, value: int, length: int) -> "Secret":
        if value < 0 or value >= 1 << length:
            raise ConfigurationError(f"{value} does not fit in {length} bits")
        return cls(tuple((value >> j) & 1 for j in range(length)))

    def to_int(self) -> int:
        return sum(b << j for j, b in enumerate(self.bits))

    def __len__(self) -> int:
        return len(self.bits)

    def __getitem__(self, j: int) -> int:
        return self.bits[j]

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


@dataclass(frozen=True, repr=False)
class KeyPair:
    """The two pre-shared key strings. Held by Alice and Bob only."""

    k_a: tuple[int, ...]
    k_b: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "k_a", _check_bits(self.k_a, "k_a"))
        object.__setattr__(self, "k_b", _check_bits(self.k_b, "k_b"))
        if len(self.k_a) != len(self.k_b) or not self.k_a:
            raise ConfigurationError("key strings must be non-empty and of equal length")

    def __len__(self) -> int:
        return len(self.k_a)

    def __repr__(self) -> str:
        # keep key material out of logs and tracebacks
        return f"KeyPair(<{len(self)} bits>)"


@dataclass(frozen=True)
class RoundRecord:
    """Every classical value of one comparison round (simulator-side view)."""

    i: int
    is_label: ProductLabel
    m_t: int
    g_a: int
    g_b: int
    m_a: int
    m_b: int
    k_a: int
    k_b: int
    r_a: int
    r_b: int
    r: int
    r_dd: int


@dataclass(frozen=True)
class Verdict:
    kind: str  # "Equal" | "NotEqualAtRound" | "AbortedSecurityCheck"
    round: int | None = None
    channel: str | None = None

    @classmethod
    def equal(cls) -> "Verdict":
        return cls("Equal")

    @classmethod
    def not_equal_at(cls, j: int) -> "Verdict":
        return cls("NotEqualAtRound", round=j)

    @classmethod
    def aborted(cls, channel: str) -> "Verdict":
        return cls("AbortedSecurityCheck", channel=channel)

    @classmethod
    def parse(cls, text: str) -> "Verdict":
        if text == "Equal":
            return cls.equal()
        for kind in ("NotEqualAtRound", "AbortedSecurityCheck"):
            if text.startswith(kind + "(") and text.endswith(")"):
                arg = text[len(kind) + 1 : -1]
                if kind == "NotEqualAtRound":
                    return cls.not_equal_at(int(arg))
                return cls.aborted(arg)
        raise ValueError(f"unknown verdict {text!r}")

    @property
    def aborted_check(self) -> bool:
        return self.kind == "AbortedSecurityCheck"

    def __str__(self) -> str:
        if self.kind == "NotEqualAtRound":
            return f"NotEqualAtRound({self.round})"
        if self.kind == "AbortedSecurityCheck":
            return f"AbortedSecurityCheck({self.channel})"
        return self.kind


# Allowed fields per public event kind. Nothing here may carry g, k, m or a
# product label.
EVENT_FIELDS: dict[str, frozenset[str]] = {
    "quantum_send": frozenset({"channel", "position"}),
    "receipt_confirmed": frozenset({"channel"}),
    "decoy_disclosure": frozenset({"channel", "positions", "bases"}),
    "security_check": frozenset({"channel", "error_rate", "passed"}),
    "announce": frozenset({"round", "who", "bit"}),
    "verdict": frozenset({"verdict"}),
}

ANNOUNCERS = ("R_A", "R_B", "R")


@dataclass(slots=True)
class Event:
    kind: str
    data: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        allowed = EVENT_FIELDS.get(self.kind)
        if allowed is None:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not allowed.issuperset(self.data):
            extra = sorted(set(self.data) - allowed)
            raise ValueError(f"{self.kind} event cannot carry {extra}")

    def to_line(self) -> str:
        return json.dumps({"event": self.kind, **self.data}, sort_keys=True, separators=(",", ":"))


class Transcript:
    """Append-only log of public announcements, one JSON object per line.

    Lines starting with ``#`` are comments (trial separators in dump files).
    """

    def __init__(self, events: Iterable[Event] = ()) -> None:
        self.events: list[Event] = list(events)

    def add(self, kind: str, **data) -> Event:
        ev = Event(kind, data)
        self.events.append(ev)
        return ev

    def extend(self, kind: str, rows: Iterable[dict]) -> None:
        """Append one ``kind`` event per dict in ``rows``."""
        self.events.extend(Event(kind, d) for d in rows)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    def has(self, kind: str, **match) -> bool:
        return any(
            e.kind == kind and all(e.data.get(k) == v for k, v in match.items())
            for e in self.events
        )

    def announcements(self) -> dict[int, dict[str, int]]:
        """``{round: {"R_A": bit, "R_B": bit, "R": bit}}`` for announced rounds."""
        out: dict[int, dict[str, int]] = {}
        for e in self.events:
            if e.kind == "announce":
                out.setdefault(e.data["round"], {})[e.data["who"]] = e.data["bit"]
        return out

    def to_lines(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.events)

    @classmethod
    def from_lines(cls, text: str) -> "Transcript":
        events = []
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TranscriptParseError(f"line {n}: not JSON ({exc})") from None
            if not isinstance(obj, dict) or "event" not in obj:
                raise TranscriptParseError(f"line {n}: missing 'event' field")
            kind = obj.pop("event")
            try:
                ev = Event(kind, obj)
            except ValueError as exc:
                raise TranscriptParseError(f"line {n}: {exc}") from None
            if kind == "announce":
                _check_announce(ev, n)
            events.append(ev)
        return cls(events)


def _check_announce(ev: Event, n: int) -> None:
    d = ev.data
    if set(d) != EVENT_FIELDS["announce"]:
        raise TranscriptParseError(f"line {n}: announce needs round, who, bit")
    if d["who"] not in ANNOUNCERS or d["bit"] not in (0, 1):
        raise TranscriptParseError(f"line {n}: bad announce payload {d}")
    if not isinstance(d["round"], int) or d["round"] < 1:
        raise TranscriptParseError(f"line {n}: bad round index {d['round']!r}")
