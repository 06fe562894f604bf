"""Three-party comparison rounds: TP, Alice and Bob.

TP prepares product pairs, runs them through the cavity and splits them
into two travel sequences with decoys mixed in. After the decoy check the
users measure their atoms round by round and publish one-time-padded bits;
TP folds in the pair's parity and publishes the combination, which the
users unpad to get ``g_a ^ g_b``. The run stops at the first round that
proves the secrets differ.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .adversary import NO_ATTACK, AttackModel, EveRecord, apply_attack
from .quantum_core import (
    AtomLabel,
    Basis,
    ProductLabel,
    Rng,
    SingleAtomState,
    TwoAtomState,
    evolve_cavity,
    make_rng,
    measure_atom,
    measure_single,
    prepare_decoy,
    prepare_product,
    uniform_ints,
)
from .records import (
    ConfigurationError,
    KeyPair,
    ProtocolOrderError,
    RoundRecord,
    Secret,
    Transcript,
    Verdict,
)

CHANNELS = ("A", "B")
_LABELS = tuple(ProductLabel)
_DECOY_LABELS = tuple(AtomLabel)


class SharedPair:
    """One source of truth for the joint state of an entangled pair."""

    __slots__ = ("state",)

    def __init__(self, state: TwoAtomState) -> None:
        self.state = state


class AtomHandle:
    """One atom of a :class:`SharedPair` as it travels to a user."""

    __slots__ = ("pair", "which", "consumed")

    def __init__(self, pair: SharedPair, which: str) -> None:
        self.pair = pair
        self.which = which
        self.consumed = False

    def measure(self, basis: Basis, rng: Rng) -> AtomLabel:
        outcome, self.pair.state = measure_atom(self.pair.state, self.which, basis, rng)
        return outcome

    def __repr__(self) -> str:
        return f"AtomHandle({self.which}, pair={id(self.pair):#x})"


def simulate_qkd_keys(length: int, rng: Rng) -> KeyPair:
    """Ideal stand-in for a QKD run: two independent uniform key strings."""
    if length < 1:
        raise ConfigurationError("key length must be >= 1")
    bits = uniform_ints(rng, 2, 2 * length)
    return KeyPair(tuple(bits[:length]), tuple(bits[length:]))


def tp_prepare_sequence(
    length: int, rng: Rng, labels: Sequence[ProductLabel] | None = None
) -> list[tuple[ProductLabel, TwoAtomState]]:
    """L product states with uniformly random labels (or the ``labels`` given)."""
    if length < 1:
        raise ConfigurationError("sequence length must be >= 1")
    if labels is None:
        labels = [_LABELS[k] for k in uniform_ints(rng, 4, length)]
    elif len(labels) != length:
        raise ConfigurationError("forced labels must have the sequence length")
    return [(lab, prepare_product(lab)) for lab in labels]


def tp_evolve_and_split(seq) -> tuple[list[AtomHandle], list[AtomHandle]]:
    s_a, s_b = [], []
    for _label, state in seq:
        pair = SharedPair(evolve_cavity(state))
        s_a.append(AtomHandle(pair, "A"))
        s_b.append(AtomHandle(pair, "B"))
    return s_a, s_b


@dataclass(frozen=True)
class DecoyPlacement:
    position: int
    label: AtomLabel
    basis: Basis = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "basis", self.label.basis)


@dataclass(frozen=True)
class DecoyPlan:
    """Decoy positions (in the lengthened sequence) and states per channel."""

    a: tuple[DecoyPlacement, ...] = ()
    b: tuple[DecoyPlacement, ...] = ()

    def for_channel(self, channel: str) -> tuple[DecoyPlacement, ...]:
        if channel == "A":
            return self.a
        if channel == "B":
            return self.b
        raise ConfigurationError(f"unknown channel {channel!r}")

    @classmethod
    def random(cls, payload_len: int, n_decoys: int, rng: Rng) -> "DecoyPlan":
        if n_decoys < 1:
            raise ConfigurationError("at least one decoy per channel is required")

        total = payload_len + n_decoys
        labels = uniform_ints(rng, 4, 2 * n_decoys)

        def one(picks: list[int]) -> tuple[DecoyPlacement, ...]:
            positions = sorted(rng.permutation(total)[:n_decoys].tolist())
            return tuple(DecoyPlacement(p, _DECOY_LABELS[k]) for p, k in zip(positions, picks))

        return cls(one(labels[:n_decoys]), one(labels[n_decoys:]))


def _validate_placements(placements, total: int) -> None:
    prev = -1
    for pl in placements:
        if not 0 <= pl.position < total:
            raise ConfigurationError(f"decoy position {pl.position} out of range [0, {total})")
        if pl.position <= prev:
            raise ConfigurationError("decoy positions must be strictly increasing (no collisions)")
        prev = pl.position


def insert_decoys(travel: Sequence, plan: DecoyPlan, channel: str) -> list:
    placements = plan.for_channel(channel)
    total = len(travel) + len(placements)
    _validate_placements(placements, total)
    out: list = []
    payload = iter(travel)
    at = {pl.position: pl for pl in placements}
    for pos in range(total):
        pl = at.get(pos)
        out.append(prepare_decoy(pl.label) if pl is not None else next(payload))
    return out


def remove_decoys(lengthened: Sequence, plan: DecoyPlan, channel: str) -> list:
    placements = plan.for_channel(channel)
    _validate_placements(placements, len(lengthened))
    skip = {pl.position for pl in placements}
    return [item for pos, item in enumerate(lengthened) if pos not in skip]


def security_check(
    channel_states: Sequence,
    plan: DecoyPlan,
    threshold: float,
    rng: Rng,
    channel: str = "A",
) -> tuple[float, bool]:
    """Measure each decoy in its preparation basis; returns (error_rate, passed)."""
    placements = plan.for_channel(channel)
    if not placements:
        raise ConfigurationError("security check with no decoys is vacuous")
    _validate_placements(placements, len(channel_states))
    errors = 0
    for pl in placements:
        item = channel_states[pl.position]
        if not isinstance(item, SingleAtomState):
            raise ConfigurationError(f"no decoy atom at position {pl.position}")
        if measure_single(item, pl.basis, rng) is not pl.label:
            errors += 1
    rate = errors / len(placements)
    return rate, rate <= threshold


def encode_bit(g: int, m: int, k: int) -> int:
    return g ^ m ^ k


def user_round(atom_handle: AtomHandle, g: int, k: int, rng: Rng) -> tuple[int, int]:
    """Z-measure the user's atom; returns (m, r) with r = g ^ m ^ k."""
    if atom_handle.consumed:
        raise ProtocolOrderError("atom already measured by its user")
    atom_handle.consumed = True
    m = atom_handle.measure(Basis.Z, rng).bit
    return m, encode_bit(g, m, k)


def parity_code(label: ProductLabel) -> int:
    return label.parity


def tp_round(r_a: int | None, r_b: int | None, is_label: ProductLabel) -> int:
    if r_a is None or r_b is None:
        raise ProtocolOrderError("TP needs both R_A and R_B before announcing R")
    return r_a ^ r_b ^ parity_code(is_label)


def users_decode(r: int, k_a: int, k_b: int) -> int:
    return r ^ k_a ^ k_b


class User:
    """Alice or Bob. Holds the secret and both keys; TP never sees these."""

    def __init__(self, name: str, secret: Secret, keys: KeyPair) -> None:
        self.name = name
        self.secret = secret
        self._keys = keys
        self._atoms: list[AtomHandle] | None = None
        self.m: dict[int, int] = {}

    @property
    def own_key(self) -> tuple[int, ...]:
        return self._keys.k_a if self.name == "A" else self._keys.k_b

    def receive(self, lengthened: list) -> list:
        self._received = lengthened
        return lengthened

    def keep_payload(self, plan: DecoyPlan) -> None:
        self._atoms = remove_decoys(self._received, plan, self.name)

    def announce(self, i: int, rng: Rng) -> int:
        if self._atoms is None:
            raise ProtocolOrderError("comparison round before the security check finished")
        m, r = user_round(self._atoms[i - 1], self.secret[i - 1], self.own_key[i - 1], rng)
        self.m[i] = m
        return r

    def decode(self, i: int, r: int) -> int:
        return users_decode(r, self._keys.k_a[i - 1], self._keys.k_b[i - 1])


class ThirdParty:
    """TP: prepares pairs, runs the decoy check, combines announcements."""

    def __init__(self) -> None:
        self._labels: list[ProductLabel] = []

    def prepare(self, length: int, rng: Rng) -> tuple[list[AtomHandle], list[AtomHandle]]:
        seq = tp_prepare_sequence(length, rng)
        self._labels = [lab for lab, _ in seq]
        return tp_evolve_and_split(seq)

    def label(self, i: int) -> ProductLabel:
        return self._labels[i - 1]

    def combine(self, i: int, r_a: int, r_b: int) -> int:
        return tp_round(r_a, r_b, self._labels[i - 1])


@dataclass(frozen=True)
class ProtocolConfig:
    decoys: int | None = None  # per channel; None means L
    threshold: float = 0.0
    seed: int | None = None

    def decoys_for(self, length: int) -> int:
        n = length if self.decoys is None else self.decoys
        if n < 1:
            raise ConfigurationError("decoys per channel must be >= 1")
        return n


@dataclass
class TrialOutcome:
    verdict: Verdict
    rounds: list[RoundRecord]
    decoy_errors: dict[str, tuple[int, int]]  # channel -> (errors, total)
    transcript: Transcript
    keys: KeyPair
    x: Secret
    y: Secret
    eve_records: list[EveRecord] = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.x)


def run_protocol(
    x: Secret,
    y: Secret,
    config: ProtocolConfig = ProtocolConfig(),
    attack: AttackModel = NO_ATTACK,
    rng: Rng | None = None,
) -> TrialOutcome:
    """One full comparison. ``rng`` overrides ``config.seed`` when given."""
    if len(x) != len(y):
        raise ConfigurationError(f"secret lengths differ ({len(x)} vs {len(y)})")
    if rng is None:
        rng = make_rng(config.seed)
    length = len(x)
    n_decoys = config.decoys_for(length)
    log = Transcript()

    keys = simulate_qkd_keys(length, rng)
    alice, bob = User("A", x, keys), User("B", y, keys)
    users = {"A": alice, "B": bob}
    tp = ThirdParty()

    # steps 2-3: prepare, evolve, split, hide decoys, send
    s_a, s_b = tp.prepare(length, rng)
    plan = DecoyPlan.random(length, n_decoys, rng)
    sent = {"A": insert_decoys(s_a, plan, "A"), "B": insert_decoys(s_b, plan, "B")}
    for ch in CHANNELS:
        log.extend("quantum_send", ({"channel": ch, "position": p} for p in range(len(sent[ch]))))

    received, eve_records = apply_attack(attack, sent, rng)
    confirmed = set()
    for ch in CHANNELS:
        users[ch].receive(received[ch])
        log.add("receipt_confirmed", channel=ch)
        confirmed.add(ch)

    decoy_errors = {}
    failed = None
    for ch in CHANNELS:
        if ch not in confirmed:
            raise ProtocolOrderError("decoy plan disclosed before receipt")
        placements = plan.for_channel(ch)
        log.add(
            "decoy_disclosure",
            channel=ch,
            positions=[pl.position for pl in placements],
            bases=[pl.basis.value for pl in placements],
        )
        rate, ok = security_check(received[ch], plan, config.threshold, rng, ch)
        log.add("security_check", channel=ch, error_rate=rate, passed=ok)
        decoy_errors[ch] = (round(rate * len(placements)), len(placements))
        if not ok and failed is None:
            failed = ch

    rounds: list[RoundRecord] = []
    if failed is not None:
        verdict = Verdict.aborted(failed)
    else:
        for u in users.values():
            u.keep_payload(plan)
        verdict = Verdict.equal()
        # steps 4-6, one bit per round, least-significant first
        for i in range(1, length + 1):
            r_a = alice.announce(i, rng)
            log.add("announce", round=i, who="R_A", bit=r_a)
            r_b = bob.announce(i, rng)
            log.add("announce", round=i, who="R_B", bit=r_b)
            r = tp.combine(i, r_a, r_b)
            log.add("announce", round=i, who="R", bit=r)
            r_dd = alice.decode(i, r)
            if bob.decode(i, r) != r_dd:
                raise ProtocolOrderError("users decoded different R'' values")
            label = tp.label(i)
            rounds.append(
                RoundRecord(
                    i=i,
                    is_label=label,
                    m_t=parity_code(label),
                    g_a=x[i - 1],
                    g_b=y[i - 1],
                    m_a=alice.m[i],
                    m_b=bob.m[i],
                    k_a=keys.k_a[i - 1],
                    k_b=keys.k_b[i - 1],
                    r_a=r_a,
                    r_b=r_b,
                    r=r,
                    r_dd=r_dd,
                )
            )
            if r_dd:
                verdict = Verdict.not_equal_at(i)
                break
    log.add("verdict", verdict=str(verdict))
    return TrialOutcome(verdict, rounds, decoy_errors, log, keys, x, y, eve_records)
