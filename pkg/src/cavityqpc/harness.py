"""Monte Carlo trial runner, exhaustive comparison-table verifier and report output."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .adversary import NO_ATTACK, AttackModel, detection_probability, tp_knowledge_theory
from .protocol import (
    ProtocolConfig,
    TrialOutcome,
    encode_bit,
    parity_code,
    run_protocol,
    tp_round,
    users_decode,
)
from .quantum_core import (
    Basis,
    ProductLabel,
    atom_branches,
    evolve_cavity,
    prepare_product,
    uniform_ints,
)
from .records import ConfigurationError, Secret, Verdict

MODES = ("random", "equal", "differ-at", "explicit")
FORMATS = ("human", "json", "tsv")
PRECISION = 6


@dataclass(frozen=True)
class SimConfig:
    length: int = 8
    mode: str = "random"
    differ_at: int | None = None
    secret_a: str | None = None
    secret_b: str | None = None
    decoys: int | None = None  # per channel, None means L
    threshold: float = 0.0
    attack: AttackModel = NO_ATTACK
    trials: int = 1000
    seed: int = 0
    output_format: str = "human"

    def validate(self) -> None:
        if self.length < 1:
            raise ConfigurationError("length must be >= 1")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}")
        if self.mode == "differ-at":
            if self.differ_at is None or not 1 <= self.differ_at <= self.length:
                raise ConfigurationError(f"differ-at needs 1 <= j <= {self.length}")
        if self.mode == "explicit":
            if self.secret_a is None or self.secret_b is None:
                raise ConfigurationError("explicit mode needs both secrets")
            a = Secret.from_string(self.secret_a)
            b = Secret.from_string(self.secret_b)
            if len(a) != self.length or len(b) != self.length:
                raise ConfigurationError(
                    f"explicit secrets must both have length {self.length}"
                )
        if self.decoys is not None and self.decoys < 1:
            raise ConfigurationError("decoys per channel must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigurationError("threshold must lie in [0, 1]")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.output_format not in FORMATS:
            raise ConfigurationError(f"format must be one of {FORMATS}")

    @property
    def decoys_per_channel(self) -> int:
        return self.length if self.decoys is None else self.decoys


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for one trial, derived from (master seed, trial index)."""
    # same stream as default_rng(seq), without its per-call overhead
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, index])))


def draw_secrets(config: SimConfig, rng: np.random.Generator) -> tuple[Secret, Secret]:
    n = config.length
    if config.mode == "explicit":
        return Secret.from_string(config.secret_a), Secret.from_string(config.secret_b)
    if config.mode == "random":
        bits = uniform_ints(rng, 2, 2 * n)
        return Secret(tuple(bits[:n])), Secret(tuple(bits[n:]))
    x = uniform_ints(rng, 2, n)
    if config.mode == "equal":
        y = list(x)
    else:
        j = config.differ_at
        tail = uniform_ints(rng, 2, n - j)
        y = x[: j - 1] + [1 - x[j - 1]] + tail
    return Secret(tuple(x)), Secret(tuple(y))


def expected_verdict(x: Secret, y: Secret) -> Verdict:
    for i, (a, b) in enumerate(zip(x.bits, y.bits), 1):
        if a != b:
            return Verdict.not_equal_at(i)
    return Verdict.equal()


def qubit_efficiency(outcome: TrialOutcome) -> float | None:
    """Compared bits per consumed payload atom; None when nothing was compared."""
    compared = len(outcome.rounds)
    if outcome.verdict.aborted_check or compared == 0:
        return None
    consumed = 2 * compared  # one two-atom pair per round; decoys not counted
    return compared / consumed


@dataclass
class SummaryStats:
    trials: int
    length: int
    attack: str
    decoys_per_channel: int
    seed: int
    verdicts: dict[str, int]
    mean_termination_round: float | None
    decoy_errors: int
    decoy_total: int
    decoy_error_rate: float
    decoy_error_stderr: float
    abort_rate: float
    abort_rate_theory: float
    qubit_efficiency: float | None
    tp_knowledge_empirical: float
    tp_knowledge_theoretical: float
    invariant_violations: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdicts"] = dict(sorted(self.verdicts.items()))
        return {k: _fixed(v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SummaryStats":
        return cls(**d)


def _fixed(v):
    if isinstance(v, float):
        return round(v, PRECISION)
    return v


def run_trials(
    config: SimConfig, on_trial: Callable[[int, TrialOutcome], None] | None = None
) -> SummaryStats:
    """Run ``config.trials`` independent protocol executions and aggregate.

    ``on_trial(index, outcome)`` is called after each run, e.g. to dump
    transcripts. Deterministic given ``config.seed``.
    """
    config.validate()
    pcfg = ProtocolConfig(decoys=config.decoys_per_channel, threshold=config.threshold)
    verdicts: dict[str, int] = {}
    term_rounds: list[int] = []
    errors = total = aborted = revealed = violations = 0
    compared = consumed = 0
    for t in range(config.trials):
        rng = trial_rng(config.seed, t)
        x, y = draw_secrets(config, rng)
        out = run_protocol(x, y, pcfg, config.attack, rng=rng)
        v = out.verdict
        verdicts[str(v)] = verdicts.get(str(v), 0) + 1
        for e, n in out.decoy_errors.values():
            errors += e
            total += n
        if v.aborted_check:
            aborted += 1
        else:
            compared += len(out.rounds)
            consumed += 2 * len(out.rounds)
        if v.kind == "NotEqualAtRound":
            term_rounds.append(v.round)
            if v.round < config.length:
                revealed += 1
        if config.attack.kind == "none" and v != expected_verdict(x, y):
            violations += 1
        if on_trial is not None:
            on_trial(t, out)
    rate = errors / total
    return SummaryStats(
        trials=config.trials,
        length=config.length,
        attack=str(config.attack),
        decoys_per_channel=config.decoys_per_channel,
        seed=config.seed,
        verdicts=dict(sorted(verdicts.items())),
        mean_termination_round=(sum(term_rounds) / len(term_rounds)) if term_rounds else None,
        decoy_errors=errors,
        decoy_total=total,
        decoy_error_rate=rate,
        decoy_error_stderr=math.sqrt(rate * (1 - rate) / total),
        abort_rate=aborted / config.trials,
        abort_rate_theory=detection_probability(config.attack, config.decoys_per_channel),
        qubit_efficiency=(compared / consumed) if consumed else None,
        tp_knowledge_empirical=revealed / config.trials,
        tp_knowledge_theoretical=tp_knowledge_theory(config.length),
        invariant_violations=violations,
    )


# --- comparison table -------------------------------------------------------


@dataclass
class Table1Certificate:
    passed: bool
    checked: int
    expected_count: int
    violations: list[dict] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)

    def to_json(self, include_rows: bool = False) -> str:
        d = asdict(self)
        if not include_rows:
            d.pop("rows")
        return json.dumps(d, indent=2, sort_keys=True)


def z_branches(label: ProductLabel) -> list[tuple[int, int, float]]:
    """(m_a, m_b, probability) for every Z-basis outcome of the evolved pair."""
    evolved = evolve_cavity(prepare_product(label))
    out = []
    for outcome_a, p_a, post in atom_branches(evolved, "A", Basis.Z):
        (outcome_b, p_b, _), = atom_branches(post, "B", Basis.Z)
        out.append((outcome_a.bit, outcome_b.bit, p_a * p_b))
    return out


def verify_table1() -> Table1Certificate:
    """Check the full classical chain over every (g, label, keys, branch) case."""
    rows, bad = [], []
    for g_a, g_b in itertools.product((0, 1), repeat=2):
        for label in ProductLabel:
            m_t = parity_code(label)
            branches = z_branches(label)
            for k_a, k_b in itertools.product((0, 1), repeat=2):
                for m_a, m_b, prob in branches:
                    r_a = encode_bit(g_a, m_a, k_a)
                    r_b = encode_bit(g_b, m_b, k_b)
                    r = tp_round(r_a, r_b, label)
                    r_dd = users_decode(r, k_a, k_b)
                    row = {
                        "g_a": g_a, "g_b": g_b, "is": label.name, "m_t": m_t,
                        "m_a": m_a, "m_b": m_b, "k_a": k_a, "k_b": k_b,
                        "r_a": r_a, "r_b": r_b, "r": r, "r_dd": r_dd,
                        "probability": round(prob, PRECISION),
                    }
                    rows.append(row)
                    problems = []
                    if r_dd != g_a ^ g_b:
                        problems.append("r_dd != g_a ^ g_b")
                    if m_a ^ m_b ^ m_t:
                        problems.append("m_a ^ m_b ^ m_t != 0")
                    if r != (g_a ^ k_a) ^ (g_b ^ k_b):
                        problems.append("r depends on measurement branch")
                    if problems:
                        bad.append({**row, "problems": problems})
    expected = 4 * 4 * 4 * 2
    return Table1Certificate(
        passed=not bad and len(rows) == expected,
        checked=len(rows),
        expected_count=expected,
        violations=bad,
        rows=rows,
    )


# --- attack sweep -------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    decoys_per_channel: int
    trials: int
    aborted: int
    detection_rate: float
    stderr: float
    theory: float


def attack_sweep(config: SimConfig, decoy_counts: Iterable[int]) -> list[SweepRow]:
    """Detection rate against decoy count for ``config.attack``."""
    rows = []
    for d in decoy_counts:
        cfg = replace(config, decoys=d)
        stats = run_trials(cfg)
        p = stats.abort_rate
        rows.append(
            SweepRow(
                decoys_per_channel=d,
                trials=cfg.trials,
                aborted=round(p * cfg.trials),
                detection_rate=p,
                stderr=math.sqrt(p * (1 - p) / cfg.trials),
                theory=detection_probability(cfg.attack, d),
            )
        )
    return rows


# --- output -------------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.{PRECISION}f}"
    return str(v)


def _flat_metrics(stats: SummaryStats) -> list[tuple[str, object]]:
    items = []
    for k, v in asdict(stats).items():
        if k == "verdicts":
            items.extend((f"verdict[{name}]", n) for name, n in sorted(v.items()))
        else:
            items.append((k, v))
    return items


def emit_report(stats: SummaryStats, fmt: str = "human") -> str:
    if fmt == "json":
        return json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n"
    metrics = _flat_metrics(stats)
    if fmt == "tsv":
        return "metric\tvalue\n" + "".join(f"{k}\t{_cell(v)}\n" for k, v in metrics)
    if fmt == "human":
        width = max(len(k) for k, _ in metrics)
        lines = [f"{'metric'.ljust(width)}  value", f"{'-' * width}  {'-' * 12}"]
        lines += [f"{k.ljust(width)}  {_cell(v)}" for k, v in metrics]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_sweep(rows: Sequence[SweepRow], fmt: str = "human") -> str:
    cols = list(SweepRow.__dataclass_fields__)
    if fmt == "json":
        data = [{k: _fixed(v) for k, v in asdict(r).items()} for r in rows]
        return json.dumps(data, indent=2, sort_keys=True) + "\n"
    table = [[_cell(getattr(r, c)) for c in cols] for r in rows]
    if fmt == "tsv":
        return "\t".join(cols) + "\n" + "".join("\t".join(t) + "\n" for t in table)
    if fmt == "human":
        widths = [max(len(c), *(len(t[i]) for t in table)) for i, c in enumerate(cols)]
        fmt_row = lambda cells: "  ".join(s.rjust(w) for s, w in zip(cells, widths))
        return "\n".join([fmt_row(cols)] + [fmt_row(t) for t in table]) + "\n"
    raise ValueError(f"unknown format {fmt!r}")
