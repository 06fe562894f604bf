"""Two-level atom states, the cavity evolution map and Born-rule measurement.

Basis order for two atoms is fixed as (gg, ge, eg, ee) with atom A as the
left factor. Single-atom amplitudes are stored as plain Python complex
numbers so the decoy paths stay cheap inside Monte Carlo loops.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

Rng = np.random.Generator

NORM_TOL = 1e-12
INPUT_TOL = 1e-9
BRANCH_EPS = 1e-12

_INV_SQRT2 = 1 / math.sqrt(2)


def make_rng(seed: int | None = None) -> Rng:
    """Deterministic generator; identical seeds give identical streams."""
    return np.random.default_rng(seed)


def uniform_ints(rng: Rng, k: int, n: int) -> list[int]:
    """``n`` uniform draws from ``range(k)``; ``k`` must be a power of two.

    Scaling a 53-bit uniform double is exact for such ``k`` and several times
    cheaper than ``Generator.integers`` on short arrays.
    """
    if k < 1 or k & (k - 1):
        raise ValueError("k must be a power of two")
    return (rng.random(n) * k).astype(np.int64).tolist()


class Basis(Enum):
    Z = "Z"
    X = "X"


class AtomLabel(Enum):
    """Eigenstates of the Z and X bases; doubles as a measurement outcome."""

    G = "g"
    E = "e"
    PLUS = "+"
    MINUS = "-"

    @property
    def basis(self) -> Basis:
        return _LABEL_BASIS[self.value]

    @property
    def bit(self) -> int:
        """0 for the first eigenstate of the basis (g or +), 1 otherwise."""
        return _LABEL_BIT[self.value]


_LABEL_BASIS = {"g": Basis.Z, "e": Basis.Z, "+": Basis.X, "-": Basis.X}
_LABEL_BIT = {"g": 0, "e": 1, "+": 0, "-": 1}

MeasOutcome = AtomLabel

_OUTCOMES = {
    Basis.Z: (AtomLabel.G, AtomLabel.E),
    Basis.X: (AtomLabel.PLUS, AtomLabel.MINUS),
}

# rows are the basis vectors <v_k| (real, so no conjugation needed)
_BASIS_VECTORS = {
    Basis.Z: np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex),
    Basis.X: np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) * _INV_SQRT2,
}


_BASIS_PAIRS = {
    Basis.Z: ((1.0, 0.0), (0.0, 1.0)),
    Basis.X: ((_INV_SQRT2, _INV_SQRT2), (_INV_SQRT2, -_INV_SQRT2)),
}


class ProductLabel(Enum):
    GG = 0
    GE = 1
    EG = 2
    EE = 3

    @property
    def parity(self) -> int:
        """Number of excited atoms mod 2."""
        return bin(self.value).count("1") % 2


@dataclass(frozen=True)
class SingleAtomState:
    amp_g: complex
    amp_e: complex

    def __post_init__(self) -> None:
        if not (cmath.isfinite(self.amp_g) and cmath.isfinite(self.amp_e)):
            raise ValueError("non-finite amplitude in single-atom state")

    def norm(self) -> float:
        return math.sqrt(abs(self.amp_g) ** 2 + abs(self.amp_e) ** 2)

    def as_array(self) -> np.ndarray:
        return np.array([self.amp_g, self.amp_e], dtype=complex)


class TwoAtomState:
    """Pure state of two atoms over (gg, ge, eg, ee)."""

    __slots__ = ("amps",)

    def __init__(self, amps) -> None:
        arr = np.asarray(amps, dtype=complex).reshape(-1)
        if arr.shape != (4,):
            raise ValueError(f"two-atom state needs 4 amplitudes, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite amplitude in two-atom state")
        self.amps = arr

    @classmethod
    def _trusted(cls, amps) -> "TwoAtomState":
        # internal results are finite and 4-long by construction
        obj = cls.__new__(cls)
        obj.amps = np.array(amps, dtype=complex)
        return obj

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def __repr__(self) -> str:
        return f"TwoAtomState({np.array2string(self.amps, precision=4)})"


def equal_up_to_phase(a, b, tol: float = 1e-9) -> bool:
    """True if ``a`` equals ``b`` times some global phase, elementwise within ``tol``.

    Accepts state objects or raw amplitude arrays.
    """
    va = _amps(a)
    vb = _amps(b)
    overlap = np.vdot(vb, va)
    phase = overlap / abs(overlap) if abs(overlap) > BRANCH_EPS else 1.0
    return float(np.max(np.abs(va - phase * vb))) <= tol


def _amps(x) -> np.ndarray:
    if isinstance(x, TwoAtomState):
        return x.amps
    if isinstance(x, SingleAtomState):
        return x.as_array()
    return np.asarray(x, dtype=complex)


def _product(label: ProductLabel) -> TwoAtomState:
    amps = np.zeros(4, dtype=complex)
    amps[label.value] = 1.0
    amps.setflags(write=False)
    return TwoAtomState(amps)


_PRODUCTS = {label: _product(label) for label in ProductLabel}


def prepare_product(label: ProductLabel) -> TwoAtomState:
    return _PRODUCTS[label]


# states are immutable, so one instance per label is shared
_DECOYS = {
    AtomLabel.G: SingleAtomState(1.0 + 0j, 0j),
    AtomLabel.E: SingleAtomState(0j, 1.0 + 0j),
    AtomLabel.PLUS: SingleAtomState(_INV_SQRT2 + 0j, _INV_SQRT2 + 0j),
    AtomLabel.MINUS: SingleAtomState(_INV_SQRT2 + 0j, -_INV_SQRT2 + 0j),
}


def prepare_decoy(label: AtomLabel) -> SingleAtomState:
    return _DECOYS[label]


def _build_cavity_unitary() -> np.ndarray:
    # |gg> -> c(|gg> - i|ee>), |ge> -> c(|ge> - i|eg>),
    # |eg> -> c(|eg> - i|ge>), |ee> -> c(|ee> - i|gg>)
    c = (math.sqrt(2) / 2) * cmath.exp(-1j * math.pi / 4)
    u = np.zeros((4, 4), dtype=complex)
    for col, partner in ((0, 3), (1, 2), (2, 1), (3, 0)):
        u[col, col] = c
        u[partner, col] = -1j * c
    return u


_CAVITY_U = _build_cavity_unitary()
_CAVITY_U.setflags(write=False)


def cavity_unitary() -> np.ndarray:
    """4x4 evolution matrix for one cavity pass, columns ordered (gg, ge, eg, ee)."""
    return _CAVITY_U.copy()


def _check_normalized(norm: float) -> None:
    if abs(norm - 1.0) > INPUT_TOL:
        raise ValueError(f"state is not normalized (norm={norm!r})")


def _evolve(state: TwoAtomState) -> TwoAtomState:
    _check_normalized(state.norm())
    out = _CAVITY_U @ state.amps
    out.setflags(write=False)
    return TwoAtomState._trusted(out)


# keyed by identity of the shared product-state instances
_EVOLVED_PRODUCTS = {id(st): _evolve(st) for st in _PRODUCTS.values()}


def evolve_cavity(state: TwoAtomState) -> TwoAtomState:
    cached = _EVOLVED_PRODUCTS.get(id(state))
    return cached if cached is not None else _evolve(state)


def _pick(p0: float, p1: float, rng: Rng) -> int:
    """Index of the sampled branch; a branch below BRANCH_EPS is never taken."""
    if p0 < BRANCH_EPS:
        return 1
    if p1 < BRANCH_EPS:
        return 0
    return 0 if rng.random() < p0 / (p0 + p1) else 1


def atom_branches(state: TwoAtomState, which: str, basis: Basis):
    """All measurement branches of one atom as (outcome, probability, post_state).

    Branches with probability below BRANCH_EPS are dropped.
    """
    if which not in ("A", "B"):
        raise ValueError(f"which must be 'A' or 'B', got {which!r}")
    m = state.amps.reshape(2, 2)
    if which == "B":
        m = m.T
    vecs = _BASIS_VECTORS[basis]
    out = []
    for k, outcome in enumerate(_OUTCOMES[basis]):
        rest = vecs[k].conj() @ m
        p = float(np.vdot(rest, rest).real)
        if p < BRANCH_EPS:
            continue
        rest = rest / math.sqrt(p)
        joint = np.outer(vecs[k], rest) if which == "A" else np.outer(rest, vecs[k])
        out.append((outcome, p, TwoAtomState(joint.reshape(-1))))
    return out


def measure_atom(
    state: TwoAtomState, which: str, basis: Basis, rng: Rng
) -> tuple[AtomLabel, TwoAtomState]:
    """Measure atom ``which`` ('A' or 'B') and return (outcome, collapsed state)."""
    # scalar arithmetic: numpy call overhead dominates at this size
    a0, a1, a2, a3 = state.amps.tolist()
    _check_normalized(math.sqrt(abs(a0) ** 2 + abs(a1) ** 2 + abs(a2) ** 2 + abs(a3) ** 2))
    if which == "A":
        pairs = ((a0, a1), (a2, a3))
    elif which == "B":
        pairs = ((a0, a2), (a1, a3))
    else:
        raise ValueError(f"which must be 'A' or 'B', got {which!r}")
    (u0, u1), (w0, w1) = pairs
    if basis is Basis.Z:
        rests = ((u0, u1), (w0, w1))
    else:
        rests = (
            ((u0 + w0) * _INV_SQRT2, (u1 + w1) * _INV_SQRT2),
            ((u0 - w0) * _INV_SQRT2, (u1 - w1) * _INV_SQRT2),
        )
    p0 = abs(rests[0][0]) ** 2 + abs(rests[0][1]) ** 2
    p1 = abs(rests[1][0]) ** 2 + abs(rests[1][1]) ** 2
    k = _pick(p0, p1, rng)
    s = 1.0 / math.sqrt(p0 if k == 0 else p1)
    r0, r1 = rests[k][0] * s, rests[k][1] * s
    v0, v1 = _BASIS_PAIRS[basis][k]
    if which == "A":
        joint = (v0 * r0, v0 * r1, v1 * r0, v1 * r1)
    else:
        joint = (r0 * v0, r0 * v1, r1 * v0, r1 * v1)
    return _OUTCOMES[basis][k], TwoAtomState._trusted(joint)


def single_probabilities(state: SingleAtomState, basis: Basis) -> tuple[float, float]:
    g, e = state.amp_g, state.amp_e
    if basis is Basis.Z:
        return abs(g) ** 2, abs(e) ** 2
    return abs(g + e) ** 2 / 2, abs(g - e) ** 2 / 2


def measure_single(state: SingleAtomState, basis: Basis, rng: Rng) -> AtomLabel:
    g, e = state.amp_g, state.amp_e
    if basis is Basis.Z:
        p0, p1 = abs(g) ** 2, abs(e) ** 2
    else:
        p0, p1 = abs(g + e) ** 2 / 2, abs(g - e) ** 2 / 2
    _check_normalized(math.sqrt(p0 + p1))
    return _OUTCOMES[basis][_pick(p0, p1, rng)]


def z_parity(index: int) -> int:
    """Z-parity of computational basis index in (gg, ge, eg, ee) order."""
    return bin(index).count("1") % 2
