"""Independent oracles: eigenvectors and detection odds written out by hand."""
import math

import numpy as np

R2 = 1 / math.sqrt(2)
# eigenvectors written out independently of the package
VECS = {
    "g": np.array([1, 0], dtype=complex),
    "e": np.array([0, 1], dtype=complex),
    "+": np.array([R2, R2], dtype=complex),
    "-": np.array([R2, -R2], dtype=complex),
}
BASES = {"Z": ("g", "e"), "X": ("+", "-")}
BASIS_OF = {"g": "Z", "e": "Z", "+": "X", "-": "X"}


def overlap2(a: str, b: str) -> float:
    return abs(np.vdot(VECS[a], VECS[b])) ** 2


def resend_error(decoy: str, eve_basis: str) -> float:
    """P(decoy check fails) when Eve measures in ``eve_basis`` and forwards the eigenstate."""
    return sum(
        overlap2(o, decoy) * (1 - overlap2(decoy, o)) for o in BASES[eve_basis]
    )


def per_decoy_detection(eve_bases=("Z", "X"), decoys=("g", "e", "+", "-")) -> float:
    """Average failure probability over uniform decoys and uniform Eve bases."""
    cases = [resend_error(d, b) for d in decoys for b in eve_bases]
    return sum(cases) / len(cases)


def sigma3(p: float, n: int) -> float:
    return 3 * math.sqrt(p * (1 - p) / n)
