"""Simulated Pauli classical shadows.

Each snapshot measures every qubit in an independently uniform X/Y/Z basis.
The single-snapshot estimator for a weight-w Pauli string is
3**w * (product of outcome signs on its support) when all support bases
match, else 0; estimates aggregate batch means through a median
(median-of-means).  Snapshot collection is vectorized internally but draws
randomness in a fixed order, so shadows are bitwise reproducible per seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pauli import ObservableSum, PauliString
from .statevector import StateVector, rotate_to_bases, sample_bitstrings

BASIS_CODES = "XYZ"

DEFAULT_LOCALITY_CAP = 2


@dataclass(frozen=True)
class ClassicalShadow:
    n_qubits: int
    bases: np.ndarray    # (M, n) uint8 indices into "XYZ"
    signs: np.ndarray    # (M, n) int8, +1 / -1 measurement outcomes
    metadata: dict = field(default_factory=dict)

    @property
    def n_snapshots(self) -> int:
        return self.bases.shape[0]


def collect(state: StateVector, m_snapshots: int, rng: np.random.Generator, metadata=None) -> ClassicalShadow:
    """Draw ``m_snapshots`` randomized-basis measurements of ``state``."""
    if m_snapshots < 1:
        raise ValueError("need at least one snapshot")
    n = state.n_qubits
    bases = rng.integers(0, 3, size=(m_snapshots, n), dtype=np.uint8)
    amps = np.tile(state.amplitudes, (m_snapshots, 1))
    for q in range(n):
        for code, letter in enumerate("XY"):
            rows = bases[:, q] == code
            if rows.any():
                amps[rows] = rotate_to_bases(amps[rows], n, "Z" * q + letter + "Z" * (n - q - 1))
    indices = sample_bitstrings(amps, rng)
    bits = (indices[:, None] >> np.arange(n)[None, :]) & 1
    signs = (1 - 2 * bits).astype(np.int8)
    return ClassicalShadow(n, bases, signs, dict(metadata or {}))


def snapshot_values(shadow: ClassicalShadow, pstring: PauliString) -> np.ndarray:
    """Per-snapshot inverse-channel estimator values; support is {0, +-3**w}."""
    support = pstring.support()
    if not support:
        return np.ones(shadow.n_snapshots)
    values = np.full(shadow.n_snapshots, float(3 ** len(support)))
    for q, letter in support:
        code = BASIS_CODES.index(letter)
        values *= (shadow.bases[:, q] == code) * shadow.signs[:, q]
    return values


def estimate_pauli(
    shadow: ClassicalShadow,
    pstring: PauliString,
    n_batches: int = 1,
    locality_cap: int = DEFAULT_LOCALITY_CAP,
) -> float:
    """Median-of-means estimate of <P>; n_batches=1 is the plain mean."""
    if pstring.weight > locality_cap:
        raise ValueError(
            f"Pauli weight {pstring.weight} exceeds the locality cap {locality_cap}"
        )
    if not 1 <= n_batches <= shadow.n_snapshots:
        raise ValueError("n_batches must be in [1, n_snapshots]")
    if pstring.weight == 0:
        return 1.0
    values = snapshot_values(shadow, pstring)
    if n_batches == 1:
        return float(values.mean())
    means = [batch.mean() for batch in np.array_split(values, n_batches)]
    return float(np.median(means))


def estimate_observable(
    shadow: ClassicalShadow,
    obs: ObservableSum,
    n_batches: int = 1,
    locality_cap: int = DEFAULT_LOCALITY_CAP,
) -> float:
    return sum(
        coef * estimate_pauli(shadow, pstring, n_batches, locality_cap)
        for coef, pstring in obs.terms
    )


def default_batches(n_observables: int) -> int:
    """Median-of-means batch count: 2 * ceil(log2(2 * #observables))."""
    return 2 * math.ceil(math.log2(2 * max(1, n_observables)))


@dataclass(frozen=True)
class ShadowBudget:
    """Knobs for the per-state snapshot budget.

    M = ceil(c0 * 3**w_max * log2(m * (k + 1)) / eps**exponent), the standard
    Pauli-shadow sample bound with the grid size entering logarithmically.
    """

    c0: float = 34.0
    eps: float = 1.0
    exponent: int = 2
    w_max: int = 1

    def snapshots(self, m_points: int, k_order: int) -> int:
        log_term = math.log2(max(2, m_points * (k_order + 1)))
        return math.ceil(self.c0 * 3**self.w_max * log_term / self.eps**self.exponent)


def shadow_to_text(shadow: ClassicalShadow) -> str:
    """Compact line-per-snapshot serialization: basis letters then signs."""
    lines = [f"# n_qubits={shadow.n_qubits} n_snapshots={shadow.n_snapshots}"]
    for row in range(shadow.n_snapshots):
        letters = "".join(BASIS_CODES[b] for b in shadow.bases[row])
        marks = "".join("+" if s > 0 else "-" for s in shadow.signs[row])
        lines.append(f"{letters} {marks}")
    return "\n".join(lines) + "\n"


def shadow_from_text(text: str) -> ClassicalShadow:
    lines = [ln for ln in text.strip().splitlines() if ln and not ln.startswith("#")]
    bases = []
    signs = []
    for line in lines:
        letters, marks = line.split()
        bases.append([BASIS_CODES.index(c) for c in letters])
        signs.append([1 if c == "+" else -1 for c in marks])
    bases_arr = np.array(bases, dtype=np.uint8)
    signs_arr = np.array(signs, dtype=np.int8)
    return ClassicalShadow(bases_arr.shape[1], bases_arr, signs_arr)
