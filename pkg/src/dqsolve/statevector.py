"""Dense statevector simulation for small qubit registers.

Conventions used throughout the package:

* qubit ordering is little-endian: qubit 0 is the least-significant bit of
  the computational basis index;
* Pauli rotations are R_P(theta) = exp(-i * theta * P / 2), which makes the
  standard parameter-shift rule (shifts of +-pi/2, prefactor 1/2) exact.

The low-level kernels operate on batches of amplitude vectors with shape
(batch, 2**n) so that many circuit evaluations (grid points, shifted
parameters) can run in one numpy call.  ``StateVector`` wraps the batch=1
case and is the unit handed between modules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 12

BASIS_LETTERS = ("X", "Y", "Z")


class ConfigurationError(ValueError):
    """Raised for invalid register sizes, qubit indices or gate kinds."""


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray  # shape (2**n_qubits,), complex128

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def zero_state(n: int) -> StateVector:
    """|0...0> on ``n`` qubits."""
    if not 1 <= n <= MAX_QUBITS:
        raise ConfigurationError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")
    amps = np.zeros(2**n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n, amps)


def _check_qubit(n: int, q: int) -> None:
    if not 0 <= q < n:
        raise ConfigurationError(f"qubit index {q} out of range for {n} qubits")


def _split_axes(amps: np.ndarray, n: int, q: int) -> np.ndarray:
    """View (B, 2**n) as (B, high, 2, low) with the target qubit on axis 2."""
    low = 1 << q
    high = 1 << (n - 1 - q)
    return amps.reshape(amps.shape[0], high, 2, low)


def apply_rotation_batch(amps, n, q, axis, angles):
    """Apply R_axis(angle) to qubit q of every row of ``amps`` in place.

    ``angles`` may be a scalar or an array of shape (batch,).
    """
    _check_qubit(n, q)
    half = np.asarray(angles, dtype=np.float64) / 2.0
    c = np.cos(half)
    s = np.sin(half)
    if c.ndim == 1:
        c = c[:, None, None]
        s = s[:, None, None]
    view = _split_axes(amps, n, q)
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    if axis == "X":
        new0 = c * a0 - 1j * s * a1
        new1 = -1j * s * a0 + c * a1
    elif axis == "Y":
        new0 = c * a0 - s * a1
        new1 = s * a0 + c * a1
    elif axis == "Z":
        phase0 = c - 1j * s
        phase1 = c + 1j * s
        new0 = phase0 * a0
        new1 = phase1 * a1
    else:
        raise ConfigurationError(f"unknown rotation axis {axis!r}")
    view[:, :, 0, :] = new0
    view[:, :, 1, :] = new1


_SQRT_HALF = 1.0 / np.sqrt(2.0)


def apply_matrix_batch(amps, n, q, matrix):
    """Apply a fixed 2x2 unitary to qubit q of every row, in place."""
    _check_qubit(n, q)
    view = _split_axes(amps, n, q)
    a0 = view[:, :, 0, :].copy()
    a1 = view[:, :, 1, :]
    view[:, :, 0, :] = matrix[0, 0] * a0 + matrix[0, 1] * a1
    view[:, :, 1, :] = matrix[1, 0] * a0 + matrix[1, 1] * a1


H_MATRIX = np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=np.complex128)

# Rotations mapping the +1 eigenvector of X / Y onto |0>, used for measuring
# in a rotated product basis.
_BASIS_ROTATION = {
    "X": H_MATRIX,
    "Y": H_MATRIX @ np.diag([1.0, -1.0j]).astype(np.complex128),
    "Z": None,
}


def apply_cnot_batch(amps, n, control, target):
    """CNOT on every row, in place."""
    _check_qubit(n, control)
    _check_qubit(n, target)
    if control == target:
        raise ConfigurationError("CNOT control and target must differ")
    view = amps.reshape((amps.shape[0],) + (2,) * n)
    # qubit q lives on axis 1 + (n - 1 - q)
    idx_c = 1 + (n - 1 - control)
    idx_t = 1 + (n - 1 - target)
    sel1 = [slice(None)] * (n + 1)
    sel1[idx_c] = 1
    block = view[tuple(sel1)]
    # target axis shifts left by one if it sat after the control axis
    t_axis = idx_t - 1 if idx_t > idx_c else idx_t
    view[tuple(sel1)] = np.flip(block, axis=t_axis)


def apply_gate(state: StateVector, gate) -> StateVector:
    """Apply one GateSpec (from dqsolve.circuits) with constant bindings."""
    from . import circuits  # local import to avoid a cycle at module load

    amps = state.amplitudes[None, :].copy()
    circuits.apply_gate_to_batch(amps, state.n_qubits, gate, bindings={})
    return StateVector(state.n_qubits, amps[0])


def pauli_action(letters: str):
    """Return (index_map, coefficients) so that (P psi)[i] = coef[i] * psi[index_map[i]].

    ``letters`` uses the textual encoding with qubit 0 as the leftmost
    character.  Little-endian index convention: bit q of the basis index is
    the state of qubit q.
    """
    n = len(letters)
    dim = 1 << n
    mask = 0
    for q, letter in enumerate(letters):
        if letter in ("X", "Y"):
            mask |= 1 << q
    idx = np.arange(dim)
    src = idx ^ mask
    coef = np.ones(dim, dtype=np.complex128)
    for q, letter in enumerate(letters):
        bit = (src >> q) & 1
        if letter == "Z":
            coef = coef * (1 - 2 * bit)
        elif letter == "Y":
            coef = coef * (1j * (1 - 2 * bit))
        elif letter not in ("I", "X"):
            raise ConfigurationError(f"unknown Pauli letter {letter!r}")
    return src, coef


def pauli_expectation_batch(amps: np.ndarray, letters: str) -> np.ndarray:
    """<psi|P|psi> for every row; returns a real array of shape (batch,)."""
    src, coef = pauli_action(letters)
    vals = np.einsum("bi,bi->b", np.conj(amps), coef[None, :] * amps[:, src])
    if np.any(np.abs(vals.imag) > 1e-10):
        raise AssertionError("Pauli expectation acquired an imaginary part")
    return vals.real


def expectation(state: StateVector, obs) -> float:
    """Expectation of an ObservableSum (or a single PauliString) on ``state``."""
    terms = getattr(obs, "terms", None)
    if terms is None:
        terms = [(1.0, obs)]
    amps = state.amplitudes[None, :]
    total = 0.0
    for coef, pstring in terms:
        letters = pstring.letters if hasattr(pstring, "letters") else str(pstring)
        if len(letters) > state.n_qubits:
            raise ConfigurationError("observable acts on more qubits than the state has")
        padded = letters + "I" * (state.n_qubits - len(letters))
        total += coef * pauli_expectation_batch(amps, padded)[0]
    return float(total)


def rotate_to_bases(amps: np.ndarray, n: int, bases) -> np.ndarray:
    """Return a copy of ``amps`` rotated so the given product basis becomes computational.

    ``bases`` is one letter per qubit ('X', 'Y' or 'Z'), shared by all rows.
    """
    out = amps.copy()
    for q, letter in enumerate(bases):
        matrix = _BASIS_ROTATION[letter]
        if matrix is not None:
            apply_matrix_batch(out, n, q, matrix)
    return out


def sample_bitstrings(amps: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample one computational-basis index per row from the Born distribution."""
    probs = np.abs(amps) ** 2
    probs /= probs.sum(axis=1, keepdims=True)
    cum = np.cumsum(probs, axis=1)
    u = rng.random(amps.shape[0])
    return (cum < u[:, None]).sum(axis=1)


def measure_in_bases(state: StateVector, bases, rng: np.random.Generator) -> np.ndarray:
    """Projective measurement of every qubit in its own rotated basis.

    Returns an array of bits (0 = +1 eigenvalue, 1 = -1 eigenvalue), one per
    qubit; deterministic given the generator state.
    """
    if len(bases) != state.n_qubits:
        raise ConfigurationError("need exactly one basis letter per qubit")
    rotated = rotate_to_bases(state.amplitudes[None, :], state.n_qubits, bases)
    index = int(sample_bitstrings(rotated, rng)[0])
    return np.array([(index >> q) & 1 for q in range(state.n_qubits)], dtype=np.int8)
