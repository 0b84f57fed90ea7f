"""The three trial-function families with a uniform evaluation interface.

Every model exposes:

* ``init_params(rng)`` -> flat parameter vector;
* ``values(params, idx, mode)`` -> trial-function (derivative) values at a
  subset of the model's fixed evaluation points;
* ``jacobian(params, idx, mode)`` -> derivative of those values with respect
  to every parameter;
* optionally ``begin_epoch(params, rng, need_grad)`` for models whose
  quantum data is gathered once per epoch.

A ``mode`` is a tuple of input-dimension indices: () is the plain value,
(0,) is d/dx0, (0, 0) the second derivative, (1,) is d/dx1 for 2D inputs.

Quantum charges go through a counter object with a ``charge(n, phase=...)``
method; models charge according to their protocol's cost policy, not
according to how the classical simulation happens to be organized.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import circuits, pauli, shadows
from .circuits import CircuitSpec, run_batch
from .statevector import pauli_expectation_batch

SHIFT = np.pi / 2.0

# default seed for the static basis-change unitary behind the trainable
# observable's candidate set; fixed so tables are comparable across runs
DEFAULT_UB_SEED = 2

PHASE_PRECOMPUTE = "precompute"
PHASE_EPOCH = "per_epoch"
PHASE_INFERENCE = "inference"


def _charge(counter, n, phase):
    if counter is not None and n:
        counter.charge(n, phase=phase)


# ---------------------------------------------------------------------------
# basis functions for the flipped model's input-dependent observable


def chebyshev_basis(u, l_max: int, order: int = 0) -> np.ndarray:
    """T_l^(order)(u) for l = 0..l_max via the differentiated recurrence.

    ``u`` may be a scalar or an array; the result has one trailing axis of
    length l_max + 1.  Derivative orders up to 3 are supported (order 3 is
    needed only for chain-rule gradients of second-derivative evaluations).
    """
    if not 0 <= order <= 3:
        raise ValueError(f"unsupported basis derivative order {order}")
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros(u.shape + (l_max + 1,))
    # rows r = 0..order of [T_l, T_l', ...] for the two previous l
    prev2 = np.zeros((order + 1,) + u.shape)
    prev1 = np.zeros((order + 1,) + u.shape)
    prev2[0] = 1.0
    out[..., 0] = 1.0 if order == 0 else 0.0
    if l_max >= 1:
        prev1[0] = u
        if order >= 1:
            prev1[1] = 1.0
        out[..., 1] = prev1[order]
    for l in range(2, l_max + 1):
        cur = np.zeros_like(prev1)
        for r in range(order + 1):
            cur[r] = 2.0 * u * prev1[r] - prev2[r]
            if r >= 1:
                cur[r] += 2.0 * r * prev1[r - 1]
        out[..., l] = cur[order]
        prev2, prev1 = prev1, cur
    return out


def monomial_basis(u, l_max: int, order: int = 0) -> np.ndarray:
    """u**l differentiated ``order`` times, for l = 0..l_max."""
    if order < 0:
        raise ValueError("negative derivative order")
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros(u.shape + (l_max + 1,))
    for l in range(l_max + 1):
        if l < order:
            continue
        coef = math.perm(l, order)
        out[..., l] = coef * u ** (l - order)
    return out


_BASIS_1D = {"chebyshev": chebyshev_basis, "monomial": monomial_basis}


def graded_multi_indices(dimension: int, count: int) -> list[tuple[int, ...]]:
    """The first ``count`` exponent tuples in graded order (total degree,
    then earlier dimensions carrying higher powers first)."""
    if dimension == 1:
        return [(l,) for l in range(count)]
    found: list[tuple[int, ...]] = []
    degree = 0
    while len(found) < count:
        for a in range(degree, -1, -1):
            found.append((a, degree - a))
            if len(found) == count:
                break
        degree += 1
    return found


def basis_matrix(u: np.ndarray, count: int, kind: str, dorders: tuple[int, ...]) -> np.ndarray:
    """Evaluate the product basis at points ``u`` (shape (m, D)).

    ``dorders`` holds one derivative order per input dimension.  Returns a
    matrix of shape (m, count): one column per basis function, in graded order.
    """
    if kind not in _BASIS_1D:
        raise ValueError(f"unknown basis kind {kind!r}")
    fn = _BASIS_1D[kind]
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    dim = u.shape[1]
    indices = graded_multi_indices(dim, count)
    max_deg = max(max(ix) for ix in indices)
    per_dim = [fn(u[:, d], max_deg, dorders[d]) for d in range(dim)]
    cols = [np.prod([per_dim[d][:, ix[d]] for d in range(dim)], axis=0) for ix in indices]
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# shared machinery: expectation of observables through an encoding circuit,
# differentiated with respect to the input via the parameter-shift rule


def _merge_shifts(*parts):
    merged: dict[int, float] = {}
    for part in parts:
        for g, s in part.items():
            merged[g] = merged.get(g, 0.0) + s
    return merged


def _combine_over_mode(circuit, enc_by_dim, mode, evaluate):
    """Sum shifted evaluations into an input derivative of the given mode.

    ``evaluate(shifts)`` returns an array; the combination applies the
    parameter-shift rule across the encoding gates of the mode's dimensions:
    1 call for the value, 2*n_enc for first derivatives, 4*n_enc**2 for
    second derivatives.
    """
    if len(mode) == 0:
        return evaluate({})
    if len(mode) == 1:
        total = None
        for g in enc_by_dim[mode[0]]:
            s = circuit.gates[g].scale
            term = s * (evaluate({g: SHIFT}) - evaluate({g: -SHIFT})) / 2.0
            total = term if total is None else total + term
        return total
    if len(mode) == 2:
        total = None
        for g in enc_by_dim[mode[0]]:
            for h in enc_by_dim[mode[1]]:
                sg = circuit.gates[g].scale
                sh = circuit.gates[h].scale
                corner = None
                for sign_g in (1.0, -1.0):
                    for sign_h in (1.0, -1.0):
                        shifts = _merge_shifts({g: sign_g * SHIFT}, {h: sign_h * SHIFT})
                        term = sign_g * sign_h * evaluate(shifts)
                        corner = term if corner is None else corner + term
                term = sg * sh * corner / 4.0
                total = term if total is None else total + term
        return total
    raise ValueError(f"unsupported mode {mode}")


def mode_expectations(
    circuit: CircuitSpec,
    bindings: dict,
    batch: int,
    enc_by_dim: dict[int, list[int]],
    mode: tuple[int, ...],
    observables,
    base_shifts=None,
) -> np.ndarray:
    """Expectations (or their input derivatives) for a list of ObservableSum.

    Returns shape (len(observables), batch).
    """
    base = base_shifts or {}

    def evaluate(shifts):
        amps = run_batch(circuit, bindings, batch, shifts=_merge_shifts(base, shifts))
        rows = []
        for obs in observables:
            total = np.zeros(batch)
            for coef, pstring in obs.terms:
                total += coef * pauli_expectation_batch(amps, pstring.letters)
            rows.append(total)
        return np.stack(rows, axis=0)

    return _combine_over_mode(circuit, enc_by_dim, mode, evaluate)


def adjoint_gradients(circuit, bindings, batch, obs, shifts, gate_indices):
    """d<obs>/d(angle) for each listed rotation gate via a backward sweep.

    Numerically identical to the parameter-shift rule (both are exact for
    Pauli rotations); returns shape (len(gate_indices), batch).
    """
    from .statevector import pauli_action

    n = circuit.n_qubits
    amps = run_batch(circuit, bindings, batch, shifts=shifts)
    lam = np.zeros_like(amps)
    for coef, pstring in obs.terms:
        src, pc = pauli_action(pstring.letters)
        lam += coef * pc[None, :] * amps[:, src]
    wanted = set(gate_indices)
    grads = {}
    for i in range(len(circuit.gates) - 1, -1, -1):
        gate = circuit.gates[i]
        if i in wanted:
            q = gate.qubits[0]
            letters = "I" * q + gate.kind[1] + "I" * (n - q - 1)
            src, pc = pauli_action(letters)
            inner = np.einsum("bi,bi->b", np.conj(lam), pc[None, :] * amps[:, src])
            # dU/dtheta U^dag = -i/2 * scale * P on the target qubit
            grads[i] = 2.0 * np.real(-0.5j * inner) * gate.scale
        if i == 0:
            break
        shift = shifts.get(i) if shifts else None
        circuits.unapply_gate_to_batch(amps, n, gate, bindings, shift)
        circuits.unapply_gate_to_batch(lam, n, gate, bindings, shift)
    return np.stack([grads[i] for i in gate_indices], axis=0)


def mode_variational_grads(
    circuit, bindings, batch, enc_by_dim, mode, obs, gate_indices, base_shifts=None
):
    """Gradient of a mode expectation with respect to the listed rotation gates."""
    base = base_shifts or {}

    def evaluate(shifts):
        return adjoint_gradients(
            circuit, bindings, batch, obs, _merge_shifts(base, shifts), gate_indices
        )

    return _combine_over_mode(circuit, enc_by_dim, mode, evaluate)


def runs_per_point(enc_by_dim: dict[int, list[int]], mode: tuple[int, ...]) -> int:
    """Circuit evaluations charged per point for one mode (no caching assumed)."""
    if len(mode) == 0:
        return 1
    if len(mode) == 1:
        return 2 * len(enc_by_dim[mode[0]])
    return 4 * len(enc_by_dim[mode[0]]) * len(enc_by_dim[mode[1]])


def input_param_names(dimension: int) -> tuple[str, ...]:
    return tuple(f"x{d}" for d in range(dimension))


def _enc_by_dim(circuit: CircuitSpec, dimension: int) -> dict[int, list[int]]:
    names = input_param_names(dimension)
    return {d: circuit.gate_indices_for(names[d]) for d in range(dimension)}


def _input_bindings(points: np.ndarray) -> dict[str, np.ndarray]:
    points = np.atleast_2d(points)
    return {f"x{d}": points[:, d] for d in range(points.shape[1])}


# ---------------------------------------------------------------------------
# original protocol


class OriginalModel:
    """Trial function: scale * <C> + shift through a plain tower feature map
    followed by a hardware-efficient ansatz, with C the total-Z cost operator.

    Charges one evaluation per distinct expectation, including every
    parameter-shift evaluation.
    """

    def __init__(self, n_qubits: int, depth: int, eval_points: np.ndarray, counter=None):
        self.n_qubits = n_qubits
        self.eval_points = np.atleast_2d(np.asarray(eval_points, dtype=np.float64))
        self.dimension = self.eval_points.shape[1]
        feature = (
            circuits.tower_feature_map(n_qubits, "x0")
            if self.dimension == 1
            else circuits.split_tower_feature_map(n_qubits, input_param_names(self.dimension))
        )
        self.circuit = circuits.compose(feature, circuits.hea(n_qubits, depth, "theta"))
        self.enc_by_dim = _enc_by_dim(self.circuit, self.dimension)
        self.rotation_params = self.circuit.variational_params
        self.param_names = list(self.rotation_params) + ["theta_sc", "theta_sh"]
        self.n_params = len(self.param_names)
        self.observable = pauli.sum_of_z(n_qubits)
        self.counter = counter

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        theta = rng.uniform(-np.pi, np.pi, size=len(self.rotation_params))
        return np.concatenate([theta, [1.0, 0.0]])

    def _bindings(self, points, theta):
        bindings = _input_bindings(points)
        bindings.update({pid: theta[i] for i, pid in enumerate(self.rotation_params)})
        return bindings

    def _raw_mode(self, points, theta, mode, base_shifts=None):
        return mode_expectations(
            self.circuit,
            self._bindings(points, theta),
            points.shape[0],
            self.enc_by_dim,
            mode,
            [self.observable],
            base_shifts,
        )[0]

    def values(self, params, idx, mode=()):
        points = self.eval_points[idx]
        theta, sc, sh = params[:-2], params[-2], params[-1]
        raw = self._raw_mode(points, theta, mode)
        _charge(self.counter, points.shape[0] * runs_per_point(self.enc_by_dim, mode), PHASE_EPOCH)
        out = sc * raw
        if len(mode) == 0:
            out = out + sh
        return out

    def jacobian(self, params, idx, mode=()):
        points = self.eval_points[idx]
        theta, sc, _sh = params[:-2], params[-2], params[-1]
        n_pts = points.shape[0]
        n_rot = len(self.rotation_params)
        jac = np.zeros((n_pts, self.n_params))
        gate_indices = [self.circuit.gate_indices_for(pid)[0] for pid in self.rotation_params]
        grads = mode_variational_grads(
            self.circuit,
            self._bindings(points, theta),
            n_pts,
            self.enc_by_dim,
            mode,
            self.observable,
            gate_indices,
        )
        jac[:, :n_rot] = sc * grads.T
        # charged per the protocol: a parameter-shift pair for every rotation
        # parameter at every point, on top of the mode's own shift structure
        _charge(
            self.counter,
            n_pts * runs_per_point(self.enc_by_dim, mode) * 2 * n_rot,
            PHASE_EPOCH,
        )
        # the scale/shift columns reuse the already-charged value measurement
        jac[:, -2] = self._raw_mode(points, theta, mode)
        if len(mode) == 0:
            jac[:, -1] = 1.0
        return jac

    def values_at(self, params, points, mode=(), phase=PHASE_INFERENCE):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        theta, sc, sh = params[:-2], params[-2], params[-1]
        raw = self._raw_mode(points, theta, mode)
        _charge(self.counter, points.shape[0] * runs_per_point(self.enc_by_dim, mode), phase)
        out = sc * raw
        if len(mode) == 0:
            out = out + sh
        return out


# ---------------------------------------------------------------------------
# trainable observable: precomputed measurement table + linear head


@dataclass(frozen=True)
class TOTable:
    """Input-derivative expectations of every candidate observable on a fixed
    point set; immutable once built, reusable across training runs."""

    points: np.ndarray                    # (n_pts, D)
    modes: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...]               # Pauli strings in canonical order
    entries: dict                         # mode -> (n_pts, d) array
    provenance: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_observables(self) -> int:
        return len(self.labels)


def encoding_circuit(n_qubits: int, dimension: int, ub_seed: int = DEFAULT_UB_SEED) -> CircuitSpec:
    """Tower feature map followed by the static random basis change."""
    feature = (
        circuits.tower_feature_map(n_qubits, "x0")
        if dimension == 1
        else circuits.split_tower_feature_map(n_qubits, input_param_names(dimension))
    )
    return circuits.compose(feature, circuits.random_basis_unitary(n_qubits, ub_seed))


def precompute_to_table(
    points: np.ndarray,
    modes,
    observable_strings,
    n_qubits: int,
    ub_seed: int = DEFAULT_UB_SEED,
    counter=None,
) -> TOTable:
    """Measure every (mode, point, observable) entry once, before training.

    Charges d * n_points * runs_per_point(mode) per mode, the full pre-training
    quantum cost of the trainable-observable protocol.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    dimension = points.shape[1]
    circuit = encoding_circuit(n_qubits, dimension, ub_seed)
    enc = _enc_by_dim(circuit, dimension)
    observables = [pauli.ObservableSum([(1.0, p)]) for p in observable_strings]
    labels = tuple(p.letters for p in observable_strings)
    bindings = _input_bindings(points)
    entries = {}
    for mode in modes:
        mode = tuple(mode)
        table = mode_expectations(circuit, bindings, points.shape[0], enc, mode, observables)
        entries[mode] = table.T.copy()  # (n_pts, d)
        _charge(counter, len(labels) * points.shape[0] * runs_per_point(enc, mode), PHASE_PRECOMPUTE)
    return TOTable(
        points=points,
        modes=tuple(tuple(m) for m in modes),
        labels=labels,
        entries=entries,
        provenance={
            "n_qubits": n_qubits,
            "dimension": dimension,
            "ub_seed": ub_seed,
            "circuit": json.loads(circuits.circuit_to_json(circuit)),
        },
    )


def save_to_table(table: TOTable, path) -> None:
    arrays = {f"mode_{'_'.join(map(str, m)) or 'value'}": table.entries[m] for m in table.modes}
    header = json.dumps(
        {
            "modes": [list(m) for m in table.modes],
            "labels": list(table.labels),
            "provenance": table.provenance,
        }
    )
    np.savez(path, points=table.points, header=np.frombuffer(header.encode(), dtype=np.uint8), **arrays)


def load_to_table(path) -> TOTable:
    data = np.load(path, allow_pickle=False)
    header = json.loads(bytes(data["header"]).decode())
    modes = tuple(tuple(m) for m in header["modes"])
    entries = {
        m: data[f"mode_{'_'.join(map(str, m)) or 'value'}"] for m in modes
    }
    return TOTable(
        points=data["points"],
        modes=modes,
        labels=tuple(header["labels"]),
        entries=entries,
        provenance=header["provenance"],
    )


class TOModel:
    """Linear trial function over a precomputed table: alpha_s * sum_j alpha_j c_j.

    Training-time evaluation and gradients issue zero quantum evaluations.
    """

    def __init__(self, table: TOTable, counter=None):
        self.table = table
        self.eval_points = table.points
        self.dimension = table.points.shape[1]
        self.param_names = [f"alpha[{s}]" for s in table.labels] + ["alpha_s"]
        self.n_params = len(self.param_names)
        self.counter = counter

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        d = self.table.n_observables
        alpha = rng.normal(0.0, 0.1 / np.sqrt(d), size=d)
        return np.concatenate([alpha, [1.0]])

    def _entries(self, idx, mode):
        mode = tuple(mode)
        if mode not in self.table.entries:
            raise KeyError(f"table holds no mode {mode}; available {self.table.modes}")
        return self.table.entries[mode][idx]

    def values(self, params, idx, mode=()):
        alpha, a_s = params[:-1], params[-1]
        return a_s * (self._entries(idx, mode) @ alpha)

    def jacobian(self, params, idx, mode=()):
        alpha, a_s = params[:-1], params[-1]
        rows = self._entries(idx, mode)
        jac = np.empty((rows.shape[0], self.n_params))
        jac[:, :-1] = a_s * rows
        jac[:, -1] = rows @ alpha
        return jac

    def values_at(self, params, points, mode=(), phase=PHASE_INFERENCE):
        """Off-table inference: fresh simulation, charged d per point."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        prov = self.table.provenance
        circuit = circuits.circuit_from_json(json.dumps(prov["circuit"]))
        enc = _enc_by_dim(circuit, self.dimension)
        observables = [pauli.ObservableSum([(1.0, pauli.PauliString(s))]) for s in self.table.labels]
        rows = mode_expectations(
            circuit, _input_bindings(points), points.shape[0], enc, tuple(mode), observables
        ).T
        _charge(
            self.counter,
            self.table.n_observables * points.shape[0] * runs_per_point(enc, tuple(mode)),
            phase,
        )
        alpha, a_s = params[:-1], params[-1]
        return a_s * (rows @ alpha)


# ---------------------------------------------------------------------------
# flipped shadow model


class FlippedModel:
    """Trial function: out * <C(in * x + shift)> + offset over a fixed
    variational state, with C(u) a 1-local Pauli sum weighted by basis
    functions of u.

    Per epoch it gathers the Pauli expectations of the ansatz state (and of
    its parameter-shifted companions when gradients are needed) once; all
    per-point work is classical.  Charges one shadow-budget's worth of state
    preparations per gathered state, in exact and shadow mode alike.
    """

    AFFINE = ("alpha_out", "alpha_in", "alpha_shift", "alpha_offset")

    def __init__(
        self,
        n_qubits: int,
        depth: int,
        eval_points: np.ndarray,
        basis: str = "chebyshev",
        mode: str = "exact",
        budget: shadows.ShadowBudget | None = None,
        max_order: int = 1,
        counter=None,
    ):
        if mode not in ("exact", "shadow"):
            raise ValueError(f"unknown evaluation mode {mode!r}")
        if basis not in _BASIS_1D:
            raise ValueError(f"unknown basis {basis!r}")
        self.n_qubits = n_qubits
        self.eval_points = np.atleast_2d(np.asarray(eval_points, dtype=np.float64))
        self.dimension = self.eval_points.shape[1]
        self.basis = basis
        self.mode = mode
        self.budget = budget or shadows.ShadowBudget()
        self.snapshots = self.budget.snapshots(self.eval_points.shape[0], max_order)
        self.circuit = circuits.hea(n_qubits, depth, "alpha")
        self.rotation_params = self.circuit.variational_params
        self.param_names = list(self.rotation_params) + list(self.AFFINE)
        self.n_params = len(self.param_names)
        self.pauli_set = pauli.enumerate_k_local(n_qubits, 1)
        self.n_basis = len(self.pauli_set)
        self.n_batches = shadows.default_batches(self.n_basis)
        self.counter = counter
        self._exps: dict = {}

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        angles = rng.uniform(-np.pi, np.pi, size=len(self.rotation_params))
        # out=1, in=1, shift=0, offset=0
        return np.concatenate([angles, [1.0, 1.0, 0.0, 0.0]])

    # -- quantum data ------------------------------------------------------

    def _state_keys(self, need_grad: bool):
        keys = [None]
        if need_grad:
            for k in range(len(self.rotation_params)):
                keys.append((k, +1))
                keys.append((k, -1))
        return keys

    def begin_epoch(self, params, rng: np.random.Generator, need_grad: bool = True, phase=PHASE_EPOCH):
        """Gather <P_l> for the current state and its shifted companions."""
        angles = params[: len(self.rotation_params)]
        keys = self._state_keys(need_grad)
        self._exps = {}
        if self.mode == "exact":
            shifts_per_key = []
            for key in keys:
                if key is None:
                    shifts_per_key.append({})
                else:
                    k, sign = key
                    gate = self.circuit.gate_indices_for(self.rotation_params[k])[0]
                    shifts_per_key.append({gate: sign * SHIFT})
            batch = len(keys)
            shift_arrays: dict[int, np.ndarray] = {}
            for row, shifts in enumerate(shifts_per_key):
                for g, s in shifts.items():
                    shift_arrays.setdefault(g, np.zeros(batch))[row] = s
            bindings = {pid: angles[i] for i, pid in enumerate(self.rotation_params)}
            amps = run_batch(self.circuit, bindings, batch, shifts=shift_arrays)
            table = np.stack(
                [pauli_expectation_batch(amps, p.letters) for p in self.pauli_set], axis=1
            )  # (batch, n_basis)
            for row, key in enumerate(keys):
                self._exps[key] = table[row]
        else:
            for key in keys:
                shifts = {}
                if key is not None:
                    k, sign = key
                    gate = self.circuit.gate_indices_for(self.rotation_params[k])[0]
                    shifts = {gate: sign * SHIFT}
                bindings = {pid: angles[i] for i, pid in enumerate(self.rotation_params)}
                amps = run_batch(self.circuit, bindings, 1, shifts=shifts)
                from .statevector import StateVector

                state = StateVector(self.n_qubits, amps[0])
                shadow = shadows.collect(state, self.snapshots, rng)
                self._exps[key] = np.array(
                    [
                        shadows.estimate_pauli(shadow, p, self.n_batches)
                        for p in self.pauli_set
                    ]
                )
        _charge(self.counter, len(keys) * self.snapshots, phase)

    def _exps_for(self, params, key, rng=None):
        if key not in self._exps:
            # standalone use outside a training loop: gather on demand
            self.begin_epoch(params, rng or np.random.default_rng(0), need_grad=key is not None)
        return self._exps[key]

    # -- classical evaluation ---------------------------------------------

    def _mapped(self, params, points):
        a_in = params[-3]
        a_shift = params[-2]
        return a_in * points + a_shift

    def _dorders(self, mode):
        d = [0] * self.dimension
        for t in mode:
            d[t] += 1
        return tuple(d)

    def _basis(self, u, mode):
        return basis_matrix(u, self.n_basis, self.basis, self._dorders(mode))

    def _combine(self, params, points, mode, exps):
        a_out, a_in = params[-4], params[-3]
        u = self._mapped(params, points)
        j = len(mode)
        series = self._basis(u, mode) @ exps
        out = a_out * a_in**j * series
        if j == 0:
            out = out + params[-1]
        return out

    def values(self, params, idx, mode=(), rng=None):
        points = self.eval_points[idx]
        return self._combine(params, points, tuple(mode), self._exps_for(params, None, rng))

    def jacobian(self, params, idx, mode=(), rng=None):
        mode = tuple(mode)
        points = self.eval_points[idx]
        a_out, a_in = params[-4], params[-3]
        exps = self._exps_for(params, None, rng)
        u = self._mapped(params, points)
        j = len(mode)
        series = self._basis(u, mode) @ exps
        jac = np.zeros((points.shape[0], self.n_params))
        for k in range(len(self.rotation_params)):
            plus = self._exps_for(params, (k, +1), rng)
            minus = self._exps_for(params, (k, -1), rng)
            jac[:, k] = a_out * a_in**j * (self._basis(u, mode) @ ((plus - minus) / 2.0))
        n_rot = len(self.rotation_params)
        jac[:, n_rot + 0] = a_in**j * series  # alpha_out
        extra = np.zeros(points.shape[0])  # sum_d x_d * d/du_d of the series
        shift_extra = np.zeros(points.shape[0])
        for d in range(self.dimension):
            deeper = basis_matrix(
                u, self.n_basis, self.basis, self._dorders(mode + (d,))
            ) @ exps
            extra += points[:, d] * deeper
            shift_extra += deeper
        if j == 0:
            jac[:, n_rot + 1] = a_out * extra  # alpha_in: no prefactor on the value
        else:
            jac[:, n_rot + 1] = a_out * (j * a_in ** (j - 1) * series + a_in**j * extra)
        jac[:, n_rot + 2] = a_out * a_in**j * shift_extra  # alpha_shift
        if j == 0:
            jac[:, n_rot + 3] = 1.0  # alpha_offset
        return jac

    def values_at(self, params, points, mode=(), phase=PHASE_INFERENCE, rng=None):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if None not in self._exps:
            self.begin_epoch(params, rng or np.random.default_rng(0), need_grad=False, phase=phase)
        return self._combine(params, points, tuple(mode), self._exps[None])
