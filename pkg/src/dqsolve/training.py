"""Adam optimizer, the unified training loop and the circuit-evaluation
accountant.

The accountant realizes each protocol's cost model:

* original -- one charge per distinct expectation evaluation, including
  every parameter-shift evaluation, so the total grows like epochs x points;
* trainable observable -- charges only while the measurement table is built
  (and per off-table inference point); the training phase is provably free;
* flipped shadow -- one charge per shadow snapshot; the per-epoch budget
  depends on the grid size only through its logarithm.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import problems as problems_mod
from .models import PHASE_EPOCH, PHASE_INFERENCE, PHASE_PRECOMPUTE


class NumericalFailure(RuntimeError):
    """Raised when the loss or a gradient stops being finite."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class EvalCounter:
    """Monotone count of charged quantum circuit executions, by phase."""

    PHASES = (PHASE_PRECOMPUTE, PHASE_EPOCH, PHASE_INFERENCE)

    def __init__(self):
        self.breakdown = {phase: 0 for phase in self.PHASES}
        self._paused = 0

    @property
    def total(self) -> int:
        return sum(self.breakdown.values())

    def charge(self, n: int, phase: str = PHASE_EPOCH) -> None:
        if self._paused:
            return
        if n < 0:
            raise ValueError("charges are nonnegative")
        if phase not in self.breakdown:
            raise ValueError(f"unknown phase {phase!r}")
        self.breakdown[phase] += int(n)

    @contextmanager
    def paused(self):
        """Suspend charging for diagnostics (metric evaluation, plotting)."""
        self._paused += 1
        try:
            yield self
        finally:
            self._paused -= 1

    def snapshot(self) -> dict:
        return dict(self.breakdown, total=self.total)


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray):
    """One bias-corrected Adam update; returns (state, new params)."""
    if not np.all(np.isfinite(grads)):
        raise NumericalFailure("non-finite gradient in Adam update")
    if state.m is None:
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
    if state.m.shape != params.shape:
        raise ValueError("moment vectors do not match the parameter vector")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return state, params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    loss_de: float
    loss_bc: float
    mos: float | None
    cum_evals: int


@dataclass
class TrainTrace:
    records: list[EpochRecord]
    final_params: list[np.ndarray]
    config: dict
    seed: int
    counter: dict = field(default_factory=dict)


def loss_gradients(problem, trial_models, params_list):
    """Gradient of the training loss for every model, via the chain rule over
    residual partial derivatives and model Jacobians."""
    F, bc_values = problems_mod.gather_values(problem, trial_models, params_list)
    total, l_de, l_bc = problems_mod.loss_from_values(problem, F, bc_values)

    m = problem.grid.size
    grid_idx = np.arange(m)
    residuals = problem.residual(problem.grid.points, F)
    partials = problem.residual_partials(problem.grid.points, F)
    n_eq = residuals.shape[0]

    # dL/dF[(fn, mode)] over the grid; the set of Jacobians evaluated is
    # fixed by the residual's structure, not by runtime values, so charge
    # totals are deterministic
    dl_df = {key: np.zeros(m) for key in F}
    jac_modes = {fn: set() for fn in range(problem.n_functions)}
    for (eq, fn, mode), part in partials.items():
        dl_df[(fn, mode)] += (2.0 / (m * n_eq)) * residuals[eq] * part
        jac_modes[fn].add(mode)

    grads = []
    for fn, (model, params) in enumerate(zip(trial_models, params_list)):
        grad = np.zeros(model.n_params)
        for mode in sorted(jac_modes[fn], key=lambda t: (len(t), t)):
            jac = model.jacobian(params, grid_idx, mode)
            grad += dl_df[(fn, mode)] @ jac
        bc_idx = [m + t for t, term in enumerate(problem.boundary) if term.function == fn]
        if bc_idx:
            targets = np.array(
                [problem.boundary[t - m].target for t in bc_idx]
            )
            vals = bc_values[[t - m for t in bc_idx]]
            jac = model.jacobian(params, np.array(bc_idx), ())
            grad += (2.0 * (vals - targets)) @ jac
        grads.append(grad)
    return (total, l_de, l_bc), F, grads


def train(
    problem,
    trial_models,
    config: dict,
    rng: np.random.Generator,
    counter: EvalCounter | None = None,
) -> TrainTrace:
    """Run the epoch loop for any model variant.

    ``config`` keys used here: epochs, lr, stop_loss (early-stop threshold),
    patience (epochs without 1% relative improvement), seed (echoed).
    Models whose quantum data is gathered per epoch expose ``begin_epoch``.
    """
    epochs = int(config.get("epochs", 1000))
    lr = float(config.get("lr", 0.05))
    stop_loss = config.get("stop_loss", 1e-6)
    patience = int(config.get("patience", 200))
    track_mos = problem.analytic is not None

    params_list = [m.init_params(rng) for m in trial_models]
    adam_states = [AdamState(lr=lr) for _ in trial_models]
    records: list[EpochRecord] = []
    best = np.inf
    stale = 0

    for epoch in range(epochs):
        for i, model in enumerate(trial_models):
            hook = getattr(model, "begin_epoch", None)
            if hook is not None:
                hook(params_list[i], rng, need_grad=True)
        try:
            (total, l_de, l_bc), F, grads = loss_gradients(problem, trial_models, params_list)
        except NumericalFailure as exc:
            exc.trace = TrainTrace(records, params_list, dict(config), int(config.get("seed", 0)))
            raise
        if not np.isfinite(total):
            raise NumericalFailure(
                f"loss became non-finite at epoch {epoch}",
                TrainTrace(records, params_list, dict(config), int(config.get("seed", 0))),
            )
        mos_value = problems_mod.mos_from_values(problem, F) if track_mos else None
        records.append(
            EpochRecord(
                epoch=epoch,
                loss=total,
                loss_de=l_de,
                loss_bc=l_bc,
                mos=mos_value,
                cum_evals=counter.total if counter else 0,
            )
        )
        for i in range(len(trial_models)):
            adam_states[i], params_list[i] = adam_step(adam_states[i], params_list[i], grads[i])
        if stop_loss is not None and total < stop_loss:
            break
        if total < best * 0.99:
            best = total
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break

    return TrainTrace(
        records=records,
        final_params=params_list,
        config=dict(config),
        seed=int(config.get("seed", 0)),
        counter=counter.snapshot() if counter else {},
    )


# ---------------------------------------------------------------------------
# closed-form cost model


def counting_policy(variant: str) -> dict:
    """Human-readable charge rules per model variant."""
    policies = {
        "original": {
            "precompute": "none",
            "per_epoch": "for every mode and evaluation point: E(mode) value runs "
            "plus 2 * E(mode) runs per rotation parameter (parameter-shift pairs); "
            "E(()) = 1, E(first derivative) = 2*n_enc, E(second) = 4*n_enc**2",
            "inference": "1 evaluation per point",
        },
        "to": {
            "precompute": "d * n_table_points * E(mode), summed over table modes",
            "per_epoch": "0 -- training consumes the precomputed table",
            "inference": "d * E(mode) per off-table point",
        },
        "fs": {
            "precompute": "none",
            "per_epoch": "(1 + 2 * n_rotation_params) * M snapshots, "
            "M = ceil(c0 * 3**w_max * log2(m*(k+1)) / eps**exponent); independent of m "
            "except through log2(m)",
            "inference": "M snapshots (one shadow covers every requested point)",
        },
    }
    if variant not in policies:
        raise ValueError(f"unknown variant {variant!r}")
    return policies[variant]


def expected_original_epoch_charge(problem, model, fn: int = 0) -> int:
    """Closed-form per-epoch charge for the original protocol (hand-checkable):
    values at every mode, parameter-shift Jacobians at the modes the residual
    actually couples to, plus the boundary-condition evaluations."""
    from .models import runs_per_point

    m = problem.grid.size
    p_rot = len(model.rotation_params)
    probe = {
        (f, mode): np.zeros(m)
        for f in range(problem.n_functions)
        for mode in problem.all_modes
    }
    partial_keys = problem.residual_partials(problem.grid.points, probe).keys()
    jac_modes = {mode for (_eq, f, mode) in partial_keys if f == fn}
    total = 0
    for mode in problem.all_modes:
        total += m * runs_per_point(model.enc_by_dim, mode)
    for mode in jac_modes:
        total += m * runs_per_point(model.enc_by_dim, mode) * 2 * p_rot
    n_bc = sum(1 for t in problem.boundary if t.function == fn)
    total += n_bc * (1 + 2 * p_rot)
    return total


def expected_to_precompute_charge(problem, n_observables: int, n_enc_by_dim) -> int:
    """d * n_table_points * sum over modes of E(mode)."""
    n_pts = problem.eval_points.shape[0]
    total = 0
    for mode in problem.all_modes:
        if len(mode) == 0:
            runs = 1
        elif len(mode) == 1:
            runs = 2 * n_enc_by_dim[mode[0]]
        else:
            runs = 4 * n_enc_by_dim[mode[0]] * n_enc_by_dim[mode[1]]
        total += runs
    return n_observables * n_pts * total


def expected_fs_epoch_charge(model) -> int:
    return (1 + 2 * len(model.rotation_params)) * model.snapshots
