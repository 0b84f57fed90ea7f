"""Command-line front end: single runs, model comparisons, cost inspection
and a quick invariant self-test.

Artifacts per run: ``trace.csv`` (per-epoch loss / measure-of-success /
cumulative evaluation count), ``solution.csv`` (trained solution on a dense
grid, with the reference solution where one exists), ``summary.json``
(config echo, seed, final metrics, counter breakdown) and, on request, a
small self-contained ``chart.svg``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import models, pauli, problems, shadows, training
from .config import (
    ConfigurationError,
    RunConfig,
    apply_overrides,
    config_to_text,
    default_config,
    load_config,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DENSE_1D = 200
DENSE_2D = 50   # per axis


# ---------------------------------------------------------------------------
# experiment assembly


def build_problem(config: RunConfig):
    factory = problems.PROBLEMS[config.problem]
    if config.grid_m:
        return factory(config.grid_m)
    return factory()


def observable_set(config: RunConfig):
    if config.observables == "loc1":
        return pauli.enumerate_k_local(config.n_qubits, 1)
    if config.observables == "loc2":
        return pauli.enumerate_k_local(config.n_qubits, 2)
    return pauli.all_strings(config.n_qubits)


def shadow_budget(config: RunConfig) -> shadows.ShadowBudget:
    return shadows.ShadowBudget(
        c0=config.shadow_c0,
        eps=config.shadow_eps,
        exponent=config.shadow_exponent,
        w_max=config.shadow_w_max,
    )


def build_models(config: RunConfig, problem, counter):
    """One trial model per dependent variable; TO variants share one table."""
    if config.variant == "original":
        return [
            models.OriginalModel(config.n_qubits, config.depth, problem.eval_points, counter=counter)
            for _ in range(problem.n_functions)
        ]
    if config.variant == "to":
        table = models.precompute_to_table(
            problem.eval_points,
            problem.all_modes,
            observable_set(config),
            config.n_qubits,
            ub_seed=config.ub_seed,
            counter=counter,
        )
        return [models.TOModel(table, counter=counter) for _ in range(problem.n_functions)]
    return [
        models.FlippedModel(
            config.n_qubits,
            config.depth,
            problem.eval_points,
            basis=config.basis,
            mode=config.fs_mode,
            budget=shadow_budget(config),
            max_order=problem.order,
            counter=counter,
        )
        for _ in range(problem.n_functions)
    ]


def train_config(config: RunConfig) -> dict:
    return {
        "epochs": config.epochs,
        "lr": config.lr,
        "stop_loss": config.stop_loss,
        "patience": config.patience,
        "seed": config.seed,
    }


def execute(config: RunConfig):
    """Run precompute (if any) + training; returns (problem, models, trace, counter)."""
    problem = build_problem(config)
    counter = training.EvalCounter()
    trial_models = build_models(config, problem, counter)
    rng = np.random.default_rng(config.seed)
    trace = training.train(problem, trial_models, train_config(config), rng, counter=counter)
    return problem, trial_models, trace, counter


# ---------------------------------------------------------------------------
# artifacts


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def trace_csv(trace: training.TrainTrace) -> str:
    lines = ["epoch,loss,loss_de,loss_bc,mos,cum_evals"]
    for r in trace.records:
        lines.append(
            f"{r.epoch},{_fmt(r.loss)},{_fmt(r.loss_de)},{_fmt(r.loss_bc)},"
            f"{_fmt(r.mos)},{r.cum_evals}"
        )
    return "\n".join(lines) + "\n"


def dense_points(problem) -> np.ndarray:
    bounds = problem.grid.bounds
    if problem.dimension == 1:
        lo, hi = bounds[0]
        return np.linspace(lo, hi, DENSE_1D)[:, None]
    axes = [np.linspace(lo, hi, DENSE_2D) for lo, hi in bounds]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def solution_csv(problem, trial_models, trace: training.TrainTrace) -> str:
    points = dense_points(problem)
    coords = [f"x{d}" for d in range(problem.dimension)]
    columns = list(coords)
    data = [points[:, d] for d in range(problem.dimension)]
    for fn, (model, params) in enumerate(zip(trial_models, trace.final_params)):
        values = model.values_at(params, points, (), phase=models.PHASE_INFERENCE)
        columns.append(f"f{fn}_model")
        data.append(values)
        if problem.analytic is not None:
            exact = problem.analytic[fn](points)
            columns.extend([f"f{fn}_exact", f"f{fn}_sq_err"])
            data.extend([exact, (values - exact) ** 2])
    lines = [",".join(columns)]
    for row in range(points.shape[0]):
        lines.append(",".join(_fmt(col[row]) for col in data))
    return "\n".join(lines) + "\n"


def summary_doc(config: RunConfig, problem, trace: training.TrainTrace, counter) -> dict:
    final = trace.records[-1]
    return {
        "config": dataclasses.asdict(config),
        "problem": {
            "name": problem.name,
            "dimension": problem.dimension,
            "n_functions": problem.n_functions,
            "grid_size": problem.grid.size,
            "n_boundary_terms": len(problem.boundary),
        },
        "seed": trace.seed,
        "epochs_run": len(trace.records),
        "final": {
            "loss": final.loss,
            "loss_de": final.loss_de,
            "loss_bc": final.loss_bc,
            "mos": final.mos,
        },
        "counter": counter.snapshot(),
        "final_params": [p.tolist() for p in trace.final_params],
    }


def loss_chart_svg(trace: training.TrainTrace) -> str:
    """Minimal log-scale loss (and MoS) line chart; no plotting dependency."""
    width, height, pad = 640, 400, 50
    records = trace.records

    def path_for(values):
        vals = np.array([max(v, 1e-16) for v in values])
        ys = np.log10(vals)
        lo, hi = ys.min(), ys.max()
        span = (hi - lo) or 1.0
        pts = []
        for i, y in enumerate(ys):
            px = pad + (width - 2 * pad) * (i / max(1, len(ys) - 1))
            py = height - pad - (height - 2 * pad) * ((y - lo) / span)
            pts.append(f"{px:.1f},{py:.1f}")
        return " ".join(pts)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" '
        f'points="{path_for([r.loss for r in records])}"/>',
    ]
    if records[0].mos is not None:
        parts.append(
            f'<polyline fill="none" stroke="#d62728" stroke-width="1.5" '
            f'stroke-dasharray="4 3" points="{path_for([r.mos for r in records])}"/>'
        )
        parts.append(
            f'<text x="{pad}" y="20" font-family="sans-serif" font-size="13">'
            "loss (solid), measure of success (dashed), log scale</text>"
        )
    else:
        parts.append(
            f'<text x="{pad}" y="20" font-family="sans-serif" font-size="13">'
            "loss, log scale</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_run_artifacts(config: RunConfig, problem, trial_models, trace, counter) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(trace_csv(trace))
    (out / "solution.csv").write_text(solution_csv(problem, trial_models, trace))
    (out / "summary.json").write_text(
        json.dumps(summary_doc(config, problem, trace, counter), indent=2) + "\n"
    )
    (out / "config.ini").write_text(config_to_text(config))
    if config.chart:
        (out / "chart.svg").write_text(loss_chart_svg(trace))
    return out


# ---------------------------------------------------------------------------
# subcommands


def _resolve_config(args) -> RunConfig:
    overrides = {}
    for key in (
        "problem", "variant", "observables", "basis", "fs_mode", "n_qubits",
        "depth", "epochs", "lr", "stop_loss", "patience", "seed", "ub_seed",
        "grid_m", "shadow_c0", "shadow_eps", "shadow_exponent", "shadow_w_max",
        "out_dir", "chart",
    ):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if args.config:
        base = load_config(args.config)
    else:
        problem = overrides.get("problem", "damped_osc")
        variant = overrides.get("variant", "to")
        base = default_config(problem, variant)
    return apply_overrides(base, overrides)


def cmd_run(args) -> int:
    config = _resolve_config(args)
    if getattr(args, "order_check", False):
        from .differentiation import self_check

        report = self_check(np.random.default_rng(config.seed))
        print(f"derivative self-check: first {report['first']:.2e}, second {report['second']:.2e}")
    problem, trial_models, trace, counter = execute(config)
    out = write_run_artifacts(config, problem, trial_models, trace, counter)
    final = trace.records[-1]
    mos_text = f" mos={final.mos:.3e}" if final.mos is not None else ""
    print(
        f"{config.problem}/{config.variant}: epochs={len(trace.records)} "
        f"loss={final.loss:.3e}{mos_text} evals={counter.total} -> {out}"
    )
    return EXIT_OK


def parse_model_spec(spec: str) -> tuple[str, dict]:
    """Parse a compare entry like 'original', 'to-loc2', 'fs-exact'."""
    parts = spec.split("-")
    variant = parts[0]
    overrides: dict = {}
    if variant == "to" and len(parts) > 1:
        overrides["observables"] = parts[1]
    elif variant == "fs" and len(parts) > 1:
        overrides["fs_mode"] = parts[1]
    elif len(parts) > 1:
        raise ConfigurationError(f"unknown model spec {spec!r}")
    return variant, overrides


def cmd_compare(args) -> int:
    specs = args.models
    if len(specs) < 2:
        raise ConfigurationError("compare needs at least two model specs")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    merged = ["model,epoch,loss,mos,cum_evals"]
    totals = {}
    d_max = 0
    finals = {}
    for spec in specs:
        variant, overrides = parse_model_spec(spec)
        config = default_config(args.problem, variant)
        overrides["seed"] = args.seed
        overrides["out_dir"] = str(out / spec)
        if args.epochs is not None:
            overrides["epochs"] = args.epochs
        config = apply_overrides(config, overrides)
        problem, trial_models, trace, counter = execute(config)
        write_run_artifacts(config, problem, trial_models, trace, counter)
        for r in trace.records:
            merged.append(f"{spec},{r.epoch},{_fmt(r.loss)},{_fmt(r.mos)},{r.cum_evals}")
        totals[spec] = counter.total
        finals[spec] = trace.records[-1]
        if variant == "to":
            d_max = max(d_max, trial_models[0].table.n_observables)
        mos_text = f" mos={finals[spec].mos:.3e}" if finals[spec].mos is not None else ""
        print(f"{spec}: epochs={len(trace.records)} loss={finals[spec].loss:.3e}{mos_text} "
              f"evals={counter.total}")
    (out / "merged.csv").write_text("\n".join(merged) + "\n")
    report = [f"problem: {args.problem}", f"seed: {args.seed}"]
    if d_max:
        report.append(f"d_max (largest trainable-observable candidate set): {d_max}")
    baseline = next((s for s in specs if s.split('-')[0] == "original"), None)
    if baseline:
        for spec in specs:
            if spec == baseline:
                continue
            ratio = totals[baseline] / max(1, totals[spec])
            report.append(f"saving ratio {baseline}/{spec}: {ratio:.2f}")
            print(f"saving ratio {baseline}/{spec}: {ratio:.2f}")
    (out / "report.txt").write_text("\n".join(report) + "\n")
    return EXIT_OK


def cmd_count(args) -> int:
    config = _resolve_config(args)
    problem = build_problem(config)
    policy = training.counting_policy(config.variant)
    print(f"{config.problem}/{config.variant} cost model:")
    for phase, rule in policy.items():
        print(f"  {phase}: {rule}")
    if config.variant == "original":
        model = models.OriginalModel(config.n_qubits, config.depth, problem.eval_points)
        per_epoch = training.expected_original_epoch_charge(problem, model)
        print(f"  per-epoch charge at m={problem.grid.size}: {per_epoch}")
        print(f"  {config.epochs} epochs: {per_epoch * config.epochs}")
    elif config.variant == "to":
        d = len(observable_set(config))
        enc = {dim: [0] * (config.n_qubits // problem.dimension) for dim in range(problem.dimension)}
        total = 0
        for mode in problem.all_modes:
            total += problem.eval_points.shape[0] * models.runs_per_point(enc, mode)
        print(f"  precompute charge (d={d}): {d * total}")
        print("  per-epoch charge: 0")
    else:
        budget = shadow_budget(config)
        m_snap = budget.snapshots(problem.eval_points.shape[0], problem.order)
        n_rot = 3 * config.n_qubits * config.depth
        print(f"  snapshot budget M: {m_snap}")
        print(f"  per-epoch charge (1 + 2*{n_rot}) * M: {(1 + 2 * n_rot) * m_snap}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0

    from .differentiation import self_check

    report = self_check(rng)
    ok = report["first"] < 1e-6 and report["second"] < 1e-4
    failures += not ok
    print(f"[{'ok' if ok else 'FAIL'}] parameter-shift vs finite differences: "
          f"first {report['first']:.2e}, second {report['second']:.2e}")

    counts = (
        len(pauli.enumerate_k_local(4, 1)),
        len(pauli.enumerate_k_local(4, 2)),
        len(pauli.all_strings(4)),
    )
    ok = counts == (13, 67, 256)
    failures += not ok
    print(f"[{'ok' if ok else 'FAIL'}] Pauli set sizes (13, 67, 256): {counts}")

    for name in ("damped_osc", "coupled", "twod_linear"):
        problem = problems.PROBLEMS[name]()
        F = {}
        for fn in range(problem.n_functions):
            for mode in problem.all_modes:
                F[(fn, mode)] = problems.analytic_mode_values(problem, fn, mode)
        res = problem.residual(problem.grid.points, F)
        worst = np.abs(res).max()
        ok = worst < 1e-9
        failures += not ok
        print(f"[{'ok' if ok else 'FAIL'}] {name} reference solution residual: {worst:.2e}")

    poles = problems.burgers_poles()
    ok = len(poles) == 1 and abs(poles[0] - 0.2025) < 1e-2
    failures += not ok
    print(f"[{'ok' if ok else 'FAIL'}] viscous-flow closed form has a pole in (0,1) "
          f"near x = {poles[0]:.4f}" if poles else "[FAIL] expected a pole in (0,1)")

    from .circuits import hea, run
    from .statevector import expectation

    circ = hea(4, 1)
    bindings = {pid: float(rng.uniform(-np.pi, np.pi)) for pid in circ.variational_params}
    psi = run(circ, bindings)
    shadow = shadows.collect(psi, 20000, rng)
    z0 = pauli.PauliString("ZIII")
    err = abs(shadows.estimate_pauli(shadow, z0) - expectation(psi, z0))
    ok = err < 0.1
    failures += not ok
    print(f"[{'ok' if ok else 'FAIL'}] shadow estimate within 0.1 of exact: err={err:.3f}")

    print("self-test:", "all checks passed" if failures == 0 else f"{failures} check(s) FAILED")
    return EXIT_OK if failures == 0 else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# argument parsing


def _add_config_flags(sub):
    sub.add_argument("--config", help="configuration file (INI, [run] section)")
    sub.add_argument("--problem", choices=list(problems.PROBLEMS))
    sub.add_argument("--variant", "--model", dest="variant", choices=("original", "to", "fs"))
    sub.add_argument("--obs", dest="observables", choices=("loc1", "loc2", "all"))
    sub.add_argument("--basis", choices=("chebyshev", "monomial"))
    sub.add_argument("--fs-mode", dest="fs_mode", choices=("exact", "shadow"))
    sub.add_argument("--n-qubits", dest="n_qubits", type=int)
    sub.add_argument("--depth", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--stop-loss", dest="stop_loss", type=float)
    sub.add_argument("--patience", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--ub-seed", dest="ub_seed", type=int)
    sub.add_argument("--grid-m", dest="grid_m", type=int)
    sub.add_argument("--shadow-c0", dest="shadow_c0", type=float)
    sub.add_argument("--shadow-eps", dest="shadow_eps", type=float)
    sub.add_argument("--shadow-exponent", dest="shadow_exponent", type=int)
    sub.add_argument("--shadow-w-max", dest="shadow_w_max", type=int)
    sub.add_argument("--out", dest="out_dir")
    sub.add_argument("--chart", action="store_const", const=True, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dqsolve",
        description="Differential-equation solving on differentiable quantum "
        "circuits with instrumented evaluation accounting.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="train one model and write artifacts")
    _add_config_flags(p_run)
    p_run.add_argument("--order-check", action="store_true",
                       help="run the derivative self-test before training")
    p_run.set_defaults(func=cmd_run)

    p_cmp = subs.add_parser("compare", help="train several models on one problem")
    p_cmp.add_argument("--problem", required=True, choices=list(problems.PROBLEMS))
    p_cmp.add_argument("--models", nargs="+", required=True,
                       help="e.g. original to-loc2 to-loc1 fs-exact")
    p_cmp.add_argument("--seed", type=int, default=0)
    p_cmp.add_argument("--epochs", type=int, default=None,
                       help="cap the epoch budget of every member run")
    p_cmp.add_argument("--out", dest="out_dir", default="runs/compare")
    p_cmp.set_defaults(func=cmd_compare)

    p_count = subs.add_parser("count", help="print the cost model without training")
    _add_config_flags(p_count)
    p_count.set_defaults(func=cmd_count)

    p_self = subs.add_parser("selftest", help="run the quick invariant checks")
    p_self.add_argument("--seed", type=int, default=0)
    p_self.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except training.NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
