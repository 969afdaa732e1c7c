"""Command-line interface.

Subcommands: ``run`` (single configuration, per-step log), ``sweep``
(regret-rate fits over horizons), ``hardness`` (the three-sequence
lower-bound demonstration), ``convex-check`` (sparse-feedback gradient
bounds), ``validate-scenario`` (file constraint checker).  Commands exit
0 iff every bound they assert holds, and unless ``--no-figures`` is given
the report paths render PNG figures next to the delimited output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import comparator_loss, export_steps_csv, regret_report
from .forecasters import horizon_tuned_eta
from .harness import (
    convex_check,
    format_sweep_report,
    hardness_demo,
    load_config,
    run_batch,
    sweep,
    write_hardness_csv,
    write_summary_csv,
    SweepRow,
)
from .scenarios import (
    check_hardness_constraints,
    load_scenario,
    load_trio,
)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.seeds is not None:
        overrides["n_seeds"] = args.seeds
    if args.eta_mult is not None:
        overrides["eta_mult"] = args.eta_mult
    if args.beta is not None:
        overrides["beta"] = args.beta
    if overrides:
        cfg = type(cfg)(**{**cfg.__dict__, **overrides})
    out = _out_dir(args)
    horizon = cfg.horizons[0]
    scenario = cfg.scenario.with_horizon(horizon).build()
    n = len(cfg.expert_specs)
    eta = min(1.0, cfg.eta_mult * horizon_tuned_eta(horizon, n, cfg.beta))
    seeds = list(range(cfg.n_seeds))
    runs = run_batch(scenario, cfg.forecaster, eta, cfg.expert_specs, seeds)
    comparators = {s.expert_index: comparator_loss(s, scenario, seeds) for s in cfg.expert_specs}
    report = regret_report(runs, comparators)
    export_steps_csv(out / "steps.csv", runs, run_ids=seeds)
    row = SweepRow(horizon=horizon, forecaster=cfg.forecaster, eta=eta,
                   mean_regret=report.regret, stderr=report.stderr, n_seeds=report.n_seeds,
                   forecaster_loss_mean=report.forecaster_loss_mean,
                   comparator_min=min(comparators.values()))
    write_summary_csv(out / "summary.csv", [row])
    with open(out / "report.txt", "w") as fh:
        fh.write(format_sweep_report(cfg, [row], None))
    if not args.no_figures:
        from .plotting import plot_cumulative_losses
        plot_cumulative_losses({f"seed {runs[0].seed}": runs[0].losses},
                               out / "cumulative_loss.png")
    print(f"T={horizon} regret={report.regret:.6g} +- {report.stderr:.3g} "
          f"({report.n_seeds} seeds) -> {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.seeds is not None:
        overrides["n_seeds"] = args.seeds
    if args.eta_mult is not None:
        overrides["eta_mult"] = args.eta_mult
    if args.beta is not None:
        overrides["beta"] = args.beta
    if overrides:
        cfg = type(cfg)(**{**cfg.__dict__, **overrides})
    out = _out_dir(args)
    result = sweep(cfg, out_dir=out, threads=args.threads)
    if not args.no_figures and result.rows:
        from .plotting import plot_sweep
        plot_sweep(result.rows, result.fit, out / "regret_fit.png", title=cfg.name)
    predicted = 1.0 / (2.0 - cfg.beta)
    if result.fit is None:
        print("no fit (need >= 3 positive regret points)")
        return 1
    ok = abs(result.fit.exponent - predicted) <= args.exp_tol
    print(f"fitted exponent {result.fit.exponent:.4f} vs predicted {predicted:.4f} "
          f"(tol {args.exp_tol}) r2={result.fit.r2:.4f} -> {'OK' if ok else 'OUT OF RANGE'}")
    return 0 if ok else 1


def cmd_hardness(args) -> int:
    out = _out_dir(args)
    kinds = tuple(args.forecasters.split(","))
    scenarios = tuple(args.scenarios.split(","))
    rows = hardness_demo(args.t, delta=args.delta, forecaster_kinds=kinds,
                         seeds=args.seeds, scenarios=scenarios)
    write_hardness_csv(out / "hardness.csv", rows)
    lines = [f"hardness demonstration, T={args.t}, delta={args.delta}, seeds={args.seeds}"]
    for r in rows:
        lines.append(f"  {r.forecaster:8s} {r.scenario:4s} avg_regret={r.avg_regret:.5f}"
                     f" +- {r.stderr:.5f}")
    ok = True
    ungated_l1 = [r.avg_regret for r in rows if r.scenario == "L1" and r.forecaster in ("exp3", "uniform")]
    gated_l1 = [r.avg_regret for r in rows if r.scenario == "L1" and r.forecaster == "gated"]
    if ungated_l1:
        if min(ungated_l1) < 0.02:
            ok = False
            lines.append("FAIL: an ungated forecaster fell below average regret 0.02 on L1")
        else:
            lines.append("ungated forecasters on L1 all >= 0.02: OK")
    if gated_l1 and ungated_l1:
        if gated_l1[0] > 0.5 * min(ungated_l1):
            ok = False
            lines.append("FAIL: gated forecaster not below half the ungated regret on L1")
        else:
            lines.append("gated forecaster below half the ungated regret on L1: OK")
    report = "\n".join(lines) + "\n"
    with open(out / "report.txt", "w") as fh:
        fh.write(report)
    print(report, end="")
    if not args.no_figures:
        from .plotting import plot_hardness
        plot_hardness(rows, out / "hardness.png")
    return 0 if ok else 1


def cmd_convex_check(args) -> int:
    out = _out_dir(args)
    alphas = tuple(float(a) for a in args.alphas.split(","))
    result = convex_check(alphas=alphas, horizon=args.t, n_seeds=args.seeds, out_dir=out)
    lines = [f"sparse-feedback gradient check, T={args.t}, seeds={args.seeds}"]
    for a in alphas:
        lines.append(f"  alpha={a:<5g} mean regret={result.mean_regret[a]:10.2f} "
                     f"bound={result.bounds[a]:10.2f} "
                     f"{'OK' if result.mean_regret[a] <= result.bounds[a] else 'VIOLATED'}")
    exp_ok = 0.35 <= result.fit.exponent <= 0.65
    lines.append(f"regret vs 1/alpha exponent: {result.fit.exponent:.4f} "
                 f"({'OK' if exp_ok else 'OUT OF RANGE'})")
    report = "\n".join(lines) + "\n"
    with open(out / "report.txt", "w") as fh:
        fh.write(report)
    print(report, end="")
    if not args.no_figures:
        from .plotting import plot_convex
        plot_convex(result, out / "convex_check.png")
    return 0 if result.bound_ok and exp_ok else 1


def cmd_validate_scenario(args) -> int:
    path = Path(args.file)
    with open(path) as fh:
        obj = json.load(fh)
    if obj.get("kind") == "hardness-trio":
        trio = load_trio(path)
        violations = check_hardness_constraints(trio)
    else:
        try:
            spec = load_scenario(path)
            spec.build()
            violations = []
        except Exception as exc:  # malformed spec or out-of-range losses
            violations = [str(exc)]
    if violations:
        for v in violations:
            print(f"violation: {v}")
        return 1
    print("scenario OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="guidedexperts",
                                     description="Online learning with learning experts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration and log every step")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seeds", type=int, default=None)
    p_run.add_argument("--eta-mult", type=float, default=None)
    p_run.add_argument("--beta", type=float, default=None)
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--no-figures", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="regret-rate sweep over horizons")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--seeds", type=int, default=None)
    p_sweep.add_argument("--eta-mult", type=float, default=None)
    p_sweep.add_argument("--beta", type=float, default=None)
    p_sweep.add_argument("--threads", type=int, default=1)
    p_sweep.add_argument("--exp-tol", type=float, default=0.15,
                         help="allowed |fitted - 1/(2-beta)| on the exponent")
    p_sweep.add_argument("--out", default="out")
    p_sweep.add_argument("--no-figures", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_hard = sub.add_parser("hardness", help="lower-bound construction demo")
    p_hard.add_argument("--t", type=int, default=24000)
    p_hard.add_argument("--delta", type=float, default=0.01)
    p_hard.add_argument("--seeds", type=int, default=50)
    p_hard.add_argument("--forecasters", default="exp3,uniform,gated")
    p_hard.add_argument("--scenarios", default="L1,L2,L3,mix")
    p_hard.add_argument("--out", default="out")
    p_hard.add_argument("--no-figures", action="store_true")
    p_hard.set_defaults(func=cmd_hardness)

    p_cvx = sub.add_parser("convex-check", help="sparse-feedback gradient bounds")
    p_cvx.add_argument("--t", type=int, default=10000)
    p_cvx.add_argument("--seeds", type=int, default=100)
    p_cvx.add_argument("--alphas", default="1.0,0.5,0.25,0.1")
    p_cvx.add_argument("--out", default="out")
    p_cvx.add_argument("--no-figures", action="store_true")
    p_cvx.set_defaults(func=cmd_convex_check)

    p_val = sub.add_parser("validate-scenario", help="check a scenario or trio file")
    p_val.add_argument("--file", required=True)
    p_val.set_defaults(func=cmd_validate_scenario)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
