"""Command-line entry points.

Commands: simulate, sweep, oracle, gen-rsl, gen-slices, train-pql,
calibrate. Options can come from a flat INI-style config file (section
[run]); command-line flags override file values, and the AWARESAC_SEED
environment variable is the seed fallback.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import glob
import json
import os
import sys
from pathlib import Path

from . import engine, training
from .errors import ConfigError, SliceSimError
from .forecast import (
    DEFAULT_HORIZON,
    calibrate_variance,
    flat_calibration,
    load_external_forecasts,
)
from .link_capacity import (
    bundled_acm_table,
    coefficient_of_variation,
    export_rsl_trace,
    generate_synthetic_rsl,
    ingest_rsl_trace,
    load_acm_table,
    normalize_to_table,
)
from .oracle import dump_solution, solve_oracle
from .policies import (
    QLearningPolicy,
    QTable,
    admit_all_policy,
    locally_optimal_policy,
    naive_greedy_policy,
    random_policy,
)
from .scenario import load_bundle, scenario_from_trace, write_bundle
from .slicing import (
    build_catalog,
    default_catalog,
    export_slice_requests,
    generate_slice_requests,
    load_flows,
    load_slice_requests,
)

POLICY_NAMES = ("random", "naive_greedy", "locally_optimal", "pql",
                "naive_ql", "admit_all")
CV_BUCKET_EDGES = (0.2, 0.6)


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("AWARESAC_SEED")
    if env is not None:
        return int(env)
    return 0


def _load_config(path) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path!r} not found")
    merged: dict = {}
    for section in parser.sections():
        merged.update(dict(parser[section]))
    merged.update(dict(parser.defaults()))
    return merged


def _apply_config(args, parser_defaults: dict) -> None:
    """Fill unset args from the config file; flags keep precedence."""
    if not getattr(args, "config", None):
        return
    conf = _load_config(args.config)
    for key, value in conf.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None and attr in parser_defaults:
            setattr(args, attr, value)


def _acm_table(ref: str):
    if ref in ("af60", "wave"):
        return bundled_acm_table(ref)
    return load_acm_table(Path(ref).read_bytes(), name=Path(ref).stem)


def _persistence_calibration(rsl, horizon: int):
    """Calibrate persistence-forecast residuals directly from a trace."""
    n = len(rsl)
    if n < 30 + horizon:
        return flat_calibration(1.0, horizon)
    pairs = []
    for h in range(1, horizon + 1):
        pairs.append([(rsl[t], rsl[t + h]) for t in range(n - h)])
    return calibrate_variance(pairs)


def _build_policy(name: str, args, horizon: int):
    if name == "random":
        return random_policy()
    if name == "naive_greedy":
        return naive_greedy_policy()
    if name == "admit_all":
        return admit_all_policy()
    if name == "locally_optimal":
        return locally_optimal_policy(int(getattr(args, "lo_threshold", None) or 8))
    if name in ("pql", "naive_ql"):
        qtable = QTable()
        qtable_path = getattr(args, "qtable", None)
        if qtable_path:
            qtable = QTable.load(qtable_path)
        policy = QLearningPolicy(
            horizon=horizon,
            lam=float(getattr(args, "risk_lambda", None) or 0.5),
            predictive=(name == "pql"),
            training=False,
            epsilon=0.0,
            qtable=qtable,
        )
        policy.name = name
        return policy
    raise ConfigError(f"policy: unknown policy {name!r}; choose from {POLICY_NAMES}")


def _scenario_from_args(args, horizon: int):
    table = _acm_table(args.acm or "af60")
    trace = ingest_rsl_trace(Path(args.trace).read_bytes(), link_id=Path(args.trace).stem)
    if getattr(args, "normalize", False):
        trace = normalize_to_table(trace, table)
    kappa = float(args.kappa or 0.2)
    catalog = default_catalog(kappa=kappa)
    if getattr(args, "srs", None):
        requests = load_slice_requests(Path(args.srs).read_bytes(), catalog)
    elif getattr(args, "flows", None):
        flows = load_flows(Path(args.flows).read_bytes())
        requests = generate_slice_requests(flows, catalog)
    else:
        raise ConfigError("srs/flows: one of --srs or --flows is required")
    name = getattr(args, "name", None) or Path(args.trace).stem
    scenario = scenario_from_trace(
        name, trace, table, requests,
        delta=float(args.delta or 1e-6),
    )
    return scenario, table, trace


def _forecaster_for(args, table, scenario, horizon: int):
    if getattr(args, "forecasts", None):
        provider = load_external_forecasts(Path(args.forecasts).read_bytes())
        calib = _persistence_calibration(scenario.rsl or (), horizon)
        fallback = engine.NaiveGaussianForecaster(table, calib, horizon)
        return engine.ExternalForecaster(provider, table, fallback=fallback)
    if scenario.rsl is not None:
        calib = _persistence_calibration(scenario.rsl, horizon)
        return engine.NaiveGaussianForecaster(table, calib, horizon)
    return engine.PersistencePmfForecaster(horizon)


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    horizon = int(args.horizon or DEFAULT_HORIZON)
    scenario, table, trace = _scenario_from_args(args, horizon)
    policy = _build_policy(args.policy or "naive_greedy", args, horizon)
    forecaster = _forecaster_for(args, table, scenario, horizon)

    result = engine.run(scenario, policy, forecaster=forecaster, seed=seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    engine.dump_result(result, out / "result.json", out / "slots.csv")
    report = engine.metrics(result, rsl=trace)
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump({
            "revenue": report.revenue,
            "total_reward": report.total_reward,
            "total_penalty": report.total_penalty,
            "admitted_count": report.admitted_count,
            "pct_negative_revenue": report.pct_negative_revenue,
            "mean_cv": report.mean_cv,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _cv_bucket(mean_cv, edges) -> str:
    if mean_cv is None:
        return ""
    lo, hi = edges
    if mean_cv < lo:
        return f"<{lo:g}"
    if mean_cv <= hi:
        return f"[{lo:g},{hi:g}]"
    return f">{hi:g}"


def cmd_sweep(args) -> int:
    seed = _resolve_seed(args)
    horizon = int(args.horizon or DEFAULT_HORIZON)
    edges = CV_BUCKET_EDGES
    if args.cv_edges:
        parts = [float(v) for v in args.cv_edges.split(",")]
        if len(parts) != 2 or parts[0] >= parts[1]:
            raise ConfigError("cv-edges: expected two increasing numbers")
        edges = tuple(parts)
    paths = sorted(glob.glob(args.scenarios)) if args.scenarios else []
    policies = [p.strip() for p in (args.policies or "").split(",") if p.strip()]
    for p in policies:
        if p not in POLICY_NAMES:
            raise ConfigError(f"policies: unknown policy {p!r}")

    rows = []
    for path in paths:
        scenario = load_bundle(path)
        table = _acm_table(args.acm or "af60")
        forecaster = _forecaster_for(args, table, scenario, horizon)
        mean_cv = None
        if scenario.rsl is not None and len(scenario.rsl) >= 60:
            import numpy as np
            from .link_capacity import RslTrace
            trace = RslTrace(link_id=scenario.name,
                             timestamps=tuple(range(len(scenario.rsl))),
                             rsl=scenario.rsl)
            mean_cv = float(np.mean(coefficient_of_variation(trace, 60)))
        bucket = _cv_bucket(mean_cv, edges)

        admit_all = engine.run(scenario, admit_all_policy(), forecaster=None, seed=seed)
        greedy = engine.run(scenario, naive_greedy_policy(), forecaster=None, seed=seed)
        references = {"admit_all": admit_all, "naive_greedy": greedy}
        for ref_name, ref_result in references.items():
            report = engine.metrics(ref_result, baseline_result=greedy,
                                    admit_all_result=admit_all)
            rows.append((scenario.name, ref_name, bucket, report, ""))
        for pname in policies:
            if pname in references:
                continue
            try:
                policy = _build_policy(pname, args, horizon)
                result = engine.run(scenario, policy, forecaster=forecaster, seed=seed)
                report = engine.metrics(result, baseline_result=greedy,
                                        admit_all_result=admit_all)
                rows.append((scenario.name, pname, bucket, report, ""))
            except SliceSimError as exc:  # partial-failure policy
                rows.append((scenario.name, pname, bucket, None,
                             f"{type(exc).__name__}"))

    out = Path(args.out or "sweep.csv")
    tmp = out.with_suffix(out.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario", "policy", "cv_bucket", "revenue",
                         "normalized_revenue", "pct_negative",
                         "underprov_fraction", "error"])
        for name, pname, bucket, report, err in rows:
            if report is None:
                writer.writerow([name, pname, bucket, "", "", "", "", err])
            else:
                writer.writerow([
                    name, pname, bucket,
                    repr(report.revenue),
                    "" if report.normalized_revenue is None else repr(report.normalized_revenue),
                    repr(report.pct_negative_revenue),
                    "" if report.underprovisioning_fraction is None
                    else repr(report.underprovisioning_fraction),
                    err,
                ])
    os.replace(tmp, out)
    return 0


def cmd_oracle(args) -> int:
    horizon = int(args.horizon or DEFAULT_HORIZON)
    if args.scenario:
        scenario = load_bundle(args.scenario)
    else:
        scenario, _, _ = _scenario_from_args(args, horizon)
    solution = solve_oracle(scenario, mode=args.mode or "branch_and_bound")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    dump_solution(solution, scenario, out / "oracle_z.csv", out / "oracle_slots.csv")
    with open(out / "oracle.json", "w", encoding="utf-8") as fh:
        json.dump({"objective": solution.objective,
                   "revenue": solution.revenue,
                   "admitted": [sr.index for sr, z in
                                zip(scenario.requests, solution.z) if z]},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def cmd_gen_rsl(args) -> int:
    seed = _resolve_seed(args)
    trace = generate_synthetic_rsl(
        params={
            "baseline_dbm": float(args.baseline or -48.0),
            "event_count": int(args.events or 1),
            "event_depth_db": float(args.depth or 20.0),
            "event_duration_min": int(args.duration or 30),
            "noise_std_db": float(args.noise or 0.5),
        },
        length=int(args.length or 120),
        seed=seed,
        link_id=args.link_id or "synthetic",
    )
    Path(args.out).write_bytes(export_rsl_trace(trace))
    return 0


def cmd_gen_slices(args) -> int:
    kappa = float(args.kappa or 0.2)
    flows = load_flows(Path(args.flows).read_bytes())
    if getattr(args, "stats", False):
        catalog = build_catalog(flows=flows, kappa=kappa)
    else:
        catalog = default_catalog(kappa=kappa)
    requests = generate_slice_requests(flows, catalog)
    Path(args.out).write_bytes(export_slice_requests(requests))
    return 0


def cmd_calibrate(args) -> int:
    horizon = int(args.horizon or DEFAULT_HORIZON)
    trace = ingest_rsl_trace(Path(args.trace).read_bytes(), link_id="calib")
    calib = _persistence_calibration(trace.rsl, horizon)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("h,sigma_db\n")
        for h, sigma in enumerate(calib.sigma, start=1):
            fh.write(f"{h},{sigma!r}\n")
    return 0


def cmd_train_pql(args) -> int:
    seed = _resolve_seed(args)
    horizon = int(args.horizon or DEFAULT_HORIZON)
    paths = sorted(glob.glob(args.scenarios))
    if not paths:
        raise ConfigError(f"scenarios: no bundles match {args.scenarios!r}")
    scenarios = [load_bundle(p) for p in paths]
    table = _acm_table(args.acm or "af60")
    forecasters = {}
    for scenario in scenarios:
        forecasters[scenario.name] = _forecaster_for(args, table, scenario, horizon)

    policy = QLearningPolicy(
        horizon=horizon,
        lam=float(args.risk_lambda or 0.5),
        epsilon=float(args.epsilon or 1.0),
        epsilon_decay=float(args.epsilon_decay or 0.999),
        epsilon_min=float(args.epsilon_min or 0.01),
        predictive=not getattr(args, "naive", False),
        training=True,
    )
    report = training.train_qlearning(
        scenarios, forecasters, policy,
        max_steps=int(args.max_steps or 100_000),
        window=int(args.window or 10_000),
        tol=float(args.tol or 1e-3),
        seed=seed,
    )
    policy.qtable.save(args.out)
    if args.curve:
        with open(args.curve, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("step,mean_abs_delta\n")
            for step, delta in report.curve:
                fh.write(f"{step},{delta!r}\n")
    meta = {"steps": report.steps, "passes": report.passes,
            "converged": report.converged}
    with open(str(args.out) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not report.converged:
        print("warning: training did not converge; table written anyway",
              file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slicesim")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="INI config file; flags override")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--horizon", default=None)
        p.add_argument("--acm", default=None, help="af60, wave, or a CSV path")
        p.add_argument("--kappa", default=None)
        p.add_argument("--delta", default=None)

    p = sub.add_parser("simulate", help="run one scenario under one policy")
    add_common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--srs", default=None)
    p.add_argument("--flows", default=None)
    p.add_argument("--forecasts", default=None)
    p.add_argument("--policy", default=None, choices=POLICY_NAMES)
    p.add_argument("--qtable", default=None)
    p.add_argument("--risk-lambda", dest="risk_lambda", default=None)
    p.add_argument("--lo-threshold", dest="lo_threshold", default=None)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--name", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="scenarios x policies, long-format CSV")
    add_common(p)
    p.add_argument("--scenarios", required=True, help="glob of bundle .jsonl files")
    p.add_argument("--policies", required=True, help="comma-separated policy names")
    p.add_argument("--qtable", default=None)
    p.add_argument("--risk-lambda", dest="risk_lambda", default=None)
    p.add_argument("--lo-threshold", dest="lo_threshold", default=None)
    p.add_argument("--forecasts", default=None)
    p.add_argument("--cv-edges", dest="cv_edges", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="solve the perfect-information benchmark")
    add_common(p)
    p.add_argument("--scenario", default=None, help="scenario bundle .jsonl")
    p.add_argument("--trace", default=None)
    p.add_argument("--srs", default=None)
    p.add_argument("--flows", default=None)
    p.add_argument("--mode", default=None, choices=("exhaustive", "branch_and_bound"))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gen-rsl", help="synthesize an RSL trace CSV")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--length", default=None)
    p.add_argument("--baseline", default=None)
    p.add_argument("--events", default=None)
    p.add_argument("--depth", default=None)
    p.add_argument("--duration", default=None)
    p.add_argument("--noise", default=None)
    p.add_argument("--link-id", dest="link_id", default=None)
    p.set_defaults(func=cmd_gen_rsl)

    p = sub.add_parser("gen-slices", help="pack a flow CSV into slice requests")
    add_common(p)
    p.add_argument("--flows", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", action="store_true",
                   help="derive the catalog from the flows instead of defaults")
    p.set_defaults(func=cmd_gen_slices)

    p = sub.add_parser("train-pql", help="train a Q-table over scenario bundles")
    add_common(p)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--naive", action="store_true",
                   help="naive Q-learning (static-capacity c_f)")
    p.add_argument("--risk-lambda", dest="risk_lambda", default=None)
    p.add_argument("--epsilon", default=None)
    p.add_argument("--epsilon-decay", dest="epsilon_decay", default=None)
    p.add_argument("--epsilon-min", dest="epsilon_min", default=None)
    p.add_argument("--max-steps", dest="max_steps", default=None)
    p.add_argument("--window", default=None)
    p.add_argument("--tol", default=None)
    p.add_argument("--forecasts", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--curve", default=None)
    p.set_defaults(func=cmd_train_pql)

    p = sub.add_parser("calibrate", help="persistence-residual variance calibration")
    add_common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    defaults = {k: None for k in vars(args)}
    try:
        _apply_config(args, defaults)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SliceSimError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
