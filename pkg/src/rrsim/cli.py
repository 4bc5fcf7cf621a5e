"""Command-line entry point: run scenarios, benchmark RIS algorithms, plan
deployments and build codebooks, emitting CSV/JSON artifacts atomically."""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import logging
import os
import sys
import tempfile
from importlib import resources
from typing import Iterable

from . import bench as bench_mod
from . import ntn_planner as planner_mod
from .ric import builtin_apps
from .ris_opt import build_codebook, evaluator_hash, model_evaluator
from .runner import Simulation, summarize_run
from .scenario import ParseError, Scenario, ValidationError, load_scenario
from .simcore import NOT_RECOVERED, NoDisaster, recovery_time, write_summary_json

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NOT_RECOVERED = 3
EXIT_UNREACHABLE = 4

log = logging.getLogger("rrs")


def _configure_logging() -> None:
    level = os.environ.get("RRS_LOG_LEVEL", "warn").lower()
    mapping = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=mapping.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _atomic_write(path: str, write_fn) -> None:
    """Write to a temp file in the target directory and rename into place."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".rrs_tmp_")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def bundled_scenario_path(name: str) -> str:
    return str(resources.files("rrsim").joinpath("scenarios", name))


def _load(path: str) -> Scenario:
    return load_scenario(path)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.scenario)
    except (ParseError, ValidationError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    disabled = set(args.disable_app or ())
    sim = Simulation(scenario, seed=args.seed, disabled_apps=disabled or None)
    baseline = sim.baseline_coverage()
    metrics = sim.run(args.until)

    recovery = None
    try:
        recovery = recovery_time(metrics, baseline or 1e-9, args.target_fraction)
    except NoDisaster:
        recovery = None

    os.makedirs(args.out, exist_ok=True)
    _atomic_write(os.path.join(args.out, "metrics.csv"), lambda fh: _write_metrics(fh, metrics))
    _atomic_write(
        os.path.join(args.out, "actions.log"),
        lambda fh: fh.writelines(f"{t}\t{desc}\n" for t, desc in metrics.actions),
    )

    summary = summarize_run(sim, metrics, recovery if recovery is not None else NOT_RECOVERED)
    summary["scenario"] = args.scenario
    summary["baseline_coverage"] = baseline
    if recovery is None:
        del summary["recovery_time_ms"]
    _atomic_write(
        os.path.join(args.out, "summary.json"),
        lambda fh: (json.dump(summary, fh, indent=2, sort_keys=True), fh.write("\n")),
    )
    print(json.dumps({k: v for k, v in summary.items() if k != "actions"}, sort_keys=True))

    if args.require_recovery and (recovery is NOT_RECOVERED or recovery is None):
        return EXIT_NOT_RECOVERED
    return EXIT_OK


def _write_metrics(fh, metrics) -> None:
    writer = csv.writer(fh)
    writer.writerow(["time_ms", "coverage_ratio", "ue_id", "throughput_mbps"])
    for s in metrics.samples:
        for ue_id in sorted(s.throughput_mbps):
            writer.writerow([s.time_ms, f"{s.coverage_ratio:.6f}", ue_id, f"{s.throughput_mbps[ue_id]:.6f}"])


def cmd_ris_bench(args: argparse.Namespace) -> int:
    try:
        n_elements, n_states = (int(v) for v in args.panel.split(","))
    except ValueError:
        print("--panel must be N,S (e.g. 76,4)", file=sys.stderr)
        return EXIT_VALIDATION
    algorithms = tuple(args.algorithms.split(","))
    unknown = [a for a in algorithms if a not in bench_mod.ALGORITHMS]
    if unknown:
        print(f"unknown algorithm(s): {', '.join(unknown)} "
              f"(choose from {', '.join(bench_mod.ALGORITHMS)})", file=sys.stderr)
        return EXIT_VALIDATION

    results = bench_mod.run_bench(
        n_elements, n_states, range(args.seeds), algorithms, group_count=args.group_count
    )

    def write(fh) -> None:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "seed", "final_power_dbm", "evaluations", "feedback_messages"])
        for r in results:
            writer.writerow([r.algorithm, r.seed, f"{r.final_power_dbm:.6f}", r.evaluations, r.feedback_messages])
        for algorithm in algorithms:
            rows = [r for r in results if r.algorithm == algorithm]
            mean_power = bench_mod.mean_power_dbm(results, algorithm)
            mean_evals = sum(r.evaluations for r in rows) / len(rows)
            mean_fb = sum(r.feedback_messages for r in rows) / len(rows)
            writer.writerow([f"mean:{algorithm}", "", f"{mean_power:.6f}", f"{mean_evals:.1f}", f"{mean_fb:.1f}"])

    _atomic_write(args.out, write)
    print(f"wrote {args.out} ({len(results)} rows)")
    return EXIT_OK


def cmd_plan(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.scenario)
    except (ParseError, ValidationError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    planner_cfg = dict(scenario.planner)
    if args.max_nodes is not None:
        planner_cfg["max_nodes"] = args.max_nodes

    # Fast-forward through the disaster schedule with the controller disabled
    # so the plan reflects the post-strike topology.
    all_apps = {app.name for app in builtin_apps()}
    sim = Simulation(scenario, disabled_apps=all_apps)
    horizon = max((d.strike_time_ms for d in scenario.disasters), default=0)
    sim.run(horizon)
    snapshot = sim.world.snapshot(horizon)

    try:
        plan = planner_mod.build_plan(snapshot, scenario.channel, planner_cfg)
    except planner_mod.UnreachablePlacement as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE

    print(f"{'node':<10} {'kind':<8} {'position':<28} {'tx dBm':<8}")
    for p in plan.placements:
        pos = ", ".join(f"{c:.0f}" for c in p.position)
        print(f"{p.node_id:<10} {p.kind.value:<8} ({pos})           {p.tx_power_dbm:<8.1f}")
    for e in plan.backhaul:
        extra = f" via RIS at {e.relay_position}" if e.via == "ris_relay" else ""
        print(f"backhaul: {e.child} -> {e.parent} [{e.via}]{extra} snr={e.snr_db:.1f} dB")
    print(f"estimated coverage: {plan.estimated_coverage_ratio:.3f}")

    _atomic_write(args.out, lambda fh: (fh.write(plan.to_json()), fh.write("\n")))
    return EXIT_OK


def cmd_codebook_build(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.scenario)
    except (ParseError, ValidationError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    sim = Simulation(scenario, disabled_apps={app.name for app in builtin_apps()})
    ris_cfg = scenario.ric.get("ris", {})
    if args.panel not in ris_cfg:
        print(f"panel {args.panel!r} has no ris{{}} entry in the scenario", file=sys.stderr)
        return EXIT_VALIDATION
    cfg = ris_cfg[args.panel]
    panel = sim.world.panels[args.panel]
    tx = sim.world.nodes[cfg["tx"]]
    part_cfg = cfg.get("parts", {}).get(str(args.part))
    if part_cfg is None or not part_cfg.get("reference_points"):
        print(f"part {args.part} has no reference points configured", file=sys.stderr)
        return EXIT_VALIDATION

    members = panel.part_elements(args.part)
    state = sim.world.panel_states[args.panel]

    def evaluator_at(point):
        return model_evaluator(
            panel, tx.position, tx.tx_power_dbm, point, tx.freq_ghz, scenario.channel,
            obstacles=sim.world.obstacles, part_elements=members, base_config=state.config,
        )

    codebook = build_codebook(
        panel,
        args.part,
        part_cfg["reference_points"],
        evaluator_at,
        metadata={
            "grid": {"points": len(part_cfg["reference_points"])},
            "build_date": datetime.date.today().isoformat(),
            "evaluator_hash": evaluator_hash(panel, tx.position, tx.freq_ghz, scenario.channel),
        },
    )
    _atomic_write(args.out, lambda fh: (fh.write(codebook.to_json()), fh.write("\n")))
    print(f"wrote {args.out} ({len(codebook.codewords)} codewords)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rrs", description="RAN recovery simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario and emit metrics")
    run_p.add_argument("--scenario", required=True)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--until", type=int, required=True, help="simulated end time (ms)")
    run_p.add_argument("--out", default="out")
    run_p.add_argument("--target-fraction", type=float, default=0.95)
    run_p.add_argument("--require-recovery", action="store_true")
    run_p.add_argument("--disable-app", action="append", metavar="NAME")
    run_p.set_defaults(func=cmd_run)

    ris_p = sub.add_parser("ris", help="RIS tooling")
    ris_sub = ris_p.add_subparsers(dest="ris_command", required=True)
    bench_p = ris_sub.add_parser("bench", help="benchmark configuration algorithms")
    bench_p.add_argument("--panel", required=True, metavar="N,S")
    bench_p.add_argument("--seeds", type=int, default=100)
    bench_p.add_argument("--algorithms", default="iterative,grouping,codebook")
    bench_p.add_argument("--group-count", type=int, default=4)
    bench_p.add_argument("--out", default="ris_bench.csv")
    bench_p.set_defaults(func=cmd_ris_bench)

    plan_p = sub.add_parser("plan", help="plan NTN placements and backhaul")
    plan_p.add_argument("--scenario", required=True)
    plan_p.add_argument("--max-nodes", type=int, default=None)
    plan_p.add_argument("--out", default="plan.json")
    plan_p.set_defaults(func=cmd_plan)

    cb_p = sub.add_parser("codebook", help="codebook tooling")
    cb_sub = cb_p.add_subparsers(dest="codebook_command", required=True)
    build_p = cb_sub.add_parser("build", help="build a codebook from scenario config")
    build_p.add_argument("--scenario", required=True)
    build_p.add_argument("--panel", required=True)
    build_p.add_argument("--part", type=int, default=0)
    build_p.add_argument("--out", default="codebook.json")
    build_p.set_defaults(func=cmd_codebook_build)

    return parser


def main(argv: Iterable[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(list(argv) if argv is not None else None)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
