"""
Command-line interface for topagg.

Exit codes: 0 success, 2 usage or configuration error, 3 infeasible privacy
budget, 4 internal assertion failure.
"""

import json
import logging
import sys
from typing import Any, Callable, Dict, List, Mapping, Optional

from topagg.accountant.ledger import GaussianEvent, PrivacyLedger
from topagg.accountant.schedule import budget_schedule
from topagg.cli_parser import parse_args
from topagg.compress.bench import run_bench, summarize
from topagg.convergence.bound import run_convergence
from topagg.convergence.tau import weibull_tau_profile
from topagg.core.config import build_section, config_to_mapping, load_config, resolve_config
from topagg.core.output import RunManifest, config_hash, write_csv, write_json, write_jsonl, write_summary
from topagg.dpsgd.control import CSV_COLUMNS as DPSGD_COLUMNS
from topagg.dpsgd.control import run_control_experiment
from topagg.exceptions import TopAggError
from topagg.pate.runner import run_pate

logger = logging.getLogger(__name__)

PATE_COLUMNS = ("round", "iteration", "record", "epsilon_indep", "epsilon_dep_uncapped", "q_tilde", "votes_fired", "probe_accuracy")
BENCH_COLUMNS = ("method", "trial", "cosine", "sign_agreement", "support")
TAU_COLUMNS = ("k", "mean_tau", "reference")


def _emit(args: Dict[str, Any], payload: Mapping[str, Any], lines: List[str]) -> None:
    if args.get("format") == "json":
        print(json.dumps(payload, sort_keys=True, default=str))
    else:
        for line in lines:
            print(line)


def cmd_accountant(args: Dict[str, Any]) -> int:
    """Prints epsilon per round (both tracks) or the largest round count within a budget."""
    k, sigma, delta = args["k"], args["sigma"], args["delta"]
    if args.get("epsilon_target") is not None:
        rounds = budget_schedule(k, sigma, delta, args["epsilon_target"])
        _emit(args, {"k": k, "sigma": sigma, "delta": delta, "epsilon_target": args["epsilon_target"], "max_rounds": rounds}, [str(rounds)])
        return 0
    ledger = PrivacyLedger(delta=delta)
    for _ in range(args["rounds"]):
        ledger.compose(GaussianEvent.dptopk(k, sigma, args.get("q_tilde")))
    records = ledger.export_records()
    lines = ["round epsilon_indep epsilon_dep_uncapped"]
    lines += [f"{r['round']} {r['epsilon_indep']:.6g} {r['epsilon_dep_uncapped']:.6g}" for r in records]
    _emit(args, {"k": k, "sigma": sigma, "delta": delta, "rounds": records}, lines)
    return 0


def _load_section(args: Dict[str, Any], section: str, overrides: Optional[Dict[str, Any]] = None) -> Any:
    raw = load_config(args["config"]) if args.get("config") else {}
    resolved = resolve_config(raw, args.get("preset"))
    if args.get("seed") is not None:
        resolved[section]["seed"] = args["seed"]
    resolved[section].update(overrides or {})
    return build_section(resolved, section)


def _manifest(args: Dict[str, Any], config: Any) -> RunManifest:
    mapping = config_to_mapping(config)
    manifest = RunManifest(
        subcommand=args["command"],
        config_path=args.get("config"),
        seed=mapping["seed"],
        output_dir=args["output"],
        fmt=args.get("format", "text"),
        config_hash=config_hash({args["command"]: mapping}),
    )
    manifest.prepare()
    return manifest


def cmd_pate(args: Dict[str, Any]) -> int:
    """Runs the PATE harness; exit 3 when the budget does not allow a single round."""
    overrides = {"epsilon_target": args["epsilon_target"]} if args.get("epsilon_target") is not None else {}
    config = _load_section(args, "pate", overrides)
    manifest = _manifest(args, config)
    report = run_pate(config, workers=args["workers"])
    rounds = [r.to_dict() for r in report.rounds]
    write_jsonl(manifest.path("pate_rounds.jsonl"), manifest, rounds)
    write_csv(manifest.path("pate_rounds.csv"), manifest, PATE_COLUMNS, rounds)
    if report.synthetic is not None:
        dim = report.synthetic.dim
        columns = [f"x{j}" for j in range(dim)] + ["label"]
        records = [{**{f"x{j}": float(x[j]) for j in range(dim)}, "label": int(y)} for x, y in zip(report.synthetic.x, report.synthetic.y)]
        write_csv(manifest.path("pate_synthetic.csv"), manifest, columns, records)
    summary = report.summary()
    write_summary(manifest.path("summary.md"), manifest, "PATE run", [{"heading": "Result", "items": summary}, {"heading": "Config", "items": config_to_mapping(config)}])
    if report.budget_exhausted:
        print(f"Error: {report.diagnostic}", file=sys.stderr)
        return 3
    lines = [f"{key}: {value}" for key, value in summary.items()]
    _emit(args, summary, lines)
    return 0


def cmd_dpsgd(args: Dict[str, Any]) -> int:
    """Runs the DP-SGD control experiment."""
    config = _load_section(args, "dpsgd")
    manifest = _manifest(args, config)
    table = run_control_experiment(config, workers=args["workers"])
    rows = [r.to_dict() for r in table.rows]
    write_jsonl(manifest.path("dpsgd_control.jsonl"), manifest, rows)
    write_csv(manifest.path("dpsgd_control.csv"), manifest, DPSGD_COLUMNS, rows)
    summary = table.summary()
    table_rows = [{"scenario": name, **stats} for name, stats in summary.items()]
    write_summary(manifest.path("summary.md"), manifest, "DP-SGD control experiment", [{"heading": "Scenarios", "table": table_rows}])
    lines = [f"{r['scenario']}: loss {r['mean_loss']:.5f} +- {r['std_loss']:.5f}, accuracy {r['mean_accuracy']:.3f}, epsilon {r['epsilon']:.4g}" for r in table_rows]
    _emit(args, summary, lines)
    return 0


def cmd_convergence(args: Dict[str, Any]) -> int:
    """Runs the update rule, checks the bound and writes the Weibull tau profile."""
    config = _load_section(args, "convergence")
    manifest = _manifest(args, config)
    result = run_convergence(config, workers=args["workers"])
    profile = weibull_tau_profile(config.weibull_rho1, config.weibull_rho2, config.dim, config.weibull_trials, config.seed)
    write_json(manifest.path("bound_report.json"), manifest, result.to_dict())
    lines_out = [{"type": "report", **result.report.to_dict()}]
    lines_out += [{"type": "sweep", **r.to_dict()} for r in result.sweep]
    lines_out += [{"type": "tradeoff", **r.to_dict()} for r in result.tradeoff]
    write_jsonl(manifest.path("convergence.jsonl"), manifest, lines_out)
    tau_rows = [{"k": int(k), "mean_tau": float(t), "reference": float(r)} for k, t, r in zip(profile.ks, profile.mean_tau, profile.reference)]
    write_csv(manifest.path("tau_profile.csv"), manifest, TAU_COLUMNS, tau_rows)
    reports = [result.report] + result.sweep
    table = [{"k": r.k, "lhs": r.lhs, "rhs": r.rhs, "pass": r.passed} for r in reports]
    write_summary(
        manifest.path("summary.md"),
        manifest,
        "Convergence bound",
        [{"heading": "Bound checks", "table": table}, {"heading": "Terms", "items": result.report.terms}, {"heading": "Tradeoff", "table": [r.to_dict() for r in result.tradeoff]}],
    )
    lines = [f"k={r['k']}: LHS {r['lhs']:.6g} <= RHS {r['rhs']:.6g}: {r['pass']}" for r in table]
    _emit(args, result.to_dict(), lines)
    return 0


def cmd_compress_bench(args: Dict[str, Any]) -> int:
    """Compares the private aggregators on synthetic teacher gradients."""
    config = _load_section(args, "compress_bench")
    manifest = _manifest(args, config)
    bench_rows = run_bench(config, workers=args["workers"])
    rows = [r.to_dict() for r in bench_rows]
    write_jsonl(manifest.path("compress_bench.jsonl"), manifest, rows)
    write_csv(manifest.path("compress_bench.csv"), manifest, BENCH_COLUMNS, rows)
    summary = summarize(bench_rows)
    write_summary(manifest.path("summary.md"), manifest, "Compression benchmark", [{"heading": "Methods", "table": [{"method": m, **s} for m, s in summary.items()]}])
    lines = [f"{m}: cosine {s['cosine']:.3f}, sign agreement {s['sign_agreement']:.3f}, support {s['support']:.1f}" for m, s in summary.items()]
    _emit(args, summary, lines)
    return 0


COMMANDS: Dict[str, Callable[[Dict[str, Any]], int]] = {
    "accountant": cmd_accountant,
    "pate": cmd_pate,
    "dpsgd": cmd_dpsgd,
    "convergence": cmd_convergence,
    "compress-bench": cmd_compress_bench,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the topagg CLI.

    Args:
        argv: Arguments without the program name; defaults to ``sys.argv[1:]``

    Returns:
        The process exit code
    """
    args = parse_args(argv)
    logging.basicConfig(level=args["log_level"], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args["command"]](args)
    except TopAggError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"Error writing results: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
