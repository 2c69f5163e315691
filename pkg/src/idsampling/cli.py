"""Command-line entry points.

Subcommands:
    run      --config cfg.json --dataset data.jsonl --out outdir
    compare  --baseline report.json --candidate r1.json [r2.json ...]
    check    equivalent <a> <b>
"""

from __future__ import annotations

import argparse
import json
import sys

from . import checker
from .harness import ComparisonError, DatasetError, RunConfig, RunReport, compare_runs, load_dataset, run, write_report


def _cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig.from_json(args.config)
    dataset = load_dataset(args.dataset)
    report = run(dataset, config)
    paths = write_report(report, args.out)
    metrics = report.metrics
    print(f"questions: {metrics['evaluated_questions']} evaluated, {metrics['errored_questions']} errored")
    print(f"pass@1: {_fmt(metrics['pass1'])}")
    for k in metrics["k_grid"]:
        key = str(k)
        print(f"k={k:>3}  BoN {_fmt(metrics['bon'].get(key))}  cons {_fmt(metrics['cons'].get(key))}")
    print(f"report written to {paths['report']}")
    return 0


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def _cmd_compare(args: argparse.Namespace) -> int:
    reports = [_load_report(args.baseline)]
    reports.extend(_load_report(path) for path in args.candidate)
    table = compare_runs(reports)
    print(f"baseline: {table['baseline_method']} (relative cost 1.00)")
    for row in table["rows"][1:]:
        label = row["method"]
        if row.get("gamma") is not None:
            label = f"{label}(gamma={row['gamma']})"
        print(f"{label}: relative cost {row['relative_cost']:.2f}")
        for k in table["k_grid"]:
            key = str(k)
            print(
                f"  k={k:>3}  equivalent-N {row['equivalent_n'][key]:>4}"
                f"  dBoN {_fmt_delta(row['bon_delta'][key])}"
                f"  dcons {_fmt_delta(row['cons_delta'][key])}"
            )
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(table, fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"comparison written to {args.out}")
    return 0


def _fmt_delta(value: float | None) -> str:
    return "  n/a " if value is None else f"{value:+.4f}"


def _load_report(path: str) -> RunReport:
    with open(path) as fh:
        return RunReport.from_dict(json.load(fh))


def _cmd_check(args: argparse.Namespace) -> int:
    a, b = args.exprs
    result = checker.answers_match(a, b)
    detail = []
    for label, text in (("a", a), ("b", b)):
        expr = checker.try_parse(text)
        detail.append(f"{label} = {expr.render() if expr else '(outside grammar)'}")
    print(f"equivalent: {'true' if result else 'false'}  [{'; '.join(detail)}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idsampling",
        description="Iterative-deepening sampling orchestrator and evaluation harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment over a JSONL dataset")
    p_run.add_argument("--config", required=True, help="JSON run configuration")
    p_run.add_argument("--dataset", required=True, help="JSONL problems file")
    p_run.add_argument("--out", required=True, help="output directory for reports")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="compare run reports against a baseline")
    p_cmp.add_argument("--baseline", required=True)
    p_cmp.add_argument("--candidate", nargs="+", required=True)
    p_cmp.add_argument("--out", help="optional path for the comparison JSON")
    p_cmp.set_defaults(func=_cmd_compare)

    p_chk = sub.add_parser("check", help="answer-equivalence debugging helpers")
    chk_sub = p_chk.add_subparsers(dest="check_command", required=True)
    p_eq = chk_sub.add_parser("equivalent", help="test two answers for equivalence")
    p_eq.add_argument("exprs", nargs=2, metavar=("A", "B"))
    p_eq.set_defaults(func=_cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, ComparisonError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
