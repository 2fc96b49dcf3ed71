"""Command-line entry point: ``shardledger run|validate|sweep``.

Exit codes: 0 success, 1 invalid scenario or arguments, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

from . import scenario_file
from .errors import ShardLedgerError
from .sim import MetricsSummary, RunResult, run, validate_scenario

OUT_ENV = "SHARDLEDGER_OUT"

METRICS_COLUMNS = [
    "tick",
    "txs_decided",
    "txs_accepted",
    "tx_accuracy_cum",
    "claims_decided",
    "claim_accuracy_cum",
    "undefined_claims",
    "total_stake",
]

SWEEP_COLUMNS = [
    "value",
    "tx_accuracy",
    "claim_accuracy",
    "throughput",
    "txs_decided",
    "claims_decided",
    "undefined_claims",
    "minted",
    "burned",
    "stake_delta",
]


def fmt(x) -> str:
    """Display rounding for rationals: integers verbatim, else 6 decimals."""
    if x is None:
        return ""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{float(x):.6f}"


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def metrics_csv(summary: MetricsSummary) -> str:
    return _csv(
        METRICS_COLUMNS,
        (
            [
                r.tick,
                r.txs_decided,
                r.txs_accepted,
                fmt(r.tx_accuracy_cum),
                r.claims_decided,
                fmt(r.claim_accuracy_cum),
                r.undefined_claims,
                fmt(r.total_stake),
            ]
            for r in summary.rows
        ),
    )


def summary_text(result: RunResult) -> str:
    m = result.summary
    lines = [
        f"ticks                 {m.ticks}",
        f"transactions decided  {m.txs_decided} ({m.txs_accepted} accepted)",
        f"tx accuracy           {fmt(m.tx_accuracy)}",
        f"throughput (tx/tick)  {fmt(m.throughput)}",
        f"claims decided        {m.claims_decided}",
        f"claim accuracy        {fmt(m.claim_accuracy)}",
        f"undefined claims      {m.undefined_claims}",
        f"unresolvable claims   {m.unresolvable_claims}",
        f"blocks                {len(result.chain)} (incl. genesis)",
        f"stake initial/final   {fmt(m.initial_stake)} / {fmt(m.final_stake)}",
        f"minted / burned       {fmt(m.minted)} / {fmt(m.burned)}",
        "",
        "oracle trust weights:",
    ]
    for oid, traj in sorted(m.trust_trajectory.items()):
        lines.append(f"  {oid}  {fmt(traj[-1][1])}  after {len(traj)} settled claims")
    return "\n".join(lines) + "\n"


def write_artifacts(result: RunResult, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_atomic(out_dir / "events.log", result.log.dumps())
    write_atomic(out_dir / "metrics.csv", metrics_csv(result.summary))
    write_atomic(out_dir / "chain.dump", result.chain.dump())
    write_atomic(out_dir / "summary.txt", summary_text(result))


def _err(msg: str) -> None:
    print(f"shardledger: {msg}", file=sys.stderr)


def _load(path, overrides, seed=None):
    """Scenario or exit code. Prints diagnostics."""
    try:
        doc = scenario_file.load(path)
    except OSError as exc:
        _err(f"cannot read {path}: {exc.strerror or exc}")
        return 2
    except scenario_file.ScenarioFileError as exc:
        _err(f"{path}: {exc}")
        return 1
    try:
        pairs = scenario_file.parse_overrides(overrides or [])
        if seed is not None:
            pairs.append(("seed", seed))
        if isinstance(doc, dict):
            for key, value in pairs:
                doc = scenario_file.apply_override(doc, key, value)
        return scenario_file.from_dict(doc)
    except KeyError as exc:
        _err(f"unknown override key {exc.args[0]}")
        return 1
    except (ValueError, scenario_file.ScenarioFileError) as exc:
        _err(f"{path}: {exc}")
        return 1


def _report_violations(violations) -> None:
    for v in violations:
        print(f"violation: {v}", file=sys.stderr)


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "out")


def cmd_run(path, out_dir, overrides=(), seed=None, parallel=False) -> int:
    scenario = _load(path, overrides, seed)
    if isinstance(scenario, int):
        return scenario
    violations = validate_scenario(scenario)
    if violations:
        _report_violations(violations)
        return 1
    try:
        result = run(scenario, parallel=parallel, validate=False)
    except ShardLedgerError as exc:
        _err(str(exc))
        return 1
    try:
        write_artifacts(result, Path(out_dir))
    except OSError as exc:
        _err(f"cannot write artifacts to {out_dir}: {exc}")
        return 2
    print(f"wrote events.log, metrics.csv, chain.dump, summary.txt to {out_dir}")
    return 0


def cmd_validate(path, overrides=(), seed=None) -> int:
    scenario = _load(path, overrides, seed)
    if isinstance(scenario, int):
        return scenario
    violations = validate_scenario(scenario)
    if violations:
        for v in violations:
            print(f"violation: {v}")
        return 1
    print("ok")
    return 0


def expand_values(tokens: List[str]) -> list:
    """Parse sweep values: ``a..b`` is an inclusive integer range, commas split lists."""
    out = []
    for token in tokens:
        for piece in token.split(","):
            piece = piece.strip()
            if not piece:
                continue
            if ".." in piece:
                lo, hi = piece.split("..", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(scenario_file.parse_value(piece))
    return out


def _sweep_one(args):
    scenario, parallel = args
    return run(scenario, parallel=parallel, validate=False)


def cmd_sweep(path, parameter, values, out_dir, overrides=(), seed=None, parallel=False, jobs=1) -> int:
    if not scenario_file.known_parameter(parameter):
        _err(f"unknown sweep parameter {parameter!r}")
        return 1
    try:
        values = expand_values(list(values))
    except ValueError as exc:
        _err(f"bad sweep values: {exc}")
        return 1
    if not values:
        _err("sweep needs at least one value")
        return 1
    scenarios = []
    for value in values:
        ov = list(overrides or []) + [f"{parameter}={value}"]
        scenario = _load(path, ov, seed)
        if isinstance(scenario, int):
            return scenario
        violations = validate_scenario(scenario)
        if violations:
            _err(f"{parameter}={value} gives an invalid scenario")
            _report_violations(violations)
            return 1
        scenarios.append(scenario)
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_sweep_one, [(s, parallel) for s in scenarios]))
        else:
            results = [_sweep_one((s, parallel)) for s in scenarios]
    except ShardLedgerError as exc:
        _err(str(exc))
        return 1
    out = Path(out_dir)
    rows = []
    try:
        for value, result in zip(values, results):
            write_artifacts(result, out / f"{parameter}={value}")
            m = result.summary
            rows.append(
                [
                    value,
                    fmt(m.tx_accuracy),
                    fmt(m.claim_accuracy),
                    fmt(m.throughput),
                    m.txs_decided,
                    m.claims_decided,
                    m.undefined_claims,
                    fmt(m.minted),
                    fmt(m.burned),
                    fmt(m.final_stake - m.initial_stake),
                ]
            )
        write_atomic(out / "sweep.csv", _csv(SWEEP_COLUMNS, rows))
    except OSError as exc:
        _err(f"cannot write sweep artifacts to {out}: {exc}")
        return 2
    print(f"wrote {len(rows)} sweep points and sweep.csv to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shardledger", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_out=True):
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set a scenario field (dotted path or alias); repeatable")
        p.add_argument("--seed", type=int, help="shorthand for --override seed=N")
        if with_out:
            p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./out)")
            p.add_argument("--parallel", action="store_true", help="evaluate clusters on a thread pool")

    common(sub.add_parser("run", help="run a scenario and write artifacts"))
    common(sub.add_parser("validate", help="check a scenario without running it"), with_out=False)
    p = sub.add_parser("sweep", help="run a scenario once per parameter value")
    common(p)
    p.add_argument("parameter", help="field to vary, e.g. dishonest, q, committee_size")
    p.add_argument("values", nargs="*", help="values, e.g. 0..5 or 0.5,0.7,0.9")
    p.add_argument("--jobs", type=int, default=1, help="run sweep points in N processes")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args.scenario, args.override, args.seed)
    out = args.out or _default_out()
    if args.command == "run":
        return cmd_run(args.scenario, out, args.override, args.seed, args.parallel)
    return cmd_sweep(args.scenario, args.parameter, args.values, out, args.override, args.seed,
                     args.parallel, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
