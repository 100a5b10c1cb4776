#!/usr/bin/env python3
"""Execute the full scenario suite and print the benchmark tables.

Runs every scenario in scenarios/ across the three temperature buckets
(0.2 / 0.5 / 0.8 by default), recomputes metrics from the event logs,
and prints one table per bucket.  The low bucket is additionally
compared against the zero-shot baseline in data/zero_shot.json.

Usage:
    python3 scripts/run_benchmark.py [--data-dir DIR] [--scenario-dir DIR]
                                     [--json] [--seed N]

With --data-dir every run's events.jsonl and signoff.json are persisted
(one subdirectory per run); without it runs stay in memory.  Exits
non-zero if any run fails to sign off or any computed row diverges from
the scenario's frozen expected block.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from tapeloop.domain import to_jsonable
from tapeloop.metrics import (
    aggregate_table,
    compare_zero_shot,
    compute_run_metrics,
    load_zero_shot,
    render_table_json,
    render_table_text,
)
from tapeloop.tooling import load_scenario
from tapeloop.workflow import RunStatus, execute_scenario_run

ROOT = Path(__file__).resolve().parent.parent

BUCKET_TEMPS = {"low": 0.2, "mid": 0.5, "high": 0.8}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario-dir", default=str(ROOT / "scenarios"))
    ap.add_argument("--data-dir", default=None, help="persist event logs under this directory")
    ap.add_argument("--zero-shot", default=str(ROOT / "data" / "zero_shot.json"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="emit one JSON document instead of text")
    args = ap.parse_args()

    scenario_paths = sorted(Path(args.scenario_dir).glob("*.json"))
    if not scenario_paths:
        print(f"no scenarios in {args.scenario_dir}", file=sys.stderr)
        return 2

    failures: list[str] = []
    tables: dict[str, object] = {}
    rows_by_bucket: dict[str, list] = {b: [] for b in BUCKET_TEMPS}
    started = time.monotonic()

    for path in scenario_paths:
        scenario = load_scenario(path)
        for bucket, temperature in BUCKET_TEMPS.items():
            run_id = f"{scenario.design_id}-{bucket}-s{args.seed}"
            state, log = execute_scenario_run(
                scenario,
                temperature,
                data_dir=args.data_dir,
                run_id=run_id,
                seed=args.seed,
            )
            if state.status is not RunStatus.SIGNED_OFF:
                failures.append(f"{run_id}: ended {state.status.value}")
                continue
            row = compute_run_metrics(log.events())
            rows_by_bucket[bucket].append(row)
            expected = scenario.expected.get("metrics", {}).get(bucket)
            if expected is not None and to_jsonable(row) != expected:
                failures.append(f"{run_id}: metrics diverge from scenario expected block")

    for bucket, rows in rows_by_bucket.items():
        if rows:
            tables[bucket] = aggregate_table(rows)

    comparison = None
    zero_shot_path = Path(args.zero_shot)
    if zero_shot_path.exists() and "low" in tables:
        baseline = load_zero_shot(zero_shot_path)
        comparison = compare_zero_shot(rows_by_bucket["low"], baseline)

    elapsed = time.monotonic() - started

    if args.json:
        doc = {
            "buckets": {b: json.loads(render_table_json(t)) for b, t in tables.items()},
            "zero_shot": to_jsonable(comparison) if comparison else None,
            "failures": failures,
            "wall_seconds": round(elapsed, 2),
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for bucket in ("low", "mid", "high"):
            if bucket not in tables:
                continue
            print(f"== bucket {bucket} (temperature {BUCKET_TEMPS[bucket]})")
            print(render_table_text(tables[bucket]))
            print()
        if comparison is not None:
            print("== low bucket vs zero-shot baseline (coverage_mas_pct)")
            for design, delta in sorted(comparison.deltas.items()):
                print(f"  {design:10s} {delta:+7.2f}")
            print(
                f"  mean: {comparison.mean_mas_pct:.2f} vs {comparison.mean_zero_shot_pct:.2f}"
                f" ({comparison.mean_delta_pct:+.2f})"
            )
            print()
        print(f"{sum(len(r) for r in rows_by_bucket.values())} runs in {elapsed:.1f}s")
        for line in failures:
            print(f"FAIL {line}", file=sys.stderr)

    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
