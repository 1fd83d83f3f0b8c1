#!/usr/bin/env python3
"""Train and evaluate one model per target listed in a target registry.

Synthesizes an internal and an external cohort once, then for every target
runs train, internal eval (test fold), external eval (all rows) and
optionally explain, collecting both evaluations into CSV tables.
"""

import argparse
import json
import shutil
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def find_binary(explicit):
    if explicit:
        return explicit
    on_path = shutil.which("ecgdx")
    if on_path:
        return on_path
    built = ROOT / "build" / "tools" / "ecgdx"
    if built.exists():
        return str(built)
    sys.exit("ecgdx binary not found; build it or pass --ecgdx")


def run(binary, *args):
    proc = subprocess.run([binary, *map(str, args)], capture_output=True, text=True)
    if proc.stdout:
        print(proc.stdout, end="")
    if proc.returncode != 0:
        print(proc.stderr, end="", file=sys.stderr)
    return proc.returncode


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ecgdx", help="path to the ecgdx binary")
    parser.add_argument("--targets", default=ROOT / "specs" / "targets.json", type=Path)
    parser.add_argument("--internal-spec", default=ROOT / "specs" / "mimic_like.json", type=Path)
    parser.add_argument("--external-spec", default=ROOT / "specs" / "ecgview_like.json", type=Path)
    parser.add_argument("--n", default=50000, type=int, help="rows per synthetic cohort")
    parser.add_argument("--seed", default=0, type=int)
    parser.add_argument("--threads", default=1, type=int)
    parser.add_argument("--only", nargs="*", help="restrict to these target codes")
    parser.add_argument("--explain", action="store_true", help="also write beeswarm exports")
    parser.add_argument("--out", required=True, type=Path)
    args = parser.parse_args()

    binary = find_binary(args.ecgdx)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    common = ["--seed", args.seed, "--threads", args.threads]

    cohorts = {"internal": out / "internal.csv", "external": out / "external.csv"}
    for name, spec in (("internal", args.internal_spec), ("external", args.external_spec)):
        if run(binary, "synth", "--spec", spec, "--n", args.n, *common, "--out", cohorts[name]) != 0:
            return 1

    registry = json.loads(args.targets.read_text())["targets"]
    failures = []
    for entry in registry:
        code = entry["code"]
        if args.only and code not in args.only:
            continue
        run_dir = out / code
        steps = [
            ("train", ["train", "--cohort", cohorts["internal"], "--target", code, *common, "--out", run_dir]),
            ("eval internal", ["eval", "--model", run_dir / "model.json", "--cohort", cohorts["internal"],
                               "--split", "test", *common, "--append-csv", out / "internal_auroc.csv",
                               "--out", run_dir / "internal_report.json"]),
            ("eval external", ["eval", "--model", run_dir / "model.json", "--cohort", cohorts["external"],
                               "--split", "all", *common, "--append-csv", out / "external_auroc.csv",
                               "--out", run_dir / "external_report.json"]),
        ]
        if args.explain:
            steps.append(("explain", ["explain", "--model", run_dir / "model.json", "--cohort", cohorts["internal"],
                                      *common, "--out", run_dir / "explain"]))
        for label, step in steps:
            status = run(binary, *step)
            if status != 0:
                failures.append(f"{code}: {label} exited {status}")
                break

    for line in failures:
        print("skipped", line, file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
