#!/usr/bin/env python3
"""End-to-end checks of the mproj binary on the fixture files.

usage: test_cli.py <mproj exe> <schemas dir> <fixtures dir>
"""

import csv
import json
import math
import os
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

try:
    import jsonschema
except ImportError:  # schema checks are skipped, the rest still runs
    jsonschema = None

EXE, SCHEMAS, FIX = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3])
failures = []


def run(*args, env=None, expect=0):
    full_env = dict(os.environ, **(env or {}))
    p = subprocess.run([EXE, *map(str, args)], capture_output=True, text=True, env=full_env)
    if p.returncode != expect:
        raise AssertionError(f"{' '.join(map(str, args))}: exit {p.returncode}, wanted {expect}\n{p.stderr}")
    return p


def check(cond, msg):
    if not cond:
        raise AssertionError(msg)


def validate(report):
    if jsonschema is None:
        return
    schema = json.loads((SCHEMAS / "evaluation_report.schema.json").read_text())
    jsonschema.validate(report, schema)


def case(fn):
    try:
        fn()
        print(f"ok   {fn.__name__}")
    except Exception as e:  # noqa: BLE001
        failures.append(fn.__name__)
        print(f"FAIL {fn.__name__}: {e}")
    return fn


tmp = Path(tempfile.mkdtemp(prefix="mproj_cli_"))
emb = FIX / "embeddings.txt"
dataset = tmp / "dataset.json"
pipeline = tmp / "pipeline.json"


@case
def ingest_builds_dataset():
    run("ingest", "--embeddings", emb, "--k", 10, "--out", dataset, "--seed", 3)
    text = dataset.read_text()
    check(json.loads(text), "dataset JSON is empty")
    check("PLUS" in text and "MINUS" in text, "dataset lacks class labels")


@case
def debias_writes_pipeline():
    run("debias", "--embeddings", emb, "--dataset", dataset, "--strategy", "MP", "--out", pipeline,
        "--out-space", tmp / "after.txt")
    p = json.loads(pipeline.read_text())
    check(len(p["steps"]) == 1, f"MP pipeline has {len(p['steps'])} steps")
    w = p["steps"][0]["w"]
    check(p["dim"] == len(w) == 6, "pipeline dimension mismatch")
    check(abs(math.sqrt(sum(x * x for x in w)) - 1) < 1e-9, "direction is not unit length")
    lines = (tmp / "after.txt").read_text().splitlines()
    check(len(lines) == len(emb.read_text().splitlines()), "projected space lost rows")


@case
def evaluate_full_report():
    out = tmp / "eval.json"
    run("evaluate", "--before", emb, "--pipeline", pipeline, "--similarity", FIX / "similarity.tsv",
        "--weat", FIX / "weat.json", "--neighbors", FIX / "tokens.txt", "--k", 3,
        "--bias-probes", FIX / "tokens.txt", "--bias-k", 5, "--predictions", FIX / "predictions.csv",
        "--group-rates", FIX / "group_rates.csv", "--dataset", dataset, "--mlp", "--cluster", "--out", out)
    r = json.loads(out.read_text())
    validate(r)
    check(r["kind"] == "evaluate", "wrong kind")
    check(r["similarity"][0]["before"]["dropped"] == 1, "missing similarity pair not counted")
    check(r["weat"][0]["before"]["dropped"]["B"] == 1, "missing WEAT token not counted")
    check(r["weat"][0]["before"]["dropped_tokens"] == ["ghost"], "dropped token not listed")
    check(abs(r["tpr_gap"]["gap_rms"] - math.sqrt(0.02)) < 1e-9, "GAP_RMS differs from the hand value")
    check(r["neighbors"]["missing"] == 1, "unknown neighbor token not counted")
    check(r["probes"]["after"]["linear_accuracy"] <= r["probes"]["before"]["linear_accuracy"], "probe got better")


@case
def identity_evaluate_changes_nothing():
    out = tmp / "identity.json"
    run("evaluate", "--before", emb, "--similarity", FIX / "similarity.tsv", "--neighbors", FIX / "tokens.txt",
        "--out", out)
    r = json.loads(out.read_text())
    validate(r)
    check(r["neighbors"]["changed"] == 0, "identity changed neighbors")
    s = r["similarity"][0]
    check(s["before"]["rho"] == s["after"]["rho"], "identity changed rho")


@case
def evaluate_with_after_space_matches_pipeline():
    a = tmp / "via_space.json"
    b = tmp / "via_pipeline.json"
    run("evaluate", "--before", emb, "--after", tmp / "after.txt", "--similarity", FIX / "similarity.tsv", "--out", a)
    run("evaluate", "--before", emb, "--pipeline", pipeline, "--similarity", FIX / "similarity.tsv", "--out", b)
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    check(abs(ra["similarity"][0]["after"]["rho"] - rb["similarity"][0]["after"]["rho"]) < 1e-6,
          "saved space and pipeline disagree")


@case
def experiment_is_deterministic():
    env = {"MPROJ_DATA_DIR": str(FIX)}
    a, b = tmp / "exp_a.json", tmp / "exp_b.json"
    run("experiment", "--config", "config.json", "--out", a, "--csv", tmp / "traj.csv", env=env)
    run("experiment", "--config", "config.json", "--out", b, env=env)
    check(a.read_bytes() == b.read_bytes(), "reports differ between identical runs")
    r = json.loads(a.read_text())
    validate(r)
    check(r["runs"] == 4 and r["seeds"] == [5, 6, 7, 8], "seeds are not rng_seed + i")
    m = r["metrics"]["similarity:similarity"]
    check(len(m["trajectory"]["mean"]) == 5, "MP+R3 trajectory should have 5 points")
    check(len(m["per_run_final"]) == 4, "per-run finals missing")
    check(any(k.startswith("weat:") for k in r["metrics"]), "WEAT trajectory missing")
    with open(tmp / "traj.csv") as f:
        rows = list(csv.DictReader(f))
    check(rows and rows[0]["step"] == "0", "trajectory CSV malformed")


@case
def experiment_single_run_has_null_spread():
    out = tmp / "one.json"
    run("experiment", "--config", FIX / "config.json", "--runs", 1, "--out", out, env={"MPROJ_DATA_DIR": str(FIX)})
    r = json.loads(out.read_text())
    validate(r)
    final = r["metrics"]["similarity:similarity"]["final"]
    check(final["stdev"] is None and final["ci_low"] is None, "single run should report null spread")


@case
def verify_theorems_small():
    out = tmp / "verify.json"
    run("verify-theorems", "--suite", "median-depth", "--instances", 20, "--out", out)
    check(out.exists(), "no summary written")


@case
def usage_and_data_errors():
    run(expect=1)
    run("debias", "--embeddings", emb, "--dataset", dataset, "--strategy", "MP+", "--out", tmp / "x.json", expect=1)
    run("debias", "--embeddings", tmp / "does_not_exist.txt", "--out", tmp / "x.json", expect=2)
    bad = tmp / "bad_config.json"
    cfg = json.loads((FIX / "config.json").read_text())
    cfg["colour"] = "blue"
    bad.write_text(json.dumps(cfg))
    run("experiment", "--config", bad, expect=1, env={"MPROJ_DATA_DIR": str(FIX)})
    broken = tmp / "broken.tsv"
    broken.write_text("a\tb\tnot_a_number\n")
    run("evaluate", "--before", emb, "--similarity", broken, expect=2)


if jsonschema is None:
    print("note: python jsonschema not installed, schema validation skipped")
print(f"{len(failures)} failure(s)")
shutil.rmtree(tmp, ignore_errors=True)
sys.exit(1 if failures else 0)
