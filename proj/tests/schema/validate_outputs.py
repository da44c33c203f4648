#!/usr/bin/env python3
# Copyright 2026 The PackSense Authors. All rights reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Runs every packsense subcommand that prints JSON on a small corpus and
validates the output (and the manifest lines) against the shipped schemas."""
import argparse
import json
import pathlib
import shutil
import subprocess
import sys

from jsonschema import Draft202012Validator
from referencing import Registry, Resource


def load_schemas(directory):
    schemas = {}
    for path in sorted(pathlib.Path(directory).glob("*.schema.json")):
        schemas[path.name.removesuffix(".schema.json")] = json.loads(path.read_text())
    registry = Registry().with_resources(
        (s["$id"], Resource.from_contents(s)) for s in schemas.values())
    return {name: Draft202012Validator(s, registry=registry) for name, s in schemas.items()}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cli", required=True)
    ap.add_argument("--schemas", required=True)
    ap.add_argument("--work-dir", required=True)
    args = ap.parse_args()

    validators = load_schemas(args.schemas)
    for v in validators.values():
        Draft202012Validator.check_schema(v.schema)
    work = pathlib.Path(args.work_dir)
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    failures = []

    def run(*argv, expect=0):
        p = subprocess.run([args.cli, *argv], capture_output=True, text=True)
        if p.returncode != expect:
            failures.append(f"{argv[0]}: exit {p.returncode}, expected {expect}\n{p.stderr}")
        return p

    def check(name, text, label):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            failures.append(f"{label}: not JSON ({e})")
            return None
        errors = sorted(validators[name].iter_errors(doc), key=str)
        for e in errors[:5]:
            failures.append(f"{label}: {e.message} at {list(e.absolute_path)}")
        return doc

    corpus = work / "corpus"
    check("corpus-summary", run("gen-corpus", "--out", str(corpus), "--pretrain", "6", "--finetune", "20",
                                "--test", "10", "--seed", "3").stdout, "gen-corpus")
    manifest = corpus / "manifest.jsonl"
    lines = manifest.read_text().splitlines()
    check("manifest-header", lines[0], "manifest header")
    for i, line in enumerate(lines[1:], 1):
        check("manifest-entry", line, f"manifest line {i}")

    tiny = ["--layers", "1", "--heads", "2", "--d-model", "16", "--d-ffn", "32", "--epochs", "1",
            "--max-windows", "40", "--seed", "3"]
    pre, fin = work / "pre.palm", work / "fin.palm"
    run("pretrain", "--manifest", str(manifest), "--out", str(pre), *tiny)
    run("finetune", "--model", str(pre), "--manifest", str(manifest), "--out", str(fin), "--epochs", "1",
        "--max-windows", "40", "--knn-files", "10", "--seed", "3")

    entries = [json.loads(l) for l in lines[1:]]
    for e in entries[-3:]:
        path = str(corpus / e["path"])
        check("scan-report", run("scan", "--model", str(fin), "--input", path).stdout, f"scan {e['path']}")
        for g in ("file", "section", "window"):
            check("entropy-scan", run("entropy-scan", "--input", path, "--granularity", g).stdout,
                  f"entropy-scan {g}")
    source = str(corpus / entries[0]["path"])
    for scheme in ("MonoSub", "Transposition", "PolySub", "Encoding", "BytePadding"):
        extra = ["--pad-amount", "512"] if scheme == "BytePadding" else []
        check("adversarial", run("gen-adversarial", "--input", source, "--out", str(work / f"{scheme}.bin"),
                                 "--scheme", scheme, *extra).stdout, f"gen-adversarial {scheme}")
    out = work / "eval.json"
    doc = check("eval", run("eval", "--model", str(fin), "--manifest", str(manifest), "--out", str(out)).stdout, "eval")
    if doc is not None and json.loads(out.read_text()) != doc:
        failures.append("eval --out file differs from stdout")

    usage = run("scan", expect=2)
    if "Usage" not in usage.stderr and "usage" not in usage.stderr:
        failures.append("usage error did not print the synopsis")

    for f in failures:
        print("FAIL:", f)
    print(f"schema validation: {'ok' if not failures else f'{len(failures)} failure(s)'}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
