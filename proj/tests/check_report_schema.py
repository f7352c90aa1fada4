#!/usr/bin/env python3
"""Run `endtoend` and validate report.json against the published schema."""
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema


def main():
    cli, schema_path, out = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    shutil.rmtree(out, ignore_errors=True)
    subprocess.run([cli, "endtoend", "--seed", "5", "--out", str(out)], check=True, stdout=subprocess.DEVNULL)
    schema = json.loads(schema_path.read_text())
    report = json.loads((out / "report.json").read_text())
    jsonschema.validate(report, schema)
    if sum(report["time_at_level"].values()) <= 0:
        sys.exit("time_at_level is empty")
    print("report.json valid")


if __name__ == "__main__":
    main()
