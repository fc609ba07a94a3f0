"""Validate shipped family files and a generated report directory against docs/*.schema.json."""
import json
import pathlib
import sys

import jsonschema

root = pathlib.Path(__file__).resolve().parent.parent
family = json.loads((root / "docs/family.schema.json").read_text())
report = json.loads((root / "docs/limit_report.schema.json").read_text())

count = 0
for p in sorted((root / "families").glob("*.json")):
    jsonschema.validate(json.loads(p.read_text()), family)
    count += 1
for d in sys.argv[1:]:
    for p in sorted(pathlib.Path(d).rglob("*.json")):
        jsonschema.validate(json.loads(p.read_text()), report)
        count += 1
print(f"{count} files valid")
