"""CSV loading with schema validation.

Inputs are the delimited files emitted by the feedrank CLI; nothing here
imports the simulator. Validation errors name the offending file and the
missing columns so broken pipelines fail with a message, not a traceback.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from pathlib import Path


class SchemaError(ValueError):
    """Input file missing, empty, or lacking required columns."""


def load_table(path: Path, required: tuple[str, ...]) -> list[dict[str, str]]:
    """Read a CSV into dict rows, enforcing required columns and nonemptiness."""
    if not path.exists():
        raise SchemaError(f"{path}: input file not found")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [col for col in required if col not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def numeric(rows: list[dict[str, str]], column: str, path: Path) -> list[float]:
    try:
        return [float(r[column]) for r in rows]
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric value in column {column!r}: {exc}") from exc


HIST_NAME = re.compile(r"hist_(clicking|highlighting)_(Flat|NonFlat)_eta([^_]+)_lam(.+)\.csv$")


def find_hist_files(in_dir: Path, kind: str) -> list[tuple[str, float, float, Path]]:
    """(mode, eta, lambda, path) for every per-cell histogram of one kind."""
    out = []
    for path in sorted(in_dir.glob(f"hist_{kind}_*.csv")):
        match = HIST_NAME.search(path.name)
        if match and match.group(1) == kind:
            out.append((match.group(2), float(match.group(3)), float(match.group(4)), path))
    return out


def load_run_context(in_dir: Path) -> tuple[str, str]:
    """(master_seed, config hash) from the frozen config copy.

    The hash is the sha256 of the canonical (sorted, separator-free) JSON,
    matching the hash the simulator reports for the same config.
    """
    path = in_dir / "config.json"
    if not path.exists():
        raise SchemaError(f"{path}: frozen config copy not found")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "master_seed" not in doc:
        raise SchemaError(f"{path}: missing column(s) master_seed")
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return str(doc["master_seed"]), hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]
