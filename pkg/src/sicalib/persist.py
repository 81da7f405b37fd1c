"""CSV result files with shortest round-trip floats, and JSON run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

__all__ = [
    "SCHEMA_VERSION",
    "VERIFY_COLUMNS",
    "PROBE_COLUMNS",
    "format_value",
    "parse_value",
    "csv_text",
    "write_csv",
    "read_csv",
    "sha256_file",
    "write_manifest",
    "read_manifest",
]

SCHEMA_VERSION = 1

VERIFY_COLUMNS = (
    "process,alpha,beta,hurst,epsilon,x,q,w,mode,n_paths,refine_m,k,p_hat,ci_lo,ci_hi,p_limit,gap,bias_note,seed"
).split(",")
PROBE_COLUMNS = "process,epsilon,x,r,ratio31,ratio32,ratio33,target31,target32,target33".split(",")


def format_value(v) -> str:
    """Missing values (``None`` or nan) become empty fields; floats use ``repr``."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def parse_value(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows) -> None:
    Path(path).write_text(csv_text(columns, rows), encoding="utf-8")


def read_csv(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        return columns, [dict(zip(columns, map(parse_value, line))) for line in reader]


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, command: str, config: dict, seed: int | None, version: str, results: list[dict]) -> dict:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "master_seed": seed,
        "version": version,
        "results": results,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def read_manifest(path) -> dict:
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported manifest schema {manifest.get('schema_version')!r}")
    return manifest
