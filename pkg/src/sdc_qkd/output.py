"""CSV/JSON serialization, atomic writes and the JSON output schemas."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

SIG_DIGITS = 12

SWEEP_COLUMNS = ("d", "family", "p", "r_bits", "r_tilde", "closed_form_bits", "positive_flag")
MONTECARLO_COLUMNS = ("d", "R", "family", "p", "n_trials", "mean_r_tilde_raw",
                      "mean_r_tilde_clipped", "stderr", "seed")
CRITICAL_COLUMNS = ("d", "family", "p_c", "saturated")
THEOREM_COLUMNS = ("check", "d", "R", "trials", "n_advantage", "violations", "extremum")
KEYRATE_COLUMNS = ("d", "state", "family", "p", "s_kappa", "s_tau", "r", "r_tilde",
                   "dc_capacity", "dc_advantage", "positive_key")
VALIDATE_COLUMNS = ("name", "passed", "detail")


def round_sig(x: float, digits: int = SIG_DIGITS):
    if not math.isfinite(x):
        return None
    return float(f"{x:.{digits}g}")


def to_jsonable(obj):
    """Round floats to 12 significant digits; tuples and numpy scalars to plain types."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        obj = obj.item()
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        return round_sig(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if not math.isfinite(v) else f"{v:.{SIG_DIGITS}g}"
    return str(v)


def render_csv(rows, columns, metadata: dict) -> str:
    buf = io.StringIO()
    for key in sorted(metadata):
        val = json.dumps(to_jsonable(metadata[key]), sort_keys=True)
        buf.write(f"# {key}: {val}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def render_json(payload: dict) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"


def read_csv(text: str) -> tuple[dict, list[dict]]:
    """Inverse of :func:`render_csv` up to formatting: (metadata, rows of strings)."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, val = line[2:].split(": ", 1)
            meta[key] = json.loads(val)
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))


def write_text(text: str, path) -> None:
    """Write via a temporary file in the target directory and an atomic rename."""
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}
_INT = {"type": "integer"}
_BOOL = {"type": "boolean"}
_STR = {"type": "string"}

METADATA_SCHEMA = {
    "type": "object",
    "required": ["artifact_version", "command", "config", "seed"],
    "properties": {
        "artifact_version": _STR,
        "command": _STR,
        "config": {"type": "object"},
        "config_hash": _STR,
        "seed": _INT,
    },
}


def _rows_schema(row_props: dict, required) -> dict:
    return {
        "type": "object",
        "required": ["metadata", "rows"],
        "additionalProperties": False,
        "properties": {
            "metadata": METADATA_SCHEMA,
            "rows": {"type": "array", "items": {
                "type": "object", "required": list(required), "properties": row_props}},
        },
    }


SCHEMAS = {
    "sweep": _rows_schema({
        "d": _INT, "family": _STR, "p": _NUM, "r_bits": _NUM, "r_tilde": _NUM,
        "closed_form_bits": _NUM_OR_NULL, "positive_flag": _BOOL}, SWEEP_COLUMNS),
    "montecarlo": _rows_schema({
        "d": _INT, "R": _INT, "family": _STR, "p": _NUM, "n_trials": _INT,
        "mean_r_tilde_raw": _NUM, "mean_r_tilde_clipped": _NUM,
        "stderr": {"type": "number", "minimum": 0}, "seed": _INT,
        "state": _STR, "stderr_clipped": {"type": "number", "minimum": 0},
        "n_positive": _INT, "reference_mean": _NUM}, MONTECARLO_COLUMNS),
    "critical": _rows_schema({
        "d": _INT, "family": _STR, "p_c": {"type": "number", "minimum": 0, "maximum": 1},
        "saturated": _BOOL}, CRITICAL_COLUMNS),
    "theorems": _rows_schema({
        "check": {"enum": ["theorem1", "convexity"]}, "d": _INT,
        "R": {"type": ["integer", "null"]}, "trials": _INT,
        "n_advantage": {"type": ["integer", "null"]},
        "violations": {"type": "integer", "minimum": 0}, "extremum": _NUM_OR_NULL},
        THEOREM_COLUMNS),
    "keyrate": {
        "type": "object",
        "required": ["metadata", "report"],
        "additionalProperties": False,
        "properties": {
            "metadata": METADATA_SCHEMA,
            "report": {"type": "object", "required": list(KEYRATE_COLUMNS), "properties": {
                "d": _INT, "state": _STR, "family": _STR, "p": _NUM,
                "s_kappa": {"type": "number", "minimum": 0},
                "s_tau": {"type": "number", "minimum": 0},
                "r": _NUM, "r_tilde": _NUM, "dc_capacity": _NUM,
                "dc_advantage": _BOOL, "positive_key": _BOOL,
                "labels": {"type": "array"}, "probs": {"type": "array"}}},
        },
    },
    "validate": _rows_schema({"name": _STR, "passed": _BOOL, "detail": _STR},
                             VALIDATE_COLUMNS),
}
