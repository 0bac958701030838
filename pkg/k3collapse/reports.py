import csv
import dataclasses
import json
import logging
import os
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np
from pydantic import BaseModel

logger = logging.getLogger(__name__)

SUMMARY_SUFFIX = ".json"
FAILURES_FILE = "failures.json"


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; complex numbers become [re, im], fractions their string form."""
    if isinstance(obj, BaseModel):
        return to_jsonable(obj.model_dump())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if np.isfinite(value) else repr(value)
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if isinstance(obj, Fraction):
        return str(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def write_json(path: str, payload: Any) -> str:
    """Sorted keys, shortest round-trip floats, no timestamps: equal inputs give equal bytes."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_jsonable(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")
    logger.info(f"[reports] Wrote {path}")
    return path


def read_json(path: str) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (complex, np.complexfloating)):
        return f"{format(value.real, '.17g')}{format(value.imag, '+.17g')}j"
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Every float printed with 17 significant digits."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.info(f"[reports] Wrote {path}")
    return path


def write_models_csv(path: str, rows: Sequence[BaseModel]) -> str:
    """CSV of pydantic rows, columns in field order."""
    if not rows:
        return write_csv(path, [], [])
    header = list(type(rows[0]).model_fields)
    return write_csv(path, header, ([getattr(r, h) for h in header] for r in rows))


def write_failures(out_dir: str, failures: list[dict]) -> str:
    return write_json(os.path.join(out_dir, FAILURES_FILE), {"failures": failures, "count": len(failures)})


def collect_summaries(out_dir: str) -> dict:
    """Every JSON summary in the output directory, keyed by file stem (the report itself excluded)."""
    summaries = {}
    for name in sorted(os.listdir(out_dir)):
        if name.endswith(SUMMARY_SUFFIX) and name not in ("report.json", FAILURES_FILE):
            summaries[name[: -len(SUMMARY_SUFFIX)]] = read_json(os.path.join(out_dir, name))
    return summaries
