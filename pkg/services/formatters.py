"""
Formatters module.

Contains the CSV and JSON writers for run artifacts and the status payloads
printed by commands. Floats are written with their shortest round-trip repr
so that re-reading a file recovers the exact values.
"""

import csv
import io
import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple

from services.criteria import EvalCurve
from services.errors import DataError
from services.explainers import Attribution

CURVE_COLUMNS = ("method", "criterion", "fraction", "mean_value", "n_examples", "n_capped")
PER_EXAMPLE_COLUMNS = ("method", "criterion", "example_id", "fraction", "value", "capped")
ATTRIBUTION_COLUMNS = ("example_id", "feature_index", "score", "rank")


def format_float(value) -> str:
    """Shortest repr that parses back to the same float."""
    return repr(float(value))


def atomic_write_text(path, text: str) -> None:
    """
    Write text to path through a temporary file in the same directory.

    Raises:
        DataError: the directory or file cannot be written
    """
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text(text)
        os.replace(tmp, path)
    except OSError as e:
        raise DataError(f"Error writing {path}: {str(e)}") from e


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buffer.getvalue()


def curve_rows(method: str, curve: EvalCurve) -> List[Tuple]:
    n_capped = [0] * len(curve.points) if curve.capped is None else curve.capped.sum(axis=0).tolist()
    return [
        (method, curve.criterion, format_float(fraction), format_float(value), curve.n_examples, int(capped))
        for (fraction, value), capped in zip(curve.points, n_capped)
    ]


def per_example_rows(method: str, curve: EvalCurve) -> List[Tuple]:
    rows = []
    for e, example_id in enumerate(curve.example_ids):
        for k, fraction in enumerate(curve.fractions):
            rows.append((
                method,
                curve.criterion,
                example_id,
                format_float(fraction),
                format_float(curve.values[e, k]),
                int(bool(curve.capped[e, k])),
            ))
    return rows


def write_curves_csv(path, curves: Sequence[Tuple[str, EvalCurve]]) -> None:
    """curves.csv: one row per (method, criterion, fraction)."""
    rows = [row for method, curve in curves for row in curve_rows(method, curve)]
    atomic_write_text(path, csv_text(CURVE_COLUMNS, rows))


def write_per_example_csv(path, curves: Sequence[Tuple[str, EvalCurve]]) -> None:
    """per_example.csv: one row per (method, criterion, example, fraction)."""
    rows = [row for method, curve in curves for row in per_example_rows(method, curve)]
    atomic_write_text(path, csv_text(PER_EXAMPLE_COLUMNS, rows))


def attribution_rows(example_id: int, attribution: Attribution) -> List[Tuple]:
    ranks = attribution.ranks()
    return [
        (example_id, i, format_float(score), int(ranks[i]))
        for i, score in enumerate(attribution.scores)
    ]


def write_attribution_csv(path, example_id: int, attribution: Attribution) -> None:
    """Per-feature score and 0-based rank."""
    atomic_write_text(path, csv_text(ATTRIBUTION_COLUMNS, attribution_rows(example_id, attribution)))


def auc_report(curves: Sequence[Tuple[str, EvalCurve]], config: Dict[str, Any]) -> Dict[str, Any]:
    """{"methods": {name: {"<criterion>_auc": float}}, "config": {...}}."""
    methods: Dict[str, Dict[str, float]] = {}
    for method, curve in curves:
        methods.setdefault(method, {})[f"{curve.criterion}_auc"] = curve.auc
    return {"methods": methods, "config": config}


def json_text(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2) + "\n"


def write_json(path, payload: Dict[str, Any]) -> None:
    atomic_write_text(path, json_text(payload))


def status_payload(**fields) -> str:
    """One-line JSON status printed on stdout."""
    return json.dumps({"status": "success", **fields})
