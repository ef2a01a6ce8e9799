"""
JSON and CSV serialization of traces and experiment results
"""

import csv
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar, Union

from loguru import logger
from pydantic import BaseModel

from app.core.errors import InvalidInputError

FORMATS = ("json", "csv")

ModelT = TypeVar("ModelT", bound=BaseModel)


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    if text in ("True", "False"):
        return text == "True"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def emit_report(result: BaseModel, path: Union[str, Path], format: str = "json") -> Path:
    """
    Write a result model to disk.

    json: the full nested model (including per-step traces).
    csv: the flat rows of `result.csv_rows()`, doubles with 17 significant digits.
    """
    if format not in FORMATS:
        raise InvalidInputError(f"Unknown report format '{format}', expected one of {FORMATS}")
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)

    if format == "json":
        path.write_text(result.model_dump_json(indent=2), encoding="utf-8")
    else:
        rows: List[Dict[str, Any]] = result.csv_rows()
        fieldnames: List[str] = []
        for row in rows:
            for key in row:
                if key not in fieldnames:
                    fieldnames.append(key)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({key: _format_cell(row.get(key)) for key in fieldnames})

    logger.info(f"📝 Report written to {path} ({format})")
    return path


def load_report(
    path: Union[str, Path],
    model: Optional[Type[ModelT]] = None,
) -> Union[ModelT, Dict[str, Any], List[Dict[str, Any]]]:
    """
    Read a report back.

    JSON gives the parsed model when `model` is given, otherwise a dict.
    CSV gives a list of row dicts with numbers, booleans and empty cells
    (None) converted back.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with path.open("r", encoding="utf-8", newline="") as handle:
            return [{key: _parse_cell(value) for key, value in row.items()} for row in csv.DictReader(handle)]

    text = path.read_text(encoding="utf-8")
    if model is not None:
        return model.model_validate_json(text)
    return json.loads(text)


def strip_wall_time(payload: Any) -> Any:
    """Drop wall-clock fields so that reports of repeated runs compare equal"""
    if isinstance(payload, dict):
        return {
            key: strip_wall_time(value)
            for key, value in payload.items()
            if not (key.endswith("_runtime") or key.endswith("_time"))
        }
    if isinstance(payload, list):
        return [strip_wall_time(item) for item in payload]
    if isinstance(payload, float) and math.isnan(payload):
        return None
    return payload
