"""
Result files: CSV tables and JSON documents, written atomically
"""
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from src.errors import FormatError, ParameterError

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.10g"
Records = Union[pd.DataFrame, Iterable[Union[Mapping[str, Any], BaseModel]]]


def _plain(value):
    """numpy scalars and arrays to JSON-ready Python values; NaN becomes null"""
    if isinstance(value, BaseModel):
        return _plain(value.model_dump())
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _as_frame(records: Records) -> pd.DataFrame:
    if isinstance(records, pd.DataFrame):
        return records
    rows = [r.as_row() if hasattr(r, "as_row") else _plain(r) for r in records]
    return pd.DataFrame(rows)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile("w", dir=path.parent, prefix=f".{path.name}.",
                                         suffix=".tmp", delete=False, encoding="utf-8", newline="")
    try:
        with handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(handle.name, path)
    except BaseException:
        if os.path.exists(handle.name):
            os.unlink(handle.name)
        raise


def write_results(records: Records, fmt: Literal["csv", "json"], path: Union[str, Path],
                  metadata: Optional[Mapping[str, Any]] = None) -> Path:
    """
    Write records to path via a temporary file and a rename.

    CSV: header row, 10 significant digits, metadata as leading '# key: value'
    lines. JSON: {"metadata": ..., "records": [...]} with keys in insertion order.
    """
    path = Path(path)
    if fmt not in ("csv", "json"):
        raise ParameterError(f"unknown result format '{fmt}'")

    if fmt == "csv":
        frame = _as_frame(records)
        if frame.empty:
            raise ParameterError("refusing to write an empty result set")
        header = "".join(f"# {k}: {v}\n" for k, v in (metadata or {}).items())
        text = header + frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    else:
        if isinstance(records, pd.DataFrame):
            rows = records.to_dict(orient="records")
        else:
            rows = list(records)
        if not rows:
            raise ParameterError("refusing to write an empty result set")
        document = {"metadata": _plain(dict(metadata or {})), "records": _plain(rows)}
        text = json.dumps(document, indent=2, ensure_ascii=False) + "\n"

    _atomic_write(path, text)
    logger.info("Wrote %s", path)
    return path


def write_document(document: Mapping[str, Any], path: Union[str, Path]) -> Path:
    """Single JSON object (not a record list), written atomically"""
    path = Path(path)
    _atomic_write(path, json.dumps(_plain(document), indent=2, ensure_ascii=False) + "\n")
    return path


def read_metadata(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return json.loads(path.read_text()).get("metadata", {})
    metadata = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            metadata[key] = value
    return metadata


def read_results(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Records of a file written by write_results"""
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            return list(json.loads(path.read_text())["records"])
        frame = pd.read_csv(path, comment="#")
    except (OSError, ValueError, KeyError) as e:
        raise FormatError(f"{path}: cannot read results ({e})") from e
    return [{k: _plain(v) for k, v in row.items()} for row in frame.to_dict(orient="records")]
