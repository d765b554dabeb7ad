# exports.py - deterministic file output: atomic writes, 17-digit JSON, pandas CSV

import json
import math
import os
import tempfile
from enum import Enum
from pathlib import Path
from typing import Any, Union

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write through a temp file in the target directory, then os.replace"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug("💾 file written", path=str(path), bytes=len(text))
    return path


def _float_text(x: float) -> str:
    if math.isnan(x):
        return "null"
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _plain(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="python")
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _encode(obj: Any, indent: int, level: int) -> str:
    obj = _plain(obj)
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _float_text(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj: Any, indent: int = 2) -> str:
    """JSON with every float at 17 significant digits, inf as the string "inf", keys in insertion order"""
    return _encode(obj, indent, 0) + "\n"


def write_json(obj: Any, path: PathLike) -> Path:
    return atomic_write_text(path, dumps_json(obj))


def read_json(path: PathLike) -> Any:
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def csv_text(frame: pd.DataFrame) -> str:
    return frame.to_csv(float_format="%.17g", index=False, lineterminator="\n")


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    return atomic_write_text(path, csv_text(frame))


def envelope(record: dict, config: Any, version: str) -> dict:
    """Record plus the run configuration and version string"""
    out = dict(record)
    out["config"] = _plain(config) if config is not None else None
    if isinstance(config, BaseModel):
        out["config"] = config.model_dump(mode="json")
    out["version"] = version
    return out
