"""Text serialization with 17 significant digits.

JSON documents follow Python's ``json`` dialect (``Infinity``/``NaN`` are
allowed); delimited tables are comma-separated with a header row.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return f"{x:.17g}"


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    out: list[str] = []

    def emit(o, level):
        o = _plain(o)
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, bool) or o is None:
            out.append(json.dumps(o))
        elif isinstance(o, int):
            out.append(str(o))
        elif isinstance(o, float):
            out.append(fmt(o))
        elif isinstance(o, str):
            out.append(json.dumps(o))
        elif isinstance(o, dict):
            if not o:
                out.append("{}")
                return
            out.append("{\n")
            for i, (k, v) in enumerate(o.items()):
                out.append(f"{pad}{json.dumps(str(k))}: ")
                emit(v, level + 1)
                out.append(",\n" if i < len(o) - 1 else "\n")
            out.append(end + "}")
        elif isinstance(o, (list, tuple)):
            if not o:
                out.append("[]")
                return
            if all(isinstance(_plain(v), (int, float)) and not isinstance(v, bool) for v in o):
                # numeric rows stay on one line
                out.append("[" + ", ".join(str(v) if isinstance(_plain(v), int) else fmt(v) for v in o) + "]")
                return
            out.append("[\n")
            for i, v in enumerate(o):
                out.append(pad)
                emit(v, level + 1)
                out.append(",\n" if i < len(o) - 1 else "\n")
            out.append(end + "]")
        else:
            raise TypeError(f"cannot serialize {type(o).__name__}")

    emit(obj, 0)
    return "".join(out) + "\n"


def loads(text: str) -> Any:
    return json.loads(text)


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path: str | Path) -> Any:
    return loads(Path(path).read_text())


def table_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(_plain(v), float) else _plain(v) for v in row])
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]
