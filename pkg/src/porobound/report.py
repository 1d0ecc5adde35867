"""Deterministic JSON report serialization.

Floats are written with 17 significant digits so repeated runs are
byte-identical and every double round-trips exactly.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

SCHEMA = "porobound.report/1"


def matrix_entry(A):
    if A is None:
        return None
    A = np.asarray(A, dtype=float)
    return {"rows": int(A.shape[0]), "cols": int(A.shape[1]),
            "data": [float(x) for x in A.ravel(order="C")]}


def matrix_from_entry(entry) -> np.ndarray | None:
    if entry is None:
        return None
    return np.asarray(entry["data"], dtype=float).reshape(entry["rows"], entry["cols"])


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    if text in ("0", "-0"):
        return "0.0"
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def _write(obj, out, indent, level):
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for n, (key, value) in enumerate(obj.items()):
            out.append(("," if n else "") + pad + json.dumps(str(key)) + ": ")
            _write(value, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            out.append("[]")
            return
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in items):
            out.append("[")
            out.append(", ".join(_float(float(v)) if isinstance(v, (float, np.floating)) else str(int(v))
                                 for v in items))
            out.append("]")
            return
        out.append("[")
        for n, value in enumerate(items):
            out.append(("," if n else "") + pad)
            _write(value, out, indent, level + 1)
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(doc, indent: int = 2) -> str:
    out = []
    _write(doc, out, indent, 0)
    return "".join(out) + "\n"


def file_digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()
