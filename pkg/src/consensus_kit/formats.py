"""File formats owned by the command-line front end.

Matrix files are JSON objects ``{"rows": r, "cols": c, "data": [...]}`` with
row-major entries; complex entries are ``{"im": ..., "re": ...}`` objects.
Edge lists are text files with a first line ``m=<count>`` followed by
header-free CSV lines ``i,j,w`` (1-based indices; ``(i, j, w)`` adds w to
entry (i, j)).  Reports serialize canonically: sorted keys, 17-significant-
digit floats, no whitespace; identical values always produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

from consensus_kit.coupling import CouplingMatrix, EdgeList, laplacian_from_edges, validate_coupling

__all__ = [
    "canonical_json",
    "complex_to_obj",
    "matrix_to_obj",
    "parse_matrix_obj",
    "parse_matrix_text",
    "parse_edge_list_text",
    "parse_coupling_text",
    "sha256_hex",
    "trajectory_csv",
]


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    return format(float(x), ".17g")


def _emit(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return _emit(complex_to_obj(complex(obj)))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        return "{" + ",".join(f"{json.dumps(str(k))}:{_emit(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_emit(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _emit(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, %.17g floats, trailing newline."""
    return _emit(obj) + "\n"


def complex_to_obj(z: complex) -> dict:
    return {"im": float(z.imag), "re": float(z.real)}


def matrix_to_obj(a) -> dict:
    """Matrix file object for a real or complex 2-D array."""
    arr = np.asarray(a)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        data = [complex_to_obj(complex(z)) for z in arr.ravel()]
    else:
        data = [float(x) for x in arr.ravel()]
    return {"cols": int(arr.shape[1]), "data": data, "rows": int(arr.shape[0])}


def parse_matrix_obj(obj, name: str = "matrix") -> np.ndarray:
    """Parse a matrix file object back into an ndarray (complex only if needed)."""
    if not isinstance(obj, dict):
        raise ValueError(f"{name} must be an object with rows/cols/data")
    for key in ("rows", "cols", "data"):
        if key not in obj:
            raise ValueError(f"{name} is missing the {key!r} field")
    rows, cols = obj["rows"], obj["cols"]
    if not (isinstance(rows, int) and isinstance(cols, int) and rows > 0 and cols > 0):
        raise ValueError(f"{name} rows/cols must be positive integers")
    data = obj["data"]
    if not isinstance(data, list) or len(data) != rows * cols:
        raise ValueError(f"{name} data must hold rows*cols = {rows * cols} entries")
    values = []
    has_complex = False
    for k, entry in enumerate(data):
        if isinstance(entry, dict):
            if set(entry) != {"re", "im"}:
                raise ValueError(f"{name} entry {k} must have exactly re/im fields")
            z = complex(float(entry["re"]), float(entry["im"]))
            has_complex = has_complex or z.imag != 0.0
            values.append(z)
        elif isinstance(entry, (int, float)) and not isinstance(entry, bool):
            values.append(complex(float(entry), 0.0))
        else:
            raise ValueError(f"{name} entry {k} is not numeric")
    arr = np.array(values, dtype=np.complex128).reshape(rows, cols)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr if has_complex else arr.real.copy()


def parse_matrix_text(text: str, name: str = "matrix") -> np.ndarray:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{name} is not valid JSON: {exc}") from exc
    return parse_matrix_obj(obj, name)


def parse_edge_list_text(text: str) -> EdgeList:
    """Parse the ``m=<count>`` / ``i,j,w`` edge-list format."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("m="):
        raise ValueError("edge list must start with a line m=<count>")
    try:
        m = int(lines[0][2:])
    except ValueError as exc:
        raise ValueError(f"invalid agent count line {lines[0]!r}") from exc
    edges = []
    for ln in lines[1:]:
        parts = [p.strip() for p in ln.split(",")]
        if len(parts) != 3:
            raise ValueError(f"edge line {ln!r} must have exactly three fields i,j,w")
        try:
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ValueError(f"edge line {ln!r} is not numeric") from exc
    return EdgeList(m=m, edges=edges)


def parse_coupling_text(text: str) -> CouplingMatrix:
    """Parse either a matrix file or an edge list into a validated coupling matrix."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        arr = parse_matrix_text(text, "coupling matrix")
        if np.iscomplexobj(arr):
            raise ValueError("coupling matrix must be real")
        return validate_coupling(arr)
    if stripped.startswith("m="):
        return laplacian_from_edges(parse_edge_list_text(text))
    raise ValueError("unrecognized coupling format: expected a JSON matrix object or an m=<count> edge list")


def sha256_hex(*chunks: bytes) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return h.hexdigest()


def trajectory_csv(times: np.ndarray, states: np.ndarray) -> str:
    """Plot-ready CSV with header ``t,x_1_1,...,x_m_n`` (row-major agent states)."""
    if np.iscomplexobj(states):
        raise ValueError("trajectory CSV supports real states only")
    n_rec, m, n = states.shape
    header = "t," + ",".join(f"x_{i}_{j}" for i in range(1, m + 1) for j in range(1, n + 1))
    rows = [header]
    flat = states.reshape(n_rec, m * n)
    for k in range(n_rec):
        rows.append(",".join([_fmt_float(float(times[k]))] + [_fmt_float(float(v)) for v in flat[k]]))
    return "\n".join(rows) + "\n"
