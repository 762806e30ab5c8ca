"""
JSON interchange documents for polytopes, functions, specs, matrices and reports.

Floats are written in their shortest round-trip form (at most 17 significant digits),
so every document reads back bit-exactly.
"""

import json
import logging
import math
import sys
from typing import Any, Dict, List, Mapping, Union

import numpy as np

from .exceptions import InvalidDocument, ValuationLabError
from .functions import CompositionFunction, GridFunction, SimpleFunction
from .geometry import Box, Polytope, Support
from .reports import to_jsonable
from .valuation import ValuationSpec

logger = logging.getLogger(__name__)

Document = Dict[str, Any]


def _require(doc: Mapping[str, Any], key: str, kind: str) -> Any:
    if not isinstance(doc, Mapping):
        raise InvalidDocument(f"{kind} document must be a JSON object, got {type(doc).__name__}")
    if key not in doc:
        raise InvalidDocument(f"{kind} document is missing {key!r}")
    return doc[key]


def _number(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidDocument(f"{what} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise InvalidDocument(f"{what} must be finite, got {value!r}")
    return value


def _integer(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidDocument(f"{what} must be an integer, got {value!r}")
    return value


def _point_rows(value: Any, what: str) -> List[List[float]]:
    if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
        raise InvalidDocument(f"{what} must be a list of coordinate lists")
    return [[_number(x, what) for x in row] for row in value]


def polytope_to_document(polytope: Polytope) -> Document:
    return {"kind": "polytope", "dim": polytope.dim, "vertices": polytope.vertices.tolist()}


def box_to_document(box: Box) -> Document:
    return {"kind": "box", "dim": box.dim, "lower": list(box.lower), "upper": list(box.upper)}


def support_to_document(support: Support) -> Document:
    if isinstance(support, Box):
        return box_to_document(support)
    return polytope_to_document(support)


def support_from_document(doc: Mapping[str, Any]) -> Support:
    """
    Read a polytope ``{dim, vertices}`` or box ``{lower, upper}`` document.

    Raises:
        InvalidDocument: On missing keys, bad numbers or inconsistent dimensions
    """
    if not isinstance(doc, Mapping):
        raise InvalidDocument(f"support document must be a JSON object, got {type(doc).__name__}")
    if doc.get("kind") == "box" or ("lower" in doc and "vertices" not in doc):
        lower = [_number(x, "box lower corner") for x in _require(doc, "lower", "box")]
        upper = [_number(x, "box upper corner") for x in _require(doc, "upper", "box")]
        try:
            return Box(tuple(lower), tuple(upper))
        except ValueError as e:
            raise InvalidDocument(str(e)) from e
    vertices = _point_rows(_require(doc, "vertices", "polytope"), "polytope vertices")
    dim = doc.get("dim")
    if dim is not None:
        dim = _integer(dim, "polytope dim")
    try:
        return Polytope(np.array(vertices, dtype=float), dim=dim)
    except ValuationLabError:
        raise
    except ValueError as e:
        raise InvalidDocument(f"bad polytope vertices: {e}") from e


def polytope_from_document(doc: Mapping[str, Any]) -> Polytope:
    return support_from_document(doc).to_polytope()


def matrix_to_document(matrix: np.ndarray) -> Document:
    matrix = np.asarray(matrix, dtype=float)
    return {"kind": "matrix", "dim": int(matrix.shape[0]), "rows": matrix.tolist()}


def matrix_from_document(doc: Mapping[str, Any]) -> np.ndarray:
    rows = _point_rows(_require(doc, "rows", "matrix"), "matrix rows")
    matrix = np.array(rows, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidDocument(f"matrix must be square, got shape {matrix.shape}")
    return matrix


def simple_function_to_document(h: SimpleFunction) -> Document:
    return {
        "kind": "simple_function",
        "dim": h.dim,
        "pieces": [{"alpha": alpha, "polytope": support_to_document(s)} for alpha, s in h.pieces],
    }


def grid_function_to_document(h: GridFunction) -> Document:
    return {
        "kind": "grid_function",
        "dim": h.dim,
        "delta": h.delta,
        "cells": [{"index": list(index), "value": value} for index, value in h.cells.items()],
    }


def function_to_document(h: Union[SimpleFunction, GridFunction]) -> Document:
    if isinstance(h, GridFunction):
        return grid_function_to_document(h)
    return simple_function_to_document(h)


def function_from_document(doc: Mapping[str, Any]) -> Union[SimpleFunction, GridFunction]:
    """
    Read a simple function ``{dim, pieces}`` or grid function ``{dim, delta, cells}``.

    Raises:
        InvalidDocument: On malformed input
        OverlappingInteriors: If simple-function supports overlap
    """
    dim = _integer(_require(doc, "dim", "function"), "function dim")
    if "cells" in doc:
        delta = _number(_require(doc, "delta", "grid function"), "grid delta")
        cells = {}
        if not isinstance(doc["cells"], list):
            raise InvalidDocument("grid cells must be a list")
        for cell in doc["cells"]:
            index = _require(cell, "index", "grid cell")
            if not isinstance(index, list):
                raise InvalidDocument(f"grid cell index must be a list, got {index!r}")
            key = tuple(_integer(i, "grid cell index") for i in index)
            cells[key] = _number(_require(cell, "value", "grid cell"), "grid cell value")
        return GridFunction(delta, cells, dim)
    pieces = []
    raw_pieces = _require(doc, "pieces", "simple function")
    if not isinstance(raw_pieces, list):
        raise InvalidDocument("simple function pieces must be a list")
    for piece in raw_pieces:
        alpha = _number(_require(piece, "alpha", "piece"), "piece alpha")
        pieces.append((alpha, support_from_document(_require(piece, "polytope", "piece"))))
    return SimpleFunction(pieces, dim=dim)


def xi_from_document(doc: Mapping[str, Any]) -> CompositionFunction:
    expression = _require(doc, "expression", "xi")
    if not isinstance(expression, str):
        raise InvalidDocument(f"xi expression must be a string, got {expression!r}")
    p = _number(doc.get("p", 1.0), "xi p")
    d = _number(doc.get("d", 1.0), "xi d")
    label = doc.get("label") or expression
    return CompositionFunction.from_expression(expression, p, d, str(label))


def spec_to_document(spec: ValuationSpec) -> Document:
    return dict(kind="valuation_spec", **spec.to_dict())


def spec_from_document(doc: Mapping[str, Any]) -> ValuationSpec:
    """
    Read ``{n, p, xi: {label, expression, p, d}, s}``.

    Raises:
        InvalidDocument: On malformed input
        RotationInHighDim: If s != 0 with n >= 3
        InvalidSpec: If ξ fails its growth check
    """
    n = _integer(_require(doc, "n", "spec"), "spec n")
    p = _number(_require(doc, "p", "spec"), "spec p")
    xi_doc = _require(doc, "xi", "spec")
    if not isinstance(xi_doc, Mapping):
        raise InvalidDocument(f"spec xi must be an object, got {xi_doc!r}")
    xi_doc = dict(xi_doc)
    xi_doc.setdefault("p", p)
    xi = xi_from_document(xi_doc)
    s = _number(doc.get("s", 0.0), "spec s")
    return ValuationSpec(n, p, xi, s)


def dumps(doc: Any, indent: int = 2) -> str:
    return json.dumps(to_jsonable(doc), indent=indent, sort_keys=True)


def read_document(path: str) -> Any:
    """
    Load a JSON document from a file, or from standard input when ``path`` is "-".

    Raises:
        InvalidDocument: If the text is not JSON
        OSError: If the file cannot be read
    """
    if path == "-":
        text = sys.stdin.read()
    else:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidDocument(f"{path}: not valid JSON ({e.msg} at line {e.lineno})") from e


def write_document(doc: Any, path: str = "-") -> None:
    """
    Write a document as JSON to a file, or to standard output when ``path`` is "-".
    """
    text = dumps(doc) + "\n"
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    logger.info("Wrote %s", path)
