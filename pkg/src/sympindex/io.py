"""Problem files: JSON loading with schema checks, and serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .distribution import Distribution
from .errors import SympIndexError
from .forms import Subspace, SymBilinearForm
from .indexform import EndpointData
from .lagrangian import PSPair
from .system import (DEFAULT_GRID_STEPS, DEFAULT_SYMP_TOL, CoefficientField,
                     SymplecticProblem, validate)


class ProblemFileError(SympIndexError):
    """Base class of problem-file errors; ``where`` locates the problem."""

    def __init__(self, message, where=None):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


class ParseError(ProblemFileError):
    pass


class SchemaError(ProblemFileError):
    pass


class ValidationError(ProblemFileError):
    pass


_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_matrix_stack = {"type": "array", "items": _matrix}

PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["n", "interval", "coefficients", "initial"],
    "properties": {
        "name": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "interval": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "grid_steps": {"type": "integer", "minimum": 2},
        "symp_tol": {"type": "number", "exclusiveMinimum": 0},
        "coefficients": {
            "type": "object",
            "required": ["kind"],
            "oneOf": [
                {"properties": {"kind": {"const": "constant"}, "A": _matrix, "B": _matrix,
                                "C": _matrix},
                 "required": ["A", "B", "C"]},
                {"properties": {"kind": {"const": "interpolated"},
                                "times": {"type": "array", "items": {"type": "number"},
                                          "minItems": 2},
                                "A": _matrix_stack, "B": _matrix_stack, "C": _matrix_stack},
                 "required": ["times", "A", "B", "C"]},
                {"properties": {"kind": {"const": "builtin"}, "name": {"type": "string"},
                                "params": {"type": "object"}},
                 "required": ["name"]},
            ],
        },
        "initial": {
            "type": "object",
            "required": ["P_basis", "S"],
            "properties": {"P_basis": _matrix, "S": _matrix},
        },
        "distribution": {
            "type": "object",
            "required": ["kind", "frame"],
            "properties": {"kind": {"enum": ["constant", "interpolated"]},
                           "times": {"type": "array", "items": {"type": "number"}},
                           "frame": {"type": "array"}},
        },
        "endpoint": {
            "type": "object",
            "required": ["Q_basis", "S_Q"],
            "properties": {"Q_basis": _matrix, "S_Q": _matrix},
        },
        "expected": {"type": "object"},
    },
}


@dataclass(frozen=True)
class LoadedProblem:
    problem: SymplecticProblem
    distribution: Distribution | None = None
    endpoint: EndpointData | None = None
    name: str | None = None


def _array(node, shape, where):
    a = np.asarray(node, dtype=float)
    if a.size == 0:
        a = a.reshape(shape if all(s is not None for s in shape) else (0,) * len(shape))
    if a.ndim != len(shape) or any(s is not None and d != s for d, s in zip(a.shape, shape)):
        raise SchemaError(f"expected shape {tuple(s if s is not None else '*' for s in shape)},"
                          f" got {a.shape}", where)
    return a


def _symmetric(m, name, where):
    if m.size and np.abs(m - np.swapaxes(m, -1, -2)).max() > 1e-12 * max(1.0, np.abs(m).max()):
        raise SchemaError(f"{name} symmetric: matrix is not symmetric", where)


def _basis(node, n, where) -> Subspace:
    rows = _array(node, (None, n), where) if len(node) else np.zeros((0, n))
    try:
        return Subspace(rows.T)
    except ValueError as exc:
        raise ValidationError(f"basis vectors are linearly dependent ({exc})", where) from None


def parse_problem(doc: dict, source: str = "<document>", grid_steps=None,
                  symp_tol=None) -> LoadedProblem:
    """Build validated objects from a decoded problem document."""
    from .frontends import builtin_coefficients

    try:
        jsonschema.validate(doc, PROBLEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise SchemaError(exc.message, f"{source}:/{path}") from None
    n = doc["n"]
    interval = tuple(doc["interval"])
    co = doc["coefficients"]
    where = f"{source}:/coefficients"
    try:
        if co["kind"] == "constant":
            A, B, C = (_array(co[k], (n, n), f"{where}/{k}") for k in "ABC")
            _symmetric(B, "B", f"{where}/B")
            _symmetric(C, "C", f"{where}/C")
            coeffs = CoefficientField.constant(A, B, C, interval)
        elif co["kind"] == "interpolated":
            m = len(co["times"])
            A, B, C = (_array(co[k], (m, n, n), f"{where}/{k}") for k in "ABC")
            _symmetric(B, "B", f"{where}/B")
            _symmetric(C, "C", f"{where}/C")
            coeffs = CoefficientField.interpolated(co["times"], A, B, C)
            if not np.allclose(coeffs.interval, interval):
                raise SchemaError("sample times must span the interval", where)
        else:
            coeffs = builtin_coefficients(co["name"], co.get("params", {}), interval)
        if coeffs.n != n:
            raise SchemaError(f"coefficients have dimension {coeffs.n}, n is {n}", where)
    except ProblemFileError:
        raise
    except SympIndexError as exc:
        raise ValidationError(str(exc), where) from None

    steps = grid_steps or doc.get("grid_steps", DEFAULT_GRID_STEPS)
    diag = validate(coeffs, steps)
    if not diag.passed:
        raise ValidationError("; ".join(diag.messages), where)

    ini = doc["initial"]
    P = _basis(ini["P_basis"], n, f"{source}:/initial/P_basis")
    S = _array(ini["S"], (P.dim, P.dim), f"{source}:/initial/S") if P.dim else np.zeros((0, 0))
    _symmetric(S, "S", f"{source}:/initial/S")
    try:
        problem = SymplecticProblem(coeffs, PSPair(P, SymBilinearForm(S)), steps,
                                    symp_tol or doc.get("symp_tol", DEFAULT_SYMP_TOL))
    except SympIndexError as exc:
        raise ValidationError(str(exc), f"{source}:/initial") from None

    D = None
    if "distribution" in doc:
        dd = doc["distribution"]
        w = f"{source}:/distribution"
        if dd["kind"] == "constant":
            D = Distribution.constant(_array(dd["frame"], (n, None), w))
        else:
            if "times" not in dd:
                raise SchemaError("interpolated distribution needs times", w)
            D = Distribution.interpolated(dd["times"],
                                          _array(dd["frame"], (len(dd["times"]), n, None), w))
        try:
            D.check(coeffs, problem.times[:: max(1, steps // 256)])
        except SympIndexError as exc:
            raise ValidationError(str(exc), w) from None

    E = None
    if "endpoint" in doc:
        w = f"{source}:/endpoint"
        Q = _basis(doc["endpoint"]["Q_basis"], n, f"{w}/Q_basis")
        SQ = _array(doc["endpoint"]["S_Q"], (Q.dim, Q.dim), f"{w}/S_Q") if Q.dim \
            else np.zeros((0, 0))
        _symmetric(SQ, "S_Q", f"{w}/S_Q")
        E = EndpointData(Q, SymBilinearForm(SQ))
    return LoadedProblem(problem, D, E, doc.get("name"))


def load_problem(path, grid_steps=None, symp_tol=None) -> LoadedProblem:
    """Read and validate a problem file.

    Raises
    ------
    ParseError, SchemaError, ValidationError
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from None
    return parse_problem(doc, str(path), grid_steps, symp_tol)


def problem_to_dict(problem: SymplecticProblem, distribution: Distribution | None = None,
                    endpoint: EndpointData | None = None, name: str | None = None,
                    expected: dict | None = None) -> dict:
    """Serializable document; coefficients without a source are sampled on the grid."""
    c = problem.coefficients
    src = c.source if c.source is not None else c.samples(problem.times)
    doc = {}
    if name:
        doc["name"] = name
    doc.update({
        "n": problem.n,
        "interval": list(problem.interval),
        "grid_steps": problem.grid_steps,
        "coefficients": src,
        "initial": {"P_basis": problem.ell0.P.frame.T.tolist(),
                    "S": problem.ell0.S.entries.tolist()},
    })
    if distribution is not None:
        if distribution.source is not None:
            doc["distribution"] = distribution.source
        else:
            ts = problem.times[:: max(1, problem.grid_steps // 512)]
            doc["distribution"] = {"kind": "interpolated", "times": ts.tolist(),
                                   "frame": [distribution(t).tolist() for t in ts]}
    if endpoint is not None:
        doc["endpoint"] = {"Q_basis": endpoint.Q.frame.T.tolist(),
                           "S_Q": endpoint.S_Q.entries.tolist()}
    if expected is not None:
        doc["expected"] = _jsonable(expected)
    return doc


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def dumps(doc) -> str:
    """Deterministic JSON text."""
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
