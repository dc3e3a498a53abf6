"""JSON problem files.

Layout::

    {"dimension": n,
     "base": [[{"re": .., "im": ..}, ...], ...],
     "terms": [{"function": {"kind": "monomial", "power": 2}, "matrix": [[...]]},
               {"function": {"kind": "rational", "pole": {"re": 1.5, "im": 0}}, ...},
               {"function": {"kind": "exp"}, ...}, ...],
     "parameter": {"name": "alpha", "affects": "base" | "term:i",
                   "mode": "shift-identity" | "scale",
                   "coefficient": {"re": -1, "im": 0},         (optional, default 1)
                   "grid": {"start": 1, "stop": 0.01, "steps": 12}}}   (optional)

With a parameter block the affected matrix A becomes A + mu*c*I
(shift-identity) or mu*c*A (scale), and :func:`parse_problem` returns a
:class:`~nepkit.bifurcation.ParametricNep`.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bifurcation import ParametricNep
from .errors import ParseError, SchemaError
from .operator import KINDS, MONOMIAL, RATIONAL, NepOperator, ScalarFunction, Term

SHIFT = "shift-identity"
SCALE = "scale"


@dataclass(frozen=True)
class ParameterBlock:
    name: str
    affects: object  # "base" or a term index
    mode: str
    coefficient: complex = 1 + 0j
    grid: tuple | None = None  # (start, stop, steps)

    def _apply(self, mat, mu):
        c = self.coefficient * mu
        if self.mode == SHIFT:
            return mat + c * np.eye(mat.shape[0])
        return c * mat

    def apply(self, op, mu):
        if self.affects == "base":
            return NepOperator(self._apply(op.base, mu), op.terms)
        terms = list(op.terms)
        t = terms[self.affects]
        terms[self.affects] = Term(self._apply(t.coeff, mu), t.func)
        return NepOperator(op.base, terms)

    def grid_values(self):
        if self.grid is None:
            return None
        start, stop, steps = self.grid
        return np.linspace(start, stop, steps)

    def to_dict(self):
        out = {
            "name": self.name,
            "affects": "base" if self.affects == "base" else f"term:{self.affects}",
            "mode": self.mode,
            "coefficient": _cdict(self.coefficient),
        }
        if self.grid is not None:
            out["grid"] = {"start": self.grid[0], "stop": self.grid[1], "steps": self.grid[2]}
        return out


@dataclass(frozen=True)
class ParameterizedBuilder:
    """mu -> block.apply(op, mu); kept as data so the family can be written back."""

    op: NepOperator
    block: ParameterBlock

    def __call__(self, mu):
        return self.block.apply(self.op, mu)


def _where(path):
    return path or "<root>"


def _require(obj, key, path, kind=None):
    if not isinstance(obj, dict):
        raise ParseError(f"{_where(path)}: expected an object")
    if key not in obj:
        raise ParseError(f"{_where(path)}: missing field {key!r}")
    value = obj[key]
    if kind is not None and (not isinstance(value, kind) or isinstance(value, bool)):
        raise ParseError(f"{path}.{key}: wrong type {type(value).__name__}")
    return value


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{path}: expected a number")
    if not math.isfinite(value):
        raise ParseError(f"{path}: non-finite number")
    return float(value)


def _complex(obj, path):
    if not isinstance(obj, dict) or set(obj) != {"re", "im"}:
        raise ParseError(f"{path}: expected {{\"re\": .., \"im\": ..}}")
    return complex(_number(obj["re"], path + ".re"), _number(obj["im"], path + ".im"))


def _matrix(rows, n, path):
    if not isinstance(rows, list):
        raise ParseError(f"{path}: expected a list of rows")
    if len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
        shape = (len(rows), len(rows[0]) if rows and isinstance(rows[0], list) else 0)
        raise SchemaError(f"{path}: matrix is {shape[0]}x{shape[1]}, dimension is {n}")
    out = np.empty((n, n), dtype=complex)
    for i, row in enumerate(rows):
        for j, entry in enumerate(row):
            out[i, j] = _complex(entry, f"{path}[{i}][{j}]")
    return out


def _function(obj, path):
    kind = _require(obj, "kind", path, str)
    if kind not in KINDS:
        raise ParseError(f"{path}.kind: unknown function kind {kind!r}")
    try:
        if kind == MONOMIAL:
            power = _require(obj, "power", path, int)
            return ScalarFunction.monomial(power)
        if kind == RATIONAL:
            return ScalarFunction.rational(_complex(_require(obj, "pole", path), path + ".pole"))
        return ScalarFunction(kind)
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{path}: {exc}") from exc


def _parameter(obj, n_terms, path):
    name = _require(obj, "name", path, str)
    affects_raw = _require(obj, "affects", path, str)
    if affects_raw == "base":
        affects = "base"
    elif affects_raw.startswith("term:") and affects_raw[5:].isdigit():
        affects = int(affects_raw[5:])
        if affects >= n_terms:
            raise SchemaError(f"{path}.affects: term index {affects} out of range")
    else:
        raise ParseError(f"{path}.affects: expected 'base' or 'term:i'")
    mode = _require(obj, "mode", path, str)
    if mode not in (SHIFT, SCALE):
        raise ParseError(f"{path}.mode: expected {SHIFT!r} or {SCALE!r}")
    coeff = 1 + 0j
    if "coefficient" in obj:
        coeff = _complex(obj["coefficient"], path + ".coefficient")
    grid = None
    if "grid" in obj:
        g = obj["grid"]
        gp = path + ".grid"
        start = _number(_require(g, "start", gp), gp + ".start")
        stop = _number(_require(g, "stop", gp), gp + ".stop")
        steps = _require(g, "steps", gp, int)
        if steps < 2:
            raise SchemaError(f"{gp}.steps: need at least 2 grid points")
        grid = (start, stop, steps)
    return ParameterBlock(name, affects, mode, coeff, grid)


def problem_from_dict(data):
    """Validated operator (or parametric family) from decoded JSON."""
    n = _require(data, "dimension", "", int)
    if n < 1:
        raise SchemaError("dimension: must be at least 1")
    base = _matrix(_require(data, "base", ""), n, "base")
    terms_raw = data.get("terms", [])
    if not isinstance(terms_raw, list):
        raise ParseError("terms: expected a list")
    terms = []
    for i, t in enumerate(terms_raw):
        path = f"terms[{i}]"
        func = _function(_require(t, "function", path), path + ".function")
        terms.append(Term(_matrix(_require(t, "matrix", path), n, path + ".matrix"), func))
    try:
        op = NepOperator(base, terms)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    if data.get("parameter") is None:
        return op
    block = _parameter(data["parameter"], len(terms), "parameter")
    return ParametricNep(n, ParameterizedBuilder(op, block))


def parse_problem(path):
    """Read a problem file; see the module docstring for the layout.

    Raises:
        ParseError: malformed JSON or a field of the wrong shape (with line or
            field context).
        SchemaError: dimension mismatches.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return problem_from_dict(data)
    except (ParseError, SchemaError) as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def _cdict(z):
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _mdict(mat):
    return [[_cdict(z) for z in row] for row in np.asarray(mat)]


def problem_to_dict(problem):
    """Canonical dict for an operator or a file-backed parametric family."""
    block = None
    if isinstance(problem, ParametricNep):
        if not isinstance(problem.builder, ParameterizedBuilder):
            raise TypeError("only parameter-block families can be written to a file")
        block = problem.builder.block
        problem = problem.builder.op
    out = {
        "dimension": problem.dim,
        "base": _mdict(problem.base),
        "terms": [{"function": t.func.to_dict(), "matrix": _mdict(t.coeff)} for t in problem.terms],
    }
    if block is not None:
        out["parameter"] = block.to_dict()
    return out


def dump_problem(problem):
    """Canonical JSON text (floats written with round-trip precision)."""
    return json.dumps(problem_to_dict(problem), indent=2) + "\n"
