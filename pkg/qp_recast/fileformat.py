# qp_recast/fileformat.py

"""
JSON files for systems and reduction reports.

Rationals are always written as strings ("3", "-1/2"), never floats, and
unknown keys are rejected so typos surface as ParseError instead of being
silently ignored.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError, RecastError, ReplayMismatch
from .exactalg import RMatrix, rational_vector, to_rational
from .qpmodel import FirstIntegral, Quadrature, QPSystem, validate
from .reductions import PIPELINES, Recipe, ReductionReport, rederive
from .transforms import MONOMIALS, VARIABLES, ProjectionOperator, StepKind, TransformStep

logger = logging.getLogger(__name__)

SYSTEM_FIELDS = {"variables", "lambda", "A", "B", "shift"}
REPORT_FIELDS = {
    "input",
    "output",
    "trace",
    "quadratures",
    "first_integrals",
    "projection",
    "recipe",
    "ranks",
}
STEP_FIELDS = {
    "kind",
    "stage",
    "matrix",
    "vector",
    "order",
    "axis",
    "retained",
    "row",
    "names",
    "dims_before",
    "dims_after",
}
QUADRATURE_FIELDS = {"variable", "lambda", "terms", "over"}
TERM_FIELDS = {"coefficient", "exponents"}
INTEGRAL_FIELDS = {"exponents", "constant", "label", "over"}
RECIPE_FIELDS = {"pipeline", "embed", "priority", "levels", "extra_rows"}
REQUIRED_PAYLOAD = {
    StepKind.QUASIMONOMIAL: "matrix",
    StepKind.EMBED_CONSTANTS: "matrix",
    StepKind.EMBED_DECOUPLED: "matrix",
    StepKind.NEW_TIME: "vector",
    StepKind.PERMUTE: "order",
    StepKind.DECOUPLE: "retained",
}


@dataclass(frozen=True)
class SystemFile:
    """
    A system plus its optional positivity shift.

    The stored system lives in translated coordinates x = x_physical + shift;
    `translate` applies the same shift to a physical initial point.
    """

    system: QPSystem
    shift: tuple = None

    def translate(self, x):
        if self.shift is None:
            return tuple(x)
        return tuple(float(v) + float(s) for v, s in zip(x, self.shift))


# ===================================================================
# PARSING HELPERS
# ===================================================================
def _line_of(text, key):
    """1-based line of the first occurrence of a JSON key, if it can be found."""
    if text is None:
        return None
    needle = f'"{key}"'
    for number, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return number
    return None


class _Reader:
    def __init__(self, text, source):
        self.text = text
        self.source = source

    def fail(self, message, field):
        return ParseError(message, field=field, line=_line_of(self.text, field.split(".")[-1]))

    def check_keys(self, data, allowed, field, required=()):
        if not isinstance(data, dict):
            raise self.fail("expected a JSON object", field)
        unknown = sorted(set(data) - allowed)
        if unknown:
            key = unknown[0]
            raise ParseError(f"unknown field '{key}'", field=key, line=_line_of(self.text, key))
        for key in required:
            if key not in data:
                raise self.fail(f"missing required field '{key}'", key)

    def rational(self, value, field):
        if not isinstance(value, (str, int)) or isinstance(value, bool):
            raise self.fail(f"{value!r} must be a rational string such as \"-1/2\"", field)
        try:
            return to_rational(value)
        except (TypeError, ValueError) as exc:
            raise self.fail(str(exc), field) from exc

    def vector(self, values, field):
        if not isinstance(values, list):
            raise self.fail("expected a list", field)
        return tuple(self.rational(v, field) for v in values)

    def grid(self, rows, field, cols=None):
        if not isinstance(rows, list):
            raise self.fail("expected a list of rows", field)
        parsed = [self.vector(row, field) for row in rows]
        if any(len(row) != len(parsed[0]) for row in parsed):
            raise self.fail("rows have different lengths", field)
        if parsed and cols is not None and len(parsed[0]) != cols:
            raise self.fail(f"rows must have {cols} entries", field)
        return RMatrix(parsed, cols=cols if not parsed else None)

    def integers(self, values, field):
        if not isinstance(values, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in values
        ):
            raise self.fail("expected a list of integers", field)
        return tuple(values)

    def count(self, value, field):
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise self.fail(f"{value!r} must be a non-negative integer", field)
        return value

    def label(self, value, field):
        if not isinstance(value, str):
            raise self.fail(f"{value!r} must be a string", field)
        return value

    def labels(self, values, field):
        if not isinstance(values, list):
            raise self.fail("expected a list of labels", field)
        return tuple(self.label(v, field) for v in values)

    def items(self, values, field):
        if not isinstance(values, list):
            raise self.fail("expected a list", field)
        return values


def _format(value):
    return str(value)


def _format_grid(matrix):
    return [[_format(x) for x in row] for row in matrix.tolist()]


# ===================================================================
# SYSTEM FILES
# ===================================================================
def _read_system(reader, data, field="system"):
    reader.check_keys(data, SYSTEM_FIELDS, field, required=("lambda", "A", "B"))
    lam = reader.vector(data["lambda"], "lambda")
    n = len(lam)
    names = data.get("variables")
    if names is not None and (
        not isinstance(names, list) or not all(isinstance(v, str) for v in names)
    ):
        raise reader.fail("expected a list of labels", "variables")
    A = reader.grid(data["A"], "A")
    if A.rows == 0 and n:
        A = RMatrix.zeros(n, 0)
    B = reader.grid(data["B"], "B", cols=n if not data["B"] else None)
    system = QPSystem(lam, A, B, tuple(names) if names is not None else None)
    try:
        validate(system)
    except RecastError as exc:
        field_name = getattr(exc, "field", field)
        line = _line_of(reader.text, field_name)
        raise ParseError(str(exc), field=field_name, line=line) from exc
    shift = data.get("shift")
    if shift is not None:
        shift = reader.vector(shift, "shift")
        if len(shift) != n:
            raise reader.fail(f"shift needs {n} entries", "shift")
    return SystemFile(system, shift)


def parse_system(text, source="<string>"):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return _read_system(_Reader(text, source), data)


def system_to_dict(sys, shift=None):
    data = {
        "variables": list(sys.var_names),
        "lambda": [_format(v) for v in sys.lam],
        "A": _format_grid(sys.A),
        "B": _format_grid(sys.B),
    }
    if shift is not None:
        data["shift"] = [_format(v) for v in shift]
    return data


def load_system(path):
    path = Path(path)
    system_file = parse_system(path.read_text(encoding="utf-8"), str(path))
    logger.debug(f"loaded {path}: n={system_file.system.n} m={system_file.system.m}")
    return system_file


def save_system(path, sys, shift=None):
    _write(path, system_to_dict(sys, shift))


def _write(path, data):
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


# ===================================================================
# REPORT FILES
# ===================================================================
def step_to_dict(step):
    data = {"kind": step.kind.value, "stage": step.stage}
    if step.matrix is not None:
        data["matrix"] = {
            "rows": step.matrix.rows,
            "cols": step.matrix.cols,
            "entries": _format_grid(step.matrix),
        }
    if step.vector is not None:
        data["vector"] = [_format(v) for v in step.vector]
    if step.order is not None:
        data["order"] = list(step.order)
    if step.axis is not None:
        data["axis"] = step.axis
    if step.retained is not None:
        data["retained"] = step.retained
    if step.row is not None:
        data["row"] = step.row
    if step.names is not None:
        data["names"] = list(step.names)
    if step.dims_before is not None:
        data["dims_before"] = list(step.dims_before)
        data["dims_after"] = list(step.dims_after)
    return data


def _read_matrix(reader, block, field="matrix"):
    reader.check_keys(block, {"rows", "cols", "entries"}, field, required=("cols", "entries"))
    cols = reader.count(block["cols"], f"{field}.cols")
    return reader.grid(block["entries"], field, cols=cols)


def _read_step(reader, data, index):
    field = f"trace[{index}]"
    reader.check_keys(data, STEP_FIELDS, field, required=("kind",))
    try:
        kind = StepKind(data["kind"])
    except ValueError as exc:
        raise reader.fail(f"unknown step kind {data['kind']!r}", "kind") from exc
    payload = REQUIRED_PAYLOAD.get(kind)
    if payload is not None and payload not in data:
        raise reader.fail(f"a {kind.value} step needs '{payload}'", payload)
    axis = data.get("axis")
    if kind == StepKind.PERMUTE and axis not in (VARIABLES, MONOMIALS):
        raise reader.fail(f"axis must be '{VARIABLES}' or '{MONOMIALS}'", "axis")
    dims = {}
    for key in ("dims_before", "dims_after"):
        if key in data:
            dims[key] = reader.integers(data[key], key)
            if len(dims[key]) != 2:
                raise reader.fail("expected [n, m]", key)
    return TransformStep(
        kind,
        matrix=_read_matrix(reader, data["matrix"]) if "matrix" in data else None,
        vector=reader.vector(data["vector"], "vector") if "vector" in data else None,
        order=reader.integers(data["order"], "order") if "order" in data else None,
        axis=axis,
        retained=reader.count(data["retained"], "retained") if "retained" in data else None,
        row=reader.count(data["row"], "row") if "row" in data else None,
        names=reader.labels(data["names"], "names") if "names" in data else None,
        stage=reader.label(data.get("stage", ""), "stage"),
        dims_before=dims.get("dims_before"),
        dims_after=dims.get("dims_after"),
    )


def _recipe_to_dict(recipe):
    if recipe is None:
        return None
    extra_rows = None
    if recipe.extra_rows is not None:
        extra_rows = {
            "rows": recipe.extra_rows.rows,
            "cols": recipe.extra_rows.cols,
            "entries": _format_grid(recipe.extra_rows),
        }
    return {
        "pipeline": recipe.pipeline,
        "embed": recipe.embed,
        "priority": None if recipe.priority is None else list(recipe.priority),
        "levels": None if recipe.levels is None else [_format(v) for v in recipe.levels],
        "extra_rows": extra_rows,
    }


def _read_recipe(reader, data):
    if data is None:
        return None
    reader.check_keys(data, RECIPE_FIELDS, "recipe", required=("pipeline",))
    pipeline = data["pipeline"]
    if pipeline not in PIPELINES:
        raise reader.fail(f"unknown pipeline {pipeline!r}", "pipeline")
    embed = data.get("embed")
    if embed is not None:
        embed = reader.label(embed, "embed")
    priority = data.get("priority")
    levels = data.get("levels")
    extra_rows = data.get("extra_rows")
    return Recipe(
        pipeline,
        embed=embed,
        priority=None if priority is None else reader.integers(priority, "priority"),
        levels=None if levels is None else reader.vector(levels, "levels"),
        extra_rows=None if extra_rows is None else _read_matrix(reader, extra_rows, "extra_rows"),
    )


def report_to_dict(report):
    projection = None
    if report.projection is not None:
        projection = {
            "P": _format_grid(report.projection.P),
            "retained": report.projection.retained_count,
        }
    return {
        "input": system_to_dict(report.input),
        "output": system_to_dict(report.output),
        "trace": [step_to_dict(step) for step in report.trace],
        "quadratures": [
            {
                "variable": q.variable,
                "lambda": _format(q.lam),
                "terms": [
                    {"coefficient": _format(c), "exponents": [_format(e) for e in row]}
                    for c, row in q.terms
                ],
                "over": list(q.over),
            }
            for q in report.quadratures
        ],
        "first_integrals": [
            {
                "exponents": [_format(e) for e in fi.exponents],
                "constant": None if fi.constant is None else _format(fi.constant),
                "label": fi.label,
                "over": list(fi.over),
            }
            for fi in report.first_integrals
        ],
        "projection": projection,
        "recipe": _recipe_to_dict(report.recipe),
        "ranks": report.rank_summary(),
    }


def _read_quadrature(reader, data):
    reader.check_keys(
        data, QUADRATURE_FIELDS, "quadratures", required=("variable", "lambda", "terms")
    )
    terms = []
    for term in reader.items(data["terms"], "terms"):
        reader.check_keys(term, TERM_FIELDS, "terms", required=tuple(TERM_FIELDS))
        coefficient = reader.rational(term["coefficient"], "coefficient")
        terms.append((coefficient, reader.vector(term["exponents"], "exponents")))
    return Quadrature(
        reader.label(data["variable"], "variable"),
        reader.rational(data["lambda"], "lambda"),
        tuple(terms),
        reader.labels(data.get("over", []), "over"),
    )


def _read_integral(reader, data):
    reader.check_keys(data, INTEGRAL_FIELDS, "first_integrals", required=("exponents",))
    constant = data.get("constant")
    try:
        return FirstIntegral(
            reader.vector(data["exponents"], "exponents"),
            None if constant is None else reader.rational(constant, "constant"),
            reader.label(data.get("label", ""), "label"),
            reader.labels(data.get("over", []), "over"),
        )
    except ValueError as exc:
        raise reader.fail(str(exc), "exponents") from exc


def parse_report(text, source="<string>", check_replay=True):
    """
    Parse a report file. With `check_replay` the trace is re-applied to the
    input and must reproduce the stored output exactly, and the derived
    items must match a fresh run of the recorded pipeline (ReplayMismatch).
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    reader = _Reader(text, source)
    reader.check_keys(data, REPORT_FIELDS, "report", required=("input", "output", "trace"))
    projection = None
    if data.get("projection") is not None:
        block = data["projection"]
        reader.check_keys(block, {"P", "retained"}, "projection", required=("P", "retained"))
        projection = ProjectionOperator(
            reader.grid(block["P"], "P"), reader.count(block["retained"], "retained")
        )
    trace = reader.items(data["trace"], "trace")
    report = ReductionReport(
        _read_system(reader, data["input"], "input").system,
        _read_system(reader, data["output"], "output").system,
        tuple(_read_step(reader, step, i) for i, step in enumerate(trace)),
        tuple(
            _read_quadrature(reader, q)
            for q in reader.items(data.get("quadratures", []), "quadratures")
        ),
        tuple(
            _read_integral(reader, fi)
            for fi in reader.items(data.get("first_integrals", []), "first_integrals")
        ),
        projection,
        _read_recipe(reader, data.get("recipe")),
    )
    if check_replay:
        check_report(report, source)
    return report


def check_report(report, source="report"):
    """
    The trace must reproduce the output, and quadratures, first integrals
    and the projection must be what the recorded pipeline derives.
    """
    try:
        replays = report.replays()
    except RecastError as exc:
        raise ReplayMismatch(f"{source}: trace cannot be replayed ({exc})") from exc
    if not replays:
        raise ReplayMismatch(f"{source}: replaying the trace does not reproduce the output")
    if report.recipe is None:
        if report.quadratures or report.first_integrals or report.projection is not None:
            raise ReplayMismatch(f"{source}: derived items without a recorded pipeline")
        return report
    try:
        fresh = rederive(report)
    except RecastError as exc:
        raise ReplayMismatch(f"{source}: recorded pipeline cannot be rerun ({exc})") from exc
    for item in ("trace", "quadratures", "first_integrals", "projection"):
        if getattr(fresh, item) != getattr(report, item):
            raise ReplayMismatch(f"{source}: {item} differs from a fresh {report.recipe.pipeline}")
    return report


def load_report(path, check_replay=True):
    path = Path(path)
    return parse_report(path.read_text(encoding="utf-8"), str(path), check_replay)


def save_report(path, report):
    _write(path, report_to_dict(report))


def rational_list(text):
    """'1,-1/2,0' -> tuple of Fractions (CLI vectors)."""
    return rational_vector(part.strip() for part in text.split(","))


def rational_matrix(text):
    """'1,0;0,2' -> RMatrix (CLI matrices)."""
    return RMatrix([rational_list(row) for row in text.split(";")])
