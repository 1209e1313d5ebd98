# qp_recast/api_routes.py

import json
import logging

from flask import Blueprint, current_app, jsonify, request

from .errors import FileFormatError, ParseError, RecastError
from .exactalg import rational_vector
from .fileformat import parse_system, report_to_dict
from .qpmodel import is_standard, nonlinear_term_count
from .reductions import (
    EmbedMode,
    first_integrals_from_M,
    lv_first_integrals,
    standardize,
    to_lotka_volterra,
    to_unimonomial,
    verify_projection_invariance,
)

logger = logging.getLogger(__name__)

api_bp = Blueprint("api", __name__, url_prefix="/api/v1")

# Keys the endpoints accept next to the SystemFile fields
OPTION_FIELDS = {"embed", "priority", "levels"}


@api_bp.errorhandler(RecastError)
def handle_recast_error(exc):
    status = 400 if isinstance(exc, FileFormatError) else 422
    body = {"error": str(exc), "type": type(exc).__name__}
    stage = getattr(exc, "stage", None)
    if stage:
        body["stage"] = stage
    return jsonify(body), status


def _read_request():
    """Split the JSON body into (SystemFile, options)."""
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        return None, None
    options = {key: data.pop(key) for key in OPTION_FIELDS if key in data}
    return parse_system(json.dumps(data)), options


def _bad_body():
    return jsonify({"error": "Invalid JSON body."}), 400


def _integral_list(integrals):
    return [
        {
            "exponents": [str(e) for e in fi.exponents],
            "constant": None if fi.constant is None else str(fi.constant),
            "label": fi.label,
            "over": list(fi.over),
            "text": fi.describe(),
        }
        for fi in integrals
    ]


@api_bp.route("/healthz", methods=["GET"])
def healthz():
    return jsonify({"status": "ok"})


@api_bp.route("/info", methods=["POST"])
def info():
    system_file, _ = _read_request()
    if system_file is None:
        return _bad_body()
    system = system_file.system
    return jsonify(
        {
            "n": system.n,
            "m": system.m,
            "ranks": system.rank_summary(),
            "standard": is_standard(system),
            "nonlinear_terms": nonlinear_term_count(system),
            "first_integrals": len(first_integrals_from_M(system)),
        }
    )


@api_bp.route("/standardize", methods=["POST"])
def standardize_system():
    system_file, options = _read_request()
    if system_file is None:
        return _bad_body()
    levels = options.get("levels")
    if levels is not None:
        try:
            levels = rational_vector(levels)
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), field="levels") from exc
    return jsonify(report_to_dict(standardize(system_file.system, levels)))


@api_bp.route("/to-lv", methods=["POST"])
def lotka_volterra():
    system_file, options = _read_request()
    if system_file is None:
        return _bad_body()
    report = to_lotka_volterra(
        system_file.system,
        EmbedMode.parse(options.get("embed")),
        options.get("priority"),
    )
    return jsonify(report_to_dict(report))


@api_bp.route("/to-unimonomial", methods=["POST"])
def unimonomial():
    system_file, options = _read_request()
    if system_file is None:
        return _bad_body()
    report = to_unimonomial(
        system_file.system,
        EmbedMode.parse(options.get("embed")),
        options.get("priority"),
    )
    body = report_to_dict(report)
    if report.projection is not None:
        body["projection_invariance"] = str(verify_projection_invariance(report))
    current_app.logger.info(f"to-unimonomial: n={report.output.n} m={report.output.m}")
    return jsonify(body)


@api_bp.route("/first-integrals", methods=["POST"])
def first_integrals():
    system_file, options = _read_request()
    if system_file is None:
        return _bad_body()
    system = system_file.system
    if request.args.get("lv") == "1":
        integrals = lv_first_integrals(system, options.get("priority"))
    else:
        integrals = first_integrals_from_M(system)
    return jsonify({"first_integrals": _integral_list(integrals)})
