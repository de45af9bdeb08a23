"""JSON report documents and LaTeX fragments.

Every expression is stored as ``{"text": ..., "latex": ...}``; the text form
re-parses to an equal object under the document's ``declarations``.
Documents are plain dicts serialized with sorted keys, so identical runs give
byte-identical output.
"""

from __future__ import annotations

import json

from ..algebra import ParamElem
from ..detsolve import ConservationInventory, SolutionBasis
from ..integrability import AnalysisReport, Obstruction
from ..jet import DiffPoly, EvolutionEquation
from ..pdo import DEGREE_SYMBOL
from ..varcalc import ConservedVector
from .parser import Context, canonical_checksum, parse_expr, parse_param_expr
from .render import render, render_param, var_text

SCHEMA = "jetsym-report"
SCHEMA_VERSION = 1


def expr(p: DiffPoly) -> dict:
    return {"text": render(p), "latex": render(p, "latex")}


def param(e) -> dict:
    e = ParamElem.coerce(e)
    return {"text": render_param(e), "latex": render_param(e, latex=True)}


def _header(kind: str, eq: EvolutionEquation, scenario: str | None) -> dict:
    target = eq.specialize(scenario)
    return {
        "schema": SCHEMA,
        "version": SCHEMA_VERSION,
        "kind": kind,
        "equation": {
            "name": eq.name,
            "checksum": canonical_checksum(eq),
            "scenario": scenario,
            "rhs": expr(target.rhs),
        },
    }


def _declarations(eq: EvolutionEquation, unknowns=(), symbolic=False) -> dict:
    params = list(eq.params) + ([DEGREE_SYMBOL] if symbolic else [])
    functions = {f.name: f.base for f in eq.aux.values()}
    for u in unknowns:
        functions[u.name] = "t"
    return {"params": params, "nonzero": sorted(eq.nonzero),
            "functions": dict(sorted(functions.items()))}


def context(doc: dict) -> Context:
    """Parsing context for the expressions of a document."""
    d = doc["declarations"]
    return Context(d["params"], d["functions"])


def load_expression(doc: dict, item: dict) -> DiffPoly:
    return parse_expr(item["text"], context(doc))


def load_param(doc: dict, item: dict) -> ParamElem:
    return parse_param_expr(item["text"], doc["declarations"]["params"])


# -- integrability reports ----------------------------------------------------------


def _obstruction(o: Obstruction) -> dict:
    d = {
        "step": o.step,
        "degree": o.degree,
        "resolution": o.resolution,
        "condition": expr(o.raw),
        "coefficient_form": expr(o.coefficient_form()),
        "forced": [e.to_json() for e in o.forced],
        "essential": [{"jet": var_text(e["jet"]), "unit": param(e["unit"]),
                       "factor": param(e["factor"])} for e in o.essential],
        "assumptions_nonzero": [param(a) for a in o.assumptions],
    }
    if o.mixed_u2_u1 is not None:
        d["mixed_u2_u1"] = expr(o.mixed_u2_u1)
        d["mixed_u2_u1_coefficient_form"] = expr(o.coefficient_form(o.mixed_u2_u1))
    if o.residual:
        d["residual"] = [expr(r) for r in o.residual]
    return d


def analysis_document(rep: AnalysisReport, eq: EvolutionEquation) -> dict:
    doc = _header(f"{rep.driver}-test", eq, rep.scenario)
    lead = rep.leading_condition
    doc.update({
        "declarations": _declarations(eq, rep.unknowns, rep.degree == "symbolic"),
        "rank": rep.rank,
        "degree": rep.degree,
        "bound": rep.bound,
        "verdict": rep.verdict,
        "nonexistence_rank": rep.nonexistence_rank,
        "leading_condition": {"degree": lead["degree"], "kappa": param(lead["kappa"]),
                              "unknown": lead["unknown"]},
        "leading_constant": rep.leading_constant,
        "steps": [{"step": s.step, "degree": s.degree, "coefficient": expr(s.coefficient),
                   "exact": s.exact} for s in rep.steps],
        "obstructions": [_obstruction(o) for o in rep.obstructions],
        "log": [e.to_json() for e in rep.log],
        "unknowns": [{"name": u.name, "role": u.role, "status": u.status} for u in rep.unknowns],
        "assumptions_nonzero": [param(a) for a in rep.assumptions],
        "definition_check": rep.definition_check,
        "notes": list(rep.notes),
    })
    if rep.interpolation is not None:
        ip = rep.interpolation
        doc["interpolation"] = {
            "samples": list(ip["samples"]),
            "held_out": list(ip["held_out"]),
            "agrees_with_native": ip.get("agrees_with_native"),
        }
    return doc


# -- solver reports ---------------------------------------------------------------------


def basis_document(basis: SolutionBasis, eq: EvolutionEquation, scenario: str | None) -> dict:
    doc = _header(f"{basis.kind}-basis", eq, scenario)
    elements = []
    for i, g in enumerate(basis.elements):
        item = {"characteristic": expr(g), "tag": basis.tags[i] if basis.tags else None}
        if basis.classifications:
            c = basis.classifications[i]
            if c.is_point:
                item["point"] = {"c": expr(c.c), "g1": expr(c.g1), "g0": expr(c.g0),
                                 "vector_field": c.vector_field()}
            else:
                item["reason"] = c.reason
        elements.append(item)
    caps = basis.caps
    doc.update({
        "declarations": _declarations(eq),
        "elements": elements,
        "caps": None if caps is None else {k: getattr(caps, k) for k in caps.__dataclass_fields__},
        "ansatz_size": basis.ansatz_size,
        "modular_nullity": basis.modular_nullity,
        "support_size": basis.support_size,
        "assumptions_nonzero": [param(a) for a in basis.assumptions],
        "verified": basis.verified,
        "notes": list(basis.notes),
    })
    return doc


def _law(cv: ConservedVector) -> dict:
    return {"density": expr(cv.density), "flux": expr(cv.flux), "defect": expr(cv.defect())}


def inventory_document(inv: ConservationInventory, eq: EvolutionEquation,
                       scenario: str | None) -> dict:
    doc = basis_document(inv.cosymmetries, eq, scenario)
    doc["kind"] = "conservation-laws"
    doc["laws"] = [_law(cv) for cv in inv.laws]
    doc["failures"] = [{"cosymmetry": expr(g), "reason": why} for g, why in inv.failures]
    doc["notes"].append("fluxes are determined up to D_x-exact terms and t-only functions")
    return doc


def verification_document(kind: str, eq: EvolutionEquation, scenario: str | None,
                          items: dict[str, DiffPoly], defect: DiffPoly) -> dict:
    doc = _header(kind, eq, scenario)
    doc["declarations"] = _declarations(eq)
    doc["inputs"] = {k: expr(v) for k, v in items.items()}
    doc["defect"] = expr(defect)
    doc["passed"] = not defect
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -- LaTeX ------------------------------------------------------------------------------


def _walk(node, path=""):
    if isinstance(node, dict):
        if set(node) == {"text", "latex"}:
            yield path, node["latex"]
            return
        for k in sorted(node):
            yield from _walk(node[k], f"{path}.{k}" if path else k)
    elif isinstance(node, list):
        for i, v in enumerate(node):
            yield from _walk(v, f"{path}[{i}]")


def latex_fragment(doc: dict) -> str:
    """One display per expression, labelled by its position in the document."""
    lines = [f"% {doc['kind']} for {doc['equation']['name']}"]
    for path, tex in _walk(doc):
        lines.append(f"% {path}")
        lines.append(f"\\[ {tex} \\]")
    return "\n".join(lines) + "\n"
