"""Command-line entry point.

Exit codes: 0 for a definitive result, 2 for an inconclusive one, 1 for usage,
parse or input errors.
"""

from __future__ import annotations

import argparse
import importlib.resources
import sys
from pathlib import Path

from .. import detsolve, integrability, varcalc
from ..jet import EvolutionEquation, JetError, apply_scenario, total_t
from ..pdo import PDOError, TruncationPolicy, adjoint, frechet
from . import report
from .parser import Context, ParseError, parse_equation, parse_expr
from .render import render, render_param

EXIT_OK, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2


class UsageError(Exception):
    pass


def corpus_names() -> list[str]:
    root = importlib.resources.files("jetsym") / "corpus"
    return sorted(p.name[:-3] for p in root.iterdir() if p.name.endswith(".eq"))


def load_equation(spec: str) -> EvolutionEquation:
    """Load from a path, or from the bundled corpus by name (``krri`` or ``krri.eq``)."""
    path = Path(spec)
    if path.is_file():
        return parse_equation(path.read_text(), name=path.stem)
    name = spec[:-3] if spec.endswith(".eq") else spec
    if name in corpus_names():
        text = (importlib.resources.files("jetsym") / "corpus" / f"{name}.eq").read_text()
        return parse_equation(text, name=name)
    raise UsageError(f"no such equation file or corpus entry: {spec}")


def _context(eq: EvolutionEquation) -> Context:
    return Context(eq.params, {f.name: f.base for f in eq.aux.values()})


def _read_expr(eq, text: str | None, path: str | None, what: str):
    if (text is None) == (path is None):
        raise UsageError(f"give exactly one of --{what} or --{what}-file")
    if path is not None:
        text = Path(path).read_text()
    return parse_expr(" ".join(text.split()), _context(eq))


def _emit(doc: dict, args, summary: list[str]):
    for line in summary:
        print(line)
    if args.json:
        Path(args.json).write_text(report.dumps(doc))
    if args.latex:
        Path(args.latex).write_text(report.latex_fragment(doc))


def _caps(args) -> detsolve.Caps | None:
    if not args.caps:
        return None
    return detsolve.Caps.parse(args.caps, args.max_order)


# -- subcommands ---------------------------------------------------------------------


def _analysis_summary(rep) -> list[str]:
    out = [f"verdict: {rep.verdict}"]
    if rep.nonexistence_rank is not None:
        out.append(f"no formal operator of rank >= {rep.nonexistence_rank}")
    lead = rep.leading_condition
    out.append(f"leading condition at degree {lead['degree']}: "
               f"({render_param(lead['kappa'])})*D_x({lead['unknown']}) = 0")
    for o in rep.obstructions:
        line = f"step {o.step}: {o.resolution}"
        if o.raw:
            line += f"  [{render(o.raw)}]"
        out.append(line)
        if o.mixed_u2_u1:
            out.append(f"  d2/du_xx du_x: {render(o.coefficient_form(o.mixed_u2_u1))}")
    return out


def _analysis_exit(rep) -> int:
    return EXIT_INCONCLUSIVE if rep.verdict == "inconclusive" else EXIT_OK


def cmd_check_recursion(args) -> int:
    eq = load_equation(args.equation)
    rep = integrability.recursion_test(eq, args.rank, args.scenario,
                                       integration_constants=args.integration_constants,
                                       leading_constant=args.leading_constant)
    _emit(report.analysis_document(rep, eq), args, _analysis_summary(rep))
    return _analysis_exit(rep)


def cmd_check_symplectic(args) -> int:
    eq = load_equation(args.equation)
    degree = args.degree
    if degree != "symbolic":
        try:
            degree = int(degree)
        except ValueError:
            raise UsageError("--degree takes an integer or 'symbolic'") from None
    rep = integrability.symplectic_test(eq, args.rank, degree, args.scenario, mode=args.mode,
                                        integration_constants=args.integration_constants)
    summary = _analysis_summary(rep)
    if rep.interpolation and "agrees_with_native" in rep.interpolation:
        summary.append(f"native and interpolated agree: {rep.interpolation['agrees_with_native']}")
    _emit(report.analysis_document(rep, eq), args, summary)
    return _analysis_exit(rep)


def _basis_summary(basis) -> list[str]:
    out = [f"{basis.kind} basis of dimension {len(basis)}"]
    for i, g in enumerate(basis.elements):
        line = f"  [{basis.tags[i]}] {render(g)}"
        if basis.classifications and basis.classifications[i].is_point:
            line += f"\n      {basis.classifications[i].vector_field()}"
        out.append(line)
    return out


def cmd_symmetries(args) -> int:
    eq = load_equation(args.equation)
    basis = detsolve.solve_symmetries(eq, args.max_order, args.scenario, _caps(args))
    _emit(report.basis_document(basis, eq, args.scenario), args, _basis_summary(basis))
    return EXIT_OK


def cmd_cosymmetries(args) -> int:
    eq = load_equation(args.equation)
    basis = detsolve.solve_cosymmetries(eq, args.max_order, args.scenario, _caps(args))
    _emit(report.basis_document(basis, eq, args.scenario), args, _basis_summary(basis))
    return EXIT_OK


def cmd_claws(args) -> int:
    eq = load_equation(args.equation)
    inv = detsolve.conservation_laws(eq, args.max_order, args.scenario, _caps(args))
    out = [f"{len(inv.laws)} conservation law(s)"]
    for cv in inv.laws:
        out.append(f"  density: {render(cv.density)}")
        out.append(f"  flux:    {render(cv.flux)}")
    for g, why in inv.failures:
        out.append(f"  cosymmetry {render(g)} has no conserved vector: {why}")
    _emit(report.inventory_document(inv, eq, args.scenario), args, out)
    return EXIT_OK


def cmd_verify_claw(args) -> int:
    eq = load_equation(args.equation)
    target = eq.specialize(args.scenario)
    rho = _read_expr(eq, args.density, args.density_file, "density")
    sigma = _read_expr(eq, args.flux, args.flux_file, "flux")
    if args.scenario:
        rho, sigma = apply_scenario(rho, eq, args.scenario), apply_scenario(sigma, eq, args.scenario)
    defect = varcalc.verify_conserved_vector(rho, sigma, target)
    doc = report.verification_document("conserved-vector-check", eq, args.scenario,
                                       {"density": rho, "flux": sigma}, defect)
    _emit(doc, args, ["PASS" if not defect else f"FAIL: D_t(rho) - D_x(sigma) = {render(defect)}"])
    return EXIT_OK if not defect else EXIT_INCONCLUSIVE


def cmd_verify_symmetry(args) -> int:
    eq = load_equation(args.equation)
    target = eq.specialize(args.scenario)
    g = _read_expr(eq, args.characteristic, args.characteristic_file, "characteristic")
    if args.scenario:
        g = apply_scenario(g, eq, args.scenario)
    defect = varcalc.symmetry_defect(g, target)
    doc = report.verification_document("symmetry-check", eq, args.scenario,
                                       {"characteristic": g}, defect)
    lines = ["PASS" if not defect else f"FAIL: D_t(G) - l_F(G) = {render(defect)}"]
    if not defect:
        c = detsolve.classify_point(g, target, check=False)
        doc["point"] = c.is_point
        lines.append(f"point symmetry: {c.vector_field()}" if c.is_point
                     else f"generalized symmetry ({c.reason})")
    _emit(doc, args, lines)
    return EXIT_OK if not defect else EXIT_INCONCLUSIVE


def cmd_eval(args) -> int:
    eq = load_equation(args.equation)
    target = eq.specialize(args.scenario)
    p = parse_expr(args.expression, _context(eq))
    if args.scenario:
        p = apply_scenario(p, eq, args.scenario)
    if args.op == "euler":
        print(render(varcalc.euler(p)))
    elif args.op == "dx":
        print(render(p.total_x()))
    elif args.op == "dt":
        print(render(total_t(p, target)))
    elif args.op == "frechet":
        print(frechet(p))
    else:
        print(adjoint(frechet(p), TruncationPolicy(None)))
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jetsym", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, rank=False, order=False):
        p.add_argument("equation", help="equation file or corpus name (e.g. krri.eq)")
        p.add_argument("--scenario")
        p.add_argument("--json", metavar="PATH")
        p.add_argument("--latex", metavar="PATH")
        if rank:
            p.add_argument("--rank", type=int, default=10)
            p.add_argument("--integration-constants", action="store_true")
        if order:
            p.add_argument("--max-order", type=int, default=10)
            p.add_argument("--caps", help="overrides, e.g. u_degree=3,x_degree=0")
        return p

    p = common(sub.add_parser("check-recursion", help="formal recursion operator test"), rank=True)
    p.add_argument("--leading-constant", action="store_true")
    p.set_defaults(func=cmd_check_recursion)
    p = common(sub.add_parser("check-symplectic", help="formal symplectic operator test"), rank=True)
    p.add_argument("--degree", default="0", help="integer or 'symbolic'")
    p.add_argument("--mode", choices=["native", "interpolate", "both"], default="both")
    p.set_defaults(func=cmd_check_symplectic)
    for name, fn, text in (("symmetries", cmd_symmetries, "generalized symmetry basis"),
                           ("cosymmetries", cmd_cosymmetries, "cosymmetry basis"),
                           ("claws", cmd_claws, "conservation-law inventory")):
        common(sub.add_parser(name, help=text), order=True).set_defaults(func=fn)
    p = common(sub.add_parser("verify-claw", help="check D_t(rho) = D_x(sigma)"))
    for what in ("density", "flux"):
        p.add_argument(f"--{what}")
        p.add_argument(f"--{what}-file")
    p.set_defaults(func=cmd_verify_claw)
    p = common(sub.add_parser("verify-symmetry", help="check D_t(G) = l_F(G)"))
    p.add_argument("--characteristic")
    p.add_argument("--characteristic-file")
    p.set_defaults(func=cmd_verify_symmetry)
    p = sub.add_parser("eval", help="apply an operation to an expression")
    p.add_argument("op", choices=["euler", "dx", "dt", "frechet", "adjoint"])
    p.add_argument("equation")
    p.add_argument("expression")
    p.add_argument("--scenario")
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
    except (UsageError, JetError, PDOError, detsolve.SolverError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except integrability.IntegrabilityError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
