"""Formal recursion and formal symplectic operator tests.

Both drivers build a formal series ``L`` whose coefficients are found one at a
time from the top.  The coefficient of ``M`` (recursion: ``D_t L - [F_*, L]``;
symplectic: ``D_t L + F_*^+ L + L F_*``) at the next power of D is
``kappa * D_x(phi) + R`` where ``phi`` is the next unknown coefficient of
``L`` and ``R`` is already known.  Solving ``D_x(phi) = K`` with ``K = -R/kappa``
requires ``euler(K) = 0``; a nonzero Euler image is an obstruction which must
be resolved by restricting the undetermined functions of t that entered
earlier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from gmpy2 import mpq

from .algebra import ONE, ParamElem, interpolate_poly, strip_nonvanishing
from .jet import (
    KIND_T, KIND_TAUX, ORDER_BITS, ORDER_MASK, T_KEY, AuxFunction, DiffPoly,
    EvolutionEquation, JetError, family_id, family_kind, family_name, make_key,
    register_family, u_key,
)
from .pdo import (
    DEGREE_SYMBOL, PseudoDiffOp, TruncationPolicy, adjoint, commutator, compose,
    dt_op, frechet,
)
from .varcalc import euler, integrate_x

PROBE = "probe"


class IntegrabilityError(ValueError):
    pass


def _is_tkind(k: int) -> bool:
    return family_kind(k >> ORDER_BITS) in (KIND_T, KIND_TAUX)


# -- unknown functions of t ----------------------------------------------------


@dataclass
class UnknownFunction:
    name: str
    role: str
    status: str = "free"  # free | constant | polynomial | zero


@dataclass(frozen=True)
class LogEntry:
    """One substitution on an unknown function, applied at ``step``."""

    step: str
    target: str
    action: str  # zero | constant | polynomial
    jet: int = 0
    replacement: tuple[str, ...] = ()

    def to_json(self) -> dict:
        d = {"step": self.step, "target": self.target, "action": self.action, "jet": self.jet}
        if self.replacement:
            d["replacement"] = list(self.replacement)
        return d


class UnknownRegistry:
    """Undetermined functions of t introduced during a driver run."""

    def __init__(self, eq: EvolutionEquation):
        self.eq = eq
        self.functions: dict[str, UnknownFunction] = {}
        self.log: list[LogEntry] = []
        self._subs: list[tuple[int, int, DiffPoly | None]] = []

    def new(self, name: str, role: str, constant: bool = False) -> DiffPoly:
        register_family(name, "t")
        fn = UnknownFunction(name, role, "constant" if constant else "free")
        self.functions[name] = fn
        self.eq = self.eq.with_aux(AuxFunction(name, "t", 1 if constant else None))
        return DiffPoly.var(make_key(family_id(name), 0))

    def names(self) -> list[str]:
        return list(self.functions)

    def _set_vanish(self, name: str, k: int):
        self.eq = self.eq.with_aux(AuxFunction(name, "t", k))

    def force(self, key: int, step: str) -> LogEntry:
        """Set jet ``key`` (and all higher jets) of an unknown to zero."""
        fid = key >> ORDER_BITS
        k = key & ORDER_MASK
        name = family_name(fid)
        fn = self.functions[name]
        if k == 0:
            fn.status = "zero"
            entry = LogEntry(step, name, "zero")
            self._subs.append((fid, 0, None))
            self._set_vanish(name, 0)
        elif k == 1:
            fn.status = "constant"
            entry = LogEntry(step, name, "constant", 1)
            self._subs.append((fid, 1, None))
            self._set_vanish(name, 1)
        else:
            # polynomial of degree k-1 in t with fresh constant coefficients
            t = DiffPoly.var(T_KEY)
            consts = [self.new(f"{name}_c{i}", f"coefficient of t^{i} in {name}", constant=True)
                      for i in range(k)]
            poly = DiffPoly()
            for i, c in enumerate(consts):
                poly = poly + c * t ** i
            fn.status = "polynomial"
            self._subs.append((fid, 0, poly))
            self._set_vanish(name, 0)
            entry = LogEntry(step, name, "polynomial", k,
                             tuple(family_name(c.variables().pop() >> ORDER_BITS) for c in consts))
        self.log.append(entry)
        return entry

    def apply(self, p: DiffPoly) -> DiffPoly:
        for fid, k, value in self._subs:
            p = _substitute_family(p, fid, k, value)
        return p


def _substitute_family(p: DiffPoly, fid: int, k: int, value: DiffPoly | None) -> DiffPoly:
    if not any(x >> ORDER_BITS == fid for m in p.terms for x in m):
        return p
    if value is None:
        return p.filter(lambda m: not any(x >> ORDER_BITS == fid and (x & ORDER_MASK) >= k for x in m))
    derivs = [value]
    out = p
    keys = sorted({x for m in p.terms for x in m if x >> ORDER_BITS == fid})
    for key in keys:
        j = key & ORDER_MASK
        while len(derivs) <= j:
            derivs.append(derivs[-1].partial(T_KEY))
        out = out.substitute(key, derivs[j])
    return out


# -- obstructions ------------------------------------------------------------------


@dataclass
class Obstruction:
    """Solvability condition ``euler(K_j) = 0`` at one step."""

    step: str
    degree: int
    raw: DiffPoly
    resolution: str  # vanishes | forces-jet-zero | forces-unknown-zero | inconclusive
    forced: list[LogEntry] = field(default_factory=list)
    essential: list[dict] = field(default_factory=list)
    residual: list[DiffPoly] = field(default_factory=list)
    assumptions: list[ParamElem] = field(default_factory=list)
    mixed_u2_u1: DiffPoly | None = None
    kappa: ParamElem = ONE

    def coefficient_form(self, p: DiffPoly | None = None) -> DiffPoly:
        """``p`` (default: the raw condition) rescaled from ``D_x(s_j) = K_j`` to the
        unnormalized coefficient ``R_j = -kappa K_j`` of the operator condition."""
        p = self.raw if p is None else p
        return p.scale(-self.kappa)

    @property
    def essential_factor(self) -> DiffPoly | None:
        """The unknown-function jet that the condition forces to vanish, if unique."""
        jets = {e["jet"] for e in self.essential}
        if len(jets) == 1:
            return DiffPoly.var(jets.pop())
        return None


def _jet_split(k: int) -> bool:
    return not _is_tkind(k)


def resolve_obstruction(E: DiffPoly, reg: UnknownRegistry, nz: Iterable[str], step: str = "",
                        degree: int = 0, prescribed: list[LogEntry] | None = None) -> Obstruction:
    """Resolve ``E = 0`` identically in the jets, for linear homogeneous conditions.

    Each coefficient of a jet monomial in ``E`` is a linear combination of jets
    of unknown functions of t.  A coefficient with a single term forces that
    jet (and every higher one) to vanish; this repeats to a fixed point.
    Anything left over makes the obstruction inconclusive.  With
    ``prescribed`` (a replayed log), the listed jets are forced in order
    instead of being inferred.
    """
    nz = list(nz)
    obs = Obstruction(step, degree, E, "vanishes")
    if not E:
        return obs
    eqs = [c for c in E.collect(_jet_split).values()]
    forced_any = False
    queue = list(prescribed) if prescribed is not None else None
    while True:
        eqs = [reg.apply(c) for c in eqs]
        eqs = [c for c in eqs if c]
        singles = []
        for c in eqs:
            if len(c.terms) != 1:
                continue
            (m, coef), = c.terms.items()
            jets = [k for k in m if k != T_KEY]
            if len(jets) == 1 and family_name(jets[0] >> ORDER_BITS) in reg.functions:
                singles.append((jets[0], coef))
        if queue is None:
            target = singles[0] if singles else None
        elif queue:
            entry = queue.pop(0)
            key = make_key(family_id(entry.target), {"zero": 0, "constant": 1}.get(entry.action, entry.jet))
            target = next((s for s in singles if s[0] == key), (key, ONE))
        else:
            target = None
        if target is None:
            break
        key, coef = target
        factor = strip_nonvanishing(coef, nz)
        if not factor.is_constant():
            obs.assumptions.append(factor)
        entry = reg.force(key, step)
        obs.forced.append(entry)
        obs.essential.append({"jet": key, "unit": coef, "factor": factor})
        forced_any = True
    if eqs:
        obs.resolution = "inconclusive"
        obs.residual = eqs
    elif forced_any:
        obs.resolution = ("forces-unknown-zero" if any(e.action == "zero" for e in obs.forced)
                          else "forces-jet-zero")
    return obs


def integer_roots(e: ParamElem) -> list[int] | None:
    """Integer roots of a univariate polynomial factor in ``r``; None if not of that form."""
    import flint
    if e.den is not None or e.free_symbols() != {DEGREE_SYMBOL}:
        return None
    coeffs = [mpq(0)] * (e.degree_in(DEGREE_SYMBOL) + 1)
    for k in range(len(coeffs)):
        coeffs[k] = e.coeff_in(DEGREE_SYMBOL, k).as_rational()
    den = 1
    for c in coeffs:
        den = den * c.denominator // math.gcd(den, c.denominator)
    poly = flint.fmpz_poly([int(c * den) for c in coeffs])
    return sorted(int(r) for r, _ in poly.roots())


# -- reports -------------------------------------------------------------------------


@dataclass
class StepRecord:
    step: str
    degree: int
    coefficient: DiffPoly
    exact: bool


@dataclass
class AnalysisReport:
    equation: str
    driver: str
    rank: int
    degree: object
    scenario: str | None
    bound: int
    leading_condition: dict
    steps: list[StepRecord] = field(default_factory=list)
    obstructions: list[Obstruction] = field(default_factory=list)
    verdict: str = "exists-to-depth"
    nonexistence_rank: int | None = None
    log: list[LogEntry] = field(default_factory=list)
    unknowns: list[UnknownFunction] = field(default_factory=list)
    assumptions: list[ParamElem] = field(default_factory=list)
    definition_check: bool | None = None
    notes: list[str] = field(default_factory=list)
    interpolation: dict | None = None
    leading_constant: bool = False

    def nontrivial(self) -> list[Obstruction]:
        return [o for o in self.obstructions if o.resolution != "vanishes"]

    def obstruction(self, step: str) -> Obstruction | None:
        for o in self.obstructions:
            if o.step == step:
                return o
        return None


# -- driver core ---------------------------------------------------------------------


def _probe_kappa(contrib, e: int, n: int) -> ParamElem:
    """Coefficient of ``D_x(phi)`` in the top nontrivial coefficient of ``M(phi D^e)``."""
    register_family(PROBE, "x")
    sigma = DiffPoly.var(make_key(family_id(PROBE), 0))
    op = contrib(sigma, e)
    top = op.coeff(e + n)
    if top:
        raise IntegrabilityError(f"coefficient at degree {e + n} does not vanish automatically: {top}")
    for d in op.coeffs:
        if d > e + n:
            raise IntegrabilityError(f"coefficient at degree {d} does not vanish automatically")
    c = op.coeff(e + n - 1)
    s1 = make_key(family_id(PROBE), 1)
    if len(c.terms) != 1 or (s1,) not in c.terms:
        raise IntegrabilityError(
            f"leading coefficient is not a constant multiple of D_x(phi): {c}; unsupported equation")
    return c.terms[(s1,)]


class _Ladder:
    def __init__(self, eq: EvolutionEquation, kind: str, rank: int, degree, scenario: str | None,
                 integration_constants: bool, replay_log: list[LogEntry] | None = None,
                 leading_constant: bool = False):
        self.base = eq
        self.scenario = scenario
        eq = eq.specialize(scenario)
        n = eq.order
        if n == -math.inf or n < 2:
            raise IntegrabilityError("the analysis drivers need an equation of order at least 2")
        if kind == "symplectic" and n % 2 == 0:
            raise IntegrabilityError("symplectic test is implemented for odd-order equations only")
        if rank < 2:
            raise IntegrabilityError("rank must be at least 2")
        self.kind = kind
        self.n = n
        self.rank = rank
        self.symbolic = degree == "symbolic"
        self.degL = 1 if kind == "recursion" else (0 if self.symbolic else int(degree))
        self.bound = self.degL + n - rank
        self.policy = TruncationPolicy(self.bound + 1)
        self.reg = UnknownRegistry(eq)
        self.fstar = frechet(eq.rhs)
        self.fstar_adj = adjoint(self.fstar, TruncationPolicy(None)) if kind == "symplectic" else None
        self.integration_constants = integration_constants
        self.leading_constant = leading_constant
        self.replay_mode = replay_log is not None
        self.replay = {}
        for entry in replay_log or []:
            self.replay.setdefault(entry.step, []).append(entry)
        self.report = AnalysisReport(
            equation=self.base.name, driver=kind, rank=rank,
            degree="symbolic" if self.symbolic else (self.degL if kind == "symplectic" else 1),
            scenario=scenario, bound=self.bound, leading_condition={})

    @property
    def eq(self) -> EvolutionEquation:
        return self.reg.eq

    def contrib(self, phi: DiffPoly, e: int) -> PseudoDiffOp:
        op = PseudoDiffOp({e: phi}, None, self.symbolic)
        if self.kind == "recursion":
            return dt_op(op, self.eq).truncate(self.policy.floor) - commutator(self.fstar, op, self.policy)
        return (dt_op(op, self.eq).truncate(self.policy.floor)
                + compose(self.fstar_adj, op, self.policy) + compose(op, self.fstar, self.policy))

    def label(self, m: int) -> str:
        if self.kind == "recursion":
            return "f" if m == 0 else str(m - 1)
        return str(m)

    def unknown_name(self, m: int) -> str:
        if m == 0:
            return "f" if self.kind == "recursion" else "f0"
        return f"g{m - 1}" if self.kind == "recursion" else f"g{m}"

    def run(self) -> AnalysisReport:
        rep = self.report
        nz = self.eq.nonzero
        M = PseudoDiffOp({}, self.policy.floor, self.symbolic)
        phis: list[tuple[int, DiffPoly]] = []
        leading_name = self.unknown_name(0)
        for m in range(self.rank - 1):
            e = self.degL - m
            target = self.degL + self.n - 1 - m
            label = self.label(m)
            kappa = _probe_kappa(self.contrib, e, self.n)
            if m == 0:
                rep.leading_condition = {"degree": target, "kappa": kappa, "unknown": leading_name}
            R = M.coeff(target)
            K = R.scale(-1 / kappa)
            E = euler(K)
            prescribed = self.replay.get(label, []) if self.replay_mode else None
            obs = resolve_obstruction(E, self.reg, nz, label, target, prescribed)
            obs.mixed_u2_u1 = E.partial(u_key(2)).partial(u_key(1))
            obs.kappa = kappa
            rep.obstructions.append(obs)
            rep.assumptions.extend(a for a in obs.assumptions if a not in rep.assumptions)
            if obs.forced:
                M = M.map_coeffs(self.reg.apply)
                phis = [(ee, self.reg.apply(p)) for ee, p in phis]
                K = self.reg.apply(K)
            if obs.resolution == "inconclusive":
                rep.verdict = "inconclusive"
                rep.notes.append(f"step {label}: condition not resolvable by the linear rules")
                break
            lead = self.reg.functions.get(leading_name)
            if lead is not None and lead.status == "zero":
                rep.verdict = "nonexistence"
                rep.nonexistence_rank = self.degL + self.n - target + 1
                break
            if euler(K):
                rep.verdict = "inconclusive"
                rep.notes.append(f"step {label}: Euler image persists after substitutions")
                break
            res = integrate_x(K)
            if res.remainder:
                rep.verdict = "inconclusive"
                rep.notes.append(f"step {label}: remainder {res.remainder} is variationally trivial "
                                 "but has no polynomial antiderivative")
                break
            phi = res.antiderivative
            if m == 0:
                phi = phi + self.reg.new(leading_name, "leading coefficient",
                                         constant=self.leading_constant)
            elif self.kind == "recursion" and m == 1:
                rep.notes.append("s_0: integration constant normalized to 0 (it commutes with every series)")
            elif self.integration_constants:
                phi = phi + self.reg.new(self.unknown_name(m), f"integration constant of s_{label}")
            rep.steps.append(StepRecord(label, target, phi, True))
            phis.append((e, phi))
            M = M + self.contrib(phi, e)
        rep.log = list(self.reg.log)
        rep.unknowns = list(self.reg.functions.values())
        rep.leading_constant = self.leading_constant
        for a in rep.assumptions:
            roots = integer_roots(a)
            if roots is not None:
                rep.notes.append(f"assumed nonzero: {a}; integer roots: {roots or 'none'}")
        if rep.verdict == "exists-to-depth":
            rep.definition_check = self.definition_check(phis)
        return rep

    def definition_check(self, phis) -> bool:
        # low-degree coefficients of L still reach degrees above the floor
        op = PseudoDiffOp({}, self.policy.floor, self.symbolic)
        for e, p in phis:
            op = op + self.contrib(p, e)
        return all(d <= self.bound for d in op.coeffs)


def recursion_test(eq: EvolutionEquation, rank: int, scenario: str | None = None, *,
                   integration_constants: bool = False, leading_constant: bool = False,
                   replay_log: list[LogEntry] | None = None) -> AnalysisReport:
    """Search for a formal recursion operator ``L = f D + sum s_j D^-j`` of the given rank.

    ``f`` is an arbitrary function of t unless ``leading_constant`` is set.
    """
    return _Ladder(eq, "recursion", rank, 1, scenario, integration_constants, replay_log,
                   leading_constant).run()


def symplectic_test(eq: EvolutionEquation, rank: int, degree=0, scenario: str | None = None, *,
                    mode: str = "interpolate", samples: Iterable[int] | None = None,
                    held_out: Iterable[int] | None = None, integration_constants: bool = False,
                    replay_log: list[LogEntry] | None = None) -> AnalysisReport:
    """Search for a formal symplectic operator ``L = sum s_j D^(r-j)`` of the given rank.

    ``degree`` is an integer or ``"symbolic"``.  In symbolic mode, ``mode``
    selects ``"native"`` (binomials as polynomials in r), ``"interpolate"``
    (integer sweep and reconstruction) or ``"both"`` (native report with
    interpolation cross-check attached).
    """
    if degree != "symbolic":
        return _Ladder(eq, "symplectic", rank, int(degree), scenario, integration_constants,
                       replay_log).run()
    samples = list(samples) if samples is not None else DEFAULT_SAMPLES
    held_out = list(held_out) if held_out is not None else DEFAULT_HELD_OUT
    if mode == "native":
        return _Ladder(eq, "symplectic", rank, "symbolic", scenario, integration_constants,
                       replay_log).run()
    sweep = sweep_symplectic(eq, rank, scenario, samples, held_out, integration_constants)
    if mode == "interpolate":
        rep = sweep.pop("report")
        rep.interpolation = sweep
        return rep
    native = _Ladder(eq, "symplectic", rank, "symbolic", scenario, integration_constants,
                     replay_log).run()
    sweep.pop("report")
    sweep["agrees_with_native"] = compare_with_native(native, sweep)
    native.interpolation = sweep
    return native


# default sample set: well above the operator's own degree range so that no
# Leibniz binomial degenerates at a sample point
DEFAULT_SAMPLES = list(range(20, 32))
DEFAULT_HELD_OUT = [32, 33, 34]


def _interpolate_polys(values: dict[int, DiffPoly], pts: list[int], check: list[int]) -> DiffPoly:
    monos = set()
    for m in pts + check:
        monos.update(values[m].terms)
    out = {}
    for mono in monos:
        data = [(m, ParamElem.coerce(values[m].terms.get(mono, ParamElem.const(0)))) for m in pts + check]
        poly = interpolate_poly(data, len(pts) - 1, DEGREE_SYMBOL)
        if poly:
            out[mono] = poly
    return DiffPoly(out, _clean=True)


def sweep_symplectic(eq, rank, scenario, samples, held_out, integration_constants=False) -> dict:
    """Integer-degree runs at every sample, interpolated step by step in r."""
    runs = {}
    for m in samples + held_out:
        runs[m] = _Ladder(eq, "symplectic", rank, m, scenario, integration_constants).run()
    shapes = {tuple((o.step, o.resolution) for o in r.obstructions) for r in runs.values()}
    if len(shapes) != 1:
        raise IntegrabilityError("integer-degree runs disagree on the obstruction pattern")
    first = runs[samples[0]]
    conditions = {}
    for idx, o in enumerate(first.obstructions):
        raw = {m: r.obstructions[idx].raw for m, r in runs.items()}
        mixed = {m: r.obstructions[idx].mixed_u2_u1 for m, r in runs.items()}
        conditions[o.step] = {
            "raw": _interpolate_polys(raw, samples, held_out),
            "mixed_u2_u1": _interpolate_polys(mixed, samples, held_out),
        }
    rep = _relabel_symbolic(first)
    for o in rep.obstructions:
        o.raw = conditions[o.step]["raw"]
        o.mixed_u2_u1 = conditions[o.step]["mixed_u2_u1"]
    return {"samples": samples, "held_out": held_out, "conditions": conditions, "report": rep}


def _relabel_symbolic(rep: AnalysisReport) -> AnalysisReport:
    deg = rep.degree
    rep.degree = "symbolic"
    rep.bound -= deg
    rep.leading_condition = dict(rep.leading_condition, degree=rep.leading_condition["degree"] - deg)
    for o in rep.obstructions:
        o.degree -= deg
    for s in rep.steps:
        s.degree -= deg
    rep.steps = []  # coefficients at a single sample are not meaningful for symbolic r
    rep.notes.append("coefficients s_j omitted: report reconstructed from integer-degree runs")
    return rep


def compare_with_native(native: AnalysisReport, sweep: dict) -> bool:
    for o in native.obstructions:
        c = sweep["conditions"].get(o.step)
        if c is None or c["raw"] != o.raw or c["mixed_u2_u1"] != o.mixed_u2_u1:
            return False
    return len(native.obstructions) == len(sweep["conditions"])


def replay(report: AnalysisReport, eq: EvolutionEquation) -> AnalysisReport:
    """Re-run a driver with the report's substitution log applied at the logged steps."""
    if report.driver == "recursion":
        return recursion_test(eq, report.rank, report.scenario, replay_log=report.log,
                              leading_constant=report.leading_constant)
    return symplectic_test(eq, report.rank, report.degree, report.scenario, mode="native",
                           replay_log=report.log)
