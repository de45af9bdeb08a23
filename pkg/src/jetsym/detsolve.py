"""Undetermined-coefficient solvers for symmetries, cosymmetries and conservation laws.

The determining equation is linear in the unknown coefficients of an ansatz.
Its solution space is first located modulo a word-size prime by evaluating
every ansatz column at random jet points (parameters specialized to random
residues, several independent draws).  The columns that occur in some modular
solution are then solved exactly over the parameter field, and every returned
element is re-verified symbolically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import flint
import numpy as np

from .algebra import ONE, ZERO, ParamElem, strip_nonvanishing, symbol_index
from .jet import (
    ORDER_BITS, ORDER_MASK, T_KEY, U_FAMILY, X_KEY, DiffPoly, EvolutionEquation,
    family_id, is_xjet, make_key, u_key,
)
from .varcalc import (
    ConservedVector, VariationalError, cosymmetry_defect, make_conserved_vector,
    symmetry_defect,
)

PRIME = 2**31 - 1


class SolverError(ValueError):
    pass


class BudgetError(SolverError):
    pass


@dataclass(frozen=True)
class Caps:
    """Bounds on the ansatz.

    ``max_weight`` caps the total number of x-derivatives in a monomial (u- and
    h-jets together); ``None`` means ``max_order``.
    """

    max_order: int
    u_degree: int = 4
    x_degree: int = 1
    t_degree: int = 1
    h_order: int = 5
    h_degree: int = 1
    max_weight: int | None = None
    budget: int = 20000

    @classmethod
    def parse(cls, text: str, max_order: int) -> "Caps":
        """``"u_degree=3,x_degree=0"`` style override string."""
        kw = {}
        for item in filter(None, (s.strip() for s in text.split(","))):
            k, _, v = item.partition("=")
            if k.strip() not in cls.__dataclass_fields__:
                raise SolverError(f"unknown cap {k.strip()!r}")
            kw[k.strip()] = int(v)
        kw.setdefault("max_order", max_order)
        return cls(**kw)


@dataclass
class Ansatz:
    monomials: list[tuple]
    caps: Caps

    @property
    def unknowns(self) -> list[str]:
        return [f"c{i}" for i in range(len(self.monomials))]

    def template(self) -> DiffPoly:
        """The ansatz with fresh unknown-constant coefficients ``c_i``."""
        return DiffPoly({m: ParamElem.symbol(c) for m, c in zip(self.monomials, self.unknowns)},
                        _clean=True)

    def __len__(self):
        return len(self.monomials)


def _multisets(items: list[int], max_size: int, weight: Callable[[int], int], max_weight: int):
    out = []

    def rec(start, cur, w):
        out.append(tuple(cur))
        if len(cur) == max_size:
            return
        for i in range(start, len(items)):
            nw = w + weight(items[i])
            if nw > max_weight:
                continue
            cur.append(items[i])
            rec(i, cur, nw)
            cur.pop()

    rec(0, [], 0)
    return out


def build_ansatz(eq: EvolutionEquation, caps: Caps) -> Ansatz:
    """All monomials within the caps, in the presentation order."""
    wmax = caps.max_order if caps.max_weight is None else caps.max_weight
    order = lambda k: k & ORDER_MASK
    ujets = [u_key(i) for i in range(caps.max_order + 1)]
    hjets = [make_key(family_id(f.name), i) for f in eq.aux.values() if f.base == "x"
             for i in range(caps.h_order + 1 if f.vanish_from is None else min(caps.h_order + 1, f.vanish_from))]
    uparts = _multisets(ujets, caps.u_degree, order, wmax)
    hparts = _multisets(hjets, caps.h_degree, order, wmax)
    xt = [(X_KEY,) * i + (T_KEY,) * j for i in range(caps.x_degree + 1) for j in range(caps.t_degree + 1)]
    count = 0
    monos = []
    for up in uparts:
        wu = sum(map(order, up))
        for hp in hparts:
            if wu + sum(map(order, hp)) > wmax:
                continue
            for c in xt:
                monos.append(tuple(sorted(up + hp + c)))
                count += 1
                if count > caps.budget:
                    raise BudgetError(f"ansatz exceeds the budget of {caps.budget} monomials")
    monos.sort(key=presentation_key)
    return Ansatz(monos, caps)


def presentation_key(m: tuple):
    """Global monomial order for bases: x-degree, t-degree, weight, degree (all descending)."""
    xs = m.count(X_KEY)
    ts = m.count(T_KEY)
    jets = [k for k in m if k not in (X_KEY, T_KEY)]
    w = sum(k & ORDER_MASK for k in jets)
    return (-xs, -ts, -w, -len(jets), [-k for k in sorted(jets, reverse=True)])


# -- modular sampling ---------------------------------------------------------------


class _Sampler:
    """Values of jet variables and truncated Taylor series along random curves."""

    def __init__(self, npts: int, params: dict[int, int], rng: np.random.Generator, p: int = PRIME,
                 vanish: dict[int, int] | None = None):
        self.p = p
        self.vanish = vanish or {}
        self.n = npts
        self.rng = rng
        self.params = params
        self._vals: dict[int, np.ndarray] = {}
        self._inv: dict[int, np.ndarray] = {}
        self._ser: dict[tuple, np.ndarray] = {}
        self._coef: dict = {}
        self.inv_fact = [pow(math.factorial(i), p - 2, p) for i in range(64)]
        self.fact = [math.factorial(i) % p for i in range(64)]

    def value(self, key: int) -> np.ndarray:
        v = self._vals.get(key)
        if v is None:
            cut = self.vanish.get(key >> ORDER_BITS)
            if cut is not None and key & ORDER_MASK >= cut:
                v = np.zeros(self.n, dtype=np.int64)
            else:
                v = self.rng.integers(1, self.p, size=self.n, dtype=np.int64)
            self._vals[key] = v
        return v

    def inverse(self, key: int) -> np.ndarray:
        v = self._inv.get(key)
        if v is None:
            v = _modinv(self.value(key), self.p)
            self._inv[key] = v
        return v

    def coef(self, c) -> int:
        v = self._coef.get(c)
        if v is None:
            c = c if isinstance(c, ParamElem) else ParamElem.const(c)
            v = c.eval_mod(self.params, self.p)
            self._coef[c] = v
        return v

    def var_series(self, key: int, S: int) -> np.ndarray:
        out = np.zeros((self.n, S), dtype=np.int64)
        if key == X_KEY:
            out[:, 0] = self.value(key)
            if S > 1:
                out[:, 1] = 1
        elif is_xjet(key):
            for i in range(S):
                out[:, i] = self.value(key + i) * self.inv_fact[i] % self.p
        else:
            out[:, 0] = self.value(key)
        return out

    def mono_series(self, m: tuple, S: int) -> np.ndarray:
        key = (m, S)
        s = self._ser.get(key)
        if s is not None:
            return s
        if not m:
            s = np.zeros((self.n, S), dtype=np.int64)
            s[:, 0] = 1
        else:
            s = self._smul(self.mono_series(m[:-1], S), self.var_series(m[-1], S))
        self._ser[key] = s
        return s

    def _smul(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        p = self.p
        S = A.shape[1]
        out = np.zeros_like(A)
        for k in range(S):
            acc = np.zeros(self.n, dtype=np.int64)
            for i in range(k + 1):
                acc = (acc + A[:, i] * B[:, k - i] % p) % p
            out[:, k] = acc
        return out

    def poly_series(self, P: DiffPoly, S: int) -> np.ndarray:
        out = np.zeros((self.n, S), dtype=np.int64)
        for m, c in P.terms.items():
            out = (out + self.mono_series(m, S) * self.coef(c) % self.p) % self.p
        return out


def _modinv(a: np.ndarray, p: int) -> np.ndarray:
    # Fermat inverse by square-and-multiply, vectorized
    result = np.ones_like(a)
    base = a % p
    e = p - 2
    while e:
        if e & 1:
            result = result * base % p
        base = base * base % p
        e >>= 1
    return result


def _modular_columns(eq: EvolutionEquation, ansatz: Ansatz, kind: str, npts: int,
                     rng: np.random.Generator) -> np.ndarray:
    p = PRIME
    params = {symbol_index(s): int(rng.integers(1, p)) for s in _param_symbols(eq)}
    vanish = {family_id(f.name): f.vanish_from for f in eq.aux.values() if f.vanish_from is not None}
    smp = _Sampler(npts, params, rng, p, vanish)
    F = eq.rhs
    n = F.order()
    J = max((k & ORDER_MASK for m in ansatz.monomials for k in m if k >> ORDER_BITS == U_FAMILY),
            default=0)
    Fser = smp.poly_series(F, J + 1)
    Fj = [Fser[:, j] * smp.fact[j] % p for j in range(J + 1)]
    S = n + 1
    cs = [F.partial(u_key(i)) for i in range(n + 1)]
    if kind == "symmetry":
        cvals = [smp.poly_series(c, 1)[:, 0] for c in cs]
    else:
        cser = [smp.poly_series(c, S) for c in cs]
    A = np.zeros((npts, len(ansatz)), dtype=np.int64)
    for col, m in enumerate(ansatz.monomials):
        ms = smp.mono_series(m, S)
        mval = ms[:, 0]
        dt = np.zeros(npts, dtype=np.int64)
        for k in set(m):
            e = m.count(k)
            if k >> ORDER_BITS == U_FAMILY:
                term = mval * smp.inverse(k) % p * Fj[k & ORDER_MASK] % p
            elif k == T_KEY:
                term = mval * smp.inverse(k) % p
            else:
                continue
            dt = (dt + term * e) % p
        lin = np.zeros(npts, dtype=np.int64)
        if kind == "symmetry":
            for i in range(n + 1):
                if cs[i]:
                    lin = (lin + cvals[i] * (ms[:, i] * smp.fact[i] % p)) % p
            A[:, col] = (dt - lin) % p
        else:
            for i in range(n + 1):
                if cs[i]:
                    prod = smp._smul(cser[i], ms)
                    v = prod[:, i] * smp.fact[i] % p
                    lin = (lin + (v if i % 2 == 0 else p - v)) % p
            A[:, col] = (dt + lin) % p
    return A


def _param_symbols(eq: EvolutionEquation) -> set[str]:
    out = set()
    for c in eq.rhs.terms.values():
        out |= ParamElem.coerce(c).free_symbols()
    return out


def modular_nullspace(A: np.ndarray) -> list[np.ndarray]:
    rows, cols = A.shape
    M = flint.nmod_mat(rows, cols, A.ravel().tolist(), PRIME)
    X, nullity = M.nullspace()
    table = X.tolist()
    return [np.array([int(table[i][j]) for i in range(cols)], dtype=np.int64) for j in range(nullity)]


# -- exact linear algebra over the parameter field -----------------------------------


def exact_nullspace(rows: list[dict[int, ParamElem]], ncols: int, nz=()) -> tuple[list[dict[int, ParamElem]], list[ParamElem]]:
    """Nullspace basis (reduced, free variables set to unit vectors) and pivot assumptions."""
    pivots: dict[int, dict[int, ParamElem]] = {}
    assumptions: list[ParamElem] = []
    for row in rows:
        r = {k: v for k, v in row.items() if v}
        for pc, prow in pivots.items():
            f = r.get(pc)
            if f:
                for k, v in prow.items():
                    nv = r.get(k, ZERO) - f * v
                    if nv:
                        r[k] = nv
                    else:
                        r.pop(k, None)
        if not r:
            continue
        pc = min(r)
        piv = r[pc]
        ess = strip_nonvanishing(piv, nz)
        if not ess.is_constant() and ess not in assumptions:
            assumptions.append(ess)
        inv = piv.inverse()
        r = {k: v * inv for k, v in r.items()}
        for oc, orow in pivots.items():
            f = orow.get(pc)
            if f:
                for k, v in r.items():
                    nv = orow.get(k, ZERO) - f * v
                    if nv:
                        orow[k] = nv
                    else:
                        orow.pop(k, None)
        pivots[pc] = r
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        vec = {fc: ONE}
        for pc, prow in pivots.items():
            v = prow.get(fc)
            if v:
                vec[pc] = -v
        basis.append(vec)
    return basis, assumptions


def _rref_vectors(vecs: list[dict[int, ParamElem]]) -> list[dict[int, ParamElem]]:
    """Reduced echelon form with pivots at the smallest column index, pivot entries 1."""
    rows: list[dict[int, ParamElem]] = []
    for v in vecs:
        r = dict(v)
        for prow in rows:
            pc = min(prow)
            f = r.get(pc)
            if f:
                for k, x in prow.items():
                    nv = r.get(k, ZERO) - f * x
                    if nv:
                        r[k] = nv
                    else:
                        r.pop(k, None)
        if not r:
            continue
        pc = min(r)
        inv = r[pc].inverse()
        r = {k: x * inv for k, x in r.items()}
        for prow in rows:
            f = prow.get(pc)
            if f:
                for k, x in r.items():
                    nv = prow.get(k, ZERO) - f * x
                    if nv:
                        prow[k] = nv
                    else:
                        prow.pop(k, None)
        rows.append(r)
    rows.sort(key=min)
    return rows


# -- solution bases --------------------------------------------------------------------


@dataclass
class PointClassification:
    is_point: bool
    c: DiffPoly | None = None
    g1: DiffPoly | None = None
    g0: DiffPoly | None = None
    reason: str = ""

    def vector_field(self) -> str:
        from .io.render import render
        if not self.is_point:
            return ""
        parts = []
        for coef, d in ((self.c, "d/dt"), (self.g1, "d/dx"), (-self.g0, "d/du")):
            if coef:
                parts.append(f"({render(coef)})*{d}")
        return " + ".join(parts) or "0"

    def reconstruct(self, F: DiffPoly) -> DiffPoly:
        return self.c * F + self.g1 * DiffPoly.u(1) + self.g0


@dataclass
class SolutionBasis:
    kind: str
    elements: list[DiffPoly]
    tags: list[str] = field(default_factory=list)
    classifications: list[PointClassification | None] = field(default_factory=list)
    caps: Caps | None = None
    ansatz_size: int = 0
    modular_nullity: list[int] = field(default_factory=list)
    support_size: int = 0
    assumptions: list[ParamElem] = field(default_factory=list)
    verified: bool = False
    notes: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.elements)


def _defect_fn(kind: str):
    return symmetry_defect if kind == "symmetry" else cosymmetry_defect


def _solve(eq: EvolutionEquation, max_order: int, kind: str, scenario: str | None,
           caps: Caps | None, draws: int, seed: int) -> SolutionBasis:
    if max_order < 0:
        raise SolverError("max_order must be nonnegative")
    base_eq = eq
    eq = eq.specialize(scenario)
    if eq.order == -math.inf:
        raise SolverError("the right-hand side does not depend on u")
    caps = caps or Caps(max_order)
    ansatz = build_ansatz(eq, caps)
    ncols = len(ansatz)
    npts = ncols + 16
    rng = np.random.default_rng(seed)
    support: set[int] = set()
    nullities = []
    for _ in range(draws):
        A = _modular_columns(eq, ansatz, kind, npts, rng)
        null = modular_nullspace(A)
        nullities.append(len(null))
        for v in null:
            support.update(int(i) for i in np.nonzero(v)[0])
    cols = sorted(support)
    basis = SolutionBasis(kind, [], caps=caps, ansatz_size=ncols, modular_nullity=nullities,
                          support_size=len(cols))
    if len(set(nullities)) > 1:
        basis.notes.append(f"modular draws disagree on the nullity: {nullities}")
    defect = _defect_fn(kind)
    col_defects = [defect(DiffPoly({ansatz.monomials[c]: ONE}, _clean=True), eq)
                   for c in cols]
    row_index: dict[tuple, dict[int, ParamElem]] = {}
    for j, d in enumerate(col_defects):
        for m, c in d.terms.items():
            row_index.setdefault(m, {})[j] = ParamElem.coerce(c)
    rows = [row_index[m] for m in sorted(row_index, key=presentation_key)]
    null, assumptions = exact_nullspace(rows, len(cols), eq.nonzero)
    basis.assumptions = assumptions
    if null and len(null) != max(nullities):
        basis.notes.append(f"exact nullity {len(null)} differs from modular nullity {max(nullities)}")
    vecs = _rref_vectors(null)
    elements = [DiffPoly({ansatz.monomials[cols[j]]: v for j, v in vec.items()}, _clean=True)
                for vec in vecs]
    if kind == "symmetry":
        elements = _pin_rhs(elements, eq.rhs)
    basis.elements = elements
    basis.verified = all(not defect(g, eq) for g in elements)
    if not basis.verified:
        raise SolverError("a computed basis element fails its determining equation")
    if kind == "symmetry":
        basis.classifications = [classify_point(g, eq, check=False) for g in elements]
        basis.tags = ["point" if c.is_point else "generalized" for c in basis.classifications]
    else:
        basis.tags = ["cosymmetry"] * len(elements)
        # two published cutoffs exist for the KRRI search; say which ones this run covers
        below9 = [g for g in elements if g.order() <= 9]
        basis.notes.append(f"searched to order {max_order}: {len(below9)} element(s) of order <= 9, "
                           f"{len(elements) - len(below9)} of order 10..{max_order}"
                           if max_order >= 10 else f"searched to order {max_order} only (below 10)")
    basis.notes.append("ansatz is polynomial in x and t; non-polynomial t-dependence is outside its scope")
    return basis


def _pin_rhs(elements: list[DiffPoly], F: DiffPoly) -> list[DiffPoly]:
    """Replace the echelon vector that shares F's leading monomial by F itself."""
    lead = min(F.terms, key=presentation_key)
    for i, g in enumerate(elements):
        if min(g.terms, key=presentation_key) == lead:
            return elements[:i] + [F] + elements[i + 1:]
    return elements


def solve_symmetries(eq: EvolutionEquation, max_order: int, scenario: str | None = None,
                     caps: Caps | None = None, draws: int = 2, seed: int = 20240) -> SolutionBasis:
    """Characteristics G with ``D_t(G) = l_F(G)`` inside the ansatz caps."""
    return _solve(eq, max_order, "symmetry", scenario, caps, draws, seed)


def solve_cosymmetries(eq: EvolutionEquation, max_order: int, scenario: str | None = None,
                       caps: Caps | None = None, draws: int = 2, seed: int = 20241) -> SolutionBasis:
    """Cosymmetries with ``D_t(gamma) = -l_F^+(gamma)`` inside the ansatz caps."""
    return _solve(eq, max_order, "cosymmetry", scenario, caps, draws, seed)


def classify_point(G: DiffPoly, eq: EvolutionEquation, check: bool = True) -> PointClassification:
    """Decompose ``G = c(t) F + g1(x,t,u) u_x + g0(x,t,u)`` when possible."""
    if check and symmetry_defect(G, eq):
        raise SolverError("G is not a symmetry characteristic of the equation")
    F = eq.rhs
    n = F.order()
    top = F.partial(u_key(n))
    if not top.is_constant():
        return PointClassification(False, reason="leading coefficient of F is not constant")
    if G.order() > n:
        return PointClassification(False, reason=f"order {G.order()} exceeds the order of F")
    c = G.partial(u_key(n)).scale(1 / top.constant_term()) if G.order() == n else DiffPoly()
    if any(k != T_KEY for k in c.variables()):
        return PointClassification(False, reason="coefficient of F is not a function of t alone")
    rest = G - c * F
    g1 = rest.partial(u_key(1))
    g0 = rest - g1 * DiffPoly.u(1)
    high = lambda p: any(k >> ORDER_BITS == U_FAMILY and k & ORDER_MASK >= 1 for k in p.variables())
    if high(g1) or high(g0):
        return PointClassification(False, reason="remainder depends on derivatives of u beyond u_x")
    return PointClassification(True, c, g1, g0)


@dataclass
class ConservationInventory:
    laws: list[ConservedVector]
    failures: list[tuple[DiffPoly, str]]
    cosymmetries: SolutionBasis


def conservation_laws(eq: EvolutionEquation, max_order: int, scenario: str | None = None,
                      caps: Caps | None = None) -> ConservationInventory:
    """Conserved vectors for every variational cosymmetry found within the caps."""
    cos = solve_cosymmetries(eq, max_order, scenario, caps)
    target = eq.specialize(scenario)
    laws, failures = [], []
    for g in cos.elements:
        try:
            laws.append(make_conserved_vector(g, target, check_cosymmetry=False))
        except VariationalError as exc:
            failures.append((g, str(exc)))
    return ConservationInventory(laws, failures, cos)


def span_contains(basis: list[DiffPoly], g: DiffPoly) -> bool:
    """Exact membership test of ``g`` in the span of ``basis`` over the parameter field."""
    monos = sorted({m for b in basis + [g] for m in b.terms}, key=presentation_key)
    idx = {m: i for i, m in enumerate(monos)}
    vecs = [{idx[m]: ParamElem.coerce(c) for m, c in b.terms.items()} for b in basis]
    r1 = len(_rref_vectors(vecs))
    r2 = len(_rref_vectors(vecs + [{idx[m]: ParamElem.coerce(c) for m, c in g.terms.items()}]))
    return r1 == r2


def rank_of(elements: list[DiffPoly]) -> int:
    monos = sorted({m for b in elements for m in b.terms}, key=presentation_key)
    idx = {m: i for i, m in enumerate(monos)}
    return len(_rref_vectors([{idx[m]: ParamElem.coerce(c) for m, c in b.terms.items()}
                              for b in elements]))
