"""Differential polynomials on jet space and restricted total derivatives.

A jet variable is encoded as a small integer ``family_id << 10 | order``.
Families are registered process-wide: the coordinates ``x`` and ``t``, the
dependent variable ``u`` and any number of auxiliary functions of ``x``
(channel depth ``h``) or of ``t`` (undetermined functions produced while
integrating).  A monomial is the sorted tuple of its variable keys, with
repetition for powers.

Coefficients are normally :class:`~jetsym.algebra.ParamElem`; the jet code
only uses ring operations on them, so ``gmpy2.mpq`` coefficients (parameters
specialized to numbers) work too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping

from gmpy2 import mpq

from .algebra import ONE, ZERO, NonzeroSet, ParamElem

ORDER_BITS = 10
ORDER_MASK = (1 << ORDER_BITS) - 1

KIND_X, KIND_T, KIND_U, KIND_XAUX, KIND_TAUX = range(5)

_FAM_NAMES: list[str] = ["x", "t", "u"]
_FAM_KIND: list[int] = [KIND_X, KIND_T, KIND_U]
_FAM_IDS: dict[str, int] = {"x": 0, "t": 1, "u": 2}

X_KEY = 0 << ORDER_BITS
T_KEY = 1 << ORDER_BITS
U_FAMILY = 2


class JetError(ValueError):
    pass


def register_family(name: str, base: str) -> int:
    """Register an auxiliary function family depending on ``base`` ('x' or 't')."""
    kind = {"x": KIND_XAUX, "t": KIND_TAUX}[base]
    fid = _FAM_IDS.get(name)
    if fid is not None:
        if _FAM_KIND[fid] != kind:
            raise JetError(f"function {name!r} already declared with another base coordinate")
        return fid
    if not name.isidentifier():
        raise JetError(f"bad function name {name!r}")
    fid = len(_FAM_NAMES)
    _FAM_NAMES.append(name)
    _FAM_KIND.append(kind)
    _FAM_IDS[name] = fid
    return fid


def family_id(name: str) -> int:
    try:
        return _FAM_IDS[name]
    except KeyError:
        raise JetError(f"undeclared function {name!r}") from None


def family_name(fid: int) -> str:
    return _FAM_NAMES[fid]


def family_kind(fid: int) -> int:
    return _FAM_KIND[fid]


def key_family(key: int) -> int:
    return key >> ORDER_BITS


def key_order(key: int) -> int:
    return key & ORDER_MASK


def make_key(fid: int, order: int) -> int:
    return (fid << ORDER_BITS) | order


def u_key(i: int) -> int:
    return make_key(U_FAMILY, i)


def aux_key(name: str, i: int) -> int:
    return make_key(family_id(name), i)


def is_xjet(key: int) -> bool:
    """u-jets and jets of functions of x: shifted by D_x."""
    return _FAM_KIND[key >> ORDER_BITS] in (KIND_U, KIND_XAUX)


def rank(key: int) -> tuple[int, str]:
    """Ranking of x-jet variables: by derivative order, then family name."""
    return (key & ORDER_MASK, _FAM_NAMES[key >> ORDER_BITS])


@dataclass(frozen=True, order=True)
class JetVar:
    """Named view of a jet variable key."""

    family: str
    order: int = 0

    @property
    def key(self) -> int:
        return make_key(family_id(self.family), self.order)

    @classmethod
    def from_key(cls, key: int) -> "JetVar":
        return cls(family_name(key >> ORDER_BITS), key & ORDER_MASK)

    @property
    def kind(self) -> int:
        return family_kind(family_id(self.family))


class DiffPoly:
    """Sparse differential polynomial: ``{monomial: coefficient}``.

    Treat instances as immutable; every operation returns a new object.
    """

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping[tuple, object] | None = None, *, _clean: bool = False):
        if terms is None:
            self.terms = {}
        elif _clean:
            self.terms = terms
        else:
            self.terms = {tuple(sorted(m)): c for m, c in terms.items() if c}
        self._hash = None

    # -- construction --------------------------------------------------------
    @classmethod
    def const(cls, c) -> "DiffPoly":
        if not isinstance(c, ParamElem) and not isinstance(c, type(mpq(0))):
            c = ParamElem.const(c)
        return cls({(): c} if c else {}, _clean=True)

    @classmethod
    def var(cls, key: int, coeff=ONE) -> "DiffPoly":
        return cls({(key,): coeff}, _clean=True)

    @classmethod
    def u(cls, i: int = 0) -> "DiffPoly":
        return cls.var(u_key(i))

    @classmethod
    def aux(cls, name: str, i: int = 0) -> "DiffPoly":
        return cls.var(aux_key(name, i))

    @classmethod
    def x(cls) -> "DiffPoly":
        return cls.var(X_KEY)

    @classmethod
    def t(cls) -> "DiffPoly":
        return cls.var(T_KEY)

    @classmethod
    def param(cls, name: str) -> "DiffPoly":
        return cls.const(ParamElem.symbol(name))

    # -- basic protocol ------------------------------------------------------
    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[tuple, object]]:
        return iter(self.terms.items())

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiffPoly):
            if isinstance(other, (int, ParamElem)) or hasattr(other, "numerator"):
                other = DiffPoly.const(other)
            else:
                return NotImplemented
        return self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __str__(self) -> str:
        from .io.render import render
        return render(self)

    def __repr__(self) -> str:
        return f"DiffPoly({self})"

    # -- arithmetic ----------------------------------------------------------
    def _coerce(self, other) -> "DiffPoly":
        if isinstance(other, DiffPoly):
            return other
        return DiffPoly.const(other)

    def __add__(self, other) -> "DiffPoly":
        other = self._coerce(other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m)
            if v is None:
                out[m] = c
            else:
                v = v + c
                if v:
                    out[m] = v
                else:
                    del out[m]
        return DiffPoly(out, _clean=True)

    __radd__ = __add__

    def __neg__(self) -> "DiffPoly":
        return DiffPoly({m: -c for m, c in self.terms.items()}, _clean=True)

    def __sub__(self, other) -> "DiffPoly":
        other = self._coerce(other)
        if not other.terms:
            return self
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m)
            if v is None:
                out[m] = -c
            else:
                v = v - c
                if v:
                    out[m] = v
                else:
                    del out[m]
        return DiffPoly(out, _clean=True)

    def __rsub__(self, other) -> "DiffPoly":
        return self._coerce(other) - self

    def scale(self, c) -> "DiffPoly":
        if not c:
            return DiffPoly()
        if c == 1:
            return self
        return DiffPoly({m: v * c for m, v in self.terms.items()}, _clean=True)

    def __mul__(self, other) -> "DiffPoly":
        if not isinstance(other, DiffPoly):
            return self.scale(other)
        a, b = self.terms, other.terms
        if not a or not b:
            return DiffPoly()
        if len(a) < len(b):
            a, b = b, a
        out: dict = {}
        get = out.get
        for m2, c2 in b.items():
            if not m2:
                for m1, c1 in a.items():
                    v = get(m1)
                    out[m1] = c1 * c2 if v is None else v + c1 * c2
                continue
            for m1, c1 in a.items():
                m = tuple(sorted(m1 + m2)) if m1 else m2
                v = get(m)
                out[m] = c1 * c2 if v is None else v + c1 * c2
        return DiffPoly({m: c for m, c in out.items() if c}, _clean=True)

    def __rmul__(self, other) -> "DiffPoly":
        return self.scale(other)

    def __truediv__(self, other) -> "DiffPoly":
        if isinstance(other, DiffPoly):
            if len(other.terms) == 1 and () in other.terms:
                other = other.terms[()]
            else:
                raise JetError("division by a jet-dependent differential polynomial")
        inv = 1 / other
        return self.scale(inv)

    def __pow__(self, k: int) -> "DiffPoly":
        if k < 0:
            raise JetError("negative powers of differential polynomials")
        out = DiffPoly.const(ONE)
        for _ in range(k):
            out = out * self
        return out

    # -- structure -----------------------------------------------------------
    def variables(self) -> set[int]:
        out: set[int] = set()
        for m in self.terms:
            out.update(m)
        return out

    def coefficient(self, mono: tuple):
        return self.terms.get(tuple(sorted(mono)), ZERO)

    def constant_term(self):
        return self.terms.get((), ZERO)

    def is_constant(self) -> bool:
        return all(not m for m in self.terms)

    def map_coeffs(self, fn: Callable) -> "DiffPoly":
        out = {}
        for m, c in self.terms.items():
            v = fn(c)
            if v:
                out[m] = v
        return DiffPoly(out, _clean=True)

    def subs_params(self, mapping: Mapping[str, ParamElem]) -> "DiffPoly":
        if not mapping:
            return self
        return self.map_coeffs(lambda c: c.subs(mapping) if isinstance(c, ParamElem) else c)

    def filter(self, pred: Callable[[tuple], bool]) -> "DiffPoly":
        return DiffPoly({m: c for m, c in self.terms.items() if pred(m)}, _clean=True)

    def split(self, pred: Callable[[tuple], bool]) -> tuple["DiffPoly", "DiffPoly"]:
        yes, no = {}, {}
        for m, c in self.terms.items():
            (yes if pred(m) else no)[m] = c
        return DiffPoly(yes, _clean=True), DiffPoly(no, _clean=True)

    def collect(self, pred: Callable[[int], bool]) -> dict[tuple, "DiffPoly"]:
        """Group terms by their sub-monomial of variables satisfying ``pred``.

        Returns ``{outer monomial: coefficient polynomial in the other variables}``.
        """
        groups: dict[tuple, dict] = {}
        for m, c in self.terms.items():
            outer = tuple(k for k in m if pred(k))
            inner = tuple(k for k in m if not pred(k))
            groups.setdefault(outer, {})[inner] = c
        return {k: DiffPoly(v, _clean=True) for k, v in groups.items()}

    def substitute(self, key: int, value: "DiffPoly") -> "DiffPoly":
        """Replace the jet variable ``key`` by ``value``."""
        if not any(key in m for m in self.terms):
            return self
        out = DiffPoly()
        powers: dict[int, DiffPoly] = {}
        rest: dict = {}
        for m, c in self.terms.items():
            e = m.count(key)
            if not e:
                rest[m] = c
                continue
            if e not in powers:
                powers[e] = value ** e
            others = tuple(k for k in m if k != key)
            out = out + DiffPoly({others: c}, _clean=True) * powers[e]
        return out + DiffPoly(rest, _clean=True)

    def max_degree(self, pred: Callable[[int], bool] = lambda k: True) -> int:
        return max((sum(1 for k in m if pred(k)) for m in self.terms), default=0)

    # -- derivatives ---------------------------------------------------------
    def partial(self, key: int) -> "DiffPoly":
        """Formal partial derivative treating every other variable as independent."""
        out: dict = {}
        for m, c in self.terms.items():
            if key not in m:
                continue
            i = m.index(key)
            e = m.count(key)
            nm = m[:i] + m[i + 1:]
            v = out.get(nm)
            out[nm] = c * e if v is None else v + c * e
        return DiffPoly({m: c for m, c in out.items() if c}, _clean=True)

    def partials(self, pred: Callable[[int], bool]) -> dict[int, "DiffPoly"]:
        """All partial derivatives with respect to variables satisfying ``pred``."""
        acc: dict[int, dict] = {}
        for m, c in self.terms.items():
            prev = None
            for i, k in enumerate(m):
                if k == prev or not pred(k):
                    prev = k
                    continue
                prev = k
                e = m.count(k)
                nm = m[:i] + m[i + 1:]
                d = acc.setdefault(k, {})
                v = d.get(nm)
                d[nm] = c * e if v is None else v + c * e
        return {k: DiffPoly({m: c for m, c in d.items() if c}, _clean=True) for k, d in acc.items()}

    def total_x(self) -> "DiffPoly":
        """Total x-derivative: shifts u- and x-function jets, differentiates x."""
        out: dict = {}
        get = out.get
        kinds = _FAM_KIND
        for m, c in self.terms.items():
            prev = None
            for i, k in enumerate(m):
                if k == prev:
                    continue
                prev = k
                kind = kinds[k >> ORDER_BITS]
                if kind == KIND_U or kind == KIND_XAUX:
                    e = 1
                    j = i + 1
                    while j < len(m) and m[j] == k:
                        e += 1
                        j += 1
                    nm = tuple(sorted(m[:i] + m[i + 1:] + (k + 1,)))
                elif kind == KIND_X:
                    e = m.count(k)
                    nm = m[:i] + m[i + 1:]
                else:
                    continue
                v = get(nm)
                out[nm] = c * e if v is None else v + c * e
        return DiffPoly({m: c for m, c in out.items() if c}, _clean=True)

    def total_x_n(self, n: int) -> "DiffPoly":
        p = self
        for _ in range(n):
            if not p:
                break
            p = p.total_x()
        return p

    def order(self) -> float | int:
        """Highest u-derivative order present; ``-inf`` if u-free."""
        best = -math.inf
        for m in self.terms:
            for k in m:
                if k >> ORDER_BITS == U_FAMILY and (k & ORDER_MASK) > best:
                    best = k & ORDER_MASK
        return best

    def jet_order(self, fid: int) -> float | int:
        best = -math.inf
        for m in self.terms:
            for k in m:
                if k >> ORDER_BITS == fid and (k & ORDER_MASK) > best:
                    best = k & ORDER_MASK
        return best


def partial(p: DiffPoly, v: JetVar | int) -> DiffPoly:
    return p.partial(v if isinstance(v, int) else v.key)


def total_x(p: DiffPoly) -> DiffPoly:
    return p.total_x()


def order(p: DiffPoly) -> float | int:
    return p.order()


# -- evolution equations ------------------------------------------------------


@dataclass(frozen=True)
class AuxFunction:
    """An auxiliary function; jets of order >= ``vanish_from`` are zero."""

    name: str
    base: str
    vanish_from: int | None = None


@dataclass(frozen=True)
class Substitution:
    """One scenario entry.

    kind ``aux_const``: derivatives of ``target`` vanish;
    kind ``aux_value``: ``target`` is the constant ``value`` (a ParamElem);
    kind ``param``: parameter ``target`` becomes ``value``.
    """

    kind: str
    target: str
    value: ParamElem | None = None


@dataclass
class EvolutionEquation:
    """``u_t = rhs`` with parameter, function and scenario declarations."""

    rhs: DiffPoly
    params: tuple[str, ...] = ()
    nonzero: NonzeroSet = field(default_factory=NonzeroSet)
    aux: dict[str, AuxFunction] = field(default_factory=dict)
    scenarios: dict[str, tuple[Substitution, ...]] = field(default_factory=dict)
    name: str = "equation"
    _dx_cache: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        for f in self.aux.values():
            register_family(f.name, f.base)
        if not isinstance(self.nonzero, NonzeroSet):
            self.nonzero = NonzeroSet(self.nonzero)

    # -- derived data --------------------------------------------------------
    def dx_rhs(self, j: int) -> DiffPoly:
        """``D_x^j(F)``, cached."""
        if not self._dx_cache:
            self._dx_cache.append(self.rhs)
        while len(self._dx_cache) <= j:
            self._dx_cache.append(self._dx_cache[-1].total_x())
        return self._dx_cache[j]

    @property
    def order(self):
        return self.rhs.order()

    def replace(self, **changes) -> "EvolutionEquation":
        data = dict(rhs=self.rhs, params=self.params, nonzero=self.nonzero,
                    aux=dict(self.aux), scenarios=dict(self.scenarios), name=self.name)
        data.update(changes)
        return EvolutionEquation(**data)

    def with_aux(self, fn: AuxFunction) -> "EvolutionEquation":
        """Copy with an auxiliary function added or updated (keeps the D_x cache)."""
        aux = dict(self.aux)
        aux[fn.name] = fn
        out = self.replace(aux=aux)
        out._dx_cache = self._dx_cache
        return out

    def total_t(self, p: DiffPoly) -> DiffPoly:
        return total_t(p, self)

    def specialize(self, scenario: str | None) -> "EvolutionEquation":
        """The equation with a named scenario's substitutions applied to F."""
        if scenario is None:
            return self
        subs = self._scenario(scenario)
        rhs = _apply_substitutions(self.rhs, subs)
        aux = {k: v for k, v in self.aux.items()
               if not any(s.kind == "aux_value" and s.target == k for s in subs)}
        for s in subs:
            if s.kind == "aux_const" and s.target in aux:
                if aux[s.target].base == "x":
                    # D_x would regenerate h' from h; a constant function of x needs a value
                    raise JetError(f"scenario {scenario!r}: constant {s.target}(x) needs "
                                   f"a value, e.g. {s.target} = {s.target}0")
                aux[s.target] = AuxFunction(s.target, aux[s.target].base, 1)
        return EvolutionEquation(rhs=rhs, params=self.params, nonzero=self.nonzero, aux=aux,
                                 scenarios={}, name=f"{self.name}[{scenario}]")

    def _scenario(self, scenario: str) -> tuple[Substitution, ...]:
        try:
            return self.scenarios[scenario]
        except KeyError:
            raise JetError(f"unknown scenario {scenario!r}") from None


def total_t(p: DiffPoly, eq: EvolutionEquation) -> DiffPoly:
    """Total t-derivative restricted to ``u_t = F``.

    Functions of x are t-independent; jets of functions of t are shifted,
    honouring ``vanish_from`` declarations of the equation.
    """
    out = DiffPoly()
    parts = p.partials(lambda k: _FAM_KIND[k >> ORDER_BITS] in (KIND_U, KIND_T, KIND_TAUX))
    for k in sorted(parts):
        d = parts[k]
        kind = _FAM_KIND[k >> ORDER_BITS]
        if kind == KIND_U:
            out = out + d * eq.dx_rhs(k & ORDER_MASK)
        elif kind == KIND_T:
            out = out + d
        else:
            name = _FAM_NAMES[k >> ORDER_BITS]
            fn = eq.aux.get(name)
            nxt = (k & ORDER_MASK) + 1
            if fn is not None and fn.vanish_from is not None and nxt >= fn.vanish_from:
                continue
            out = out + d * DiffPoly.var(k + 1)
    return out


def _apply_substitutions(p: DiffPoly, subs: Iterable[Substitution]) -> DiffPoly:
    for s in subs:
        if s.kind in ("aux_const", "aux_value"):
            fid = family_id(s.target)
            out: dict = {}
            for m, c in p.terms.items():
                if any(k >> ORDER_BITS == fid and k & ORDER_MASK >= 1 for k in m):
                    continue
                if s.kind == "aux_value":
                    e = sum(1 for k in m if k >> ORDER_BITS == fid)
                    if e:
                        m = tuple(k for k in m if k >> ORDER_BITS != fid)
                        c = c * s.value ** e
                v = out.get(m)
                out[m] = c if v is None else v + c
            p = DiffPoly({m: c for m, c in out.items() if c}, _clean=True)
    params = {s.target: s.value for s in subs if s.kind == "param"}
    if params:
        p = p.subs_params(params)
    return p


def apply_scenario(p: DiffPoly, eq: EvolutionEquation, scenario: str) -> DiffPoly:
    """Apply a declared scenario's substitutions to ``p``."""
    return _apply_substitutions(p, eq._scenario(scenario))
