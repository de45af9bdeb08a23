"""Exact coefficient arithmetic.

Rationals are ``gmpy2.mpq``.  :class:`ParamElem` is an element of the field of
rational functions in named parameter symbols.  Symbols live in one
process-wide table; their registration order is the variable order of the
graded-lex monomial order used for canonical forms and for printing.

Canonical form of a ParamElem is ``num / den`` where

* ``num`` is a Laurent polynomial (negative exponents allowed),
* ``den`` is ``None`` (meaning 1) or a polynomial with no monomial factor,
  leading coefficient 1 under grlex, coprime to ``num``.

Monomial denominators are folded into negative exponents of ``num``; this
keeps the overwhelmingly common case (denominators that are products of
nonzero parameters) free of any gcd computation.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import flint
from gmpy2 import mpq

Rat = mpq

_SYMBOLS: list[str] = []
_INDEX: dict[str, int] = {}


class AlgebraError(ArithmeticError):
    pass


class InterpolationError(AlgebraError):
    pass


def symbol_index(name: str) -> int:
    """Index of parameter symbol ``name``, registering it if new."""
    try:
        return _INDEX[name]
    except KeyError:
        _INDEX[name] = len(_SYMBOLS)
        _SYMBOLS.append(name)
        return _INDEX[name]


def symbol_name(index: int) -> str:
    return _SYMBOLS[index]


def known_symbols() -> tuple[str, ...]:
    return tuple(_SYMBOLS)


def to_rat(value) -> mpq:
    if isinstance(value, str):
        return mpq(value)
    return mpq(value)


# -- monomials: tuples of exponents, trailing zeros stripped -----------------


def _strip(exps: list[int]) -> tuple[int, ...]:
    while exps and exps[-1] == 0:
        exps.pop()
    return tuple(exps)


def _mmul(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    if len(a) < len(b):
        a, b = b, a
    r = list(a)
    for i, e in enumerate(b):
        r[i] += e
    return _strip(r)


def _mneg(a: tuple) -> tuple:
    return tuple(-e for e in a)


def _grlex_key(m: tuple):
    return (sum(m), m)


# -- polynomial dict helpers ------------------------------------------------


def _padd(p: dict, q: dict, sign: int = 1) -> dict:
    r = dict(p)
    for m, c in q.items():
        v = r.get(m)
        if v is None:
            r[m] = c if sign > 0 else -c
        else:
            v = v + c if sign > 0 else v - c
            if v:
                r[m] = v
            else:
                del r[m]
    return r


def _pmul(p: dict, q: dict) -> dict:
    if len(p) == 1 and len(q) == 1:
        (m1, c1), = p.items()
        (m2, c2), = q.items()
        return {_mmul(m1, m2): c1 * c2}
    r: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = _mmul(m1, m2)
            v = r.get(m)
            if v is None:
                r[m] = c1 * c2
            else:
                v += c1 * c2
                if v:
                    r[m] = v
                else:
                    del r[m]
    return r


def _pscale(p: dict, c) -> dict:
    return {m: v * c for m, v in p.items()}


def _pshift(p: dict, mono: tuple) -> dict:
    return {_mmul(m, mono): v for m, v in p.items()}


def _min_exponents(p: dict) -> tuple:
    n = max((len(m) for m in p), default=0)
    lo = [None] * n
    for m in p:
        for i in range(n):
            e = m[i] if i < len(m) else 0
            if lo[i] is None or e < lo[i]:
                lo[i] = e
    return _strip([e or 0 for e in lo])


def _leading(p: dict):
    m = max(p, key=_grlex_key)
    return m, p[m]


def _flint_ctx(n: int):
    names = tuple(_SYMBOLS[:n]) if n else ("_",)
    return flint.fmpq_mpoly_ctx.get(names, "deglex")


def _to_flint(p: dict, ctx, n: int):
    d = {}
    for m, c in p.items():
        exps = tuple(m) + (0,) * (max(n, 1) - len(m))
        d[exps] = flint.fmpq(int(c.numerator), int(c.denominator))
    return ctx.from_dict(d)


def _from_flint(f) -> dict:
    out = {}
    for exps, c in f.to_dict().items():
        out[_strip(list(exps))] = mpq(int(c.p), int(c.q))
    return out


def _normalize(num: dict, den: dict) -> tuple[dict, dict | None]:
    """Reduce ``num/den`` (both Laurent) to canonical form."""
    if not num:
        return {}, None
    if not den:
        raise ZeroDivisionError("ParamElem division by zero")
    if len(den) == 1:
        (m, c), = den.items()
        return _pshift(_pscale(num, 1 / c), _mneg(m)), None
    # clear negative exponents so both sides are honest polynomials
    lo = [min(0, e) for e in _min_exponents({**{m: 1 for m in num}, **{m: 1 for m in den}})]
    shift = _strip([-e for e in lo])
    N = _pshift(num, shift)
    D = _pshift(den, shift)
    n = max([len(m) for m in N] + [len(m) for m in D] + [1])
    ctx = _flint_ctx(n)
    fN, fD = _to_flint(N, ctx, n), _to_flint(D, ctx, n)
    g = fN.gcd(fD)
    if not g.is_one():
        fN, fD = fN / g, fD / g
    N, D = _from_flint(fN), _from_flint(fD)
    mc = _min_exponents(D)
    if mc:
        D = _pshift(D, _mneg(mc))
        N = _pshift(N, _mneg(mc))
    if len(D) == 1:
        (m, c), = D.items()
        return _pscale(N, 1 / c), None
    _, lc = _leading(D)
    if lc != 1:
        D = _pscale(D, 1 / lc)
        N = _pscale(N, 1 / lc)
    return N, D


class ParamElem:
    """Element of Q(parameters).  Immutable."""

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num: Mapping | None = None, den: Mapping | None = None, *, _canonical=False):
        if _canonical:
            self.num = num
            self.den = den
        else:
            n = {m: mpq(c) for m, c in (num or {}).items() if c}
            d = None if den is None else {m: mpq(c) for m, c in den.items() if c}
            if d is not None and d == {(): 1}:
                d = None
            if d is None:
                self.num, self.den = n, None
            else:
                self.num, self.den = _normalize(n, d)
        self._hash = None

    # -- constructors --------------------------------------------------------
    @classmethod
    def const(cls, value) -> "ParamElem":
        v = mpq(value)
        return cls({(): v} if v else {}, None, _canonical=True)

    @classmethod
    def symbol(cls, name: str) -> "ParamElem":
        i = symbol_index(name)
        return cls({(0,) * i + (1,): mpq(1)}, None, _canonical=True)

    @classmethod
    def coerce(cls, value) -> "ParamElem":
        if isinstance(value, ParamElem):
            return value
        return cls.const(value)

    # -- predicates ----------------------------------------------------------
    def __bool__(self) -> bool:
        return bool(self.num)

    def is_zero(self) -> bool:
        return not self.num

    def is_constant(self) -> bool:
        return self.den is None and all(not m for m in self.num)

    def is_monomial(self) -> bool:
        """True for c * (product of symbol powers), c a nonzero rational."""
        return self.den is None and len(self.num) == 1

    def as_rational(self) -> mpq:
        if not self.num:
            return mpq(0)
        if not self.is_constant():
            raise AlgebraError(f"{self} is not a rational constant")
        return self.num[()]

    def free_symbols(self) -> set[str]:
        out = set()
        for part in (self.num, self.den or {}):
            for m in part:
                out.update(_SYMBOLS[i] for i, e in enumerate(m) if e)
        return out

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, ParamElem):
            try:
                other = ParamElem.const(other)
            except (TypeError, ValueError):
                return NotImplemented
        if not other.num:
            return self
        if not self.num:
            return other
        if self.den is None and other.den is None:
            return ParamElem(_padd(self.num, other.num), None, _canonical=True)
        d1 = self.den or {(): mpq(1)}
        d2 = other.den or {(): mpq(1)}
        if d1 == d2:
            n, d = _normalize(_padd(self.num, other.num), d1)
        else:
            n, d = _normalize(_padd(_pmul(self.num, d2), _pmul(other.num, d1)), _pmul(d1, d2))
        return ParamElem(n, d, _canonical=True)

    __radd__ = __add__

    def __neg__(self):
        return ParamElem({m: -c for m, c in self.num.items()}, self.den, _canonical=True)

    def __sub__(self, other):
        if not isinstance(other, ParamElem):
            other = ParamElem.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return ParamElem.const(other) - self

    def __mul__(self, other):
        if not isinstance(other, ParamElem):
            try:
                c = mpq(other)
            except (TypeError, ValueError):
                return NotImplemented
            if not c or not self.num:
                return ZERO
            return ParamElem({m: v * c for m, v in self.num.items()}, self.den, _canonical=True)
        if not self.num or not other.num:
            return ZERO
        if self.den is None and other.den is None:
            return ParamElem(_pmul(self.num, other.num), None, _canonical=True)
        d1 = self.den or {(): mpq(1)}
        d2 = other.den or {(): mpq(1)}
        n, d = _normalize(_pmul(self.num, other.num), _pmul(d1, d2))
        return ParamElem(n, d, _canonical=True)

    __rmul__ = __mul__

    def inverse(self) -> "ParamElem":
        if not self.num:
            raise ZeroDivisionError("inverse of the zero parameter element")
        if self.den is None and len(self.num) == 1:
            (m, c), = self.num.items()
            return ParamElem({_mneg(m): 1 / c}, None, _canonical=True)
        n, d = _normalize(dict(self.den or {(): mpq(1)}), self.num)
        return ParamElem(n, d, _canonical=True)

    def __truediv__(self, other):
        if not isinstance(other, ParamElem):
            c = mpq(other)
            if not c:
                raise ZeroDivisionError("ParamElem division by zero")
            return self * (1 / c)
        return self * other.inverse()

    def __rtruediv__(self, other):
        return ParamElem.const(other) * self.inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = ONE
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- comparison ----------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, ParamElem):
            try:
                other = ParamElem.const(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((frozenset(self.num.items()),
                               frozenset(self.den.items()) if self.den else None))
        return self._hash

    # -- structure -----------------------------------------------------------
    def numerator(self) -> dict:
        """Polynomial numerator (nonnegative exponents) of the reduced fraction."""
        lo = _min_exponents(self.num)
        shift = _strip([max(0, -e) for e in lo])
        return _pshift(self.num, shift)

    def denominator(self) -> dict:
        lo = _min_exponents(self.num)
        shift = _strip([max(0, -e) for e in lo])
        den = self.den or {(): mpq(1)}
        return _pshift(den, shift)

    def subs(self, mapping: Mapping[str, "ParamElem"]) -> "ParamElem":
        """Substitute parameter symbols by parameter elements."""
        if not mapping or not (self.free_symbols() & set(mapping)):
            return self
        idx = {symbol_index(k): ParamElem.coerce(v) for k, v in mapping.items()}

        def ev(poly: dict) -> ParamElem:
            total = ZERO
            for m, c in poly.items():
                term = ParamElem.const(c)
                rest = []
                for i, e in enumerate(m):
                    if e and i in idx:
                        term = term * idx[i] ** e
                        rest.append(0)
                    else:
                        rest.append(e)
                term = term * ParamElem({_strip(rest): mpq(1)}, None, _canonical=True)
                total = total + term
            return total

        out = ev(self.num)
        if self.den is not None:
            out = out / ev(self.den)
        return out

    def eval_mod(self, values: Mapping[int, int], p: int) -> int:
        """Evaluate modulo prime ``p``; ``values`` maps symbol index to residue."""

        def ev(poly):
            acc = 0
            for m, c in poly.items():
                t = int(c.numerator) * pow(int(c.denominator), -1, p) % p
                for i, e in enumerate(m):
                    if e:
                        t = t * pow(values[i], e, p) % p
                acc = (acc + t) % p
            return acc

        n = ev(self.num)
        if self.den is None:
            return n
        d = ev(self.den)
        if d == 0:
            raise ZeroDivisionError("denominator vanishes at the sample point")
        return n * pow(d, -1, p) % p

    def eval_rat(self, values: Mapping[str, object]) -> mpq:
        """Evaluate at rational values for every free symbol."""
        vals = {symbol_index(k): mpq(v) for k, v in values.items()}

        def ev(poly):
            acc = mpq(0)
            for m, c in poly.items():
                t = c
                for i, e in enumerate(m):
                    if e:
                        t = t * vals[i] ** e
                acc += t
            return acc

        n = ev(self.num)
        return n if self.den is None else n / ev(self.den)

    def degree_in(self, name: str) -> int:
        """Degree in ``name`` of a polynomial-in-``name`` element."""
        i = symbol_index(name)
        if self.den is not None and any(len(m) > i and m[i] for m in self.den):
            raise AlgebraError(f"{name} occurs in the denominator")
        return max((m[i] if len(m) > i else 0 for m in self.num), default=-1)

    def coeff_in(self, name: str, k: int) -> "ParamElem":
        """Coefficient of ``name**k`` (the element must be polynomial in name)."""
        i = symbol_index(name)
        out = {}
        for m, c in self.num.items():
            e = m[i] if len(m) > i else 0
            if e == k:
                mm = list(m)
                if len(mm) > i:
                    mm[i] = 0
                out[_strip(mm)] = c
        return ParamElem(out, self.den, _canonical=True) if out else ZERO

    def sort_key(self):
        return tuple(sorted((_grlex_key(m), str(c)) for m, c in self.num.items()))

    # -- printing ------------------------------------------------------------
    def __str__(self):
        from .io.render import render_param
        return render_param(self)

    def __repr__(self):
        return f"ParamElem({self})"


ZERO = ParamElem({}, None, _canonical=True)
ONE = ParamElem({(): mpq(1)}, None, _canonical=True)


def param_arith(lhs: ParamElem, rhs: ParamElem, op: str) -> ParamElem:
    """Binary field operation by name: add, sub, mul, div."""
    if op == "add":
        return lhs + rhs
    if op == "sub":
        return lhs - rhs
    if op == "mul":
        return lhs * rhs
    if op == "div":
        if not rhs:
            raise ZeroDivisionError("division by the zero parameter element")
        return lhs / rhs
    raise ValueError(f"unknown operation {op!r}")


class NonzeroSet(frozenset):
    """Parameter symbols assumed to be nonzero."""

    def indices(self) -> set[int]:
        return {symbol_index(s) for s in self}


def strip_nonvanishing(e: ParamElem, nz: Iterable[str]) -> ParamElem:
    """Remove rational content and powers of nonzero symbols from ``e``.

    The result vanishes iff ``e`` does.  Sum factors are kept.
    """
    if not e.num:
        return e
    nzi = {symbol_index(s) for s in nz}
    lo = _min_exponents(e.num)
    drop = _strip([x if i in nzi else 0 for i, x in enumerate(lo)])
    num = _pshift(e.num, _mneg(drop))
    _, lc = _leading(num)
    num = _pscale(num, 1 / lc)
    return ParamElem(num, e.den, _canonical=True)


def interpolate_poly(points: Sequence[tuple[int, ParamElem]], degree_bound: int,
                     var: str = "r") -> ParamElem:
    """Lagrange interpolation in the symbol ``var`` over the parameter field.

    The first ``degree_bound + 1`` points determine the interpolant; any extra
    points must agree with it, otherwise the requested degree bound is too
    small and :class:`InterpolationError` is raised.
    """
    xs = [int(x) for x, _ in points]
    if len(set(xs)) != len(xs):
        raise InterpolationError("duplicate sample abscissae")
    if len(points) < degree_bound + 1:
        raise InterpolationError(
            f"need {degree_bound + 1} samples for degree {degree_bound}, got {len(points)}")
    base = [(int(x), ParamElem.coerce(y)) for x, y in points[: degree_bound + 1]]
    # Newton divided differences; abscissae are integers so divisions are cheap
    coeffs = [y for _, y in base]
    n = len(base)
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            coeffs[i] = (coeffs[i] - coeffs[i - 1]) / (base[i][0] - base[i - j][0])
    r = ParamElem.symbol(var)
    result = coeffs[-1]
    for i in range(n - 2, -1, -1):
        result = result * (r - base[i][0]) + coeffs[i]
    for x, y in points[degree_bound + 1:]:
        if result.subs({var: ParamElem.const(x)}) != ParamElem.coerce(y):
            raise InterpolationError(
                f"interpolation-degree-overflow: sample at {var}={x} disagrees with "
                f"the degree-{degree_bound} interpolant")
    return result
