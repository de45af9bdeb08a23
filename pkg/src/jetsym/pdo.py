"""Truncated formal series in D with differential-polynomial coefficients.

An operator is ``sum_i a_i D^i`` stored as ``{i: a_i}`` together with a
truncation ``floor``: coefficients below the floor are unknown.  ``floor=None``
marks an exact operator (a finite sum, nothing was discarded).

With ``symbolic=True`` the stored degrees are offsets from a symbolic integer
``r``, i.e. the operator is ``sum_i a_i D^(r+i)``; Leibniz binomials then become
polynomials in the parameter symbol ``r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from gmpy2 import mpq

from .algebra import ONE, ParamElem
from .jet import DiffPoly, EvolutionEquation, total_t, u_key

DEGREE_SYMBOL = "r"


class PDOError(ValueError):
    pass


@dataclass(frozen=True)
class TruncationPolicy:
    """Coefficients at degrees below ``floor`` are discarded."""

    floor: int | None


@lru_cache(maxsize=None)
def binomial(i: int, k: int) -> ParamElem:
    """``i(i-1)...(i-k+1)/k!`` for any integer ``i``."""
    num = 1
    for l in range(k):
        num *= i - l
    return ParamElem.const(mpq(num, math.factorial(k)))


@lru_cache(maxsize=None)
def symbolic_binomial(i: int, k: int) -> ParamElem:
    """``(r+i)(r+i-1)...(r+i-k+1)/k!`` as a polynomial in ``r``."""
    r = ParamElem.symbol(DEGREE_SYMBOL)
    out = ONE
    for l in range(k):
        out = out * (r + (i - l))
    return out / math.factorial(k)


class _Derivs:
    """Lazily extended list ``[b, D_x b, D_x^2 b, ...]``."""

    __slots__ = ("seq",)

    def __init__(self, b: DiffPoly):
        self.seq = [b]

    def __getitem__(self, k: int) -> DiffPoly:
        seq = self.seq
        while len(seq) <= k:
            seq.append(seq[-1].total_x())
        return seq[k]


class PseudoDiffOp:
    __slots__ = ("coeffs", "floor", "symbolic")

    def __init__(self, coeffs: dict[int, DiffPoly] | None = None, floor: int | None = None,
                 symbolic: bool = False):
        coeffs = {i: c for i, c in (coeffs or {}).items() if c}
        if floor is not None:
            coeffs = {i: c for i, c in coeffs.items() if i >= floor}
        self.coeffs = coeffs
        self.floor = floor
        self.symbolic = symbolic

    # -- constructors --------------------------------------------------------
    @classmethod
    def D(cls, k: int = 1, coeff: DiffPoly | None = None, *, symbolic: bool = False) -> "PseudoDiffOp":
        c = coeff if coeff is not None else DiffPoly.const(ONE)
        return cls({k: c}, None, symbolic)

    @classmethod
    def mult(cls, a: DiffPoly) -> "PseudoDiffOp":
        """Multiplication operator ``a D^0``."""
        return cls({0: a})

    @classmethod
    def identity(cls) -> "PseudoDiffOp":
        return cls.D(0)

    # -- protocol ------------------------------------------------------------
    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PseudoDiffOp):
            return NotImplemented
        return self.coeffs == other.coeffs and self.symbolic == other.symbolic

    def __hash__(self):
        return hash((frozenset(self.coeffs.items()), self.symbolic))

    @property
    def deg(self):
        """Largest degree with nonzero coefficient (offset from r if symbolic)."""
        return max(self.coeffs) if self.coeffs else -math.inf

    def coeff(self, i: int) -> DiffPoly:
        return self.coeffs.get(i, DiffPoly())

    def degrees(self) -> list[int]:
        return sorted(self.coeffs, reverse=True)

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for i in self.degrees():
            d = (f"D^(r{i:+d})" if i else "D^r") if self.symbolic else f"D^{i}"
            parts.append(f"({self.coeffs[i]})*{d}")
        if self.floor is None:
            tail = ""
        elif self.symbolic:
            tail = f" + O(D^(r{self.floor - 1:+d}))"
        else:
            tail = f" + O(D^{self.floor - 1})"
        return " + ".join(parts) + tail

    __repr__ = __str__

    # -- linear structure ----------------------------------------------------
    def _check_mode(self, other: "PseudoDiffOp"):
        if self.symbolic != other.symbolic and self.coeffs and other.coeffs:
            raise PDOError("cannot add symbolic-degree and integer-degree operators")

    def __add__(self, other: "PseudoDiffOp") -> "PseudoDiffOp":
        self._check_mode(other)
        out = dict(self.coeffs)
        for i, c in other.coeffs.items():
            out[i] = out[i] + c if i in out else c
        return PseudoDiffOp(out, _max_floor(self.floor, other.floor),
                            self.symbolic or other.symbolic)

    def __neg__(self) -> "PseudoDiffOp":
        return PseudoDiffOp({i: -c for i, c in self.coeffs.items()}, self.floor, self.symbolic)

    def __sub__(self, other: "PseudoDiffOp") -> "PseudoDiffOp":
        return self + (-other)

    def scale(self, c) -> "PseudoDiffOp":
        return PseudoDiffOp({i: a.scale(c) for i, a in self.coeffs.items()}, self.floor, self.symbolic)

    def map_coeffs(self, fn) -> "PseudoDiffOp":
        return PseudoDiffOp({i: fn(a) for i, a in self.coeffs.items()}, self.floor, self.symbolic)

    def truncate(self, floor: int) -> "PseudoDiffOp":
        return PseudoDiffOp(self.coeffs, _max_floor(self.floor, floor), self.symbolic)

    def evaluate_degree(self, m: int) -> "PseudoDiffOp":
        """Specialize a symbolic-degree operator at ``r = m``."""
        if not self.symbolic:
            return self
        val = {DEGREE_SYMBOL: ParamElem.const(m)}
        return PseudoDiffOp({i + m: a.subs_params(val) for i, a in self.coeffs.items()},
                            None if self.floor is None else self.floor + m, False)


def _max_floor(*floors):
    vals = [f for f in floors if f is not None]
    return max(vals) if vals else None


def compose(A: PseudoDiffOp, B: PseudoDiffOp, policy: TruncationPolicy) -> PseudoDiffOp:
    """Product by the generalized Leibniz rule, truncated at ``policy.floor``.

    The result's floor is the highest degree below which the product is not
    fully determined by the (possibly truncated) operands.
    """
    if A.symbolic and B.symbolic:
        raise PDOError("composition of two symbolic-degree operators is not supported")
    if not A or not B:
        return PseudoDiffOp({}, policy.floor, A.symbolic or B.symbolic)
    floor = policy.floor
    infinite = A.symbolic or min(A.coeffs) < 0
    if floor is None and infinite:
        raise PDOError("composition produces an infinite series; a truncation floor is required")
    valid = [floor]
    if A.floor is not None:
        valid.append(A.floor + B.deg)
    if B.floor is not None:
        valid.append(B.floor + A.deg)
    out_floor = _max_floor(*valid)
    binom = symbolic_binomial if A.symbolic else binomial
    out: dict[int, DiffPoly] = {}
    for j, b in B.coeffs.items():
        db = _Derivs(b)
        for i, a in A.coeffs.items():
            k = 0
            while True:
                d = i + j - k
                if out_floor is not None and d < out_floor:
                    break
                if not A.symbolic and 0 <= i < k:
                    break
                term = (a * db[k]).scale(binom(i, k)) if k else a * b
                if term:
                    out[d] = out[d] + term if d in out else term
                k += 1
    return PseudoDiffOp(out, out_floor, A.symbolic or B.symbolic)


def adjoint(Q: PseudoDiffOp, policy: TruncationPolicy) -> PseudoDiffOp:
    """``sum_j (-D)^j o b_j``, truncated at ``policy.floor``."""
    if Q.symbolic:
        raise PDOError("adjoint of a symbolic-degree operator is not supported")
    if not Q:
        return PseudoDiffOp({}, Q.floor)
    floor = policy.floor
    if floor is None and min(Q.coeffs) < 0:
        raise PDOError("adjoint of a series needs a truncation floor")
    out_floor = _max_floor(floor, Q.floor)
    out: dict[int, DiffPoly] = {}
    for j, b in Q.coeffs.items():
        db = _Derivs(b)
        sign = -1 if j % 2 else 1
        k = 0
        while True:
            d = j - k
            if out_floor is not None and d < out_floor:
                break
            if 0 <= j < k:
                break
            term = db[k].scale(binomial(j, k) * sign)
            if term:
                out[d] = out[d] + term if d in out else term
            k += 1
    return PseudoDiffOp(out, out_floor)


def commutator(A: PseudoDiffOp, B: PseudoDiffOp, policy: TruncationPolicy) -> PseudoDiffOp:
    return compose(A, B, policy) - compose(B, A, policy)


def frechet(f: DiffPoly) -> PseudoDiffOp:
    """Linearization ``f_* = sum_i (df/du_i) D^i``."""
    n = f.order()
    if n == -math.inf:
        return PseudoDiffOp()
    return PseudoDiffOp({i: f.partial(u_key(i)) for i in range(n + 1)})


def apply_as_operator(Q: PseudoDiffOp, g: DiffPoly) -> DiffPoly:
    """``sum_i a_i D_x^i(g)`` for a differential operator ``Q``."""
    if Q.symbolic:
        raise PDOError("cannot apply a symbolic-degree operator")
    if any(i < 0 for i in Q.coeffs):
        raise PDOError("operator has negative powers of D; nonlocal application is not supported")
    out = DiffPoly()
    dg = _Derivs(g)
    for i in sorted(Q.coeffs):
        out = out + Q.coeffs[i] * dg[i]
    return out


def dt_op(L: PseudoDiffOp, eq: EvolutionEquation) -> PseudoDiffOp:
    """Coefficientwise total t-derivative."""
    return PseudoDiffOp({i: total_t(a, eq) for i, a in L.coeffs.items()}, L.floor, L.symbolic)


def dx_op(L: PseudoDiffOp) -> PseudoDiffOp:
    return PseudoDiffOp({i: a.total_x() for i, a in L.coeffs.items()}, L.floor, L.symbolic)
