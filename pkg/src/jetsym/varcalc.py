"""Euler operators, integration by parts and conserved vectors."""

from __future__ import annotations

from dataclasses import dataclass

from gmpy2 import mpq

from .algebra import ParamElem
from .jet import (
    ORDER_BITS, ORDER_MASK, U_FAMILY, X_KEY, DiffPoly, EvolutionEquation,
    is_xjet, make_key, rank, total_t,
)
from .pdo import TruncationPolicy, adjoint, apply_as_operator, frechet


class VariationalError(ValueError):
    pass


def euler(p: DiffPoly, wrt: int = U_FAMILY) -> DiffPoly:
    """Variational derivative ``sum_i (-D_x)^i dp/dw_i`` for the jet family ``wrt``."""
    top = p.jet_order(wrt)
    if top < 0:
        return DiffPoly()
    out = p.partial(make_key(wrt, top))
    for i in range(top - 1, -1, -1):
        out = p.partial(make_key(wrt, i)) - out.total_x()
    return out


@dataclass(frozen=True)
class IntegrationResult:
    """``input == D_x(antiderivative) + remainder``."""

    antiderivative: DiffPoly
    remainder: DiffPoly

    @property
    def exact(self) -> bool:
        return not self.remainder


def _integrate_jet_free(p: DiffPoly) -> DiffPoly:
    out = {}
    for m, c in p.terms.items():
        e = m.count(X_KEY)
        nm = tuple(sorted(m + (X_KEY,)))
        out[nm] = c * mpq(1, e + 1)
    return DiffPoly(out, _clean=True)


def integrate_x(p: DiffPoly) -> IntegrationResult:
    """Invert D_x as far as possible by repeated integration by parts.

    The highest-ranked jet variable ``w_k`` is removed from every term where
    it occurs linearly with a cofactor ranked at most ``w_{k-1}``; such terms
    integrate to ``cofactor`` integrated in ``w_{k-1}``.  Other terms holding
    ``w_k`` cannot be reduced and go to the remainder.  Jet-free terms are
    integrated in x directly.
    """
    s = DiffPoly()
    rem: dict = {}
    work = p
    while work:
        jets = [k for k in work.variables() if is_xjet(k)]
        if not jets:
            s = s + _integrate_jet_free(work)
            break
        top = max(jets, key=rank)
        order = top & ORDER_MASK
        prev = top - 1
        prev_rank = rank(prev) if order else None
        valid: dict = {}
        stuck: dict = {}
        for m, c in work.terms.items():
            e = m.count(top)
            if not e:
                continue
            if order == 0 or e > 1:
                stuck[m] = c
                continue
            cof = list(m)
            cof.remove(top)
            if any(k != prev and is_xjet(k) and rank(k) > prev_rank for k in cof):
                stuck[m] = c
                continue
            a = cof.count(prev)
            cof.append(prev)
            valid[tuple(sorted(cof))] = c * mpq(1, a + 1)
        for m, c in stuck.items():
            rem[m] = rem[m] + c if m in rem else c
        q = DiffPoly(valid, _clean=True)
        s = s + q
        work = work - DiffPoly(stuck, _clean=True) - q.total_x()
    remainder = DiffPoly({m: c for m, c in rem.items() if c}, _clean=True)
    return IntegrationResult(s, remainder)


def is_exact(p: DiffPoly) -> tuple[bool, DiffPoly | None]:
    """Whether ``p = D_x(s)``; returns ``(True, s)`` or ``(False, None)``."""
    res = integrate_x(p)
    return (True, res.antiderivative) if res.exact else (False, None)


def reduce_mod_exact(rho: DiffPoly) -> DiffPoly:
    """Representative of ``rho`` modulo the image of D_x."""
    return integrate_x(rho).remainder


def inverse_euler(gamma: DiffPoly) -> DiffPoly:
    """Density ``rho`` with ``euler(rho) == gamma`` by the homotopy formula in u.

    Raises VariationalError when ``gamma`` is not a variational derivative.
    """
    u = DiffPoly.u(0)
    out = {}
    for m, c in gamma.terms.items():
        deg = sum(1 for k in m if k >> ORDER_BITS == U_FAMILY)
        out[m] = c * mpq(1, deg + 1)
    rho = DiffPoly(out, _clean=True) * u
    if euler(rho) != gamma:
        raise VariationalError("not a variational derivative: the homotopy density does not reproduce it")
    return rho


def cosymmetry_defect(gamma: DiffPoly, eq: EvolutionEquation) -> DiffPoly:
    """``D_t(gamma) + l_F^+(gamma)``; zero exactly for cosymmetries."""
    lf_adj = adjoint(frechet(eq.rhs), TruncationPolicy(None))
    return total_t(gamma, eq) + apply_as_operator(lf_adj, gamma)


def symmetry_defect(g: DiffPoly, eq: EvolutionEquation) -> DiffPoly:
    """``D_t(G) - l_F(G)``; zero exactly for symmetry characteristics."""
    return total_t(g, eq) - apply_as_operator(frechet(eq.rhs), g)


def _drop_t_only(sigma: DiffPoly) -> tuple[DiffPoly, DiffPoly]:
    """Split off terms holding neither x nor any x-jet (pure functions of t)."""
    return sigma.split(lambda m: any(k == X_KEY or is_xjet(k) for k in m))


@dataclass(frozen=True)
class ConservedVector:
    """Density and flux with ``D_t(rho) = D_x(sigma)``, checked on construction."""

    density: DiffPoly
    flux: DiffPoly
    equation: EvolutionEquation

    def __post_init__(self):
        if self.defect():
            raise VariationalError("D_t(rho) - D_x(sigma) does not vanish")

    def defect(self) -> DiffPoly:
        return total_t(self.density, self.equation) - self.flux.total_x()


def make_conserved_vector(gamma: DiffPoly, eq: EvolutionEquation,
                          check_cosymmetry: bool = True) -> ConservedVector:
    """Conserved vector whose characteristic is the cosymmetry ``gamma``."""
    if check_cosymmetry and cosymmetry_defect(gamma, eq):
        raise VariationalError("gamma is not a cosymmetry of the equation")
    rho = inverse_euler(gamma)
    res = integrate_x(total_t(rho, eq))
    if not res.exact:
        raise VariationalError("D_t(rho) is not D_x-exact; no local flux")
    sigma, _ = _drop_t_only(res.antiderivative)
    return ConservedVector(rho, sigma, eq)


def verify_conserved_vector(rho: DiffPoly, sigma: DiffPoly, eq: EvolutionEquation) -> DiffPoly:
    """``D_t(rho) - D_x(sigma)``; the pair is a conserved vector iff this is zero."""
    return total_t(rho, eq) - sigma.total_x()
