import math

import pytest
from gmpy2 import mpq
from hypothesis import given, settings

from jetsym.algebra import ParamElem
from jetsym.io.parser import parse_equation, parse_expr, Context
from jetsym.jet import (
    DiffPoly, EvolutionEquation, JetError, JetVar, T_KEY, X_KEY, apply_scenario, aux_key,
    partial, total_t, u_key,
)

from conftest import CORPUS, diffpolys, load

u0, u1, u2, u3, u4 = (DiffPoly.u(i) for i in range(5))
h0, h1 = DiffPoly.aux("h", 0), DiffPoly.aux("h", 1)
x, t = DiffPoly.x(), DiffPoly.t()


def P(text, eq=None):
    if eq is None:
        return parse_expr(text, Context(["a", "b", "d", "h0"], {"h": "x"}))
    return parse_expr(text, Context(eq.params, {f.name: f.base for f in eq.aux.values()}))


def test_partial_examples():
    assert partial(u0 * u1, JetVar("u", 1)) == u0
    assert (h1 * u0 ** 2).partial(u_key(0)) == 2 * h1 * u0
    assert (x * t).partial(u_key(0)) == DiffPoly()


def test_total_x_examples():
    assert u0.total_x() == u1
    assert (h0 * u0).total_x() == h1 * u0 + h0 * u1
    assert (x * x).total_x() == 2 * x
    assert t.total_x() == DiffPoly()


def test_total_t_examples():
    kdv = load("kdv")
    assert total_t(u0, kdv) == kdv.rhs
    assert total_t(t, kdv) == DiffPoly.const(1)
    assert total_t(u1, kdv) == u1 ** 2 + u0 * u2 + u4
    assert total_t(x * h1, load("krri")) == DiffPoly()


def test_order_examples():
    assert load("krri").rhs.order() == 5
    assert (h1 * x + t).order() == -math.inf
    assert (u0 ** 2).order() == 0


def test_apply_scenario_examples():
    krri = load("krri")
    assert apply_scenario(h1 * u0 + h0 * u1, krri, "constant_h") == P("h0*u_x")
    assert apply_scenario(P("d*h*u"), krri, "hd_four") == 4 * u0
    assert apply_scenario(u0 * u3, krri, "constant_h") == u0 * u3
    with pytest.raises(JetError):
        apply_scenario(u0, krri, "no_such")


def test_specialized_equation_drops_h():
    spec = load("krri").specialize("hd_four")
    assert "h" not in spec.aux
    # hd = 4 turns d/2*h*u_x - u_x into u_x
    assert spec.rhs.coefficient((u_key(1),)) == 1


def test_constant_x_function_requires_value():
    eq = parse_equation("functions: g(x)\nu_t = g*u_x + u_xxx\nscenario flat: g' = 0\n")
    with pytest.raises(JetError):
        eq.specialize("flat")


def test_t_function_vanishing_jets():
    from jetsym.jet import AuxFunction, register_family
    register_family("q", "t")
    eq = load("kdv").with_aux(AuxFunction("q", "t", 2))
    q0, q1 = DiffPoly.aux("q", 0), DiffPoly.aux("q", 1)
    assert total_t(q0, eq) == q1
    assert total_t(q1, eq) == DiffPoly()
    assert q0.total_x() == DiffPoly()


def test_arithmetic_helpers():
    p = 3 * u0 * u1 - u2 + ParamElem.symbol("a")
    assert p - p == DiffPoly()
    assert (p ** 2).order() == 2
    assert p.scale(mpq(1, 3)).coefficient((u_key(0), u_key(1))) == 1
    assert u2.substitute(u_key(2), u0 * u0) == u0 ** 2


@pytest.mark.parametrize("name", CORPUS)
@settings(max_examples=200)
@given(p=diffpolys(max_u=4))
def test_dx_dt_commute(name, p):
    eq = load(name)
    assert total_t(p.total_x(), eq) == total_t(p, eq).total_x()


@given(diffpolys(), diffpolys())
def test_leibniz(p, q):
    assert (p * q).total_x() == p.total_x() * q + p * q.total_x()


@given(diffpolys(params=True))
def test_order_grows_under_dx(p):
    if p.order() >= 0:
        assert p.total_x().order() == p.order() + 1


@given(diffpolys(max_u=3))
def test_apply_scenario_idempotent(p):
    krri = load("krri")
    for sc in ("constant_h", "hd_four"):
        once = apply_scenario(p, krri, sc)
        assert apply_scenario(once, krri, sc) == once


def test_evolution_equation_defaults():
    eq = EvolutionEquation(rhs=u3)
    assert eq.order == 3
    assert eq.dx_rhs(2) == DiffPoly.u(5)
