from pathlib import Path

import pytest
from gmpy2 import mpq
from hypothesis import given, settings

from jetsym.io.parser import Context, parse_expr
from jetsym.jet import DiffPoly, aux_key, register_family, total_t
from jetsym.varcalc import (
    ConservedVector, VariationalError, cosymmetry_defect, euler, integrate_x, inverse_euler,
    is_exact, make_conserved_vector, reduce_mod_exact, symmetry_defect, verify_conserved_vector,
)

from conftest import diffpolys, load

DATA = Path(__file__).parent / "data"
u0, u1, u2, u3 = (DiffPoly.u(i) for i in range(4))
h1 = DiffPoly.aux("h", 1)
x = DiffPoly.x()


def krri_expr(text):
    return parse_expr(" ".join(text.split()), Context(["a", "b", "d", "h0"], {"h": "x"}))


def test_euler_examples():
    assert not euler(u0 * u1)
    assert euler(u1 * u1) == -2 * u2
    assert euler(h1 * u0) == h1


def test_euler_other_family():
    assert euler(DiffPoly.aux("h", 1) * DiffPoly.aux("h", 1), aux_key("h", 0) >> 10) == -2 * DiffPoly.aux("h", 2)


def test_integrate_examples():
    res = integrate_x(u1 * u2)
    assert res.exact and res.antiderivative == u1 * u1 * mpq(1, 2)
    res = integrate_x(u0 * u2)
    assert res.antiderivative == u0 * u1
    assert res.remainder == -(u1 * u1)


def test_integrate_krri_rhs_gives_flux():
    krri = load("krri")
    res = integrate_x(krri.rhs)
    assert res.exact
    assert res.antiderivative == krri_expr((DATA / "krri_flux.txt").read_text())


def test_is_exact_examples():
    assert is_exact(u1 * u1) == (False, None)
    register_family("f0", "t")
    f0 = DiffPoly.aux("f0", 0)
    ok, s = is_exact(f0 * x)
    assert ok and s == f0 * x * x * mpq(1, 2)


def test_inverse_euler_examples():
    assert inverse_euler(DiffPoly.const(1)) == u0
    assert inverse_euler(u0) == u0 * u0 * mpq(1, 2)
    with pytest.raises(VariationalError):
        inverse_euler(u1)


def test_conserved_vector_examples():
    linear3 = load("linear3")
    cv = make_conserved_vector(DiffPoly.const(1), linear3)
    assert (cv.density, cv.flux) == (u0, u2)
    kdv = load("kdv")
    cv = make_conserved_vector(u0, kdv)
    assert cv.density == u0 * u0 * mpq(1, 2)
    assert cv.flux == u0 * u2 - u1 * u1 * mpq(1, 2) + u0 ** 3 * mpq(1, 3)
    assert not cv.defect()


def test_krri_conserved_vector():
    krri = load("krri")
    cv = make_conserved_vector(DiffPoly.const(1), krri)
    assert cv.density == u0
    assert cv.flux == krri_expr((DATA / "krri_flux.txt").read_text())


def test_printed_flux_sign():
    # the leading flux term as printed has the wrong sign
    krri = load("krri")
    sigma = krri_expr((DATA / "krri_flux_printed.txt").read_text())
    assert verify_conserved_vector(u0, sigma, krri) == -2 * u1


def test_conserved_vector_rejects_bad_pair():
    with pytest.raises(VariationalError):
        ConservedVector(u0, u1, load("kdv"))


def test_non_cosymmetry_rejected():
    with pytest.raises(VariationalError):
        make_conserved_vector(u1, load("kdv"))


def test_cosymmetry_and_symmetry_defects():
    kdv = load("kdv")
    assert not cosymmetry_defect(DiffPoly.const(1), kdv)
    assert not cosymmetry_defect(u0, kdv)
    assert not symmetry_defect(u1, kdv)
    assert symmetry_defect(u0, kdv)


def test_reduce_mod_exact_examples():
    assert not reduce_mod_exact(u0 * u1)
    assert reduce_mod_exact(u0 * u0 + (u0 * u2).total_x()) == u0 * u0
    assert reduce_mod_exact(u0) == u0


@settings(max_examples=200)
@given(diffpolys(max_u=4))
def test_euler_kills_total_derivatives(p):
    assert not euler(p.total_x())


@settings(max_examples=100)
@given(diffpolys(max_u=3))
def test_integration_round_trip(s):
    res = integrate_x(s.total_x())
    assert res.exact
    assert res.antiderivative.total_x() == s.total_x()


@given(diffpolys(max_u=3), diffpolys(max_u=3))
def test_integration_decomposition(p, zeta):
    res = integrate_x(p)
    assert res.antiderivative.total_x() + res.remainder == p
    rem = reduce_mod_exact(p)
    assert reduce_mod_exact(rem) == rem
    assert reduce_mod_exact(p - zeta.total_x()) == rem


@given(diffpolys(max_u=2, with_xt=False))
def test_inverse_euler_certificate(g):
    try:
        rho = inverse_euler(g)
    except VariationalError:
        return
    assert euler(rho) == g


@given(diffpolys(max_u=2, with_h=False, with_xt=False, max_deg=2))
def test_euler_images_are_variational(rho):
    g = euler(rho)
    assert euler(inverse_euler(g)) == g
