import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from jetsym.algebra import (
    AlgebraError, InterpolationError, NonzeroSet, ParamElem, interpolate_poly, param_arith,
    strip_nonvanishing,
)

from conftest import nonzero_param_elems, param_elems

a, b, d, c = (ParamElem.symbol(s) for s in "abdc")
r = ParamElem.symbol("r")


def test_inverse_pair():
    assert param_arith(a / b, b / a, "mul") == ParamElem.const(1)


def test_factor_cancellation():
    out = param_arith(a * a - b * b, a - b, "div")
    assert out == a + b
    assert out.den is None


def test_krri_leading_coefficient():
    assert param_arith(ParamElem.const(mpq(19, 360)) * b, b, "mul") == mpq(19, 360) * b ** 2


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        param_arith(a, ParamElem.const(0), "div")


def test_unknown_operation():
    with pytest.raises(ValueError):
        param_arith(a, b, "pow")


def test_equality_with_rationals():
    assert ParamElem.const(3) == 3
    assert (a / a) == 1
    assert ParamElem.const(mpq(1, 2)).as_rational() == mpq(1, 2)


def test_denominator_normalized():
    e = (a + b) / (2 * a + 2 * b * b)
    # leading coefficient of the denominator is one
    assert e == (a + b) / (a + b * b) / 2
    assert hash(e) == hash((a + b) / (a + b * b) / 2)


def test_strip_essential_factor():
    nz = NonzeroSet({"a", "b"})
    assert strip_nonvanishing(a ** 3 * c / b, nz) == c


def test_strip_zero():
    assert strip_nonvanishing(ParamElem.const(0), NonzeroSet({"a"})) == 0


def test_strip_keeps_sum_factor():
    assert strip_nonvanishing((a + b) * d, NonzeroSet({"d"})) == a + b


def test_strip_without_assumptions_keeps_symbols():
    assert strip_nonvanishing(-4 * a * c, NonzeroSet()) == a * c


def test_interpolate_linear_factor():
    pts = [(0, 837 * c), (1, 994 * c), (2, 1151 * c)]
    assert interpolate_poly(pts, 2) == (157 * r + 837) * c


def test_interpolate_constant():
    assert interpolate_poly([(0, ParamElem.const(5)), (1, ParamElem.const(5))], 1) == 5


def test_interpolate_square():
    pts = [(m, ParamElem.const(m * m)) for m in range(4)]
    assert interpolate_poly(pts, 3) == r * r


def test_interpolate_duplicate_abscissae():
    with pytest.raises(InterpolationError):
        interpolate_poly([(1, a), (1, a)], 1)


def test_interpolate_overflow():
    pts = [(m, ParamElem.const(m ** 3)) for m in range(5)]
    with pytest.raises(InterpolationError, match="overflow"):
        interpolate_poly(pts, 2)


def test_interpolation_error_is_algebra_error():
    assert issubclass(InterpolationError, AlgebraError)


@given(param_elems(), param_elems(), param_elems())
def test_ring_laws(x, y, z):
    assert (x + y) + z == x + (y + z)
    assert x * y == y * x
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert x - x == 0


@given(nonzero_param_elems(), param_elems(), nonzero_param_elems())
def test_field_laws(x, y, z):
    assert x * x.inverse() == 1
    assert (y / x) * x == y
    assert (y / x) / z == y / (x * z)
    assert y / x + z / x == (y + z) / x


@settings(max_examples=1000)
@given(param_elems(), nonzero_param_elems())
def test_canonical_form_idempotent(x, y):
    e = x / y
    again = ParamElem(e.num, e.den)
    assert again == e
    assert again.num == e.num and again.den == e.den


@given(param_elems(("a", "b", "d")), st.sets(st.sampled_from(["a", "b", "d"])))
def test_strip_preserves_vanishing(e, nz):
    assert bool(strip_nonvanishing(e, NonzeroSet(nz))) == bool(e)


@given(st.lists(st.builds(mpq, st.integers(-50, 50), st.integers(1, 7)), min_size=1, max_size=9),
       param_elems())
def test_interpolation_reproduces_polynomials(coeffs, scale):
    poly = sum((cf * r ** i for i, cf in enumerate(coeffs)), ParamElem.const(0)) * (scale + 1)
    deg = len(coeffs) - 1
    pts = [(m, poly.subs({"r": ParamElem.const(m)})) for m in range(-2, deg + 2 + 3)]
    assert interpolate_poly(pts, deg + 1) == poly
