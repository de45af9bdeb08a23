import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from jetsym.algebra import ParamElem
from jetsym.jet import DiffPoly, total_t
from jetsym.pdo import (
    PDOError, PseudoDiffOp, TruncationPolicy, adjoint, apply_as_operator, commutator, compose,
    dt_op, dx_op, frechet,
)

from conftest import CORPUS, diffpolys, load

u0, u1, u2, u3, u4 = (DiffPoly.u(i) for i in range(5))
D = PseudoDiffOp.D
EXACT = TruncationPolicy(None)
ONE = DiffPoly.const(1)


def op(d):
    return PseudoDiffOp({k: v if isinstance(v, DiffPoly) else DiffPoly.const(v) for k, v in d.items()})


def test_product_rule():
    assert compose(D(1), PseudoDiffOp.mult(u0), EXACT) == op({1: u0, 0: u1})


def test_square():
    A = D(1, u0)
    assert compose(A, A, EXACT) == op({2: u0 * u0, 1: u0 * u1})


def test_inverse_times_function():
    out = compose(D(-1), PseudoDiffOp.mult(u0), TruncationPolicy(-3))
    assert out == op({-1: u0, -2: -u1, -3: u2})
    assert out.floor == -3
    # left-compose with D recovers u0 down to floor + 1
    back = compose(D(1), out, TruncationPolicy(-2))
    assert back.coeffs == {0: u0}


def test_series_requires_floor():
    with pytest.raises(PDOError):
        compose(D(-1), PseudoDiffOp.mult(u0), EXACT)


def test_adjoint_examples():
    assert adjoint(D(1), EXACT) == op({1: -1})
    assert adjoint(D(2, u0), EXACT) == op({2: u0, 1: 2 * u1, 0: u2})
    assert adjoint(PseudoDiffOp.mult(u0), EXACT) == PseudoDiffOp.mult(u0)


def test_commutator_examples():
    assert commutator(D(1), PseudoDiffOp.mult(u0), EXACT) == PseudoDiffOp.mult(u1)
    assert not commutator(D(3), D(1), EXACT)


def test_commutator_with_d_is_coefficientwise_dx():
    Fs = frechet(load("krri").rhs)
    assert commutator(Fs, D(1), EXACT) == -dx_op(Fs)


def test_frechet_examples():
    assert frechet(u0) == PseudoDiffOp.identity()
    kdv = load("kdv")
    assert frechet(kdv.rhs) == op({3: 1, 1: u0, 0: u1})
    lead = frechet(load("krri").rhs)
    b = ParamElem.symbol("b")
    assert lead.deg == 5
    assert lead.coeff(5) == DiffPoly.const(-mpq(19, 360) * b * b)
    assert not frechet(DiffPoly.x())


def test_apply_as_operator_examples():
    kdv = load("kdv")
    F = kdv.rhs
    assert apply_as_operator(frechet(F), F) == total_t(F, kdv)
    g = u2 * u0 + 3
    assert apply_as_operator(PseudoDiffOp.identity(), g) == g
    assert apply_as_operator(op({3: 1, 1: u0, 0: u1}), u1) == u4 + u0 * u2 + u1 * u1
    with pytest.raises(PDOError):
        apply_as_operator(D(-1), u0)


def test_dt_op_examples():
    kdv = load("kdv")
    assert not dt_op(D(1), kdv)
    assert dt_op(PseudoDiffOp.mult(u0), kdv) == PseudoDiffOp.mult(kdv.rhs)
    assert dt_op(D(1, DiffPoly.t()), kdv) == D(1)


def test_symbolic_composition_matches_integer_degrees():
    A = PseudoDiffOp({0: u0, -1: u1}, None, symbolic=True)
    B = op({2: u0, 0: u2})
    sym = compose(A, B, TruncationPolicy(-3))
    for m in range(-3, 7):
        Am = A.evaluate_degree(m)
        direct = compose(Am, B, TruncationPolicy(m - 3))
        assert sym.evaluate_degree(m) == direct


def test_symbolic_restrictions():
    A = PseudoDiffOp({0: u0}, None, symbolic=True)
    with pytest.raises(PDOError):
        compose(A, A, TruncationPolicy(-2))
    with pytest.raises(PDOError):
        adjoint(A, TruncationPolicy(-2))


def test_str_shows_truncation():
    s = str(compose(D(-1), PseudoDiffOp.mult(u0), TruncationPolicy(-2)))
    assert s.endswith("O(D^-3)")


# -- properties on random truncated operators -----------------------------------------

FLOOR = -6
coeffs = diffpolys(max_u=2, with_h=False, with_xt=False, max_terms=2, max_deg=2)


@st.composite
def operators(draw, lo=-3, hi=2):
    degs = draw(st.lists(st.integers(lo, hi), min_size=1, max_size=3, unique=True))
    return PseudoDiffOp({k: draw(coeffs) for k in degs}, FLOOR)


@st.composite
def diff_operators(draw):
    degs = draw(st.lists(st.integers(0, 3), min_size=1, max_size=3, unique=True))
    return PseudoDiffOp({k: draw(coeffs) for k in degs})


def _agree(X, Y):
    floor = max(X.floor if X.floor is not None else -10**9, Y.floor if Y.floor is not None else -10**9)
    return X.truncate(floor).coeffs == Y.truncate(floor).coeffs


@settings(max_examples=500)
@given(operators(), operators(), operators())
def test_associativity(A, B, C):
    pol = TruncationPolicy(FLOOR)
    assert _agree(compose(compose(A, B, pol), C, pol), compose(A, compose(B, C, pol), pol))


@settings(max_examples=500)
@given(operators())
def test_adjoint_involution(Q):
    pol = TruncationPolicy(FLOOR)
    assert _agree(adjoint(adjoint(Q, pol), pol), Q)


@given(diff_operators())
def test_adjoint_involution_exact(Q):
    assert adjoint(adjoint(Q, EXACT), EXACT) == Q


@settings(max_examples=500)
@given(operators(), operators())
def test_adjoint_anti_homomorphism(A, B):
    pol = TruncationPolicy(FLOOR)
    lhs = adjoint(compose(A, B, pol), pol)
    rhs = compose(adjoint(B, pol), adjoint(A, pol), pol)
    assert _agree(lhs, rhs)


@settings(max_examples=100)
@given(operators(-2, 1), operators(-2, 1), operators(-2, 1))
def test_jacobi(A, B, C):
    pol = TruncationPolicy(FLOOR)
    total = (commutator(A, commutator(B, C, pol), pol) + commutator(B, commutator(C, A, pol), pol)
             + commutator(C, commutator(A, B, pol), pol))
    assert not total.coeffs


@given(operators(), operators())
def test_degree_additive(A, B):
    if A and B:
        prod = compose(A, B, TruncationPolicy(FLOOR))
        lead = A.coeff(A.deg) * B.coeff(B.deg)
        if lead and A.deg + B.deg >= prod.floor:
            assert prod.deg == A.deg + B.deg


@given(diffpolys(max_u=3, with_h=False), diffpolys(max_u=3, with_h=False))
def test_frechet_linear_and_dx(f, g):
    assert frechet(f + g) == frechet(f) + frechet(g)
    assert frechet(f.total_x()) == compose(D(1), frechet(f), EXACT)


@pytest.mark.parametrize("name", CORPUS)
def test_f_is_its_own_symmetry(name):
    eq = load(name)
    assert apply_as_operator(frechet(eq.rhs), eq.rhs) == total_t(eq.rhs, eq)
