import importlib.resources

import pytest
from gmpy2 import mpq
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from jetsym.algebra import ParamElem
from jetsym.io.parser import parse_equation
from jetsym.jet import DiffPoly, X_KEY, T_KEY, register_family, u_key, aux_key

settings.register_profile("jetsym", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("jetsym")

CORPUS = ["burgers", "kdv", "krri", "krri_a0", "krri_b0", "linear3", "mkdv"]

register_family("h", "x")


def load(name: str):
    text = (importlib.resources.files("jetsym") / "corpus" / f"{name}.eq").read_text()
    return parse_equation(text, name=name)


@pytest.fixture(scope="session")
def corpus():
    return {n: load(n) for n in CORPUS}


rationals = st.builds(mpq, st.integers(-9, 9), st.integers(1, 5))
nonzero_rationals = rationals.filter(bool)


@st.composite
def param_elems(draw, symbols=("a", "b"), max_terms=3):
    out = ParamElem.const(0)
    for _ in range(draw(st.integers(0, max_terms))):
        term = ParamElem.const(draw(nonzero_rationals))
        for s in symbols:
            term = term * ParamElem.symbol(s) ** draw(st.integers(0, 2))
        out = out + term
    return out


@st.composite
def nonzero_param_elems(draw, symbols=("a", "b")):
    e = draw(param_elems(symbols))
    return e if e else ParamElem.const(draw(nonzero_rationals))


def _keys(max_u=3, with_h=True, with_xt=True):
    ks = [u_key(i) for i in range(max_u + 1)]
    if with_h:
        ks += [aux_key("h", i) for i in range(3)]
    if with_xt:
        ks += [X_KEY, T_KEY]
    return ks


@st.composite
def diffpolys(draw, max_u=3, with_h=True, with_xt=True, max_terms=4, max_deg=3, params=False):
    keys = _keys(max_u, with_h, with_xt)
    out = DiffPoly()
    for _ in range(draw(st.integers(0, max_terms))):
        mono = draw(st.lists(st.sampled_from(keys), max_size=max_deg))
        coeff = draw(nonzero_param_elems() if params else nonzero_rationals)
        p = DiffPoly.const(coeff)
        for k in mono:
            p = p * DiffPoly.var(k)
        out = out + p
    return out
