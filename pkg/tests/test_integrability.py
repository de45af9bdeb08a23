import pytest
from gmpy2 import mpq

from jetsym.algebra import NonzeroSet, ParamElem
from jetsym.integrability import (
    DEFAULT_HELD_OUT, DEFAULT_SAMPLES, UnknownRegistry, integer_roots, recursion_test, replay,
    resolve_obstruction, symplectic_test,
)
from jetsym.io.report import analysis_document, dumps
from jetsym.jet import DiffPoly, EvolutionEquation, aux_key

from conftest import load

a, b, d, r = (ParamElem.symbol(s) for s in "abdr")
NZ = NonzeroSet({"a", "b", "d"})


@pytest.fixture(scope="module")
def krri():
    return load("krri")


@pytest.fixture(scope="module")
def krri_recursion(krri):
    return recursion_test(krri, 10)


def _registry(name="gt"):
    reg = UnknownRegistry(load("kdv"))
    g = reg.new(name, "test")
    return reg, g


def test_resolve_vanishes():
    reg, _ = _registry()
    assert resolve_obstruction(DiffPoly(), reg, NZ).resolution == "vanishes"


def test_resolve_forces_jet():
    reg, g = _registry()
    g1 = DiffPoly.aux("gt", 1)
    obs = resolve_obstruction(g1.scale(a / b) * DiffPoly.u(1), reg, NZ, "5")
    assert obs.resolution == "forces-jet-zero"
    assert obs.forced[0].action == "constant"
    assert obs.essential_factor == g1
    assert reg.functions["gt"].status == "constant"


def test_resolve_forces_unknown():
    reg, g = _registry()
    obs = resolve_obstruction(g.scale(a ** 3 / b), reg, NZ)
    assert obs.resolution == "forces-unknown-zero"
    assert obs.essential[0]["factor"] == 1
    assert reg.apply(g * DiffPoly.u(0)) == DiffPoly()


def test_resolve_higher_jet_makes_polynomial():
    reg, g = _registry()
    obs = resolve_obstruction(DiffPoly.aux("gt", 2), reg, NZ)
    assert obs.forced[0].action == "polynomial"
    assert len(obs.forced[0].replacement) == 2


def test_resolve_inconclusive():
    reg, g = _registry()
    reg.new("kt", "test")
    obs = resolve_obstruction(g + DiffPoly.aux("kt", 0), reg, NZ)
    assert obs.resolution == "inconclusive"
    assert obs.residual


def test_resolve_records_assumption():
    reg, g = _registry()
    obs = resolve_obstruction(g.scale(a + b), reg, NZ)
    assert obs.assumptions == [a + b]


def test_integer_roots():
    assert integer_roots(157 * r + 837) == []
    assert integer_roots((r - 2) * (r + 3)) == [-3, 2]
    assert integer_roots(a * r) is None


def test_recursion_krri_chain(krri_recursion):
    rep = krri_recursion
    assert rep.verdict == "nonexistence"
    assert rep.nonexistence_rank == 10
    lead = rep.leading_condition
    assert lead["degree"] == 5
    assert lead["kappa"] == mpq(19, 72) * b * b
    assert [o.step for o in rep.nontrivial()] == ["5", "7"]
    o5, o7 = rep.obstruction("5"), rep.obstruction("7")
    assert o5.resolution == "forces-jet-zero"
    assert o5.essential_factor == DiffPoly.aux("f", 1)
    assert o5.forced[0].action == "constant"
    assert o7.resolution == "forces-unknown-zero"
    assert o7.essential_factor == DiffPoly.aux("f", 0)
    assert o7.mixed_u2_u1 == DiffPoly.aux("f", 0).scale(mpq(-76302, 6859) * a ** 3 / b ** 3)
    assert [e.action for e in rep.log] == ["constant", "zero"]


def test_recursion_truncation_floor(krri_recursion):
    # floor = deg L + n - rank
    assert krri_recursion.bound == 1 + 5 - 10


def test_replay_is_byte_identical(krri, krri_recursion):
    again = replay(krri_recursion, krri)
    assert dumps(analysis_document(again, krri)) == dumps(analysis_document(krri_recursion, krri))


def test_kdv_recursion():
    kdv = load("kdv")
    rep = recursion_test(kdv, 10)
    assert rep.verdict == "exists-to-depth"
    assert not any(o.resolution == "forces-unknown-zero" for o in rep.obstructions)
    rep = recursion_test(kdv, 10, leading_constant=True)
    assert rep.verdict == "exists-to-depth"
    assert not rep.nontrivial()
    assert rep.definition_check


def test_linear_recursion_trivial():
    rep = recursion_test(load("linear3"), 10, leading_constant=True)
    assert rep.verdict == "exists-to-depth"
    assert not rep.nontrivial()
    assert rep.definition_check


def test_symplectic_generic_depth(krri):
    rep = symplectic_test(krri, 10)
    assert rep.verdict == "nonexistence"
    assert rep.nonexistence_rank == 6
    assert rep.leading_condition["kappa"] == mpq(19, 72) * b * b
    o4 = rep.obstruction("4")
    assert [o.step for o in rep.nontrivial()] == ["4"]
    f0, h1 = DiffPoly.aux("f0", 0), DiffPoly.aux("h", 1)
    ratio = o4.raw.coefficient(tuple(sorted((aux_key("f0", 0), aux_key("h", 1)))))
    assert o4.raw == (f0 * h1).scale(ratio)
    # a*d*h'*f0 up to a rational multiple of a power of b
    assert (ratio / (a * d) * b * b).is_constant()


def test_symplectic_constant_depth_symbolic(krri):
    rep = symplectic_test(krri, 10, "symbolic", "constant_h", mode="both")
    assert rep.interpolation["agrees_with_native"]
    assert rep.interpolation["samples"] == DEFAULT_SAMPLES
    assert rep.interpolation["held_out"] == DEFAULT_HELD_OUT
    assert [o.step for o in rep.nontrivial()] == ["6", "8"]
    o6, o8 = rep.obstruction("6"), rep.obstruction("8")
    f0 = DiffPoly.aux("f0", 0)
    assert o6.essential_factor == DiffPoly.aux("f0", 1)
    assert (o6.coefficient_form() == DiffPoly.aux("f0", 1).scale(mpq(30, 19) * a / b))
    want = f0.scale(mpq(27, 1444) / b * a ** 3 * (157 * r + 837))
    assert o8.coefficient_form(o8.mixed_u2_u1) == want
    assert rep.verdict == "nonexistence"
    assert rep.nonexistence_rank <= 11


def test_symplectic_interpolation_matches_integer_runs(krri):
    rep = symplectic_test(krri, 10, "symbolic", "constant_h", mode="interpolate")
    o8 = rep.obstruction("8")
    for m in DEFAULT_HELD_OUT:
        direct = symplectic_test(krri, 10, m, "constant_h").obstruction("8")
        assert o8.mixed_u2_u1.subs_params({"r": ParamElem.const(m)}) == direct.mixed_u2_u1


def test_linear3_symplectic_identity():
    rep = symplectic_test(load("linear3"), 10)
    assert rep.verdict == "exists-to-depth"
    assert not rep.nontrivial()
    assert rep.definition_check


def test_nonzero_monotonicity(krri):
    more = krri.replace(nonzero=NonzeroSet(set(krri.nonzero) | {"a"}))
    assert recursion_test(more, 10).verdict == "nonexistence"


def test_replay_symplectic(krri):
    rep = symplectic_test(krri, 10)
    again = replay(rep, krri)
    assert dumps(analysis_document(again, krri)) == dumps(analysis_document(rep, krri))
