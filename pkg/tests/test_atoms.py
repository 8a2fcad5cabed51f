import math

import pytest
from hypothesis import given, settings, strategies as st

from qcw.atoms import (
    AtomCombination,
    AtomProxy,
    K0Expression,
    K0SyntaxError,
    atom_of,
    atom_sum,
    atom_tensor,
    hom_check,
    phi,
)
from qcw.catalog import UnknownModel
from qcw.spectral import matching_distance

P1_AT_1 = AtomProxy.of([(2, 1), (-2, 1)])


def close(a: AtomProxy, b: AtomProxy, tol=1e-10):
    return a.rank == b.rank and matching_distance(a.expanded(), b.expanded()) <= tol


def test_atom_of_p1(qm_p1):
    a = atom_of(qm_p1, {"q": 1})
    assert close(a, P1_AT_1)
    assert a.provenance[0] == "p1"


def test_atom_of_point(qm_point):
    assert close(atom_of(qm_point, {}), AtomProxy.of([(0, 1)]))


def test_atom_of_p1xp1(qm_p1xp1):
    a = atom_of(qm_p1xp1, {"q1": 1, "q2": 1, "tp": 0})
    assert close(a, AtomProxy.of([(4, 1), (0, 2), (-4, 1)]))
    assert [m for _, m in a.items] == [1, 2, 1]


def test_tensor_examples():
    assert close(atom_tensor(P1_AT_1, P1_AT_1), AtomProxy.of([(4, 1), (0, 2), (-4, 1)]))
    unit = AtomProxy.of([(0, 1)])
    assert atom_tensor(P1_AT_1, unit) == P1_AT_1
    assert atom_tensor(AtomProxy.of([(0, 2)]), AtomProxy.of([(0, 3)])).items == ((0, 6),)


def test_sum_examples(qm_p1, qm_point):
    assert atom_sum(AtomProxy.of([(2, 1)]), AtomProxy.of([(2, 1)])).items == ((2, 2),)
    assert atom_sum(P1_AT_1, AtomProxy(())) == P1_AT_1
    s = atom_sum(atom_of(qm_p1, {"q": 1}), atom_of(qm_point, {}))
    assert close(s, AtomProxy.of([(2, 1), (0, 1), (-2, 1)]))


atoms = st.lists(
    st.tuples(st.integers(-5, 5).map(complex), st.integers(1, 3)), min_size=1, max_size=4
).map(AtomProxy.of)


@settings(max_examples=50, deadline=None)
@given(atoms, atoms, atoms)
def test_tensor_laws(a, b, c):
    assert atom_tensor(a, b) == atom_tensor(b, a)
    assert atom_tensor(atom_tensor(a, b), c) == atom_tensor(a, atom_tensor(b, c))
    assert atom_tensor(a, b).rank == a.rank * b.rank
    assert atom_sum(a, b).rank == a.rank + b.rank


def test_k0_parse_normal_form():
    e = K0Expression.parse("[P1]*[P1] - [P1xP1] + 2*[pt]")
    assert e.terms == ((("p1", "p1"), 1), (("p1xp1",), -1), (("point",), 2))
    assert str(e) == "[p1]*[p1] - [p1xp1] + 2*[point]"
    assert K0Expression.parse(str(e)) == e
    assert K0Expression.parse("[P1] - [p1]").is_zero()
    assert K0Expression.parse("") == K0Expression()
    assert K0Expression.parse("3*([a] + [b])*[c] - 2*[c]*[b]") == K0Expression.parse("3*[a]*[c] + [b]*[c]")


@pytest.mark.parametrize("bad", ["[P1", "[P1] +", "2 + [P1]", "[1x]", "[P1] $ [pt]", "3"])
def test_k0_syntax_errors(bad):
    with pytest.raises(K0SyntaxError):
        K0Expression.parse(bad)


def test_k0_ring_laws():
    a, b, c = (K0Expression.parse(t) for t in ("[p1] + [point]", "2*[p1]", "[p1xp1] - [point]"))
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a - a == K0Expression()


def test_phi_additivity(catalog):
    pts = {"p1": {"q": 0.3}, "p1xp1": {}}
    one = phi(K0Expression.parse("[P1]"), pts, catalog)
    assert phi(K0Expression.parse("[P1] + [P1]"), pts, catalog) == one.scale(2)
    a, b = K0Expression.parse("[P1] + 2*[pt]"), K0Expression.parse("[pt] - [P1]")
    assert phi(a + b, pts, catalog) == phi(a, pts, catalog) + phi(b, pts, catalog)
    assert phi(K0Expression(), pts, catalog) == AtomCombination()


def test_phi_product_vs_tensor(catalog):
    for eps in (1e-2, 1e-4):
        pts = {"p1": {"q": eps}}
        prod = phi(K0Expression.parse("[P1]*[P1]"), pts, catalog, mixed={"tp": 0})
        one = phi(K0Expression.parse("[P1]"), pts, catalog)
        assert prod.distance(one.tensor(one)) <= 1e-10


def test_phi_relation_cancels(catalog):
    # [P1]*[P1] and [P1xP1] name the same catalog product
    out = phi(K0Expression.parse("[P1]*[P1] - [P1xP1]"), {"p1": {"q": 1}, "p1xp1": {"q1": 1, "q2": 1}}, catalog)
    assert out.is_zero()


def test_phi_unknown(catalog):
    with pytest.raises(UnknownModel):
        phi(K0Expression.parse("[nothing]"), {}, catalog)


def test_hom_check_p1_p1(catalog):
    r = hom_check(catalog, "p1", "p1", (1, 1), {"tp": 1}, [1e-2 * 0.5 ** k for k in range(20)])
    assert r.decreasing and r.final <= 1e-8
    assert r.skipped and r.skipped[0][1].startswith("SKIPPED")


def test_hom_check_point_trivial(catalog):
    r = hom_check(catalog, "point", "p1", (1,), {}, [1e-2, 1e-4, 1e-6])
    assert all(d <= 1e-12 for _, d, _ in r.rows)
    assert r.decreasing


def test_atom_combination_distance():
    a = AtomCombination([(1, P1_AT_1)])
    assert a.distance(a) == 0
    assert (a - a).is_zero()
    assert math.isclose(a.distance(AtomCombination([(1, AtomProxy.of([(2.5, 1), (-2, 1)]))])), 0.5)
