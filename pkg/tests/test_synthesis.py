"""Synthesis tests: constructions, per-layer structure, and roundtrips.

The tower constructions are pinned down by the linear relations they must
impose on degree-one representatives and degree-zero classes; those
relations are checked here literally, as functionals vanishing on the
computed lattices and as class equalities.
"""

import pytest

from graphck.abelian import parse_group_expr
from graphck.graphs import FiniteGraph, check_condition_a, is_cycle, is_irreducible
from graphck.ktheory import chain_ktheory_report, ktheory
from graphck.synthesis import (
    SynthesisRequest,
    SynthesisResult,
    build_case_i,
    build_case_ii,
    build_case_iii,
    synthesize,
)


def functional_vanishes(kt, coeffs_by_vertex):
    """Does sum coeff(v) * x(v) vanish on every degree-one representative?"""
    order = {v: i for i, v in enumerate(kt.vertex_order)}
    for j in range(kt.k1_lattice.cols):
        col = kt.k1_lattice.col(j)
        total = sum(c * col[order[v]] for v, c in coeffs_by_vertex.items())
        if total != 0:
            return False
    return True


# ---------------------------------------------------------------------------
# Case i
# ---------------------------------------------------------------------------


def test_case_i_smallest_incidence():
    g = build_case_i(1, ())
    assert g.incidence_matrix() == [[2, 1], [1, 2]]


def test_case_i_parallel_bundles_give_torsion():
    g = build_case_i(0, (2,))
    # z has its loop plus a double edge onto w1
    assert sum(1 for _, o, t in g.edges if (o, t) == ("z", "w1")) == 2
    kt = ktheory(g)
    assert kt.k0.canonical_pair() == (0, (2,))
    assert kt.k1.is_trivial


def test_case_i_rejects_trivial_pair_and_bad_orders():
    with pytest.raises(ValueError):
        build_case_i(0, ())
    with pytest.raises(ValueError):
        build_case_i(1, (1,))


# ---------------------------------------------------------------------------
# Case ii towers
# ---------------------------------------------------------------------------


def test_case_ii_degree_one_relations():
    l, p = 3, 1
    chain = build_case_ii(l, p, (2,), 5)
    for n in range(len(chain)):
        layer = chain.layer_graph(n)
        full = ktheory(FiniteGraph(layer.vertices, layer.edges, ()))
        k = 1  # torsion length
        # sum of x(v_i) plus x(w_k) vanishes
        coeffs = {f"v{i}": 1 for i in range(1, l + 1)}
        coeffs["w1"] = 1
        assert functional_vanishes(full, coeffs)
        # x(z) vanishes
        assert functional_vanishes(full, {"z": 1})
        # x(a_i_1) vanishes; deeper tower levels too
        for i in range(1, p + 2):
            for j in range(1, n + 2):
                assert functional_vanishes(full, {f"a_{i}_{j}": 1})
        # x(u) equals the sum over the feeding vertices
        coeffs = {f"v{i}": 1 for i in range(1, p + 2)}
        coeffs["u"] = -1
        assert functional_vanishes(full, coeffs)
        # x(b_i_j) = -x(u)
        for i in range(1, p + 2):
            assert functional_vanishes(full, {f"b_{i}_{n + 1}": 1, "u": 1})


def test_case_ii_layer_groups_and_kills():
    l, p = 3, 1
    chain = build_case_ii(l, p, (), 6)
    rep = chain_ktheory_report(chain, window=2)
    for n, kt in enumerate(rep.layer_results):
        assert kt.k1.canonical_pair() == (l - 1, ())
        assert kt.k0.canonical_pair() == (l, ())
        # degree-zero classes stated to vanish: u, v_1..v_{p+1}, low tower levels
        zero = kt.k0.zero_coords()
        assert kt.k0_class_of_vertex["u"] == zero
        for i in range(1, p + 2):
            assert kt.k0_class_of_vertex[f"v{i}"] == zero
            for j in range(1, n + 1):
                assert kt.k0_class_of_vertex[f"a_{i}_{j}"] == zero
            # the top tower class is a free generator, and b mirrors -a
            top = kt.k0_class_of_vertex[f"a_{i}_{n + 1}"]
            assert top != zero
            assert kt.k0_class_of_vertex[f"b_{i}_{n + 1}"] == kt.k0.scale_coords(-1, top)
    for hom in rep.k0_homs:
        assert hom.kernel_rank() == p + 1
    for hom in rep.k1_homs:
        assert hom.is_isomorphism()


@pytest.mark.parametrize(
    "l,p,torsion,expected0,expected1",
    [
        (2, 1, (), "0", "Z"),
        (3, 1, (2,), "Z + Z/2", "Z^2"),
        (4, 2, (3,), "Z + Z/3", "Z^3"),
    ],
)
def test_case_ii_colimits(l, p, torsion, expected0, expected1):
    chain = build_case_ii(l, p, torsion, 6)
    rep = chain_ktheory_report(chain, window=2)
    assert rep.stabilized
    assert rep.k0.canonical_pair() == parse_group_expr(expected0).canonical_pair()
    assert rep.k1.canonical_pair() == parse_group_expr(expected1).canonical_pair()


# ---------------------------------------------------------------------------
# Case iii towers
# ---------------------------------------------------------------------------


def test_case_iii_degree_one_relations():
    l, p = 2, 1
    chain = build_case_iii(l, p, (), 5)
    for n in range(len(chain)):
        layer = chain.layer_graph(n)
        full = ktheory(FiniteGraph(layer.vertices, layer.edges, ()))
        for i in range(1, p + 1):
            # x(a_i_j) + x(b_i_j) = 0 at every level
            for j in range(1, n + 3):
                assert functional_vanishes(full, {f"a_{i}_{j}": 1, f"b_{i}_{j}": 1})
            # x(u_i) = x(v_i)
            assert functional_vanishes(full, {f"u{i}": 1, f"v{i}": -1})
            # x(b_i_j) = x(u_i), including the top level's shorter in-star
            for j in range(1, n + 3):
                assert functional_vanishes(full, {f"b_{i}_{j}": 1, f"u{i}": -1})


def test_case_iii_layer_groups_are_stable():
    l, p = 2, 1
    chain = build_case_iii(l, p, (3,), 6)
    rep = chain_ktheory_report(chain, window=2)
    base_kt = ktheory(build_case_i(l, (3,)))
    for n, kt in enumerate(rep.layer_results):
        assert kt.k1.canonical_pair() == (l - p, ())
        assert kt.k0.canonical_pair() == base_kt.k0.canonical_pair()
        zero = kt.k0.zero_coords()
        for i in range(1, p + 1):
            assert kt.k0_class_of_vertex[f"u{i}"] == zero
            for j in range(1, n + 3):
                assert kt.k0_class_of_vertex[f"b_{i}_{j}"] == zero
            # a_i_1 carries minus the class of its feeding vertex
            assert kt.k0_class_of_vertex[f"a_{i}_1"] == kt.k0.scale_coords(
                -1, kt.k0_class_of_vertex[f"v{i}"]
            )
            for j in range(2, n + 3):
                assert kt.k0_class_of_vertex[f"a_{i}_{j}"] == zero
    for hom in rep.k0_homs:
        assert hom.is_isomorphism()
    for hom in rep.k1_homs:
        assert hom.is_isomorphism()


@pytest.mark.parametrize(
    "l,p,torsion,expected0,expected1",
    [
        (1, 1, (), "Z", "0"),
        (2, 1, (3,), "Z^2 + Z/3", "Z"),
        (3, 2, (2, 4), "Z^3 + Z/2 + Z/4", "Z"),
    ],
)
def test_case_iii_colimits(l, p, torsion, expected0, expected1):
    chain = build_case_iii(l, p, torsion, 6)
    rep = chain_ktheory_report(chain, window=2)
    assert rep.stabilized
    assert rep.k0.canonical_pair() == parse_group_expr(expected0).canonical_pair()
    assert rep.k1.canonical_pair() == parse_group_expr(expected1).canonical_pair()


def test_emitted_layers_pass_conditions():
    for chain in (build_case_ii(2, 1, (), 5), build_case_iii(3, 2, (2,), 5)):
        assert check_condition_a(chain).passed
        for n in range(len(chain)):
            g = chain.layer_graph(n, relation_exempt=())
            assert is_irreducible(g) and not is_cycle(g)


# ---------------------------------------------------------------------------
# Synthesis dispatch
# ---------------------------------------------------------------------------


def run(expr0, expr1, depth=6) -> SynthesisResult:
    return synthesize(SynthesisRequest(parse_group_expr(expr0), parse_group_expr(expr1), depth))


def test_synthesize_equal_ranks():
    res = run("Z^2", "Z^2")
    assert res.case_tag == "i"
    assert res.parameters["l"] == 2
    assert res.verification.passed


def test_synthesize_p_infinity():
    res = run("0", "Z")
    assert res.case_tag == "ii"
    assert (res.parameters["l"], res.parameters["p"]) == (2, 1)
    assert res.verification.passed
    assert res.verification.stabilized
    b2 = res.verification.condition_b2
    assert b2.passed and not b2.unchecked


def test_synthesize_torsion_heavy():
    res = run("Z + Z/2 + Z/4", "0")
    assert res.case_tag == "iii"
    assert (res.parameters["l"], res.parameters["p"]) == (1, 1)
    assert res.parameters["torsion"] == [2, 4]
    assert res.verification.passed


def test_synthesize_rejects_torsion_in_degree_one():
    with pytest.raises(ValueError):
        SynthesisRequest(parse_group_expr("Z"), parse_group_expr("Z/2"))


def test_synthesize_rejects_trivial_pair():
    with pytest.raises(ValueError):
        run("0", "0")


def test_synthesize_b2_witnesses_match_towers():
    res = run("0", "Z^2", depth=4)  # case ii with l = 3, p = 2
    b2 = res.verification.condition_b2
    assert b2.passed and not b2.unchecked
    # every deep tower vertex found a first-layer twin of the same kind
    for u, v in b2.matches.items():
        assert u[0] == v[0]  # a-vertices match a-vertices, b match b


@pytest.mark.parametrize(
    "expr0,expr1",
    [("Z/2", "0"), ("Z^2 + Z/9", "Z^2"), ("Z/3", "Z"), ("Z^2", "Z"), ("0", "Z^3")],
)
def test_synthesize_mini_grid(expr0, expr1):
    res = run(expr0, expr1, depth=4)
    assert res.verification.passed, res.verification.messages
    assert res.verification.k0.canonical_pair() == parse_group_expr(expr0).canonical_pair()
    assert res.verification.k1.canonical_pair() == parse_group_expr(expr1).canonical_pair()
