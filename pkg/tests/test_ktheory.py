"""K-theory engine tests: single graphs, the exact sequence, and chains."""

import random

import pytest

from graphck.abelian import ColumnLattice, IntMatrix
from graphck.graphs import FiniteGraph, GraphChain
from graphck.ktheory import (
    boundary_map,
    chain_ktheory,
    chain_ktheory_report,
    ideal_class_image,
    ideal_class_map,
    inclusion_k0,
    inclusion_k1,
    ktheory,
    les_check,
    relation_matrix,
)
from graphck.synthesis import build_case_i, build_case_ii, build_case_iii


def loops(n):
    return FiniteGraph({"v"}, [(f"l{i}", "v", "v") for i in range(n)])


# ---------------------------------------------------------------------------
# Single graphs
# ---------------------------------------------------------------------------


def test_two_loops_trivial_k_theory():
    # relation row is (1 - 2) = (-1); its cokernel and kernel both vanish
    kt = ktheory(loops(2))
    assert relation_matrix(loops(2)).to_lists() == [[-1]]
    assert kt.k0.is_trivial and kt.k1.is_trivial


def test_one_loop_circle_algebra():
    kt = ktheory(loops(1))
    assert kt.k0.canonical_pair() == (1, ())
    assert kt.k1.canonical_pair() == (1, ())


@pytest.mark.parametrize(
    "l,torsion",
    [(1, ()), (2, ()), (3, ()), (0, (2,)), (1, (3,)), (2, (2, 4)), (3, (2, 9)), (2, (3, 3))],
)
def test_case_i_k_theory(l, torsion):
    g = build_case_i(l, torsion)
    kt = ktheory(g)
    from graphck.abelian import smith_normal_form

    expected_torsion = ()
    if torsion:
        expected_torsion = tuple(
            x for x in smith_normal_form(IntMatrix.diagonal(list(torsion))).diagonal if x >= 2
        )
    assert kt.k0.canonical_pair() == (l, expected_torsion)
    assert kt.k1.canonical_pair() == (l, ())


def test_case_i_torsion_generators_have_stated_orders():
    g = build_case_i(2, (2, 4))
    kt = ktheory(g)
    assert kt.k0.element_order(kt.k0_class_of_vertex["w1"]) == 2
    assert kt.k0.element_order(kt.k0_class_of_vertex["w2"]) == 4
    # the free part is generated by the v-classes
    assert kt.k0.element_order(kt.k0_class_of_vertex["v1"]) == 0


def test_case_i_k1_basis_vectors():
    # degree-one basis: +1 at v_i, -1 at the last torsion vertex
    g = build_case_i(2, (3,))
    kt = ktheory(g)
    order = {v: i for i, v in enumerate(kt.vertex_order)}
    lattice = kt.k1_column_lattice()
    for i in (1, 2):
        x = [0] * len(kt.vertex_order)
        x[order[f"v{i}"]] = 1
        x[order["w1"]] = -1
        assert lattice.contains(x)
    # with no torsion the roles of the w-vertices fall to z
    g = build_case_i(2, ())
    kt = ktheory(g)
    order = {v: i for i, v in enumerate(kt.vertex_order)}
    lattice = kt.k1_column_lattice()
    for i in (1, 2):
        x = [0] * len(kt.vertex_order)
        x[order[f"v{i}"]] = 1
        x[order["z"]] = -1
        assert lattice.contains(x)


def test_vertex_classes_generate_k0():
    from graphck.abelian import FgAbelianGroup, GroupHom

    rng = random.Random(13)
    for _ in range(30):
        nv = rng.randint(1, 5)
        verts = [f"v{i}" for i in range(nv)]
        edges = [(f"e{k}", rng.choice(verts), rng.choice(verts)) for k in range(rng.randint(0, 10))]
        exempt = {v for v in verts if rng.random() < 0.3}
        kt = ktheory(FiniteGraph(verts, edges, exempt))
        free_cover = FgAbelianGroup.canonical(nv)
        cols = [kt.k0_class_of_vertex[v] for v in kt.vertex_order]
        ents = []
        for i in range(kt.k0.ncoords):
            ents.extend(col[i] for col in cols)
        cover = GroupHom(
            free_cover,
            FgAbelianGroup.canonical(kt.k0.free_rank, kt.k0.invariant_factors),
            IntMatrix(kt.k0.ncoords, nv, ents),
        )
        assert cover.is_surjective()


def test_rank_zero_equals_rank_one_for_full_relations():
    rng = random.Random(9)
    for _ in range(100):
        nv = rng.randint(1, 6)
        verts = [f"v{i}" for i in range(nv)]
        edges = [(f"e{k}", rng.choice(verts), rng.choice(verts)) for k in range(rng.randint(0, 12))]
        kt = ktheory(FiniteGraph(verts, edges))
        assert kt.k0.free_rank == kt.k1.free_rank


# ---------------------------------------------------------------------------
# Boundary map
# ---------------------------------------------------------------------------


def test_boundary_single_loop():
    g = FiniteGraph({"v"}, [("l", "v", "v")], relation_exempt={"v"})
    assert boundary_map(g, (1,)) == (-1,)


def test_boundary_empty_exempt_set():
    g = loops(1)
    assert boundary_map(g, (5,)) == ()


def test_boundary_rejects_non_classes():
    g = FiniteGraph({"u", "v"}, [("e", "u", "v"), ("lu", "u", "u"), ("lv", "v", "v")])
    # x(v) = x(u) + x(v) forces x(u) = 0
    with pytest.raises(ValueError):
        boundary_map(g, (1, 0))


def test_boundary_onto_for_tower_layers():
    chain = build_case_ii(2, 1, (), 5)
    layer = chain.layer_graph(2)
    full = FiniteGraph(layer.vertices, layer.edges, ())
    kt_full = ktheory(full)
    cols = [boundary_map(layer, kt_full.k1_lattice.col(j)) for j in range(kt_full.k1_lattice.cols)]
    exempt = sorted(layer.relation_exempt)
    image = ColumnLattice(
        IntMatrix.from_rows([[c[i] for c in cols] for i in range(len(exempt))], cols=len(cols))
    )
    for i in range(len(exempt)):
        unit = tuple(1 if j == i else 0 for j in range(len(exempt)))
        assert image.contains(unit)


# ---------------------------------------------------------------------------
# Long exact sequence
# ---------------------------------------------------------------------------


def test_les_degenerates_without_exempt_vertices():
    rep = les_check(loops(2))
    assert rep.passed
    assert rep.terms["k1_toeplitz"] == rep.terms["k1_full"]
    assert rep.terms["ideal_k0"] == "0"


def test_les_on_tower_layer():
    chain = build_case_ii(2, 1, (), 5)
    layer = chain.layer_graph(1)
    rep = les_check(layer)
    assert rep.passed
    # the index map is onto, so the Toeplitz and full degree-zero groups agree
    assert rep.terms["k0_toeplitz"] == rep.terms["k0_full"]


def test_les_random_graphs():
    rng = random.Random(31)
    for _ in range(60):
        nv = rng.randint(1, 6)
        verts = [f"v{i}" for i in range(nv)]
        edges = [(f"e{k}", rng.choice(verts), rng.choice(verts)) for k in range(rng.randint(0, 12))]
        exempt = {v for v in verts if rng.random() < 0.35}
        rep = les_check(FiniteGraph(verts, edges, exempt))
        assert rep.passed, (verts, edges, exempt, rep.nodes)


def test_ideal_class_map_basis():
    g = FiniteGraph({"u", "v"}, [("e", "u", "v"), ("lu", "u", "u"), ("lv", "v", "v")], {"u"})
    icm = ideal_class_map(g)
    assert icm.basis == ("u",)
    kt = ktheory(g)
    # [u] - [u] - [v] = -[v] in the Toeplitz group
    expected = kt.k0.scale_coords(-1, kt.k0_class_of_vertex["v"])
    assert icm.images[0] == expected


# ---------------------------------------------------------------------------
# Inclusions
# ---------------------------------------------------------------------------


def test_inclusion_k1_zero_and_identity():
    chain = build_case_ii(2, 1, (), 5)
    f, g = chain.layer_graph(0), chain.layer_graph(1)
    zero = (0,) * len(f.vertex_list)
    assert set(inclusion_k1(f, g, zero)) == {0}
    kt = ktheory(f)
    col = kt.k1_lattice.col(0)
    assert inclusion_k1(f, f, col) == col


def test_inclusion_k1_towers_give_isomorphism():
    chain = build_case_ii(3, 1, (), 5)
    rep = chain_ktheory_report(chain, window=2)
    for hom in rep.k1_homs:
        assert hom.is_isomorphism()


def test_inclusion_k1_detects_escaping_edges():
    f = FiniteGraph({"v"}, [("l", "v", "v")])
    g = FiniteGraph(
        {"v", "w"},
        [("l", "v", "v"), ("e", "v", "w"), ("wl", "w", "w"), ("back", "w", "v")],
    )
    with pytest.raises(ValueError):
        inclusion_k1(f, g, (1,))


def test_inclusion_k0_identity():
    g = loops(1)
    hom = inclusion_k0(g, g)
    assert hom.is_isomorphism()


def test_inclusion_k0_kills_tower_tops():
    chain = build_case_ii(3, 1, (), 6)
    rep = chain_ktheory_report(chain, window=2)
    kts = rep.layer_results
    for n, hom in enumerate(rep.k0_homs):
        assert hom.kernel_rank() == 2  # p + 1
        # the killed generators are the topmost tower classes
        kt_next = kts[n + 1]
        for i in (1, 2):
            v = f"a_{i}_{n + 2}"
            if v in kt_next.k0_class_of_vertex:
                assert kt_next.k0_class_of_vertex[f"a_{i}_{n + 1}"] == kt_next.k0.zero_coords()


def test_inclusion_k0_isomorphisms_in_stable_towers():
    chain = build_case_iii(2, 1, (3,), 6)
    rep = chain_ktheory_report(chain, window=2)
    graphs = [chain.layer_graph(n) for n in range(len(chain))]
    for n, hom in enumerate(rep.k0_homs):
        assert hom.is_isomorphism()


def test_inclusion_k0_rejects_row_mismatch():
    f = FiniteGraph({"v"}, [("l", "v", "v")])
    g = FiniteGraph(
        {"v", "w"},
        [("l", "v", "v"), ("e", "v", "w"), ("wl", "w", "w"), ("back", "w", "v")],
    )
    with pytest.raises(ValueError):
        inclusion_k0(f, g)


# ---------------------------------------------------------------------------
# Ideal class images along inclusions
# ---------------------------------------------------------------------------


def test_ideal_class_image_no_new_edges():
    g = FiniteGraph({"u", "v"}, [("e", "u", "v"), ("lu", "u", "u"), ("lv", "v", "v")], {"u"})
    coords, mode = ideal_class_image(g, g, "u")
    assert mode == "verified"
    assert coords == ideal_class_map(g).images[0]


def test_ideal_class_image_across_tower_layers():
    chain = build_case_ii(2, 1, (), 5)
    f, g = chain.layer_graph(1), chain.layer_graph(2)
    ktf, ktg = ktheory(f), ktheory(g)
    coords, mode = ideal_class_image(f, g, "u", ktf, ktg)
    assert mode == "verified"
    # independent evaluation of the correction formula
    verts = ktg.vertex_order
    vidx = {v: i for i, v in enumerate(verts)}
    vec = [0] * len(verts)
    vec[vidx["u"]] += 1
    small_edges = set(f.edges)
    for e in g.out_edges("u"):
        vec[vidx[e[2]]] -= 1
        if e not in small_edges:
            vec[vidx[e[2]]] += 1
    assert coords == ktg.k0.coords_of(vec)


def test_ideal_class_image_unverified_when_vertex_loses_exemption():
    f = FiniteGraph({"v"}, [("l", "v", "v")], {"v"})
    g = FiniteGraph({"v"}, [("l", "v", "v")], ())
    coords, mode = ideal_class_image(f, g, "v")
    assert mode.startswith("unverified")


def test_ideal_class_image_requires_exempt_vertex():
    g = loops(1)
    with pytest.raises(ValueError):
        ideal_class_image(g, g, "v")


# ---------------------------------------------------------------------------
# Chains
# ---------------------------------------------------------------------------


def test_constant_chain_returns_finite_k_theory():
    g = build_case_i(2, (3,))
    verts = sorted(g.vertices)
    chain = GraphChain(set(), [verts] * 4, g.edges)
    k0, k1, stable = chain_ktheory(chain, window=2)
    assert stable
    kt = ktheory(g)
    assert k0.canonical_pair() == kt.k0.canonical_pair()
    assert k1.canonical_pair() == kt.k1.canonical_pair()


def test_p_infinity_chain():
    chain = build_case_ii(2, 1, (), 6)
    k0, k1, stable = chain_ktheory(chain, window=2)
    assert stable
    assert k0.is_trivial
    assert k1.canonical_pair() == (1, ())


def test_case_iii_chain_with_torsion():
    chain = build_case_iii(2, 1, (3,), 6)
    k0, k1, stable = chain_ktheory(chain, window=2)
    assert stable
    assert k0.canonical_pair() == (2, (3,))
    assert k1.canonical_pair() == (1, ())


def test_chain_result_stable_under_window_doubling():
    chain = build_case_ii(3, 2, (2,), 8)
    k0a, k1a, sa = chain_ktheory(chain, window=2)
    k0b, k1b, sb = chain_ktheory(chain, window=4)
    assert sa and sb
    assert k0a.canonical_pair() == k0b.canonical_pair()
    assert k1a.canonical_pair() == k1b.canonical_pair()


def test_chain_gate_on_conditions():
    from graphck.ktheory import ChainConditionError

    bad = GraphChain(
        {"u"},
        [["v"], ["u", "v"]],
        [("lv1", "v", "v"), ("lv2", "v", "v"), ("g", "u", "v"), ("h", "v", "u")],
    )
    with pytest.raises(ChainConditionError):
        chain_ktheory(bad, window=2)


def test_chain_force_overrides_condition_gate():
    # a chain with an (a1) violation still computes when forced, and says so
    bad = GraphChain(
        {"u"},
        [["v"], ["u", "v"]],
        [("lv1", "v", "v"), ("lv2", "v", "v"), ("g", "u", "v"), ("h", "v", "u")],
    )
    padded = GraphChain(
        {"u"},
        [["v"], ["u", "v"], ["u", "v"], ["u", "v"]],
        [("lv1", "v", "v"), ("lv2", "v", "v"), ("g", "u", "v"), ("h", "v", "u")],
    )
    rep = chain_ktheory_report(padded, window=1, force=True)
    assert rep.forced
    assert not rep.condition_a.passed


def test_chain_class_map_matches_expected_kills():
    chain = build_case_ii(2, 1, (), 6)
    rep = chain_ktheory_report(chain, window=2)
    # every class dies in the colimit: the group itself is trivial
    assert rep.k0.is_trivial
    assert all(c == () for c in rep.k0_class_map.values())


def test_s_sets_on_synthesized_chains():
    from graphck.graphs import toeplitz_s_set

    for chain in (build_case_ii(2, 1, (), 5), build_case_iii(2, 2, (2,), 5)):
        d = chain.infinite_vertices
        prev = frozenset()
        for n in range(len(chain)):
            s = toeplitz_s_set(chain, n)
            assert s == chain.layers[n] - d
            assert prev <= s  # monotone along the chain
            prev = s


def test_boundary_onto_for_separated_towers():
    # one exempt vertex per tower: the index map surjects onto Z^p
    chain = build_case_iii(2, 2, (), 5)
    layer = chain.layer_graph(1)
    full = FiniteGraph(layer.vertices, layer.edges, ())
    kt_full = ktheory(full)
    exempt = sorted(layer.relation_exempt)
    assert len(exempt) == 2
    cols = [boundary_map(layer, kt_full.k1_lattice.col(j)) for j in range(kt_full.k1_lattice.cols)]
    image = ColumnLattice(
        IntMatrix.from_rows([[c[i] for c in cols] for i in range(len(exempt))], cols=len(cols))
    )
    for i in range(len(exempt)):
        assert image.contains(tuple(1 if j == i else 0 for j in range(len(exempt))))


def test_ideal_class_commuting_square_along_chains():
    for chain in (build_case_ii(3, 1, (2,), 5), build_case_iii(2, 1, (), 5)):
        kts = [ktheory(chain.layer_graph(n)) for n in range(len(chain))]
        for n in range(len(chain) - 1):
            f, g = chain.layer_graph(n), chain.layer_graph(n + 1)
            for u in sorted(f.relation_exempt):
                _, mode = ideal_class_image(f, g, u, kts[n], kts[n + 1])
                assert mode == "verified"
