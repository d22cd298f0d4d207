"""Exact linear algebra and group arithmetic tests.

Derived expected values carry their oracle inline: hand row reduction for
the small Smith forms, determinants for kernel ranks, exhaustive element
checks for the tiny homomorphism cases.
"""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphck.abelian import (
    ColumnLattice,
    FgAbelianGroup,
    GroupHom,
    IntMatrix,
    colimit_chain,
    cokernel,
    format_group,
    hom_compose,
    hom_is_isomorphism,
    kernel_basis,
    parse_group_expr,
    smith_normal_form,
)


def M(rows):
    return IntMatrix.from_rows(rows)


# ---------------------------------------------------------------------------
# Smith normal form
# ---------------------------------------------------------------------------


def test_snf_zero_matrix():
    s = smith_normal_form(M([[0]]))
    assert s.diagonal == (0,)
    s.verify(M([[0]]))


def test_snf_identity():
    m = IntMatrix.identity(2)
    s = smith_normal_form(m)
    assert s.diagonal == (1, 1)
    s.verify(m)


def test_snf_two_by_two():
    # oracle: d1 = gcd of all entries = 2, d1*d2 = |det| = |16 - 24| = 8
    m = M([[2, 4], [6, 8]])
    s = smith_normal_form(m)
    assert s.diagonal == (2, 4)
    s.verify(m)


def test_snf_empty_shapes():
    for m in (IntMatrix.from_rows([], cols=3), IntMatrix(3, 0, []), IntMatrix(0, 0, [])):
        s = smith_normal_form(m)
        s.verify(m)


@settings(max_examples=150, deadline=None)
@given(
    st.integers(0, 8),
    st.integers(0, 8),
    st.integers(0, 2**32 - 1),
)
def test_snf_random_properties(rows, cols, seed):
    rng = random.Random(seed)
    m = IntMatrix(rows, cols, [rng.randint(-9, 9) for _ in range(rows * cols)])
    s = smith_normal_form(m)
    s.verify(m)  # U M V = D, unimodularity, nonnegative divisibility chain


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_kernel_rank_complements_diagonal_rank(rows, cols, seed):
    rng = random.Random(seed)
    m = IntMatrix(rows, cols, [rng.randint(-9, 9) for _ in range(rows * cols)])
    s = smith_normal_form(m)
    assert kernel_basis(m).cols + s.rank == cols


# ---------------------------------------------------------------------------
# Cokernels and kernels
# ---------------------------------------------------------------------------


def test_cokernel_no_relations():
    g = cokernel(IntMatrix.from_rows([], cols=2))
    assert g.canonical_pair() == (2, ())


def test_cokernel_negative_unit():
    # coker of (-1) over Z is trivial; oracle: its Smith form is (1)
    assert cokernel(M([[-1]])).is_trivial


def test_cokernel_mixed():
    # oracle: Smith form diag(2) on the first coordinate leaves Z + Z/2
    g = cokernel(M([[2, 0]]))
    assert g.canonical_pair() == (1, (2,))


def test_cokernel_class_map():
    g = cokernel(M([[2, 0]]))
    one = g.coords_of((1, 0))
    assert g.add_coords(one, one) == g.zero_coords()
    assert g.coords_of((0, 1)) != g.zero_coords()


def test_cokernel_invariant_under_unimodular_transforms():
    rng = random.Random(11)
    for _ in range(25):
        r, c = rng.randint(1, 5), rng.randint(1, 5)
        m = IntMatrix(r, c, [rng.randint(-9, 9) for _ in range(r * c)])
        u = _random_unimodular(rng, r)
        v = _random_unimodular(rng, c)
        assert cokernel(m).canonical_pair() == cokernel((u @ m) @ v).canonical_pair()


def _random_unimodular(rng, n):
    m = IntMatrix.identity(n).to_lists()
    for _ in range(3 * n):
        i, j = rng.randrange(n), rng.randrange(n)
        if i == j:
            continue
        q = rng.randint(-2, 2)
        for k in range(n):
            m[i][k] += q * m[j][k]
    return IntMatrix.from_rows(m, cols=n)


def test_kernel_injective():
    assert kernel_basis(IntMatrix.identity(2)).cols == 0


def test_kernel_antidiagonal():
    kb = kernel_basis(M([[1, 1]]))
    assert kb.cols == 1
    assert ColumnLattice(kb).contains((1, -1))


def test_kernel_full_rank():
    # oracle: det = 2*8 - 4*6 = -8 != 0, so the kernel is trivial
    assert M([[2, 4], [6, 8]]).determinant() == -8
    assert kernel_basis(M([[2, 4], [6, 8]])).cols == 0


def test_kernel_is_saturated():
    rng = random.Random(5)
    for _ in range(20):
        r, c = rng.randint(1, 5), rng.randint(2, 5)
        m = IntMatrix(r, c, [rng.randint(-4, 4) for _ in range(r * c)])
        kb = kernel_basis(m)
        lat = ColumnLattice(kb)
        # saturation: any integer vector with 2x in the kernel lattice is in it
        for j in range(kb.cols):
            doubled = tuple(2 * x for x in kb.col(j))
            assert lat.contains(doubled)
            assert all(x % 2 == 0 for x in doubled)


# ---------------------------------------------------------------------------
# Homomorphisms
# ---------------------------------------------------------------------------


def test_hom_compose_identity_and_zero():
    g = parse_group_expr("Z + Z/2")
    ident = GroupHom.identity(g)
    assert hom_compose(ident, ident).matrix == ident.matrix
    zero = GroupHom.zero(g, g)
    assert hom_compose(zero, ident).matrix == zero.matrix


def test_hom_compose_multiplication():
    z = FgAbelianGroup.canonical(1)
    x2 = GroupHom(z, z, M([[2]]))
    x3 = GroupHom(z, z, M([[3]]))
    assert hom_compose(x2, x3).matrix == M([[6]])


def test_hom_compose_requires_same_presentation():
    z = FgAbelianGroup.canonical(1)
    z2 = FgAbelianGroup.canonical(2)
    with pytest.raises(ValueError):
        hom_compose(GroupHom.identity(z), GroupHom.identity(z2))


def test_hom_iso_identity_on_mixed_group():
    g = parse_group_expr("Z + Z/2")
    assert hom_is_isomorphism(GroupHom.identity(g))


def test_hom_doubling_not_iso():
    z = FgAbelianGroup.canonical(1)
    assert not hom_is_isomorphism(GroupHom(z, z, M([[2]])))


def test_hom_tripling_mod_two_is_iso():
    # oracle: exhaustive check on the two elements, 3*0 = 0 and 3*1 = 1 mod 2
    z2 = parse_group_expr("Z/2")
    tripling = GroupHom(z2, z2, M([[3]]))
    images = {x: (3 * x) % 2 for x in (0, 1)}
    assert images == {0: 0, 1: 1}
    assert hom_is_isomorphism(tripling)


def test_hom_rejects_ill_defined():
    z2 = parse_group_expr("Z/2")
    z = FgAbelianGroup.canonical(1)
    with pytest.raises(ValueError):
        GroupHom(z2, z, M([[1]]))  # sends an order-2 element to infinite order


def test_hom_kernel_rank():
    z2 = FgAbelianGroup.canonical(2)
    proj = GroupHom(z2, z2, M([[1, 0], [0, 0]]))
    assert proj.kernel_rank() == 1


# ---------------------------------------------------------------------------
# Colimits
# ---------------------------------------------------------------------------


def test_colimit_constant_chain():
    z = FgAbelianGroup.canonical(1)
    groups = [z] * 4
    homs = [GroupHom.identity(z)] * 3
    group, stable = colimit_chain(groups, homs, 2)
    assert stable and group.canonical_pair() == (1, ())


def test_colimit_everything_dies():
    # both basis elements are killed at every step and replaced by fresh ones
    z2 = FgAbelianGroup.canonical(2)
    groups = [z2] * 6
    homs = [GroupHom.zero(z2, z2)] * 5
    group, stable = colimit_chain(groups, homs, 2)
    assert stable and group.is_trivial


def test_colimit_doubling_never_stabilizes():
    z = FgAbelianGroup.canonical(1)
    x2 = GroupHom(z, z, M([[2]]))
    for length in (4, 6, 8):
        group, stable = colimit_chain([z] * length, [x2] * (length - 1), 2)
        assert not stable
        assert group.canonical_pair() == (1, ())


def test_colimit_isomorphism_chain_returns_first_group():
    g = parse_group_expr("Z/2 + Z/4")
    groups = [g] * 5
    homs = [GroupHom.identity(g)] * 4
    group, stable = colimit_chain(groups, homs, 2)
    assert stable and group.canonical_pair() == g.canonical_pair()


def test_colimit_window_too_short():
    z = FgAbelianGroup.canonical(1)
    with pytest.raises(ValueError):
        colimit_chain([z] * 3, [GroupHom.identity(z)] * 2, 2)


# ---------------------------------------------------------------------------
# Group expression grammar
# ---------------------------------------------------------------------------


def test_parse_free_and_torsion():
    g = parse_group_expr("Z^2 + Z/3")
    assert g.canonical_pair() == (2, (3,))


def test_parse_crt_normalization():
    # oracle: the Smith form of diag(2, 3) is diag(1, 6)
    s = smith_normal_form(IntMatrix.diagonal([2, 3]))
    assert s.diagonal == (1, 6)
    assert parse_group_expr("Z/2 + Z/3").canonical_pair() == (0, (6,))


def test_parse_trivial():
    assert parse_group_expr("0").is_trivial


def test_parse_keeps_divisible_factors():
    assert parse_group_expr("Z/2 + Z/2 + Z/4").canonical_pair() == (0, (2, 2, 4))


@pytest.mark.parametrize("bad", ["", "Z^0", "Z/1", "Q", "Z +", "0 + Z", "Z/-3"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_group_expr(bad)


@pytest.mark.parametrize(
    "text",
    ["0", "Z", "Z^3", "Z/2", "Z^2 + Z/2 + Z/6", "Z/4 + Z/2 + Z^5", "Z/3 + Z/9"],
)
def test_parse_format_roundtrip(text):
    once = parse_group_expr(text)
    again = parse_group_expr(format_group(once))
    assert once.canonical_pair() == again.canonical_pair()
    assert format_group(once) == format_group(again)


def test_format_examples():
    assert format_group(parse_group_expr("Z/3 + Z^2")) == "Z^2 + Z/3"
    assert format_group(FgAbelianGroup.trivial()) == "0"
    assert format_group(FgAbelianGroup.canonical(1)) == "Z"


def test_element_order():
    g = parse_group_expr("Z + Z/4")  # canonical coordinates: (Z/4 part, Z part)
    assert g.element_order((0, 0)) == 1
    assert g.element_order((1, 0)) == 4
    assert g.element_order((2, 0)) == 2
    assert g.element_order((0, 1)) == 0
