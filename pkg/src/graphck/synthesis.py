"""Graphs realizing prescribed K-theory, with mandatory self-verification.

Given a pair of finitely generated abelian groups (G0, G1) with G1 free, a
graph (or chain of graphs) is constructed whose algebra has exactly that
K-theory.  Three constructions cover the rank comparison:

* case i   (rank G0 == rank G1): one finite graph on vertices v1..vl, z,
  w1..wk, where the v-block and the return vertex give the free part and a
  chain of parallel-edge bundles z -> w1 -> ... -> wk gives the torsion;
  every vertex carries one extra loop.  With no torsion the incidence matrix
  is the all-ones matrix plus the identity.
* case ii  (rank G0 < rank G1): the case-i graph plus one infinite-valence
  vertex u and p+1 descending towers a_i_* with companion vertices b_i_*;
  each tower kills one free generator of degree zero per layer while fixing
  degree one, so the limit loses p+1 free ranks in degree zero.
* case iii (rank G0 > rank G1): the case-i graph plus one infinite-valence
  vertex u_i per tower; the towers pin degree zero layerwise and cut p free
  ranks out of degree one.

The towers are reconstructed from the linear relations they must impose
(each construction is re-verified mechanically on every build: layer
conditions, per-layer groups, inclusion behavior, and the colimit), so a
bad reconstruction cannot go unnoticed.

Vertex names are fixed (v1.., z, w1.., u or u1.., a_i_j, b_i_j) so that
regenerated graphs are byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .abelian import FgAbelianGroup, format_group
from .graphs import (
    B2Report,
    ConditionReport,
    FiniteGraph,
    GraphChain,
    check_condition_a,
    check_condition_b2,
    is_cycle,
    is_irreducible,
)
from .ktheory import ChainKTheory, chain_ktheory_report, ktheory

VERIFICATION_WINDOW = 2


class EdgeBag:
    """Accumulates edges with deterministic parallel-edge naming."""

    def __init__(self):
        self._count: dict[tuple[str, str], int] = {}
        self.edges: list[tuple[str, str, str]] = []

    def add(self, origin: str, terminus: str, copies: int = 1) -> None:
        for _ in range(copies):
            k = self._count.get((origin, terminus), 0) + 1
            self._count[(origin, terminus)] = k
            eid = f"{origin}->{terminus}" if k == 1 else f"{origin}->{terminus}#{k}"
            self.edges.append((eid, origin, terminus))


def _base_vertices(l: int, torsion: Sequence[int]) -> list[str]:
    return [f"v{i}" for i in range(1, l + 1)] + ["z"] + [f"w{i}" for i in range(1, len(torsion) + 1)]


def _base_edges(bag: EdgeBag, l: int, torsion: Sequence[int]) -> None:
    k = len(torsion)
    vs_and_z = [f"v{i}" for i in range(1, l + 1)] + ["z"]
    for i in range(1, l + 1):
        for t in vs_and_z:
            bag.add(f"v{i}", t)
    if k == 0:
        for t in vs_and_z:
            bag.add("z", t)
    else:
        bag.add("z", "w1", copies=torsion[0])
        for i in range(1, k):
            bag.add(f"w{i}", f"w{i + 1}", copies=torsion[i])
        for t in vs_and_z:
            bag.add(f"w{k}", t)
    for v in _base_vertices(l, torsion):
        bag.add(v, v)  # the extra loop at every vertex


def build_case_i(l: int, torsion: Sequence[int] = ()) -> FiniteGraph:
    """Finite graph with K0 = Z^l + sum Z/n_i and K1 = Z^l, relations everywhere."""
    torsion = tuple(int(n) for n in torsion)
    if l < 0:
        raise ValueError("free rank must be nonnegative")
    if any(n < 2 for n in torsion):
        raise ValueError("torsion orders must be >= 2")
    if l + len(torsion) < 1:
        raise ValueError("the trivial pair (0, 0) is not realized by this construction")
    bag = EdgeBag()
    _base_edges(bag, l, torsion)
    return FiniteGraph(_base_vertices(l, torsion), bag.edges)


def _tower_name(kind: str, i: int, j: int) -> str:
    return f"{kind}_{i}_{j}"


def build_case_ii(l: int, p: int, torsion: Sequence[int] = (), depth: int = 6) -> GraphChain:
    """Chain whose colimit K-theory is (Z^{l-p-1} + torsion, Z^{l-1}).

    One shared infinite-valence vertex u; towers i = 1..p+1 with vertices
    a_i_j, b_i_j for j = 1..n+1 at layer n.  Tower edges: a_i_1 -> v_i plus
    one loop; a_i_j -> a_i_{j-1} plus one loop for j >= 2; b_i_j carries two
    loops and b_i_j -> a_i_j; u emits to every a_i_j and b_i_j; v_i -> u for
    i <= p+1.
    """
    torsion = tuple(int(n) for n in torsion)
    if not 0 < p < l or l <= 1:
        raise ValueError("need 0 < p < l and l > 1")
    if depth < 4:
        raise ValueError("depth must be at least 4")
    if any(n < 2 for n in torsion):
        raise ValueError("torsion orders must be >= 2")
    bag = EdgeBag()
    _base_edges(bag, l, torsion)
    maxj = depth  # layer n holds j <= n+1, topmost layer is depth-1
    for i in range(1, p + 2):
        bag.add(f"v{i}", "u")
        bag.add(_tower_name("a", i, 1), f"v{i}")
        bag.add(_tower_name("a", i, 1), _tower_name("a", i, 1))
        for j in range(2, maxj + 1):
            bag.add(_tower_name("a", i, j), _tower_name("a", i, j - 1))
            bag.add(_tower_name("a", i, j), _tower_name("a", i, j))
        for j in range(1, maxj + 1):
            bag.add(_tower_name("b", i, j), _tower_name("b", i, j), copies=2)
            bag.add(_tower_name("b", i, j), _tower_name("a", i, j))
            bag.add("u", _tower_name("a", i, j))
            bag.add("u", _tower_name("b", i, j))
    base = _base_vertices(l, torsion)
    layers = []
    for n in range(depth):
        layer = list(base) + ["u"]
        for i in range(1, p + 2):
            for j in range(1, n + 2):
                layer.append(_tower_name("a", i, j))
                layer.append(_tower_name("b", i, j))
        layers.append(layer)
    return GraphChain({"u"}, layers, bag.edges)


def build_case_iii(l: int, p: int, torsion: Sequence[int] = (), depth: int = 6) -> GraphChain:
    """Chain whose colimit K-theory is (Z^l + torsion, Z^{l-p}).

    One infinite-valence vertex u_i per tower i = 1..p, with vertices a_i_j,
    b_i_j for j = 1..n+2 at layer n.  Tower edges: v_i -> u_i; u_i -> b_i_j
    for every j; a_i_1 -> v_i plus two loops; a_i_j -> b_i_{j-1} plus two
    loops for j >= 2; b_i_1 -> a_i_1 and b_i_1 -> v_i; b_i_j -> a_i_j and
    b_i_j -> b_i_{j-1} for j >= 2.
    """
    torsion = tuple(int(n) for n in torsion)
    if not 0 < p <= l or l < 1:
        raise ValueError("need 0 < p <= l and l >= 1")
    if depth < 4:
        raise ValueError("depth must be at least 4")
    if any(n < 2 for n in torsion):
        raise ValueError("torsion orders must be >= 2")
    bag = EdgeBag()
    _base_edges(bag, l, torsion)
    maxj = depth + 1  # layer n holds j <= n+2, topmost layer is depth-1
    for i in range(1, p + 1):
        ui = f"u{i}"
        bag.add(f"v{i}", ui)
        bag.add(_tower_name("a", i, 1), f"v{i}")
        bag.add(_tower_name("a", i, 1), _tower_name("a", i, 1), copies=2)
        for j in range(2, maxj + 1):
            bag.add(_tower_name("a", i, j), _tower_name("b", i, j - 1))
            bag.add(_tower_name("a", i, j), _tower_name("a", i, j), copies=2)
        bag.add(_tower_name("b", i, 1), _tower_name("a", i, 1))
        bag.add(_tower_name("b", i, 1), f"v{i}")
        for j in range(2, maxj + 1):
            bag.add(_tower_name("b", i, j), _tower_name("a", i, j))
            bag.add(_tower_name("b", i, j), _tower_name("b", i, j - 1))
        for j in range(1, maxj + 1):
            bag.add(ui, _tower_name("b", i, j))
    base = _base_vertices(l, torsion)
    layers = []
    for n in range(depth):
        layer = list(base) + [f"u{i}" for i in range(1, p + 1)]
        for i in range(1, p + 1):
            for j in range(1, n + 3):
                layer.append(_tower_name("a", i, j))
                layer.append(_tower_name("b", i, j))
        layers.append(layer)
    return GraphChain({f"u{i}" for i in range(1, p + 1)}, layers, bag.edges)


# ---------------------------------------------------------------------------
# Synthesis driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthesisRequest:
    g0: FgAbelianGroup
    g1: FgAbelianGroup
    depth: int = 6

    def __post_init__(self):
        if self.g1.invariant_factors:
            raise ValueError("the realization construction requires a free degree-one group")
        if self.depth < 4:
            raise ValueError("depth must be at least 4")


@dataclass
class Verification:
    passed: bool
    k0: FgAbelianGroup
    k1: FgAbelianGroup
    stabilized: bool
    condition_a: ConditionReport | None = None
    condition_b2: B2Report | None = None
    messages: list[str] = field(default_factory=list)


@dataclass
class SynthesisResult:
    graph: FiniteGraph | GraphChain
    case_tag: str  # "i" | "ii" | "iii"
    parameters: dict
    verification: Verification

    def to_json_dict(self) -> dict:
        out = {
            "case": self.case_tag,
            "parameters": dict(self.parameters),
            "verified": self.verification.passed,
            "k0": format_group(self.verification.k0),
            "k1": format_group(self.verification.k1),
        }
        if self.verification.messages:
            out["messages"] = list(self.verification.messages)
        return out


def _verify_finite(graph: FiniteGraph, req: SynthesisRequest) -> Verification:
    messages = []
    kt = ktheory(graph)
    ok = True
    if not is_irreducible(graph):
        ok = False
        messages.append("graph is not strongly connected")
    if is_cycle(graph):
        ok = False
        messages.append("graph is a cycle")
    if not kt.k0.is_isomorphic_to(req.g0):
        ok = False
        messages.append(f"degree-zero mismatch: got {format_group(kt.k0)}")
    if not kt.k1.is_isomorphic_to(req.g1):
        ok = False
        messages.append(f"degree-one mismatch: got {format_group(kt.k1)}")
    return Verification(passed=ok, k0=kt.k0, k1=kt.k1, stabilized=True, messages=messages)


def _verify_chain(
    emitted: GraphChain, padded: GraphChain, req: SynthesisRequest
) -> tuple[Verification, ChainKTheory]:
    messages = []
    rep = chain_ktheory_report(padded, window=VERIFICATION_WINDOW)
    cond_a = check_condition_a(emitted)
    cond_b2 = check_condition_b2(emitted, rep.k0_class_map)
    ok = True
    if not rep.stabilized:
        ok = False
        messages.append("colimit did not stabilize at the verification window")
    if not cond_a.passed:
        ok = False
        messages.append("emitted chain fails the layer conditions")
    if not cond_b2.passed or cond_b2.unchecked:
        ok = False
        messages.append("emitted chain fails the out-star matching")
    if not rep.k0.is_isomorphic_to(req.g0):
        ok = False
        messages.append(f"degree-zero mismatch: got {format_group(rep.k0)}")
    if not rep.k1.is_isomorphic_to(req.g1):
        ok = False
        messages.append(f"degree-one mismatch: got {format_group(rep.k1)}")
    return (
        Verification(
            passed=ok,
            k0=rep.k0,
            k1=rep.k1,
            stabilized=rep.stabilized,
            condition_a=cond_a,
            condition_b2=cond_b2,
            messages=messages,
        ),
        rep,
    )


def synthesize(req: SynthesisRequest) -> SynthesisResult:
    """Build and verify a graph whose algebra has the requested K-theory.

    Dispatch on the rank comparison; the verification always recomputes the
    K-theory of what was built (a chain is verified through a prefix padded
    by the verification window, so every emitted vertex gets a colimit class
    for the out-star matching) and the pass flag is set only on exact
    isomorphism with the request.
    """
    r0, r1 = req.g0.free_rank, req.g1.free_rank
    torsion = req.g0.invariant_factors
    if r0 == r1:
        l, k = r0, len(torsion)
        if l + k < 1:
            raise ValueError("the trivial pair (0, 0) is not realized by this construction")
        graph = build_case_i(l, torsion)
        verification = _verify_finite(graph, req)
        return SynthesisResult(
            graph=graph,
            case_tag="i",
            parameters={"l": l, "p": 0, "torsion": list(torsion), "depth": None},
            verification=verification,
        )
    if r0 < r1:
        l, p = r1 + 1, r1 - r0
        emitted = build_case_ii(l, p, torsion, req.depth)
        padded = build_case_ii(l, p, torsion, req.depth + VERIFICATION_WINDOW)
        verification, _ = _verify_chain(emitted, padded, req)
        return SynthesisResult(
            graph=emitted,
            case_tag="ii",
            parameters={"l": l, "p": p, "torsion": list(torsion), "depth": req.depth},
            verification=verification,
        )
    l, p = r0, r0 - r1
    emitted = build_case_iii(l, p, torsion, req.depth)
    padded = build_case_iii(l, p, torsion, req.depth + VERIFICATION_WINDOW)
    verification, _ = _verify_chain(emitted, padded, req)
    return SynthesisResult(
        graph=emitted,
        case_tag="iii",
        parameters={"l": l, "p": p, "torsion": list(torsion), "depth": req.depth},
        verification=verification,
    )
