"""Directed multigraphs, chain presentations of infinite graphs, checkers.

A ``FiniteGraph`` is a directed multigraph (parallel edges and loops allowed)
together with the set of vertices where the summation relation of the
associated algebra is *not* imposed (``relation_exempt``); the complement is
the relation set S.  A ``GraphChain`` presents an infinite graph through an
increasing chain of finite vertex layers plus the edge list of the union
prefix; layer edge sets are always induced (edges with both endpoints in the
layer), which removes a whole class of inconsistent inputs.

The structural conditions checked here:

* (a1)  infinite-valence vertices all sit in the first layer;
* (a2)  every layer is irreducible (strongly connected) and not a cycle;
* (a3)  layer edge sets are induced (tautological here, still reported);
* (a4)  finite-valence layer vertices keep all their out-edges in the layer;
* (a5)  in-neighbors of layer n sit in layer n+1;
* (a6)  every infinite-valence vertex emits into every new layer.

Condition (b2) asks, for each finite-valence vertex u outside the first
layer, for a vertex v in the first layer whose out-star is isomorphic to
u's, matching loop shape, edge multiplicity per terminus, and the classes of
the termini in a supplied degree-zero K-group; the search is a finite
multiset matching and is performed automatically.

Vertex and edge IDs are opaque strings; lexicographic order fixes matrix row
and column order everywhere, so output is reproducible byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence


class GraphFormatError(ValueError):
    """Malformed graph data (bad JSON shape, dangling references, ...)."""


Edge = tuple[str, str, str]  # (edge id, origin, terminus)


def _check_edges(edges: Sequence[Edge], vertices: frozenset[str]) -> tuple[Edge, ...]:
    seen = set()
    out: list[Edge] = []
    for e in edges:
        eid, origin, terminus = e
        if eid in seen:
            raise GraphFormatError(f"duplicate edge id {eid!r}")
        seen.add(eid)
        if origin not in vertices:
            raise GraphFormatError(f"edge {eid!r} has unknown origin {origin!r}")
        if terminus not in vertices:
            raise GraphFormatError(f"edge {eid!r} has unknown terminus {terminus!r}")
        out.append((str(eid), str(origin), str(terminus)))
    out.sort()
    return tuple(out)


class FiniteGraph:
    """Finite directed multigraph with a relation-exempt vertex set."""

    __slots__ = ("vertices", "edges", "relation_exempt", "_out", "_in")

    def __init__(
        self,
        vertices: Iterable[str],
        edges: Sequence[Edge],
        relation_exempt: Iterable[str] = (),
    ):
        vset = frozenset(str(v) for v in vertices)
        exempt = frozenset(str(v) for v in relation_exempt)
        if not exempt <= vset:
            raise GraphFormatError(
                f"relation_exempt contains unknown vertices: {sorted(exempt - vset)}"
            )
        object.__setattr__(self, "vertices", vset)
        object.__setattr__(self, "edges", _check_edges(edges, vset))
        object.__setattr__(self, "relation_exempt", exempt)
        out: dict[str, list[Edge]] = {v: [] for v in vset}
        inc: dict[str, list[Edge]] = {v: [] for v in vset}
        for e in self.edges:
            out[e[1]].append(e)
            inc[e[2]].append(e)
        object.__setattr__(self, "_out", {v: tuple(es) for v, es in out.items()})
        object.__setattr__(self, "_in", {v: tuple(es) for v, es in inc.items()})

    def __setattr__(self, name, value):
        raise AttributeError("FiniteGraph is immutable")

    # -- views --------------------------------------------------------------

    @property
    def vertex_list(self) -> tuple[str, ...]:
        return tuple(sorted(self.vertices))

    @property
    def s_vertices(self) -> tuple[str, ...]:
        return tuple(sorted(self.vertices - self.relation_exempt))

    def out_edges(self, v: str) -> tuple[Edge, ...]:
        return self._out[v]

    def in_edges(self, v: str) -> tuple[Edge, ...]:
        return self._in[v]

    def out_degree(self, v: str) -> int:
        return len(self._out[v])

    def in_degree(self, v: str) -> int:
        return len(self._in[v])

    def incidence_matrix(self) -> list[list[int]]:
        """A[u][v] = number of edges u -> v, rows/cols in sorted vertex order."""
        order = {v: i for i, v in enumerate(self.vertex_list)}
        n = len(order)
        a = [[0] * n for _ in range(n)]
        for _, o, t in self.edges:
            a[order[o]][order[t]] += 1
        return a

    def induced_subgraph(self, vertices: Iterable[str], relation_exempt: Iterable[str] = ()) -> "FiniteGraph":
        vs = frozenset(vertices)
        if not vs <= self.vertices:
            raise GraphFormatError("induced subgraph on unknown vertices")
        es = [e for e in self.edges if e[1] in vs and e[2] in vs]
        return FiniteGraph(vs, es, frozenset(relation_exempt) & vs)

    def is_labeled_subgraph_of(self, other: "FiniteGraph") -> bool:
        return self.vertices <= other.vertices and set(self.edges) <= set(other.edges)

    def __eq__(self, other):
        return (
            isinstance(other, FiniteGraph)
            and self.vertices == other.vertices
            and self.edges == other.edges
            and self.relation_exempt == other.relation_exempt
        )

    def __hash__(self):
        return hash((self.vertices, self.edges, self.relation_exempt))

    def __repr__(self):
        return f"FiniteGraph({len(self.vertices)} vertices, {len(self.edges)} edges)"

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "vertices": list(self.vertex_list),
            "edges": [{"id": e[0], "from": e[1], "to": e[2]} for e in self.edges],
            "relation_exempt": sorted(self.relation_exempt),
        }


class GraphChain:
    """Increasing finite layers of an infinite graph, with the prefix edges.

    ``infinite_vertices`` is the set D of vertices that emit infinitely many
    edges in the full graph; the prefix edge list can only ever record
    finitely many of those.  All finite-valence vertices of the prefix are
    expected to have *all* their out-edges in the prefix; that expectation is
    what the (a4) check makes precise, per layer.
    """

    __slots__ = ("infinite_vertices", "layers", "edges")

    def __init__(
        self,
        infinite_vertices: Iterable[str],
        layers: Sequence[Iterable[str]],
        edges: Sequence[Edge],
    ):
        d = frozenset(str(v) for v in infinite_vertices)
        lys = tuple(frozenset(str(v) for v in layer) for layer in layers)
        if not lys:
            raise GraphFormatError("a chain needs at least one layer")
        for i in range(len(lys) - 1):
            if not lys[i] <= lys[i + 1]:
                raise GraphFormatError(f"layer {i} is not contained in layer {i + 1}")
        if not d <= lys[-1]:
            raise GraphFormatError(
                f"unknown infinite-valence vertices: {sorted(d - lys[-1])}"
            )
        # D outside layer 0 is a condition violation, not malformedness: the
        # (a1) check reports it with a witness
        object.__setattr__(self, "infinite_vertices", d)
        object.__setattr__(self, "layers", lys)
        object.__setattr__(self, "edges", _check_edges(edges, lys[-1]))

    def __setattr__(self, name, value):
        raise AttributeError("GraphChain is immutable")

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def vertices(self) -> frozenset[str]:
        return self.layers[-1]

    def layer_vertices(self, n: int) -> frozenset[str]:
        return self.layers[n]

    def new_vertices(self, n: int) -> frozenset[str]:
        """Vertices first appearing in layer n (layer -1 is empty)."""
        if n == 0:
            return self.layers[0]
        return self.layers[n] - self.layers[n - 1]

    def layer_edges(self, n: int) -> tuple[Edge, ...]:
        vs = self.layers[n]
        return tuple(e for e in self.edges if e[1] in vs and e[2] in vs)

    def layer_graph(self, n: int, relation_exempt: Iterable[str] | None = None) -> FiniteGraph:
        vs = self.layers[n]
        if relation_exempt is None:
            relation_exempt = vs - toeplitz_s_set(self, n)
        return FiniteGraph(vs, self.layer_edges(n), relation_exempt)

    def first_layer_of(self, v: str) -> int:
        for n, layer in enumerate(self.layers):
            if v in layer:
                return n
        raise KeyError(v)

    def __eq__(self, other):
        return (
            isinstance(other, GraphChain)
            and self.infinite_vertices == other.infinite_vertices
            and self.layers == other.layers
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.infinite_vertices, self.layers, self.edges))

    def __repr__(self):
        return f"GraphChain({len(self.layers)} layers, {len(self.vertices)} vertices, {len(self.edges)} edges)"

    def to_json_dict(self) -> dict:
        return {
            "vertices": sorted(self.vertices),
            "edges": [{"id": e[0], "from": e[1], "to": e[2]} for e in self.edges],
            "infinite_vertices": sorted(self.infinite_vertices),
            "layers": [sorted(layer) for layer in self.layers],
        }


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------


def graph_from_json_dict(data: object) -> FiniteGraph | GraphChain:
    if not isinstance(data, dict):
        raise GraphFormatError("top-level JSON value must be an object")
    try:
        vertices = data["vertices"]
        raw_edges = data["edges"]
    except KeyError as exc:
        raise GraphFormatError(f"missing required field {exc.args[0]!r}") from None
    if not isinstance(vertices, list) or not all(isinstance(v, str) for v in vertices):
        raise GraphFormatError("'vertices' must be an array of strings")
    if not isinstance(raw_edges, list):
        raise GraphFormatError("'edges' must be an array")
    edges = []
    for i, e in enumerate(raw_edges):
        if not isinstance(e, dict) or not {"id", "from", "to"} <= set(e):
            raise GraphFormatError(f"edge #{i} must be an object with id/from/to")
        edges.append((e["id"], e["from"], e["to"]))
    if "layers" in data or "infinite_vertices" in data:
        layers = data.get("layers")
        dset = data.get("infinite_vertices", [])
        if not isinstance(layers, list) or not all(isinstance(l, list) for l in layers):
            raise GraphFormatError("'layers' must be an array of arrays of strings")
        if not isinstance(dset, list):
            raise GraphFormatError("'infinite_vertices' must be an array of strings")
        chain = GraphChain(dset, layers, edges)
        if set(vertices) != set(chain.vertices):
            raise GraphFormatError("'vertices' must equal the union of the layers")
        return chain
    exempt = data.get("relation_exempt", [])
    if not isinstance(exempt, list):
        raise GraphFormatError("'relation_exempt' must be an array of strings")
    return FiniteGraph(vertices, edges, exempt)


def load_graph(path: str) -> FiniteGraph | GraphChain:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from None
    return graph_from_json_dict(data)


def dump_graph(graph: FiniteGraph | GraphChain) -> str:
    return json.dumps(graph.to_json_dict(), ensure_ascii=False, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Structural predicates
# ---------------------------------------------------------------------------


def _strongly_connected(graph: FiniteGraph) -> bool:
    verts = graph.vertex_list
    if not verts:
        return False
    index = {v: i for i, v in enumerate(verts)}
    succ: list[list[int]] = [[] for _ in verts]
    for _, o, t in graph.edges:
        succ[index[o]].append(index[t])

    # iterative Tarjan, counting components
    n = len(verts)
    disc = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    ncomp = 0
    counter = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                disc[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for k in range(pi, len(succ[v])):
                w = succ[v][k]
                if disc[w] == -1:
                    work[-1] = (v, k + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], disc[w])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == disc[v]:
                ncomp += 1
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    if w == v:
                        break
    return ncomp == 1


def is_irreducible(graph: FiniteGraph) -> bool:
    """Strongly connected: every ordered vertex pair is joined by a path."""
    if not graph.vertices:
        raise ValueError("irreducibility is undefined for the empty graph")
    return _strongly_connected(graph)


def is_cycle(graph: FiniteGraph) -> bool:
    """A single directed cycle: all degrees 1 and strongly connected."""
    if not graph.vertices:
        return False
    return (
        all(graph.out_degree(v) == 1 and graph.in_degree(v) == 1 for v in graph.vertices)
        and _strongly_connected(graph)
    )


def every_cycle_has_exit(graph: FiniteGraph) -> bool:
    """Does every directed cycle pass through a vertex of out-degree >= 2?

    A cycle without an exit consists entirely of vertices with out-degree
    exactly 1, so it is a cycle of the functional graph obtained by following
    unique out-edges; detecting one is a pointer chase.
    """
    nxt = {}
    for v in graph.vertices:
        out = graph.out_edges(v)
        if len(out) == 1:
            nxt[v] = out[0][2]
    color = {v: 0 for v in nxt}  # 0 unvisited, 1 in progress, 2 done
    for start in sorted(nxt):
        if color[start]:
            continue
        path = []
        v = start
        while True:
            color[v] = 1
            path.append(v)
            w = nxt.get(v)
            if w is None or w not in nxt:
                break
            if color[w] == 1:
                return False  # cycle of out-degree-1 vertices
            if color[w] == 2:
                break
            v = w
        for p in path:
            color[p] = 2
    return True


# ---------------------------------------------------------------------------
# Chain checks
# ---------------------------------------------------------------------------


def toeplitz_s_set(chain: GraphChain, n: int) -> frozenset[str]:
    """Vertices of layer n whose full out-star is contained in the layer.

    Computed against the recorded prefix edges; declared infinite-valence
    vertices are excluded outright (their out-star is infinite in the full
    graph, which no finite prefix can witness).
    """
    if not 0 <= n < len(chain.layers):
        raise ValueError(f"layer index {n} out of range")
    layer = chain.layers[n]
    leaving = set(chain.infinite_vertices)
    for _, o, t in chain.edges:
        if o in layer and t not in layer:
            leaving.add(o)
    return frozenset(layer - leaving)


@dataclass
class ConditionReport:
    """Outcome of the per-condition chain checks, with first witnesses."""

    conditions: dict[str, bool] = field(default_factory=dict)
    witnesses: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.conditions.values())

    def record(self, name: str, ok: bool, witness: str = "") -> None:
        self.conditions[name] = ok
        if not ok and witness:
            self.witnesses[name] = witness

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "conditions": dict(sorted(self.conditions.items())),
            "witnesses": dict(sorted(self.witnesses.items())),
        }


def check_condition_a(chain: GraphChain) -> ConditionReport:
    """Check (a1)-(a6) on the chain prefix, reporting the first witness each."""
    report = ConditionReport()
    d = chain.infinite_vertices
    nlayers = len(chain.layers)

    missing = sorted(d - chain.layers[0])
    report.record("a1", not missing, f"infinite-valence vertex {missing[0]!r} not in layer 0" if missing else "")

    ok, witness = True, ""
    for n in range(nlayers):
        g = chain.layer_graph(n, relation_exempt=())
        if not is_irreducible(g):
            ok, witness = False, f"layer {n} is not strongly connected"
            break
        if is_cycle(g):
            ok, witness = False, f"layer {n} is a cycle"
            break
    report.record("a2", ok, witness)

    # induced-layer convention: asserted for transparency, cannot fail here
    ok, witness = True, ""
    for n in range(nlayers):
        induced = {e for e in chain.edges if e[1] in chain.layers[n] and e[2] in chain.layers[n]}
        if set(chain.layer_edges(n)) != induced:
            ok, witness = False, f"layer {n} edge set is not induced"
            break
    report.record("a3", ok, witness)

    ok, witness = True, ""
    for n in range(nlayers):
        layer = chain.layers[n]
        for eid, o, t in chain.edges:
            if o in layer and o not in d and t not in layer:
                ok, witness = False, f"edge {eid!r} leaves layer {n} from finite-valence vertex {o!r}"
                break
        if not ok:
            break
    report.record("a4", ok, witness)

    ok, witness = True, ""
    for n in range(nlayers - 1):
        layer, nxt = chain.layers[n], chain.layers[n + 1]
        for eid, o, t in chain.edges:
            if t in layer and o not in nxt:
                ok, witness = False, f"edge {eid!r} enters layer {n} from outside layer {n + 1}"
                break
        if not ok:
            break
    report.record("a5", ok, witness)

    ok, witness = True, ""
    for n in range(nlayers):
        new = chain.new_vertices(n)
        for u in sorted(d):
            if not any(o == u and t in new for _, o, t in chain.edges):
                ok, witness = False, f"vertex {u!r} emits no edge into the new part of layer {n}"
                break
        if not ok:
            break
    report.record("a6", ok, witness)

    return report


def _out_star_shape(
    graph_edges: Sequence[Edge], u: str, classes: Mapping[str, tuple]
) -> list[tuple[int, bool, tuple]] | None:
    """Multiset describing u's out-star: (multiplicity, is-loop, terminus class).

    Returns None when some terminus has no class available.
    """
    per_terminus: dict[str, int] = {}
    for _, o, t in graph_edges:
        if o == u:
            per_terminus[t] = per_terminus.get(t, 0) + 1
    shape = []
    for t, count in per_terminus.items():
        if t not in classes:
            return None
        shape.append((count, t == u, tuple(classes[t])))
    shape.sort()
    return shape


@dataclass
class B2Report:
    """Out-star matching report: witness map, failures, and unchecked vertices."""

    matches: dict[str, str] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)
    unchecked: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "matches": dict(sorted(self.matches.items())),
            "failures": dict(sorted(self.failures.items())),
            "unchecked": sorted(self.unchecked),
        }


def check_condition_b2(chain: GraphChain, k0_class: Mapping[str, tuple]) -> B2Report:
    """Match out-stars of later finite-valence vertices into layer 0.

    For each finite-valence vertex u outside layer 0 the checker looks for a
    finite-valence v in layer 0 whose out-star is isomorphic to u's: same
    per-terminus multiplicities, same loop shape, and equal terminus classes
    under ``k0_class``.  The multiset comparison decides existence of the
    bijection; the witness records the matched v.  Vertices whose termini
    lack classes are reported as unchecked rather than failed.
    """
    report = B2Report()
    d = chain.infinite_vertices
    candidates = sorted(chain.layers[0] - d)
    cand_shapes = {}
    for v in candidates:
        cand_shapes[v] = _out_star_shape(chain.edges, v, k0_class)

    for u in sorted(chain.vertices - chain.layers[0] - d):
        shape = _out_star_shape(chain.edges, u, k0_class)
        if shape is None:
            report.unchecked.append(u)
            continue
        found = None
        for v in candidates:
            if cand_shapes[v] is not None and cand_shapes[v] == shape:
                found = v
                break
        if found is None:
            report.failures[u] = "no layer-0 vertex with an isomorphic out-star"
        else:
            report.matches[u] = found
    return report
