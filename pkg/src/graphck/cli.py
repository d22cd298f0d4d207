"""Command-line surface: validate, compute, synthesize, cross-check, lab runs.

Machine-readable output (JSON, or CSV for lab sweeps) goes to stdout; human
summaries go to stderr.  Exit codes: 0 = pass, 1 = a check or verification
failed, 2 = unreadable input or bad usage.  Identical inputs and flags give
byte-identical output (lab commands: identical for the same seed).
"""

from __future__ import annotations

import argparse
import json
import sys
from statistics import median

import numpy as np

from .abelian import format_group, parse_group_expr
from .graphs import (
    FiniteGraph,
    GraphChain,
    GraphFormatError,
    check_condition_a,
    dump_graph,
    every_cycle_has_exit,
    is_cycle,
    is_irreducible,
    load_graph,
)
from .ktheory import (
    ChainConditionError,
    boundary_map,
    chain_ktheory_report,
    ktheory,
    les_check,
)
from .lab import LabError, lemma36_w, partial_isometry_defect, straighten, straighten_family
from .scenarios import (
    CANONICAL_FAMILY_SCENARIOS,
    CANONICAL_W_SCENARIOS,
    family_scenario,
    injected_defect_trial,
    lemma36_scenario,
)
from .synthesis import SynthesisRequest, synthesize

PASS, FAIL, USAGE = 0, 1, 2


def _emit(data: dict) -> None:
    sys.stdout.write(json.dumps(data, ensure_ascii=False, indent=2) + "\n")


def _info(msg: str) -> None:
    sys.stderr.write(msg + "\n")


def cmd_check(args) -> int:
    graph = load_graph(args.file)
    if isinstance(graph, FiniteGraph):
        irr = is_irreducible(graph) if graph.vertices else False
        cyc = is_cycle(graph)
        exits = every_cycle_has_exit(graph)
        ok = irr and not cyc and exits
        _emit(
            {
                "type": "finite",
                "irreducible": irr,
                "cycle": cyc,
                "every_cycle_has_exit": exits,
                "pass": ok,
            }
        )
        _info(f"finite graph: {'PASS' if ok else 'FAIL'}")
        return PASS if ok else FAIL
    cond = check_condition_a(graph)
    out = {"type": "chain", **cond.to_json_dict()}
    ok = cond.passed
    if not cond.passed:
        out["b2"] = "skipped: layer conditions failed"
    elif len(graph) < args.window + 2:
        out["b2"] = "skipped: prefix too short for the window"
        _info("b2 skipped: the chain prefix is too short for the window")
    else:
        rep = chain_ktheory_report(graph, window=args.window)
        out["b2"] = rep.condition_b2.to_json_dict()
        ok = ok and rep.condition_b2.passed
        if rep.condition_b2.unchecked:
            _info(
                f"b2: {len(rep.condition_b2.unchecked)} vertices beyond the "
                f"stabilization window were not checked"
            )
    out["pass"] = ok
    _emit(out)
    _info(f"chain: {'PASS' if ok else 'FAIL'}")
    return PASS if ok else FAIL


def _layer_for(args, graph):
    if isinstance(graph, GraphChain):
        n = args.at if args.at is not None else len(graph) - 1
        if not 0 <= n < len(graph):
            raise GraphFormatError(f"layer {n} out of range for a chain of length {len(graph)}")
        if args.toeplitz:
            return graph.layer_graph(n)
        return graph.layer_graph(n, relation_exempt=())
    if args.at is not None:
        raise GraphFormatError("--at only applies to chain files")
    if args.toeplitz:
        return graph
    return FiniteGraph(graph.vertices, graph.edges, ())


def cmd_ktheory(args) -> int:
    graph = load_graph(args.file)
    g = _layer_for(args, graph)
    kt = ktheory(g)
    _emit(
        {
            "k0": format_group(kt.k0),
            "k1": format_group(kt.k1),
            "k0_classes": {v: list(kt.k0_class_of_vertex[v]) for v in kt.vertex_order},
            "k1_basis": [list(kt.k1_lattice.col(j)) for j in range(kt.k1_lattice.cols)],
        }
    )
    _info(f"K0 = {format_group(kt.k0)}, K1 = {format_group(kt.k1)}")
    return PASS


def cmd_colimit(args) -> int:
    graph = load_graph(args.file)
    if not isinstance(graph, GraphChain):
        raise GraphFormatError("colimit needs a chain file")
    rep = chain_ktheory_report(graph, window=args.window, force=args.force)
    _emit(
        {
            "k0": format_group(rep.k0),
            "k1": format_group(rep.k1),
            "k0_classes": {v: list(c) for v, c in sorted(rep.k0_class_map.items())},
            "stabilized": rep.stabilized,
            "window": rep.window,
            "forced": rep.forced,
        }
    )
    _info(
        f"K0 = {format_group(rep.k0)}, K1 = {format_group(rep.k1)}, "
        f"stabilized = {rep.stabilized} (window {rep.window})"
    )
    return PASS if rep.stabilized else FAIL


def cmd_boundary(args) -> int:
    graph = load_graph(args.file)
    if not isinstance(graph, FiniteGraph):
        raise GraphFormatError("boundary needs a finite graph file")
    try:
        vec = tuple(int(x) for x in args.cls.split(","))
    except ValueError:
        raise GraphFormatError("--class must be a comma-separated integer vector") from None
    image = boundary_map(graph, vec)
    _emit(
        {
            "vertices": list(graph.vertex_list),
            "class": list(vec),
            "boundary_basis": sorted(graph.relation_exempt),
            "boundary": list(image),
        }
    )
    _info(f"boundary = {image}")
    return PASS


def cmd_les_check(args) -> int:
    graph = load_graph(args.file)
    if not isinstance(graph, FiniteGraph):
        raise GraphFormatError("les-check needs a finite graph file")
    rep = les_check(graph)
    _emit(rep.to_json_dict())
    _info(f"long exact sequence: {'PASS' if rep.passed else 'FAIL'}")
    return PASS if rep.passed else FAIL


def cmd_synthesize(args) -> int:
    try:
        g0 = parse_group_expr(args.k0)
        g1 = parse_group_expr(args.k1)
        req = SynthesisRequest(g0, g1, depth=args.depth)
    except ValueError as exc:
        _info(f"usage error: {exc}")
        return USAGE
    res = synthesize(req)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(dump_graph(res.graph))
        _info(f"wrote {args.output}")
    _emit(res.to_json_dict())
    v = res.verification
    _info(
        f"case {res.case_tag}: verified={v.passed} "
        f"K = ({format_group(v.k0)}, {format_group(v.k1)})"
    )
    return PASS if v.passed else FAIL


# ---------------------------------------------------------------------------
# Lab sweeps (CSV)
# ---------------------------------------------------------------------------


def _csv_rows(rows) -> None:
    sys.stdout.write("t,defect_name,value\n")
    for t, name, value in rows:
        sys.stdout.write(f"{t},{name},{value:.12e}\n")


def cmd_lab_straighten(args) -> int:
    rows = []
    for d in (1e-2, 1e-3, 1e-4):
        residuals, moves, sided = [], [], []
        for i in range(args.trials):
            trial = injected_defect_trial(args.seed + i, d)
            y = straighten(trial.x)
            residuals.append(partial_isometry_defect(y))
            moves.append(float(np.linalg.norm(y - trial.x, 2)))
            sided.append(
                max(
                    float(np.linalg.norm(trial.left_projection @ y - y, 2)),
                    float(np.linalg.norm(y @ trial.right_projection - y, 2)),
                )
            )
        rows.append((d, "pi_residual_max", max(residuals)))
        rows.append((d, "y_minus_x_median", median(moves)))
        rows.append((d, "one_sided_relation_max", max(sided)))
    _csv_rows(rows)
    return PASS


def cmd_lab_w(args) -> int:
    if args.scenario not in CANONICAL_W_SCENARIOS + ("scalar",):
        _info(f"unknown scenario {args.scenario!r}")
        return USAGE
    sc = lemma36_scenario(args.scenario)
    try:
        ts = [float(x) for x in args.t.split(",")]
    except ValueError:
        _info("--t must be a comma-separated list of floats")
        return USAGE
    rows = []
    for t in ts:
        _, rep = lemma36_w(sc.a, sc.b, sc.r, t, sc.case, ideal_fiber=sc.ideal_fiber)
        for name, val in sorted(rep.defects.items()):
            rows.append((t, name, val))
        for name, val in sorted(rep.j_residuals.items()):
            rows.append((t, name, val))
    _csv_rows(rows)
    return PASS


def cmd_lab_family(args) -> int:
    if args.scenario not in CANONICAL_FAMILY_SCENARIOS:
        _info(f"unknown scenario {args.scenario!r}")
        return USAGE
    sc = family_scenario(args.scenario, seed=args.seed)
    out = straighten_family(sc.small, sc.large, sc.infinite_vertices, sc.fields)
    from .lab import condition_o_residuals

    res = condition_o_residuals(sc.large, sc.infinite_vertices, out)
    rows = [(0.0, f"residual_{name}", val) for name, val in sorted(res.items())]
    drift = max(((out[e] - sc.fields[e]).norm() for e in sc.new_edge_ids), default=0.0)
    rows.append((0.0, "max_new_edge_drift", drift))
    _csv_rows(rows)
    return PASS


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphck", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a graph or chain file")
    p.add_argument("file")
    p.add_argument("--window", type=int, default=2)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("ktheory", help="K-theory of a finite graph or chain layer")
    p.add_argument("file")
    p.add_argument("--toeplitz", action="store_true", help="keep the relation-exempt set")
    p.add_argument("--at", type=int, default=None, help="chain layer index")
    p.set_defaults(func=cmd_ktheory)

    p = sub.add_parser("colimit", help="colimit K-theory of a chain")
    p.add_argument("file")
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--force", action="store_true", help="skip the condition gate (recorded)")
    p.set_defaults(func=cmd_colimit)

    p = sub.add_parser("boundary", help="index map on a degree-one class")
    p.add_argument("file")
    p.add_argument("--class", dest="cls", required=True, help="comma-separated integers")
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("les-check", help="verify the Toeplitz extension sequence")
    p.add_argument("file")
    p.set_defaults(func=cmd_les_check)

    p = sub.add_parser("synthesize", help="build a graph with prescribed K-theory")
    p.add_argument("--k0", required=True)
    p.add_argument("--k1", required=True)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_synthesize)

    lab = sub.add_parser("lab", help="numeric perturbation experiments (CSV output)")
    labsub = lab.add_subparsers(dest="lab_command", required=True)

    p = labsub.add_parser("straighten", help="injected-defect straightening sweep")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=50)
    p.set_defaults(func=cmd_lab_straighten)

    p = labsub.add_parser("w", help="two-term interpolation sweep")
    p.add_argument("--scenario", default="case_ii_blocks")
    p.add_argument("--t", default="0.5,0.9,0.99")
    p.set_defaults(func=cmd_lab_w)

    p = labsub.add_parser("family", help="family straightening scenario")
    p.add_argument("--scenario", default="orthogonal_pair")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_lab_family)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except GraphFormatError as exc:
        _info(f"input error: {exc}")
        return USAGE
    except ChainConditionError as exc:
        _info(f"check failed: {exc}")
        return FAIL
    except LabError as exc:
        _info(f"lab error: {exc}")
        return FAIL
    except FileNotFoundError as exc:
        _info(f"input error: {exc}")
        return USAGE
    except ValueError as exc:
        _info(f"error: {exc}")
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
