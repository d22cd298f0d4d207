"""Exact K-theory of (Toeplitz) graph algebras and partial-isometry labs."""

from .abelian import (
    ColumnLattice,
    FgAbelianGroup,
    GroupHom,
    IntMatrix,
    Presentation,
    SmithDecomposition,
    cokernel,
    colimit_chain,
    format_group,
    hom_compose,
    hom_is_isomorphism,
    kernel_basis,
    parse_group_expr,
    smith_normal_form,
)
from .graphs import (
    FiniteGraph,
    GraphChain,
    GraphFormatError,
    check_condition_a,
    check_condition_b2,
    dump_graph,
    every_cycle_has_exit,
    graph_from_json_dict,
    is_cycle,
    is_irreducible,
    load_graph,
    toeplitz_s_set,
)
from .ktheory import (
    ChainKTheory,
    KTheoryResult,
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
from .lab import (
    DefectReport,
    LabError,
    MatField,
    condition_o_residuals,
    lemma36_w,
    partial_isometry_defect,
    straighten,
    straighten_family,
)
from .synthesis import (
    SynthesisRequest,
    SynthesisResult,
    build_case_i,
    build_case_ii,
    build_case_iii,
    synthesize,
)

__version__ = "0.1.0"
