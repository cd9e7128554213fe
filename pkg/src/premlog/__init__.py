"""Datalog with extrema and counting aggregates inside recursion.

The package decides when a final min/max/bound constraint can be applied
at every step of the fixpoint instead of after it, performs that rewrite,
evaluates the result with constrained naive or seminaive iteration, and can
probe the transfer equation empirically when the static argument fails.
"""

from .analysis import (
    DependencyGraph,
    PremVerdict,
    Rejection,
    Stratum,
    build_dependency_graph,
    check_ascending,
    check_inflation_preserving,
    classify_premability,
    compose_procedure,
    constraint_from_annotations,
    find_cost_arguments,
    stratify,
)
from .bench import (
    BenchReport,
    GraphSpec,
    dijkstra_reference,
    gen_graph,
    run_benchmark,
    shortest_paths,
)
from .engine import (
    EvalOptions,
    EvalStats,
    ExtremaIndex,
    MonotonicIndex,
    RunResult,
    apply_constraint,
    apply_ico,
    default_query,
    eval_aggregate,
    iterated_fixpoint,
    naive_fixpoint,
    run_program,
    seminaive_fixpoint,
)
from .errors import (
    AmbiguousCost,
    ArityConflict,
    BudgetExceeded,
    LoadError,
    MalformedAggregate,
    MissingResult,
    NegativeLength,
    NoCost,
    NonPositiveSummand,
    Overflow,
    ParseError,
    PlanMismatch,
    PremlogError,
    SafetyError,
    StratificationError,
    TypeMismatch,
    UnboundVariable,
)
from .model import (
    Atom,
    Bound,
    Comparison,
    Constant,
    Conjunction,
    Extremum,
    FinalConstraint,
    Program,
    Rule,
    Variable,
    make_constraint,
)
from .parser import (
    format_program,
    format_rule,
    load_edge_list,
    load_facts_path,
    parse_facts,
    parse_program,
)
from .rewrite import (
    CompileObligation,
    RewriteTrace,
    compile_count_in_recursion,
    desugar_extremum,
    expand_msum,
    materialize_monotonic,
    push_constraint,
)
from .verify import (
    PremCheckReport,
    TrustReport,
    brute_force_oracle,
    check_prem_empirical,
    trust_but_verify_run,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousCost",
    "ArityConflict",
    "Atom",
    "BenchReport",
    "Bound",
    "BudgetExceeded",
    "Comparison",
    "CompileObligation",
    "Conjunction",
    "Constant",
    "DependencyGraph",
    "EvalOptions",
    "EvalStats",
    "Extremum",
    "ExtremaIndex",
    "FinalConstraint",
    "GraphSpec",
    "LoadError",
    "MalformedAggregate",
    "MissingResult",
    "MonotonicIndex",
    "NegativeLength",
    "NoCost",
    "NonPositiveSummand",
    "Overflow",
    "ParseError",
    "PlanMismatch",
    "PremCheckReport",
    "PremVerdict",
    "PremlogError",
    "Program",
    "Rejection",
    "RewriteTrace",
    "Rule",
    "RunResult",
    "SafetyError",
    "StratificationError",
    "Stratum",
    "TrustReport",
    "TypeMismatch",
    "UnboundVariable",
    "Variable",
    "apply_constraint",
    "apply_ico",
    "brute_force_oracle",
    "build_dependency_graph",
    "check_ascending",
    "check_inflation_preserving",
    "check_prem_empirical",
    "classify_premability",
    "compile_count_in_recursion",
    "compose_procedure",
    "constraint_from_annotations",
    "default_query",
    "desugar_extremum",
    "dijkstra_reference",
    "eval_aggregate",
    "expand_msum",
    "find_cost_arguments",
    "format_program",
    "format_rule",
    "gen_graph",
    "iterated_fixpoint",
    "load_edge_list",
    "load_facts_path",
    "make_constraint",
    "materialize_monotonic",
    "naive_fixpoint",
    "parse_facts",
    "parse_program",
    "push_constraint",
    "run_benchmark",
    "run_program",
    "seminaive_fixpoint",
    "shortest_paths",
    "stratify",
    "trust_but_verify_run",
]
