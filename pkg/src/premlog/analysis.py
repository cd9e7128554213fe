"""Static analysis: dependencies, strata, and constraint push classification.

The push classifier decides whether a pruning constraint attached to a final
rule may be applied inside the recursion that feeds it:

  * an upper bound may be pushed when every recursive rule is an ascending
    mapping (head cost never below any recursive body cost), a lower bound
    when every rule is descending;
  * a min constraint may be pushed when every rule preserves deflation of
    the recursive cost argument, a max constraint when every rule preserves
    inflation.

Checks run on normalized guards: assignment definitions are substituted so
a guard such as Dy>Dx with Dy=Dx+Dxy is judged as Dxy>0, which does not
mention the recursive cost at all. Conjuncts are checked in order against
the already-rewritten procedure, so a pushed bound can disqualify a
later extremum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from .errors import AmbiguousCost, NoCost, PremlogError, StratificationError
from .model import (
    COUNTING_KINDS,
    RANGE_PREDICATE,
    AggregateGoal,
    ArithExpr,
    Atom,
    Bound,
    Comparison,
    Constant,
    Constraint,
    Extremum,
    Goal,
    HeadExtremum,
    Negated,
    Program,
    Rule,
    Term,
    Variable,
    constraint_conjuncts,
    constraint_predicate,
)

# =====================================================================================
# DEPENDENCY GRAPH AND STRATIFICATION
# =====================================================================================

# Edge labels: 'positive' covers plain goals and the monotonic aggregates
# (mcount/msum), which are safe inside recursion. 'aggregated' marks goals a
# non-monotonic aggregate (count/sum/is_min/is_max) ranges over; like negation
# these need the full extension of the body predicates before they fire.
NONMONOTONIC_KINDS = ("count", "sum", "is_min", "is_max")


@dataclass(frozen=True)
class DepEdge:
    head: str
    body: str
    rule_id: str
    label: str  # 'positive' | 'negated' | 'aggregated'


@dataclass(frozen=True)
class DependencyGraph:
    predicates: Tuple[str, ...]
    edges: Tuple[DepEdge, ...]
    sccs: Tuple[Tuple[str, ...], ...]  # dependencies first
    scc_of: Dict[str, int]

    def scc_members(self, predicate: str) -> Tuple[str, ...]:
        return self.sccs[self.scc_of[predicate]]

    def is_recursive(self, predicate: str) -> bool:
        comp = self.scc_members(predicate)
        if len(comp) > 1:
            return True
        return any(e.head == predicate and e.body == predicate for e in self.edges)


def build_dependency_graph(program: Program) -> DependencyGraph:
    preds = program.predicates()
    edges: List[DepEdge] = []
    for r in program.rules:
        agg = r.aggregate()
        heavy = agg is not None and agg.kind in NONMONOTONIC_KINDS
        for g in r.body:
            if isinstance(g, Atom) and g.predicate != RANGE_PREDICATE:
                label = "aggregated" if heavy else "positive"
                edges.append(DepEdge(r.head.predicate, g.predicate, r.id, label))
            elif isinstance(g, Negated):
                edges.append(DepEdge(r.head.predicate, g.atom.predicate, r.id, "negated"))
    adj: Dict[str, List[str]] = {p: [] for p in preds}
    for e in edges:
        if e.body not in adj:
            adj[e.body] = []
            preds.append(e.body)
        adj[e.head].append(e.body)
    sccs = _tarjan(sorted(adj), {p: sorted(set(ts)) for p, ts in adj.items()})
    scc_of = {p: i for i, comp in enumerate(sccs) for p in comp}
    return DependencyGraph(tuple(preds), tuple(edges), tuple(sccs), scc_of)


def _tarjan(nodes: Sequence[str], adj: Dict[str, Sequence[str]]):
    index: Dict[str, int] = {}
    low: Dict[str, int] = {}
    onstack: Set[str] = set()
    stack: List[str] = []
    out: List[Tuple[str, ...]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        onstack.add(root)
        work = [(root, iter(adj.get(root, ())))]
        while work:
            node, it = work[-1]
            advanced = False
            for child in it:
                if child not in index:
                    index[child] = low[child] = counter
                    counter += 1
                    stack.append(child)
                    onstack.add(child)
                    work.append((child, iter(adj.get(child, ()))))
                    advanced = True
                    break
                if child in onstack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    onstack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                out.append(tuple(sorted(comp)))
    return tuple(out)


@dataclass(frozen=True)
class Stratum:
    index: int
    predicates: Tuple[str, ...]
    rules: Tuple[Rule, ...]
    recursive: bool


def stratify(program: Program, graph: Optional[DependencyGraph] = None) -> List[Stratum]:
    """Split rules into bottom-up evaluation strata.

    Negation and non-monotonic aggregates may not cross back into their own
    stratum; recursive count/sum is allowed only for rules that passed the
    push check and were marked approved.
    """
    if graph is None:
        graph = build_dependency_graph(program)
    approved = program.approved_recursive_aggregates
    for e in graph.edges:
        if graph.scc_of[e.head] != graph.scc_of[e.body]:
            continue
        if e.label == "negated":
            raise StratificationError(
                f"negation of {e.body} inside its own recursive component", e.rule_id
            )
        if e.label == "aggregated" and e.rule_id not in approved:
            raise StratificationError(
                f"non-monotonic aggregate over {e.body} inside its own recursive "
                f"component (not approved for native evaluation)",
                e.rule_id,
            )
    strata: List[Stratum] = []
    for comp in graph.sccs:
        members = set(comp)
        rules = tuple(r for r in program.rules if r.head.predicate in members)
        if not rules:
            continue
        recursive = len(comp) > 1 or any(
            e.head == e.body and e.head in members for e in graph.edges
        )
        strata.append(Stratum(len(strata), comp, rules, recursive))
    return strata


# =====================================================================================
# COST ARGUMENT PROPAGATION
# =====================================================================================


def find_cost_arguments(
    rules: Sequence[Rule], scc: Set[str], seed_pred: str, seed_pos: int
) -> Dict[str, int]:
    """Locate the cost argument position of every predicate in a component.

    Starting from the constrained predicate, the position is propagated to
    recursive body predicates through the head cost's defining expression.
    """
    costmap: Dict[str, int] = {seed_pred: seed_pos}
    changed = True
    while changed:
        changed = False
        for r in rules:
            pred = r.head.predicate
            if pred not in scc or pred not in costmap:
                continue
            pos = costmap[pred]
            if pos >= len(r.head.args):
                raise NoCost(f"{pred} has no argument at position {pos}")
            base = _base_cost_vars(r, r.head.args[pos])
            if not base:
                continue
            for g in r.body:
                if not isinstance(g, Atom) or g.predicate not in scc:
                    continue
                hits = [
                    i
                    for i, a in enumerate(g.args)
                    if isinstance(a, Variable) and a.name in base
                ]
                if len(hits) > 1:
                    raise AmbiguousCost(
                        f"rule {r.id}: several arguments of {g.predicate} feed the "
                        f"cost of {pred}"
                    )
                if not hits:
                    continue
                prior = costmap.get(g.predicate)
                if prior is None:
                    costmap[g.predicate] = hits[0]
                    changed = True
                elif prior != hits[0]:
                    raise AmbiguousCost(
                        f"{g.predicate} carries its cost at position {prior} and "
                        f"{hits[0]} in different rules"
                    )
    missing = sorted(scc - set(costmap))
    if missing:
        raise NoCost(f"no cost argument found for {', '.join(missing)}")
    return costmap


def _base_cost_vars(rule: Rule, cost_term: Term) -> Set[str]:
    if not isinstance(cost_term, Variable):
        return set()
    agg = rule.aggregate()
    if agg is not None and agg.result == cost_term.name:
        # Aggregate results are produced, not copied, so nothing to propagate.
        return set()
    defs = _definitions(rule)
    expanded = subst_defs(cost_term, defs)
    return {v for v in _term_vars(expanded)}


# =====================================================================================
# TERM NORMALIZATION: DEFINITIONS, LINEAR FORMS, INTERVALS, DIRECTIONS
# =====================================================================================


def _term_vars(t: Term) -> Iterable[str]:
    if isinstance(t, Variable):
        yield t.name
    elif isinstance(t, ArithExpr):
        yield from _term_vars(t.left)
        yield from _term_vars(t.right)


def _definitions(rule: Rule) -> Dict[str, Term]:
    """Assignments V=expr whose target is not bound by a positive goal."""
    atom_bound: Set[str] = set()
    for g in rule.body:
        if isinstance(g, Atom):
            atom_bound.update(g.variables())
    defs: Dict[str, Term] = {}
    for g in rule.body:
        if (
            isinstance(g, Comparison)
            and g.op == "="
            and isinstance(g.left, Variable)
            and g.left.name not in atom_bound
            and g.left.name not in defs
        ):
            defs[g.left.name] = g.right
    return defs


def subst_defs(t: Term, defs: Dict[str, Term], _depth: int = 0) -> Term:
    if _depth > 32:
        raise PremlogError("definition chain too deep")
    if isinstance(t, Variable) and t.name in defs:
        return subst_defs(defs[t.name], defs, _depth + 1)
    if isinstance(t, ArithExpr):
        return ArithExpr(t.op, subst_defs(t.left, defs, _depth + 1), subst_defs(t.right, defs, _depth + 1))
    return t


def linear_form(t: Term) -> Optional[Tuple[Dict[str, int], int]]:
    """Write t as sum(coeff*var) + const, or None if not linear over ints."""
    if isinstance(t, Constant):
        return ({}, t.value) if isinstance(t.value, int) else None
    if isinstance(t, Variable):
        return ({t.name: 1}, 0)
    lf_l = linear_form(t.left)
    lf_r = linear_form(t.right)
    if lf_l is None or lf_r is None:
        return None
    (cl, kl), (cr, kr) = lf_l, lf_r
    if t.op == "+":
        merged = dict(cl)
        for v, c in cr.items():
            merged[v] = merged.get(v, 0) + c
        return ({v: c for v, c in merged.items() if c != 0}, kl + kr)
    if t.op == "-":
        merged = dict(cl)
        for v, c in cr.items():
            merged[v] = merged.get(v, 0) - c
        return ({v: c for v, c in merged.items() if c != 0}, kl - kr)
    if t.op == "*":
        if not cl:
            return ({v: kl * c for v, c in cr.items() if kl * c != 0}, kl * kr)
        if not cr:
            return ({v: kr * c for v, c in cl.items() if kr * c != 0}, kr * kl)
        return None
    return None


Intv = Tuple[Optional[int], Optional[int]]  # (lo, hi); None encodes the open end

FULL: Intv = (None, None)


def _iadd(a: Intv, b: Intv) -> Intv:
    lo = None if a[0] is None or b[0] is None else a[0] + b[0]
    hi = None if a[1] is None or b[1] is None else a[1] + b[1]
    return (lo, hi)


def _ineg(a: Intv) -> Intv:
    return (None if a[1] is None else -a[1], None if a[0] is None else -a[0])


def _imul(a: Intv, b: Intv) -> Intv:
    import math

    def ends(iv: Intv):
        lo = -math.inf if iv[0] is None else iv[0]
        hi = math.inf if iv[1] is None else iv[1]
        return lo, hi

    def mul(p, q):
        if p == 0 or q == 0:
            return 0
        return p * q

    (alo, ahi), (blo, bhi) = ends(a), ends(b)
    prods = [mul(alo, blo), mul(alo, bhi), mul(ahi, blo), mul(ahi, bhi)]
    lo, hi = min(prods), max(prods)
    return (None if lo == -math.inf else int(lo), None if hi == math.inf else int(hi))


Region = Dict[str, Intv]


def interval(t: Term, region: Region) -> Intv:
    lf = linear_form(t)
    if lf is not None:
        coeffs, const = lf
        acc: Intv = (const, const)
        for v, c in coeffs.items():
            iv = region.get(v, FULL)
            acc = _iadd(acc, _imul((c, c), iv))
        return acc
    if isinstance(t, Constant):
        return (t.value, t.value) if isinstance(t.value, int) else FULL
    if isinstance(t, Variable):
        return region.get(t.name, FULL)
    left = interval(t.left, region)
    right = interval(t.right, region)
    if t.op == "+":
        return _iadd(left, right)
    if t.op == "-":
        return _iadd(left, _ineg(right))
    return _imul(left, right)


def _combine_dir(a: str, b: str) -> str:
    if a == "indep":
        return b
    if b == "indep":
        return a
    if a == b:
        return a
    return "unknown"


def _flip_dir(d: str) -> str:
    return {"inc": "dec", "dec": "inc"}.get(d, d)


def direction(t: Term, x: str, region: Region) -> str:
    """Monotonicity of t in variable x over region: inc, dec, indep, unknown."""
    lf = linear_form(t)
    if lf is not None:
        c = lf[0].get(x, 0)
        return "indep" if c == 0 else ("inc" if c > 0 else "dec")
    if isinstance(t, Constant):
        return "indep"
    if isinstance(t, Variable):
        return "inc" if t.name == x else "indep"
    dl = direction(t.left, x, region)
    dr = direction(t.right, x, region)
    if t.op == "+":
        return _combine_dir(dl, dr)
    if t.op == "-":
        return _combine_dir(dl, _flip_dir(dr))
    # product: need one factor independent of x with a provable sign
    if dl == "indep" and dr == "indep":
        return "indep"
    for const_side, var_dir in ((t.left, dr), (t.right, dl)):
        side_dir = direction(const_side, x, region)
        if side_dir != "indep" or var_dir == "indep":
            continue
        lo, hi = interval(const_side, region)
        if lo is not None and lo >= 0:
            return var_dir
        if hi is not None and hi <= 0:
            return _flip_dir(var_dir)
    return "unknown"


# =====================================================================================
# GUARD NORMALIZATION
# =====================================================================================

_FLIP_OP = {"<": ">", "<=": ">=", ">": "<", ">=": "<="}


def _ceil_div(p: int, q: int) -> int:
    return -((-p) // q)


def _single_var_interval(coeff: int, const: int, op: str) -> Optional[Intv]:
    """Solve coeff*x + const OP 0 over the integers; None when op is != ."""
    if op == "!=":
        return None
    if coeff < 0:
        coeff, const, op = -coeff, -const, _FLIP_OP.get(op, op)
    if op == "=":
        if (-const) % coeff == 0:
            v = (-const) // coeff
            return (v, v)
        return None
    if op == "<":
        return (None, _ceil_div(-const, coeff) - 1)
    if op == "<=":
        return (None, (-const) // coeff)
    if op == ">":
        return ((-const) // coeff + 1, None)
    if op == ">=":
        return (_ceil_div(-const, coeff), None)
    return None


def guard_region(guards: Sequence[Comparison], defs: Dict[str, Term]) -> Region:
    """Intervals implied by single-variable guards, raw and def-expanded."""
    region: Region = {}

    def feed(left: Term, right: Term, op: str) -> None:
        lf = linear_form(ArithExpr("-", left, right))
        if lf is None:
            return
        coeffs, const = lf
        live = {v: c for v, c in coeffs.items() if c != 0}
        if len(live) != 1:
            return
        (v, c) = next(iter(live.items()))
        iv = _single_var_interval(c, const, op)
        if iv is None:
            return
        lo, hi = region.get(v, FULL)
        nlo = iv[0] if lo is None else (lo if iv[0] is None else max(lo, iv[0]))
        nhi = iv[1] if hi is None else (hi if iv[1] is None else min(hi, iv[1]))
        region[v] = (nlo, nhi)

    for g in guards:
        feed(g.left, g.right, g.op)
        feed(subst_defs(g.left, defs), subst_defs(g.right, defs), g.op)
    return region


def guard_effect(guard: Comparison, x: str, defs: Dict[str, Term], region: Region) -> str:
    """How a guard constrains growth of x: none, upper, lower, or breaks."""
    e = ArithExpr("-", subst_defs(guard.left, defs), subst_defs(guard.right, defs))
    d = direction(e, x, region)
    if d == "indep":
        return "none"
    if guard.op in ("=", "!="):
        return "breaks"
    if d == "unknown":
        return "breaks"
    op = guard.op
    if d == "dec":
        op = _FLIP_OP[op]
    # e increases with x; guard is e OP 0
    return "lower" if op in (">", ">=") else "upper"


# =====================================================================================
# RULE COST VIEW
# =====================================================================================


@dataclass(frozen=True)
class RuleCostView:
    rule: Rule
    head_cost: Optional[Term]
    body_costs: Tuple[Tuple[Atom, str], ...]
    defs: Dict[str, Term]
    guards: Tuple[Comparison, ...]
    region: Region


def make_cost_view(rule: Rule, costmap: Dict[str, int], scc: Set[str]) -> RuleCostView:
    defs = _definitions(rule)
    guards = tuple(
        g
        for g in rule.body
        if isinstance(g, Comparison) and not (g.op == "=" and isinstance(g.left, Variable) and g.left.name in defs and defs[g.left.name] is g.right)
    )
    region = guard_region(guards, defs)
    head_pos = costmap.get(rule.head.predicate)
    head_cost = rule.head.args[head_pos] if head_pos is not None else None
    body_costs: List[Tuple[Atom, str]] = []
    for g in rule.body:
        if isinstance(g, Atom) and g.predicate in scc and g.predicate in costmap:
            arg = g.args[costmap[g.predicate]]
            if isinstance(arg, Variable):
                body_costs.append((g, arg.name))
    return RuleCostView(rule, head_cost, tuple(body_costs), defs, guards, region)


# =====================================================================================
# PRESERVATION AND MAPPING CHECKS
# =====================================================================================


def _positivity_guards(view: RuleCostView, summand: str) -> Set[int]:
    """Indices of guards that only lower-bound the summand variable."""
    out: Set[int] = set()
    for i, g in enumerate(view.guards):
        lf = linear_form(ArithExpr("-", g.left, g.right))
        if lf is None:
            continue
        coeffs, const = lf
        live = {v: c for v, c in coeffs.items() if c != 0}
        if set(live) != {summand}:
            continue
        iv = _single_var_interval(live[summand], const, g.op)
        if iv is not None and iv[1] is None and iv[0] is not None:
            out.add(i)
    return out


def _noncost_argument_terms(view: RuleCostView, costmap: Dict[str, int], scc: Set[str]):
    rule = view.rule
    head_pos = costmap.get(rule.head.predicate)
    for i, a in enumerate(rule.head.args):
        if i != head_pos:
            yield a
    for g in rule.body:
        if not isinstance(g, Atom) or g.predicate == RANGE_PREDICATE:
            continue
        cost_pos = costmap.get(g.predicate) if g.predicate in scc else None
        for i, a in enumerate(g.args):
            if cost_pos is None or i != cost_pos:
                yield a


def _structural_flags(
    view: RuleCostView, costmap: Dict[str, int], scc: Set[str]
) -> Tuple[bool, bool, str, str]:
    """Guard and argument conditions shared by all preservation checks.

    Returns (inflation_ok, deflation_ok, inflation_reason, deflation_reason).
    Head cost movement is handled by the callers; this covers guards and the
    stability of non-cost arguments under cost growth.
    """
    inflation_ok, deflation_ok = True, True
    inf_reason = def_reason = ""
    agg = view.rule.aggregate()
    skip: Set[int] = set()
    if agg is not None and agg.kind in ("msum", "sum"):
        skip = _positivity_guards(view, agg.measured[-1])
    for _, x in view.body_costs:
        for i, g in enumerate(view.guards):
            if i in skip:
                continue
            eff = guard_effect(g, x, view.defs, view.region)
            if eff == "upper" and inflation_ok:
                inflation_ok, inf_reason = False, f"guard {g!r} caps {x} from above"
            elif eff == "lower" and deflation_ok:
                deflation_ok, def_reason = False, f"guard {g!r} caps {x} from below"
            elif eff == "breaks":
                if inflation_ok:
                    inflation_ok, inf_reason = False, f"guard {g!r} pins {x}"
                if deflation_ok:
                    deflation_ok, def_reason = False, f"guard {g!r} pins {x}"
        for a in _noncost_argument_terms(view, costmap, scc):
            expanded = subst_defs(a, view.defs) if isinstance(a, (Variable, ArithExpr)) else a
            if isinstance(a, Constant):
                continue
            if x in set(_term_vars(expanded)):
                reason = f"argument {a!r} depends on the cost {x}"
                if inflation_ok:
                    inflation_ok, inf_reason = False, reason
                if deflation_ok:
                    deflation_ok, def_reason = False, reason
    return inflation_ok, deflation_ok, inf_reason, def_reason


def check_inflation_preserving(
    rule: Rule, costmap: Dict[str, int], scc: Set[str]
) -> Tuple[str, str]:
    """Classify a rule as 'inflation', 'deflation', 'both', or 'neither'.

    A rule preserves inflation when raising a recursive body cost can only
    raise (or keep) the derivable head costs, and preserves deflation

    symmetrically. Exit rules are vacuously both.
    """
    view = make_cost_view(rule, costmap, scc)
    if not view.body_costs:
        return "both", "no recursive cost inputs"
    if view.head_cost is None:
        return "neither", f"{rule.head.predicate} has no cost argument"

    agg = rule.aggregate()
    result_var = agg.result if agg is not None and agg.kind in COUNTING_KINDS else None
    head_is_result = (
        result_var is not None
        and isinstance(view.head_cost, Variable)
        and view.head_cost.name == result_var
    )

    inflation_ok, deflation_ok, inf_reason, def_reason = _structural_flags(view, costmap, scc)

    if head_is_result:
        if deflation_ok:
            deflation_ok, def_reason = False, f"{agg.kind} results only grow"
        witness_parts = set(agg.group_by)
        witness_parts |= set(agg.measured[:-1] if agg.kind in ("msum", "sum") else agg.measured)
        for _, x in view.body_costs:
            if x in witness_parts and inflation_ok:
                inflation_ok = False
                inf_reason = f"cost {x} selects the aggregated witnesses"
        if agg.kind in ("msum", "sum") and inflation_ok:
            summand = agg.measured[-1]
            lo, _ = view.region.get(summand, FULL)
            if lo is None or lo < 1:
                lo, _ = interval(subst_defs(Variable(summand), view.defs), view.region)
            if lo is None or lo < 1:
                inflation_ok = False
                inf_reason = f"summand {summand} is not provably positive"
    else:
        head_expanded = subst_defs(view.head_cost, view.defs)
        for _, x in view.body_costs:
            d = direction(head_expanded, x, view.region)
            if d not in ("inc", "indep"):
                reason = f"head cost may fall as {x} grows"
                if inflation_ok:
                    inflation_ok, inf_reason = False, reason
                if deflation_ok:
                    deflation_ok, def_reason = False, reason
            if agg is not None and x in set(agg.group_by) | set(agg.measured):
                reason = f"cost {x} selects the aggregated witnesses"
                if inflation_ok:
                    inflation_ok, inf_reason = False, reason
                if deflation_ok:
                    deflation_ok, def_reason = False, reason

    if inflation_ok and deflation_ok:
        return "both", "cost flows through without caps"
    if inflation_ok:
        return "inflation", def_reason
    if deflation_ok:
        return "deflation", inf_reason
    return "neither", inf_reason or def_reason


def check_ascending(rule: Rule, costmap: Dict[str, int], scc: Set[str]) -> Tuple[str, str]:
    """Classify a rule as an 'ascending'/'descending'/'both'/'neither' mapping.

    Ascending means the head cost provably never falls below any recursive
    body cost, on top of the same structural conditions inflation needs;
    without those a pushed bound could cut tuples the body still requires.
    """
    view = make_cost_view(rule, costmap, scc)
    if not view.body_costs:
        return "both", "no recursive cost inputs"
    if view.head_cost is None:
        return "neither", f"{rule.head.predicate} has no cost argument"
    agg = rule.aggregate()
    if agg is not None and agg.kind in COUNTING_KINDS:
        if isinstance(view.head_cost, Variable) and view.head_cost.name == agg.result:
            return "neither", "aggregate result is not comparable to body costs"

    up = down = True
    reason_up = reason_down = ""
    head_expanded = subst_defs(view.head_cost, view.defs)
    for _, x in view.body_costs:
        lo, hi = interval(ArithExpr("-", head_expanded, Variable(x)), view.region)
        if lo is None or lo < 0:
            if up:
                up, reason_up = False, f"head cost may drop below {x}"
        if hi is None or hi > 0:
            if down:
                down, reason_down = False, f"head cost may exceed {x}"

    inflation_ok, deflation_ok, inf_reason, def_reason = _structural_flags(view, costmap, scc)
    if up and not inflation_ok:
        up, reason_up = False, inf_reason
    if down and not deflation_ok:
        down, reason_down = False, def_reason

    if up and down:
        return "both", "head cost equals body cost"
    if up:
        return "ascending", reason_down
    if down:
        return "descending", reason_up
    return "neither", reason_up or reason_down


# =====================================================================================
# COMPOSITION (UNFOLDING A COMPANION PREDICATE)
# =====================================================================================


def _rename_rule(rule: Rule, suffix: str) -> Rule:
    mapping = {v: f"{v}__{suffix}" for v in set(rule.head.variables()) | set(rule.body_variables())}

    def sub_term(t: Term) -> Term:
        if isinstance(t, Variable):
            return Variable(mapping.get(t.name, t.name))
        if isinstance(t, ArithExpr):
            return ArithExpr(t.op, sub_term(t.left), sub_term(t.right))
        return t

    def sub_goal(g: Goal) -> Goal:
        if isinstance(g, Atom):
            return Atom(g.predicate, tuple(sub_term(a) for a in g.args))
        if isinstance(g, Comparison):
            return Comparison(g.op, sub_term(g.left), sub_term(g.right))
        if isinstance(g, Negated):
            return Negated(Atom(g.atom.predicate, tuple(sub_term(a) for a in g.atom.args)))
        return AggregateGoal(
            g.kind,
            tuple(mapping.get(v, v) for v in g.group_by),
            tuple(mapping.get(v, v) for v in g.measured),
            mapping.get(g.result, g.result) if g.result is not None else None,
        )

    head = Atom(rule.head.predicate, tuple(sub_term(a) for a in rule.head.args))
    return Rule(rule.id, head, tuple(sub_goal(g) for g in rule.body), rule.extremum)


def _unify_args(a: Tuple[Term, ...], b: Tuple[Term, ...]) -> Optional[Dict[str, Term]]:
    subst: Dict[str, Term] = {}

    def walk(t: Term) -> Term:
        while isinstance(t, Variable) and t.name in subst:
            t = subst[t.name]
        return t

    for x, y in zip(a, b):
        x, y = walk(x), walk(y)
        if isinstance(x, Variable):
            if not (isinstance(y, Variable) and y.name == x.name):
                subst[x.name] = y
        elif isinstance(y, Variable):
            subst[y.name] = x
        elif isinstance(x, Constant) and isinstance(y, Constant):
            if x.value != y.value:
                return None
        else:
            return None
    return subst


def _apply_subst_goal(g: Goal, subst: Dict[str, Term]) -> Optional[Goal]:
    def walk_name(v: str) -> Optional[str]:
        t = subst.get(v)
        steps = 0
        while isinstance(t, Variable):
            v = t.name
            t = subst.get(v)
            steps += 1
            if steps > 32:
                break
        if t is None:
            return v
        return None  # bound to a constant or expression

    def sub_term(t: Term) -> Term:
        if isinstance(t, Variable):
            seen = 0
            while isinstance(t, Variable) and t.name in subst:
                t = subst[t.name]
                seen += 1
                if seen > 32:
                    break
            return t
        if isinstance(t, ArithExpr):
            return ArithExpr(t.op, sub_term(t.left), sub_term(t.right))
        return t

    if isinstance(g, Atom):
        return Atom(g.predicate, tuple(sub_term(a) for a in g.args))
    if isinstance(g, Comparison):
        return Comparison(g.op, sub_term(g.left), sub_term(g.right))
    if isinstance(g, Negated):
        return Negated(Atom(g.atom.predicate, tuple(sub_term(a) for a in g.atom.args)))
    group = tuple(walk_name(v) for v in g.group_by)
    measured = tuple(walk_name(v) for v in g.measured)
    result = walk_name(g.result) if g.result is not None else None
    if any(v is None for v in group) or any(v is None for v in measured):
        return None
    if g.result is not None and result is None:
        return None
    return AggregateGoal(g.kind, group, measured, result)  # type: ignore[arg-type]


def compose_procedure(program: Program, p0: str, companion: str) -> Optional[List[Rule]]:
    """Unfold `companion` goals inside the rules defining p0.

    Applicable when the recursion runs p0 -> companion -> p0 and the
    companion has plain conjunctive rules. Returns the composed rules or
    None when the shape does not allow it.
    """
    companion_rules = program.rules_defining(companion)
    if not companion_rules:
        return None
    recursive_defs = [
        r
        for r in companion_rules
        if any(isinstance(g, Atom) and g.predicate == p0 for g in r.body)
    ]
    if len(recursive_defs) != 1:
        return None
    if any(r.aggregate() is not None or r.extremum is not None for r in companion_rules):
        return None
    composed: List[Rule] = []
    for k, r in enumerate(program.rules_defining(p0)):
        goals = list(r.body)
        slots = [i for i, g in enumerate(goals) if isinstance(g, Atom) and g.predicate == companion]
        if not slots:
            composed.append(r)
            continue
        if len(slots) != 1:
            return None
        slot = slots[0]
        for q_rule in companion_rules:
            fresh = _rename_rule(q_rule, f"u{k}")
            subst = _unify_args(fresh.head.args, goals[slot].args)  # type: ignore[arg-type]
            if subst is None:
                continue
            new_goals: List[Goal] = []
            ok = True
            for i, g in enumerate(goals):
                src = list(fresh.body) if i == slot else [g]
                for s in src:
                    applied = _apply_subst_goal(s, subst)
                    if applied is None:
                        ok = False
                        break
                    new_goals.append(applied)
                if not ok:
                    break
            head = _apply_subst_goal(r.head, subst)
            if ok and isinstance(head, Atom):
                composed.append(Rule(f"{r.id}+{fresh.id}", head, tuple(new_goals), r.extremum))
    return composed or None


# =====================================================================================
# CLASSIFICATION
# =====================================================================================


@dataclass(frozen=True)
class Rejection:
    conjunct: Union[Bound, Extremum]
    condition: str
    rule_id: str

    def __repr__(self) -> str:
        return f"cannot push {self.conjunct!r}: {self.condition}"


@dataclass(frozen=True)
class PremVerdict:
    program: Program
    constraint: Constraint
    costmap: Dict[str, int]
    plan: Tuple[Tuple[Union[Bound, Extremum], str], ...]
    rejection: Optional[Rejection]
    composed: bool
    procedure: Tuple[Rule, ...]  # the unrewritten working rules, composed if needed

    @property
    def approved(self) -> bool:
        return self.rejection is None

    @property
    def procedure_rule_ids(self) -> Tuple[str, ...]:
        return tuple(r.id for r in self.procedure)


_EXTREMUM_NEEDS = {"min": ("deflation", "min-deflation"), "max": ("inflation", "max-inflation")}
_BOUND_NEEDS = {"upper": ("ascending", "upper-ascending"), "lower": ("descending", "lower-descending")}


def classify_premability(
    program: Program, constraint: Constraint, graph: Optional[DependencyGraph] = None
) -> PremVerdict:
    """Decide, conjunct by conjunct, whether a constraint can be pushed.

    Bounds are checked before extrema, and each approved conjunct is applied
    to the working copy of the procedure before the next check, so earlier
    pushes can disqualify later ones. A rejection names the failed condition
    and the smallest offending rule id.
    """
    if graph is None:
        graph = build_dependency_graph(program)
    p0 = constraint_predicate(constraint)
    conjuncts = constraint_conjuncts(constraint)

    if p0 not in graph.scc_of:
        raise NoCost(f"{p0} is not defined in the program")
    if not graph.is_recursive(p0):
        return PremVerdict(
            program,
            constraint,
            {},
            (),
            Rejection(conjuncts[0], f"{p0} is not recursive, nothing to push into", "-"),
            False,
            (),
        )

    scc = set(graph.scc_members(p0))
    composed = False
    if len(scc) == 1:
        working = list(program.rules_defining(p0))
    elif len(scc) == 2:
        companion = next(p for p in scc if p != p0)
        unfolded = compose_procedure(program, p0, companion)
        if unfolded is None:
            raise NoCost(
                f"recursion through {companion} cannot be composed into {p0}"
            )
        working = unfolded
        scc = {p0}
        composed = True
    else:
        working = [r for r in program.rules if r.head.predicate in scc]

    seed_pos = conjuncts[0].cost
    costmap = find_cost_arguments(working, scc, p0, seed_pos)
    procedure = tuple(working)
    p0_arity = next(r for r in working if r.head.predicate == p0).head.arity

    plan: List[Tuple[Union[Bound, Extremum], str]] = []
    rejection: Optional[Rejection] = None
    for conjunct in conjuncts:
        if isinstance(conjunct, Bound):
            if composed:
                rejection = Rejection(
                    conjunct, "bound push through a composed recursion is not supported", working[0].id
                )
                break
            need, label = _BOUND_NEEDS[conjunct.kind]
            check = check_ascending
        else:
            rest = tuple(i for i in range(p0_arity) if i != conjunct.cost)
            if tuple(sorted(conjunct.group_by)) != rest:
                # the working set keys on every non-cost argument; a narrower
                # group would merge keys the constraint keeps apart
                rejection = Rejection(
                    conjunct, "the group must cover every argument except the cost", "-"
                )
                break
            need, label = _EXTREMUM_NEEDS[conjunct.kind]
            check = check_inflation_preserving
        failures = []
        passed = []
        for r in working:
            verdict, reason = check(r, costmap, scc)
            if verdict in (need, "both"):
                passed.append(r.id)
            else:
                failures.append((r.id, reason))
        if failures:
            rid, reason = min(failures)
            condition = {
                "ascending": "not an ascending mapping",
                "descending": "not a descending mapping",
                "inflation": "not inflation-preserving",
                "deflation": "not deflation-preserving",
            }[need] + f": {reason}"
            rejection = Rejection(conjunct, condition, rid)
            break
        plan.append((conjunct, f"{label} ({need}-safe: {', '.join(passed)})"))
        working = [_apply_conjunct(r, conjunct, costmap) for r in working]

    return PremVerdict(program, constraint, costmap, tuple(plan), rejection, composed, procedure)


def _apply_conjunct(rule: Rule, conjunct: Union[Bound, Extremum], costmap: Dict[str, int]) -> Rule:
    pos = costmap[rule.head.predicate]
    if isinstance(conjunct, Bound):
        guard = Comparison(conjunct.op, rule.head.args[pos], Constant(conjunct.limit))
        return Rule(rule.id, rule.head, rule.body + (guard,), rule.extremum)
    return Rule(rule.id, rule.head, rule.body, HeadExtremum(conjunct.kind, False, pos))


def constraint_from_annotations(program: Program, graph: Optional[DependencyGraph] = None) -> Optional[Constraint]:
    """Recover the constraint a pre-pushed program enforces via head extrema."""
    if graph is None:
        graph = build_dependency_graph(program)
    for r in program.rules:
        if r.extremum is None or r.extremum.monotonic:
            continue
        pred = r.head.predicate
        group = tuple(i for i in range(len(r.head.args)) if i != r.extremum.cost)
        return Extremum(r.extremum.kind, pred, group, r.extremum.cost)
    return None
