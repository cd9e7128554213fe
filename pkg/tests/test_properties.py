"""Property tests for the algebraic laws the evaluator depends on."""
from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as st

import premlog as P
from premlog import analysis
from premlog.engine import ExtremaIndex, apply_constraint, eval_aggregate
from premlog.model import Bound, Extremum, make_constraint

from conftest import random_positive_program

KEYS = st.sampled_from(["a", "b", "c", "d"])
COSTS = st.integers(min_value=-20, max_value=50)


def union_interp(i1, i2):
    out = {p: set(ts) for p, ts in i1.items()}
    for p, ts in i2.items():
        out.setdefault(p, set()).update(ts)
    return out


# ===== AGGREGATE LADDERS ======================================================


@given(st.sets(st.integers(min_value=0, max_value=1000), min_size=0, max_size=20))
def test_mcount_is_the_full_ladder(witnesses):
    rows = [((), (w,)) for w in witnesses]
    got = eval_aggregate("mcount", rows)
    if not witnesses:
        assert got == {}
    else:
        assert got == {(): set(range(1, len(witnesses) + 1))}


@given(
    st.dictionaries(
        st.tuples(KEYS),
        st.sets(st.integers(min_value=0, max_value=100), min_size=1, max_size=8),
        min_size=1,
        max_size=4,
    )
)
def test_count_is_max_of_mcount(groups):
    rows = [(g, (w,)) for g, ws in groups.items() for w in ws]
    ladder = eval_aggregate("mcount", rows)
    total = eval_aggregate("count", rows)
    assert total == {g: max(steps) for g, steps in ladder.items()}
    assert total == {g: len(ws) for g, ws in groups.items()}


@given(
    st.dictionaries(
        KEYS,
        st.lists(st.integers(min_value=1, max_value=20), min_size=1, max_size=4),
        min_size=1,
        max_size=5,
    )
)
def test_sum_is_max_of_msum_on_positive_rows(per_witness):
    # several rows may share a witness prefix; only the best summand counts
    rows = [((), (w, s)) for w, ss in per_witness.items() for s in ss]
    expected = sum(max(ss) for ss in per_witness.values())
    assert eval_aggregate("sum", rows) == {(): expected}
    ladder = eval_aggregate("msum", rows)
    assert ladder == {(): set(range(1, expected + 1))}
    assert max(ladder[()]) == expected


# ===== CONSTRAINT APPLICATION =================================================


def interps(draw_pairs):
    return {"p": set(draw_pairs)}


CONSTRAINTS = st.sampled_from(
    [
        make_constraint([Bound("upper", "p", 1, "<", 25)]),
        make_constraint([Bound("lower", "p", 1, ">=", 0)]),
        make_constraint([Extremum("min", "p", (0,), 1)]),
        make_constraint([Extremum("max", "p", (), 1)]),
        make_constraint(
            [Bound("upper", "p", 1, "<=", 30), Extremum("min", "p", (0,), 1)]
        ),
    ]
)

PAIRS = st.sets(st.tuples(KEYS, COSTS), max_size=25)


@given(CONSTRAINTS, PAIRS)
def test_constraint_application_is_idempotent(constraint, pairs):
    i = interps(pairs)
    once = apply_constraint(constraint, i)
    assert apply_constraint(constraint, once) == once


@given(CONSTRAINTS, PAIRS, PAIRS)
def test_constraint_preaggregates_over_union(constraint, pairs1, pairs2):
    # constraining each part first must not change the constrained union
    i1, i2 = interps(pairs1), interps(pairs2)
    whole = apply_constraint(constraint, union_interp(i1, i2))
    parts = apply_constraint(
        constraint,
        union_interp(apply_constraint(constraint, i1), apply_constraint(constraint, i2)),
    )
    assert whole == parts


@given(CONSTRAINTS, PAIRS)
def test_constraint_only_removes_tuples(constraint, pairs):
    i = interps(pairs)
    out = apply_constraint(constraint, i)
    for pred, tuples in out.items():
        assert tuples <= i.get(pred, set())


# ===== WORKING-SET INDEX ======================================================


@given(
    st.sampled_from(["min", "max"]),
    st.lists(st.tuples(KEYS, st.integers(min_value=-50, max_value=50)), max_size=40),
)
def test_extrema_index_keeps_one_best_per_key(kind, inserts):
    idx = ExtremaIndex(kind, 1)
    admitted = displaced = 0
    for t in inserts:
        cs = idx.insert(t)
        admitted += 1 if cs.inserted else 0
        displaced += 1 if cs.displaced is not None else 0
    pick = min if kind == "min" else max
    best_value = {}
    for k, v in inserts:
        best_value[(k,)] = v if (k,) not in best_value else pick(best_value[(k,)], v)
    assert set(idx.best) == set(best_value)
    for key, t in idx.best.items():
        assert t[1] == best_value[key]
    assert admitted - displaced == len(idx.best)


# ===== SYNTAX ROUND-TRIP ======================================================


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_parse_format_round_trip(seed):
    text = random_positive_program(seed)
    p1 = P.parse_program(text)
    p2 = P.parse_program(P.format_program(p1))
    assert p2.rules == p1.rules
    assert p2.facts == p1.facts


# ===== STRUCTURAL CHECKS ======================================================

GUARDS = st.sets(
    st.sampled_from(["Dy>Dx", "Dy>=Dx", "Dy>=0", "Dxy>0", "Dy<100", "Dy!=7"]),
    max_size=3,
)


@given(GUARDS)
def test_ascending_rules_also_preserve_inflation(guards):
    body = "p(X,Dx), e(X,Y,Dxy), Dy=Dx+Dxy"
    for g in sorted(guards):
        body += f", {g}"
    prog = P.parse_program(f"r1: p(Y,Dy) :- {body}.")
    rule = prog.rules[0]
    asc, _ = analysis.check_ascending(rule, {"p": 1}, {"p"})
    inf, _ = analysis.check_inflation_preserving(rule, {"p": 1}, {"p"})
    if asc in ("ascending", "both"):
        assert inf in ("inflation", "both")


# ===== EVALUATION MODES =======================================================


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_modes_agree_on_generated_programs(seed):
    text = random_positive_program(seed)
    ra = P.run_program(P.parse_program(text), P.EvalOptions(mode="naive"))
    rb = P.run_program(P.parse_program(text), P.EvalOptions(mode="seminaive"))
    assert ra.db == rb.db
