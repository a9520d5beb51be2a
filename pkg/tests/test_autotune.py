import csv
import io

import pytest
from hypothesis import given, settings, strategies as st

from xform import corpus, parse_payload
from xform.autotune import (
    INF, Evaluator, Expr, SpaceError, TuneTrace, baseline_cost, parse_space, template_names, tune,
)


@pytest.mark.parametrize("text, env, value", [
    ("8 %% t == 0", {"t": 4}, 1),
    ("8 % t == 0", {"t": 3}, 0),
    ("8 % t == 0", {"t": 0}, 1),
    ("n / 0", {"n": 5}, 0),
    ("a + b * 2 - 1", {"a": 1, "b": 3}, 6),
    ("a < b && b <= 4 || !a", {"a": 1, "b": 4}, 1),
    ("!(a != 0)", {"a": 0}, 1),
    ("1 < a < 3", {"a": 2}, 1),
    ("where(v == 1, t % 8 == 0)", {"v": 0, "t": 3}, 1),
    ("where(v == 1, t % 8 == 0)", {"v": 1, "t": 3}, 0),
    ("-a", {"a": 2}, -2),
])
def test_expr_eval(text, env, value):
    assert Expr.parse(text).eval(env) == value


@pytest.mark.parametrize("text", ["a +", "f(a)", "where(a)", "a.b", "1.5 > a", "'x'"])
def test_expr_rejects(text):
    with pytest.raises(SpaceError):
        Expr.parse(text)


def test_expr_unknown_name():
    with pytest.raises(SpaceError, match="unknown name 'z'"):
        Expr.parse("z > 1").eval({})


def test_parse_space():
    space = parse_space(corpus.TUNE_SPACE)
    assert space.dims == {"B": 4, "M": 8, "N": 8, "K": 8}
    assert space.names == ["tile0", "tile1", "tile2", "tile3", "vect"]
    assert space.params[1].hi == 8
    # tile0 in {0,1,2,4}, tile1..3 in {0,1,2,4,8}, vect=1 only with tile3 in {0, 8}
    assert len(space.feasible_points()) == 4 * 5 * 5 * (5 + 2)
    assert not space.feasible({"tile0": 3, "tile1": 0, "tile2": 0, "tile3": 0, "vect": 0})
    with pytest.raises(SpaceError, match="lacks"):
        space.feasible({"tile0": 0})


@pytest.mark.parametrize("text, needle", [
    ("x: {range:[0]}", "range needs"),
    ("x: {range:[0, 4], constraints:[y > 1]}", "unknown name 'y'"),
    ("dims: A=two\nx: {range:[0, 1]}", "bad dimension"),
    ("x = 4", "cannot parse"),
    ("# nothing\n", "no parameters"),
])
def test_space_errors(text, needle):
    with pytest.raises(SpaceError, match=needle):
        parse_space(text)


def test_template_names():
    assert template_names(corpus.TUNE_TEMPLATE) == ["tile0", "tile1", "tile2", "tile3", "vect"]


def test_trace_csv():
    t = TuneTrace()
    t.record({"a": 1, "b": 2}, 5.0)
    t.record({"a": 2, "b": 2}, INF)
    t.record({"a": 3, "b": 2}, 4.0)
    rows = list(csv.reader(io.StringIO(t.to_csv())))
    assert rows == [["iter", "assignment", "cost", "best"], ["0", "a=1;b=2", "5.0", "5.0"],
                    ["1", "a=2;b=2", "inf", "5.0"], ["2", "a=3;b=2", "4.0", "4.0"]]


SMALL = "dims: N=12\nx: {range:[0, N], constraints:[N % x == 0]}\ny: {range:[0, 6]}\n"
TEMPLATE = "$x $y"


def fake_cost(a):
    return float((a["x"] - 5) ** 2 + abs(a["y"] - 2) * 3 + (a["x"] == 0) * 40)


def test_tune_argument_checks():
    space = parse_space(SMALL)
    with pytest.raises(SpaceError, match="budget"):
        tune(TEMPLATE, space, None, budget=0, evaluator=fake_cost)
    with pytest.raises(SpaceError, match="do not match"):
        tune("$x", space, None, budget=5, evaluator=fake_cost)
    with pytest.raises(SpaceError, match="unknown strategy"):
        tune(TEMPLATE, space, None, budget=5, strategy="anneal", evaluator=fake_cost)
    with pytest.raises(SpaceError, match="no feasible"):
        tune("$x", parse_space("x: {range:[1, 3], constraints:[x > 5]}"), None, budget=5, evaluator=fake_cost)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["exhaustive", "random", "coorddesc"]), st.integers(1, 60), st.integers(0, 10_000))
def test_tune_invariants(strategy, budget, seed):
    space = parse_space(SMALL)
    best, trace = tune(TEMPLATE, space, None, budget, strategy=strategy, seed=seed, evaluator=fake_cost)
    keys = [tuple(e.assignment.values()) for e in trace.evals]
    assert len(keys) == len(set(keys)) <= budget
    assert all(space.feasible(e.assignment) for e in trace.evals)
    assert all(a.best >= b.best for a, b in zip(trace.evals, trace.evals[1:]))
    assert fake_cost(best) == trace.evals[-1].best == min(e.cost for e in trace.evals)
    again = tune(TEMPLATE, space, None, budget, strategy=strategy, seed=seed, evaluator=fake_cost)[1]
    assert [e.assignment for e in again.evals] == [e.assignment for e in trace.evals]


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["random", "coorddesc"]), st.integers(0, 10_000))
def test_full_budget_finds_optimum(strategy, seed):
    space = parse_space(SMALL)
    n = len(space.feasible_points())
    best, _ = tune(TEMPLATE, space, None, n, strategy=strategy, seed=seed, evaluator=fake_cost)
    assert fake_cost(best) == min(fake_cost(a) for a in space.feasible_points())


def test_evaluator_scores_real_scripts():
    module = parse_payload(corpus.batch_matmul(1, 4, 4, 8))
    ev = Evaluator(corpus.TUNE_TEMPLATE, module)
    plain = ev({"tile0": 0, "tile1": 0, "tile2": 0, "tile3": 0, "vect": 0})
    assert plain == baseline_cost(module)
    assert ev({"tile0": 0, "tile1": 0, "tile2": 0, "tile3": 8, "vect": 1}) < plain
    # the 4-iteration point loop is vectorized, which still beats the scalar nest
    assert ev({"tile0": 0, "tile1": 0, "tile2": 0, "tile3": 4, "vect": 1}) < plain
    failing = corpus.match_script(["%v = param.constant {value = $v} : !transform.param", "transform.assert(%v)"])
    assert Evaluator(failing, module)({"v": 0}) == INF
    assert Evaluator(failing, module)({"v": 1}) == plain
