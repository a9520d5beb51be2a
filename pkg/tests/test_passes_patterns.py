import pytest
from hypothesis import given, settings, strategies as st

from xform import DefiniteFailure, apply_script, corpus, execute, parse_payload, parse_transform, results_match
from xform import structurally_equal
from xform.passes import (
    CANONICAL, PATTERNS, PassFailure, apply_patterns, format_options, parse_options, parse_pipeline,
    pipeline_to_transform, run_pipeline,
)
from xform.payload import IRError, verify_module


def test_parse_nested_pipeline():
    nodes = parse_pipeline("builtin.module(canonicalize, func.func(instrument-accumulate{op=arith.addi}), "
                           "convert-scf-to-cf)")
    assert [n.name for n in nodes] == ["canonicalize", "func.func", "convert-scf-to-cf"]
    assert nodes[1].is_anchor and nodes[1].children[0].options == {"op": "arith.addi"}
    assert str(nodes[1]) == "func.func(instrument-accumulate{op=arith.addi})"


def test_bare_list_and_empty_pipeline():
    assert [n.name for n in parse_pipeline(" a-pass , b-pass ")] == ["a-pass", "b-pass"]
    assert parse_pipeline("") == []


@pytest.mark.parametrize("text, needle", [
    ("a{op=x", "unterminated option block"),
    ("a) b", "unexpected trailing text"),
    ("func.func(a, b", "expected ')'"),
    ("a, , b", "expected a pass or anchor name"),
    ("a{novalue}", "malformed pass option"),
])
def test_pipeline_syntax_errors(text, needle):
    with pytest.raises(IRError) as info:
        parse_pipeline(text)
    assert needle in info.value.diagnostic.message


def test_unknown_pass_and_option():
    with pytest.raises(DefiniteFailure, match="unknown pass 'nope'"):
        run_pipeline(parse_payload(corpus.NEST_PAYLOAD), "nope")
    with pytest.raises(DefiniteFailure, match="has no option 'x'"):
        run_pipeline(parse_payload(corpus.NEST_PAYLOAD), "canonicalize{x=1}")


@pytest.mark.parametrize("text, expected", [("", {}), ("a=1", {"a": "1"}), (" a = 1 , b=c.d ", {"a": "1", "b": "c.d"})])
def test_options_roundtrip(text, expected):
    opts = parse_options(text)
    assert opts == expected
    assert parse_options(format_options(opts)) == opts


@pytest.mark.parametrize("pipeline", [
    ",".join(corpus.FIXED_LOWERING),
    "func.func(canonicalize, instrument-accumulate{op=arith.addi}), convert-scf-to-cf",
])
def test_script_form_matches_direct_run(pipeline):
    direct = run_pipeline(parse_payload(corpus.CHUNK42_DYNAMIC), pipeline)
    via = parse_payload(corpus.CHUNK42_DYNAMIC)
    apply_script(parse_transform(pipeline_to_transform(pipeline)), via)
    assert structurally_equal(direct, via)


def test_fixed_lowering_preserves_results():
    args = corpus.matmul_args(1, 2, 3, 2)
    text = corpus.batch_matmul(1, 2, 3, 2)
    lowered = run_pipeline(parse_payload(text), ",".join(corpus.FIXED_LOWERING))
    assert verify_module(lowered) == []
    assert all(op.dialect in ("builtin", "llvmlite") for op in lowered.walk())
    assert results_match(execute(parse_payload(text), "main", args)[0], execute(lowered, "main", args)[0])


def test_instrument_accumulate_checks_level():
    with pytest.raises(PassFailure, match="abstraction level"):
        run_pipeline(parse_payload(corpus.NEST_PAYLOAD), "instrument-accumulate{op=llvmlite.add}")
    with pytest.raises(PassFailure, match="requires the 'op' option"):
        run_pipeline(parse_payload(corpus.NEST_PAYLOAD), "instrument-accumulate")
    m = run_pipeline(parse_payload(corpus.NEST_PAYLOAD), "instrument-accumulate{op=arith.addi}")
    assert sum(1 for op in m.walk() if op.name == "arith.addi") == 6


@pytest.mark.parametrize("name, fired", [
    ("add_of_zero", 3), ("mul_of_one", 3), ("fold_constant_arith", 4), ("cast_of_cast_cancel", 2),
    ("subview_identity_fold", 1), ("cmpi_const_fold", 2), ("erase_dead_pure", 2), ("regress_hoist_blocker", 7),
])
def test_each_pattern_fires_and_preserves_results(name, fired):
    text = corpus.random_pattern_payload(0)
    m = parse_payload(text)
    assert apply_patterns(m, [name]) == fired
    assert verify_module(m) == []
    args = corpus.pattern_args(0)
    assert results_match(execute(parse_payload(text), "main", args)[0], execute(m, "main", args)[0])


def test_regression_pattern_raises_cost():
    text = corpus.random_pattern_payload(0)
    m = parse_payload(text)
    apply_patterns(m, ["regress_hoist_blocker"])
    args = corpus.pattern_args(0)
    assert execute(m, "main", args)[1].weighted_cost > execute(parse_payload(text), "main", args)[1].weighted_cost


def test_unknown_pattern_and_cap():
    m = parse_payload(corpus.random_pattern_payload(0))
    with pytest.raises(DefiniteFailure, match="unknown pattern"):
        apply_patterns(m, ["nope"])
    with pytest.raises(DefiniteFailure, match="did not converge within 2 rewrites"):
        apply_patterns(m, CANONICAL, cap=2)


def test_pattern_table():
    assert len(PATTERNS) == 8 and "regress_hoist_blocker" not in CANONICAL
    assert all(p.measure for p in PATTERNS.values())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.permutations(CANONICAL))
def test_canonical_patterns_shrink_and_converge(seed, order):
    text = corpus.random_pattern_payload(seed)
    m = parse_payload(text)
    before = sum(1 for _ in m.walk())
    apply_patterns(m, order)
    assert sum(1 for _ in m.walk()) <= before
    assert apply_patterns(m, order) == 0
    args = corpus.pattern_args(seed)
    assert results_match(execute(parse_payload(text), "main", args)[0], execute(m, "main", args)[0])
