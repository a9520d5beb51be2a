import json

import pytest
from hypothesis import given, settings, strategies as st

from xform import InterpError, apply_script, corpus, parse_payload, parse_transform, print_payload
from xform.interp import Interpreter
from xform.script import (
    OperandSpec, ParamValue, ResultSpec, ScriptError, TransformRegistry, effects_of, register_transform,
    transform_registry,
)

HEAD = "transform.named_sequence @transform_main {\n^bb0(%root: !transform.any_op):\n"
LOOP = '!transform.op<"scf.for">'
OUTER = f'  %outer = structured.match(%root) {{ops = ["scf.for"], outermost = true}} : {LOOP}\n'


def script(body, extra=""):
    return parse_transform(extra + HEAD + body + "}\n")


def nest():
    return parse_payload(corpus.NEST_PAYLOAD)


@pytest.mark.parametrize("body, needle", [
    ("  foo.bar(%root)\n", "not registered"),
    ("  %p = param.constant {value = 3} : !transform.param\n  loop.unroll(%p) {factor = 0}\n", "must be a handle"),
    ('  %f = structured.match(%root) {ops = ["func.func"]} : !transform.op<"func.func">\n'
     "  loop.unroll(%f) {factor = 0}\n", "handle constraint mismatch"),
    ("  transform.include(%root) {callee = @nope}\n", "undefined sequence @nope"),
    (f'  %l = structured.match(%root) {{ops = ["scf.for"]}} : {LOOP}\n'
     f"  %n = loop.interchange(%l) {{permutation = [0, 0]}} : {LOOP}\n", "not a permutation"),
    (f'  %l = structured.match(%root) {{ops = ["scf.for"]}} : {LOOP}\n'
     f"  %a, %b = loop.tile(%l) {{tile_sizes = [-1]}} : ({LOOP}, {LOOP})\n", "non-negative"),
])
def test_script_verification(body, needle):
    with pytest.raises(ScriptError) as info:
        script(body)
    d = info.value.diagnostic
    assert needle in d.message and d.loc[0] >= 3


def test_missing_entry():
    s = parse_transform("transform.named_sequence @other {\n^bb0(%root: !transform.any_op):\n}\n")
    with pytest.raises(ScriptError, match="no @transform_main"):
        apply_script(s, nest())


def test_extern_params():
    text = ("transform.named_sequence @transform_main {\n^bb0(%root: !transform.any_op, %n: !transform.param):\n"
            + OUTER + "  loop.unroll(%outer, %n)\n}\n")
    s = parse_transform(text)
    with pytest.raises(InterpError, match="no value supplied for script parameter %n"):
        apply_script(s, nest())
    m = nest()
    apply_script(s, m, extern_params={"n": 2})
    assert sum(1 for op in m.walk() if op.name == "scf.for") == 3  # the outer loop plus two inner copies


def test_trace_records_handles():
    res = apply_script(parse_transform(corpus.HOIST_TILE_SCRIPT), nest())
    assert [t.op for t in res.trace][:2] == ["structured.match", "loop.hoist_invariants"]
    rec = json.loads(res.trace[3].to_json())
    assert rec["op"] == "param.constant" and rec["result_handles"] == [{"param": [8]}]
    assert all(t.status == "ok" for t in res.trace)


def test_silenceable_failure_escapes_at_top_level():
    with pytest.raises(InterpError) as info:
        apply_script(script(OUTER + f"  %a, %b = loop.split(%outer) {{at = 99}} : ({LOOP}, {LOOP})\n"), nest())
    assert info.value.severity == "silenceable" and info.value.loc == (4, 3)
    assert info.value.payload_loc is not None


def test_alternatives_first_success_wins():
    body = OUTER + ("  transform.alternatives {\n"
                    "    loop.unroll(%outer) {factor = 3}\n"
                    "  }, {\n"
                    "    loop.unroll(%outer) {factor = 2}\n"
                    "  }, {\n"
                    "    loop.unroll(%outer) {factor = 4}\n"
                    "  }\n")
    m = nest()
    res = apply_script(script(body), m)
    outer = next(op for op in m.walk() if op.name == "scf.for")
    step = outer.operands[2].defining_op.attributes["value"]
    assert step == 2
    assert [t.op for t in res.trace].count("loop.unroll") == 2


def test_alternatives_all_fail_is_silenceable():
    body = OUTER + ("  transform.alternatives {\n    loop.unroll(%outer) {factor = 3}\n"
                    "  }, {\n    loop.unroll(%outer) {factor = 7}\n  }\n")
    m = nest()
    before = print_payload(m)
    with pytest.raises(InterpError) as info:
        apply_script(script(body), m)
    assert info.value.severity == "silenceable"
    assert print_payload(m) == before


def test_handles_survive_rollback():
    # the first region consumes %outer and then fails; the rollback makes %outer valid again
    body = OUTER + ("  transform.alternatives {\n    loop.unroll(%outer) {factor = 2}\n"
                    "    %z = param.constant {value = 0} : !transform.param\n    transform.assert(%z)\n"
                    "  }, {\n  }\n"
                    "  loop.unroll(%outer) {factor = 2}\n")
    m = nest()
    apply_script(script(body), m)
    assert sum(1 for op in m.walk() if op.name == "scf.for") == 3


def test_include_and_yield():
    helper = ("transform.named_sequence @inner_of {\n^bb0(%h: !transform.any_op):\n"
              f'  %i = structured.match(%h) {{ops = ["scf.for"], innermost = true}} : {LOOP}\n'
              "  transform.yield(%i)\n}\n")
    body = OUTER + f"  %i = transform.include(%outer) {{callee = @inner_of}} : {LOOP}\n" \
                   "  loop.unroll(%i) {factor = 0}\n"
    m = nest()
    apply_script(script(body, helper), m)
    assert sum(1 for op in m.walk() if op.name == "scf.for") == 1
    assert sum(1 for op in m.walk() if op.name == "func.call") == 10


def test_sequence_scopes_failures():
    body = OUTER + (f"  transform.sequence(%outer) {{\n  ^bb0(%o: {LOOP}):\n"
                    "    loop.unroll(%o) {factor = 2}\n  }\n")
    m = nest()
    apply_script(script(body), m)
    outer = next(op for op in m.walk() if op.name == "scf.for")
    assert outer.operands[2].defining_op.attributes["value"] == 2


def test_listener_retargets_replaced_op():
    # unroll by 2 replaces the loop by one new loop; a readonly handle to it follows
    body = OUTER + ("  %same = structured.match(%root) {ops = [\"scf.for\"], outermost = true} : "
                    f"{LOOP}\n  loop.unroll(%same) {{factor = 2}}\n")
    interp = Interpreter(script(body), nest())
    interp.run()
    outer_v = next(v for v in interp.state.handles if v.hint == "outer")
    assert outer_v in interp.state.invalidated  # aliases the consumed loop
    assert interp.state.invalidated[outer_v].by == "loop.unroll"


def test_dynamic_condition_checking_reports_residuals():
    text = corpus.pipeline_string(["convert-scf-to-cf"])
    from xform.passes import pipeline_to_transform

    m = nest()
    res = apply_script(parse_transform(pipeline_to_transform(text)), m, check_dynamic=True)
    assert not any(d.severity == "error" for d in res.diagnostics)
    assert not any(op.name.startswith("scf.") for op in m.walk())


def test_params_and_trip_count():
    body = OUTER + ("  %n = param.trip_count(%outer) : !transform.param\n"
                    "  transform.assert(%n)\n")
    res = apply_script(script(body), nest())
    assert res.trace[1].result_handles == [{"param": [4]}]


def test_assert_false_is_silenceable():
    body = "  %z = param.constant {value = 0} : !transform.param\n  transform.assert(%z)\n"
    with pytest.raises(InterpError) as info:
        apply_script(script(body), nest())
    assert info.value.severity == "silenceable"


@pytest.mark.parametrize("value, kind, ints", [
    (3, "int_list", (3,)), ([1, 2], "int_list", (1, 2)), (True, "int_list", (1,)),
    ("scf.for", "opname", None), ("hello world", "string", None),
])
def test_param_value(value, kind, ints):
    p = ParamValue.of(value)
    assert p.kind == kind
    if ints is not None:
        assert p.ints() == ints
    else:
        with pytest.raises(ValueError):
            p.ints()


def test_effects_and_registration():
    eff = effects_of("loop.unroll")
    assert eff.operands[0] == "consumed"
    assert effects_of("loop.hoist_invariants").operands[0] == "readonly"
    reg = transform_registry().copy()

    def apply(ctx, op, args):
        for o in args[0]:
            o.attributes["tagged"] = True
        return [list(args[0])]

    register_transform("test.tag", [OperandSpec("handle")], [ResultSpec("handle")], None, apply, registry=reg)
    assert "test.tag" in reg and "test.tag" not in transform_registry()
    with pytest.raises(Exception):
        register_transform("test.tag", [], [], None, apply, registry=reg)
    s = parse_transform(HEAD + OUTER + "  %t = test.tag(%outer) : !transform.any_op\n}\n", reg)
    m = nest()
    Interpreter(s, m, registry=reg).run()
    assert any(op.attributes.get("tagged") for op in m.walk())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 3))
def test_failed_alternative_restores_payload(seed, cut):
    """Whatever a region did before failing, the payload text is restored."""
    p = corpus.random_loop_payload(seed, unit=True)
    steps = ["%h = loop.hoist_invariants(%loops) : !transform.any_op",
             f'%i = structured.match(%root) {{ops = ["scf.for"], innermost = true}} : {LOOP}',
             "loop.unroll(%i) {factor = 0}",
             f'%o = structured.match(%root) {{ops = ["scf.for"], outermost = true}} : {LOOP}',
             "loop.unroll(%o) {factor = 0}"][:cut + 2]
    region = "\n".join("    " + s for s in steps)
    body = (f'  %loops = structured.match(%root) {{ops = ["scf.for"], outermost = true}} : {LOOP}\n'
            "  transform.alternatives {\n" + region + "\n"
            '    %bad = param.constant {value = 0} : !transform.param\n    transform.assert(%bad)\n'
            "  }, {\n  }\n")
    m = parse_payload(p.text)
    before = print_payload(m)
    apply_script(script(body), m)
    assert print_payload(m) == before
