import pytest
from hypothesis import given, settings, strategies as st

from xform import corpus
from xform.payload import (
    F64, INDEX, Diagnostic, IRError, MemRefType, Operation, RewriteError, Rewriter, TransformType, erase_op,
    match_ops, parse_ir, parse_payload, parse_type, print_payload, rewrite, structurally_equal, symbol_table,
    verify_module,
)


def _err(text):
    with pytest.raises(IRError) as info:
        parse_payload(text)
    return info.value.diagnostic


SIMPLE = """\
func.func @f {
^bb0(%a: index, %b: index):
  %x = arith.addi(%a, %b) : index
  func.return(%x)
}
"""


def test_parse_print_roundtrip_is_stable():
    m = parse_payload(SIMPLE)
    text = print_payload(m)
    assert print_payload(parse_payload(text)) == text
    assert structurally_equal(m, parse_payload(text))


def test_module_wrapper_is_implicit():
    m = parse_payload(SIMPLE)
    assert m.name == "builtin.module"
    assert list(symbol_table(m)) == ["f"]


@pytest.mark.parametrize("text, needle, loc", [
    ("func.func @f {\n^bb0(%a: index):\n  %x = arith.addi(%a, %zz) : index\n  func.return\n}\n",
     "not defined before this use", (3, 23)),
    ("func.func @f {\n^bb0(%a: index):\n  %x = arith.addi(%a) : index\n  func.return\n}\n",
     "expects 2 operands, got 1", (3, 3)),
    ("func.func @f {\n^bb0(%a: index):\n  %x = arith.addi(%a, %a : index\n}\n", "expected ','", (3, 26)),
    ("func.func @f {\n^bb0(%a: index):\n  %x = foo.bar(%a) : index\n  func.return\n}\n",
     "not registered", (3, 3)),
])
def test_diagnostics_carry_line_and_column(text, needle, loc):
    d = _err(text)
    assert needle in d.message
    assert d.loc == loc


def test_diagnostic_format():
    d = Diagnostic("error", "boom", (4, 7))
    assert d.format("x.pir") == "x.pir:4:7: error: boom"
    assert str(Diagnostic("remark", "hi")) == "<input>:0:0: remark: hi"


def test_redefinition_rejected():
    d = _err("func.func @f {\n^bb0(%a: index):\n  %a = arith.addi(%a, %a) : index\n  func.return\n}\n")
    assert "%a" in d.message


def test_names_scope_per_function():
    text = SIMPLE + SIMPLE.replace("@f", "@g")
    m = parse_payload(text)
    assert set(symbol_table(m)) == {"f", "g"}


@pytest.mark.parametrize("text, expected", [
    ("index", INDEX),
    ("f64", F64),
    ("memref<4x8xf64>", MemRefType((4, 8), F64)),
])
def test_parse_type(text, expected):
    assert parse_type(text) == expected
    assert str(parse_type(text)) == text


def test_memref_layout_and_dynamic_offset():
    t = parse_type("memref<4x4xf64, strided<[64, 1], offset: ?>>")
    assert t.rank == 2 and t.strides == (64, 1) and t.offset is None
    assert parse_type("memref<4x4xf64>").is_identity_layout


def test_transform_types():
    t = parse_type('!transform.op<"scf.for">')
    assert isinstance(t, TransformType) and t.kind == "handle" and t.ops == ("scf.for",)
    assert parse_type("!transform.param").kind == "param"


def test_clone_is_deep_and_renumbered():
    m = parse_payload(corpus.NEST_PAYLOAD)
    c = m.clone()
    assert structurally_equal(m, c)
    ids = {op.id for op in m.walk()}
    assert not ids & {op.id for op in c.walk()}


def test_verifier_reports_erased_op_reachable():
    m = parse_payload(SIMPLE)
    add = next(op for op in m.walk() if op.name == "arith.addi")
    add.erased = True
    assert any("erased" in d.message for d in verify_module(m))


def test_rewriter_events_and_liveness():
    m = parse_payload(SIMPLE)
    seen = []
    rw = Rewriter([lambda ev, old, new: seen.append((ev.kind, old.name, [o.name for o in new]))])
    add = next(op for op in m.walk() if op.name == "arith.addi")
    a, b = add.operands
    mul = Operation("arith.muli", [a, b], [INDEX])
    rw.replace(add, [mul])
    assert seen == [("replaced", "arith.addi", ["arith.muli"])]
    assert verify_module(m) == []
    with pytest.raises(RewriteError):
        rw.erase(add)
    ret = next(op for op in m.walk() if op.name == "func.return")
    assert ret.operands[0].defining_op is mul


def test_rewrite_by_id():
    m = parse_payload(corpus.NEST_PAYLOAD)
    call = next(op for op in m.walk() if op.name == "func.call")
    rewrite(m, [("erase", call.id)])
    assert not match_ops(m, "func.call")
    with pytest.raises(RewriteError):
        rewrite(m, [("erase", call.id)])


def test_match_ops_wildcards():
    m = parse_payload(corpus.NEST_PAYLOAD)
    assert len(match_ops(m, "scf.for")) == 2
    assert {op.name for op in match_ops(m, "arith.*")} == {"arith.constant", "arith.muli", "arith.addi"}


def test_erase_marks_nested():
    m = parse_payload(corpus.NEST_PAYLOAD)
    outer = match_ops(m, "scf.for")[0]
    nested = list(outer.walk())
    erase_op(outer)
    assert all(op.erased for op in nested)


def test_parse_ir_keeps_unverified_modules():
    m = parse_ir("func.func @f {\n^bb0(%a: index):\n  %x = arith.addi(%a) : index\n  func.return\n}\n")
    assert verify_module(m)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.booleans())
def test_roundtrip_generated_payloads(seed, perfect):
    text = corpus.random_loop_payload(seed, perfect=perfect).text
    m = parse_payload(text)
    printed = print_payload(m)
    again = parse_payload(printed)
    assert print_payload(again) == printed
    assert structurally_equal(m, again)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_structural_key_ignores_names(seed):
    text = corpus.random_pattern_payload(seed)
    renamed = text.replace("%v", "%renamed_v")
    assert structurally_equal(parse_payload(text), parse_payload(renamed))
