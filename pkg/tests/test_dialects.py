import pytest

from xform import corpus, parse_payload
from xform.dialects import (
    DialectRegistry, OpDefinition, OpSetExpr, RegistryError, builtin_definitions, check_atom, default_registry,
    load_plugin_definitions, op_in_set,
)
from xform.payload import IRError, verify_module


def test_builtin_dialects_present():
    reg = default_registry()
    assert {"builtin", "func", "scf", "cf", "arith", "memref", "affine", "llvmlite", "lib"} <= reg.dialects()
    assert reg.has_trait("arith.addi", "pure")
    assert reg.has_trait("scf.for", "loop_like")
    assert not reg.has_trait("memref.store", "pure")


def test_duplicate_registration_rejected():
    reg = DialectRegistry()
    reg.register_dialect(builtin_definitions())
    with pytest.raises(RegistryError):
        reg.register_dialect([OpDefinition("arith.addi", 2, num_results=1)])


def test_unknown_trait_rejected():
    with pytest.raises(RegistryError):
        OpDefinition("x.y", traits={"shiny"})


def test_constrained_needs_known_base():
    reg = default_registry().copy()
    with pytest.raises(RegistryError):
        reg.register_constrained("memref.nope.constr", "memref.nope")


@pytest.mark.parametrize("name, expr, expected", [
    ("arith.addi", "arith.*", True),
    ("arith.addi", "{scf.*, arith.addi}", True),
    ("arith.addi", "interface:pure", True),
    ("memref.store", "interface:pure", False),
    ("memref.subview", "memref.subview.constr", True),
    ("scf.for", "any_op", True),
    ("scf.for", "func.*", False),
])
def test_op_in_set(name, expr, expected):
    assert op_in_set(name, expr) is expected


@pytest.mark.parametrize("atom", ["nodialect.*", "arith.nope", "interface:shiny"])
def test_bad_atoms(atom):
    with pytest.raises(RegistryError):
        check_atom(atom, default_registry())


def test_opset_union_dedups():
    a = OpSetExpr.parse("arith.*, scf.for")
    b = OpSetExpr.parse(["scf.for", "func.*"])
    assert (a | b).atoms == ("arith.*", "scf.for", "func.*")
    assert str(a) == "{arith.*, scf.for}"


PLUGIN = """\
// a user dialect
opdef {name = "toy.twice", operands = 1, results = 1, traits = ["pure"]}
opdef {name = "toy.sink", operands = 1, variadic = true}
"""


def test_plugin_definitions_extend_registry():
    reg = default_registry().copy()
    reg.register_dialect(load_plugin_definitions(PLUGIN))
    assert reg.has_trait("toy.twice", "pure")
    text = ("func.func @f {\n^bb0(%a: index):\n  %b = toy.twice(%a) : index\n  toy.sink(%b, %a)\n"
            "  func.return\n}\n")
    m = parse_payload(text, reg)
    assert verify_module(m, reg) == []
    with pytest.raises(IRError):
        parse_payload(text)


def test_plugin_syntax_errors():
    with pytest.raises(RegistryError):
        load_plugin_definitions("op {name = \"x.y\"}")
    with pytest.raises(RegistryError):
        load_plugin_definitions("opdef {operands = 1}")


@pytest.mark.parametrize("text, needle", [
    ("func.func @f {\n^bb0(%a: index, %x: f64):\n  %b = arith.addi(%a, %x) : index\n  func.return\n}\n",
     "arith.addi"),
    ("func.func @f {\n^bb0(%m: memref<4xf64>, %i: index):\n  %v = memref.load(%m, %i, %i) : f64\n"
     "  func.return\n}\n", "memref.load"),
    ("func.func @f {\n^bb0(%a: index):\n  %c = arith.cmpi(%a, %a) {predicate = \"weird\"} : i1\n"
     "  func.return\n}\n", "arith.cmpi"),
])
def test_op_verifiers(text, needle):
    with pytest.raises(IRError) as info:
        parse_payload(text)
    assert needle in info.value.diagnostic.message


def test_corpus_payloads_verify():
    for text in (corpus.NEST_PAYLOAD, corpus.CHUNK42_STATIC, corpus.CHUNK42_DYNAMIC, corpus.BISECT_PAYLOAD,
                 corpus.batch_matmul(2, 4, 4, 4), corpus.OPT_PAYLOAD):
        assert verify_module(parse_payload(text)) == []
