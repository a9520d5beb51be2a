import pytest
from hypothesis import given, settings, strategies as st

from xform import SilenceableFailure, check_static, corpus, parse_payload, parse_transform
from xform.conditions import (
    AbstractOpSet, ConditionSignature, ConstrainedOpDef, Step, apply_signature, atoms_overlap, check_dynamic,
    consumes_atom, default_constrained_defs, parse_declarations, run_static, verify_constrained,
)
from xform.dialects import atom_matches, default_registry
from xform.passes import pipeline_to_transform, run_pipeline
from xform.payload import match_ops

REG = default_registry()


def static(passes, **kw):
    return check_static(parse_transform(pipeline_to_transform(corpus.pipeline_string(passes))), **kw)


def test_fixed_lowering_is_clean():
    report = static(corpus.FIXED_LOWERING)
    assert report.ok and not report.warnings
    assert all(a.startswith("llvmlite.") for a in report.final_state.atoms)


def test_broken_lowering_names_the_culprit():
    report = static(corpus.LOWERING_PIPELINE)
    assert [(f.message.split("'")[1], f.step) for f in report.residuals] == [("affine.apply", "expand-strided-metadata")]


def test_tile_after_scf_lowering_is_a_phase_violation():
    text = pipeline_to_transform("convert-scf-to-cf").replace(
        "}\n", '  %l = structured.match(%root) {ops = ["scf.for"]} : !transform.op<"scf.for">\n'
               '  %a, %b = loop.tile(%l) {tile_sizes = [2]} : (!transform.op<"scf.for">, !transform.op<"scf.for">)\n}\n')
    report = check_static(parse_transform(text), final_allowed="*")
    assert [f.step for f in report.phase_violations] == ["loop.tile"]
    assert report.phase_violations[0].loc[0] == 5


def test_unknown_pass_is_opaque():
    script = parse_transform(corpus.match_script(['%x = transform.apply_registered_pass(%root) {pass = "mystery"} '
                                                  ": !transform.any_op"]))
    report = check_static(script, final_allowed="*")
    assert [f.kind for f in report.findings] == ["opaque"]
    assert report.findings[0].diagnostic().severity == "warning"
    assert report.final_state.is_top


def test_alternatives_join_branches():
    steps = [Step("alt", branches=[[Step("a", ConditionSignature.of("scf.*", "cf.br"))],
                                   [Step("b", ConditionSignature.of("", "affine.apply"))]])]
    final = run_static(steps, "scf.for", "*").final_state
    assert {"scf.for", "cf.br", "affine.apply"} == final.names()


def test_neutral_steps_change_nothing():
    report = run_static([Step("canonicalize", neutral=True)], "scf.for", "scf.for")
    assert report.ok and report.final_state.names() == {"scf.for"}


@pytest.mark.parametrize("state, expr, overlap, consumed", [
    ("scf.for", "scf.*", True, True),
    ("scf.*", "scf.for", True, False),
    ("arith.addi", "interface:pure", True, True),
    ("memref.store", "interface:pure", False, False),
    ("memref.subview.constr", "memref.subview", True, True),
    ("memref.subview", "memref.subview.constr", True, False),
    ("cf.br", "scf.*", False, False),
    ("*", "scf.for", True, False),
])
def test_atom_relations(state, expr, overlap, consumed):
    assert atoms_overlap(state, expr, REG) is overlap
    assert consumes_atom(state, expr, REG) is consumed


def test_apply_signature_records_producer():
    s = apply_signature(AbstractOpSet.initial("scf.for, arith.addi"), ConditionSignature.of("scf.*", "cf.br"),
                        "lower", REG)
    assert s.atoms == {"arith.addi": "input", "cf.br": "lower"}


DECLS = """\
// signatures and constraints for a user pass
sig my-pass consumes {scf.for} produces {cf.br, arith.addi}
constr memref.subview.tight on memref.subview group 1 card 0 group 2 card 0
"""


def test_parse_declarations():
    d = parse_declarations(DECLS)
    assert str(d.signatures["my-pass"]) == "consumes {scf.for} produces {cf.br, arith.addi}"
    assert d.constrained["memref.subview.tight"].group_card == {1: 0, 2: 0}


@pytest.mark.parametrize("text", ["sig broken consumes {a.b}", "constr x on y group 1", "what is this"])
def test_bad_declarations(text):
    with pytest.raises(ValueError):
        parse_declarations(text)


def test_constrained_verifier_on_subviews():
    cdef = default_constrained_defs()["memref.subview.constr"]
    static_view = match_ops(parse_payload(corpus.CHUNK42_STATIC), "memref.subview")[0]
    dynamic_view = match_ops(parse_payload(corpus.CHUNK42_DYNAMIC), "memref.subview")[0]
    assert verify_constrained(static_view, cdef)
    assert not verify_constrained(dynamic_view, cdef)
    with pytest.raises(ValueError):
        verify_constrained(static_view, ConstrainedOpDef("x", "memref.load"))


def test_dynamic_check_before_and_after():
    m = parse_payload(corpus.NEST_PAYLOAD)
    sig = ConditionSignature.of("scf.*", "cf.br")
    assert check_dynamic(m, sig, "before") == []
    errs = check_dynamic(m, sig, "after", label="fake")
    assert len(errs) == 2 and all("failed to legalize operation 'scf.for'" in d.message for d in errs)
    assert check_dynamic(m, ConditionSignature.of("affine.*", ""), "before")[0].severity == "warning"
    with pytest.raises(ValueError):
        check_dynamic(m, sig, "during")


def test_dynamic_check_flags_unconstrained_subview():
    m = parse_payload(corpus.CHUNK42_DYNAMIC)
    sig = ConditionSignature.of("memref.*", "memref.subview.constr, memref.load, memref.store")
    errs = check_dynamic(m, sig, "after")
    assert errs and "does not satisfy constrained definition memref.subview.constr" in errs[0].message


# -- soundness: the abstract state covers what really survives ------------------

PASSES = [p for p in corpus.FIXED_LOWERING if p != "reconcile-unrealized-casts"] + ["reconcile-unrealized-casts"]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(sorted(set(PASSES))), max_size=6), st.sampled_from(["nest", "chunk", "matmul"]))
def test_static_state_covers_dynamic_ops(passes, which):
    text = {"nest": corpus.NEST_PAYLOAD, "chunk": corpus.CHUNK42_DYNAMIC,
            "matmul": corpus.batch_matmul(1, 2, 2, 2)}[which]
    m = parse_payload(text)
    try:
        m = run_pipeline(m, ",".join(passes))
    except SilenceableFailure:
        return
    state = static(passes, final_allowed="*").final_state
    for op in m.walk():
        if op is m or state.is_top:
            continue
        assert any(atom_matches(op.name, a, REG) or a == op.name for a in state.atoms), op.name
