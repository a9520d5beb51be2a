import pytest
from hypothesis import given, settings, strategies as st

from xform import SilenceableFailure, corpus, execute, parse_payload, results_match
from xform.payload import Rewriter, match_ops, verify_module
from xform.transforms import loops
from xform.transforms.loops import (
    KernelDef, hoist_invariants, interchange, match_matmul, parse_kernel_registry, split, static_bounds, tile,
    to_library, trip_count, unroll, vectorize_marker,
)

LOOP = '!transform.op<"scf.for">'


def nest():
    m = parse_payload(corpus.NEST_PAYLOAD)
    return m, match_ops(m, "scf.for")


def calls(m, args=(3, 5)):
    return execute(m, "myFunc", list(args))[0].calls


def test_hoist_moves_invariants_to_fixpoint():
    m, (outer, inner) = nest()
    moved = hoist_invariants(outer, Rewriter())
    assert [op.name for op in moved] == ["arith.muli", "arith.addi"]
    assert moved[0].parent is outer.parent
    assert verify_module(m) == []
    assert calls(m) == calls(nest()[0])


def test_hoist_is_idempotent():
    m, (outer, _) = nest()
    hoist_invariants(outer, Rewriter())
    assert hoist_invariants(outer, Rewriter()) == []


@pytest.mark.parametrize("at, trips", [(0, (0, 10)), (3, (3, 7)), (10, (10, 0))])
def test_split_partitions_iterations(at, trips):
    m, (_, inner) = nest()
    a, b = split(inner, at, Rewriter())
    assert (trip_count(a), trip_count(b)) == trips
    assert calls(m) == calls(nest()[0])


@pytest.mark.parametrize("at", [-1, 11])
def test_split_out_of_range_is_silenceable(at):
    _, (_, inner) = nest()
    with pytest.raises(SilenceableFailure):
        split(inner, at, Rewriter())


def test_tile_two_levels():
    m, (outer, _) = nest()
    outers, inners = tile(outer, [2, 5], Rewriter())
    assert [trip_count(l) for l in outers] == [2, 2]
    assert [trip_count(l) for l in inners] == [2, 5]
    assert len(match_ops(m, "scf.for")) == 4
    # tiling reorders the iterations, so only the multiset of calls is preserved
    assert sorted(calls(m)) == sorted(calls(nest()[0]))


@pytest.mark.parametrize("sizes", [[0], [0, 0], [11, 20]])
def test_tile_skips_zero_and_oversized(sizes):
    m, (outer, _) = nest()
    outers, inners = tile(outer, sizes, Rewriter())
    assert outers == [outer] and inners == []
    assert len(match_ops(m, "scf.for")) == 2


@pytest.mark.parametrize("factor, loops_left", [(0, 1), (10, 1), (2, 2), (5, 2), (1, 2)])
def test_unroll_inner(factor, loops_left):
    m, (_, inner) = nest()
    unroll(inner, factor, Rewriter())
    assert len(match_ops(m, "scf.for")) == loops_left
    assert calls(m) == calls(nest()[0])


def test_unroll_non_divisor_is_silenceable():
    _, (_, inner) = nest()
    with pytest.raises(SilenceableFailure, match="does not divide"):
        unroll(inner, 3, Rewriter())


def test_full_unroll_when_body_ends_in_a_value():
    # the unrolled copies end with an op that has a result; the loop itself has none
    text = ("func.func @f {\n^bb0(%a: index):\n  %c0 = arith.constant {value = 0} : index\n"
            "  %c1 = arith.constant {value = 1} : index\n  %c3 = arith.constant {value = 3} : index\n"
            "  scf.for(%c0, %c3, %c1) {\n  ^bb0(%i: index):\n    %x = arith.addi(%a, %i) : index\n  }\n"
            "  func.return\n}\n")
    m = parse_payload(text)
    unroll(match_ops(m, "scf.for")[0], 0, Rewriter())
    assert verify_module(m) == [] and not match_ops(m, "scf.for")


def test_interchange_swaps_bounds():
    m, (outer, _) = nest()
    new = interchange(outer, [1, 0], Rewriter())
    assert trip_count(new) == 10
    assert trip_count(match_ops(new, "scf.for")[1]) == 4
    assert sorted(calls(m)) == sorted(calls(nest()[0]))


def test_interchange_rejects_non_permutation():
    _, (outer, _) = nest()
    with pytest.raises(SilenceableFailure):
        interchange(outer, [0, 0], Rewriter())


def test_vectorize_marker_needs_innermost():
    _, (outer, inner) = nest()
    with pytest.raises(SilenceableFailure):
        vectorize_marker(outer)
    vectorize_marker(inner)
    assert inner.attributes["vectorized"] is True


def test_kernel_registry_parsing():
    ks = parse_kernel_registry("# kernels\nkernel mm 4 4 4\nkernel big 8 8 8 0.25 // fast\n")
    assert ks == [KernelDef("mm", 4, 4, 4), KernelDef("big", 8, 8, 8, 0.25)]
    with pytest.raises(ValueError):
        parse_kernel_registry("kernel bad 4 4")
    with pytest.raises(ValueError):
        KernelDef("z", 0, 1, 1)


def test_matmul_matcher_and_library_call():
    m = parse_payload(corpus.batch_matmul(2, 4, 4, 4))
    root = match_ops(m, "scf.for")[0]
    info = match_matmul(root)
    assert info is not None
    call = to_library(root, parse_kernel_registry("kernel mm 4 4 4"), Rewriter())
    assert call.name == "lib.call_kernel" and call.attributes["kernel"] == "mm"
    assert not match_ops(m, "scf.for")


def test_library_needs_matching_kernel():
    m = parse_payload(corpus.batch_matmul(1, 4, 4, 4))
    with pytest.raises(SilenceableFailure):
        to_library(match_ops(m, "scf.for")[0], parse_kernel_registry("kernel mm 8 8 8"), Rewriter())


def test_library_rejects_non_matmul():
    _, (outer, _) = nest()
    assert match_matmul(outer) is None


def test_static_bounds():
    _, (outer, inner) = nest()
    assert static_bounds(outer) == (0, 4, 1) and static_bounds(inner) == (0, 10, 1)
    assert loops.is_loop(outer)


# -- semantic properties on generated payloads ------------------------------------

def _same(p, seed, body):
    r0, r1, after = corpus.run_both(p.text, corpus.match_script(body), p.args(seed))
    assert verify_module(after) == []
    assert results_match(r0, r1)
    return after


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 12))
def test_split_preserves_results(seed, at):
    p = corpus.random_loop_payload(seed, unit=True)
    lb = p.bounds[0][0]
    at = max(lb, min(at, max(p.bounds[0][1], lb)))
    _same(p, seed, [f"%a, %b = loop.split(%loops) {{at = {at}}} : ({LOOP}, {LOOP})"])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_full_unroll_of_outer_and_inner_preserves_results(seed):
    p = corpus.random_loop_payload(seed)
    _same(p, seed, [
        f'%i = structured.match(%root) {{ops = ["scf.for"], innermost = true}} : {LOOP}',
        "loop.unroll(%i) {factor = 0}",
        f'%o = structured.match(%root) {{ops = ["scf.for"], outermost = true}} : {LOOP}',
        "loop.unroll(%o) {factor = 0}",
    ])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.data())
def test_tile_preserves_results(seed, data):
    p = corpus.random_loop_payload(seed, perfect=True, unit=True, calls=False)
    sizes = [data.draw(st.sampled_from([0] + [d for d in range(1, t + 1) if t % d == 0])) for t in p.trips]
    _same(p, seed, [f"%t, %u = loop.tile(%loops) {{tile_sizes = {sizes}}} : ({LOOP}, {LOOP})"])
