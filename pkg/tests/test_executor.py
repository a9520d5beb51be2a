import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xform import corpus, parse_payload, parse_transform, apply_script
from xform.executor import (
    CostModel, ExecError, MemRef, current_cost_model, default_args, execute, results_match, set_cost_weights,
)
from xform.executor.runtime import ExecResult
from xform.transforms.loops import parse_kernel_registry, static_bounds


def _count(block):
    """Independent oracle: executed ops of a block of static scf.for loops."""
    total = 0
    for op in block.ops:
        total += 1
        if op.name == "scf.for":
            lb, ub, st_ = static_bounds(op)
            total += len(range(lb, ub, st_)) * _count(op.body)
    return total


def test_nest_cost_matches_hand_count():
    m = parse_payload(corpus.NEST_PAYLOAD)
    res, cost = execute(m, "myFunc", [3, 5])
    # 4 constants, 4 muli, 1 outer loop, 4 x (inner loop + 10 x (3 addi + call)), return
    assert cost.ops_executed == 4 + 4 + 1 + 4 * (1 + 10 * 4) + 1 == 174
    assert cost.weighted_cost == 174
    assert cost.per_op_histogram["func.call"] == 40
    assert res.calls[0] == ("use", (0 + 0 + 15, 13))


def test_weights_scale_cost():
    m = parse_payload(corpus.NEST_PAYLOAD)
    cm = CostModel({"func.call": 10, "arith.addi": Fraction(1, 2)})
    _, cost = execute(m, "myFunc", [3, 5], cost_model=cm)
    assert cost.weighted_cost == 174 - 40 - 120 + 400 + 60


def test_process_wide_weights():
    try:
        set_cost_weights({"func.call": 0})
        _, cost = execute(parse_payload(corpus.NEST_PAYLOAD), "myFunc", [1, 1])
        assert cost.weighted_cost == 134
    finally:
        set_cost_weights()
    assert current_cost_model().weights == {}


@pytest.mark.parametrize("kw", [{"vector_width": 0}, {"kernel_alpha": 0}, {"weights": {"x.y": -1}}])
def test_cost_model_validation(kw):
    with pytest.raises(ValueError):
        CostModel(**kw)


def test_matmul_against_numpy():
    dims = (2, 3, 4, 5)
    args = corpus.matmul_args(*dims, seed=1)
    res, _ = execute(parse_payload(corpus.batch_matmul(*dims)), "main", args)
    a, b, c = (x.to_array() for x in args)
    want = c + np.einsum("bik,bkj->bij", a, b)
    got = np.asarray(res.buffers[2]).reshape(want.shape)
    assert np.allclose(got, want, rtol=1e-12)


@pytest.mark.parametrize("payload", [corpus.CHUNK42_STATIC, corpus.CHUNK42_DYNAMIC])
def test_subview_writes(payload):
    args = [MemRef.filled((64, 64), 0.0)]
    oi, oj = (0, 0)
    if payload is corpus.CHUNK42_DYNAMIC:
        oi, oj = 7, 9
        args += [oi, oj]
    res, _ = execute(parse_payload(payload), "chunkTo42", args)
    out = np.asarray(res.buffers[0]).reshape(64, 64)
    want = np.zeros((64, 64))
    want[oi:oi + 4, oj:oj + 4] = 42.0
    assert (out == want).all()


def test_out_of_bounds_is_an_error():
    with pytest.raises(ExecError):
        execute(parse_payload(corpus.CHUNK42_DYNAMIC), "chunkTo42", [MemRef.filled((64, 64)), 62, 0])


def test_step_limit():
    with pytest.raises(ExecError, match="step limit"):
        execute(parse_payload(corpus.NEST_PAYLOAD), "myFunc", [1, 1], step_limit=50)


def test_argument_checks():
    m = parse_payload(corpus.NEST_PAYLOAD)
    with pytest.raises(ExecError):
        execute(m, "myFunc", [1])
    with pytest.raises(ExecError):
        execute(m, "myFunc", [MemRef.filled((2,)), 1])


def test_arguments_are_not_mutated():
    args = corpus.matmul_args(1, 2, 2, 2)
    before = list(args[2].buf)
    execute(parse_payload(corpus.batch_matmul(1, 2, 2, 2)), "main", args)
    assert args[2].buf == before


def test_default_args_deterministic():
    m = parse_payload(corpus.batch_matmul(1, 2, 3, 4))
    a1, a2 = default_args(m, "main", seed=3), default_args(m, "main", seed=3)
    assert [x.buf for x in a1] == [x.buf for x in a2]
    assert [x.sizes for x in a1] == [(1, 2, 4), (1, 4, 3), (1, 2, 3)]
    assert default_args(parse_payload(corpus.NEST_PAYLOAD), "myFunc") == [0, 0]


def test_memref_array_roundtrip():
    arr = np.arange(12.0).reshape(3, 4)
    m = MemRef.from_array(arr)
    assert m.strides == (4, 1)
    assert (m.to_array() == arr).all()


@pytest.mark.parametrize("a, b, tol, expected", [
    ((1.0,), (1.0,), 0.0, True),
    ((1.0,), (1.0 + 1e-9,), 0.0, False),
    ((1.0,), (1.0 + 1e-9,), 1e-6, True),
    ((1.0,), (1.1,), 1e-6, False),
    ((3,), (3,), 1e-6, True),
])
def test_results_match(a, b, tol, expected):
    assert results_match(ExecResult(a), ExecResult(b), tol) is expected


def test_vectorized_loop_cost():
    text = corpus.batch_matmul(1, 2, 2, 16)
    script = corpus.match_script([]).replace(
        "}\n", '  %inner = structured.match(%root) {ops = ["scf.for"], innermost = true} : !transform.op<"scf.for">\n'
               "  loop.vectorize_marker(%inner)\n}\n")
    m = parse_payload(text)
    apply_script(parse_transform(script), m)
    args = corpus.matmul_args(1, 2, 2, 16)
    r0, c0 = execute(parse_payload(text), "main", args)
    r1, c1 = execute(m, "main", args)
    assert results_match(r0, r1)
    # the innermost body (6 ops) runs 16 times per (b, i, j); vector width 8 charges ceil(16 * 6 / 8)
    body = 6
    scalar = c0.weighted_cost - 4 * 16 * body
    assert c1.weighted_cost == scalar + 4 * math.ceil(16 * body / 8)


def test_kernel_cost_formula():
    dims = (2, 4, 4, 4)
    kernels = parse_kernel_registry("kernel mm 4 4 4 0.5")
    m = parse_payload(corpus.batch_matmul(*dims))
    apply_script(parse_transform(corpus.match_script(
        ['%c = transform.to_library(%loops) : !transform.op<"lib.call_kernel">'])), m, kernels=kernels)
    _, cost = execute(m, "main", corpus.matmul_args(*dims))
    non_kernel = cost.ops_executed - cost.per_op_histogram["lib.call_kernel"]
    assert cost.weighted_cost == non_kernel + Fraction(1, 2) * 2 * 4 * 4 * 4


def test_cost_report_json():
    _, cost = execute(parse_payload(corpus.NEST_PAYLOAD), "myFunc", [1, 2])
    data = json.loads(cost.to_json())
    assert data["ops_executed"] == 174 and data["weighted_cost_exact"] == "174"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_op_count_matches_tree_oracle(seed):
    p = corpus.random_loop_payload(seed)
    m = parse_payload(p.text)
    _, cost = execute(m, "main", p.args(seed))
    func = next(op for op in m.walk() if op.name == "func.func")
    assert cost.ops_executed == _count(func.body)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_execution_is_deterministic(seed):
    p = corpus.random_loop_payload(seed, calls=False)
    res, _ = execute(parse_payload(p.text), "main", p.args(seed))
    again, _ = execute(parse_payload(p.text), "main", p.args(seed))
    assert res == again
    written = sum(1 for v in res.buffers[0] if v != 0)
    assert written <= math.prod(p.trips)
