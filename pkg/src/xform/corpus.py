"""Reference payloads and scripts, plus seeded random generators.

The generators produce small, well-formed payloads within the executable
subset; tests and the CLI use them as semantic-preservation corpora.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .executor.runtime import MemRef
from .passes.lowering import LOWERING_PIPELINE

# -- hoist / split / tile / unroll scenario ------------------------------------

NEST_PAYLOAD = """\
func.func @myFunc {
^bb0(%a: index, %b: index):
  %c0 = arith.constant {value = 0} : index
  %c1 = arith.constant {value = 1} : index
  %c4 = arith.constant {value = 4} : index
  %c10 = arith.constant {value = 10} : index
  scf.for(%c0, %c4, %c1) {
  ^bb0(%i: index):
    %x = arith.muli(%a, %b) : index
    scf.for(%c0, %c10, %c1) {
    ^bb0(%j: index):
      %y = arith.addi(%a, %c10) : index
      %s = arith.addi(%i, %j) : index
      %t = arith.addi(%s, %x) : index
      func.call(%t, %y) {callee = @use}
    }
  }
  func.return
}
"""

_HOIST_TILE_BODY = """\
transform.named_sequence @transform_main {
^bb0(%root: !transform.any_op):
  %outer = structured.match(%root) {ops = ["scf.for"], outermost = true} : !transform.op<"scf.for">
  %hoisted = loop.hoist_invariants(%outer) : !transform.any_op
  %inner = structured.match(%outer) {ops = ["scf.for"]} : !transform.op<"scf.for">
  %size = param.constant {value = 8} : !transform.param
  %part1, %part2 = loop.split(%inner, %size) : (!transform.op<"scf.for">, !transform.op<"scf.for">)
  %tiled1, %tiled2 = loop.tile(%part1, %size) : (!transform.op<"scf.for">, !transform.op<"scf.for">)
  loop.unroll(%part2) {factor = 0}
"""

# the second unroll reuses a handle the first one consumed
HOIST_TILE_SCRIPT_WITH_ERROR = _HOIST_TILE_BODY + "  loop.unroll(%part2) {factor = 0}\n}\n"
HOIST_TILE_SCRIPT = _HOIST_TILE_BODY + "}\n"
FIRST_UNROLL_LINE = 9
SECOND_UNROLL_LINE = 10

# -- chunkTo42 -----------------------------------------------------------------

CHUNK42_STATIC = """\
func.func @chunkTo42 {
^bb0(%A: memref<64x64xf64>):
  %c42 = arith.constant {value = 42.0} : f64
  %view = memref.subview(%A) {operand_segment_sizes = [1, 0, 0, 0], static_offsets = [0, 0], static_sizes = [4, 4], static_strides = [1, 1]} : memref<4x4xf64, strided<[64, 1], offset: 0>>
  scf.forall {lower_bounds = [0, 0], upper_bounds = [4, 4], steps = [1, 1]} {
  ^bb0(%i: index, %j: index):
    memref.store(%c42, %view, %i, %j)
  }
  func.return
}
"""

CHUNK42_DYNAMIC = """\
func.func @chunkTo42 {
^bb0(%A: memref<64x64xf64>, %oi: index, %oj: index):
  %c42 = arith.constant {value = 42.0} : f64
  %view = memref.subview(%A, %oi, %oj) {operand_segment_sizes = [1, 2, 0, 0], static_offsets = [-1, -1], static_sizes = [4, 4], static_strides = [1, 1]} : memref<4x4xf64, strided<[64, 1], offset: ?>>
  scf.forall {lower_bounds = [0, 0], upper_bounds = [4, 4], steps = [1, 1]} {
  ^bb0(%i: index, %j: index):
    memref.store(%c42, %view, %i, %j)
  }
  func.return
}
"""

FIXED_LOWERING = LOWERING_PIPELINE[:5] + ["lower-affine", "convert-arith-to-llvmlite"] + LOWERING_PIPELINE[5:]


def pipeline_string(passes: Sequence[str]) -> str:
    return "builtin.module(" + ", ".join(passes) + ")"


# -- matmul --------------------------------------------------------------------

def batch_matmul(b: int, m: int, n: int, k: int, name: str = "main") -> str:
    """``C[b,i,j] += A[b,i,k] * B[b,k,j]`` as a depth-4 scf.for nest."""
    consts = sorted({0, 1, b, m, n, k})
    lines = [
        f"func.func @{name} {{",
        f"^bb0(%A: memref<{b}x{m}x{k}xf64>, %B: memref<{b}x{k}x{n}xf64>, %C: memref<{b}x{m}x{n}xf64>):",
    ]
    lines += [f"  %c{c} = arith.constant {{value = {c}}} : index" for c in consts]
    lines += [
        f"  scf.for(%c0, %c{b}, %c1) {{",
        "  ^bb0(%b: index):",
        f"    scf.for(%c0, %c{m}, %c1) {{",
        "    ^bb0(%i: index):",
        f"      scf.for(%c0, %c{n}, %c1) {{",
        "      ^bb0(%j: index):",
        f"        scf.for(%c0, %c{k}, %c1) {{",
        "        ^bb0(%k: index):",
        "          %a = memref.load(%A, %b, %i, %k) : f64",
        "          %bv = memref.load(%B, %b, %k, %j) : f64",
        "          %c = memref.load(%C, %b, %i, %j) : f64",
        "          %p = arith.mulf(%a, %bv) : f64",
        "          %s = arith.addf(%c, %p) : f64",
        "          memref.store(%s, %C, %b, %i, %j)",
        "        }",
        "      }",
        "    }",
        "  }",
        "  func.return",
        "}",
    ]
    return "\n".join(lines) + "\n"


def matmul_args(b: int, m: int, n: int, k: int, seed: int = 0) -> List[MemRef]:
    rng = random.Random(seed)

    def arr(shape):
        size = 1
        for d in shape:
            size *= d
        return MemRef([rng.uniform(-1.0, 1.0) for _ in range(size)], shape)

    return [arr((b, m, k)), arr((b, k, n)), arr((b, m, n))]


def batch_matmul_script(split_at: int, tile: Tuple[int, int], with_library: bool = True) -> str:
    """Split the i loop, tile the divisible part, try the library, unroll the rest."""
    lines = [
        "transform.named_sequence @transform_main {",
        "^bb0(%root: !transform.any_op):",
        '  %batch = structured.match(%root) {ops = ["scf.for"], outermost = true} : !transform.op<"scf.for">',
        '  %loops = structured.match(%batch) {ops = ["scf.for"], outermost = true} : !transform.op<"scf.for">',
        f"  %part1, %part2 = loop.split(%loops) {{at = {split_at}}} "
        ': (!transform.op<"scf.for">, !transform.op<"scf.for">)',
        f"  %tiles, %points = loop.tile(%part1) {{tile_sizes = [{tile[0]}, {tile[1]}]}} "
        ': (!transform.op<"scf.for">, !transform.op<"scf.for">)',
    ]
    if with_library:
        lines += [
            "  transform.alternatives {",
            "    %call = transform.to_library(%points) : !transform.op<\"lib.call_kernel\">",
            "  }, {",
            "  }",
        ]
    lines += ["  loop.unroll(%part2) {factor = 0}", "}"]
    return "\n".join(lines) + "\n"


TUNE_TEMPLATE = """\
transform.named_sequence @transform_main {
^bb0(%root: !transform.any_op):
  %nest = structured.match(%root) {ops = ["scf.for"], outermost = true} : !transform.op<"scf.for">
  %tiles, %points = loop.tile(%nest) {tile_sizes = [$tile0, $tile1, $tile2, $tile3]} : (!transform.op<"scf.for">, !transform.op<"scf.for">)
  %innermost = structured.match(%root) {ops = ["scf.for"], innermost = true} : !transform.op<"scf.for">
  %vect = param.constant {value = $vect} : !transform.param
  transform.alternatives {
    transform.assert(%vect)
    loop.vectorize_marker(%innermost)
  }, {
  }
}
"""

TUNE_SPACE = """\
dims: B=4, M=8, N=8, K=8
tile0: {range:[0, B], constraints:[B % tile0 == 0]}
tile1: {range:[0, M], constraints:[M % tile1 == 0]}
tile2: {range:[0, N], constraints:[N % tile2 == 0]}
tile3: {range:[0, K], constraints:[K % tile3 == 0]}
vect:  {range:[0, 1], constraints:[where(vect == 1, tile3 % 8 == 0)]}
"""

# -- synthetic module for overhead timing ----------------------------------------

def synthetic_module(target_ops: int = 1000, seed: int = 0) -> str:
    """Several functions of nested loops over a buffer, about ``target_ops`` ops."""
    rng = random.Random(seed)
    funcs, total, idx = [], 0, 0
    while total < target_ops:
        body, n = _synthetic_func(f"f{idx}", rng)
        funcs.append(body)
        total += n
        idx += 1
    return "\n".join(funcs)


def _synthetic_func(name: str, rng: random.Random) -> Tuple[str, int]:
    lines = [f"func.func @{name} {{", "^bb0(%A: memref<16x16xf64>, %s: index):"]
    count = 1
    consts = [0, 1, 2, 4, 8, 16]
    for c in consts:
        lines.append(f"  %c{c} = arith.constant {{value = {c}}} : index")
    lines.append("  %f = arith.constant {value = 1.5} : f64")
    count += len(consts) + 1
    for loop in range(rng.randint(2, 4)):
        lines.append(f"  scf.for(%c0, %c16, %c1) {{")
        lines.append(f"  ^bb0(%i{loop}: index):")
        lines.append(f"    scf.for(%c0, %c{rng.choice([4, 8, 16])}, %c1) {{")
        lines.append(f"    ^bb0(%j{loop}: index):")
        count += 2
        prev = f"%j{loop}"
        for t in range(rng.randint(4, 10)):
            op = rng.choice(["addi", "muli", "addi"])
            other = rng.choice([f"%c{rng.choice(consts)}", "%s", f"%i{loop}"])
            lines.append(f"      %t{loop}_{t} = arith.{op}({prev}, {other}) : index")
            prev = f"%t{loop}_{t}"
            count += 1
        lines.append(f"      %v{loop} = memref.load(%A, %i{loop}, %j{loop}) : f64")
        lines.append(f"      %w{loop} = arith.addf(%v{loop}, %f) : f64")
        lines.append(f"      memref.store(%w{loop}, %A, %i{loop}, %j{loop})")
        lines.append("    }")
        lines.append("  }")
        count += 3
    lines.append("  func.return")
    lines.append("}")
    return "\n".join(lines) + "\n", count + 1


# -- pattern bisection ----------------------------------------------------------

BISECT_PAYLOAD = """\
func.func @main {
^bb0(%A: memref<16xi64>, %a: index, %b: index):
  %c0 = arith.constant {value = 0} : index
  %c1 = arith.constant {value = 1} : index
  %c2 = arith.constant {value = 2} : index
  %c3 = arith.constant {value = 3} : index
  %c16 = arith.constant {value = 16} : index
  %k = arith.muli(%c2, %c3) : index
  %x = arith.muli(%a, %b) : index
  %y = arith.addi(%x, %k) : index
  scf.for(%c0, %c16, %c1) {
  ^bb0(%i: index):
    %z = arith.addi(%i, %c0) : index
    %w = arith.muli(%z, %c1) : index
    %s = arith.addi(%w, %y) : index
    %v = arith.index_cast(%s) : i64
    memref.store(%v, %A, %i)
  }
  func.return
}
"""


# -- random generators -----------------------------------------------------------

@dataclass
class LoopPayload:
    """A generated loop nest ``@main(%A, %a, %b)`` storing one value per point."""

    text: str
    bounds: List[Tuple[int, int, int]]  # (lb, ub, step) from outermost in
    perfect: bool

    @property
    def trips(self) -> List[int]:
        return [len(range(lb, ub, st)) for lb, ub, st in self.bounds]

    def args(self, seed: int = 0) -> list:
        rng = random.Random(seed)
        shape = tuple(max(ub, 1) for _, ub, _ in self.bounds)
        size = 1
        for d in shape:
            size *= d
        return [MemRef([0] * size, shape), rng.randint(-5, 5), rng.randint(-5, 5)]


def random_loop_payload(seed: int, max_depth: int = 3, perfect: bool = False, calls: bool = True,
                        unit: bool = False) -> LoopPayload:
    """A rectangular nest of depth 1..``max_depth``.

    Non-perfect nests carry loop-invariant ops in the outer bodies. With
    ``calls`` the innermost body also calls ``@use``, which makes iteration
    order observable. ``unit`` forces lower bound 0 and step 1.
    """
    rng = random.Random(seed)
    depth = rng.randint(1, max_depth)
    bounds = []
    for _ in range(depth):
        lb = 0 if unit else rng.choice([0, 0, 1, 2])
        st = 1 if unit else rng.choice([1, 1, 1, 2])
        bounds.append((lb, lb + st * rng.randint(0, 9), st))
    consts = sorted({0, 1, 3, 7} | {x for b in bounds for x in b})
    shape = "x".join(str(max(ub, 1)) for _, ub, _ in bounds)
    lines = ["func.func @main {", f"^bb0(%A: memref<{shape}xi64>, %a: index, %b: index):"]
    lines += [f"  %c{c} = arith.constant {{value = {c}}} : index" for c in consts]
    ivs: List[str] = []
    pool = ["%a", "%b", "%c3", "%c7"]
    for level, (lb, ub, st) in enumerate(bounds):
        pad = "  " * (level + 1)
        lines.append(f"{pad}scf.for(%c{lb}, %c{ub}, %c{st}) {{")
        lines.append(f"{pad}^bb0(%i{level}: index):")
        ivs.append(f"%i{level}")
        pool.append(f"%i{level}")
        if level < depth - 1 and not perfect:
            for t in range(rng.randint(0, 2)):
                name = f"%x{level}_{t}"
                lines.append(f"{pad}  {name} = arith.{rng.choice(['addi', 'muli'])}"
                             f"({rng.choice(pool)}, {rng.choice(pool)}) : index")
                pool.append(name)
    pad = "  " * (depth + 1)
    prev = rng.choice(ivs)
    for t in range(rng.randint(1, 5)):
        name = f"%t{t}"
        # operands drawn only from outer values give hoistable ops
        lhs = rng.choice([prev] + pool)
        lines.append(f"{pad}{name} = arith.{rng.choice(['addi', 'muli', 'subi'])}({lhs}, {rng.choice(pool)}) : index")
        prev = name
    lines.append(f"{pad}%acc = arith.addi({prev}, {ivs[-1]}) : index")
    lines.append(f"{pad}%v = arith.index_cast(%acc) : i64")
    lines.append(f"{pad}memref.store(%v, %A, {', '.join(ivs)})")
    if calls:
        lines.append(f"{pad}func.call(%acc) {{callee = @use}}")
    for level in reversed(range(depth)):
        lines.append("  " * (level + 1) + "}")
    lines += ["  func.return", "}"]
    return LoopPayload("\n".join(lines) + "\n", bounds, perfect)


def random_matmul_dims(seed: int) -> Tuple[int, int, int, int]:
    rng = random.Random(seed)
    return rng.randint(1, 3), rng.choice([2, 4, 6]), rng.choice([2, 4, 6]), rng.choice([2, 4, 6])


def random_pattern_payload(seed: int) -> str:
    """Straight-line and loop code full of rewrite opportunities: adds of zero,
    multiplies by one, constant arithmetic, constant compares, cast pairs,
    identity subviews and dead pure ops. Every live value reaches ``%A``."""
    rng = random.Random(seed)
    n = 8
    lines = ["func.func @main {", f"^bb0(%A: memref<{n}xi64>, %a: index, %b: index):"]
    consts = [0, 1, 2, 3, 5, n]
    lines += [f"  %c{c} = arith.constant {{value = {c}}} : index" for c in consts]
    pool = ["%a", "%b"] + [f"%c{c}" for c in consts[:5]]
    body: List[str] = []
    for t in range(rng.randint(4, 12)):
        kind = rng.choice(["add0", "mul1", "fold", "plain", "cast", "dead", "cmp"])
        name = f"%v{t}"
        x = rng.choice(pool)
        if kind == "add0":
            body.append(f"{name} = arith.addi({x}, %c0) : index" if rng.random() < 0.5
                        else f"{name} = arith.addi(%c0, {x}) : index")
        elif kind == "mul1":
            body.append(f"{name} = arith.muli({x}, %c1) : index")
        elif kind == "fold":
            body.append(f"{name} = arith.{rng.choice(['addi', 'muli', 'subi'])}"
                        f"(%c{rng.choice(consts[:5])}, %c{rng.choice(consts[:5])}) : index")
        elif kind == "cast":
            body.append(f"{name}_w = arith.index_cast({x}) : i64")
            body.append(f"{name} = arith.index_cast({name}_w) : index")
        elif kind == "dead":
            body.append(f"%dead{t} = arith.muli({x}, {rng.choice(pool)}) : index")
            continue
        elif kind == "cmp":
            pred = rng.choice(["eq", "ne", "slt", "sle", "sgt", "sge"])
            lhs = rng.choice(["%c2", "%c3", x])
            body.append(f"%p{t} = arith.cmpi({lhs}, %c3) {{predicate = \"{pred}\"}} : i1")
            body.append(f"scf.if(%p{t}) {{")
            body.append(f"  %s{t} = arith.index_cast({x}) : i64")
            body.append(f"  memref.store(%s{t}, %A, %c{rng.choice(consts[:5])})")
            body.append("}, {")
            body.append("}")
            continue
        else:
            body.append(f"{name} = arith.{rng.choice(['addi', 'muli', 'subi'])}({x}, {rng.choice(pool)}) : index")
        pool.append(name)
    lines += ["  " + b for b in body]
    lines.append(f"  %view = memref.subview(%A) {{operand_segment_sizes = [1, 0, 0, 0], static_offsets = [0], "
                 f"static_sizes = [{n}], static_strides = [1]}} : memref<{n}xi64, strided<[1], offset: 0>>")
    live = [p for p in pool if p.startswith("%v")] or ["%a"]
    lines.append(f"  scf.for(%c0, %c{n}, %c1) {{")
    lines.append("  ^bb0(%i: index):")
    acc = "%i"
    for k, v in enumerate(live[-4:]):
        lines.append(f"    %l{k} = arith.addi({acc}, {v}) : index")
        acc = f"%l{k}"
    lines.append(f"    %z = arith.addi({acc}, %c0) : index")
    lines.append("    %out = arith.index_cast(%z) : i64")
    lines.append("    memref.store(%out, %view, %i)")
    lines.append("  }")
    lines += ["  func.return", "}"]
    return "\n".join(lines) + "\n"


def pattern_args(seed: int = 0) -> list:
    rng = random.Random(seed)
    return [MemRef([0] * 8, (8,)), rng.randint(-6, 6), rng.randint(-6, 6)]


# -- random scripts for script-level optimization ---------------------------------------

OPT_PAYLOAD = """\
func.func @main {
^bb0(%A: memref<8x8xi64>, %a: index):
  %c0 = arith.constant {value = 0} : index
  %c1 = arith.constant {value = 1} : index
  %c8 = arith.constant {value = 8} : index
  scf.for(%c0, %c8, %c1) {
  ^bb0(%i: index):
    scf.for(%c0, %c8, %c1) {
    ^bb0(%j: index):
      %x = arith.muli(%a, %c8) : index
      %s = arith.addi(%i, %x) : index
      %t = arith.addi(%s, %j) : index
      %v = arith.index_cast(%t) : i64
      memref.store(%v, %A, %i, %j)
    }
  }
  func.return
}
"""


def random_opt_script(seed: int) -> str:
    """A script over the 8x8 nest of ``OPT_PAYLOAD`` mixing real transforms with removable
    ones (unit unroll, zero tiling, redundant retiling) and includes.

    Sizes are powers of two, so each either divides a trip count or exceeds
    it and leaves the loop alone; every generated script applies cleanly."""
    rng = random.Random(seed)
    helpers: List[str] = []
    body = ['  %loops = structured.match(%root) {ops = ["scf.for"], outermost = true} : !transform.op<"scf.for">']
    cur, n = "%loops", 0

    def fresh(prefix: str) -> str:
        nonlocal n
        n += 1
        return f"%{prefix}{n}"

    for _ in range(rng.randint(1, 5)):
        kind = rng.choice(["unroll1", "tile0", "tile", "retile", "param_tile", "include", "hoist"])
        if kind == "unroll1":
            # a factor-1 unroll leaves the loop in place but still consumes the handle
            body.append(f"  loop.unroll({cur}) {{factor = 1}}")
            fresh_h = fresh("m")
            body.append(f'  {fresh_h} = structured.match(%root) {{ops = ["scf.for"], outermost = true}} '
                        ': !transform.op<"scf.for">')
            cur = fresh_h
        elif kind == "tile0":
            a, b = fresh("t"), fresh("p")
            body.append(f'  {a}, {b} = loop.tile({cur}) {{tile_sizes = [0, 0]}} '
                        ': (!transform.op<"scf.for">, !transform.op<"scf.for">)')
            cur = a
        elif kind in ("tile", "retile", "param_tile"):
            s = [rng.choice([0, 2, 4]), rng.choice([0, 2, 4])]
            a, b = fresh("t"), fresh("p")
            if kind == "param_tile":
                p = fresh("s")
                body.append(f"  {p} = param.constant {{value = [{s[0]}, {s[1]}]}} : !transform.param")
                body.append(f'  {a}, {b} = loop.tile({cur}, {p}) '
                            ': (!transform.op<"scf.for">, !transform.op<"scf.for">)')
            else:
                body.append(f'  {a}, {b} = loop.tile({cur}) {{tile_sizes = [{s[0]}, {s[1]}]}} '
                            ': (!transform.op<"scf.for">, !transform.op<"scf.for">)')
            if kind == "retile" and s[0]:
                c, d = fresh("t"), fresh("p")
                s2 = [s[0] + rng.randint(1, 3), 0]
                body.append(f'  {c}, {d} = loop.tile({b}) {{tile_sizes = [{s2[0]}, {s2[1]}]}} '
                            ': (!transform.op<"scf.for">, !transform.op<"scf.for">)')
            fresh_h = fresh("m")
            body.append(f'  {fresh_h} = structured.match(%root) {{ops = ["scf.for"], outermost = true}} '
                        ': !transform.op<"scf.for">')
            cur = fresh_h
        elif kind == "include":
            name = f"helper{len(helpers)}"
            helpers.append(
                f"transform.named_sequence @{name} {{\n"
                "^bb0(%h: !transform.op<\"scf.for\">):\n"
                "  %t, %p = loop.tile(%h) {tile_sizes = [" + f"{rng.choice([0, 2])}, {rng.choice([0, 4])}" + "]} "
                ': (!transform.op<"scf.for">, !transform.op<"scf.for">)\n'
                "  loop.unroll(%p) {factor = 1}\n"
                "  transform.yield\n"
                "}\n")
            body.append(f"  transform.include({cur}) {{callee = @{name}}}")
            fresh_h = fresh("m")
            body.append(f'  {fresh_h} = structured.match(%root) {{ops = ["scf.for"], outermost = true}} '
                        ': !transform.op<"scf.for">')
            cur = fresh_h
        else:
            body.append(f"  %h{n} = loop.hoist_invariants({cur}) : !transform.any_op")
            n += 1
    main = ("transform.named_sequence @transform_main {\n^bb0(%root: !transform.any_op):\n"
            + "\n".join(body) + "\n}\n")
    return "".join(helpers) + main


def match_script(body: Sequence[str]) -> str:
    """``@transform_main`` with ``%loops`` bound to the outermost loops."""
    lines = [
        "transform.named_sequence @transform_main {",
        "^bb0(%root: !transform.any_op):",
        '  %loops = structured.match(%root) {ops = ["scf.for"], outermost = true} : !transform.op<"scf.for">',
    ]
    return "\n".join(lines + ["  " + b for b in body] + ["}"]) + "\n"


def run_both(payload: str, script: str, args: Sequence, entry: str = "main", kernels=()):
    """Execute ``payload`` before and after applying ``script``.

    Returns (original result, transformed result, transformed module)."""
    from .executor import execute
    from .interp import apply_script
    from .payload import parse_payload
    from .script import parse_transform

    before = parse_payload(payload)
    after = parse_payload(payload)
    apply_script(parse_transform(script), after, kernels=kernels)
    r0 = execute(before, entry, args)[0]
    r1 = execute(after, entry, args)[0]
    return r0, r1, after
