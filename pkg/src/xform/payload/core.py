"""Core in-memory IR: values, operations, blocks and regions.

The same structures hold payload programs and transform scripts. Operation ids
come from a process-wide counter and are never reused, so a stale id simply
fails to resolve.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .types import Type

_ids = itertools.count(1)


def fresh_id() -> int:
    return next(_ids)


@dataclass(frozen=True)
class Sym:
    """A symbol reference attribute such as ``@use``."""

    name: str

    def __str__(self) -> str:
        return "@" + self.name


class Value:
    __slots__ = ("type", "owner", "index", "hint", "users")

    def __init__(self, type: Type, owner, index: int, hint: Optional[str] = None):
        self.type = type
        self.owner = owner  # Operation for results, Block for block arguments
        self.index = index
        self.hint = hint
        self.users: List[Operation] = []

    @property
    def defining_op(self) -> Optional["Operation"]:
        return self.owner if isinstance(self.owner, Operation) else None

    @property
    def is_block_arg(self) -> bool:
        return isinstance(self.owner, Block)

    def replace_all_uses_with(self, other: "Value", only_if=None) -> None:
        for user in list(self.users):
            if only_if is not None and not only_if(user):
                continue
            user.replace_operand(self, other)

    def __repr__(self) -> str:
        return f"<Value %{self.hint or '?'}: {self.type}>"


class Operation:
    __slots__ = (
        "id", "name", "operands", "results", "attributes", "regions",
        "successors", "parent", "loc", "erased",
    )

    def __init__(
        self,
        name: str,
        operands: Sequence[Value] = (),
        result_types: Sequence[Type] = (),
        attributes: Optional[Dict[str, object]] = None,
        regions: Sequence["Region"] = (),
        successors: Sequence["Block"] = (),
        loc: Optional[Tuple[int, int]] = None,
        op_id: Optional[int] = None,
        result_hints: Sequence[Optional[str]] = (),
    ):
        self.id = fresh_id() if op_id is None else op_id
        self.name = name
        self.operands: List[Value] = []
        self.attributes: Dict[str, object] = dict(attributes or {})
        self.results = [
            Value(t, self, i, result_hints[i] if i < len(result_hints) else None)
            for i, t in enumerate(result_types)
        ]
        self.regions: List[Region] = []
        self.successors: List[Block] = list(successors)
        self.parent: Optional[Block] = None
        self.loc = loc
        self.erased = False
        for v in operands:
            self.add_operand(v)
        for r in regions:
            self.add_region(r)

    # -- structure -------------------------------------------------------
    @property
    def dialect(self) -> str:
        return self.name.split(".", 1)[0]

    @property
    def result(self) -> Value:
        assert len(self.results) == 1, f"{self.name} has {len(self.results)} results"
        return self.results[0]

    @property
    def parent_op(self) -> Optional["Operation"]:
        if self.parent is None or self.parent.parent is None:
            return None
        return self.parent.parent.parent

    @property
    def body(self) -> "Block":
        """Entry block of the first region."""
        return self.regions[0].blocks[0]

    @property
    def segment_sizes(self) -> Optional[List[int]]:
        seg = self.attributes.get("operand_segment_sizes")
        return list(seg) if seg is not None else None

    def operand_group(self, i: int) -> List[Value]:
        seg = self.segment_sizes
        if seg is None:
            raise ValueError(f"{self.name} has no operand segments")
        start = sum(seg[:i])
        return self.operands[start:start + seg[i]]

    def add_operand(self, v: Value) -> None:
        self.operands.append(v)
        v.users.append(self)

    def set_operands(self, values: Sequence[Value]) -> None:
        for v in self.operands:
            v.users.remove(self)
        self.operands = []
        for v in values:
            self.add_operand(v)

    def replace_operand(self, old: Value, new: Value) -> None:
        for i, v in enumerate(self.operands):
            if v is old:
                self.operands[i] = new
                old.users.remove(self)
                new.users.append(self)

    def drop_operands(self) -> None:
        for v in self.operands:
            try:
                v.users.remove(self)
            except ValueError:
                pass
        self.operands = []

    def add_region(self, region: "Region") -> "Region":
        region.parent = self
        self.regions.append(region)
        return region

    def is_ancestor_of(self, other: "Operation") -> bool:
        """True if ``other`` is this op or nested within it."""
        cur: Optional[Operation] = other
        while cur is not None:
            if cur is self:
                return True
            cur = cur.parent_op
        return False

    def walk(self) -> Iterator["Operation"]:
        """Preorder walk, this op included."""
        stack = [self]
        while stack:
            op = stack.pop()
            yield op
            for region in reversed(op.regions):
                for block in reversed(region.blocks):
                    stack.extend(reversed(block.ops))

    def nested_ops(self) -> Iterator["Operation"]:
        it = self.walk()
        next(it)
        return it

    def has_uses(self) -> bool:
        return any(r.users for r in self.results)

    # -- cloning ---------------------------------------------------------
    def clone(self, value_map: Optional[Dict[Value, Value]] = None, keep_ids: bool = False,
              block_map: Optional[Dict["Block", "Block"]] = None) -> "Operation":
        """Deep copy; operands are remapped through ``value_map`` (which is updated)."""
        value_map = {} if value_map is None else value_map
        block_map = {} if block_map is None else block_map
        new = Operation(
            self.name,
            [value_map.get(v, v) for v in self.operands],
            [r.type for r in self.results],
            dict(self.attributes),
            loc=self.loc,
            op_id=self.id if keep_ids else None,
            result_hints=[r.hint for r in self.results],
        )
        for old, res in zip(self.results, new.results):
            value_map[old] = res
        for region in self.regions:
            new.add_region(region.clone(value_map, keep_ids, block_map))
        new.successors = [block_map.get(b, b) for b in self.successors]
        return new

    def __repr__(self) -> str:
        return f"<Op {self.name}#{self.id}>"


class Block:
    __slots__ = ("args", "ops", "parent")

    def __init__(self, arg_types: Sequence[Type] = (), arg_hints: Sequence[Optional[str]] = ()):
        self.args = [
            Value(t, self, i, arg_hints[i] if i < len(arg_hints) else None)
            for i, t in enumerate(arg_types)
        ]
        self.ops: List[Operation] = []
        self.parent: Optional[Region] = None

    def add_arg(self, t: Type, hint: Optional[str] = None) -> Value:
        v = Value(t, self, len(self.args), hint)
        self.args.append(v)
        return v

    def append(self, op: Operation) -> Operation:
        assert op.parent is None, "op already attached"
        op.parent = self
        self.ops.append(op)
        return op

    def insert(self, index: int, op: Operation) -> Operation:
        assert op.parent is None, "op already attached"
        op.parent = self
        self.ops.insert(index, op)
        return op

    def insert_before(self, anchor: Operation, op: Operation) -> Operation:
        return self.insert(self.index_of(anchor), op)

    def insert_after(self, anchor: Operation, op: Operation) -> Operation:
        return self.insert(self.index_of(anchor) + 1, op)

    def index_of(self, op: Operation) -> int:
        for i, o in enumerate(self.ops):
            if o is op:
                return i
        raise ValueError(f"{op!r} not in block")

    def detach(self, op: Operation) -> None:
        del self.ops[self.index_of(op)]
        op.parent = None

    @property
    def terminator(self) -> Optional[Operation]:
        return self.ops[-1] if self.ops else None

    @property
    def parent_op(self) -> Optional[Operation]:
        return self.parent.parent if self.parent is not None else None

    def clone_into(self, value_map: Dict[Value, Value], keep_ids: bool,
                   block_map: Dict["Block", "Block"]) -> "Block":
        new = block_map.get(self)
        if new is None:
            new = Block([a.type for a in self.args], [a.hint for a in self.args])
            block_map[self] = new
        for old, arg in zip(self.args, new.args):
            value_map[old] = arg
        return new


class Region:
    __slots__ = ("blocks", "parent")

    def __init__(self, blocks: Sequence[Block] = ()):
        self.blocks: List[Block] = []
        self.parent: Optional[Operation] = None
        for b in blocks:
            self.add_block(b)

    def add_block(self, block: Block) -> Block:
        block.parent = self
        self.blocks.append(block)
        return block

    def clone(self, value_map: Dict[Value, Value], keep_ids: bool = False,
              block_map: Optional[Dict[Block, Block]] = None) -> "Region":
        block_map = {} if block_map is None else block_map
        new = Region()
        # blocks are created up front so forward successor references resolve
        copies = [b.clone_into(value_map, keep_ids, block_map) for b in self.blocks]
        for b in copies:
            new.add_block(b)
        for old, nb in zip(self.blocks, copies):
            for op in old.ops:
                nb.append(op.clone(value_map, keep_ids, block_map))
        return new


def erase_op(op: Operation) -> None:
    """Detach ``op`` from its block and mark it and everything nested in it erased."""
    if op.parent is not None:
        op.parent.detach(op)
    for nested in op.walk():
        nested.drop_operands()
        nested.erased = True


def new_module() -> Operation:
    return Operation("builtin.module", regions=[Region([Block()])])


def symbol_table(module: Operation) -> Dict[str, Operation]:
    table = {}
    for op in module.body.ops:
        name = op.attributes.get("sym_name")
        if isinstance(name, str):
            table[name] = op
    return table


def op_index(root: Operation) -> Dict[int, Operation]:
    return {op.id: op for op in root.walk()}
