"""Constrained search over the parameters of a script template.

A template is script text with ``$name`` placeholders (``string.Template``
syntax); each evaluation substitutes an assignment, applies the script to a
fresh clone of the payload and scores it by the executor's weighted cost.
"""

from __future__ import annotations

import ast
import csv
import io
import itertools
import math
import random
import re
import string
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .executor import default_args, execute
from .interp import InterpError, apply_script
from .payload.core import Operation
from .script import parse_transform


class SpaceError(ValueError):
    pass


# -- constraint expressions ---------------------------------------------------

_CMP = {
    ast.Eq: lambda a, b: a == b, ast.NotEq: lambda a, b: a != b, ast.Lt: lambda a, b: a < b,
    ast.LtE: lambda a, b: a <= b, ast.Gt: lambda a, b: a > b, ast.GtE: lambda a, b: a >= b,
}


def _mod(a: int, b: int) -> int:
    # size 0 stands for "not tiled", which every dimension admits
    return 0 if b == 0 else a % b


_BIN = {
    ast.Add: lambda a, b: a + b, ast.Sub: lambda a, b: a - b, ast.Mult: lambda a, b: a * b,
    ast.Mod: _mod, ast.FloorDiv: lambda a, b: 0 if b == 0 else a // b,
}


@dataclass
class Expr:
    """A parsed constraint or bound: integers, names, ``+ - * / %``,
    comparisons, ``&&``, ``||``, ``!`` and ``where(cond, expr)``."""

    text: str
    tree: ast.Expression
    names: Tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "Expr":
        py = text.replace("%%", "%").replace("&&", " and ").replace("||", " or ")
        py = re.sub(r"!(?!=)", " not ", py)
        py = py.replace("/", "//").replace("////", "//")
        try:
            tree = ast.parse(py.strip(), mode="eval")
        except SyntaxError as exc:
            raise SpaceError(f"malformed expression {text!r}: {exc.msg}") from None
        names = []
        for node in ast.walk(tree):
            if isinstance(node, ast.Name):
                if node.id != "where":
                    names.append(node.id)
            elif isinstance(node, ast.Call):
                if not (isinstance(node.func, ast.Name) and node.func.id == "where" and len(node.args) == 2
                        and not node.keywords):
                    raise SpaceError(f"only where(cond, expr) calls are allowed in {text!r}")
            elif isinstance(node, ast.Constant):
                if not isinstance(node.value, int) or isinstance(node.value, bool):
                    raise SpaceError(f"only integer literals are allowed in {text!r}")
            elif not isinstance(node, (ast.Expression, ast.BoolOp, ast.And, ast.Or, ast.UnaryOp, ast.Not,
                                       ast.USub, ast.BinOp, ast.Compare, ast.Load, *_CMP, *_BIN)):
                raise SpaceError(f"unsupported syntax {type(node).__name__} in {text!r}")
        return cls(text, tree, tuple(dict.fromkeys(names)))

    def eval(self, env: Dict[str, int]) -> int:
        return _eval(self.tree.body, env, self.text)


def _eval(node, env, text) -> int:
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        if node.id not in env:
            raise SpaceError(f"unknown name '{node.id}' in {text!r}")
        return env[node.id]
    if isinstance(node, ast.BoolOp):
        vals = (_eval(v, env, text) for v in node.values)
        return int(all(vals) if isinstance(node.op, ast.And) else any(vals))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env, text)
        return int(not v) if isinstance(node.op, ast.Not) else -v
    if isinstance(node, ast.BinOp):
        return _BIN[type(node.op)](_eval(node.left, env, text), _eval(node.right, env, text))
    if isinstance(node, ast.Compare):
        left = _eval(node.left, env, text)
        for op, right_node in zip(node.ops, node.comparators):
            right = _eval(right_node, env, text)
            if not _CMP[type(op)](left, right):
                return 0
            left = right
        return 1
    if isinstance(node, ast.Call):  # where(cond, expr): expr only matters when cond holds
        cond, expr = node.args
        return int(not _eval(cond, env, text) or bool(_eval(expr, env, text)))
    raise SpaceError(f"cannot evaluate {text!r}")


# -- spaces -----------------------------------------------------------------

@dataclass
class Param:
    name: str
    lo: int
    hi: int
    constraints: List[Expr] = field(default_factory=list)


@dataclass
class ParamSpace:
    params: List[Param]
    dims: Dict[str, int] = field(default_factory=dict)

    @property
    def names(self) -> List[str]:
        return [p.name for p in self.params]

    def feasible(self, assignment: Dict[str, int]) -> bool:
        missing = [n for n in self.names if n not in assignment]
        if missing:
            raise SpaceError(f"assignment lacks {', '.join(missing)}")
        env = dict(self.dims)
        env.update(assignment)
        for p in self.params:
            if not p.lo <= assignment[p.name] <= p.hi:
                return False
            if not all(c.eval(env) for c in p.constraints):
                return False
        return True

    def points(self):
        """All assignments in the ranges, in ordinal order."""
        ranges = [range(p.lo, p.hi + 1) for p in self.params]
        for values in itertools.product(*ranges):
            yield dict(zip(self.names, values))

    def feasible_points(self) -> List[Dict[str, int]]:
        return [a for a in self.points() if self.feasible(a)]


def _split_top(text: str) -> List[str]:
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


_PARAM_RE = re.compile(
    r"^(\w+)\s*:\s*\{\s*range\s*:\s*\[(.*?)\]\s*(?:,\s*constraints\s*:\s*\[(.*)\])?\s*\}\s*$")


def parse_space(text: str) -> ParamSpace:
    """Read a space file: an optional ``dims: A=1, B=2`` line, then one
    ``name: {range:[lo, hi], constraints:[expr, ...]}`` line per parameter."""
    dims: Dict[str, int] = {}
    params: List[Param] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("dims:"):
            for item in _split_top(line[5:]):
                k, _, v = item.partition("=")
                try:
                    dims[k.strip()] = int(v)
                except ValueError:
                    raise SpaceError(f"line {lineno}: bad dimension {item!r}") from None
            continue
        m = _PARAM_RE.match(line)
        if not m:
            raise SpaceError(f"line {lineno}: cannot parse {line!r}")
        name, rng, cons = m.group(1), m.group(2), m.group(3) or ""
        bounds = _split_top(rng)
        if len(bounds) != 2:
            raise SpaceError(f"line {lineno}: range needs [lo, hi]")
        env = dict(dims)
        lo, hi = (Expr.parse(b).eval(env) for b in bounds)
        params.append(Param(name, lo, hi, [Expr.parse(c) for c in _split_top(cons)]))
    known = set(dims) | {p.name for p in params}
    for p in params:
        for c in p.constraints:
            bad = [n for n in c.names if n not in known]
            if bad:
                raise SpaceError(f"constraint {c.text!r} of {p.name} references unknown name '{bad[0]}'")
    if not params:
        raise SpaceError("space declares no parameters")
    return ParamSpace(params, dims)


# -- evaluation -------------------------------------------------------------

INF = math.inf


@dataclass
class TuneEval:
    iteration: int
    assignment: Dict[str, int]
    cost: float
    best: float


@dataclass
class TuneTrace:
    evals: List[TuneEval] = field(default_factory=list)

    def record(self, assignment: Dict[str, int], cost: float) -> None:
        best = min([cost] + [e.best for e in self.evals[-1:]])
        self.evals.append(TuneEval(len(self.evals), dict(assignment), cost, best))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "assignment", "cost", "best"])
        for e in self.evals:
            w.writerow([e.iteration, format_assignment(e.assignment), _num(e.cost), _num(e.best)])
        return buf.getvalue()


def _num(x: float) -> str:
    return "inf" if x == INF else repr(float(x))


def format_assignment(a: Dict[str, int]) -> str:
    return ";".join(f"{k}={v}" for k, v in a.items())


def template_names(template: str) -> List[str]:
    names = []
    for m in string.Template.pattern.finditer(template):
        n = m.group("named") or m.group("braced")
        if n and n not in names:
            names.append(n)
    return names


class Evaluator:
    """Scores assignments; silenceable script failures score +inf."""

    def __init__(self, template: str, module: Operation, entry: str = "main", args: Optional[Sequence] = None,
                 kernels=(), cost_model=None):
        self.template = string.Template(template)
        self.module = module
        self.entry = entry
        self.args = list(args) if args is not None else default_args(module, entry)
        self.kernels = kernels
        self.cost_model = cost_model

    def __call__(self, assignment: Dict[str, int]) -> float:
        text = self.template.substitute({k: str(v) for k, v in assignment.items()})
        script = parse_transform(text)
        payload = self.module.clone()
        try:
            apply_script(script, payload, kernels=self.kernels)
        except InterpError as exc:
            if exc.severity == "silenceable":
                return INF
            raise
        _, report = execute(payload, self.entry, self.args, cost_model=self.cost_model)
        return float(report.weighted_cost)


def baseline_cost(module: Operation, entry: str = "main", args: Optional[Sequence] = None, cost_model=None) -> float:
    args = list(args) if args is not None else default_args(module, entry)
    return float(execute(module, entry, args, cost_model=cost_model)[1].weighted_cost)


# -- strategies --------------------------------------------------------------

def _key(space: ParamSpace, a: Dict[str, int]) -> Tuple[int, ...]:
    return tuple(a[n] for n in space.names)


def tune(template: str, space: ParamSpace, module: Operation, budget: int, strategy: str = "exhaustive",
         seed: int = 0, entry: str = "main", args: Optional[Sequence] = None, kernels=(),
         evaluator: Optional[Callable[[Dict[str, int]], float]] = None) -> Tuple[Dict[str, int], TuneTrace]:
    """Search ``space`` for the assignment minimizing weighted cost.

    Only feasible assignments are evaluated, each at most once; ``budget``
    caps the number of evaluations.
    """
    if budget < 1:
        raise SpaceError("budget must be >= 1")
    names = template_names(template)
    if sorted(names) != sorted(space.names):
        raise SpaceError(f"template parameters {sorted(names)} do not match space parameters {sorted(space.names)}")
    feasible = space.feasible_points()
    if not feasible:
        raise SpaceError("the space has no feasible assignment")
    score = evaluator or Evaluator(template, module, entry, args, kernels)
    trace = TuneTrace()
    cache: Dict[Tuple[int, ...], float] = {}

    def evaluate(a: Dict[str, int]) -> float:
        k = _key(space, a)
        if k not in cache:
            cache[k] = score(a)
            trace.record(a, cache[k])
        return cache[k]

    if strategy == "exhaustive":
        for a in feasible[:budget]:
            evaluate(a)
    elif strategy == "random":
        rng = random.Random(seed)
        for a in rng.sample(feasible, min(budget, len(feasible))):
            evaluate(a)
    elif strategy == "coorddesc":
        _coordinate_descent(space, feasible, budget, seed, evaluate, cache)
    else:
        raise SpaceError(f"unknown strategy '{strategy}'")
    best = min(trace.evals, key=lambda e: (e.cost, e.iteration))
    return best.assignment, trace


def _coordinate_descent(space, feasible, budget, seed, evaluate, cache) -> None:
    """Cycle the parameters in declaration order, moving to the best feasible
    neighbor (one step up or down among the values feasible for that
    parameter); restart from a random unvisited point at a local minimum.
    A size of 0 sorts last since it leaves the loop whole."""
    rng = random.Random(seed)
    order = list(feasible)
    rng.shuffle(order)

    def neighbors(cur: Dict[str, int], p: Param) -> List[Dict[str, int]]:
        # 0 leaves a loop untiled, i.e. behaves like the largest size
        values = sorted((v for v in range(p.lo, p.hi + 1) if space.feasible({**cur, p.name: v})),
                        key=lambda v: (v == 0, v))
        i = values.index(cur[p.name])
        return [{**cur, p.name: values[j]} for j in (i - 1, i + 1) if 0 <= j < len(values)]

    start = iter(order)
    cur = next(start)
    cost = evaluate(cur)
    while len(cache) < budget:
        moved = False
        for p in space.params:
            for nb in neighbors(cur, p):
                if len(cache) >= budget and _key(space, nb) not in cache:
                    return
                c = evaluate(nb)
                if c < cost:
                    cur, cost, moved = nb, c, True
        if not moved:
            cur = next((a for a in start if _key(space, a) not in cache), None)
            if cur is None or len(cache) >= budget:
                return
            cost = evaluate(cur)
