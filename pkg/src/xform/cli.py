"""Command-line entry point: ``xform <command> ...``.

Exit codes: 0 success, 1 silenceable failure escaping the script, 2 definite
failure (including malformed input), 3 a requested check found problems.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import List, Optional, Sequence

from .payload.diagnostics import Diagnostic, IRError

EXIT_OK, EXIT_SILENCEABLE, EXIT_DEFINITE, EXIT_CHECK = 0, 1, 2, 3


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as f:
        return f.read()


def _emit(diag: Diagnostic, file: Optional[str]) -> None:
    print(diag.format(file), file=sys.stderr)


class _Fail(Exception):
    def __init__(self, code: int, diags: Sequence[Diagnostic] = (), file: Optional[str] = None):
        super().__init__(code)
        self.code = code
        self.diags = list(diags)
        self.file = file


def _load_payload(path: str):
    from .payload import parse_payload

    try:
        return parse_payload(_read(path))
    except IRError as exc:
        raise _Fail(EXIT_DEFINITE, [exc.diagnostic], path) from None


def _load_script(path: str):
    from .script import parse_transform

    try:
        return parse_transform(_read(path))
    except IRError as exc:
        raise _Fail(EXIT_DEFINITE, [exc.diagnostic], path) from None


def _params(items: Sequence[str]) -> dict:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise _Fail(EXIT_DEFINITE, [Diagnostic("error", f"--param expects name=value, got {item!r}")])
        try:
            out[name.strip().lstrip("%")] = json.loads(value)
        except json.JSONDecodeError:
            out[name.strip().lstrip("%")] = value
    return out


def _kernels(path: Optional[str]):
    from .transforms import parse_kernel_registry

    if not path:
        return []
    try:
        return parse_kernel_registry(_read(path))
    except ValueError as exc:
        raise _Fail(EXIT_DEFINITE, [Diagnostic("error", str(exc))], path) from None


def _exec_args(module, entry: str, overrides: Sequence[str], seed: int) -> list:
    from .executor import default_args

    args = default_args(module, entry, seed)
    for item in overrides or ():
        idx, _, value = item.partition("=")
        args[int(idx)] = json.loads(value)
    return args


# -- commands --------------------------------------------------------------

def cmd_run(ns) -> int:
    from .interp import Interpreter, InterpError
    from .payload import print_payload
    from .static_check import check_static

    module = _load_payload(ns.payload)
    script = _load_script(ns.script)
    if ns.check_static:
        report = check_static(script, ns.initial, ns.final, entry=ns.entry)
        for f in report.findings:
            _emit(f.diagnostic(), ns.script)
        if not report.ok:
            return EXIT_CHECK
    interp = Interpreter(script, module, _params(ns.param), _kernels(ns.kernels), check_dynamic=ns.check_dynamic)
    start = time.perf_counter()
    try:
        result = interp.run(ns.entry)
    except InterpError as exc:
        if ns.trace:
            for t in exc.trace:
                print(t.to_json(), file=sys.stderr)
        for d in interp.diagnostics:
            _emit(d, ns.script)
        diag = exc.diagnostic()
        _emit(diag, ns.script)
        if exc.payload_loc:
            _emit(Diagnostic("remark", "payload op involved here", exc.payload_loc), ns.payload)
        return EXIT_SILENCEABLE if exc.severity == "silenceable" else EXIT_DEFINITE
    elapsed = time.perf_counter() - start
    if ns.trace:
        for t in result.trace:
            print(t.to_json(), file=sys.stderr)
    for d in result.diagnostics:
        _emit(d, ns.script)
    if ns.time:
        print(f"interpretation took {elapsed * 1e3:.3f} ms", file=sys.stderr)
    print(print_payload(result.module), end="")
    if ns.check_dynamic and any(d.severity == "error" for d in result.diagnostics):
        return EXIT_CHECK
    return EXIT_OK


def cmd_exec(ns) -> int:
    from .executor import ExecError, execute

    module = _load_payload(ns.payload)
    try:
        args = _exec_args(module, ns.entry, ns.arg, ns.seed)
        res, report = execute(module, ns.entry, args)
    except ExecError as exc:
        _emit(Diagnostic("error", str(exc), exc.loc), ns.payload)
        return EXIT_DEFINITE
    out = {
        "returns": [r.buf if hasattr(r, "buf") else r for r in res.returns],
        "buffers": res.buffers,
        "calls": [[n, list(a)] for n, a in res.calls],
        "cost": json.loads(report.to_json()),
    }
    print(json.dumps(out))
    return EXIT_OK


def cmd_check(ns) -> int:
    from .static_check import check_static

    code = EXIT_OK
    if ns.payload:
        _load_payload(ns.payload)
    script = _load_script(ns.script)
    report = check_static(script, ns.initial, ns.final, entry=ns.entry)
    for f in report.findings:
        _emit(f.diagnostic(), ns.script)
    if not report.ok:
        code = EXIT_CHECK
    else:
        print("static check passed")
    return code


def cmd_opt_script(ns) -> int:
    from .script import ScriptError
    from .scriptopt import analyze_invalidation, infer_pass_options, inline_includes, simplify_script

    script = _load_script(ns.script)
    try:
        if ns.inline:
            script = inline_includes(script)
        if ns.simplify:
            script = simplify_script(script)
        if ns.infer_options:
            script = infer_pass_options(script)
    except ScriptError as exc:
        raise _Fail(EXIT_DEFINITE, [exc.diagnostic], ns.script) from None
    code = EXIT_OK
    if ns.check_invalidation:
        diags = analyze_invalidation(script)
        for d in diags:
            _emit(d, ns.script)
        if diags:
            code = EXIT_CHECK
    print(script.print(), end="")
    return code


def cmd_pipeline_to_transform(ns) -> int:
    from .errors import TransformFailure
    from .passes import pipeline_to_transform

    try:
        print(pipeline_to_transform(ns.pipeline), end="")
    except IRError as exc:
        raise _Fail(EXIT_DEFINITE, [exc.diagnostic]) from None
    except TransformFailure as exc:
        raise _Fail(EXIT_DEFINITE, [Diagnostic("error", exc.message)]) from None
    return EXIT_OK


def cmd_bisect(ns) -> int:
    from .bisect import CostProbe, bisect_patterns
    from .passes import PATTERNS

    module = _load_payload(ns.payload)
    base = _load_script(ns.script) if ns.script else None
    names = [p.strip() for p in ns.patterns.split(",") if p.strip()] if ns.patterns else list(PATTERNS)
    probe = CostProbe(module, base, ns.entry, _exec_args(module, ns.entry, ns.arg, ns.seed))
    result = bisect_patterns(names, probe)
    for removed, cost in result.log:
        print(f"probe without [{', '.join(removed)}]: cost {cost:g}", file=sys.stderr)
    if result.culprit is None:
        print("no culprit")
        return EXIT_SILENCEABLE
    print(f"culprit: {result.culprit} ({result.probes} probes, reference cost {result.reference_cost:g})")
    return EXIT_OK


def cmd_tune(ns) -> int:
    from .autotune import SpaceError, baseline_cost, format_assignment, parse_space, tune

    module = _load_payload(ns.payload)
    try:
        space = parse_space(_read(ns.space))
        args = _exec_args(module, ns.entry, ns.arg, ns.seed)
        best, trace = tune(_read(ns.template), space, module, ns.budget, ns.strategy, ns.seed, ns.entry, args,
                           _kernels(ns.kernels))
    except SpaceError as exc:
        raise _Fail(EXIT_DEFINITE, [Diagnostic("error", str(exc))], ns.space) from None
    csv_text = trace.to_csv()
    if ns.csv:
        with open(ns.csv, "w") as f:
            f.write(csv_text)
    else:
        print(csv_text, end="")
    base = baseline_cost(module, ns.entry, args)
    cost = min(e.cost for e in trace.evals)
    print(f"best {format_assignment(best)} cost {cost:g} (untransformed {base:g}, "
          f"{len(trace.evals)} evaluations)", file=sys.stderr)
    return EXIT_OK


def cmd_time(ns) -> int:
    from .timing import ModeMismatch, time_pipeline

    module = _load_payload(ns.payload)
    try:
        report = time_pipeline(module, ns.pipeline, reps=ns.reps)
    except ModeMismatch as exc:
        raise _Fail(EXIT_DEFINITE, [Diagnostic("error", str(exc))]) from None
    print(report.summary())
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xform", description="Transform-script interpreter and tools.")
    sub = p.add_subparsers(dest="command", required=True)

    def exec_opts(sp):
        sp.add_argument("--entry", default="main", help="payload function to execute")
        sp.add_argument("--arg", action="append", default=[], metavar="N=VALUE",
                        help="override scalar argument N (default arguments are seeded)")
        sp.add_argument("--seed", type=int, default=0, help="seed for generated memref arguments")

    r = sub.add_parser("run", help="apply a transform script to a payload")
    r.add_argument("payload")
    r.add_argument("script")
    r.add_argument("--entry", default="transform_main", help="named sequence to run")
    r.add_argument("--param", action="append", default=[], metavar="NAME=VALUE", help="script parameter")
    r.add_argument("--kernels", help="library kernel registry file")
    r.add_argument("--check-static", action="store_true", help="check conditions statically first")
    r.add_argument("--check-dynamic", action="store_true", help="check conditions around every step")
    r.add_argument("--initial", default="func.*, scf.*, arith.*, memref.*", help="initial op set")
    r.add_argument("--final", default="llvmlite.*", help="op set allowed at the end")
    r.add_argument("--trace", action="store_true", help="print a JSON trace line per transform op")
    r.add_argument("--time", action="store_true", help="report interpretation time")
    r.set_defaults(fn=cmd_run)

    e = sub.add_parser("exec", help="execute a payload and report its cost")
    e.add_argument("payload")
    exec_opts(e)
    e.set_defaults(fn=cmd_exec)

    c = sub.add_parser("check", help="statically check a script's pre/post-conditions")
    c.add_argument("script")
    c.add_argument("--payload", help="also parse and verify this payload")
    c.add_argument("--entry", default="transform_main")
    c.add_argument("--initial", default="func.*, scf.*, arith.*, memref.*")
    c.add_argument("--final", default="llvmlite.*")
    c.set_defaults(fn=cmd_check)

    o = sub.add_parser("opt-script", help="transform or analyze a script")
    o.add_argument("script")
    o.add_argument("--inline", action="store_true", help="inline includes")
    o.add_argument("--simplify", action="store_true", help="drop no-op transforms, fold constant params")
    o.add_argument("--check-invalidation", action="store_true", help="report uses of invalidated handles")
    o.add_argument("--infer-options", action="store_true", help="infer instrument-accumulate op= options")
    o.set_defaults(fn=cmd_opt_script)

    t = sub.add_parser("pipeline-to-transform", help="convert a pass pipeline string to a script")
    t.add_argument("pipeline")
    t.set_defaults(fn=cmd_pipeline_to_transform)

    b = sub.add_parser("bisect", help="find the pattern responsible for a cost regression")
    b.add_argument("payload")
    b.add_argument("--script", help="base script applied before the patterns")
    b.add_argument("--patterns", help="comma-separated pattern list (default: all)")
    exec_opts(b)
    b.set_defaults(fn=cmd_bisect)

    u = sub.add_parser("tune", help="search script parameters for the lowest cost")
    u.add_argument("template", help="script text with $name placeholders")
    u.add_argument("space", help="parameter space file")
    u.add_argument("payload")
    u.add_argument("--budget", type=int, default=100)
    u.add_argument("--strategy", choices=["exhaustive", "random", "coorddesc"], default="coorddesc")
    u.add_argument("--kernels", help="library kernel registry file")
    u.add_argument("--csv", help="write the trace here instead of stdout")
    exec_opts(u)
    u.set_defaults(fn=cmd_tune)

    m = sub.add_parser("time", help="compare direct and interpreted pipeline execution time")
    m.add_argument("payload")
    m.add_argument("pipeline")
    m.add_argument("--reps", type=int, default=5)
    m.set_defaults(fn=cmd_time)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    from .errors import TransformFailure
    from .interp import InterpError

    ns = build_parser().parse_args(argv)
    try:
        return ns.fn(ns)
    except _Fail as exc:
        for d in exc.diags:
            _emit(d, exc.file)
        return exc.code
    except IRError as exc:
        _emit(exc.diagnostic, None)
        return EXIT_DEFINITE
    except (TransformFailure, InterpError) as exc:
        # failures outside a script run (bad pipelines, unknown patterns) are never recoverable here
        _emit(Diagnostic("error", exc.message, exc.loc), None)
        return EXIT_DEFINITE
    except OSError as exc:
        print(f"xform: {exc}", file=sys.stderr)
        return EXIT_DEFINITE


if __name__ == "__main__":
    sys.exit(main())
