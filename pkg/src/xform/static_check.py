"""Static pre/post-condition checking of whole transform scripts.

The script is linearized into :class:`conditions.Step` records in execution
order: includes are followed, alternatives become branch steps, registered
passes contribute their own signatures.
"""

from __future__ import annotations

from typing import List, Optional

from .conditions import Step, StaticReport, run_static
from .script import Script, TransformRegistry, callee_of, transform_registry


def linearize(script: Script, entry: str = "transform_main", registry: Optional[TransformRegistry] = None,
              passes=None) -> List[Step]:
    from .passes.registry import pass_registry

    registry = registry or transform_registry()
    passes = passes or pass_registry()
    seqs = script.sequences

    def block_steps(block, stack) -> List[Step]:
        out: List[Step] = []
        for op in block.ops:
            name = op.name
            if name == "transform.include":
                callee = callee_of(op)
                if callee in stack or callee not in seqs:
                    out.append(Step(f"include @{callee}", None, op.loc))
                else:
                    out.extend(block_steps(seqs[callee].body, stack + (callee,)))
            elif name == "transform.alternatives":
                branches = [block_steps(b, stack) for r in op.regions for b in r.blocks]
                out.append(Step(name, loc=op.loc, branches=branches + [[]] * (not branches)))
            elif name == "transform.sequence":
                for r in op.regions:
                    for b in r.blocks:
                        out.extend(block_steps(b, stack))
            elif name == "transform.apply_registered_pass":
                pname = str(op.attributes.get("pass"))
                p = passes.passes.get(pname)
                if p is None:
                    out.append(Step(pname, None, op.loc))
                else:
                    out.append(Step(pname, p.signature, op.loc, neutral=p.neutral))
            else:
                d = registry.get(name)
                if d is None:
                    out.append(Step(name, None, op.loc))
                elif not d.payload_effect:
                    out.append(Step(name, loc=op.loc, neutral=True))
                else:
                    out.append(Step(name, d.condition, op.loc))
        return out

    return block_steps(script.entry(entry).body, (entry,))


DEFAULT_INITIAL = "func.*, scf.*, arith.*, memref.*"


def check_static(script: Script, initial=DEFAULT_INITIAL, final_allowed="llvmlite.*",
                 entry: str = "transform_main", registry: Optional[TransformRegistry] = None,
                 passes=None) -> StaticReport:
    """Dataflow of possible payload op kinds through ``script``.

    Reports atoms that may survive outside ``final_allowed`` (with the step
    that introduced them), steps whose consumed set cannot be present, and
    opaque steps.
    """
    return run_static(linearize(script, entry, registry, passes), initial, final_allowed)
