import math

import pytest
from hypothesis import given, settings, strategies as st

from xform import corpus, parse_payload
from xform.bisect import CostProbe, bisect_patterns, leave_one_out, patterns_script
from xform.passes import PATTERNS
from xform.timing import TimingReport, time_pipeline


def penalty_probe(culprits, calls):
    def probe(patterns):
        calls.append(list(patterns))
        return 100.0 + sum(10.0 for c in culprits if c in patterns)
    return probe


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 16), st.data())
def test_single_culprit_found_in_log_probes(n, data):
    names = [f"p{i}" for i in range(n)]
    culprit = data.draw(st.sampled_from(names))
    calls = []
    res = bisect_patterns(names, penalty_probe([culprit], calls))
    assert res.culprit == culprit
    assert res.probes == len(calls) - 1 == len(res.log)
    assert res.probes <= 2 * max(1, math.ceil(math.log2(n)))
    oracle = leave_one_out(names, penalty_probe([culprit], []))
    assert min(oracle, key=oracle.get) == culprit


def test_no_regression_means_no_culprit():
    res = bisect_patterns(["a", "b", "c"], lambda ps: 5.0)
    assert res.culprit is None and res.reference_cost == 5.0


def test_two_culprits_in_different_halves():
    # removing either half still leaves one culprit: still an improvement, so the search narrows
    res = bisect_patterns(["a", "b", "c", "d"], penalty_probe(["a", "d"], []))
    assert res.culprit in {"a", "d"}


def test_cost_probe_on_real_payload():
    module = parse_payload(corpus.BISECT_PAYLOAD)
    probe = CostProbe(module)
    names = list(PATTERNS)
    res = bisect_patterns(names, probe)
    assert res.culprit == "regress_hoist_blocker"
    assert probe(names) > probe([n for n in names if n != "regress_hoist_blocker"])
    assert "transform.apply_patterns" in patterns_script(names)


def test_timing_report_math():
    r = TimingReport([1.0, 2.0, 3.0], [1.5, 2.2, 9.0])
    assert r.direct_median == 2.0 and r.interpreted_median == 2.2
    assert r.overhead_pct == pytest.approx(10.0)
    assert "overhead 10.00%" in r.summary()
    assert TimingReport([0.0], [1.0]).overhead_pct == 0.0


def test_time_pipeline_runs_both_modes():
    module = parse_payload(corpus.synthetic_module(200))
    report = time_pipeline(module, ",".join(corpus.FIXED_LOWERING), reps=2, warmup=0)
    assert len(report.direct) == len(report.interpreted) == 2
    assert all(t > 0 for t in report.direct + report.interpreted)
    with pytest.raises(ValueError):
        time_pipeline(module, "canonicalize", reps=0)
