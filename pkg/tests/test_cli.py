import csv
import io
import json

import pytest

from xform import corpus
from xform.cli import main
from xform.passes import pipeline_to_transform


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return write


def test_run_prints_transformed_payload(files, capsys):
    code = main(["run", files("p.pir", corpus.NEST_PAYLOAD), files("s.tir", corpus.HOIST_TILE_SCRIPT), "--trace"])
    out, err = capsys.readouterr()
    assert code == 0
    assert out.startswith("builtin.module {\n  func.func @myFunc")
    assert json.loads(err.splitlines()[0])["op"] == "structured.match"


def test_run_reports_use_after_consume(files, capsys):
    script = files("s.tir", corpus.HOIST_TILE_SCRIPT_WITH_ERROR)
    code = main(["run", files("p.pir", corpus.NEST_PAYLOAD), script])
    err = capsys.readouterr().err
    assert code == 2
    assert f"{script}:{corpus.SECOND_UNROLL_LINE}:3: error" in err
    assert f"line {corpus.FIRST_UNROLL_LINE}" in err


def test_run_silenceable_exit_code(files, capsys):
    script = corpus.match_script(['%a, %b = loop.split(%loops) {at = 99} : (!transform.op<"scf.for">, '
                                  '!transform.op<"scf.for">)'])
    code = main(["run", files("p.pir", corpus.NEST_PAYLOAD), files("s.tir", script)])
    err = capsys.readouterr().err
    assert code == 1 and "payload op involved here" in err


def test_run_with_params(files, capsys):
    script = ("transform.named_sequence @transform_main {\n^bb0(%root: !transform.any_op, %n: !transform.param):\n"
              '  %l = structured.match(%root) {ops = ["scf.for"], outermost = true} : !transform.op<"scf.for">\n'
              "  loop.unroll(%l, %n)\n}\n")
    args = ["run", files("p.pir", corpus.NEST_PAYLOAD), files("s.tir", script)]
    assert main(args + ["--param", "n=2"]) == 0
    assert main(args) == 2
    assert main(args + ["--param", "n"]) == 2


def test_static_check_flags_broken_lowering(files, capsys):
    broken = files("broken.tir", pipeline_to_transform(corpus.pipeline_string(corpus.LOWERING_PIPELINE)))
    fixed = files("fixed.tir", pipeline_to_transform(corpus.pipeline_string(corpus.FIXED_LOWERING)))
    payload = files("p.pir", corpus.CHUNK42_DYNAMIC)
    assert main(["check", broken]) == 3
    assert "affine.apply" in capsys.readouterr().err
    assert main(["check", fixed, "--payload", payload]) == 0
    assert "static check passed" in capsys.readouterr().out
    assert main(["run", payload, broken, "--check-static"]) == 3
    assert main(["run", payload, broken]) == 1
    assert main(["run", payload, fixed, "--check-dynamic"]) == 0


def test_exec_outputs_json(files, capsys):
    code = main(["exec", files("p.pir", corpus.NEST_PAYLOAD), "--entry", "myFunc", "--arg", "0=3", "--arg", "1=5"])
    data = json.loads(capsys.readouterr().out)
    assert code == 0 and data["cost"]["ops_executed"] == 174 and len(data["calls"]) == 40


def test_exec_error(files, capsys):
    code = main(["exec", files("p.pir", corpus.CHUNK42_DYNAMIC), "--entry", "chunkTo42", "--arg", "1=62"])
    assert code == 2 and "error" in capsys.readouterr().err


def test_malformed_inputs(files, capsys):
    assert main(["exec", files("bad.pir", "func.func @f {\n")]) == 2
    assert main(["run", files("p.pir", corpus.NEST_PAYLOAD), files("bad.tir", "transform.nope\n")]) == 2
    assert main(["exec", "/no/such/file.pir"]) == 2
    assert main(["pipeline-to-transform", "a{b"]) == 2
    assert main(["pipeline-to-transform", "no-such-pass"]) == 2
    assert main(["time", files("p.pir", corpus.NEST_PAYLOAD), "no-such-pass"]) == 2


def test_opt_script(files, capsys):
    assert main(["opt-script", files("e.tir", corpus.HOIST_TILE_SCRIPT_WITH_ERROR), "--check-invalidation"]) == 3
    capsys.readouterr()
    assert main(["opt-script", files("s.tir", corpus.HOIST_TILE_SCRIPT), "--simplify", "--inline"]) == 0
    out = capsys.readouterr().out
    assert "param.constant" not in out and "loop.split" in out
    infer = files("i.tir", pipeline_to_transform("instrument-accumulate"))
    assert main(["opt-script", infer, "--infer-options"]) == 0
    assert "op=arith.addi" in capsys.readouterr().out


def test_pipeline_to_transform_output(capsys):
    assert main(["pipeline-to-transform", "func.func(canonicalize)"]) == 0
    assert '"canonicalize"' in capsys.readouterr().out


def test_bisect(files, capsys):
    assert main(["bisect", files("p.pir", corpus.BISECT_PAYLOAD)]) == 0
    assert capsys.readouterr().out.startswith("culprit: regress_hoist_blocker")
    assert main(["bisect", files("p.pir", corpus.BISECT_PAYLOAD), "--patterns", "add_of_zero"]) == 1
    assert main(["bisect", files("p.pir", corpus.BISECT_PAYLOAD), "--patterns", "nope"]) == 2


def test_tune_writes_csv(files, tmp_path, capsys):
    out = tmp_path / "trace.csv"
    space = "dims: K=8\ntile3: {range:[0, K], constraints:[K %% tile3 == 0]}\n"
    template = corpus.match_script(["%t, %p = loop.tile(%loops) {tile_sizes = [0, 0, 0, $tile3]} : "
                                    '(!transform.op<"scf.for">, !transform.op<"scf.for">)'])
    code = main(["tune", files("t.tir", template), files("s.space", space),
                 files("p.pir", corpus.batch_matmul(1, 2, 2, 8)), "--strategy", "exhaustive", "--csv", str(out)])
    assert code == 0
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[0] == ["iter", "assignment", "cost", "best"] and len(rows) == 1 + 5
    assert "best tile3=" in capsys.readouterr().err
    assert main(["tune", files("t.tir", template), files("bad.space", "x = 1"),
                 files("p.pir", corpus.batch_matmul(1, 2, 2, 8))]) == 2


def test_time(files, capsys):
    assert main(["time", files("p.pir", corpus.NEST_PAYLOAD), "canonicalize", "--reps", "1"]) == 0
    assert "overhead" in capsys.readouterr().out
