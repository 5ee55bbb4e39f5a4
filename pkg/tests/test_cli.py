import json
import struct

import numpy as np
import pytest

from conftest import random_matrix
from fastcorr.classify import gen_test_signal
from fastcorr.cli import main, parse_sizes
from fastcorr.files import write_signal_csv


def write_matrix(path, rows):
    path.write_text("# templates\n" + "\n".join(",".join(str(v) for v in r) for r in rows) + "\n")
    return str(path)


def synth(tmp_path, rows, digits=2, *extra):
    out = tmp_path / "plan.json"
    code = main(["synth", "--matrix", write_matrix(tmp_path / "r.csv", rows), "--digits", str(digits),
                 "--out", str(out), *extra])
    assert code == 0
    return out


def test_synth_identity(tmp_path, capsys):
    out = synth(tmp_path, [[1, 0], [0, 1]], 1)
    assert "multiplies=0 adds=0" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["cost"]["multiplies"] == 0
    assert (doc["K"], doc["m"]) == (2, 2)


def test_synth_to_stdout_keeps_tally_off_stdout(tmp_path, capsys):
    assert main(["synth", "--matrix", write_matrix(tmp_path / "r.csv", [[3, 4]]), "--digits", "1"]) == 0
    captured = capsys.readouterr()
    json.loads(captured.out)
    assert "multiplies=" in captured.err


def test_apply_and_stream_agree(tmp_path, capsys):
    plan = synth(tmp_path, [[0.6, 0.8, 0.0], [0.0, 0.6, 0.8]], 1, "--no-normalize")
    sig = tmp_path / "x.csv"
    write_signal_csv(sig, [3, 4, 5])
    capsys.readouterr()
    assert main(["apply", "--plan", str(plan), "--vector", str(sig)]) == 0
    applied = capsys.readouterr().out
    assert main(["stream", "--plan", str(plan), "--signal", str(sig)]) == 0
    assert applied == capsys.readouterr().out == "step,c_1,c_2\n2,5.0,6.4\n"


def test_apply_length_mismatch(tmp_path, capsys):
    plan = synth(tmp_path, [[0.6, 0.8]], 1)
    sig = tmp_path / "x.csv"
    write_signal_csv(sig, [1, 2, 3])
    assert main(["apply", "--plan", str(plan), "--vector", str(sig)]) == 1
    assert "plan expects 2" in capsys.readouterr().err


def test_missing_required_flag_exits_one():
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--digits", "2"])
    assert exc.value.code == 1


def test_bad_threshold_exits_one(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["classify", "--plan", "p", "--signal", "s", "--threshold", "1.5"])
    assert exc.value.code == 1


def test_bad_matrix_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("0.5,0.5\n0.5,abc\n")
    assert main(["synth", "--matrix", str(bad), "--digits", "1"]) == 1
    assert f"{bad}:2:" in capsys.readouterr().err


def test_missing_file_exits_one(tmp_path, capsys):
    assert main(["stream", "--plan", str(tmp_path / "nope.json"), "--signal", "x"]) == 1
    assert "nope.json" in capsys.readouterr().err


def test_corrupt_plan_exits_one(tmp_path):
    p = tmp_path / "p.json"
    p.write_text("{not json")
    assert main(["apply", "--plan", str(p), "--vector", str(p)]) == 1


def test_classify_end_to_end(tmp_path, rng, capsys):
    matrix = random_matrix(rng, 3, 8, 2)
    # already-quantized rows survive a second quantization unchanged
    plan = synth(tmp_path, [[float(v) for v in r] for r in matrix.to_fractions()], 2, "--no-normalize")
    sig = tmp_path / "s.csv"
    write_signal_csv(sig, gen_test_signal(matrix, [(40, 1)], 0.0, 0, 100))
    capsys.readouterr()
    assert main(["classify", "--plan", str(plan), "--signal", str(sig), "--threshold", "0.9"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "step,template,correlation,distance"
    assert len(lines) == 2
    step, template, c, _ = lines[1].split(",")
    assert (int(step), int(template)) == (47, 1)
    assert float(c) == pytest.approx(1.0, abs=1e-12)


def test_f64_signal(tmp_path, capsys):
    plan = synth(tmp_path, [[0.6, 0.8]], 1, "--no-normalize")
    sig = tmp_path / "s.f64"
    sig.write_bytes(struct.pack("<3d", 3.0, 4.0, 0.0))
    capsys.readouterr()
    assert main(["stream", "--plan", str(plan), "--signal", str(sig), "--format", "f64"]) == 0
    assert capsys.readouterr().out == "step,c_1\n1,5.0\n2,2.4\n"
    sig.write_bytes(b"\x00" * 5)
    assert main(["stream", "--plan", str(plan), "--signal", str(sig), "--format", "f64"]) == 1


def test_stream_summary_report(tmp_path, capsys):
    plan = synth(tmp_path, [[0.5, 0.5, 0.5, 0.5]], 1, "--no-normalize")
    sig = tmp_path / "s.csv"
    write_signal_csv(sig, np.arange(20.0))
    capsys.readouterr()
    assert main(["stream", "--plan", str(plan), "--signal", str(sig), "--report", "summary"]) == 0
    fields = dict(line.split("=") for line in capsys.readouterr().out.splitlines())
    assert fields["windows"] == "17"
    assert fields["warmup_windows"] == "3"


def test_stream_short_signal(tmp_path):
    plan = synth(tmp_path, [[0.5, 0.5, 0.5]], 1)
    sig = tmp_path / "s.csv"
    write_signal_csv(sig, [1.0])
    assert main(["stream", "--plan", str(plan), "--signal", str(sig)]) == 1


def test_bench_writes_identical_files(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["bench", "--sizes", "2x4,3x3", "--digits", "1,2", "--trials", "2", "--seed", "5",
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("P,K,m,D,trial,")


def test_parse_sizes():
    assert parse_sizes("4x16, 8X8,2×3") == [(4, 16), (8, 8), (2, 3)]
    with pytest.raises(Exception):
        parse_sizes("4by16")
