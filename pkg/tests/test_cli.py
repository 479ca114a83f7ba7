import json
import math
import subprocess
import sys

import numpy as np
import pytest

from solwalk import io
from solwalk.cli import _int_range, parse_grid, run


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == 0 and out.out else None), out.err


def test_pisot_golden_ratio(capsys):
    code, doc, _ = call(capsys, "pisot", "--poly", "1,-1,-1")
    assert code == 0
    assert doc["op"] == "pisot" and doc["config"]["poly"] == "1,-1,-1"
    assert doc["certificate"]["alpha"] == pytest.approx((1 + 5 ** 0.5) / 2, abs=1e-12)


def test_invalid_input_exit_2(capsys):
    assert call(capsys, "pisot", "--poly", "1,0,-2")[0] == 2
    assert call(capsys, "construct", "--preset", "solomyak", "--p", "0.3", "-o", "/dev/null")[0] == 2
    assert call(capsys, "pisot")[0] == 2          # argparse: missing option
    assert call(capsys, "nope")[0] == 2


def test_numeric_failure_exit_3(tmp_path, capsys):
    m = str(tmp_path / "m.json")
    assert call(capsys, "construct", "--preset", "solomyak", "--gamma", "400", "-o", m)[0] == 0
    code, _, err = call(capsys, "speed", "--measure", m, "--steps", "10", "--trials", "5")
    assert code == 3 and "numeric failure" in err


def test_construct_sample_determinism(tmp_path, capsys):
    m = str(tmp_path / "m.json")
    assert call(capsys, "construct", "--preset", "solomyak", "-o", m)[0] == 0
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    ra, rb = tmp_path / "ra.json", tmp_path / "rb.json"
    for out, rep, th in ((a, ra, "1"), (b, rb, "3")):
        args = ["sample", "--measure", m, "-n", "70000", "--seed", "9", "--threads", th,
                "--report", str(rep), "-o", str(out)]
        assert run(args) == 0
    assert a.read_bytes() == b.read_bytes()
    da, db = json.loads(ra.read_text()), json.loads(rb.read_text())
    assert da["config"].pop("threads") == 1 and db["config"].pop("threads") == 3
    da["config"].pop("output"), db["config"].pop("output")
    da.pop("output"), db.pop("output")
    assert da == db
    xs = io.read_samples(a)
    assert xs.size == 70_000 and np.all(np.diff(xs) >= 0)


def test_report_is_byte_identical_on_rerun(tmp_path):
    m = str(tmp_path / "m.json")
    assert run(["construct", "--preset", "solomyak", "-o", m, "--report", str(tmp_path / "c.json")]) == 0
    reps = []
    for i in range(2):
        rep = tmp_path / f"r{i}.json"
        assert run(["sample", "--measure", m, "-n", "5000", "--seed", "4", "-o", str(tmp_path / "s.csv"),
                    "--report", str(rep)]) == 0
        reps.append(rep.read_bytes())
    assert reps[0] == reps[1]


def test_binary_format_round_trip(tmp_path):
    m = str(tmp_path / "m.json")
    run(["construct", "--preset", "solomyak", "-o", m, "--report", str(tmp_path / "c.json")])
    for fmt in ("csv", "bin"):
        out = tmp_path / f"s.{fmt}"
        assert run(["sample", "--measure", m, "-n", "3000", "--seed", "1", "--format", fmt,
                    "-o", str(out), "--report", str(tmp_path / "r.json")]) == 0
    assert np.array_equal(io.read_samples(tmp_path / "s.csv"), io.read_samples(tmp_path / "s.bin"))


def test_sample_io_round_trip(tmp_path):
    xs = np.random.default_rng(0).normal(size=1000) * 10.0 ** np.random.default_rng(1).integers(-30, 30, 1000)
    for fmt in ("csv", "bin"):
        p = tmp_path / f"x.{fmt}"
        io.write_samples(p, xs, fmt)
        assert np.array_equal(io.read_samples(p), xs)
    with pytest.raises(ValueError):
        io.write_samples(tmp_path / "x.txt", xs, "xml")


def test_certify_singular(tmp_path, capsys):
    m = str(tmp_path / "e.json")
    assert call(capsys, "construct", "--preset", "erdos", "-o", m)[0] == 0
    code, doc, _ = call(capsys, "certify-singular", "--measure", m, "--l=-1:-6", "--paths", "20000")
    assert code == 0
    assert doc["verdict"] == "singular-signature"
    assert doc["l"] == [-1, -2, -3, -4, -5, -6]
    assert doc["certificate"]["c"] == pytest.approx(0.025013305398549370463, rel=1e-12)


def test_config_merge(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"poly": "1,-3,1"}))
    code, doc, _ = call(capsys, "pisot", "--config", str(cfg))
    assert code == 0 and doc["certificate"]["poly"] == [1, -3, 1]
    code, doc, _ = call(capsys, "pisot", "--config", str(cfg), "--poly", "1,-1,-1")
    assert doc["certificate"]["poly"] == [1, -1, -1]
    cfg.write_text(json.dumps({"n-resample": 10}))
    assert call(capsys, "stationarity", "--config", str(cfg), "--measure", "missing.json")[0] == 2
    cfg.write_text(json.dumps({"bogus": 1}))
    assert call(capsys, "pisot", "--config", str(cfg), "--poly", "1,-1,-1")[0] == 2


def test_analysis_commands(tmp_path, capsys):
    m, s = str(tmp_path / "m.json"), str(tmp_path / "s.csv")
    call(capsys, "construct", "--preset", "solomyak", "-o", m)
    call(capsys, "sample", "--measure", m, "-n", "20000", "-o", s, "--eps", "1e-9")
    code, doc, _ = call(capsys, "ecf", "--samples", s, "--t", "0.5:4:5", "--sample-eps", "1e-9")
    assert code == 0 and len(doc["values"]) == 5 and doc["N"] == 20000
    code, doc, _ = call(capsys, "stationarity", "--measure", m, "--samples", s)
    assert code == 0 and doc["passes"]
    code, doc, _ = call(capsys, "speed", "--measure", m, "--steps", "500", "--trials", "100")
    assert code == 0 and doc["alpha"] == pytest.approx(0.4 * math.log(2))
    code, doc, _ = call(capsys, "fourier-exact", "--measure", m, "--t", "1,2", "--paths", "2000")
    assert code == 0 and len(doc["values"]) == 2
    code, doc, _ = call(capsys, "dimension", "--samples", s)
    assert code == 0 and 0 < doc["frostman"] <= 1.1


def test_lattice_commands(tmp_path, capsys):
    m = str(tmp_path / "l.json")
    code, doc, _ = call(capsys, "construct", "--preset", "speed-singular", "--l", "4", "-o", m)
    assert code == 0 and doc["drift"] > 0
    code, doc, _ = call(capsys, "entropy", "--measure", m, "--kmax", "2")
    assert code == 0 and doc["dimension_bound"] <= 1
    assert len(doc["entropy_over_k"]) == 2


def test_bernoulli_command(capsys):
    code, doc, _ = call(capsys, "bernoulli", "--lam", "0.5", "--t", "1,2")
    assert code == 0
    assert doc["values"] == pytest.approx([math.sin(2) / 2, math.sin(4) / 4], abs=1e-11)


def test_grid_parsers():
    assert np.allclose(parse_grid("1:100:3:log"), [1, 10, 100])
    assert np.allclose(parse_grid("0:1:3"), [0, 0.5, 1])
    assert np.allclose(parse_grid("1,2.5"), [1, 2.5])
    assert _int_range("-1:-3") == [-1, -2, -3]
    assert _int_range("2,5") == [2, 5]
    with pytest.raises(ValueError):
        parse_grid("a:b")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "solwalk", "pisot", "--poly", "1,-1,-1"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["certificate"]["L"] == 4
