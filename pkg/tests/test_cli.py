import json
import math
import subprocess
import sys

import numpy as np
import pytest

from elliptope.cli import main
from elliptope.experiment import CSV_COLUMNS
from elliptope.instances import fixture
from elliptope.manifold import write_point
from elliptope.symmat import MM_ARRAY_HEADER, read_matrix_market, write_matrix_market

TRI_OPT = np.array([[math.cos(t), math.sin(t)] for t in (0, 2 * math.pi / 3, 4 * math.pi / 3)])


@pytest.fixture
def triangle(tmp_path):
    p = tmp_path / "tri.mtx"
    write_matrix_market(fixture("triangle").a, p)
    return p


def run(*argv):
    return main([str(a) for a in argv])


def test_generate_goe_array_format(tmp_path):
    out = tmp_path / "a.mtx"
    assert run("generate", '{"family":"goe","n":100,"seed":1}', out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == MM_ARRAY_HEADER
    assert lines[1].split() == ["100", "100"]
    assert len(lines) - 2 == 100 * 101 // 2
    assert read_matrix_market(out).n == 100
    assert not (tmp_path / "a.mtx.truth").exists()


def test_generate_z2sync_truth(tmp_path):
    out = tmp_path / "z.mtx"
    assert run("generate", '{"family":"z2sync","n":400,"seed":0,"lambda":3}', out) == 0
    truth = (tmp_path / "z.mtx.truth").read_text().split()
    assert len(truth) == 400 and set(truth) <= {"1", "-1"}


def test_generate_spec_from_file(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text('{"family":"fixture","name":"ones"}')
    assert run("generate", spec, tmp_path / "o.mtx") == 0
    assert read_matrix_market(tmp_path / "o.mtx").dense().sum() == 16


@pytest.mark.parametrize("spec", ['{"family":"wigner","n":5}', "not json", "[1, 2]", '{"family":"goe","n":-3}'])
def test_generate_bad_spec_exits_2(tmp_path, spec, capsys):
    assert run("generate", spec, tmp_path / "x.mtx") == 2
    assert "elliptope generate" in capsys.readouterr().err


def test_solve_triangle(tmp_path, triangle):
    out = tmp_path / "r.json"
    assert run("solve", triangle, "--k", 2, "--restarts", 3, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["objective"] == pytest.approx(3.0, abs=1e-6)
    assert doc["converged"] and doc["k"] == 2 and len(doc["restarts"]) == 3
    sigma_path = tmp_path / "r.sigma.csv"
    assert doc["sigma_path"] == str(sigma_path) and sigma_path.exists()


def test_solve_is_deterministic(tmp_path, triangle):
    a = tmp_path / "g.mtx"
    run("generate", '{"family":"goe","n":30,"seed":2}', a)
    out = tmp_path / "r.json"
    docs = []
    for _ in range(2):
        assert run("solve", a, "--k", 3, "--restarts", 4, "--seed", 7, "--out", out) == 0
        docs.append(out.read_bytes())
    assert docs[0] == docs[1]


def test_solve_k1_single_edge(tmp_path, capsys):
    a = tmp_path / "e.mtx"
    a.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 -1\n")
    assert run("solve", a, "--k", 1, "--restarts", 2) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["objective"] == pytest.approx(2.0)


def test_solve_errors(tmp_path, triangle):
    assert run("solve", tmp_path / "missing.mtx", "--k", 2) == 2
    assert run("solve", triangle, "--k", 4) == 2
    assert run("solve", triangle, "--k", 2, "--tol", -1) == 2


def test_solve_unconverged_exits_1(tmp_path):
    a = tmp_path / "g.mtx"
    run("generate", '{"family":"goe","n":100,"seed":0}', a)
    assert run("solve", a, "--k", 5, "--max-sweeps", 1, "--out", tmp_path / "r.json") == 1
    assert json.loads((tmp_path / "r.json").read_text())["converged"] is False


def test_certify_triangle_global(tmp_path, triangle, capsys):
    s = tmp_path / "s.csv"
    write_point(TRI_OPT, s)
    assert run("certify", triangle, s, "--sdp-ref", "3") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["is_global_certified"] is True
    assert doc["theorem_holds"] is True and doc["theorem_status"] == "ok"


def test_certify_auto_reference(tmp_path, triangle, capsys):
    s = tmp_path / "s.csv"
    write_point(TRI_OPT, s)
    assert run("certify", triangle, s, "--sdp-ref", "auto") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["reference"]["value"] == pytest.approx(3.0, abs=1e-8)
    assert doc["theorem_gap"] == pytest.approx(0.0, abs=1e-8)


def test_certify_saddle(tmp_path, capsys):
    a = tmp_path / "swap.mtx"
    a.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 1\n")
    s = tmp_path / "s.csv"
    write_point(np.array([[1.0, 0.0], [-1.0, 0.0]]), s)
    assert run("certify", a, s) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["trace_matches_objective"] is False and doc["is_global_certified"] is False


def test_certify_k1(tmp_path, capsys):
    a = tmp_path / "e.mtx"
    a.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 -1\n")
    s = tmp_path / "s.csv"
    write_point(np.array([[1.0], [-1.0]]), s)
    assert run("certify", a, s, "--sdp-ref", "2") == 0
    assert json.loads(capsys.readouterr().out)["theorem_status"] == "inapplicable_k1"


def test_certify_rejects_corrupt_sigma(tmp_path, triangle):
    s = tmp_path / "s.csv"
    s.write_text("# n=3 k=2\n1,0\n0,1\n0.9,0\n")
    assert run("certify", triangle, s) == 2
    s.write_text("# n=2 k=2\n1,0\n0,1\n")
    assert run("certify", triangle, s) == 2
    write_point(TRI_OPT, s)
    assert run("certify", triangle, s, "--sdp-ref", "abc") == 2


GRID = {"instances": [{"family": "goe", "n": 20, "seed": 1}, {"family": "fixture", "name": "triangle"}],
        "k": [2, 3], "restarts": 3, "seed": 5}


def test_experiment_outputs_and_determinism(tmp_path):
    outs = []
    for name in ("a", "b"):
        assert run("experiment", json.dumps(GRID), "--out", tmp_path / name) == 0
        outs.append(tmp_path / name)
    csv_a = (outs[0] / "results.csv").read_bytes()
    assert csv_a == (outs[1] / "results.csv").read_bytes()
    assert (outs[0] / "summary.json").read_bytes() == (outs[1] / "summary.json").read_bytes()
    lines = csv_a.decode().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + 2 * 2 * 3
    assert all(line.endswith(",true") for line in lines[1:])
    summary = json.loads((outs[0] / "summary.json").read_text())
    assert summary["all_hold"] and summary["failures"] == []
    assert (outs[0] / "timings.csv").read_text().startswith("cell,instance,family,n,k,seconds")


def test_experiment_threads_match_serial(tmp_path, monkeypatch):
    run("experiment", json.dumps(GRID), "--out", tmp_path / "serial")
    monkeypatch.setenv("ELLIPTOPE_THREADS", "3")
    run("experiment", json.dumps(GRID), "--out", tmp_path / "threads")
    assert (tmp_path / "serial" / "results.csv").read_bytes() == (tmp_path / "threads" / "results.csv").read_bytes()


def test_experiment_bad_grids(tmp_path, monkeypatch):
    empty_k = dict(GRID, k=[])
    assert run("experiment", json.dumps(empty_k), "--out", tmp_path / "e") == 2
    assert run("experiment", json.dumps(dict(GRID, k=[1])), "--out", tmp_path / "e") == 2
    monkeypatch.setenv("ELLIPTOPE_THREADS", "many")
    assert run("experiment", json.dumps(GRID), "--out", tmp_path / "e") == 2


def test_experiment_allow_k1(tmp_path):
    grid = dict(GRID, k=[1, 2], instances=[GRID["instances"][1]])
    assert run("experiment", json.dumps(grid), "--out", tmp_path / "k1", "--allow-k1") == 0
    lines = (tmp_path / "k1" / "results.csv").read_text().splitlines()[1:]
    assert {line.split(",")[-1] for line in lines if line.split(",")[2] == "1"} == {"inapplicable"}


def test_experiment_records_failed_instance(tmp_path):
    grid = dict(GRID, instances=[{"family": "file", "path": str(tmp_path / "nope.mtx")}, GRID["instances"][1]])
    assert run("experiment", json.dumps(grid), "--out", tmp_path / "f") == 0
    summary = json.loads((tmp_path / "f" / "summary.json").read_text())
    assert summary["failures"] and summary["failures"][0]["instance"] == 0
    rows = (tmp_path / "f" / "results.csv").read_text().splitlines()[1:]
    assert sum(r.endswith(",error") for r in rows) == 2


def test_round_hyperplane_and_overlap(tmp_path, triangle, capsys):
    s = tmp_path / "s.csv"
    write_point(TRI_OPT, s)
    assert run("round", s, "--matrix", triangle) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["cut_value"] == 2.0 and doc["objective"] == 2.0
    truth = tmp_path / "t.txt"
    truth.write_text("1\n-1\n1\n")
    assert run("round", s, "--mode", "sign_first_col", "--truth", truth, "--overlap") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["assignment"] == [1, -1, -1]
    assert doc["overlap"] == pytest.approx(1 / 3)


def test_round_usage_errors(tmp_path, triangle):
    s = tmp_path / "s.csv"
    write_point(TRI_OPT, s)
    assert run("round", s, "--overlap", "--matrix", triangle) == 2
    assert run("round", s) == 2  # hyperplane mode needs the matrix
    truth = tmp_path / "t.txt"
    truth.write_text("1\n-1\n")
    assert run("round", s, "--mode", "sign_first_col", "--truth", truth) == 2


def test_dump_config_and_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "elliptope", "--dump-config"], capture_output=True, text=True,
                         check=True)
    doc = json.loads(out.stdout)
    assert doc["solver"]["grad_tol"] == 1e-8 and doc["solver"]["init_step"] == 1.0
    assert doc["reference"]["restarts"] == 5 and doc["tolerances"]["subsets"] == 50


def test_no_command_is_usage_error(capsys):
    assert main([]) == 2
