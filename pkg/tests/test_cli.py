import json

import pytest

from dagtower import Dag
from dagtower.cli import main
from dagtower.formats import dag_to_text, read_dags

from conftest import CLASS_EDGES, LAYERED_EDGES


@pytest.fixture
def example_files(tmp_path):
    f1 = tmp_path / "class_example.txt"
    f1.write_text(dag_to_text(Dag.from_edges(7, CLASS_EDGES)))
    f2 = tmp_path / "layered_example.json"
    f2.write_text(json.dumps({"n": 7, "edges": LAYERED_EDGES}))
    return f1, f2


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_count(capsys):
    assert run(capsys, "count", "--n", "4") == (0, "543\n", "")


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["count", "--n", "4", "--bogus"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_bad_input_file(tmp_path, capsys):
    bad = tmp_path / "cyclic.txt"
    bad.write_text("n 2\ne 1 2\ne 2 1\n")
    code, _, err = run(capsys, "mec", "--in", str(bad))
    assert code == 2 and "cycle" in err


def test_enumerate_stream_and_refusal(capsys):
    code, out, _ = run(capsys, "enumerate", "--n", "3")
    assert code == 0 and len(read_dags(out)) == 25
    code, out, err = run(capsys, "enumerate", "--n", "7")
    assert code == 3
    assert json.loads(err)["error"] == "enumeration_cap"


def test_sample_is_seeded(capsys, tmp_path):
    code, out, err = run(capsys, "sample", "--n", "6", "--count", "5", "--seed", "42")
    assert code == 0 and json.loads(err) == {"seed": 42}
    again = run(capsys, "--seed", "42", "sample", "--n", "6", "--count", "5")[1]
    assert out == again and len(read_dags(out)) == 5
    code, out, err = run(capsys, "sample", "--n", "3", "--format", "json", "--exact")
    assert "seed" in json.loads(err)
    assert len(read_dags(out)) == 1
    target = tmp_path / "s.txt"
    run(capsys, "sample", "--n", "4", "--count", "2", "--seed", "1", "--out", str(target))
    assert len(read_dags(target.read_text())) == 2


def test_mec_class_example(capsys, example_files):
    code, out, _ = run(capsys, "mec", "--in", str(example_files[0]), "--oracle")
    rep = json.loads(out)
    assert code == 0
    assert rep["mec_size"] == rep["oracle_mec_size"] == 3
    assert rep["reversible_edges"] == [[1, 2], [2, 7]]
    assert rep["num_noncollider_edges"] == 5 and rep["L"] == 4


def test_tower_layered_example(capsys, example_files):
    code, out, _ = run(capsys, "tower", "--in", str(example_files[1]))
    rep = json.loads(out)
    assert rep["tower_vector"] == [2, 2, 2, 1]
    assert rep["regeneration_points"] == [4] and rep["features"] == [[2, 2, 2], []]
    code, out, _ = run(capsys, "--pretty", "tower", "--in", str(example_files[1]))
    assert "tower_vector" in out and "[2, 2, 2, 1]" in out


def test_theta(capsys):
    code, out, _ = run(capsys, "theta", "--c1", "0.5", "--tol", "1e-9")
    rep = json.loads(out)
    assert code == 0 and rep["residual"] < 1e-9
    assert {"theta_star", "ensemble_Z", "ensemble_truncation", "ensemble_Z_tail_bound"} <= set(rep)
    code, out, err = run(capsys, "theta", "--c1", "0.0001")
    assert code == 3 and json.loads(err)["error"] == "TargetUnreachable"
    code, out, err = run(capsys, "theta", "--c1", "auto", "--auto-n", "60", "--auto-samples", "300",
                         "--seed", "5")
    rep = json.loads(out)
    assert rep["c1_source"] == "estimated" and rep["seed"] == 5


def test_experiment(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 8, "samples": 40, "seed": 3, "estimators": ["mec_ratio"]}))
    monkeypatch.setenv("DAGTOWER_OUT", str(tmp_path / "env_out"))
    code, out, err = run(capsys, "experiment", "--config", str(cfg))
    assert code == 0 and json.loads(err) == {"seed": 3}
    assert (tmp_path / "env_out" / "estimates.jsonl").exists()
    code, out, _ = run(capsys, "experiment", "--config", str(cfg), "--out", str(tmp_path / "w2"),
                       "--workers", "2")
    assert (tmp_path / "w2" / "estimates.jsonl").read_bytes() == \
        (tmp_path / "env_out" / "estimates.jsonl").read_bytes()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 8, "samples": 0, "seed": 3}))
    assert run(capsys, "experiment", "--config", str(bad))[0] == 2


def test_verify_fast(capsys):
    code, out, _ = run(capsys, "verify", "--fast")
    rep = json.loads(out)
    assert code == 0 and all(r["ok"] for r in rep["results"])
    assert run(capsys, "verify", "--level", "fast", "--pretty")[0] == 0
