import json

import pytest

from pmdplearn.cli import OFFLINE_COLUMNS, build_parser, counts_from_json, counts_to_json, main
from pmdplearn.sampling import SamplingConfig, collect


def run(capsys, *argv):
    assert main(list(argv)) == 0
    return capsys.readouterr().out


def test_generate_sample_learn_solve_inspect(tmp_path, capsys):
    d = str(tmp_path)
    run(capsys, "--out-dir", d, "generate", "--family", "chain", "--size", "4")
    model, truth = tmp_path / "chain.pmdp", tmp_path / "chain.truth.json"
    assert model.exists() and json.loads(truth.read_text())["params"]["theta"] > 0
    run(capsys, "--out-dir", d, "sample", "--model", str(model), "--truth", str(truth), "--budget", "50", "--out", "c.json")
    counts = tmp_path / "c.json"
    learned = json.loads(run(capsys, "learn", "--model", str(model), "--counts", str(counts)))
    assert learned["theta"]["N"] > 0 and learned["theta"]["l"] <= learned["theta"]["u"]
    out = json.loads(run(capsys, "--json", "solve", "--model", str(model), "--counts", str(counts), "--relaxation", "P_R"))
    assert out["relaxation"] == "P_R" and out["converged"]
    lo = out["value_initial"]
    hi = json.loads(run(capsys, "--json", "solve", "--model", str(model), "--counts", str(counts),
                        "--nature", "optimistic"))["value_initial"]
    assert lo <= hi + 1e-9
    dump = json.loads(run(capsys, "inspect", "--model", str(model), "--counts", str(counts), "--relaxation", "P_I"))
    assert dump["kind"] == "interval" and dump["transitions"]


def test_counts_json_round_trip(chain5):
    c = collect(chain5.truth, SamplingConfig(budget=30, seed=1))
    back = counts_from_json(chain5.model, counts_to_json(chain5.model, c))
    assert back.sa.tolist() == c.sa.tolist()
    assert all(a.tolist() == b.tolist() for a, b in zip(back.sas, c.sas))


def test_offline_csv_and_manifest(tmp_path, capsys):
    run(capsys, "--out-dir", str(tmp_path), "offline", "--family", "chain", "--size", "4", "--budget", "100",
        "--reruns", "2")
    lines = (tmp_path / "offline.csv").read_text().splitlines()
    assert lines[0] == ",".join(OFFLINE_COLUMNS)
    assert len(lines) == 1 + 2 * 4
    rows = [dict(zip(OFFLINE_COLUMNS, l.split(","))) for l in lines[1:]]
    assert all(r["status"] == "ok" and r["build_s"] == "" for r in rows)
    for r in rows:
        assert float(r["v_lower"]) <= float(r["v_upper"])
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert len(man["config_sha256"]) == 64 and man["episode_len"] > 0 and "bet_sizes" in man["constants"]


def test_offline_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        run(capsys, "--out-dir", str(d), "--seed", "5", "offline", "--family", "glider", "--size", "3,3",
            "--budget", "80")
    assert (a / "offline.csv").read_bytes() == (b / "offline.csv").read_bytes()
    assert "3x3" in (a / "offline.csv").read_text()


def test_offline_timeout_row(tmp_path, capsys):
    run(capsys, "--out-dir", str(tmp_path), "--timeout-s", "1e-6", "offline", "--family", "glider", "--size",
        "10,10", "--budget", "20", "--relaxations", "P_R")
    row = (tmp_path / "offline.csv").read_text().splitlines()[1].split(",")
    assert row[OFFLINE_COLUMNS.index("status")] == "TO" and row[OFFLINE_COLUMNS.index("v_lower")] == ""


def test_online_traces(tmp_path, capsys):
    out = run(capsys, "--out-dir", str(tmp_path), "online", "--family", "chain", "--size", "4", "--budget", "0",
              "--relaxations", "P_I")
    path = tmp_path / "trace_chain_P_I_seed0.csv"
    assert str(path) in out
    assert len(path.read_text().splitlines()) == 2
    first = path.read_bytes()
    run(capsys, "--out-dir", str(tmp_path), "online", "--family", "chain", "--size", "4", "--budget", "0",
        "--relaxations", "P_I")
    assert path.read_bytes() == first


def test_parser_rejects_unknown_backend():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["--backend", "gpu", "offline"])


def test_model_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.pmdp"
    bad.write_text("params: t in [0,1];\nstate s { action a { -> s : t; } }\n")
    assert main(["learn", "--model", str(bad), "--counts", str(bad)]) == 2
    assert "error" in capsys.readouterr().err
