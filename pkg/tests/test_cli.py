import json
import subprocess
import sys

import pytest

from conftest import GOLDEN, WORD_BALANCED, WORD_PREFIX, WORD_WRONG_CLOSER, open_then_close_dfa, parity_dfa
from dycknet.cli import EXIT_MISMATCH, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main

WORDS = (WORD_BALANCED, WORD_PREFIX, WORD_WRONG_CLOSER)


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _compile(capsys, *argv):
    code, out, _ = run_cli(capsys, "compile", *argv)
    assert code == EXIT_OK
    return out


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["compile", "dyck-rnn", "--n", "2", "-o", str(d / "d2.json")]) == 0
    assert main(["compile", "dyck-gru", "--n", "2", "--k", "5", "-o", str(d / "d2gru.json")]) == 0
    (d / "parity.json").write_text(json.dumps(parity_dfa().to_json()))
    cfl = {"n": 1, "regular": open_then_close_dfa().to_json()}
    (d / "anbn.json").write_text(json.dumps(cfl))
    return d


def test_compile_dyck_rnn(files):
    data = json.loads((files / "d2.json").read_text())
    assert data["model"] == "simple_rnn" and len(data["h0"]) == 6


def test_compile_dyck_gru_start_vector(files):
    data = json.loads((files / "d2gru.json").read_text())
    assert data["h0"][0].startswith("0.024")
    assert data["Uz"][3][0] == "+inf"


def test_compile_dfa_rnn(files, capsys):
    code, out, _ = run_cli(capsys, "compile", "dfa-rnn", files / "parity.json")
    assert code == EXIT_OK and len(json.loads(out)["h0"]) == 4


def test_compile_cfl_models(files, capsys):
    code, out, _ = run_cli(capsys, "compile", "cfl-rnn", files / "anbn.json")
    assert code == EXIT_OK and len(json.loads(out)["h0"]) == 6 + 2 * 3
    code, out, _ = run_cli(capsys, "compile", "cfl-gru", files / "anbn.json", "--precision", "80")
    assert code == EXIT_OK and len(json.loads(out)["h0"]) == 8 + 2 * 3


def test_run(files, capsys):
    assert run_cli(capsys, "run", files / "d2.json", WORD_BALANCED)[1] == "o = 0 ACCEPT\n"
    assert run_cli(capsys, "run", files / "d2.json")[1] == "o = 0 ACCEPT\n"
    assert run_cli(capsys, "run", files / "d2.json", WORD_WRONG_CLOSER)[1] == "o = 271 REJECT\n"
    assert run_cli(capsys, "run", files / "d2gru.json", WORD_BALANCED)[1] == "o = 0.024 ACCEPT\n"


@pytest.mark.parametrize("index", range(3))
@pytest.mark.parametrize("model", ["rnn", "gru"])
def test_trace_matches_golden(files, capsys, model, index):
    weights = files / ("d2.json" if model == "rnn" else "d2gru.json")
    code, out, _ = run_cli(capsys, "trace", weights, WORDS[index])
    assert code == EXIT_OK
    assert out.encode() == (GOLDEN / f"{model}_d2_word{index + 1}.txt").read_bytes()


def test_trace_final_line(files, capsys):
    out = run_cli(capsys, "trace", files / "d2gru.json", WORD_PREFIX)[1]
    assert out.splitlines()[-1] == "o_5 = 0.805 REJECT"


def test_trace_gates(files, capsys):
    out = run_cli(capsys, "trace", files / "d2gru.json", "(1", "--gates")[1]
    lines = out.splitlines()
    assert lines[2].startswith("z_1 = [") and lines[3].startswith("r_1 = [")


def test_verify_dyck_rnn(files, capsys):
    code, out, _ = run_cli(capsys, "verify", files / "d2.json", "--dyck", 2, "--trials", 600, "--max-len", 40)
    assert code == EXIT_OK
    assert "mismatches: 0" in out


def test_verify_dyck_gru_json(files, capsys):
    code, out, _ = run_cli(capsys, "verify", files / "d2gru.json", "--dyck", 2, "--trials", 150, "--max-len", 20, "--json")
    report = json.loads(out)
    assert code == EXIT_OK and report["ok"] and report["trials"] == 150
    assert set(report["per_class"]) == {"in_dyck", "in_prefix", "neither"}


def test_verify_cfl(files, capsys):
    (files / "anbn_rnn.json").write_text(_compile(capsys, "cfl-rnn", files / "anbn.json"))
    code, out, _ = run_cli(capsys, "verify", files / "anbn_rnn.json", "--cfl", files / "anbn.json", "--trials", 300)
    assert code == EXIT_OK, out


def test_verify_detects_a_corrupted_weight(files, capsys, tmp_path):
    data = json.loads((files / "d2.json").read_text())
    data["Wx"][0][0] = "1/5"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    code, out, _ = run_cli(capsys, "verify", bad, "--dyck", 2, "--trials", 300, "--max-len", 20)
    assert code == EXIT_MISMATCH
    assert "FAIL" in out


def test_verify_seed_from_environment(files, capsys, monkeypatch):
    monkeypatch.setenv("SEED", "7")
    out = run_cli(capsys, "verify", files / "d2.json", "--dyck", 2, "--trials", 30, "--json")[1]
    assert json.loads(out)["seed"] == 7
    monkeypatch.setenv("SEED", "seven")
    assert run_cli(capsys, "verify", files / "d2.json", "--dyck", 2, "--trials", 30)[0] == EXIT_USAGE


def test_verify_parallel_matches_serial(files, capsys):
    args = ("verify", files / "d2.json", "--dyck", 2, "--trials", 200, "--max-len", 30, "--json")
    serial = json.loads(run_cli(capsys, *args)[1])
    parallel = json.loads(run_cli(capsys, *args, "--jobs", 2)[1])
    assert serial["per_class"] == parallel["per_class"] and serial["mismatches"] == parallel["mismatches"]


def test_extract_parity(files, capsys, tmp_path):
    rnn = tmp_path / "parity_rnn.json"
    rnn.write_text(_compile(capsys, "dfa-rnn", files / "parity.json"))
    code, out, err = run_cli(capsys, "extract", rnn, "--int-bits", 4, "--frac-bits", 8, "--dfa", files / "parity.json")
    assert code == EXIT_OK
    assert "agrees with the reference" in err
    assert len(json.loads(out)["states"]) >= 2


def test_extract_dyck_reports_divergence(files, capsys):
    code, out, err = run_cli(capsys, "extract", files / "d2.json", "--int-bits", 3, "--frac-bits", 4, "--dyck", 2)
    assert code == EXIT_OK
    assert "first divergence: [" in err


def test_extract_rejects_gru(files, capsys):
    assert run_cli(capsys, "extract", files / "d2gru.json")[0] == EXIT_USAGE


def test_round_trip_through_a_file(files, capsys, tmp_path):
    path = tmp_path / "again.json"
    path.write_text((files / "d2.json").read_text())
    assert run_cli(capsys, "run", path, WORD_PREFIX)[1] == "o = 0.8 REJECT\n"


def test_exit_codes(files, capsys, tmp_path):
    assert run_cli(capsys, "compile", "dyck-gru", "--n", 2, "--k", 4)[0] == EXIT_NUMERIC
    assert run_cli(capsys, "run", files / "d2.json", "(1 )3")[0] == EXIT_USAGE
    assert run_cli(capsys, "run", tmp_path / "missing.json", "(1")[0] == EXIT_USAGE
    garbage = tmp_path / "garbage.json"
    garbage.write_text("{not json")
    assert run_cli(capsys, "run", garbage, "(1")[0] == EXIT_USAGE
    assert run_cli(capsys, "compile", "dyck-rnn")[0] == EXIT_USAGE


def test_module_entry_point(files):
    result = subprocess.run(
        [sys.executable, "-m", "dycknet", "run", str(files / "d2.json"), WORD_BALANCED],
        capture_output=True, text=True, check=False,
    )
    assert result.returncode == 0 and result.stdout == "o = 0 ACCEPT\n"
