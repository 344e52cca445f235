import json

import pytest

from vjmgp.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main, resolve

FAST = ["--pop", "10", "--gens", "2", "--seed", "7"]


def run_cli(tmp_path, *extra, name="out"):
    out = tmp_path / name
    code = main(["--data", "synth:sine", *FAST, "--out", str(out), *extra])
    return code, out


def test_outputs_written(tmp_path):
    code, out = run_cli(tmp_path, "--method", "vjm")
    assert code == EXIT_OK
    lines = (out / "trace.jsonl").read_text().splitlines()
    assert len(lines) == 3
    row = json.loads(lines[0])
    for key in ("best_o1", "best_o2", "archive_combined", "train_r2", "test_r2",
                "evaluations"):
        assert key in row
    assert "elapsed_ms" not in row
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_train"] == 100 and summary["n_test"] == 900
    assert summary["method"] == "vjm" and summary["tau"] in (1.0, 10.0)
    model = (out / "model.txt").read_text()
    assert model.startswith("y = ") and "X0 = (x0 -" in model
    assert "total_s" in json.loads((out / "timing.json").read_text())


def test_standard_disables_vicinal(tmp_path):
    code, out = run_cli(tmp_path, "--method", "standard")
    summary = json.loads((out / "summary.json").read_text())
    assert code == EXIT_OK
    assert summary["tau"] is None and summary["discards"] is None


def test_byte_identical(tmp_path):
    _, a = run_cli(tmp_path, name="a")
    _, b = run_cli(tmp_path, name="b")
    for f in ("trace.jsonl", "summary.json", "model.txt"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_noisy_sine_gets_tau_ten(tmp_path):
    code, out = run_cli(tmp_path, "--method", "vjm", "--label-noise", "1.0")
    summary = json.loads((out / "summary.json").read_text())
    assert code == EXIT_OK and summary["tau"] == 10.0 and summary["mu"] == "inf"


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ndata = synth:linear\npop_size = 8\ngenerations = 1\n"
                   "method = pp\nK = 3\nearly_stop = true\n")
    opts, config = resolve(["--config", str(cfg), "--gens", "2"])
    assert opts["data"] == "synth:linear"
    assert config.pop_size == 8 and config.generations == 2
    assert config.method == "pp" and config.vicinal.K == 3 and config.early_stop


def test_csv_input(tmp_path):
    rows = ["a,c,y"] + [f"{i % 7},{'uv'[i % 2]},{(i % 7) * 0.5 + i % 2}" for i in range(60)]
    rows.insert(5, "1,u")
    path = tmp_path / "d.csv"
    path.write_text("\n".join(rows) + "\n")
    code = main(["--data", str(path), "--target", "y", *FAST, "--out", str(tmp_path / "o")])
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert code == EXIT_OK
    assert summary["rejected_rows"] == 1 and summary["n_train"] == 30


@pytest.mark.parametrize("argv,code", [
    (["--data", "missing.csv"], EXIT_DATA),
    (["--data", "synth:nothing"], EXIT_DATA),
    (["--pop", "x", "--data", "synth:sine"], EXIT_USAGE),
    (["--method", "wcrv", "--data", "synth:sine"], EXIT_USAGE),
    (["--gens", "1"], EXIT_USAGE),
    (["--data", "synth:sine", "--mu", "-1"], EXIT_USAGE),
    (["--data", "synth:sine", "--train-size", "5000"], EXIT_USAGE),
])
def test_exit_codes(tmp_path, argv, code):
    assert main([*argv, "--out", str(tmp_path / "o")]) == code
