import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest
import yaml

from qkanseq import cells, cli, config
from qkanseq import train as tr
from qkanseq.data import read_series_csv


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def small_config(tmp_path, kind="qkan", **train):
    doc = {
        "dataset": {"kind": "shm", "seq_len": 4, "zeta": 0.05, "n_points": 120},
        "model": {"kind": kind, "hidden": 1, **({"n_qubits": 2} if kind == "qlstm" else {})},
        "train": {"learning_rate": 0.01, "epochs": 2, "batch_size": 8, "seed": 3, **train},
    }
    path = tmp_path / f"{kind}.yaml"
    path.write_text(yaml.safe_dump(doc))
    return path


# ---------------------------------------------------------------------------
# generate


def test_generate_undamped(tmp_path, capsys):
    out = tmp_path / "shm.csv"
    code, _, _ = run(["generate", "shm", "--zeta", 0, "--points", 100, "--out", out], capsys)
    assert code == 0
    s = read_series_csv(out)
    assert np.allclose(s.y, np.cos(2 * np.pi * s.t), atol=1e-14)


def test_generate_bessel_rows(tmp_path, capsys):
    out = tmp_path / "b.csv"
    code, _, _ = run(["generate", "bessel", "--order", 2, "--points", 3, "--xmax", 2, "--out", out], capsys)
    assert code == 0
    rows = read_rows(out)
    assert [float(r["y"]) for r in rows][0] == 0.0
    assert float(rows[1]["y"]) == pytest.approx(0.11490348493190048, abs=1e-15)
    assert float(rows[2]["y"]) == pytest.approx(0.352834, abs=1e-6)
    assert out.read_bytes().count(b"\r") == 0


def test_generate_surrogate_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(["generate", "telecom-surrogate", "--seed", 7, "--points", 500, "--out", p], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_unsupported_regime(tmp_path, capsys):
    code, _, err = run(["generate", "shm", "--zeta", 1.5, "--out", tmp_path / "x.csv"], capsys)
    assert code == 1 and "underdamped" in err


# ---------------------------------------------------------------------------
# train / evaluate


def test_train_writes_artifacts_and_evaluate_matches(tmp_path, capsys):
    cfg = small_config(tmp_path)
    out = tmp_path / "run"
    code, stdout, _ = run(["train", "--config", cfg, "--out", out], capsys)
    assert code == 0
    line = json.loads(stdout.strip().splitlines()[-1])
    for name in ("history.csv", "params.csv", "predictions.csv", "checkpoint.json", "config.yaml"):
        assert (out / name).exists()
    hist = read_rows(out / "history.csv")
    assert list(hist[0]) == ["epoch", "train_loss", "test_loss", "mae", "r2"] and len(hist) == 2
    params = read_rows(out / "params.csv")
    assert params[0]["model"] == "qkan" and int(params[0]["quantum"]) == 32

    code, stdout, _ = run(["evaluate", out / "checkpoint.json", "--out", tmp_path / "ev"], capsys)
    assert code == 0
    ev = json.loads(stdout.strip())
    assert ev["mse"] == pytest.approx(float(hist[-1]["test_loss"]), abs=1e-12)
    assert ev["mae"] == pytest.approx(float(hist[-1]["mae"]), abs=1e-12)
    assert ev["r2"] == pytest.approx(float(hist[-1]["r2"]), abs=1e-12)
    assert ev["mse"] == pytest.approx(line["mse"], abs=1e-12)
    assert (tmp_path / "ev" / "predictions.csv").read_bytes() == (out / "predictions.csv").read_bytes()


def test_zero_lr_smoke_run(tmp_path, capsys):
    cfg = small_config(tmp_path, kind="lstm", learning_rate=0.0, epochs=3)
    out = tmp_path / "run"
    assert run(["train", "--config", cfg, "--out", out], capsys)[0] == 0
    losses = {r["test_loss"] for r in read_rows(out / "history.csv")}
    assert len(losses) == 1


def test_evaluate_empty_split(tmp_path, capsys):
    doc = yaml.safe_load(small_config(tmp_path).read_text())
    doc["dataset"]["ratios"] = [0.85, 0.0, 0.15]
    cfg = tmp_path / "noval.yaml"
    cfg.write_text(yaml.safe_dump(doc))
    out = tmp_path / "run"
    assert run(["train", "--config", cfg, "--out", out], capsys)[0] == 0
    code, _, err = run(["evaluate", out / "checkpoint.json", "--split", "val"], capsys)
    assert code == 1 and "empty" in err


def test_evaluate_dimension_mismatch(tmp_path, capsys):
    ck = tmp_path / "two.json"
    tr.save_checkpoint(cells.init_cell("lstm", 2, 1, seed=0), None, ck)
    code, _, err = run(["evaluate", ck, "--config", small_config(tmp_path)], capsys)
    assert code == 1 and "input features" in err


def test_evaluate_missing_and_corrupt_checkpoint(tmp_path, capsys):
    assert run(["evaluate", tmp_path / "none.json", "--config", small_config(tmp_path)], capsys)[0] == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{\"format\": ")
    assert run(["evaluate", bad, "--config", small_config(tmp_path)], capsys)[0] == 3


def test_invalid_config_lists_fields(tmp_path, capsys):
    doc = {"dataset": {"kind": "moon", "seq_len": 0}, "model": {"kind": "qkan", "hidden": 0, "colour": 1},
           "train": {"epochs": 0, "learning_rate": -1}}
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(yaml.safe_dump(doc))
    code, _, err = run(["train", "--config", cfg], capsys)
    assert code == 1
    for field in ("dataset.kind", "dataset.seq_len", "model.hidden", "model.colour", "train.epochs",
                  "train.learning_rate"):
        assert field in err


def test_config_path_must_exist(tmp_path, capsys):
    doc = {"dataset": {"kind": "csv", "seq_len": 4, "path": str(tmp_path / "nope.csv")},
           "model": {"kind": "lstm", "hidden": 1}}
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump(doc))
    code, _, err = run(["train", "--config", cfg], capsys)
    assert code == 1 and "dataset.params.path" in err
    assert run(["train", "--config", tmp_path / "missing.yaml"], capsys)[0] == 1


def test_telecom_seq_len_checked(capsys):
    code, _, err = run(["train", "--preset", "telecom-qkan", "--surrogate", "--seq-len", 5], capsys)
    assert code == 1 and "dataset.seq_len" in err


def test_config_or_preset_exclusive(tmp_path, capsys):
    assert run(["train"], capsys)[0] == 1
    assert run(["train", "--preset", "shm-qkan", "--config", small_config(tmp_path)], capsys)[0] == 1
    assert run(["train", "--preset", "shm-gru"], capsys)[0] == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_exit_code(tmp_path, capsys):
    cfg = small_config(tmp_path, kind="lstm", learning_rate=1e300)
    code, _, err = run(["train", "--config", cfg, "--out", tmp_path / "run"], capsys)
    assert code == 2 and "diverged" in err


def test_input_files_not_mutated(tmp_path, capsys):
    src = tmp_path / "series.csv"
    assert run(["generate", "bessel", "--points", 80, "--out", src], capsys)[0] == 0
    before = src.read_bytes()
    doc = {"dataset": {"kind": "csv", "seq_len": 4, "path": str(src)}, "model": {"kind": "lstm", "hidden": 1},
           "train": {"epochs": 1}}
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump(doc))
    cfg_before = cfg.read_bytes()
    assert run(["train", "--config", cfg, "--out", tmp_path / "run"], capsys)[0] == 0
    assert src.read_bytes() == before and cfg.read_bytes() == cfg_before


# ---------------------------------------------------------------------------
# telecom data source


def test_missing_telecom_data_is_actionable(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv(config.DATA_DIR_ENV, raising=False)
    code, _, err = run(["benchmark", "telecom", "--models", "qkan", "--out", tmp_path / "b"], capsys)
    assert code == 1
    assert config.DATA_DIR_ENV in err and "--surrogate" in err


def test_telecom_from_data_dir(tmp_path, capsys, monkeypatch):
    from qkanseq.data import SLOT_MS

    root = tmp_path / "milan"
    root.mkdir()
    rng = np.random.default_rng(0)
    lines = []
    for k in range(300):
        ts = 1383260400000 + k * SLOT_MS
        for cell, scale in ((1, 1.0), (2, 3.0)):
            lines.append(f"{cell}\t{ts}\t39\t{scale * (5 + np.sin(k / 10) + rng.random()):.6f}\t\t\t\t\n")
    (root / "sms-call-internet-mi-2013-11-01.txt").write_text("".join(lines))
    monkeypatch.setenv(config.DATA_DIR_ENV, str(root))
    spec = config.load_preset("telecom-lstm").dataset
    series = config.load_series(spec)
    assert series.source == "telecom:2" and len(series) == 300
    code, out, _ = run(["train", "--preset", "telecom-lstm", "--epochs", 1, "--out", tmp_path / "r"], capsys)
    assert code == 0 and "mse" in out


# ---------------------------------------------------------------------------
# benchmark / params


def test_benchmark_summary_and_determinism(tmp_path, capsys):
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        code, _, _ = run(["benchmark", "bessel", "--models", "lstm,qkan,hqkan", "--epochs", 2, "--seq-len", 4,
                          "--out", o], capsys)
        assert code == 0
    rows = read_rows(outs[0] / "summary.csv")
    assert tuple(rows[0]) == cli.SUMMARY_COLUMNS
    assert [r["model"] for r in rows] == ["lstm", "qkan", "hqkan"]
    for r in rows:
        rep = tr.count_params(config.load_preset(f"bessel-{r['model']}").model.build(seed=0))
        assert (int(r["classical"]), int(r["quantum"]), int(r["total"])) == (rep.classical, rep.quantum, rep.total)
    plot = read_rows(outs[0] / "plot_T4.csv")
    assert list(plot[0]) == ["index", "target", "lstm", "qkan", "hqkan"]
    files = sorted(os.path.relpath(os.path.join(d, f), outs[0]) for d, _, fs in os.walk(outs[0]) for f in fs)
    for rel in files:
        if rel.endswith(".csv"):
            assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes(), rel


def test_benchmark_bad_suite_and_models(tmp_path, capsys):
    assert run(["benchmark", "weather"], capsys)[0] == 1
    assert run(["benchmark", "shm", "--models", "gru"], capsys)[0] == 1


def test_params_command(tmp_path, capsys):
    out = tmp_path / "p.csv"
    code, stdout, _ = run(["params", "--suite", "bessel", "--out", out], capsys)
    assert code == 0
    rows = {r["model"]: r for r in read_rows(out)}
    assert int(rows["bessel-qkan"]["quantum"]) == 32 and int(rows["bessel-hqkan"]["quantum"]) == 8
    assert stdout.splitlines()[0] == "model,classical,quantum,total"


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "b.csv"
    res = subprocess.run([sys.executable, "-m", "qkanseq.cli", "generate", "bessel", "--points", "3", "--xmax", "2",
                          "--out", str(out)], capture_output=True, text=True)
    assert res.returncode == 0 and out.exists()
