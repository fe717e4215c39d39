import json

import pytest

from stagekit.cli import main


def _read(path):
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture(scope="module")
def cohort_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "cohort.csv"
    assert main(["simulate", "--n", "240", "--seed", "1", "--out", str(path)]) == 0
    return path


def test_simulate_writes_csv_and_echo(cohort_csv):
    echo = _read(cohort_csv.with_name("cohort.config.json"))
    assert echo["config"]["n"] == 240 and "timestamp" in echo
    assert cohort_csv.read_text().splitlines()[0].endswith("stage,group")


def test_eval_defaults_are_echoed(tmp_path, cohort_csv):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"folds": 3}))
    run = tmp_path / "run"
    code = main(["eval", "--data", str(cohort_csv), "--model", "majority", "--config", str(cfg),
                 "--repeats", "2", "--out-dir", str(run), "--workers", "1"])
    assert code == 0
    echo = _read(run / "config-eval-majority.json")["config"]
    assert echo["folds"] == 3 and echo["repeats"] == 2 and echo["seed"] == 0
    doc = _read(run / "eval-majority.json")
    assert doc["aggregate"]["n_repeats"] == 2


def test_eval_default_plan_is_ten_by_hundred(cohort_csv, tmp_path, monkeypatch):
    import stagekit.cli as cli

    seen = {}

    def fake(cfg):
        seen.update(cfg)
        return {}

    monkeypatch.setitem(cli.COMMANDS, "eval", fake)
    assert main(["eval", "--data", str(cohort_csv), "--model", "knn"]) == 0
    assert seen["folds"] == 10 and seen["repeats"] == 100


def test_flag_beats_config_beats_default(tmp_path, cohort_csv):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 0.01, "seed": 5}))
    run = tmp_path / "run"
    assert main(["screen", "--data", str(cohort_csv), "--config", str(cfg), "--seed", "7",
                 "--out-dir", str(run)]) == 0
    echo = _read(run / "config-screen.json")["config"]
    assert echo["alpha"] == 0.01 and echo["seed"] == 7 and echo["mode"] == "stage"


@pytest.mark.parametrize("argv", [
    ["eval", "--bogus"],
    ["frobnicate"],
    ["eval", "--model", "lasso"],
    ["eval", "--params", "{not json"],
])
def test_usage_errors_exit_2(argv, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    assert json.loads(capsys.readouterr().err.splitlines()[0])["exit_code"] == 2
    assert list(tmp_path.iterdir()) == []


def test_unknown_config_key_exit_2(tmp_path, cohort_csv, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["screen", "--data", str(cohort_csv), "--config", str(cfg)]) == 2
    assert "colour" in capsys.readouterr().err


def test_missing_model_exit_2(cohort_csv, tmp_path):
    assert main(["train", "--data", str(cohort_csv), "--out-dir", str(tmp_path / "r")]) == 2


def test_data_errors_exit_3(tmp_path, capsys):
    assert main(["screen", "--data", str(tmp_path / "none.csv")]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("a,stage\n1,9\n")
    assert main(["screen", "--data", str(bad), "--out-dir", str(tmp_path / "r")]) == 3
    err = json.loads(capsys.readouterr().err.splitlines()[-1])
    assert err["error"] == "data"


def test_train_saves_content_addressed_model(tmp_path, cohort_csv):
    run = tmp_path / "run"
    assert main(["train", "--data", str(cohort_csv), "--preset", "paper-forest",
                 "--params", '{"n_trees": 3}', "--out-dir", str(run)]) == 0
    doc = _read(run / "train-forest.json")
    model_files = list((run / "models").iterdir())
    assert len(model_files) == 1 and model_files[0].stem == doc["model_sha256"][:16]
    assert len(doc["param_hash"]) == 64
    assert doc["params"]["costs"] == [2.3732, 12.4722, 1.3256]


def test_tune_then_eval_tuned(tmp_path, cohort_csv):
    run = tmp_path / "run"
    assert main(["tune", "--data", str(cohort_csv), "--model", "pgm", "--population", "4",
                 "--generations", "1", "--out-dir", str(run), "--workers", "1"]) == 0
    tuned = run / "tune-pgm.json"
    assert len(_read(tuned)["trace"]) == 2
    assert main(["eval", "--data", str(cohort_csv), "--tuned", str(tuned), "--folds", "3",
                 "--repeats", "1", "--out-dir", str(run), "--workers", "1"]) == 0
    assert (run / "eval-pgm.json").exists()


def test_report_tolerates_partial_and_malformed(tmp_path, cohort_csv):
    run = tmp_path / "run"
    assert main(["screen", "--data", str(cohort_csv), "--out-dir", str(run)]) == 0
    (run / "eval-knn.json").write_text("{broken")
    assert main(["report", str(run)]) == 0
    index = _read(run / "report" / "index.json")
    assert "screening.csv" in index["files"]
    assert "tune" in index["missing"] and "importance" in index["missing"]
    assert index["errors"][0]["artifact"] == "eval-knn.json"


def test_report_empty_dir_exit_3(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["report", str(tmp_path / "empty")]) == 3
