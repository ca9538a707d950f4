import pytest

from closedrec.cli import main
from closedrec.store import load_model, read_report


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synthdata")
    code = main(["synth", "--users", "200", "--items", "150", "--latent-rank", "4",
                 "--density", "0.06", "--seed", "3", "--out-dir", str(out)])
    assert code == 0
    return out


def test_synth_writes_three_splits(dataset_dir):
    for name in ("train.txt", "val.txt", "test.txt"):
        assert (dataset_dir / name).exists()
    first = (dataset_dir / "train.txt").read_text().splitlines()[0]
    assert len(first.split()) == 2


def test_fit_then_eval_with_saved_model(dataset_dir, tmp_path, capsys):
    # fit sees the same split files so the saved factors share the
    # evaluation bundle's id universe
    model_path = tmp_path / "model.bin"
    code = main(["fit", "--train", str(dataset_dir / "train.txt"),
                 "--val", str(dataset_dir / "val.txt"),
                 "--test", str(dataset_dir / "test.txt"),
                 "--model", "svd-ae", "--gamma", "0.05",
                 "--out", str(model_path)])
    assert code == 0
    loaded = load_model(model_path)
    assert loaded.gamma == 0.05

    report_path = tmp_path / "report.json"
    code = main(["eval", "--train", str(dataset_dir / "train.txt"),
                 "--val", str(dataset_dir / "val.txt"),
                 "--test", str(dataset_dir / "test.txt"),
                 "--load", str(model_path), "--k", "5,10",
                 "--out", str(report_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "HR@10" in out
    metrics = read_report(report_path)["payload"]["metrics"]
    assert {"HR@5", "NDCG@10", "PSP@10"} <= set(metrics)


def test_eval_fits_when_no_model_given(dataset_dir, tmp_path):
    report_path = tmp_path / "ease.json"
    code = main(["eval", "--train", str(dataset_dir / "train.txt"),
                 "--test", str(dataset_dir / "test.txt"),
                 "--model", "ease", "--lambda", "50", "--k", "10",
                 "--out", str(report_path)])
    assert code == 0
    assert "HR@10" in read_report(report_path)["payload"]["metrics"]


def test_sweep_gamma_reports_winner(dataset_dir, tmp_path, capsys):
    report_path = tmp_path / "sweep.json"
    code = main(["sweep-gamma", "--train", str(dataset_dir / "train.txt"),
                 "--val", str(dataset_dir / "val.txt"),
                 "--test", str(dataset_dir / "test.txt"),
                 "--gammas", "0.02,0.05", "--k", "5", "--seed", "1",
                 "--out", str(report_path)])
    assert code == 0
    assert "best gamma" in capsys.readouterr().out
    payload = read_report(report_path)["payload"]
    assert payload["values"] == [0.02, 0.05]
    assert payload["best_index"] in (0, 1)


def test_sweep_lambda(dataset_dir, tmp_path):
    report_path = tmp_path / "lams.json"
    code = main(["sweep-lambda", "--train", str(dataset_dir / "train.txt"),
                 "--test", str(dataset_dir / "test.txt"),
                 "--lambdas", "1,100", "--k", "5", "--out", str(report_path)])
    assert code == 0
    assert read_report(report_path)["payload"]["axis"] == "lambda"


def test_sweep_noise_multiple_models(dataset_dir, tmp_path):
    report_path = tmp_path / "noise.json"
    code = main(["sweep-noise", "--train", str(dataset_dir / "train.txt"),
                 "--test", str(dataset_dir / "test.txt"),
                 "--models", "svd-ae,ease", "--gamma", "0.05", "--lambda", "100",
                 "--ratios", "0.01,0.05", "--k", "5", "--seed", "2",
                 "--out", str(report_path)])
    assert code == 0
    payload = read_report(report_path)["payload"]
    assert payload["type"] == "sweep-list"
    assert len(payload["sweeps"]) == 2


def test_spectrum_export(dataset_dir, tmp_path):
    report_path = tmp_path / "spectrum.json"
    code = main(["spectrum", "--train", str(dataset_dir / "train.txt"),
                 "--rank", "12", "--out", str(report_path)])
    assert code == 0
    values = read_report(report_path)["payload"]["values"]
    assert len(values) == 12
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_stats_histograms(dataset_dir, tmp_path):
    report_path = tmp_path / "stats.json"
    code = main(["stats", "--train", str(dataset_dir / "train.txt"),
                 "--block", "50", "--bins", "20", "--out", str(report_path)])
    assert code == 0
    payload = read_report(report_path)["payload"]
    assert sum(payload["raw"]["counts"]) == 50 * 50
    assert sum(payload["reconstructed"]["counts"]) == 50 * 50


def test_missing_file_is_a_clean_error(tmp_path, capsys):
    code = main(["fit", "--train", str(tmp_path / "absent.txt"),
                 "--model", "svd-ae", "--out", str(tmp_path / "m.bin")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_bad_gamma_is_a_clean_error(dataset_dir, tmp_path, capsys):
    code = main(["fit", "--train", str(dataset_dir / "train.txt"),
                 "--model", "svd-ae", "--gamma", "7.0",
                 "--out", str(tmp_path / "m.bin")])
    assert code == 1
    assert "error:" in capsys.readouterr().err
